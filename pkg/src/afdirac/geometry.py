"""Pointwise spin geometry built from analytic metric jets.

Conventions: coordinate indices are raised/lowered with h, frame indices
with the Kronecker delta.  The dreibein is the unique symmetric positive
definite square root of the inverse metric; its derivatives solve the
Sylvester relation de.e + e.de = d(h^-1).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SqrtFailure
from .metric import (
    DecayReport,
    MetricParams,
    MetricSample,
    Taper,
    eval_metric,
    japanese_bracket,
)

_EIG_FLOOR = 1e-12


@dataclass
class GeometryAtPoint:
    """All point-local geometric tensors derived from one metric sample.

    Layouts: gamma[..., i, j, k] = Gamma^i_jk (symmetric in j,k),
    dgamma[..., m, i, j, k] = d_m Gamma^i_jk, e[..., i, a] the symmetric
    dreibein, de[..., m, i, a], omega[..., j, a, b] = omega_j^ab,
    domega[..., m, j, a, b], B[..., j, :, :] complex 4x4, dB[..., m, j, :, :].
    """

    gamma: np.ndarray
    dgamma: np.ndarray
    R_h: np.ndarray
    e: np.ndarray
    de: np.ndarray
    d2e: np.ndarray
    omega: np.ndarray
    domega: np.ndarray
    B: np.ndarray
    dB: np.ndarray


def inverse_metric_jets(sample: MetricSample):
    """Jets of H = h^-1 to second order from the jets of h."""
    H = sample.h_inv
    dH = -np.einsum("...il,...alm,...mj->...aij", H, sample.d1h, H)
    d2H = -np.einsum("...il,...ablm,...mj->...abij", H, sample.d2h, H)
    cross = np.einsum("...il,...alm,...mp,...bpq,...qj->...abij", H, sample.d1h, H, sample.d1h, H)
    d2H = d2H + cross + np.swapaxes(cross, -4, -3)
    return H, dH, d2H


def christoffel(sample: MetricSample) -> np.ndarray:
    """Gamma^i_jk = 1/2 h^il (d_j h_lk + d_k h_jl - d_l h_jk)."""
    d = sample.d1h
    T = (
        np.einsum("...jlk->...ljk", d)
        + np.einsum("...kjl->...ljk", d)
        - np.einsum("...ljk->...ljk", d)
    )
    return 0.5 * np.einsum("...il,...ljk->...ijk", sample.h_inv, T)


def christoffel_derivative(sample: MetricSample) -> np.ndarray:
    """d_m Gamma^i_jk from second-order metric jets."""
    d, d2 = sample.d1h, sample.d2h
    H, dH, _ = inverse_metric_jets(sample)
    T = (
        np.einsum("...jlk->...ljk", d)
        + np.einsum("...kjl->...ljk", d)
        - np.einsum("...ljk->...ljk", d)
    )
    dT = (
        np.einsum("...mjlk->...mljk", d2)
        + np.einsum("...mkjl->...mljk", d2)
        - np.einsum("...mljk->...mljk", d2)
    )
    return 0.5 * (
        np.einsum("...mil,...ljk->...mijk", dH, T)
        + np.einsum("...il,...mljk->...mijk", H, dT)
    )


def scalar_curvature(
    sample: MetricSample,
    gamma: np.ndarray | None = None,
    dgamma: np.ndarray | None = None,
) -> np.ndarray:
    """R_h = h^jk (d_i G^i_jk - d_k G^i_ji + G^l_jk G^i_il - G^l_ji G^i_kl)."""
    if gamma is None:
        gamma = christoffel(sample)
    if dgamma is None:
        dgamma = christoffel_derivative(sample)
    t1 = np.einsum("...iijk->...jk", dgamma)
    t2 = np.einsum("...kiji->...jk", dgamma)
    t3 = np.einsum("...ljk,...iil->...jk", gamma, gamma)
    t4 = np.einsum("...lji,...ikl->...jk", gamma, gamma)
    return np.einsum("...jk,...jk->...", sample.h_inv, t1 - t2 + t3 - t4)


def _sylvester_sqrt_solve(V, s, M):
    """Solve X e + e X = M for symmetric X, e = V diag(s) V^T."""
    Mt = np.einsum("...pi,...pq,...qj->...ij", V, M, V)
    X = Mt / (s[..., :, None] + s[..., None, :])
    return np.einsum("...ip,...pq,...jq->...ij", V, X, V)


def dreibein(sample: MetricSample, order: int = 2):
    """Symmetric square root e of h^-1 with first/second derivatives.

    Returns (e, de, d2e); d2e is None when order < 2.
    """
    H, dH, d2H = inverse_metric_jets(sample)
    lam, V = np.linalg.eigh(H)
    if np.min(lam) < _EIG_FLOOR:
        raise SqrtFailure("inverse metric eigenvalue below floor")
    s = np.sqrt(lam)
    e = np.einsum("...ip,...p,...jp->...ij", V, s, V)
    de = np.stack(
        [_sylvester_sqrt_solve(V, s, dH[..., m, :, :]) for m in range(3)], axis=-3
    )
    if order < 2:
        return e, de, None
    d2e = np.empty_like(d2H)
    for m in range(3):
        for n in range(3):
            rhs = d2H[..., m, n, :, :] - (
                de[..., m, :, :] @ de[..., n, :, :]
                + de[..., n, :, :] @ de[..., m, :, :]
            )
            d2e[..., m, n, :, :] = _sylvester_sqrt_solve(V, s, rhs)
    return e, de, d2e


def spin_connection(e, de, gamma) -> np.ndarray:
    """omega_j^ab = -e_i^a (d_j e^ib + Gamma^i_jk e^kb).

    Frame indices are raised with delta and coordinate indices with h, so
    e_i^a is the inverse of the symmetric dreibein.  This is the unique
    reading under which the connection is metric, omega comes out
    antisymmetric in (a, b), and the squared Dirac operator reproduces the
    Lichnerowicz identity D^2 = -Delta_h + R_h/4 (the overall sign is fixed
    by that identity).
    """
    einv = np.linalg.inv(e)
    t1 = np.einsum("...ia,...jib->...jab", einv, de)
    t2 = np.einsum("...ia,...ijk,...kb->...jab", einv, gamma, e)
    return -(t1 + t2)


def spin_connection_derivative(e, de, d2e, gamma, dgamma) -> np.ndarray:
    """d_m omega_j^ab by the chain rule through the dreibein and Gamma."""
    einv = np.linalg.inv(e)
    deinv = -np.einsum("...ip,...mpq,...qj->...mij", einv, de, einv)
    t1 = np.einsum("...mia,...jib->...mjab", deinv, de)
    t2 = np.einsum("...ia,...mjib->...mjab", einv, d2e)
    t3 = np.einsum("...mia,...ijk,...kb->...mjab", deinv, gamma, e)
    t4 = np.einsum("...ia,...mijk,...kb->...mjab", einv, dgamma, e)
    t5 = np.einsum("...ia,...ijk,...mkb->...mjab", einv, gamma, de)
    return -(t1 + t2 + t3 + t4 + t5)


def connection_B(omega: np.ndarray, gammaset) -> np.ndarray:
    """B_j = 1/8 [gamma_a, gamma_b] omega_j^ab (anti-Hermitian 4x4 each)."""
    return 0.125 * np.einsum("...jab,abcd->...jcd", omega, gammaset.commutators)


def connection_B_derivative(domega: np.ndarray, gammaset) -> np.ndarray:
    """d_m B_j from the spin-connection derivative."""
    return 0.125 * np.einsum("...mjab,abcd->...mjcd", domega, gammaset.commutators)


def geometry_at(
    params: MetricParams,
    x: np.ndarray,
    gammaset,
    taper: Taper | None = None,
) -> GeometryAtPoint:
    """Evaluate the full geometric jet at points x."""
    sample = eval_metric(params, x, order=3, taper=taper)
    gamma = christoffel(sample)
    dgamma = christoffel_derivative(sample)
    R = scalar_curvature(sample, gamma, dgamma)
    e, de, d2e = dreibein(sample)
    omega = spin_connection(e, de, gamma)
    domega = spin_connection_derivative(e, de, d2e, gamma, dgamma)
    B = connection_B(omega, gammaset)
    dB = connection_B_derivative(domega, gammaset)
    return GeometryAtPoint(
        gamma=gamma,
        dgamma=dgamma,
        R_h=R,
        e=e,
        de=de,
        d2e=d2e,
        omega=omega,
        domega=domega,
        B=B,
        dB=dB,
    )


def geometry_decay_report(
    params: MetricParams,
    probes: np.ndarray,
    gammaset,
    threshold: float = 1.0,
) -> DecayReport:
    """Weighted sups of |B|, |dB|, |R_h| and |Gamma| over the probe set."""
    geo = geometry_at(params, probes, gammaset)
    bracket = japanese_bracket(probes)
    sigma = params.decay_sigma

    def sup(q, power):
        mags = np.abs(q).reshape(bracket.shape + (-1,)).max(axis=-1)
        return float(np.max(mags * bracket**power))

    report = DecayReport(sigma=sigma, threshold=threshold)
    report.sups["B"] = sup(geo.B, 2 + sigma)
    report.sups["dB"] = sup(geo.dB, 3 + sigma)
    report.sups["R_h"] = sup(geo.R_h[..., None], 3 + sigma)
    report.sups["Gamma"] = sup(geo.gamma, 2 + sigma)
    return report
