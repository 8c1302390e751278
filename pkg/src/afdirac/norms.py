"""Norm functionals for the dispersive estimates.

Fractional Sobolev norms on the curved manifold are computed through a
flat-multiplier proxy: the field is mapped by the unitary density transform
f -> (det h)^(1/4) f, the flat Fourier multiplier |k|^s or (1+|k|^2)^(s/2)
is applied, and the flat Lebesgue L^r norm is taken.  The r = 2 cases are
cross-validated against exact quadratic forms of the curved Laplacian.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ExcludedEndpoint, NotAdmissible, ZeroModeDominance
from .evolution import Trajectory
from .operators import (
    GeometryField,
    SpinorField,
    apply_dirac,
    gradient,
    l2_norm_Mh,
    scalar_laplace_beltrami,
)

_ADMISSIBLE_TOL = 1e-12


@dataclass(frozen=True)
class AdmissibleTriple:
    """Strichartz exponent triple (s, q, r) of wave or Klein-Gordon kind."""

    s: float
    q: float
    r: float
    kind: str = "Wave"  # "Wave" or "KleinGordon"

    def __post_init__(self):
        if self.kind not in ("Wave", "KleinGordon"):
            raise ValueError("kind must be 'Wave' or 'KleinGordon'")


def is_admissible(triple: AdmissibleTriple, tol: float = _ADMISSIBLE_TOL) -> bool:
    """Check the defining scaling identities of the admissibility classes."""
    s, q, r = triple.s, triple.q, triple.r
    if q < 2.0 - tol:
        return False
    if triple.kind == "Wave":
        if r < 2.0 - tol or not np.isfinite(r):
            return False
        return (
            abs(1.0 / q - (0.5 - 1.0 / r)) <= tol
            and abs(s - (0.5 - 1.0 / r + 1.0 / q)) <= tol
        )
    if r < 2.0 - tol or r > 6.0 + tol:
        return False
    return (
        abs(2.0 / q - (1.5 - 3.0 / r)) <= tol
        and abs(s - (0.5 - 1.0 / r + 1.0 / q)) <= tol
    )


def excluded_massive_endpoint(triple: AdmissibleTriple, tol: float = _ADMISSIBLE_TOL) -> bool:
    """The massive estimate requires q > 2; q = 2 triples are excluded."""
    return triple.q <= 2.0 + tol


@dataclass
class NormReport:
    """One measured functional with its estimate normalizer and ratio."""

    name: str
    value: float
    normalizer: float
    triple: AdmissibleTriple | None = None
    epsilon: float | None = None
    meta: dict | None = None

    @property
    def ratio(self) -> float:
        if self.normalizer == 0.0:
            return 0.0 if self.value == 0.0 else float("inf")
        return self.value / self.normalizer

    def as_dict(self) -> dict:
        d = {
            "name": self.name,
            "value": self.value,
            "normalizer": self.normalizer,
            "ratio": self.ratio,
        }
        if self.triple is not None:
            d["triple"] = {
                "s": self.triple.s,
                "q": self.triple.q,
                "r": self.triple.r,
                "kind": self.triple.kind,
            }
        if self.epsilon is not None:
            d["epsilon"] = self.epsilon
        if self.meta:
            d["meta"] = dict(self.meta)
        return d


# ---------------------------------------------------------------------------
# Basic norms.
# ---------------------------------------------------------------------------


def lp_norm_Mh(values: np.ndarray, geo: GeometryField, p: float) -> float:
    """L^p(M_h) norm with the sqrt(det h) volume weight; |f| is the C^4 magnitude."""
    mag = np.sqrt(np.sum(np.abs(values) ** 2, axis=0))
    if np.isinf(p):
        return float(mag.max())
    w = 1.0 if geo.is_flat else geo.sqrt_det
    dv = geo.grid.spacing**3
    return float((np.sum(mag**p * w) * dv) ** (1.0 / p))


def _flat_lp(values: np.ndarray, geo: GeometryField, p: float) -> float:
    mag = np.sqrt(np.sum(np.abs(values) ** 2, axis=0))
    if np.isinf(p):
        return float(mag.max())
    return float((np.sum(mag**p) * geo.grid.spacing**3) ** (1.0 / p))


def _k2_grid(geo: GeometryField) -> np.ndarray:
    k = geo.grid.freqs
    return k[:, None, None] ** 2 + k[None, :, None] ** 2 + k[None, None, :] ** 2


def sobolev_norm(
    values: np.ndarray,
    geo: GeometryField,
    s: float,
    r: float = 2.0,
    homogeneous: bool = True,
    zero_mode_tol: float = 0.01,
) -> float:
    """Proxy H^s_r(M_h) norm via flat multipliers on the density transform.

    For homogeneous norms with s < 0 the zero frequency is projected out;
    ZeroModeDominance is raised if that mode carries more than
    zero_mode_tol of the field's L2 mass.
    """
    if not -2.0 - 1e-9 <= s <= 2.0 + 1e-9:
        raise ValueError("s must lie in [-2, 2]")
    g = geo.det_quarter() * values
    hat = np.fft.fftn(g, axes=(1, 2, 3))
    k2 = _k2_grid(geo)
    if homogeneous:
        if s < 0.0:
            total = np.sum(np.abs(hat) ** 2)
            zero = np.sum(np.abs(hat[:, 0, 0, 0]) ** 2)
            if total > 0 and zero / total > zero_mode_tol:
                raise ZeroModeDominance(
                    f"zero mode carries {zero / total:.2%} of the L2 mass"
                )
            mult = np.zeros_like(k2)
            nz = k2 > 0
            mult[nz] = k2[nz] ** (s / 2.0)
        else:
            mult = k2 ** (s / 2.0)
            if s > 0:
                mult[0, 0, 0] = 0.0
            else:
                mult = np.ones_like(k2)
    else:
        mult = (1.0 + k2) ** (s / 2.0)
    out = np.fft.ifftn(mult * hat, axes=(1, 2, 3))
    return _flat_lp(out, geo, r)


def sqrt_kg_multiplier(values: np.ndarray, geo: GeometryField, m: float) -> np.ndarray:
    """(m^2 - Delta~)^(1/2) proxy: flat multiplier on the density transform."""
    g = geo.det_quarter() * values
    hat = np.fft.fftn(g, axes=(1, 2, 3))
    mult = np.sqrt(m * m + _k2_grid(geo))
    out = np.fft.ifftn(mult * hat, axes=(1, 2, 3))
    dq = geo.det_quarter()
    return out / dq


# ---------------------------------------------------------------------------
# Time integration helpers.
# ---------------------------------------------------------------------------


def _bracket_weight(geo: GeometryField, power: float) -> np.ndarray:
    r2 = np.sum(geo.grid.points() ** 2, axis=-1)
    return (1.0 + r2) ** (power / 2.0)


def _snapshot_values(traj: Trajectory):
    for st in traj.states:
        yield st.astype(np.complex128)


# ---------------------------------------------------------------------------
# Functionals.
# ---------------------------------------------------------------------------


def local_smoothing_functional(
    traj: Trajectory,
    geo: GeometryField,
    eps: float = 0.05,
) -> NormReport:
    """Weighted space-time L2 functional of the Dirac flow.

    value = ||<x>^(-3/2-eps) u||_{L2_t L2(M_h)}
          + ||<x>^(-1/2-eps) grad~ u||_{L2_t L2(M_h)},
    normalized by ||D_m u0||_{L2(M_h)}.
    """
    w_field = _bracket_weight(geo, -(3.0 + 2.0 * eps))  # |.|^2 weight
    w_grad = _bracket_weight(geo, -(1.0 + 2.0 * eps))
    sqdet = 1.0 if geo.is_flat else geo.sqrt_det
    dv = geo.grid.spacing**3
    a_t, b_t = [], []
    for v in _snapshot_values(traj):
        dens = np.sum(np.abs(v) ** 2, axis=0)
        a_t.append(float(np.sum(w_field * dens * sqdet) * dv))
        dv_grad = gradient(v, traj.grid)
        if geo.is_flat:
            gsq = sum(np.sum(np.abs(g) ** 2, axis=0) for g in dv_grad)
        else:
            gsq = np.zeros_like(dens)
            for i in range(3):
                for j in range(3):
                    gsq += geo.h_inv[..., i, j] * np.real(
                        np.sum(np.conj(dv_grad[i]) * dv_grad[j], axis=0)
                    )
        b_t.append(float(np.sum(w_grad * gsq * sqdet) * dv))
    value = float(
        np.sqrt(np.trapezoid(a_t, traj.times)) + np.sqrt(np.trapezoid(b_t, traj.times))
    )
    m = traj.meta["m"]
    u0 = SpinorField(traj.grid, traj.meta["initial"])
    normalizer = l2_norm_Mh(apply_dirac(u0, geo, m).values, geo)
    return NormReport(
        name="local_smoothing_dirac",
        value=value,
        normalizer=normalizer,
        epsilon=eps,
        meta={
            "T": float(traj.times[-1]),
            "time_truncated": True,
            "times": [float(t) for t in traj.times],
            "samples": [float(np.sqrt(a + b)) for a, b in zip(a_t, b_t)],
        },
    )


def wave_kg_smoothing_functional(
    traj: Trajectory,
    geo: GeometryField,
    m: float,
    eps: float = 0.05,
) -> NormReport:
    """Weighted L2_t L2 functional of a half-wave trajectory.

    Normalizer: ||f||_{L2(M_h)} for m = 0 and the (1 - Delta~)^(1/4) proxy
    norm for m > 0 (f is the trajectory's initial state).
    """
    w = _bracket_weight(geo, -(1.0 + 2.0 * eps))
    sqdet = 1.0 if geo.is_flat else geo.sqrt_det
    dv = geo.grid.spacing**3
    vals = [
        float(np.sum(w * np.sum(np.abs(v) ** 2, axis=0) * sqdet) * dv)
        for v in _snapshot_values(traj)
    ]
    value = float(np.sqrt(np.trapezoid(vals, traj.times)))
    f = traj.meta["initial"]
    if m == 0.0:
        normalizer = l2_norm_Mh(f, geo)
    else:
        normalizer = sobolev_norm(f, geo, 0.5, 2.0, homogeneous=False)
    return NormReport(
        name="local_smoothing_wave_kg",
        value=value,
        normalizer=normalizer,
        epsilon=eps,
        meta={
            "m": m,
            "T": float(traj.times[-1]),
            "time_truncated": True,
            "times": [float(t) for t in traj.times],
            "samples": [float(np.sqrt(v)) for v in vals],
        },
    )


def strichartz_functional(
    traj: Trajectory,
    geo: GeometryField,
    triple: AdmissibleTriple,
    m: float,
) -> NormReport:
    """L^q_t Sobolev-proxy functional against the Strichartz normalizer.

    Massless: ||u||_{L^q_t Hdot^{1-s}_r} vs ||u0||_{Hdot^1}.
    Massive:  ||u||_{L^q_t H^{1/2-s}_r} vs ||u0||_{H^1}; requires q > 2.
    """
    if not is_admissible(triple):
        raise NotAdmissible(f"triple {triple} fails the admissibility relations")
    if m > 0.0 and excluded_massive_endpoint(triple):
        raise ExcludedEndpoint("massive estimate excludes q = 2")
    if m == 0.0:
        exponent, homogeneous = 1.0 - triple.s, True
    else:
        exponent, homogeneous = 0.5 - triple.s, False
    samples = [
        sobolev_norm(v, geo, exponent, triple.r, homogeneous=homogeneous)
        for v in _snapshot_values(traj)
    ]
    q = triple.q
    if np.isinf(q):
        value = float(np.max(samples))
    else:
        value = float(np.trapezoid(np.asarray(samples) ** q, traj.times) ** (1.0 / q))
    u0 = traj.meta["initial"]
    if m == 0.0:
        normalizer = sobolev_norm(u0, geo, 1.0, 2.0, homogeneous=True)
    else:
        normalizer = sobolev_norm(u0, geo, 1.0, 2.0, homogeneous=False)
    return NormReport(
        name="strichartz_massless" if m == 0.0 else "strichartz_massive",
        value=value,
        normalizer=normalizer,
        triple=triple,
        meta={
            "m": m,
            "T": float(traj.times[-1]),
            "proxy": True,
            "time_truncated": True,
            "times": [float(t) for t in traj.times],
            "samples": [float(v) for v in samples],
        },
    )


def norm_equivalence_check(
    u0: SpinorField,
    geo: GeometryField,
    m: float,
) -> NormReport:
    """Both sides of the Dirac/Sobolev norm equivalence.

    The (m^2 - Delta~)^(1/2) action is computed two ways: by the flat
    multiplier proxy and by the exact quadratic form of the curved
    Laplacian; the report carries both ratios.
    """
    du = apply_dirac(u0, geo, m)
    num = l2_norm_Mh(du.values, geo)
    proxy = l2_norm_Mh(sqrt_kg_multiplier(u0.values, geo, m), geo)
    lap = scalar_laplace_beltrami(u0, geo).values
    w = 1.0 if geo.is_flat else geo.sqrt_det
    dv = geo.grid.spacing**3
    quad = np.sum(np.real(np.conj(u0.values) * (m * m * u0.values - lap)) * w) * dv
    quad_form = float(np.sqrt(max(quad, 0.0)))
    return NormReport(
        name="norm_equivalence",
        value=num,
        normalizer=quad_form,
        meta={
            "m": m,
            "ratio_quadratic_form": num / quad_form if quad_form else float("inf"),
            "ratio_multiplier_proxy": num / proxy if proxy else float("inf"),
            "reciprocal_quadratic_form": quad_form / num if num else float("inf"),
        },
    )
