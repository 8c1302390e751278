"""Analytic metric families on R^3 with closed-form derivative jets.

Every family has the form h(x) = I + q(x) * M with a radial scalar profile
q and a constant symmetric matrix M, so derivatives up to third order are
exact products of profile jets.  All evaluation routines are vectorized over
a leading batch of points.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import NonPositiveDefinite

_EYE3 = np.eye(3)

# Fixed symmetric traceless matrix for the off-diagonal family.
_OFFDIAG_S = np.array(
    [
        [0.0, 1.0, 0.5],
        [1.0, 0.0, 0.25],
        [0.5, 0.25, 0.0],
    ]
)


class MetricFamily(enum.Enum):
    FLAT = "Flat"
    CONFORMAL_BUMP = "ConformalBump"
    OFF_DIAGONAL_BUMP = "OffDiagonalBump"


# ---------------------------------------------------------------------------
# Scalar radial jets.  A "jet" is the tuple (f, df, d2f, d3f) with shapes
# (...,), (...,3), (...,3,3), (...,3,3,3); entries are d^|a| f / dx^a.
# ---------------------------------------------------------------------------


def _assemble_radial_jet(x, m0, m1, m2, m3):
    """Jet of f(x) = m(rho), rho = |x|^2, from radial derivatives of m."""
    xi = x
    f1 = 2.0 * m1[..., None] * xi
    outer = xi[..., :, None] * xi[..., None, :]
    f2 = 4.0 * m2[..., None, None] * outer + 2.0 * m1[..., None, None] * _EYE3
    xxx = outer[..., :, :, None] * xi[..., None, None, :]
    sym = (
        _EYE3[..., :, :, None] * xi[..., None, None, :]
        + _EYE3[:, None, :] * xi[..., None, :, None]
        + _EYE3[None, :, :] * xi[..., :, None, None]
    )
    f3 = 8.0 * m3[..., None, None, None] * xxx + 4.0 * m2[..., None, None, None] * sym
    return m0, f1, f2, f3


def _power_profile_jet(x, amplitude, power):
    """Jet of A * (1 + |x|^2)^(-p/2)."""
    rho = np.sum(x * x, axis=-1)
    u = 1.0 + rho
    p = power
    c1 = -p / 2.0
    c2 = c1 * (c1 - 1.0)
    c3 = c2 * (c1 - 2.0)
    m0 = amplitude * u ** c1
    m1 = amplitude * c1 * u ** (c1 - 1.0)
    m2 = amplitude * c2 * u ** (c1 - 2.0)
    m3 = amplitude * c3 * u ** (c1 - 3.0)
    return _assemble_radial_jet(x, m0, m1, m2, m3)


def _product_jet(a, b):
    """Leibniz rule for two scalar jets, up to third order."""
    a0, a1, a2, a3 = a
    b0, b1, b2, b3 = b
    f0 = a0 * b0
    f1 = a1 * b0[..., None] + a0[..., None] * b1
    f2 = (
        a2 * b0[..., None, None]
        + a1[..., :, None] * b1[..., None, :]
        + a1[..., None, :] * b1[..., :, None]
        + a0[..., None, None] * b2
    )
    f3 = (
        a3 * b0[..., None, None, None]
        + a2[..., :, :, None] * b1[..., None, None, :]
        + a2[..., :, None, :] * b1[..., None, :, None]
        + a2[..., None, :, :] * b1[..., :, None, None]
        + a1[..., :, None, None] * b2[..., None, :, :]
        + a1[..., None, :, None] * b2[..., :, None, :]
        + a1[..., None, None, :] * b2[..., :, :, None]
        + a0[..., None, None, None] * b3
    )
    return f0, f1, f2, f3


def _exp2_jet(phi):
    """Jet of exp(2*phi) from the jet of phi."""
    p0, p1, p2, p3 = phi
    e = np.exp(2.0 * p0)
    f1 = 2.0 * e[..., None] * p1
    f2 = e[..., None, None] * (4.0 * p1[..., :, None] * p1[..., None, :] + 2.0 * p2)
    ppp = p1[..., :, None, None] * p1[..., None, :, None] * p1[..., None, None, :]
    pp2 = (
        p2[..., :, :, None] * p1[..., None, None, :]
        + p2[..., :, None, :] * p1[..., None, :, None]
        + p2[..., None, :, :] * p1[..., :, None, None]
    )
    f3 = e[..., None, None, None] * (8.0 * ppp + 4.0 * pp2 + 2.0 * p3)
    return e, f1, f2, f3


# ---------------------------------------------------------------------------
# Smooth periodization taper.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Taper:
    """C^6 polynomial blend from 1 (|x| <= r_inner) to 0 (|x| >= r_outer).

    Uses the degree-13 smoothstep (six vanishing derivatives at both ends),
    so tapered coefficient fields have rapidly decaying spectra.  The blend
    variable is |x|^2 so the cutoff composes smoothly with the radial
    profile machinery.
    """

    r_inner: float
    r_outer: float

    # Degree-13 smoothstep, descending powers t^13 ... t^0.
    _S0 = np.array(
        [924.0, -6006.0, 16380.0, -24024.0, 20020.0, -9009.0, 1716.0,
         0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]
    )
    _S1 = np.polyder(_S0)
    _S2 = np.polyder(_S1)
    _S3 = np.polyder(_S2)

    def __post_init__(self):
        if not 0.0 < self.r_inner < self.r_outer:
            raise ValueError("taper radii must satisfy 0 < r_inner < r_outer")

    def jet(self, x):
        rho = np.sum(x * x, axis=-1)
        a, b = self.r_inner**2, self.r_outer**2
        t = np.clip((rho - a) / (b - a), 0.0, 1.0)
        s0 = np.polyval(self._S0, t)
        s1 = np.polyval(self._S1, t)
        s2 = np.polyval(self._S2, t)
        s3 = np.polyval(self._S3, t)
        inside = (rho <= a) | (rho >= b)
        s1 = np.where(inside, 0.0, s1)
        s2 = np.where(inside, 0.0, s2)
        s3 = np.where(inside, 0.0, s3)
        j = 1.0 / (b - a)
        return _assemble_radial_jet(x, 1.0 - s0, -s1 * j, -s2 * j * j, -s3 * j**3)

    def window(self, x):
        """Scalar cutoff value only (used to taper data fields)."""
        return self.jet(x)[0]


# ---------------------------------------------------------------------------
# Parameters and samples.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MetricParams:
    """A metric family instance; validated eagerly on a coarse probe grid."""

    family: MetricFamily = MetricFamily.CONFORMAL_BUMP
    amplitude: float = 0.1
    decay_sigma: float = 0.5
    cutoff_radius: float = 4.0
    # Exponent of the scalar profile; None means the standard 1 + sigma.
    # Setting slow_profile drops it to sigma (deliberately too slow a decay
    # for the |alpha| = 0 weighted bound; used to exercise failing audits).
    slow_profile: bool = False

    def __post_init__(self):
        if isinstance(self.family, str):
            object.__setattr__(self, "family", MetricFamily(self.family))
        if not 0.0 < self.decay_sigma < 1.0:
            raise ValueError("decay_sigma must lie strictly in (0, 1)")
        if self.cutoff_radius <= 0.0:
            raise ValueError("cutoff_radius must be positive")
        if self.family is not MetricFamily.FLAT:
            probe = _coarse_probe_grid()
            h = eval_metric(self, probe).h
            if np.min(np.linalg.eigvalsh(h)) <= 0.0:
                raise NonPositiveDefinite(
                    f"amplitude {self.amplitude} breaks positive-definiteness"
                )

    @property
    def profile_power(self) -> float:
        return self.decay_sigma if self.slow_profile else 1.0 + self.decay_sigma


@dataclass
class MetricSample:
    """Metric value, inverse, determinant and derivative jets at points.

    Derivative layout: d1h[..., a, i, j] = d_a h_ij, d2h[..., a, b, i, j],
    d3h[..., a, b, c, i, j]; all symmetric in (i, j) and in the derivative
    indices.  d3h is None when the sample was requested at order 2.
    """

    x: np.ndarray
    h: np.ndarray
    h_inv: np.ndarray
    det_h: np.ndarray
    d1h: np.ndarray
    d2h: np.ndarray
    d3h: np.ndarray | None = None


def _coarse_probe_grid():
    r = np.array([0.0, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0])
    dirs = _probe_directions()
    pts = r[:, None, None] * dirs[None, :, :]
    return pts.reshape(-1, 3)


def _probe_directions():
    """Axis, face-diagonal and corner directions (unit vectors)."""
    dirs = []
    for v in np.ndindex(3, 3, 3):
        v = np.array(v, dtype=float) - 1.0
        n = np.linalg.norm(v)
        if n > 0:
            dirs.append(v / n)
    return np.array(dirs)


def probe_points(r_max: float = 1e3, n_radii: int = 24) -> np.ndarray:
    """Logarithmic radial probe set covering |x| in [0, r_max]."""
    radii = np.concatenate([[0.0], np.geomspace(1e-2, r_max, n_radii)])
    dirs = _probe_directions()
    pts = radii[:, None, None] * dirs[None, :, :]
    return np.unique(pts.reshape(-1, 3), axis=0)


def _profile_and_structure(params: MetricParams, x):
    """Scalar profile jet q and constant matrix M with h = I + q M."""
    if params.family is MetricFamily.FLAT:
        return None, None
    q = _power_profile_jet(x, params.amplitude, params.profile_power)
    if params.family is MetricFamily.CONFORMAL_BUMP:
        e0, e1, e2, e3 = _exp2_jet(q)
        return (e0 - 1.0, e1, e2, e3), _EYE3
    return q, _OFFDIAG_S


def eval_metric(
    params: MetricParams,
    x: np.ndarray,
    order: int = 3,
    taper: Taper | None = None,
) -> MetricSample:
    """Evaluate the metric jet at points x (shape (..., 3), finite)."""
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("positions must be finite")
    batch = x.shape[:-1]
    q, M = _profile_and_structure(params, x)
    if q is None:
        h = np.broadcast_to(_EYE3, batch + (3, 3)).copy()
        zeros = lambda k: np.zeros(batch + (3,) * k + (3, 3))
        return MetricSample(
            x=x,
            h=h,
            h_inv=h.copy(),
            det_h=np.ones(batch),
            d1h=zeros(1),
            d2h=zeros(2),
            d3h=zeros(3) if order >= 3 else None,
        )
    if taper is not None:
        q = _product_jet(taper.jet(x), q)
    q0, q1, q2, q3 = q
    h = _EYE3 + q0[..., None, None] * M
    d1h = q1[..., :, None, None] * M
    d2h = q2[..., :, :, None, None] * M
    d3h = q3[..., :, :, :, None, None] * M if order >= 3 else None
    det_h = np.linalg.det(h)
    if np.min(np.linalg.eigvalsh(h)) <= 0.0:
        raise NonPositiveDefinite("metric not positive definite at a sample point")
    return MetricSample(
        x=x, h=h, h_inv=np.linalg.inv(h), det_h=det_h, d1h=d1h, d2h=d2h, d3h=d3h
    )


# ---------------------------------------------------------------------------
# Decay audit.
# ---------------------------------------------------------------------------


@dataclass
class DecayReport:
    """Weighted sups of decaying quantities with a pass flag per entry."""

    sigma: float
    threshold: float
    sups: dict[str, float] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(np.isfinite(v) and v <= self.threshold for v in self.sups.values())

    def as_dict(self) -> dict:
        return {
            "sigma": self.sigma,
            "threshold": self.threshold,
            "sups": dict(self.sups),
            "passed": bool(self.passed),
        }


def japanese_bracket(x: np.ndarray) -> np.ndarray:
    """<x> = (1 + |x|^2)^(1/2) over a trailing 3-vector axis."""
    return np.sqrt(1.0 + np.sum(np.asarray(x) ** 2, axis=-1))


def verify_assumption_A(
    params: MetricParams,
    probes: np.ndarray,
    threshold: float = 1.0,
) -> DecayReport:
    """Measure sup |d^a (h - I)| <x>^(|a|+1+sigma) per derivative order.

    Report-only: the pass flag compares each weighted sup (the effective
    metric-decay constant) against the configured threshold.
    """
    sample = eval_metric(params, probes, order=3)
    bracket = japanese_bracket(probes)
    sigma = params.decay_sigma
    jets = {
        0: sample.h - _EYE3,
        1: sample.d1h,
        2: sample.d2h,
        3: sample.d3h,
    }
    report = DecayReport(sigma=sigma, threshold=threshold)
    for k, jet in jets.items():
        flat = np.abs(jet).reshape(bracket.shape + (-1,)).max(axis=-1)
        weighted = flat * bracket ** (k + 1 + sigma)
        report.sups[f"order{k}"] = float(weighted.max())
    return report
