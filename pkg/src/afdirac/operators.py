"""Spectral grid operators: Dirac, Laplace-Beltrami and perturbation terms.

All differentiation on the grid is spectral (exact derivative of the
trigonometric interpolant, Nyquist mode zeroed in the multiplier), so
identity residuals isolate modeling error rather than truncation error.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import geometry as geom
from .errors import GridMismatch, ResolutionError
from .metric import MetricFamily, MetricParams, Taper, eval_metric

# ---------------------------------------------------------------------------
# Dirac matrices.
# ---------------------------------------------------------------------------

_PAULI = np.array(
    [
        [[0, 1], [1, 0]],
        [[0, -1j], [1j, 0]],
        [[1, 0], [0, -1]],
    ],
    dtype=complex,
)


@dataclass(frozen=True)
class GammaSet:
    """Dirac representation with Pauli blocks; entries in {0, +-1, +-i}."""

    alpha: np.ndarray  # (3, 4, 4)
    beta: np.ndarray  # (4, 4)
    gamma0: np.ndarray  # = beta
    gamma_spatial: np.ndarray  # (3, 4, 4), gamma^j = gamma^0 alpha_j
    commutators: np.ndarray  # (3, 3, 4, 4), [gamma_a, gamma_b]


def build_gammas() -> GammaSet:
    alpha = np.zeros((3, 4, 4), dtype=complex)
    for j in range(3):
        alpha[j, :2, 2:] = _PAULI[j]
        alpha[j, 2:, :2] = _PAULI[j]
    beta = np.diag([1, 1, -1, -1]).astype(complex)
    gam = np.einsum("ab,jbc->jac", beta, alpha)
    comm = np.einsum("aij,bjk->abik", gam, gam) - np.einsum("bij,ajk->abik", gam, gam)
    return GammaSet(
        alpha=alpha,
        beta=beta,
        gamma0=beta.copy(),
        gamma_spatial=gam,
        commutators=comm,
    )


# ---------------------------------------------------------------------------
# Grid and fields.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Grid:
    """Periodic Cartesian box [-L, L)^3 with N (even) points per axis."""

    L: float
    N: int

    def __post_init__(self):
        if self.N < 4 or self.N % 2:
            raise ValueError("N must be even, at least 4")
        if self.L <= 0:
            raise ValueError("L must be positive")

    @property
    def spacing(self) -> float:
        return 2.0 * self.L / self.N

    @property
    def axis(self) -> np.ndarray:
        return -self.L + self.spacing * np.arange(self.N)

    @property
    def freqs(self) -> np.ndarray:
        return 2.0 * np.pi * np.fft.fftfreq(self.N, d=self.spacing)

    @property
    def deriv_multiplier(self) -> np.ndarray:
        """1j * k with the Nyquist mode's contribution zeroed."""
        ik = 1j * self.freqs
        ik[self.N // 2] = 0.0
        return ik

    @property
    def k_max(self) -> float:
        return np.pi / self.spacing

    def points(self) -> np.ndarray:
        """Coordinates, shape (N, N, N, 3)."""
        a = self.axis
        X, Y, Z = np.meshgrid(a, a, a, indexing="ij")
        return np.stack([X, Y, Z], axis=-1)

    def radii(self) -> np.ndarray:
        p = self.points()
        return np.sqrt(np.sum(p * p, axis=-1))


@dataclass
class SpinorField:
    """Complex 4-component field on a grid; values shape (4, N, N, N)."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        expected = (4, self.grid.N, self.grid.N, self.grid.N)
        if self.values.shape != expected:
            raise ValueError(f"values must have shape {expected}")

    def copy(self) -> "SpinorField":
        return SpinorField(self.grid, self.values.copy())


def _check_same_grid(u: SpinorField, geo: "GeometryField"):
    if u.grid != geo.grid:
        raise GridMismatch("field and geometry live on different grids")


def spectral_derivative(values: np.ndarray, grid: Grid, axis: int) -> np.ndarray:
    """d/dx_axis of the trigonometric interpolant; spatial axes are the last 3."""
    ax = values.ndim - 3 + axis
    shape = [1] * values.ndim
    shape[ax] = grid.N
    ik = grid.deriv_multiplier.reshape(shape)
    return np.fft.ifft(ik * np.fft.fft(values, axis=ax), axis=ax)


def gradient(values: np.ndarray, grid: Grid) -> list[np.ndarray]:
    return [spectral_derivative(values, grid, i) for i in range(3)]


def spectral_tail_fraction(u: SpinorField, shell: float = 0.8) -> float:
    """Fraction of L2 mass carried by modes with |k|_inf >= shell * k_max."""
    hat = np.fft.fftn(u.values, axes=(1, 2, 3))
    power = np.abs(hat) ** 2
    k = np.abs(u.grid.freqs)
    mask = (
        (k[:, None, None] >= shell * u.grid.k_max)
        | (k[None, :, None] >= shell * u.grid.k_max)
        | (k[None, None, :] >= shell * u.grid.k_max)
    )
    total = power.sum()
    if total == 0:
        return 0.0
    return float(power[:, mask].sum() / total)


# ---------------------------------------------------------------------------
# Geometry on the grid.
# ---------------------------------------------------------------------------


@dataclass
class GeometryField:
    """Per-node geometric tensors of the (tapered) metric family.

    For the flat family the heavy tensors are None and operators take the
    cheap branch.  divB_term is (d^i B_i - Gamma^{j i}_i B_j), BiBi is
    B^i B_i, both 4x4 matrix fields.
    """

    grid: Grid
    params: MetricParams
    gammaset: GammaSet
    taper: Taper | None
    det_h: np.ndarray | None = None
    sqrt_det: np.ndarray | None = None
    h_inv: np.ndarray | None = None
    e: np.ndarray | None = None
    R_h: np.ndarray | None = None
    B: np.ndarray | None = None  # (3, N, N, N, 4, 4)
    divB_term: np.ndarray | None = None  # (N, N, N, 4, 4)
    BiBi: np.ndarray | None = None  # (N, N, N, 4, 4)
    taper_mask: np.ndarray | None = field(default=None, repr=False)

    @property
    def is_flat(self) -> bool:
        return self.B is None

    def det_quarter(self) -> np.ndarray | float:
        if self.is_flat:
            return 1.0
        return self.det_h**0.25


def default_taper(grid: Grid, params: MetricParams) -> Taper:
    """Blend from the family cutoff radius down to zero at |x| = L - 2 dx."""
    outer = grid.L - 2.0 * grid.spacing
    inner = min(params.cutoff_radius, 0.75 * outer)
    return Taper(inner, outer)


def build_geometry_field(
    params: MetricParams,
    grid: Grid,
    gammaset: GammaSet | None = None,
    taper: Taper | None = None,
) -> GeometryField:
    """Evaluate the tapered analytic geometry at every grid node."""
    if gammaset is None:
        gammaset = build_gammas()
    if params.family is MetricFamily.FLAT:
        return GeometryField(grid=grid, params=params, gammaset=gammaset, taper=None)
    if taper is None:
        taper = default_taper(grid, params)
    x = grid.points()
    sample = eval_metric(params, x, order=2, taper=taper)
    gamma = geom.christoffel(sample)
    dgamma = geom.christoffel_derivative(sample)
    R = geom.scalar_curvature(sample, gamma, dgamma)
    e, de, d2e = geom.dreibein(sample)
    omega = geom.spin_connection(e, de, gamma)
    domega = geom.spin_connection_derivative(e, de, d2e, gamma, dgamma)
    B = geom.connection_B(omega, gammaset)  # (..., j, 4, 4)
    B = np.moveaxis(B, -3, 0)
    H = sample.h_inv
    # d^i B_i = h^{ij} d_j B_i, contracted without materializing dB.
    domega_con = np.einsum("...ij,...jiab->...ab", H, domega)
    divB = 0.125 * np.einsum("...ab,abcd->...cd", domega_con, gammaset.commutators)
    gtrace = np.einsum("...ik,...jik->...j", H, gamma)  # Gamma^{j i}_i
    divB = divB - np.einsum("...j,j...cd->...cd", gtrace, B)
    Bup = np.einsum("...ij,j...ab->i...ab", H, B)
    BiBi = np.einsum("i...ab,i...bc->...ac", Bup, B)
    rho = np.sum(x * x, axis=-1)
    mask = rho <= taper.r_inner**2
    return GeometryField(
        grid=grid,
        params=params,
        gammaset=gammaset,
        taper=taper,
        det_h=sample.det_h,
        sqrt_det=np.sqrt(sample.det_h),
        h_inv=H,
        e=e,
        R_h=R,
        B=B,
        divB_term=divB,
        BiBi=BiBi,
        taper_mask=mask,
    )


# ---------------------------------------------------------------------------
# Operators.
# ---------------------------------------------------------------------------


def apply_dirac(u: SpinorField, geo: GeometryField, m: float) -> SpinorField:
    """D_m u = -i alpha^a e^i_a (d_i u + B_i u) - beta m u."""
    _check_same_grid(u, geo)
    gs = geo.gammaset
    du = gradient(u.values, u.grid)  # 3 x (4, N, N, N)
    out = np.zeros_like(u.values)
    if geo.is_flat:
        for a in range(3):
            out += np.einsum("cd,d...->c...", gs.alpha[a], du[a])
    else:
        for i in range(3):
            du[i] = du[i] + np.einsum("...cd,d...->c...", geo.B[i], u.values)
        for a in range(3):
            va = sum(geo.e[..., i, a] * du[i] for i in range(3))
            out += np.einsum("cd,d...->c...", gs.alpha[a], va)
    out *= -1j
    if m != 0.0:
        out -= m * np.einsum("cd,d...->c...", gs.beta, u.values)
    return SpinorField(u.grid, out)


def scalar_laplace_beltrami(u: SpinorField, geo: GeometryField) -> SpinorField:
    """Componentwise (det h)^(-1/2) d_i(sqrt(det h) h^ij d_j u)."""
    _check_same_grid(u, geo)
    du = gradient(u.values, u.grid)
    if geo.is_flat:
        out = sum(spectral_derivative(du[i], u.grid, i) for i in range(3))
        return SpinorField(u.grid, out)
    out = np.zeros_like(u.values)
    for i in range(3):
        flux = geo.sqrt_det * sum(geo.h_inv[..., i, j] * du[j] for j in range(3))
        out += spectral_derivative(flux, u.grid, i)
    return SpinorField(u.grid, out / geo.sqrt_det)


def perturbation_terms(u: SpinorField, geo: GeometryField):
    """(Omega_1(u), Omega_2 u) = (2 B^i d_i u, (d^iB_i + B^iB_i - G^{ji}_i B_j - R_h/4) u)."""
    _check_same_grid(u, geo)
    if geo.is_flat:
        z = np.zeros_like(u.values)
        return SpinorField(u.grid, z), SpinorField(u.grid, z.copy())
    du = gradient(u.values, u.grid)
    om1 = np.zeros_like(u.values)
    # B^i = h^{ij} B_j, contracted per direction.
    for i in range(3):
        Bup = sum(geo.h_inv[..., i, j, None, None] * geo.B[j] for j in range(3))
        om1 += 2.0 * np.einsum("...cd,d...->c...", Bup, du[i])
    om2_mat = geo.divB_term + geo.BiBi
    om2 = np.einsum("...cd,d...->c...", om2_mat, u.values)
    om2 -= 0.25 * geo.R_h * u.values
    return SpinorField(u.grid, om1), SpinorField(u.grid, om2)


def spinorial_laplacian(u: SpinorField, geo: GeometryField) -> SpinorField:
    """Delta_h u in covariant divergence form.

    With D_i = d_i + B_i:
        Delta_h u = det(h)^{-1/2} d_i( det(h)^{1/2} h^{ij} D_j u )
                    + B_i h^{ij} D_j u.
    This is a genuinely different discrete assembly from the expanded
    Omega_1/Omega_2 split in perturbation_terms.
    """
    _check_same_grid(u, geo)
    if geo.is_flat:
        return scalar_laplace_beltrami(u, geo)
    du = gradient(u.values, u.grid)
    Du = [
        du[j] + np.einsum("...cd,d...->c...", geo.B[j], u.values) for j in range(3)
    ]
    out = np.zeros_like(u.values)
    for i in range(3):
        Vi = sum(geo.h_inv[..., i, j] * Du[j] for j in range(3))
        out += spectral_derivative(geo.sqrt_det * Vi, u.grid, i) / geo.sqrt_det
        out += np.einsum("...cd,d...->c...", geo.B[i], Vi)
    return SpinorField(u.grid, out)


def l2_norm_Mh(values: np.ndarray, geo: GeometryField) -> float:
    """L2(M_h) norm of a (4, N, N, N) field."""
    w = 1.0 if geo.is_flat else geo.sqrt_det
    dv = geo.grid.spacing**3
    return float(np.sqrt(np.sum(np.abs(values) ** 2 * w) * dv))


def squaring_residual(
    u: SpinorField,
    geo: GeometryField,
    m: float,
    tail_tol: float = 1e-8,
):
    """Residuals of D_m^2 = m^2 - Delta_h + R_h/4 and its Omega split.

    res1 groups the right-hand side as the Lichnerowicz form
    m^2 - Delta_h + R_h/4 with Delta_h expanded through the spin connection;
    res2 groups it as m^2 - Dtilde - Omega_1 - Omega_2, the perturbative
    rearrangement.  Both are L2(M_h) norms normalized by an H2-proxy norm
    of u.
    """
    _check_same_grid(u, geo)
    tail = spectral_tail_fraction(u)
    if tail > tail_tol:
        raise ResolutionError(f"spectral tail {tail:.2e} exceeds {tail_tol:.2e}")
    ddu = apply_dirac(apply_dirac(u, geo, m), geo, m).values
    lap_scal = scalar_laplace_beltrami(u, geo).values
    om1, om2 = perturbation_terms(u, geo)
    if geo.is_flat:
        lap_spin = lap_scal
        rhs1 = m**2 * u.values - lap_spin
    else:
        lap_spin = lap_scal + om1.values + (om2.values + 0.25 * geo.R_h * u.values)
        rhs1 = m**2 * u.values - lap_spin + 0.25 * geo.R_h * u.values
    rhs2 = m**2 * u.values - lap_scal - om1.values - om2.values
    scale = _h2_proxy_norm(u, geo, m)
    res1 = l2_norm_Mh(ddu - rhs1, geo) / scale
    res2 = l2_norm_Mh(ddu - rhs2, geo) / scale
    return res1, res2


def _h2_proxy_norm(u: SpinorField, geo: GeometryField, m: float) -> float:
    """Flat-multiplier (1 + |k|^2) proxy for the H2 norm of the V-transform."""
    g = geo.det_quarter() * u.values
    hat = np.fft.fftn(g, axes=(1, 2, 3))
    k = geo.grid.freqs
    k2 = k[:, None, None] ** 2 + k[None, :, None] ** 2 + k[None, None, :] ** 2
    hat *= 1.0 + k2
    back = np.fft.ifftn(hat, axes=(1, 2, 3))
    return float(np.sqrt(np.sum(np.abs(back) ** 2) * geo.grid.spacing**3))
