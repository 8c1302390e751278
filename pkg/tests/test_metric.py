"""Metric families: jets, positivity audit, taper, decay audit."""

from __future__ import annotations

import numpy as np
import pytest

from afdirac import (
    MetricFamily,
    MetricParams,
    Taper,
    eval_metric,
    probe_points,
    verify_assumption_A,
)
from afdirac.errors import NonPositiveDefinite

RNG = np.random.default_rng(1234)


def _fd_directional(f, x, axis, h=1e-3):
    """4th-order central finite difference of f along one axis."""
    e = np.zeros(3)
    e[axis] = h
    return (8.0 * (f(x + e) - f(x - e)) - (f(x + 2 * e) - f(x - 2 * e))) / (12.0 * h)


# ---------------------------------------------------------------------------
# Values.
# ---------------------------------------------------------------------------


def test_flat_is_identity():
    s = eval_metric(MetricParams(family=MetricFamily.FLAT), RNG.uniform(-5, 5, (10, 3)))
    assert np.allclose(s.h, np.eye(3), atol=0)
    assert np.allclose(s.d1h, 0.0, atol=0)
    assert np.allclose(s.det_h, 1.0, atol=0)


def test_conformal_bump_at_origin():
    p = MetricParams(family=MetricFamily.CONFORMAL_BUMP, amplitude=0.1, decay_sigma=0.5)
    s = eval_metric(p, np.zeros(3))
    assert np.allclose(s.h, np.exp(0.2) * np.eye(3), rtol=1e-14)
    assert abs(s.det_h - np.exp(0.6)) < 1e-14


def test_offdiag_structure():
    p = MetricParams(
        family=MetricFamily.OFF_DIAGONAL_BUMP, amplitude=0.1, decay_sigma=0.5
    )
    s = eval_metric(p, np.zeros(3))
    pert = s.h - np.eye(3)
    assert abs(np.trace(pert)) < 1e-14  # traceless structure matrix
    assert np.allclose(pert, pert.T, atol=0)
    assert abs(pert[0, 1] - 0.1) < 1e-14  # amplitude * S_01 at the origin


def test_inverse_and_symmetry():
    for fam in MetricFamily:
        p = MetricParams(family=fam, amplitude=0.1, decay_sigma=0.5)
        s = eval_metric(p, RNG.uniform(-4, 4, (50, 3)))
        assert np.allclose(s.h, np.swapaxes(s.h, -1, -2), atol=0)
        prod = np.einsum("...ij,...jk->...ik", s.h, s.h_inv)
        assert np.max(np.abs(prod - np.eye(3))) < 1e-12


# ---------------------------------------------------------------------------
# Derivative jets vs finite differences.
# ---------------------------------------------------------------------------


@pytest.mark.parametrize(
    "family", [MetricFamily.CONFORMAL_BUMP, MetricFamily.OFF_DIAGONAL_BUMP]
)
def test_jets_match_finite_differences(family):
    p = MetricParams(family=family, amplitude=0.1, decay_sigma=0.5)
    x = RNG.uniform(-3, 3, (30, 3))
    s = eval_metric(p, x, order=3)
    scale = max(np.max(np.abs(s.d1h)), 1e-12)
    for a in range(3):
        fd1 = _fd_directional(lambda y: eval_metric(p, y).h, x, a)
        assert np.max(np.abs(fd1 - s.d1h[..., a, :, :])) / scale < 1e-6
        fd2 = _fd_directional(lambda y: eval_metric(p, y).d1h, x, a)
        assert np.max(np.abs(fd2 - s.d2h[..., a, :, :, :])) / np.max(np.abs(s.d2h)) < 1e-6
        fd3 = _fd_directional(lambda y: eval_metric(p, y, order=2).d2h, x, a)
        assert np.max(np.abs(fd3 - s.d3h[..., a, :, :, :, :])) / np.max(np.abs(s.d3h)) < 1e-6


def test_single_entry_fd_example():
    p = MetricParams(family=MetricFamily.CONFORMAL_BUMP, amplitude=0.1, decay_sigma=0.5)
    x = np.array([1.0, 0.0, 0.0])
    s = eval_metric(p, x)
    h = 1e-4
    f = lambda t: eval_metric(p, np.array([t, 0.0, 0.0])).h[0, 0]
    fd = (f(1.0 + h) - f(1.0 - h)) / (2 * h)
    assert abs(fd - s.d1h[0, 0, 0]) / abs(fd) < 1e-6


# ---------------------------------------------------------------------------
# Validation.
# ---------------------------------------------------------------------------


def test_positivity_guard():
    with pytest.raises(NonPositiveDefinite):
        MetricParams(
            family=MetricFamily.OFF_DIAGONAL_BUMP, amplitude=2.0, decay_sigma=0.5
        )


@pytest.mark.parametrize("sigma", [0.0, 1.0, -0.2, 1.5])
def test_sigma_range_enforced(sigma):
    with pytest.raises(ValueError):
        MetricParams(family=MetricFamily.CONFORMAL_BUMP, amplitude=0.1, decay_sigma=sigma)


def test_cutoff_radius_positive():
    with pytest.raises(ValueError):
        MetricParams(
            family=MetricFamily.CONFORMAL_BUMP, amplitude=0.1, decay_sigma=0.5,
            cutoff_radius=-1.0,
        )


def test_nonfinite_positions_rejected():
    p = MetricParams(family=MetricFamily.FLAT)
    with pytest.raises(ValueError):
        eval_metric(p, np.array([np.nan, 0.0, 0.0]))


# ---------------------------------------------------------------------------
# Taper.
# ---------------------------------------------------------------------------


def test_taper_plateaus():
    tp = Taper(2.0, 5.0)
    inner = RNG.uniform(-1.0, 1.0, (20, 3))
    outer = 6.0 * _unit_rows(20)
    v_in, d_in, *_ = tp.jet(inner)
    v_out, d_out, *_ = tp.jet(outer)
    assert np.allclose(v_in, 1.0, atol=0) and np.allclose(d_in, 0.0, atol=0)
    assert np.allclose(v_out, 0.0, atol=0) and np.allclose(d_out, 0.0, atol=0)


def test_taper_jet_matches_fd():
    tp = Taper(2.0, 5.0)
    x = RNG.uniform(1.5, 5.5, (40, 3))
    _, d1, d2, _ = tp.jet(x)
    for a in range(3):
        fd1 = _fd_directional(lambda y: tp.jet(y)[0], x, a)
        assert np.max(np.abs(fd1 - d1[..., a])) < 1e-7
        fd2 = _fd_directional(lambda y: tp.jet(y)[1], x, a)
        assert np.max(np.abs(fd2 - d2[..., a, :])) < 1e-6


def test_taper_radii_validated():
    with pytest.raises(ValueError):
        Taper(5.0, 2.0)
    with pytest.raises(ValueError):
        Taper(0.0, 2.0)


def test_tapered_metric_is_flat_outside():
    p = MetricParams(family=MetricFamily.CONFORMAL_BUMP, amplitude=0.1, decay_sigma=0.5)
    tp = Taper(2.0, 4.0)
    s = eval_metric(p, 5.0 * _unit_rows(10), taper=tp)
    assert np.max(np.abs(s.h - np.eye(3))) == 0.0
    assert np.max(np.abs(s.d1h)) == 0.0


def _unit_rows(n):
    v = RNG.normal(size=(n, 3))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


# ---------------------------------------------------------------------------
# Decay audit.
# ---------------------------------------------------------------------------


def test_assumption_audit_flat_passes():
    rep = verify_assumption_A(MetricParams(family=MetricFamily.FLAT), probe_points())
    assert rep.passed
    assert all(v == 0.0 for v in rep.sups.values())


def test_assumption_audit_good_family_finite():
    p = MetricParams(family=MetricFamily.CONFORMAL_BUMP, amplitude=0.1, decay_sigma=0.5)
    rep = verify_assumption_A(p, probe_points(), threshold=3.0)
    assert rep.passed
    assert all(np.isfinite(v) for v in rep.sups.values())


def test_assumption_audit_slow_profile_fails():
    p = MetricParams(
        family=MetricFamily.CONFORMAL_BUMP, amplitude=0.1, decay_sigma=0.5,
        slow_profile=True,
    )
    rep = verify_assumption_A(p, probe_points(), threshold=3.0)
    assert not rep.passed
    # the |alpha|=0 weighted sup grows ~ <x> on the probe range
    assert rep.sups["order0"] > 10.0


def test_assumption_sups_monotone_in_amplitude():
    probes = probe_points()
    sups = []
    for A in (0.1, 0.05, 0.025):
        p = MetricParams(
            family=MetricFamily.OFF_DIAGONAL_BUMP, amplitude=A, decay_sigma=0.5
        )
        sups.append(verify_assumption_A(p, probes).sups["order1"])
    assert sups[0] >= sups[1] >= sups[2]


def test_probe_points_cover_range():
    pts = probe_points(r_max=1e3, n_radii=40)
    r = np.linalg.norm(pts, axis=1)
    assert r.min() == 0.0
    assert abs(r.max() - 1e3) / 1e3 < 1e-12
    assert pts.shape[0] >= 1000
