"""RK4 flows: guards, exact flat propagators, conservation, reversal."""

from __future__ import annotations

import numpy as np
import pytest

from afdirac import (
    Grid,
    MetricFamily,
    MetricParams,
    SpinorField,
    build_geometry_field,
    dirac_initial_velocity,
    evolve_dirac,
    evolve_scalar_wave,
    evolve_squared,
    flat_propagators,
)
from afdirac.errors import CFLViolation, NotFlat, WraparoundRisk
from afdirac.harness import make_wavepacket
from afdirac.operators import apply_dirac, l2_norm_Mh


@pytest.fixture(scope="module")
def flat_geo():
    return build_geometry_field(MetricParams(family=MetricFamily.FLAT), Grid(8.0, 32))


@pytest.fixture(scope="module")
def packet(flat_geo):
    return make_wavepacket(flat_geo.grid, width=1.0, carrier=(1.0, 0.0, 0.0))


def test_cfl_guard(flat_geo, packet):
    with pytest.raises(CFLViolation):
        evolve_dirac(packet, flat_geo, 0.0, T=1.0, dt=flat_geo.grid.spacing)


def test_wraparound_guard(flat_geo, packet):
    with pytest.raises(WraparoundRisk):
        evolve_dirac(packet, flat_geo, 0.0, T=50.0)


def test_direction_validated(flat_geo, packet):
    with pytest.raises(ValueError):
        evolve_dirac(packet, flat_geo, 0.0, T=0.5, direction=2)


@pytest.mark.parametrize("m", [0.0, 1.0])
def test_rk4_matches_exact_flat_propagator(flat_geo, packet, m):
    u1 = dirac_initial_velocity(packet, flat_geo, m)
    traj = evolve_dirac(packet, flat_geo, m, T=1.0, dt=0.05, snapshot_stride=10**9)
    exact = flat_propagators(packet, u1, m, 1.0, flat_geo)
    rel = l2_norm_Mh(traj.final_state - exact.values, flat_geo) / l2_norm_Mh(
        exact.values, flat_geo
    )
    assert rel < 5e-5


def test_flat_propagator_zero_mode_limit(flat_geo):
    """W_m(t) on the zero frequency tends to t when m = 0."""
    const = SpinorField(
        flat_geo.grid, np.ones((4, 32, 32, 32), dtype=complex)
    )
    out = flat_propagators(None, const, 0.0, 0.7, flat_geo)
    assert np.max(np.abs(out.values - 0.7 * const.values)) < 1e-12


def test_flat_propagator_requires_flat():
    p = MetricParams(family=MetricFamily.CONFORMAL_BUMP, amplitude=0.1, decay_sigma=0.5)
    geo = build_geometry_field(p, Grid(6.0, 8))
    u = make_wavepacket(geo.grid, width=1.0)
    with pytest.raises(NotFlat):
        flat_propagators(u, None, 0.0, 0.5, geo)


def test_norm_log_and_conservation(flat_geo, packet):
    traj = evolve_dirac(packet, flat_geo, 1.0, T=1.0, dt=0.05)
    log = traj.meta["norm_log"]
    assert len(log) == 21  # every step including t=0
    assert np.max(np.abs(log - log[0])) / log[0] < 1e-6


def test_forward_backward_recovery(flat_geo, packet):
    fwd = evolve_dirac(packet, flat_geo, 1.0, T=1.0, dt=0.05, snapshot_stride=10**9)
    back = evolve_dirac(
        SpinorField(flat_geo.grid, fwd.final_state), flat_geo, 1.0,
        T=1.0, dt=0.05, snapshot_stride=10**9, direction=-1, support_radius=0.0,
    )
    rel = l2_norm_Mh(back.final_state - packet.values, flat_geo) / l2_norm_Mh(
        packet.values, flat_geo
    )
    assert rel < 5e-6


def test_snapshot_stride_and_dtype(flat_geo, packet):
    traj = evolve_dirac(
        packet, flat_geo, 0.0, T=0.5, dt=0.05, snapshot_stride=2,
        store_dtype=np.complex64,
    )
    assert traj.states[0].dtype == np.complex64
    assert traj.final_state.dtype == np.complex128
    assert traj.meta["store_dtype"] == "complex64"
    assert len(traj.times) == 6  # steps 0,2,4,6,8,10
    assert traj.times[-1] == pytest.approx(0.5)


def test_initial_velocity_matches_flow_derivative(flat_geo, packet):
    m = 1.0
    u1 = dirac_initial_velocity(packet, flat_geo, m)
    dt = 1e-3
    plus = flat_propagators(packet, u1, m, dt, flat_geo)
    minus = flat_propagators(packet, u1, m, -dt, flat_geo)
    fd = (plus.values - minus.values) / (2 * dt)
    scale = np.max(np.abs(u1.values))
    assert np.max(np.abs(fd - u1.values)) / scale < 1e-5


def test_squared_flow_matches_dirac_flat(flat_geo, packet):
    m = 1.0
    u1 = dirac_initial_velocity(packet, flat_geo, m)
    d_traj = evolve_dirac(packet, flat_geo, m, T=1.0, dt=0.05, snapshot_stride=10**9)
    s_traj = evolve_squared(
        packet, u1, flat_geo, m, T=1.0, dt=0.05, snapshot_stride=10**9,
        log_energy=False,
    )
    rel = l2_norm_Mh(d_traj.final_state - s_traj.final_state, flat_geo) / l2_norm_Mh(
        d_traj.final_state, flat_geo
    )
    assert rel < 1e-6


def test_scalar_wave_energy_log(flat_geo, packet):
    zero = SpinorField(flat_geo.grid, np.zeros_like(packet.values))
    traj = evolve_scalar_wave(packet, zero, flat_geo, 0.0, T=0.5, dt=0.05)
    e = traj.meta["energy_log"]
    assert len(e) == len(traj.times)
    assert np.max(np.abs(e - e[0])) / abs(e[0]) < 1e-6


def test_dirac_equation_satisfied_along_flow(flat_geo, packet):
    """du/dt = i D_m u at the initial time, via a centered difference of the
    exact flat flow."""
    m = 0.5
    u1 = dirac_initial_velocity(packet, flat_geo, m)
    expected = 1j * apply_dirac(packet, flat_geo, m).values
    assert np.max(np.abs(u1.values - expected)) == 0.0
