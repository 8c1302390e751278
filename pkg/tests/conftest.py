"""Shared fixtures; heavyweight geometries and trajectories are session-scoped
so the acceptance criteria can reuse them."""

from __future__ import annotations

import numpy as np
import pytest

from afdirac import (
    Grid,
    MetricFamily,
    MetricParams,
    build_gammas,
    build_geometry_field,
    evolve_dirac,
    probe_points,
)
from afdirac.operators import default_taper
from afdirac.harness import make_wavepacket


@pytest.fixture(scope="session")
def gammaset():
    return build_gammas()


@pytest.fixture(scope="session")
def probes_1k():
    pts = probe_points(r_max=1e3, n_radii=40)
    assert pts.shape[0] >= 1000
    return pts


@pytest.fixture(scope="session")
def cb_params():
    return MetricParams(
        family=MetricFamily.CONFORMAL_BUMP, amplitude=0.1, decay_sigma=0.5
    )


@pytest.fixture(scope="session")
def od_params():
    return MetricParams(
        family=MetricFamily.OFF_DIAGONAL_BUMP, amplitude=0.1, decay_sigma=0.5
    )


@pytest.fixture(scope="session")
def flat_params():
    return MetricParams(family=MetricFamily.FLAT)


@pytest.fixture(scope="session")
def cb_geo_48(cb_params):
    """ConformalBump geometry on the evolution box (criteria 5 and 6)."""
    return build_geometry_field(cb_params, Grid(8.0, 48))


@pytest.fixture(scope="session")
def cb_dirac_run_48(cb_params, cb_geo_48):
    """Forward Dirac run shared by the trajectory-equivalence and unitarity
    criteria: m=1, T=2, dt=0.04 on the N=48 ConformalBump geometry."""
    geo = cb_geo_48
    grid = geo.grid
    u0 = make_wavepacket(
        grid, width=1.2, carrier=(1.0, 0.0, 0.0),
        window=default_taper(grid, cb_params),
    )
    traj = evolve_dirac(u0, geo, 1.0, T=2.0, dt=0.04, snapshot_stride=10**9)
    return u0, traj


@pytest.fixture(scope="session")
def sweep_box():
    """Small box resolving carrier 8 for the dispersive-functional sweeps."""
    return Grid(4.5, 48)


@pytest.fixture(scope="session")
def sweep_geos(sweep_box, flat_params, cb_params):
    return {
        "Flat": build_geometry_field(flat_params, sweep_box),
        "ConformalBump": build_geometry_field(cb_params, sweep_box),
    }


@pytest.fixture(scope="session")
def massless_sweep_trajectories(sweep_box, sweep_geos, cb_params):
    """Massless Dirac runs per (family, carrier), shared by the local
    smoothing and Strichartz criteria."""
    out = {}
    for fam, geo in sweep_geos.items():
        window = None if geo.is_flat else default_taper(sweep_box, cb_params)
        for c in (2.0, 4.0, 8.0):
            u0 = make_wavepacket(
                sweep_box, width=0.6, carrier=(c, 0.0, 0.0), window=window
            )
            out[(fam, c)] = evolve_dirac(
                u0, geo, 0.0, T=1.2, snapshot_stride=1, store_dtype=np.complex64
            )
    return out
