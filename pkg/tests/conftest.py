import pytest

from admap import (
    ModelParams,
    SampledPhi,
    build_geometry,
    fixed_points,
)

# Two working parameter sets:
#  - "par": the default set (vR = 0.1158), whose reset line picks up an extra
#    near-tangential pair of stable-manifold crossings (p = 4);
#  - "fig": vR = 0.1, the clean p = 2 geometry used for the staircase and
#    signature scenarios.


@pytest.fixture(scope="session")
def par_params():
    return ModelParams()


@pytest.fixture(scope="session")
def fig_params():
    return ModelParams(vR=0.1, gamma=0.05, d=0.087)


@pytest.fixture(scope="session")
def par_eq(par_params):
    return fixed_points(par_params)


@pytest.fixture(scope="session")
def fig_eq(fig_params):
    return fixed_points(fig_params)


@pytest.fixture(scope="session")
def par_geometry(par_params, par_eq):
    return build_geometry(par_params, equilibria=par_eq)


@pytest.fixture(scope="session")
def fig_geometry(fig_params, fig_eq):
    return build_geometry(fig_params, equilibria=fig_eq)


@pytest.fixture(scope="session")
def fig6_geometry(fig_geometry):
    """Reset geometry at the period-2 point (vR=0.1, gamma=0.05, d=0.087)."""
    return fig_geometry.with_reset(gamma=0.05, d=0.087)


@pytest.fixture(scope="session")
def fig_sphi(fig_params, fig_geometry, fig_eq):
    """Interpolated raw map at vR = 0.1, covering every (gamma, d) cell used
    by the staircase scenarios (gamma = 0.05, d in [0.074, 0.095])."""
    lo = 0.05 * fig_geometry.w_lim_minus + 0.074
    hi = 0.05 * fig_geometry.w_lim_plus + 0.095
    span = hi - lo
    return SampledPhi(fig_params, fig_geometry,
                      (lo - 0.01 * span, hi + 0.01 * span),
                      n=1500, equilibria=fig_eq)


@pytest.fixture(scope="session")
def par_sphi(par_params, par_geometry, par_eq):
    """Interpolated raw map at vR = 0.1158, covering the overlapping band
    (gamma = 0.065, d in [0.074, 0.083])."""
    lo = min(0.065, 0.05) * par_geometry.w_lim_minus + 0.0745
    hi = max(0.065 * par_geometry.w_lim_plus + 0.083,
             0.05 * par_geometry.w_lim_plus + 0.0825)
    span = hi - lo
    return SampledPhi(par_params, par_geometry,
                      (lo - 0.01 * span, hi + 0.01 * span),
                      n=1500, equilibria=par_eq)
