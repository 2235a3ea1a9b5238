import numpy as np
import pytest

from admap import (
    Signature,
    blocks_from_counts,
    cyclic_equal,
    detect_period,
    find_fixed_points,
    iterate_orbit,
    phi,
    raw_phi,
    sample_map,
)
from admap.errors import OnStableManifoldError


def test_phi_is_affine_in_reset_params(fig_params, fig_eq, fig6_geometry):
    w = 0.12
    raw = raw_phi(fig_params, fig6_geometry, w, equilibria=fig_eq)
    full = phi(fig_params, fig6_geometry, w, equilibria=fig_eq)
    assert full.value == pytest.approx(0.05 * raw.value + 0.087, abs=1e-15)
    assert full.half_rotations == raw.half_rotations


def test_phi_on_manifold_raises(fig_params, fig_eq, fig6_geometry):
    with pytest.raises(OnStableManifoldError):
        phi(fig_params, fig6_geometry, fig6_geometry.wi[0], equilibria=fig_eq)


def test_sampled_map_range_and_monotonicity(fig_params, fig_eq,
                                            fig6_geometry):
    g = fig6_geometry
    smap = sample_map(fig_params, g, (g.beta, g.alpha), n=60,
                      equilibria=fig_eq)
    assert smap.monotonicity_violations == 0
    assert np.all(smap.values > g.beta)
    assert np.all(smap.values <= g.alpha)


def test_interpolant_accuracy(fig_params, fig_eq, fig_geometry, fig_sphi):
    rng = np.random.default_rng(7)
    g = fig_geometry
    lo, hi = fig_sphi.interval
    worst = 0.0
    for w in rng.uniform(lo + 1e-3, hi - 1e-3, 6):
        if min(abs(w - wi) for wi in g.wi) < 1e-4:
            continue
        exact = raw_phi(fig_params, g, float(w), equilibria=fig_eq).value
        worst = max(worst, abs(fig_sphi(float(w)) - exact))
    assert worst < 1e-7


def test_interpolant_half_rotations(fig_geometry, fig_sphi):
    g = fig_geometry
    assert fig_sphi.half_rotations(g.wi[0] - 1e-3) == 0
    assert fig_sphi.half_rotations(0.5 * (g.wi[0] + g.w_star)) == 2
    # between w* and w2 (w2 itself lies beyond the sampled interval)
    assert fig_sphi.half_rotations(g.w_star + 1e-3) == 3


def test_orbit_signature_period2(fig_params, fig_eq, fig6_geometry):
    rec = iterate_orbit(fig_params, fig6_geometry, 0.12, 60,
                        equilibria=fig_eq)
    assert str(rec.signature) == "2^1"


def test_orbit_interpolated_matches_exact(fig_params, fig_eq, fig6_geometry,
                                          fig_sphi):
    ev = fig_sphi.phi_evaluator(0.05, 0.087)
    fast = iterate_orbit(fig_params, fig6_geometry, 0.12, 60,
                         equilibria=fig_eq, evaluator=ev)
    exact = iterate_orbit(fig_params, fig6_geometry, 0.12, 60,
                          equilibria=fig_eq)
    assert np.allclose(fast.iterates, exact.iterates, atol=1e-6)
    assert str(fast.signature) == str(exact.signature)


def test_detect_period():
    tail = [0.1, 0.3, 0.1, 0.3, 0.1, 0.3]
    start, per = detect_period(np.array([0.7, 0.5] + tail))
    assert per == 2


def test_blocks_from_counts():
    assert blocks_from_counts([1.0, 1.0]) == ((1, 1.0), (1, 1.0))
    assert blocks_from_counts([0, 1.0, 0, 0, 2.0]) == ((2, 1.0), (3, 2.0))
    assert blocks_from_counts([0, 0]) == ()


def test_cyclic_equal():
    a = ((2, 1), (1, 1), (2, 1))
    b = ((1, 1), (2, 1), (2, 1))
    assert cyclic_equal(a, b)
    assert not cyclic_equal(a, ((2, 1), (2, 1), (1, 1), (1, 1)))
    assert cyclic_equal((), ())


def test_signature_text():
    assert str(Signature(blocks=())) == "tonic"
    assert str(Signature(blocks=((2, 1.0), (1, 1.5)))) == "2^1 1^1.5"


def test_find_fixed_points_toy():
    f = lambda w: 0.5 * w + 0.1     # fixed point at 0.2
    roots = find_fixed_points(f, 0.0, 1.0)
    assert len(roots) == 1
    assert roots[0] == pytest.approx(0.2, abs=1e-12)
