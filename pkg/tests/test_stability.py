"""Stability inequalities: randomized sweeps, self-consistency, scaling."""

import numpy as np
import pytest

import schrostab as ss
from schrostab import lp_norm


PS = (1.5, 2.0, 3.0)


@pytest.mark.parametrize("flavor", [1, 2])
@pytest.mark.parametrize("p", PS)
def test_max_self_report(p, flavor, const_source, extremals):
    ex = extremals.max(p, const_source, "interval")
    rep = ss.verify_max_stability(ex.V0, ex, const_source, flavor=flavor)
    assert rep.passed
    assert abs(rep.gap) <= 1e-9
    assert rep.remainder <= 1e-7
    assert rep.branch == "main" and rep.side == "max" and rep.flavor == flavor


@pytest.mark.parametrize("p", PS)
def test_min_self_report(p, const_source, extremals):
    ex = extremals.min(p, const_source, "interval")
    rep = ss.verify_min_stability(ex.W0, ex, const_source)
    assert rep.passed
    assert abs(rep.gap) <= 1e-12
    assert rep.remainder == 0.0
    assert rep.exponent == pytest.approx(2.0 * p * (p + 1.0) / (p - 1.0))


@pytest.mark.parametrize("flavor", [1, 2])
@pytest.mark.parametrize("p", PS)
def test_max_random_sweep(p, flavor, interval_grid, const_source, extremals):
    ex = extremals.max(p, const_source, "interval")
    consts = ss.constants_max(ex)
    rng = np.random.default_rng(int(10 * p) + flavor)
    worst = np.inf
    for _ in range(20):
        V = ss.random_max_potential(interval_grid, rng, p)
        rep = ss.verify_max_stability(V, ex, const_source, consts, flavor=flavor)
        assert rep.passed, rep
        worst = min(worst, rep.margin)
    assert worst >= -1e-8


@pytest.mark.parametrize("p", PS)
def test_min_random_sweep(p, interval_grid, const_source, extremals):
    ex = extremals.min(p, const_source, "interval")
    consts = ss.constants_min(ex, const_source)
    e0 = ss.solve_state_reciprocal(ex.W0.values, const_source).energy
    rng = np.random.default_rng(int(100 * p))
    for _ in range(15):
        W = ss.random_min_reciprocal(interval_grid, rng, p)
        rep = ss.verify_min_stability(W, ex, const_source, consts, e0)
        assert rep.passed, rep
        assert rep.gap >= -1e-10  # the extremal really is the minimum


def test_flavors_share_remainder_at_p_two(interval_grid, const_source, extremals):
    # at p = 2 the nonlinear distance |V^(p-1) - V0^(p-1)|_{p'} and the
    # plain |V - V0|_p coincide, so the two flavors differ only in sigma
    ex = extremals.max(2.0, const_source, "interval")
    rng = np.random.default_rng(9)
    V = ss.random_max_potential(interval_grid, rng, 2.0)
    r1 = ss.verify_max_stability(V, ex, const_source, flavor=1)
    r2 = ss.verify_max_stability(V, ex, const_source, flavor=2)
    assert r1.remainder == pytest.approx(r2.remainder, rel=1e-12)
    assert r1.sigma != r2.sigma


def test_stability_rejects_oversized_inputs(interval_grid, const_source, extremals):
    exmax = extremals.max(2.0, const_source, "interval")
    exmin = extremals.min(2.0, const_source, "interval")
    big = ss.Potential(interval_grid.function(np.full(interval_grid.size, 1.2)))
    with pytest.raises(ValueError):
        ss.verify_max_stability(big, exmax, const_source)
    with pytest.raises(ValueError):
        ss.verify_min_stability(
            ss.ReciprocalPotential(exmin.W0.values * 1.2), exmin, const_source
        )
    with pytest.raises(ValueError):
        ss.verify_max_stability(exmax.V0, exmax, const_source, flavor=3)


@pytest.mark.parametrize("p", PS)
def test_max_state_self_report(p, const_source, extremals):
    ex = extremals.max(p, const_source, "interval")
    rep = ss.verify_max_state_stability(ex.V0, ex, const_source)
    assert rep.weak_passed and rep.func_passed
    assert rep.weak_lhs <= 1e-9  # the state of V0 is v0 itself
    assert abs(rep.weak_rhs) <= 1e-9  # saturation deficit vanishes there
    assert rep.negative_part_ratio == 0.0
    assert rep.theta == max(2.0, p)


@pytest.mark.parametrize("p", PS)
def test_max_state_random_sweep(p, interval_grid, const_source, extremals):
    ex = extremals.max(p, const_source, "interval")
    consts = ss.constants_max(ex)
    rng = np.random.default_rng(int(7 * p))
    for _ in range(15):
        V = ss.random_max_potential(interval_grid, rng, p)
        rep = ss.verify_max_state_stability(V, ex, const_source, consts)
        assert rep.weak_passed, rep
        assert rep.func_passed, rep


@pytest.mark.parametrize("p", PS)
def test_min_state_self_report(p, const_source, extremals):
    ex = extremals.min(p, const_source, "interval")
    rep = ss.verify_min_state_stability(ex.W0, ex, const_source)
    assert rep.passed and rep.corner_passed
    assert rep.gap <= 1e-12 and rep.lhs <= 1e-6


@pytest.mark.parametrize("p", PS)
def test_min_state_random_sweep(p, interval_grid, const_source, extremals):
    ex = extremals.min(p, const_source, "interval")
    consts = ss.constants_min(ex, const_source)
    e0 = ss.solve_state_reciprocal(ex.W0.values, const_source).energy
    rng = np.random.default_rng(int(13 * p))
    for _ in range(15):
        W = ss.random_min_reciprocal(interval_grid, rng, p)
        rep = ss.verify_min_state_stability(W, ex, const_source, consts, e0)
        assert rep.passed, rep
        assert rep.corner_passed, rep


def test_scaling_probe_max(interval_grid, const_source, extremals):
    ex = extremals.max(2.0, const_source, "interval")
    rng = np.random.default_rng(31)
    probe = ss.scaling_probe(ss.smooth_random_field(interval_grid, rng), ex, const_source)
    assert probe.all_passed
    # the constraint projection makes the energy detach quadratically while
    # the potential distance detaches linearly
    assert 1.8 <= probe.gap_slope <= 2.2
    assert 0.8 <= probe.remainder_slope <= 1.2
    assert all(g >= 0.0 for g in probe.gaps)


def test_scaling_probe_min(interval_grid, const_source, extremals):
    ex = extremals.min(2.0, const_source, "interval")
    rng = np.random.default_rng(37)
    probe = ss.scaling_probe(ss.smooth_random_field(interval_grid, rng), ex, const_source)
    assert probe.all_passed
    assert 1.8 <= probe.gap_slope <= 2.2


def test_scaling_probe_rejects_zero_direction(interval_grid, const_source, extremals):
    ex = extremals.max(2.0, const_source, "interval")
    with pytest.raises(ValueError):
        ss.scaling_probe(interval_grid.zeros(), ex, const_source)


def test_random_max_potential_invariants(interval_grid, box_grid, radial_grid):
    rng = np.random.default_rng(41)
    for grid in (interval_grid, box_grid, radial_grid):
        norms = []
        support_sizes = []
        for _ in range(40):
            V = ss.random_max_potential(grid, rng, 2.0)
            assert V.values.min() >= 0.0
            n = lp_norm(V.values, 2.0)
            assert n <= 1.0 + 1e-12
            norms.append(n)
            support_sizes.append(int(np.count_nonzero(V.values.values)))
        # the generator must mix saturated, interior, and indicator samples
        assert any(n < 0.99 for n in norms)
        assert any(abs(n - 1.0) < 1e-9 for n in norms)
        assert min(support_sizes) < grid.size


def test_random_min_reciprocal_invariants(interval_grid, radial_grid):
    rng = np.random.default_rng(43)
    for grid in (interval_grid, radial_grid):
        kinds_interior = 0
        for _ in range(40):
            W = ss.random_min_reciprocal(grid, rng, 3.0)
            assert W.values.min() >= 0.0
            n = lp_norm(W.values, 3.0)
            assert n <= 1.0 + 1e-12
            if n < 0.99:
                kinds_interior += 1
        assert kinds_interior > 0
