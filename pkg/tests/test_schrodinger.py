"""Energies, states, admissibility, and the exact energy identities.

The interval oracles are exact in the discretization, not just in the
limit: the state of V = 0, f = 1 is the quadratic x(1-x)/2 at the nodes
(second differences of quadratics are exact), giving E = -(1 - h^2)/24,
and discrete sines are exact eigenvectors, giving E = -1/(4 (lam_h + c)).
"""

import math

import numpy as np
import pytest

import schrostab as ss
from schrostab import h1_seminorm, lp_norm


def _lam1(grid):
    h = grid.spacing[0]
    L = grid.domain.axis_lengths[0]
    return (4.0 / h**2) * math.sin(math.pi * h / (2.0 * L)) ** 2


def test_energy_interval_discrete_exact():
    g = ss.Grid(ss.Domain.interval(1.0), 255)
    h = g.spacing[0]
    res = ss.solve_state(ss.Potential.constant(g, 0.0), ss.SourceTerm.constant(g), tol=1e-12)
    assert res.energy == pytest.approx(-(1.0 - h * h) / 24.0, abs=1e-14)
    exact_state = g.from_callable(lambda x: 0.5 * x * (1.0 - x))
    assert np.max(np.abs(res.state.values - exact_state.values)) < 1e-12
    assert res.residual < 1e-10


def test_energy_interval_continuum_value():
    g = ss.Grid(ss.Domain.interval(1.0), 4096)
    res = ss.solve_state(ss.Potential.constant(g, 0.0), ss.SourceTerm.constant(g))
    assert abs(res.energy + 1.0 / 24.0) <= 1e-5


@pytest.mark.parametrize("c", [0.0, 1.0, 10.0])
def test_energy_sine_oracle(c):
    g = ss.Grid(ss.Domain.interval(1.0), 511)
    f = ss.SourceTerm(ss.sine_source(g))
    res = ss.solve_state(ss.Potential.constant(g, c), f, tol=1e-12)
    assert res.energy == pytest.approx(-1.0 / (4.0 * (_lam1(g) + c)), abs=1e-13)
    continuum = -1.0 / (4.0 * (math.pi**2 + c))
    assert abs(res.energy - continuum) <= 1e-4 * abs(continuum)


def test_energy_box2d_sine_oracle():
    g = ss.Grid(ss.Domain.box2d(1.0, 1.0), 31)
    lam = g.poisson_ground()
    f = ss.SourceTerm(ss.sine_source(g))
    res = ss.solve_state(ss.Potential.constant(g, 1.0), f, tol=1e-12)
    # |f|_2^2 = 1/4 exactly, E = -(1/2) (1/4) / (lam + 1)
    assert res.energy == pytest.approx(-1.0 / (8.0 * (lam + 1.0)), abs=1e-13)


def test_energy_radial_poisson():
    g = ss.Grid(ss.Domain.radial3d(1.0), 1024)
    res = ss.solve_state(ss.Potential.constant(g, 0.0), ss.SourceTerm.constant(g), tol=1e-12)
    exact = -2.0 * math.pi / 45.0
    assert abs(res.energy - exact) <= 1e-4 * abs(exact)
    rho = g.coords[0]
    assert np.max(np.abs(res.state.values - (1.0 - rho**2) / 6.0)) < 1e-5


def test_energy_nonpositive_and_functional_match(interval_grid, const_source):
    rng = np.random.default_rng(2)
    for _ in range(5):
        V = ss.Potential(abs(ss.smooth_random_field(interval_grid, rng)))
        res = ss.solve_state(V, const_source)
        assert res.energy <= 1e-12
        # E = -1/2 <f,u> equals the quadratic functional at the state
        assert res.energy_direct == pytest.approx(res.energy, rel=1e-8, abs=1e-12)


def test_admissibility_shift_branch(interval_grid):
    cert = ss.check_admissible(ss.Potential.constant(interval_grid, 0.0))
    assert cert.coercive and cert.method == "shift"
    assert cert.margin == pytest.approx(_lam1(interval_grid), rel=1e-12)
    cert5 = ss.check_admissible(ss.Potential.constant(interval_grid, -5.0))
    assert cert5.coercive and cert5.margin == pytest.approx(_lam1(interval_grid) - 5.0, rel=1e-12)
    bad = ss.check_admissible(ss.Potential.constant(interval_grid, -15.0))
    assert not bad.coercive  # lambda_1 is close to pi^2 < 15


def test_admissibility_eigensolve_branch():
    g = ss.Grid(ss.Domain.interval(1.0), 63)
    x = g.coords[0]
    V = ss.Potential(g.function(-3.0 * np.sin(math.pi * x)))
    cert = ss.check_admissible(V)
    assert cert.method == "eigensolve"
    assert cert.coercive
    # reference: dense generalized eigenproblem on the same matrices
    import scipy.linalg as sla

    K = g.stiffness.toarray()
    M = np.diag(g.weights)
    lam = sla.eigh(K + M @ np.diag(V.values.values), M, eigvals_only=True)[0]
    assert cert.margin == pytest.approx(float(lam), rel=1e-8)


def test_solve_state_raises_for_non_coercive(interval_grid, const_source):
    with pytest.raises(ss.AdmissibilityError):
        ss.solve_state(ss.Potential.constant(interval_grid, -15.0), const_source)


def test_solve_state_sign_changing_coercive(interval_grid, const_source):
    V = ss.Potential.constant(interval_grid, -2.0)
    res = ss.solve_state(V, const_source)
    shifted = ss.solve_state(ss.Potential.constant(interval_grid, 0.0), const_source)
    assert res.energy < shifted.energy  # lowering V lowers the energy


def test_zero_source_gives_zero_state(interval_grid):
    f = ss.SourceTerm.constant(interval_grid, 0.0)
    res = ss.solve_state(ss.Potential.constant(interval_grid, 1.0), f)
    assert res.energy == 0.0
    assert not res.state.values.any()


def test_grid_mismatch_rejected(interval_grid, box_grid):
    f = ss.SourceTerm.constant(box_grid)
    with pytest.raises(ValueError):
        ss.solve_state(ss.Potential.constant(interval_grid, 0.0), f)


def test_dual_norm_oracles(interval_grid):
    h = interval_grid.spacing[0]
    one = ss.SourceTerm.constant(interval_grid)
    assert ss.dual_norm(one) ** 2 == pytest.approx((1.0 - h * h) / 12.0, abs=1e-14)
    f = ss.SourceTerm(ss.sine_source(interval_grid))
    assert ss.dual_norm(f) == pytest.approx(math.sqrt(1.0 / (2.0 * _lam1(interval_grid))), abs=1e-13)


def test_reciprocal_matches_direct_solve(interval_grid, const_source):
    W = interval_grid.function(np.ones(interval_grid.size))
    ra = ss.solve_state_reciprocal(W, const_source, tol=1e-12)
    rb = ss.solve_state(ss.Potential.constant(interval_grid, 1.0), const_source, tol=1e-12)
    assert ra.energy == pytest.approx(rb.energy, rel=1e-10)
    assert np.max(np.abs(ra.state.values - rb.state.values)) < 1e-10


def test_reciprocal_zero_block_is_hard_wall(interval_grid, const_source):
    x = interval_grid.coords[0]
    W = interval_grid.function(np.where(x < 0.5, 1.0, 0.0))
    res = ss.solve_state_reciprocal(W, const_source)
    assert not res.state.values[x >= 0.5].any()
    assert res.energy < 0.0
    with pytest.raises(ValueError):
        ss.solve_state_reciprocal(interval_grid.function(-np.ones(interval_grid.size)), const_source)
    empty = ss.solve_state_reciprocal(interval_grid.zeros(), const_source)
    assert empty.energy == 0.0


def test_energy_difference_identity(interval_grid, const_source):
    rng = np.random.default_rng(4)
    for _ in range(5):
        V1 = ss.Potential(abs(ss.smooth_random_field(interval_grid, rng)))
        V2 = ss.Potential(abs(ss.smooth_random_field(interval_grid, rng)))
        rep = ss.energy_difference_identity(V1, V2, const_source, p=2.0)
        assert rep.passed
        assert rep.identity_error <= 1e-9 * max(abs(rep.difference), 1.0)
        assert abs(rep.difference) <= rep.lipschitz_bound + 1e-9


def test_weighted_l2_gap(interval_grid, const_source):
    rng = np.random.default_rng(6)
    V1 = ss.Potential(abs(ss.smooth_random_field(interval_grid, rng)))
    V2 = ss.Potential(abs(ss.smooth_random_field(interval_grid, rng)))
    rep = ss.weighted_l2_gap(V1, V2, const_source)
    assert rep.passed
    assert rep.constant == 3.0  # both factors are 1 for nonnegative potentials


def test_energy_estimate_check(interval_grid, const_source):
    rep = ss.energy_estimate_check(ss.Potential.constant(interval_grid, 2.0), const_source)
    assert rep.passed and rep.factor == 1.0 and rep.factor_kind == "unit"
    neg = ss.energy_estimate_check(ss.Potential.constant(interval_grid, -2.0), const_source)
    assert neg.passed and neg.factor > 1.0 and math.isfinite(neg.factor)
    assert neg.lhs <= neg.bound


def test_energy_estimate_talenti_branch():
    g = ss.Grid(ss.Domain.radial3d(2.0), 128)
    f = ss.SourceTerm.constant(g)
    rho = g.coords[0]
    V = ss.Potential(g.function(-0.05 * np.exp(-(rho**2))))
    rep = ss.energy_estimate_check(V, f)
    assert rep.factor_kind == "talenti"
    assert rep.passed
