"""Extremal potentials: construction identities, consistency, constants."""

import math
from dataclasses import replace

import numpy as np
import pytest

import schrostab as ss
from schrostab import h1_seminorm, inner, lp_norm


PS = (1.5, 2.0, 3.0)


@pytest.mark.parametrize("p", PS)
def test_max_extremal_identities(p, interval_grid, const_source, extremals):
    ex = extremals.max(p, const_source, "interval")
    m = 2.0 * p / (p - 1.0)
    # unit constraint norm and the c1 = |v0|_m identity are exact in
    # quadrature because V0 is defined through the same weights
    assert lp_norm(ex.V0.values, p) == pytest.approx(1.0, abs=1e-12)
    assert ex.c1 == pytest.approx(lp_norm(ex.v0, m), rel=1e-12)
    assert ex.grad_norm <= 1e-8


@pytest.mark.parametrize("p", PS)
def test_max_euler_lagrange_residual(p, interval_grid, const_source, extremals):
    # recompute the optimality system from scratch:
    # K v0 + S^(-1/p) w |v0|^(m-2) v0 = w f, measured in the dual norm
    ex = extremals.max(p, const_source, "interval")
    g = interval_grid
    w, v = g.weights, ex.v0.values
    m = 2.0 * p / (p - 1.0)
    S = float(np.dot(w, np.abs(v) ** m))
    res = g.stiffness @ v + S ** (-1.0 / p) * w * np.abs(v) ** (m - 2.0) * v
    res -= w * const_source.values.values
    dual = math.sqrt(float(res @ g.stiffness_solve(res)))
    assert dual <= 1e-7


@pytest.mark.parametrize("p", PS)
def test_max_state_consistency(p, interval_grid, const_source, extremals):
    ex = extremals.max(p, const_source, "interval")
    res = ss.solve_state(ex.V0, const_source, tol=1e-12)
    assert abs(res.energy - ex.surrogate_value) <= 1e-6
    assert h1_seminorm(res.state - ex.v0) <= 1e-5


@pytest.mark.parametrize("p", PS)
def test_max_holder_saturation(p, interval_grid, const_source, extremals):
    # int V0 v0^2 = |V0|_p |v0^2|_{p'} = S^((p-1)/p) pointwise-exactly
    ex = extremals.max(p, const_source, "interval")
    pairing = inner(ex.V0.values, ex.v0 * ex.v0)
    m = 2.0 * p / (p - 1.0)
    S = lp_norm(ex.v0, m) ** m
    assert abs(pairing - S ** ((p - 1.0) / p)) <= 1e-12 * max(1.0, S)


@pytest.mark.parametrize("p", PS)
def test_min_extremal_identities(p, interval_grid, const_source, extremals):
    ex = extremals.min(p, const_source, "interval")
    q = 2.0 * p / (p + 1.0)
    assert lp_norm(ex.W0.values, p) == pytest.approx(1.0, abs=1e-12)
    assert ex.c2 == pytest.approx(lp_norm(ex.u0, q), rel=1e-12)
    assert ex.eps_final == 1e-6
    assert ex.euler_lagrange_residual <= 1e-5


@pytest.mark.parametrize("p", PS)
def test_min_holder_saturation(p, interval_grid, const_source, extremals):
    # dual pairing: int u0^2 / W0 = (int |u0|^q)^((p+1)/p) = c2^2
    ex = extremals.min(p, const_source, "interval")
    w0 = ex.W0.values.values
    assert w0.min() > 0.0  # positive source keeps the state interior
    pairing = float(np.dot(interval_grid.weights, ex.u0.values**2 / w0))
    assert pairing == pytest.approx(ex.c2**2, rel=1e-12)


GRIDS = {
    "interval": lambda: ss.Grid(ss.Domain.interval(1.0), 127),
    "box2d": lambda: ss.Grid(ss.Domain.box2d(1.0, 1.0), 15),
    "radial3d": lambda: ss.Grid(ss.Domain.radial3d(8.0), 255),
}


@pytest.mark.parametrize("kind", sorted(GRIDS))
@pytest.mark.parametrize("p", PS)
def test_min_state_consistency_all_domains(kind, p):
    g = GRIDS[kind]()
    f = ss.SourceTerm.constant(g)
    ex = ss.solve_min_extremal(p, f)
    res = ss.solve_state_reciprocal(ex.W0.values, f, tol=1e-12)
    assert abs(res.energy - ex.surrogate_value) <= 1e-10
    assert h1_seminorm(res.state - ex.u0) <= 1e-6


def test_regression_anchor_values(interval_grid):
    # pinned values for p = 2, unit interval, 127 interior nodes, f = 1;
    # any solver change that moves these needs a close look
    g = ss.Grid(ss.Domain.interval(1.0), 255)
    f = ss.SourceTerm.constant(g)
    assert ss.solve_max_extremal(2.0, f).c1 == pytest.approx(0.08873300, abs=1e-6)
    assert ss.solve_min_extremal(2.0, f).c2 == pytest.approx(0.07934208, abs=1e-6)


def test_solver_input_validation(interval_grid):
    zero = ss.SourceTerm.constant(interval_grid, 0.0)
    f = ss.SourceTerm.constant(interval_grid)
    with pytest.raises(ss.DegenerateSourceError):
        ss.solve_max_extremal(2.0, zero)
    with pytest.raises(ss.DegenerateSourceError):
        ss.solve_min_extremal(2.0, zero)
    with pytest.raises(ValueError):
        ss.solve_max_extremal(1.0, f)
    with pytest.raises(ValueError):
        ss.solve_min_extremal(0.5, f)
    with pytest.raises(ValueError):
        ss.solve_min_extremal(2.0, f, eps_schedule=())
    with pytest.raises(ValueError):
        ss.solve_min_extremal(2.0, f, eps_schedule=(1e-2, -1e-3))


def test_reciprocal_potential_validation(interval_grid):
    with pytest.raises(ValueError):
        ss.ReciprocalPotential(interval_grid.function(-np.ones(interval_grid.size)))


def _fake_max(p, c1):
    g = ss.Grid(ss.Domain.interval(1.0), 15)
    one = g.function(np.ones(g.size))
    return ss.MaxExtremal(one, ss.Potential(one), c1, p, 0.0, 0.0, 0)


def test_constants_max_closed_forms():
    # p = 2, c1 = 1: core = 1/10, p' - 1 = 1, so sigma' = 0.1/4
    c = ss.constants_max(_fake_max(2.0, 1.0))
    assert c.sigma_prime == pytest.approx(0.025, abs=1e-15)
    assert c.sigma == c.sigma_prime and c.alt_exponent == 2.0
    assert c.trivial_threshold == pytest.approx(0.25)
    assert c.sigma_alt == pytest.approx((1.0 / 32.0) / 1.25, abs=1e-15)
    # p = 3/2, c1 = 1: core = 1/9, p - 1 = 1/2, sigma'' = 1/72, alt r = p' = 3
    c = ss.constants_max(_fake_max(1.5, 1.0))
    assert c.sigma_double_prime == pytest.approx(1.0 / 72.0, abs=1e-15)
    assert c.sigma == c.sigma_double_prime and c.alt_exponent == 3.0


@pytest.mark.parametrize("p", PS)
def test_constants_max_positive(p, const_source, extremals):
    c = ss.constants_max(extremals.max(p, const_source, "interval"))
    for name in ("sigma_prime", "sigma_double_prime", "sigma", "sigma_alt", "trivial_threshold"):
        assert getattr(c, name) > 0.0, name
    assert c.sigma <= 0.25
    assert c.alt_exponent == (p if p >= 2.0 else p / (p - 1.0))


@pytest.mark.parametrize("p", PS)
def test_constants_min_formulas(p, interval_grid, const_source, extremals):
    ex = extremals.min(p, const_source, "interval")
    c = ss.constants_min(ex, const_source)
    F = ss.dual_norm(const_source)
    assert c.source_dual_norm == pytest.approx(F, rel=1e-12)
    expected_c3 = min(math.sqrt(2) / (math.sqrt(2) + 3 * F), 1.0 / (3 * math.sqrt(2) * F))
    assert c.c3 == pytest.approx(expected_c3, rel=1e-12)
    assert c.c5 == pytest.approx(min(1.0, (c.c2**2 * c.c3 / 2.0) ** 2), rel=1e-12)
    s_conj = c.embedding_exponent / (c.embedding_exponent - 1.0)
    expected_c4 = lp_norm(
        interval_grid.function(np.abs(ex.u0.values) ** ((p - 1.0) / (p + 1.0))), s_conj
    )
    assert c.c4 == pytest.approx(expected_c4, rel=1e-12)
    assert c.beta == pytest.approx(2.0 * p * (p + 1.0) / (p - 1.0))
    assert c.embedding_exponent == 4.0
    assert c.c4_tail_estimate == 0.0  # bounded domain, nothing truncated
    for name in ("c2", "c3", "c4", "c5", "c6", "c7", "c8", "c9", "sigma_m"):
        assert getattr(c, name) > 0.0, name


def test_constants_min_beta_values(const_source, extremals):
    betas = {
        p: ss.constants_min(extremals.min(p, const_source, "interval"), const_source).beta
        for p in PS
    }
    assert betas == {1.5: 15.0, 2.0: 12.0, 3.0: 12.0}


def test_constants_min_radial_tail(radial_grid):
    f = ss.SourceTerm(ss.power_tail_source(radial_grid, alpha=3.0))
    # p = 3 decays fast enough for the extrapolated tail to be integrable
    c3 = ss.constants_min(ss.solve_min_extremal(3.0, f), f)
    assert math.isfinite(c3.c4_tail_estimate) and c3.c4_tail_estimate > 0.0
    # p = 2 sits at the integrability edge and the smoothing floor flattens
    # the observed decay below it, so the estimator must refuse to certify
    c2 = ss.constants_min(ss.solve_min_extremal(2.0, f), f)
    assert c2.c4_tail_estimate == math.inf


def test_talenti_constant():
    assert ss.talenti_constant(3) == pytest.approx(3.0 * (math.pi / 2.0) ** (4.0 / 3.0), abs=1e-10)
    assert ss.talenti_constant(4) > 0.0
    with pytest.raises(ValueError):
        ss.talenti_constant(2)


def test_embedding_constant(interval_grid, box_grid, radial_grid):
    assert ss.embedding_constant(interval_grid) == (4.0, 2.0)
    s, T = ss.embedding_constant(box_grid)
    assert s == 4.0 and T == pytest.approx(math.pi, rel=1e-12)
    s, T = ss.embedding_constant(radial_grid)
    assert s == 6.0 and T == pytest.approx(ss.talenti_constant(3), rel=1e-12)
    assert ss.embedding_constant(ss.Domain.interval(2.0)) == (4.0, 2.0 / 2.0**1.5)


def test_project_max_constraint(interval_grid):
    x = interval_grid.coords[0]
    big = ss.Potential(interval_grid.function(5.0 * np.sin(math.pi * x) ** 2))
    proj = ss.project_max_constraint(big, 2.0)
    assert lp_norm(proj.values, 2.0) == pytest.approx(1.0, rel=1e-12)
    assert proj.values.min() >= 0.0
    small = ss.Potential(interval_grid.function(0.1 * np.ones(interval_grid.size)))
    kept = ss.project_max_constraint(small, 2.0)
    assert np.array_equal(kept.values.values, small.values.values)
    signed = ss.Potential(interval_grid.function(-0.1 * np.ones(interval_grid.size)))
    assert ss.project_max_constraint(signed, 2.0).values.min() >= 0.0
    with pytest.raises(ValueError):
        ss.project_max_constraint(ss.Potential.constant(interval_grid, 0.0), 2.0)
    with pytest.raises(ValueError):
        ss.project_max_constraint(small, 1.0)
