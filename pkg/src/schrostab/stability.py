"""Numerical certification of the quantitative stability inequalities.

For a potential V admissible in the max problem (|V|_p <= 1) the energy gap
to the extremal V0 dominates a squared distance,

    E_f(V0) - E_f(V) >= sigma * dist(V, V0)^2,

where the distance is | |V|^(p-2) V - V0^(p-1) |_{p'} for p >= 2 and
|V - V0|_p for 1 < p < 2.  For the min problem (V >= 0, |1/V|_p <= 1) the
gap dominates |1/V - 1/U0|_p^beta with beta = 2p(p+1)/(p-1).  The sigma
coefficients come from :mod:`schrostab.optimal` and are valid without
smallness assumptions on the gap, so every report here must pass up to
rounding; the ``margin`` field records gap - sigma * remainder^exponent.

The complementary distance flavor (swapping which factor is raised to the
power p-1) holds with exponent max(2, p) instead of 2 and its own
coefficient; ``flavor=2`` selects it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .grid import GridFunction, h1_seminorm, inner, lp_norm
from .optimal import (
    MaxExtremal,
    MaxStabilityConstants,
    MinExtremal,
    MinStabilityConstants,
    ReciprocalPotential,
    constants_max,
    constants_min,
    embedding_constant,
    talenti_constant,
)
from .schrodinger import (
    Potential,
    SourceTerm,
    solve_state,
    solve_state_reciprocal,
)
from .sources import indicator_region, smooth_random_field

__all__ = [
    "StabilityReport",
    "MaxStateReport",
    "MinStateReport",
    "ScalingProbeResult",
    "verify_max_stability",
    "verify_min_stability",
    "verify_max_state_stability",
    "verify_min_state_stability",
    "scaling_probe",
    "random_max_potential",
    "random_min_reciprocal",
]

_TOL = 1e-9


@dataclass(frozen=True)
class StabilityReport:
    side: str
    p: float
    gap: float
    remainder: float
    exponent: float
    sigma: float
    margin: float
    passed: bool
    branch: str
    flavor: int


def _check_max_admissible(V: Potential, p: float):
    norm = lp_norm(V.values, p)
    if norm > 1.0 + 1e-8:
        raise ValueError(f"max-problem potential needs |V|_p <= 1, got {norm:.8g}")


def verify_max_stability(
    V: Potential,
    ex: MaxExtremal,
    f: SourceTerm,
    consts: MaxStabilityConstants | None = None,
    flavor: int = 1,
    tol: float = _TOL,
) -> StabilityReport:
    """Check the max-side stability inequality for one admissible potential.

    The gap is evaluated with the product identity
    E_f(V0) - E_f(V) = 1/2 int (V0 - V) v0 u_V, which avoids cancellation
    between two nearly equal energies.
    """
    p = ex.p
    _check_max_admissible(V, p)
    if consts is None:
        consts = constants_max(ex)
    g = V.grid
    res = solve_state(V, f)
    gap = 0.5 * float(
        np.dot(
            g.weights * (ex.V0.values.values - V.values.values),
            ex.v0.values * res.state.values,
        )
    )
    pc = p / (p - 1.0)
    nonlinear = p >= 2.0 if flavor == 1 else p < 2.0
    if nonlinear:
        vals = V.values.values
        lhsv = np.sign(vals) * np.abs(vals) ** (p - 1.0)
        rhsv = ex.V0.values.values ** (p - 1.0)
        remainder = lp_norm(g.function(lhsv - rhsv), pc)
    else:
        remainder = lp_norm(V.values - ex.V0.values, p)
    if flavor == 1:
        sigma, exponent = consts.sigma, 2.0
    elif flavor == 2:
        sigma, exponent = consts.sigma_alt, consts.alt_exponent
    else:
        raise ValueError("flavor must be 1 or 2")
    branch = "trivial" if gap > consts.trivial_threshold else "main"
    margin = gap - sigma * remainder**exponent
    return StabilityReport(
        "max", p, gap, remainder, exponent, sigma, margin, margin >= -10 * tol, branch, flavor
    )


def verify_min_stability(
    W: ReciprocalPotential,
    ex: MinExtremal,
    f: SourceTerm,
    consts: MinStabilityConstants | None = None,
    extremal_energy: float | None = None,
    tol: float = _TOL,
) -> StabilityReport:
    """Check the min-side stability inequality for one admissible W = 1/V."""
    p = ex.p
    norm = lp_norm(W.values, p)
    if norm > 1.0 + 1e-8:
        raise ValueError(f"min-problem reciprocal needs |W|_p <= 1, got {norm:.8g}")
    if consts is None:
        consts = constants_min(ex, f)
    if extremal_energy is None:
        extremal_energy = solve_state_reciprocal(ex.W0.values, f).energy
    res = solve_state_reciprocal(W.values, f)
    gap = res.energy - extremal_energy
    remainder = lp_norm(W.values - ex.W0.values, p)
    sigma, beta = consts.sigma_m, consts.beta
    thresholds = (
        consts.c5,
        (2.0 * consts.c7 * consts.c2 ** ((p - 1.0) / (p + 1.0)) / consts.c4) ** 2,
    )
    branch = "trivial" if gap > min(thresholds) else "main"
    margin = gap - sigma * remainder**beta
    return StabilityReport(
        "min", p, gap, remainder, beta, sigma, margin, margin >= -10 * tol, branch, 1
    )


@dataclass(frozen=True)
class MaxStateReport:
    """State-space stability on the max side.

    ``weak_*`` fields certify |u_V - v0|^2 <= |u_V|_{L^m}^2 - int V u_V^2
    (the saturation deficit controls the state distance).  ``func_*``
    fields certify gap^(1/theta) |u_V - v0|_{L^m} >= c |u_V - v0|^2 with
    theta = max(2, p).
    """

    p: float
    weak_lhs: float
    weak_rhs: float
    weak_margin: float
    weak_passed: bool
    func_lhs: float
    func_rhs: float
    func_constant: float
    func_margin: float
    func_passed: bool
    theta: float
    negative_part_ratio: float


def _negative_ratio(V: Potential) -> float:
    """Fraction of the Dirichlet form the negative part can absorb."""
    vals = V.values.values
    vneg = np.maximum(-vals, 0.0)
    if not vneg.any():
        return 0.0
    g = V.grid
    if g.domain.dimension >= 3:
        tn = talenti_constant(g.domain.dimension)
        norm = lp_norm(g.function(vneg), g.domain.dimension / 2.0)
        if norm < tn:
            return norm / tn
    from .schrodinger import _negative_part_ratio

    return _negative_part_ratio(g, vneg)


def verify_max_state_stability(
    V: Potential,
    ex: MaxExtremal,
    f: SourceTerm,
    consts: MaxStabilityConstants | None = None,
    tol: float = _TOL,
) -> MaxStateReport:
    p = ex.p
    _check_max_admissible(V, p)
    if consts is None:
        consts = constants_max(ex)
    g = V.grid
    m = 2.0 * p / (p - 1.0)
    res = solve_state(V, f)
    u = res.state
    diff = u - ex.v0
    dist2 = h1_seminorm(diff) ** 2
    saturation_deficit = lp_norm(u, m) ** 2 - float(
        np.dot(g.weights * V.values.values, u.values**2)
    )
    weak_margin = saturation_deficit - dist2
    scale = max(dist2, 1.0)
    gap = 0.5 * float(
        np.dot(
            g.weights * (ex.V0.values.values - V.values.values),
            ex.v0.values * u.values,
        )
    )
    theta_exp = max(2.0, p)
    sigma_hat = consts.sigma if p < 2.0 else consts.sigma_alt
    ratio = _negative_ratio(V)
    c = (1.0 - ratio) * sigma_hat ** (1.0 / theta_exp) / consts.c1
    func_lhs = max(gap, 0.0) ** (1.0 / theta_exp) * lp_norm(diff, m)
    func_rhs = c * dist2
    func_margin = func_lhs - func_rhs
    return MaxStateReport(
        p,
        dist2,
        saturation_deficit,
        weak_margin,
        weak_margin >= -10 * tol * scale,
        func_lhs,
        func_rhs,
        c,
        func_margin,
        func_margin >= -10 * tol * max(func_lhs, 1.0),
        theta_exp,
        ratio,
    )


@dataclass(frozen=True)
class MinStateReport:
    """State-space stability on the min side.

    Certifies gap^((p-1)/(2p)) >= c (|u - u0|^2 + |u - u0|_{L^q}^2) with
    q = 2p/(p+1) and c assembled from the printed coefficients, plus the
    corner cross-check |  |u|_q^2 - |u0|_q^2 | <= sqrt(gap)/c3 for gaps
    at most 1.
    """

    p: float
    gap: float
    lhs: float
    rhs: float
    constant: float
    margin: float
    passed: bool
    corner_lhs: float
    corner_rhs: float
    corner_passed: bool


def verify_min_state_stability(
    W: ReciprocalPotential,
    ex: MinExtremal,
    f: SourceTerm,
    consts: MinStabilityConstants | None = None,
    extremal_energy: float | None = None,
    tol: float = _TOL,
) -> MinStateReport:
    p = ex.p
    if consts is None:
        consts = constants_min(ex, f)
    if extremal_energy is None:
        extremal_energy = solve_state_reciprocal(ex.W0.values, f).energy
    res = solve_state_reciprocal(W.values, f)
    gap = max(res.energy - extremal_energy, 0.0)
    q = 2.0 * p / (p + 1.0)
    diff = res.state - ex.u0
    bracket = h1_seminorm(diff) ** 2 + lp_norm(diff, q) ** 2
    e = (p - 1.0) / (2.0 * p)
    fnorm = consts.source_dual_norm
    c_main = 1.0 / (2.0 + 2.0 / (consts.c3 * consts.c2) ** 2 + fnorm**2 * consts.c9 ** (-e))
    c_trivial = 1.0 / (6.0 * fnorm**2)
    c = min(c_main, c_trivial)
    lhs = gap**e
    rhs = c * bracket
    margin = lhs - rhs
    corner_lhs = abs(lp_norm(res.state, q) ** 2 - lp_norm(ex.u0, q) ** 2)
    corner_rhs = math.sqrt(gap) / consts.c3
    corner_ok = gap > 1.0 or corner_lhs <= corner_rhs + 10 * tol
    return MinStateReport(
        p,
        gap,
        lhs,
        rhs,
        c,
        margin,
        margin >= -10 * tol * max(lhs, 1.0),
        corner_lhs,
        corner_rhs,
        corner_ok,
    )


@dataclass(frozen=True)
class ScalingProbeResult:
    eps: tuple[float, ...]
    gaps: tuple[float, ...]
    remainders: tuple[float, ...]
    margins: tuple[float, ...]
    gap_slope: float
    remainder_slope: float
    all_passed: bool


def scaling_probe(
    direction: GridFunction,
    ex: MaxExtremal | MinExtremal,
    f: SourceTerm,
    eps_list: Sequence[float] = (1e-1, 10**-1.5, 1e-2, 10**-2.5, 1e-3),
    tol: float = _TOL,
) -> ScalingProbeResult:
    """Perturb the extremal along a direction and fit gap and remainder
    scalings in eps.

    The perturbed potential is pushed back onto the constraint sphere
    (absolute value, then exact norm division), so the energy detaches
    quadratically and the fitted gap slope is close to 2.
    """
    is_max = isinstance(ex, MaxExtremal)
    base = ex.V0.values if is_max else ex.W0.values
    p = ex.p
    dnorm = lp_norm(direction, p)
    if dnorm == 0.0:
        raise ValueError("probe direction vanishes")
    psi = direction * (1.0 / dnorm)
    gaps, rems, margins = [], [], []
    consts = constants_max(ex) if is_max else constants_min(ex, f)
    extremal_energy = None
    if not is_max:
        extremal_energy = solve_state_reciprocal(ex.W0.values, f).energy
    for eps in eps_list:
        pert = np.abs(base.values + float(eps) * psi.values)
        pert_gf = base.grid.function(pert)
        norm = lp_norm(pert_gf, p)
        if norm == 0.0:
            raise ValueError("perturbation collapsed to zero")
        pert_gf = pert_gf * (1.0 / norm)
        if is_max:
            report = verify_max_stability(Potential(pert_gf), ex, f, consts, tol=tol)
        else:
            report = verify_min_stability(
                ReciprocalPotential(pert_gf), ex, f, consts, extremal_energy, tol=tol
            )
        gaps.append(report.gap)
        rems.append(report.remainder)
        margins.append(report.margin)
    eps_arr = np.asarray(eps_list, dtype=float)
    gap_arr = np.asarray(gaps)
    rem_arr = np.asarray(rems)
    ok = (gap_arr > 0.0) & (rem_arr > 0.0)
    if ok.sum() >= 2:
        gap_slope = float(np.polyfit(np.log(eps_arr[ok]), np.log(gap_arr[ok]), 1)[0])
        rem_slope = float(np.polyfit(np.log(eps_arr[ok]), np.log(rem_arr[ok]), 1)[0])
    else:
        gap_slope = math.nan
        rem_slope = math.nan
    return ScalingProbeResult(
        tuple(float(e) for e in eps_list),
        tuple(gaps),
        tuple(rems),
        tuple(margins),
        gap_slope,
        rem_slope,
        all(m >= -10 * tol for m in margins),
    )


# -- random admissible samples ---------------------------------------------


def random_max_potential(grid, rng: np.random.Generator, p: float) -> Potential:
    """Random admissible potential: nonnegative with |V|_p <= 1.

    Mixes smooth saturated fields, interior (non-saturated) fields, and
    scaled indicator blocks.
    """
    kind = rng.integers(0, 4)
    if kind == 3:
        lo = float(rng.uniform(0.05, 0.45))
        hi = float(rng.uniform(lo + 0.2, min(lo + 0.7, 0.95)))
        vals = indicator_region(grid, lo, hi)
    else:
        vals = abs(smooth_random_field(grid, rng))
    gf = vals
    norm = lp_norm(gf, p)
    if norm == 0.0:
        gf = grid.function(np.full(grid.size, 1.0))
        norm = lp_norm(gf, p)
    gf = gf * (1.0 / norm)
    if kind == 2:
        gf = gf * float(rng.uniform(0.3, 0.95))
    return Potential(gf)


def random_min_reciprocal(grid, rng: np.random.Generator, p: float) -> ReciprocalPotential:
    """Random admissible reciprocal: nonnegative with |W|_p <= 1.

    Mixes strictly positive smooth fields, indicator supports (encoding an
    infinite potential outside), and interior rescalings.
    """
    kind = rng.integers(0, 4)
    if kind == 3:
        lo = float(rng.uniform(0.05, 0.45))
        hi = float(rng.uniform(lo + 0.2, min(lo + 0.7, 0.95)))
        vals = indicator_region(grid, lo, hi)
    else:
        raw = smooth_random_field(grid, rng)
        vals = grid.function(np.abs(raw.values) + 0.05 * float(np.abs(raw.values).max() or 1.0))
    norm = lp_norm(vals, p)
    gf = vals * (1.0 / norm)
    if kind == 2:
        gf = gf * float(rng.uniform(0.3, 0.95))
    return ReciprocalPotential(gf)
