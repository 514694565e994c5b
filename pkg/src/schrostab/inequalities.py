"""Quantitative integral inequalities on grid functions.

Each check returns a :class:`DeficitReport` with the raw deficit, the
remainder term it must dominate, the constant in front of the remainder,
and the resulting margin.  The inequalities are measure-space statements,
so they hold for quadrature sums exactly; margins can only go negative by
rounding, and ``passed`` allows 10x the stated tolerance for that.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .grid import GridFunction, h1_seminorm, inner, lp_norm
from .schrodinger import SourceTerm, solve_state_reciprocal
from .optimal import MinExtremal, ReciprocalPotential

__all__ = [
    "DeficitReport",
    "ReductionResult",
    "quantitative_holder",
    "clarkson_check",
    "strauss_bound",
    "norm_lower_triangle",
    "reduction",
]

_NORMALIZATION_SLACK = 1e-6
_TOL = 1e-9


@dataclass(frozen=True)
class DeficitReport:
    deficit: float
    remainder: float
    constant: float
    margin: float
    passed: bool


def _unit(u: GridFunction, s: float, what: str) -> GridFunction:
    norm = lp_norm(u, s)
    if norm == 0.0:
        raise ValueError(f"{what} vanishes identically")
    if abs(norm - 1.0) > _NORMALIZATION_SLACK:
        raise ValueError(f"{what} must have unit L^{s:g} norm, got {norm:.8g}")
    return u * (1.0 / norm)


def quantitative_holder(f: GridFunction, g: GridFunction, q: float, form: int = 1) -> DeficitReport:
    """Remainder-strengthened Hoelder inequality for unit-norm pairs.

    With |f|_q = |g|_{q'} = 1 and q >= 2, the pairing satisfies

        form 1:  |<f, g>| <= 1 - (q'-1)/4 * | |f|^(q-2) f - s g |_{q'}^2
        form 2:  |<f, g>| <= 1 - 1/(q 2^(q-1)) * | f - s |g|^(q'-2) g |_q^q

    where s = sign <f, g>.  The remainder measures the distance of g to the
    dual extremal of f after aligning signs; without the alignment the bound
    is false whenever <f, g> < 0 (replace g by -g in the equality case).
    Inputs within 1e-6 of unit norm are renormalized in place.
    """
    q = float(q)
    if not math.isfinite(q) or q < 2.0:
        raise ValueError("quantitative form requires finite q >= 2")
    if form not in (1, 2):
        raise ValueError("form must be 1 or 2")
    qc = q / (q - 1.0)
    f = _unit(f, q, "first factor")
    g = _unit(g, qc, "second factor")
    pairing = inner(f, g)
    deficit = 1.0 - abs(pairing)
    if pairing < 0.0:
        g = -g
    if form == 1:
        fdual = f.grid.function(np.abs(f.values) ** (q - 2.0) * f.values)
        remainder = lp_norm(fdual - g, qc) ** 2
        constant = (qc - 1.0) / 4.0
    else:
        gdual = g.grid.function(np.abs(g.values) ** (qc - 2.0) * g.values)
        remainder = lp_norm(f - gdual, q) ** q
        constant = 1.0 / (q * 2.0 ** (q - 1.0))
    margin = deficit - constant * remainder
    return DeficitReport(deficit, remainder, constant, margin, margin >= -10 * _TOL)


def clarkson_check(h1: GridFunction, h2: GridFunction, q: float) -> DeficitReport:
    """Clarkson-type estimate for 1 < q <= 2 on unit-norm pairs:

        |(h1+h2)/2|_q^(q') + |(h1-h2)/2|_q^(q') <= 1.
    """
    q = float(q)
    if not 1.0 < q <= 2.0:
        raise ValueError("Clarkson check requires 1 < q <= 2")
    qc = q / (q - 1.0)
    h1 = _unit(h1, q, "first function")
    h2 = _unit(h2, q, "second function")
    mean = lp_norm((h1 + h2) * 0.5, q) ** qc
    half_diff = lp_norm((h1 - h2) * 0.5, q) ** qc
    margin = 1.0 - mean - half_diff
    return DeficitReport(mean + half_diff, half_diff, 1.0, margin, margin >= -10 * _TOL)


def strauss_constant(q: float, N: int) -> float:
    """Constant in the radial pointwise decay bound, ((2+q)/(2 N omega_N))^2."""
    if q <= 0:
        raise ValueError("q must be positive")
    if N < 2:
        raise ValueError("the radial bound needs N >= 2")
    omega = math.pi ** (N / 2.0) / math.gamma(N / 2.0 + 1.0)
    return ((2.0 + q) / (2.0 * N * omega)) ** 2


def strauss_bound(u: GridFunction, q: float) -> DeficitReport:
    """Pointwise radial decay bound checked at every node:

        |u(rho)|^(2+q) <= S_{q,N} rho^(-2(N-1)) |grad u|_2^2 |u|_q^q.

    The report's margin is the smallest nodewise slack; the deficit field
    carries the largest left-hand side.
    """
    g = u.grid
    if g.domain.kind != "radial3d":
        raise ValueError("the pointwise decay bound applies to radial3d functions")
    q = float(q)
    N = g.domain.dimension
    S = strauss_constant(q, N)
    rho = g.coords[0]
    grad2 = h1_seminorm(u) ** 2
    qnorm = lp_norm(u, q) ** q
    lhs = np.abs(u.values) ** (2.0 + q)
    rhs = S * rho ** (-2.0 * (N - 1)) * grad2 * qnorm
    slack = rhs - lhs
    margin = float(slack.min())
    scale = max(float(lhs.max()), 1e-300)
    return DeficitReport(float(lhs.max()), scale, S, margin, margin >= -10 * _TOL * scale)


def norm_lower_triangle(g: GridFunction, g0: GridFunction, r: float, s: float) -> DeficitReport:
    """Triangle-type lower bound relating different exponents:

        |g0|_r <= |g|_r + |g - g0|_s * | |g0|^(r-1) |_{s'} / |g0|_r^(r-1).
    """
    r, s = float(r), float(s)
    if r < 1.0 or s <= 1.0:
        raise ValueError("need r >= 1 and s > 1")
    norm_g0 = lp_norm(g0, r)
    if norm_g0 == 0.0:
        raise ValueError("g0 vanishes identically")
    sc = s / (s - 1.0)
    power = lp_norm(g0.grid.function(np.abs(g0.values) ** (r - 1.0)), sc)
    rhs = lp_norm(g, r) + lp_norm(g - g0, s) * power / norm_g0 ** (r - 1.0)
    margin = rhs - norm_g0
    return DeficitReport(norm_g0, rhs, 1.0, margin, margin >= -10 * _TOL)


@dataclass(frozen=True)
class ReductionResult:
    """Saturated rescaling of an interior reciprocal potential."""

    W_saturated: ReciprocalPotential
    scale: float
    monotonicity: DeficitReport
    distance_bound: DeficitReport


def reduction(
    W: ReciprocalPotential,
    f: SourceTerm,
    ex: MinExtremal,
    beta_lower: float,
    tol: float = 1e-9,
) -> ReductionResult:
    """Rescale V = 1/W to saturate the constraint and certify the two bounds.

    With lam = |W|_p <= 1 and U = lam V (so 1/U = W/lam has unit norm):
    the energy drops, E_f(U) <= E_f(V), and the distance to the extremal
    obeys

        |1/V - 1/U0|_p <= |1/U - 1/U0|_p + (2/beta) (E_f(V) - E_f(U0)),

    where beta <= int V u_V^2 is supplied by the caller.
    """
    p = ex.p
    lam = lp_norm(W.values, p)
    if lam > 1.0 + 10 * tol:
        raise ValueError(f"reciprocal potential must satisfy |W|_p <= 1, got {lam:.8g}")
    if beta_lower <= 0.0:
        raise ValueError("beta must be positive")
    lam = min(lam, 1.0)
    Wsat = ReciprocalPotential(W.values * (1.0 / lam))
    rV = solve_state_reciprocal(W.values, f)
    rU = solve_state_reciprocal(Wsat.values, f)
    r0 = solve_state_reciprocal(ex.W0.values, f)
    scale = max(abs(rV.energy), 1.0)
    mono_margin = rV.energy - rU.energy
    mono = DeficitReport(
        rV.energy, rU.energy, 1.0, mono_margin, mono_margin >= -10 * tol * scale
    )
    lhs = lp_norm(W.values - ex.W0.values, p)
    rhs = lp_norm(Wsat.values - ex.W0.values, p) + (2.0 / beta_lower) * (
        rV.energy - r0.energy
    )
    dist_margin = rhs - lhs
    dist = DeficitReport(lhs, rhs, 2.0 / beta_lower, dist_margin, dist_margin >= -10 * tol)
    return ReductionResult(Wsat, lam, mono, dist)
