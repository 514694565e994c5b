"""Extremal potentials by convex minimization.

Maximizing the energy over potentials with unit L^p norm, and minimizing it
over nonnegative potentials whose reciprocal has unit L^p norm, both reduce
to a single convex problem for the extremal state: minimize

    1/2 |grad u|^2 + 1/2 |u|_{L^m}^2 - <f, u>

with m = 2p/(p-1) > 2 on the max side and m = 2p/(p+1) < 2 on the min side.
The extremal potential is then read off the minimizer through the pointwise
equality case of the Hoelder inequality, which saturates exactly in
quadrature because potential and state share the grid weights.

The descent direction is preconditioned by the stiffness matrix (a gradient
step in the Dirichlet geometry) and the stopping test measures the gradient
in the dual norm of that geometry.  The min-side exponent m < 2 makes the
norm term non-smooth at zero, handled by the standard sqrt(u^2 + eps^2)
smoothing with a continuation schedule in eps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .grid import Grid, GridFunction, lp_norm
from .schrodinger import (
    ConvergenceError,
    DegenerateSourceError,
    Potential,
    SourceTerm,
    dual_norm,
    solve_state,
)

__all__ = [
    "ReciprocalPotential",
    "MaxExtremal",
    "MinExtremal",
    "MaxStabilityConstants",
    "MinStabilityConstants",
    "solve_max_extremal",
    "solve_min_extremal",
    "constants_max",
    "constants_min",
    "talenti_constant",
    "embedding_constant",
    "project_max_constraint",
]


@dataclass(frozen=True, eq=False)
class ReciprocalPotential:
    """Reciprocal 1/V of a nonnegative potential; zero encodes V = +infinity."""

    values: GridFunction

    def __post_init__(self):
        if self.values.min() < 0.0:
            raise ValueError("reciprocal potential must be nonnegative")

    @property
    def grid(self) -> Grid:
        return self.values.grid


@dataclass(frozen=True, eq=False)
class MaxExtremal:
    """Extremal pair of the constrained maximization, |V|_p <= 1."""

    v0: GridFunction
    V0: Potential
    c1: float
    p: float
    surrogate_value: float
    grad_norm: float
    iterations: int


@dataclass(frozen=True, eq=False)
class MinExtremal:
    """Extremal pair of the constrained minimization, |1/V|_p <= 1, V >= 0."""

    u0: GridFunction
    W0: ReciprocalPotential
    c2: float
    p: float
    surrogate_value: float
    grad_norm: float
    iterations: int
    eps_final: float
    euler_lagrange_residual: float


def _check_source(f: SourceTerm):
    if not np.any(f.values.values):
        raise DegenerateSourceError("source term vanishes identically")


def _descend(grid: Grid, value_and_grad, u0: np.ndarray, grad_tol: float, max_iter: int):
    """Best-effort Armijo descent along stiffness-preconditioned gradients.

    Returns (u, value, dual gradient norm, iterations).  The dual norm of
    the gradient is sqrt(g K^-1 g), the natural size of the derivative in
    the Dirichlet geometry.  The linear rate degrades when the zero-order
    curvature dominates the Dirichlet form (heavily weighted radial grids),
    so this only warms up the iterate; exhausting the budget or stalling
    the line search hands the current point to the Newton stage instead of
    failing.
    """
    u = np.array(u0, dtype=float)
    val, g = value_and_grad(u)
    gnorm = math.inf
    for it in range(int(max_iter)):
        d = grid.stiffness_solve(g)
        gnorm = math.sqrt(max(float(d @ g), 0.0))
        if gnorm <= grad_tol:
            return u, val, gnorm, it
        t = 1.0
        for _ in range(60):
            trial = u - t * d
            tval, tg = value_and_grad(trial)
            if tval <= val - 1e-4 * t * gnorm**2:
                break
            t *= 0.5
        else:
            return u, val, gnorm, it
        u, val, g = trial, tval, tg
    return u, val, gnorm, int(max_iter)


def _rank_one_solve(lu, a: np.ndarray, coef: float, rhs: np.ndarray) -> np.ndarray:
    """Solve (A + coef a a^T) x = rhs given a factorization of A."""
    x = lu.solve(rhs)
    y = lu.solve(a)
    denom = 1.0 + coef * float(a @ y)
    return x - (coef * float(a @ x) / denom) * y


def _polish_newton(grid: Grid, residual_and_jacobian, u: np.ndarray, grad_tol: float):
    """Damped Newton on the Euler-Lagrange system.

    The Armijo descent bottoms out when the required value decrease
    (~gnorm^2) falls below float resolution of the functional; Newton on
    the residual has no such floor and finishes the last couple of digits
    quadratically.  Convergence is measured by the dual norm of the
    residual, the same quantity the descent drives down.
    """
    res, lu, a, coef = residual_and_jacobian(u)
    rnorm = float(np.linalg.norm(res))
    for it in range(50):
        d = grid.stiffness_solve(res)
        gnorm = math.sqrt(max(float(d @ res), 0.0))
        if gnorm <= grad_tol:
            return u, gnorm, it
        step = _rank_one_solve(lu, a, coef, -res)
        t = 1.0
        while t >= 2.0**-20:
            cand = u + t * step
            cres, clu, ca, ccoef = residual_and_jacobian(cand)
            cnorm = float(np.linalg.norm(cres))
            if cnorm < rnorm:
                u, res, lu, a, coef, rnorm = cand, cres, clu, ca, ccoef, cnorm
                break
            t *= 0.5
        else:
            raise ConvergenceError("Newton polish stalled before reaching tolerance")
    raise ConvergenceError("Newton polish did not reach tolerance")


def solve_max_extremal(
    p: float,
    f: SourceTerm,
    grad_tol: float = 1e-8,
    max_iter: int = 100_000,
) -> MaxExtremal:
    """Extremal pair for the max problem by minimizing the convex surrogate.

    The minimizer v0 solves -lap v0 + S^(-1/p) |v0|^(m-2) v0 = f with
    m = 2p/(p-1) and S = int |v0|^m; the extremal potential is
    V0 = S^(-1/p) |v0|^(2/(p-1)), which has unit L^p norm in quadrature by
    construction, and v0 is its state.
    """
    if p <= 1.0:
        raise ValueError("p must exceed 1")
    _check_source(f)
    g = f.grid
    w = g.weights
    fv = f.values.values
    K = g.stiffness
    m = 2.0 * p / (p - 1.0)
    expo = (p - 1.0) / p

    def vg(u: np.ndarray):
        Ku = K @ u
        S = float(np.dot(w, np.abs(u) ** m))
        val = 0.5 * float(u @ Ku) + 0.5 * S**expo - float(np.dot(w * fv, u))
        if S > 0.0:
            nl = S ** (-1.0 / p) * w * np.abs(u) ** (m - 2.0) * u
        else:
            nl = 0.0
        grad = Ku + nl - w * fv
        return val, grad

    def res_jac(u: np.ndarray):
        au = np.abs(u)
        S = float(np.dot(w, au**m))
        phi = w * au ** (m - 2.0) * u
        res = K @ u + S ** (-1.0 / p) * phi - w * fv
        A = (K + sp.diags(S ** (-1.0 / p) * w * (m - 1.0) * au ** (m - 2.0))).tocsc()
        return res, spla.splu(A), phi, -(m / p) * S ** (-1.0 / p - 1.0)

    start = g.stiffness_solve(w * fv)
    v0, _, _, iters = _descend(g, vg, start, max(grad_tol, 1e-6), min(500, max_iter))
    v0, gnorm, polish_iters = _polish_newton(g, res_jac, v0, grad_tol)
    iters += polish_iters
    val = vg(v0)[0]
    S = float(np.dot(w, np.abs(v0) ** m))
    if S <= 0.0:
        raise ConvergenceError("surrogate minimizer vanished for a nonzero source")
    c1 = S ** ((p - 1.0) / (2.0 * p))
    V0 = Potential(g.function(S ** (-1.0 / p) * np.abs(v0) ** (2.0 / (p - 1.0))))
    ex = MaxExtremal(g.function(v0), V0, c1, p, val, gnorm, iters)
    res = solve_state(V0, f)
    if abs(res.energy - val) > 10 * max(grad_tol, 1e-12) * max(1.0, abs(val)):
        raise ConvergenceError(
            f"energy at the extremal potential ({res.energy:.12g}) does not match "
            f"the surrogate minimum ({val:.12g})"
        )
    return ex


def solve_min_extremal(
    p: float,
    f: SourceTerm,
    grad_tol: float = 1e-8,
    max_iter: int = 100_000,
    eps_schedule: tuple[float, ...] = (1e-2, 1e-3, 1e-4, 1e-6),
) -> MinExtremal:
    """Extremal pair for the min problem, smoothed continuation in eps.

    Here m = 2p/(p+1) < 2; |u| is replaced by sqrt(u^2 + eps^2) while eps
    walks down the schedule, warm-starting each stage.  The reciprocal
    extremal is W0 = S^(-1/p) |u0|^(2/(p+1)) with S = int |u0|^m, of unit
    L^p norm in quadrature, and u0 is the state of the potential 1/W0.
    """
    if p <= 1.0:
        raise ValueError("p must exceed 1")
    if not eps_schedule or any(e <= 0 for e in eps_schedule):
        raise ValueError("eps_schedule must be positive")
    _check_source(f)
    g = f.grid
    w = g.weights
    fv = f.values.values
    K = g.stiffness
    q = 2.0 * p / (p + 1.0)
    expo = (p + 1.0) / p  # 2/q

    def make_vg(eps: float):
        e2 = eps * eps

        def vg(u: np.ndarray):
            Ku = K @ u
            r2 = u * u + e2
            S = float(np.dot(w, r2 ** (0.5 * q)))
            val = 0.5 * float(u @ Ku) + 0.5 * S**expo - float(np.dot(w * fv, u))
            grad = Ku + S ** (1.0 / p) * w * r2 ** (0.5 * q - 1.0) * u - w * fv
            return val, grad

        return vg

    def make_res_jac(eps: float):
        e2 = eps * eps

        def res_jac(u: np.ndarray):
            r2 = u * u + e2
            core = r2 ** (0.5 * q - 1.0)
            S = float(np.dot(w, r2 ** (0.5 * q)))
            psi = w * core * u
            res = K @ u + S ** (1.0 / p) * psi - w * fv
            diag = S ** (1.0 / p) * w * (core + (q - 2.0) * u * u * r2 ** (0.5 * q - 2.0))
            A = (K + sp.diags(diag)).tocsc()
            return res, spla.splu(A), psi, (q / p) * S ** (1.0 / p - 1.0)

        return res_jac

    u = g.stiffness_solve(w * fv)
    total_iters = 0
    eps_final = float(eps_schedule[-1])
    # each continuation stage: a short descent burst for globalization, then
    # damped Newton on the smoothed Euler-Lagrange system (strongly convex,
    # so the stage tolerance is reached in a handful of factorizations)
    for eps in eps_schedule:
        stage_tol = grad_tol if eps == eps_final else max(grad_tol, 1e-2 * eps)
        u, _, _, iters = _descend(g, make_vg(eps), u, stage_tol, min(200, max_iter))
        total_iters += iters
        u, gnorm, iters = _polish_newton(g, make_res_jac(eps), u, stage_tol)
        total_iters += iters
    S = float(np.dot(w, np.abs(u) ** q))
    if S <= 0.0:
        raise ConvergenceError("surrogate minimizer vanished for a nonzero source")
    c2 = S ** ((p + 1.0) / (2.0 * p))
    W0 = ReciprocalPotential(g.function(S ** (-1.0 / p) * np.abs(u) ** (2.0 / (p + 1.0))))
    # unsmoothed surrogate value and Euler-Lagrange residual on the bulk
    val = (
        0.5 * float(u @ (K @ u)) + 0.5 * S**expo - float(np.dot(w * fv, u))
    )
    bulk = np.abs(u) > 10.0 * eps_final
    if bulk.any():
        el = (K @ u) / w + S ** (1.0 / p) * np.abs(u) ** (q - 2.0) * u - fv
        el_res = float(np.max(np.abs(el[bulk])))
    else:
        el_res = math.nan
    return MinExtremal(
        g.function(u), W0, c2, p, val, gnorm, total_iters, eps_final, el_res
    )


# -- constants ------------------------------------------------------------


def talenti_constant(N: int) -> float:
    """Sharp constant T_N with |grad u|_2^2 >= T_N |u|_{2N/(N-2)}^2 on R^N.

    Evaluated as pi N (N-2) (Gamma(N/2)/Gamma(N))^(2/N) and cross-checked
    against the equivalent form obtained from the Legendre duplication
    formula; the two must agree to 1e-10.
    """
    if N < 3:
        raise ValueError("the sharp Sobolev constant needs N >= 3")
    a = math.pi * N * (N - 2) * math.exp((2.0 / N) * (math.lgamma(N / 2.0) - math.lgamma(float(N))))
    dup = math.sqrt(math.pi) / (2.0 ** (N - 1) * math.gamma((N + 1) / 2.0))
    b = math.pi * N * (N - 2) * dup ** (2.0 / N)
    if abs(a - b) > 1e-10 * max(1.0, abs(a)):
        raise AssertionError("sharp Sobolev constant cross-check failed")
    return a


def embedding_constant(grid_or_domain) -> tuple[float, float]:
    """Pair (s, T) with |u|_{L^s} <= T^(-1/2) |grad u|_2 on the domain.

    Three-dimensional domains use the sharp Sobolev constant with s = 6.
    Lower-dimensional domains use the corresponding embeddings with s = 4:
    on an interval of length L, u(x)^2 <= min(x, L-x) |u'|_2^2 gives
    |u|_4^2 <= (L^(3/2)/2) |u'|_2^2, so T = 2 L^(-3/2); on a box in the
    plane the Ladyzhenskaya inequality |u|_4^4 <= 2 |u|_2^2 |grad u|_2^2
    combined with the Poincare constant gives T = sqrt(lambda_1 / 2).
    """
    domain = grid_or_domain.domain if isinstance(grid_or_domain, Grid) else grid_or_domain
    N = domain.dimension
    if N >= 3:
        return 6.0, talenti_constant(3)
    if domain.kind == "interval":
        L = domain.axis_lengths[0]
        return 4.0, 2.0 / L**1.5
    # box2d
    lam1 = sum(math.pi**2 / L**2 for L in domain.axis_lengths)
    return 4.0, math.sqrt(lam1 / 2.0)


@dataclass(frozen=True)
class MaxStabilityConstants:
    """Coefficients of the max-side quadratic stability bounds.

    ``sigma_prime`` applies for p >= 2 against the L^p' distance of
    |V|^(p-2) V from V0^(p-1); ``sigma_double_prime`` applies for
    1 < p < 2 against the L^p distance of V from V0.  Both already
    include the large-gap branch, so they are valid unconditionally.
    ``sigma_alt`` covers the complementary distance flavor, which comes
    with exponent ``alt_exponent`` instead of 2.
    """

    p: float
    c1: float
    sigma_prime: float
    sigma_double_prime: float
    sigma: float
    sigma_alt: float
    alt_exponent: float
    trivial_threshold: float


def constants_max(ex: MaxExtremal) -> MaxStabilityConstants:
    p, c1 = ex.p, ex.c1
    pp = p / (p - 1.0)
    core = c1**4 / (8.0 * c1**2 + 2.0 * (p - 1.0))
    sigma_prime = 0.25 * min((pp - 1.0) * core, 1.0, c1**2 / 4.0)
    sigma_double_prime = 0.25 * min((p - 1.0) * core, 1.0, c1**2 / 4.0)
    sigma = sigma_prime if p >= 2.0 else sigma_double_prime
    threshold = min(c1**2 / 4.0, 1.0)
    # complementary flavor: exponent r = p against |V - V0|_p for p >= 2,
    # exponent r = p' against the nonlinear distance for 1 < p < 2
    r = p if p >= 2.0 else pp
    A = c1**2 / (r * 2.0 ** (2.0 * r))
    B = 1.0 / (2.0 * r * c1 ** (2.0 * r - 2.0))
    sigma_alt = min(A / (1.0 + B), threshold / 2.0**r)
    return MaxStabilityConstants(
        p, c1, sigma_prime, sigma_double_prime, sigma, sigma_alt, r, threshold
    )


@dataclass(frozen=True)
class MinStabilityConstants:
    """Coefficients of the min-side stability bound with exponent beta."""

    p: float
    c2: float
    c3: float
    c4: float
    c5: float
    c6: float
    c7: float
    c8: float
    c9: float
    sigma_m: float
    beta: float
    source_dual_norm: float
    embedding_exponent: float
    c4_tail_estimate: float


def constants_min(ex: MinExtremal, f: SourceTerm) -> MinStabilityConstants:
    p, c2 = ex.p, ex.c2
    g = f.grid
    fnorm = dual_norm(f)
    if fnorm == 0.0:
        raise DegenerateSourceError("source term vanishes identically")
    s, T = embedding_constant(g)
    s_conj = s / (s - 1.0)
    u0a = np.abs(ex.u0.values)
    c4 = lp_norm(g.function(u0a ** ((p - 1.0) / (p + 1.0))), s_conj)
    c3 = min(
        math.sqrt(2.0) / (math.sqrt(2.0) + 3.0 * fnorm),
        1.0 / (3.0 * math.sqrt(2.0) * fnorm),
    )
    c5 = min(1.0, (c2**2 * c3 / 2.0) ** 2)
    c6 = (
        (1.0 + 2.0 / (p * (p + 1.0)) * (2.0 / ((p + 1.0) * c2**2)) ** p)
        ** (-1.0 / (p + 1.0))
        * (c2**2 / (p * 4.0 ** (p + 1.0))) ** (1.0 / (p + 1.0))
    )
    c7 = math.sqrt(T / (c3**2 * c2**4 + fnorm**2)) * c3 * c2**3 / 2.0
    core = (p - 1.0) / p * c7 * c2 ** ((p - 1.0) / (p + 1.0)) / c4
    c8 = (0.25 * core ** ((p - 1.0) / p)) ** (1.0 / (p + 1.0))
    beta = 2.0 * p * (p + 1.0) / (p - 1.0)
    half_beta = p * (p + 1.0) / (p - 1.0)
    sigma_m = min(
        ((c6 + c8) / (c6 * c8) + 4.0 / c2**2) ** (-beta),
        c5 * 4.0 ** (-half_beta),
        (2.0 * c7 * c2 ** ((p - 1.0) / (p + 1.0)) / c4) ** 2 * 4.0 ** (-half_beta),
    )
    c9 = core**2 * 0.5 ** (4.0 * p / (p - 1.0))
    tail = _c4_tail_estimate(ex, s_conj)
    return MinStabilityConstants(
        p, c2, c3, c4, c5, c6, c7, c8, c9, sigma_m, beta, fnorm, s, tail
    )


def _c4_tail_estimate(ex: MinExtremal, s_conj: float) -> float:
    """Estimated truncated-tail contribution to the c4 integral on a ball.

    Fits a power law to the outer decade of |u0| and extrapolates the
    integrand past the truncation radius; zero on bounded domains.
    """
    g = ex.u0.grid
    if g.domain.kind != "radial3d":
        return 0.0
    R = g.domain.axis_lengths[0]
    rho = g.coords[0]
    vals = np.abs(ex.u0.values)
    gamma = (ex.p - 1.0) / (ex.p + 1.0) * s_conj
    mask = (rho >= 0.5 * R) & (vals > 0.0)
    if mask.sum() < 4:
        return math.inf
    slope, logc = np.polyfit(np.log(rho[mask]), np.log(vals[mask]), 1)
    decay = -slope * gamma  # integrand |u0|^gamma rho^2 ~ rho^(2 - decay)
    if decay <= 3.0:
        return math.inf
    C = math.exp(logc) ** gamma
    return 4.0 * math.pi * C * R ** (3.0 - decay) / (decay - 3.0)


def project_max_constraint(V: Potential, p: float) -> Potential:
    """Project onto the admissible max class: |V| / max(1, |V|_p)."""
    if p <= 1.0:
        raise ValueError("p must exceed 1")
    vals = np.abs(V.values.values)
    if not vals.any():
        raise ValueError("cannot project the zero potential")
    norm = lp_norm(V.values, p)
    return Potential(V.grid.function(vals / max(1.0, norm)))
