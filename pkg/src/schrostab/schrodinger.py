"""States and energies of -lap + V with homogeneous Dirichlet conditions.

The energy of a potential V against a source f is

    E_f(V) = min_u  1/2 |grad u|^2 + 1/2 int V u^2 - <f, u>  <=  0,

attained at the state u_V solving (-lap + V) u = f, where it equals
-1/2 <f, u_V>.  Discretely the minimization runs over grid functions, the
operator is K + diag(w V) acting against the quadrature pairing, and the
identities below (energy difference formula, weighted L^2 bounds) hold
exactly modulo solver residuals because they only use symmetry of K and
Hoelder/Cauchy-Schwarz on weighted sums.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .grid import Grid, GridFunction, apply_laplacian, h1_seminorm, inner, lp_norm

__all__ = [
    "Potential",
    "SourceTerm",
    "EnergyResult",
    "AdmissibilityCertificate",
    "AdmissibilityError",
    "ConvergenceError",
    "DegenerateSourceError",
    "check_admissible",
    "solve_state",
    "solve_state_reciprocal",
    "dual_norm",
    "energy_estimate_check",
    "weighted_l2_gap",
    "energy_difference_identity",
]


class AdmissibilityError(ValueError):
    """The quadratic form of -lap + V is not coercive on the grid."""


class ConvergenceError(RuntimeError):
    """An iterative solver exhausted its budget."""


class DegenerateSourceError(ValueError):
    """The source term vanishes identically."""


@dataclass(frozen=True, eq=False)
class Potential:
    values: GridFunction

    @property
    def grid(self) -> Grid:
        return self.values.grid

    @staticmethod
    def constant(grid: Grid, c: float) -> "Potential":
        return Potential(grid.function(np.full(grid.size, float(c))))

    @staticmethod
    def from_callable(grid: Grid, fn: Callable) -> "Potential":
        return Potential(grid.from_callable(fn))


@dataclass(frozen=True, eq=False)
class SourceTerm:
    values: GridFunction

    @property
    def grid(self) -> Grid:
        return self.values.grid

    @staticmethod
    def constant(grid: Grid, c: float = 1.0) -> "SourceTerm":
        return SourceTerm(grid.function(np.full(grid.size, float(c))))

    @staticmethod
    def from_callable(grid: Grid, fn: Callable) -> "SourceTerm":
        return SourceTerm(grid.from_callable(fn))


@dataclass(frozen=True, eq=False)
class EnergyResult:
    """State, energy -1/2 <f, u>, and solver diagnostics."""

    state: GridFunction
    energy: float
    residual: float
    iterations: int
    energy_direct: float  # quadratic functional evaluated at the state


@dataclass(frozen=True)
class AdmissibilityCertificate:
    coercive: bool
    margin: float  # lower bound on the smallest eigenvalue of -lap + V
    method: str


def _as_values(obj) -> GridFunction:
    if isinstance(obj, (Potential, SourceTerm)):
        return obj.values
    if isinstance(obj, GridFunction):
        return obj
    raise TypeError(f"expected Potential/SourceTerm/GridFunction, got {type(obj)!r}")


def operator_matrix(V: Potential) -> sp.csr_matrix:
    """Weighted-symmetric matrix K + diag(w V) of the Schrodinger form."""
    g = V.grid
    return (g.stiffness + sp.diags(g.weights * V.values.values)).tocsr()


def check_admissible(V: Potential, f: SourceTerm | None = None) -> AdmissibilityCertificate:
    """Certify coercivity of -lap + V via the smallest discrete eigenvalue.

    Nonnegative and constant potentials use the shift bound
    lambda_min >= lambda_1(-lap) + min V (exact for constants), which needs
    no eigeniteration on tensor grids.  Sign-changing potentials fall back
    to an eigensolve of the weighted pencil (K + diag(wV), diag(w)).
    """
    g = V.grid
    vals = V.values.values
    vmin = float(vals.min())
    lam1 = g.poisson_ground()
    constant = float(np.ptp(vals)) == 0.0
    if vmin >= 0.0 or constant:
        margin = lam1 + vmin
        return AdmissibilityCertificate(margin > 0.0, margin, "shift")
    A = operator_matrix(V)
    M = sp.diags(g.weights).tocsc()
    if g.size <= 400:
        import scipy.linalg as sla

        lam = float(
            sla.eigh(A.toarray(), M.toarray(), eigvals_only=True, subset_by_index=[0, 0])[0]
        )
    else:
        # shift below the spectrum so shift-invert targets lambda_min
        sigma = min(0.0, vmin) - 1.0
        lam = float(
            spla.eigsh(A.tocsc(), k=1, M=M, sigma=sigma, which="LM", return_eigenvectors=False)[0]
        )
    return AdmissibilityCertificate(lam > 0.0, lam, "eigensolve")


def _pcg(A: sp.csr_matrix, b: np.ndarray, tol: float, maxiter: int):
    d = A.diagonal()
    if np.any(d <= 0):
        d = np.maximum(d, 1e-30)
    M = spla.LinearOperator(A.shape, matvec=lambda x: x / d)
    count = {"n": 0}

    def cb(_):
        count["n"] += 1

    x, info = spla.cg(A, b, rtol=tol, atol=0.0, M=M, maxiter=maxiter, callback=cb)
    if info != 0:
        raise ConvergenceError(f"conjugate gradients did not converge (info={info})")
    return x, count["n"]


def solve_state(
    V: Potential,
    f: SourceTerm,
    tol: float = 1e-10,
    maxiter: int | None = None,
    skip_admissibility_check: bool = False,
) -> EnergyResult:
    """Solve (-lap + V) u = f by diagonal-preconditioned CG.

    ``tol`` is the relative residual of the weighted system.  Sign-changing
    potentials are certified coercive first unless the caller opts out.
    """
    g = V.grid
    if g != f.grid:
        raise ValueError("potential and source live on different grids")
    if V.values.min() < 0.0 and not skip_admissibility_check:
        cert = check_admissible(V)
        if not cert.coercive:
            raise AdmissibilityError(
                f"potential is not admissible (margin {cert.margin:.6g})"
            )
    A = operator_matrix(V)
    b = g.weights * f.values.values
    if maxiter is None:
        maxiter = max(20 * g.size, 2000)
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        u = g.zeros()
        return EnergyResult(u, 0.0, 0.0, 0, 0.0)
    x, iters = _pcg(A, b, tol, maxiter)
    residual = float(np.linalg.norm(A @ x - b)) / bnorm
    u = g.function(x)
    energy = -0.5 * inner(f.values, u)
    direct = (
        0.5 * float(x @ (g.stiffness @ x))
        + 0.5 * float(np.dot(g.weights * V.values.values, x**2))
        - inner(f.values, u)
    )
    return EnergyResult(u, energy, residual, iters, direct)


def solve_state_reciprocal(
    W: GridFunction, f: SourceTerm, tol: float = 1e-10, maxiter: int | None = None
) -> EnergyResult:
    """Energy of the potential encoded by its reciprocal W = 1/V.

    Nodes with W = 0 carry an infinite potential: the form is restricted to
    the support of W and the state vanishes off it.  W must be nonnegative,
    so the restricted operator is always coercive.
    """
    g = W.grid
    if g != f.grid:
        raise ValueError("reciprocal potential and source live on different grids")
    wv = W.values
    if wv.min() < 0.0:
        raise ValueError("reciprocal potential must be nonnegative")
    mask = wv > 0.0
    if not mask.any():
        u = g.zeros()
        return EnergyResult(u, 0.0, 0.0, 0, 0.0)
    idx = np.flatnonzero(mask)
    K = g.stiffness.tocsr()[idx][:, idx]
    Vsub = 1.0 / wv[idx]
    A = (K + sp.diags(g.weights[idx] * Vsub)).tocsr()
    b = g.weights[idx] * f.values.values[idx]
    if maxiter is None:
        maxiter = max(20 * g.size, 2000)
    bnorm = float(np.linalg.norm(b))
    full = np.zeros(g.size)
    if bnorm == 0.0:
        u = g.function(full)
        return EnergyResult(u, 0.0, 0.0, 0, 0.0)
    x, iters = _pcg(A, b, tol, maxiter)
    residual = float(np.linalg.norm(A @ x - b)) / bnorm
    full[idx] = x
    u = g.function(full)
    energy = -0.5 * inner(f.values, u)
    direct = (
        0.5 * float(full @ (g.stiffness @ full))
        + 0.5 * float(np.dot(g.weights[idx] * Vsub, x**2))
        - inner(f.values, u)
    )
    return EnergyResult(u, energy, residual, iters, direct)


def dual_norm(f: SourceTerm | GridFunction) -> float:
    """Norm of f in the dual of the Dirichlet space, via its Riesz lift."""
    fv = _as_values(f)
    g = fv.grid
    b = g.weights * fv.values
    phi = g.stiffness_solve(b)
    return math.sqrt(max(float(phi @ b), 0.0))


@dataclass(frozen=True)
class EstimateReport:
    lhs: float
    bound: float
    margin: float
    passed: bool
    factor: float
    factor_kind: str
    source_dual_norm: float


def energy_estimate_check(V: Potential, f: SourceTerm, tol: float = 1e-9) -> EstimateReport:
    """Check |u_V|_{H^1_0} <= factor * |f|_{dual}.

    The factor is 1 for nonnegative potentials.  For sign-changing V it is
    T_N / (T_N - |V_-|_{N/2}) on three-dimensional domains when that is
    finite, and otherwise the spectral factor 1/(1 - theta) with theta the
    largest eigenvalue of the negative part against the Dirichlet form.
    """
    from .optimal import talenti_constant

    g = V.grid
    res = solve_state(V, f)
    lhs = h1_seminorm(res.state)
    fdual = dual_norm(f)
    vneg = np.maximum(-V.values.values, 0.0)
    if not vneg.any():
        factor, kind = 1.0, "unit"
    else:
        N = g.domain.dimension
        factor = math.inf
        kind = "spectral"
        if N >= 3:
            tn = talenti_constant(N)
            vneg_norm = lp_norm(g.function(vneg), N / 2.0)
            if vneg_norm < tn:
                factor, kind = tn / (tn - vneg_norm), "talenti"
        if not math.isfinite(factor):
            theta = _negative_part_ratio(g, vneg)
            if theta >= 1.0:
                raise AdmissibilityError("negative part dominates the Dirichlet form")
            factor, kind = 1.0 / (1.0 - theta), "spectral"
    bound = factor * fdual
    margin = bound - lhs
    return EstimateReport(lhs, bound, margin, margin >= -10 * tol, factor, kind, fdual)


def _negative_part_ratio(g: Grid, vneg: np.ndarray) -> float:
    """Largest eigenvalue of diag(w vneg) against K (the contraction rate)."""
    B = sp.diags(g.weights * vneg).tocsc()
    if g.size <= 400:
        import scipy.linalg as sla

        vals = sla.eigh(B.toarray(), g.stiffness.toarray(), eigvals_only=True)
        return float(vals[-1])
    vals = spla.eigsh(B, k=1, M=g.stiffness.tocsc(), which="LA", return_eigenvectors=False)
    return float(vals[0])


@dataclass(frozen=True)
class WeightedGapReport:
    lhs: float
    bound: float
    constant: float
    margin: float
    passed: bool
    state_distance: float


def weighted_l2_gap(
    V1: Potential, V2: Potential, f: SourceTerm, tol: float = 1e-9
) -> WeightedGapReport:
    """Check |int V1 u1^2 - int V2 u2^2| <= C |f|_dual |u1 - u2|_{H^1_0}.

    C = 3 when both potentials are nonnegative; otherwise each potential
    contributes its energy-estimate factor in place of 1.
    """
    g = V1.grid
    r1 = solve_state(V1, f)
    r2 = solve_state(V2, f)
    w = g.weights
    lhs = abs(
        float(np.dot(w * V1.values.values, r1.state.values**2))
        - float(np.dot(w * V2.values.values, r2.state.values**2))
    )
    dist = h1_seminorm(r1.state - r2.state)
    const = 1.0
    for V in (V1, V2):
        const += energy_estimate_check(V, f).factor
    bound = const * dual_norm(f) * dist
    margin = bound - lhs
    return WeightedGapReport(lhs, bound, const, margin, margin >= -10 * tol, dist)


@dataclass(frozen=True)
class EnergyDifferenceReport:
    difference: float
    product_formula: float
    identity_error: float
    lipschitz_bound: float
    passed: bool


def energy_difference_identity(
    V1: Potential, V2: Potential, f: SourceTerm, p: float = 2.0, tol: float = 1e-9
) -> EnergyDifferenceReport:
    """Check E_f(V1) - E_f(V2) = 1/2 int (V1 - V2) u1 u2 and the induced
    Lipschitz bound |E_f(V1) - E_f(V2)| <= 1/2 |V1-V2|_p |u1|_r |u2|_r
    with r = 2p/(p-1)."""
    if p <= 1.0:
        raise ValueError("p must exceed 1")
    g = V1.grid
    r1 = solve_state(V1, f)
    r2 = solve_state(V2, f)
    diff = r1.energy - r2.energy
    prod = 0.5 * float(
        np.dot(g.weights * (V1.values.values - V2.values.values),
               r1.state.values * r2.state.values)
    )
    err = abs(diff - prod)
    r = 2.0 * p / (p - 1.0)
    lip = (
        0.5
        * lp_norm(V1.values - V2.values, p)
        * lp_norm(r1.state, r)
        * lp_norm(r2.state, r)
    )
    scale = max(abs(diff), abs(prod), 1.0)
    ok = err <= 10 * tol * scale and abs(diff) <= lip + 10 * tol * scale
    return EnergyDifferenceReport(diff, prod, err, lip, ok)
