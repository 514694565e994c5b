"""Uniform Dirichlet grids with quadrature-consistent difference operators.

Supported domains: an interval (0, L), the boxes (0, Lx) x (0, Ly) and
(0, Lx) x (0, Ly) x (0, Lz), and the radial representation of a ball in R^3
truncated at a finite radius.  Functions vanish on the boundary and only
interior node values are stored.

A :class:`Grid` exposes three coupled building blocks:

* quadrature weights ``w`` (one per node, carrying the 4*pi*rho^2 shell
  factor in the radial case),
* a sparse stiffness matrix ``K`` such that ``u @ K @ u`` is the squared
  Dirichlet seminorm of ``u``,
* the difference operator ``-lap(u) = (K @ u) / w``.

All three are assembled from the same edge sums, so the summation-by-parts
identity ``inner(apply_laplacian(u), v) == inner(u, apply_laplacian(v))``
and the energy identity ``inner(apply_laplacian(u), u) == h1_seminorm(u)**2``
hold to machine precision rather than to discretization order.  The radial
operator drops the flux through the origin, which is the variational image
of the reflection condition u'(0) = 0; the first radial node then carries an
O(1) local truncation error with an O(h^3) volume weight, harmless in the
energy norm.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

__all__ = [
    "Domain",
    "Grid",
    "GridFunction",
    "lp_norm",
    "h1_seminorm",
    "apply_laplacian",
    "inner",
]

_KIND_DIMENSION = {"interval": 1, "box2d": 2, "box3d": 3, "radial3d": 3}
_KIND_AXES = {"interval": 1, "box2d": 2, "box3d": 3, "radial3d": 1}


@dataclass(frozen=True)
class Domain:
    """Geometry descriptor.  Boxes sit at the origin; radial3d is a ball."""

    kind: str
    extents: tuple[float, ...] = ()
    truncation_radius: float | None = None

    def __post_init__(self):
        if self.kind not in _KIND_DIMENSION:
            raise ValueError(f"unknown domain kind {self.kind!r}")
        object.__setattr__(self, "extents", tuple(float(e) for e in self.extents))
        if self.kind == "radial3d":
            if self.truncation_radius is None or self.truncation_radius <= 0:
                raise ValueError("radial3d requires truncation_radius > 0")
            if self.extents:
                raise ValueError("radial3d takes no extents, only truncation_radius")
        else:
            if self.truncation_radius is not None:
                raise ValueError("truncation_radius only applies to radial3d")
            if len(self.extents) != _KIND_AXES[self.kind]:
                raise ValueError(
                    f"{self.kind} needs {_KIND_AXES[self.kind]} extents, "
                    f"got {len(self.extents)}"
                )
            if any(e <= 0 for e in self.extents):
                raise ValueError("extents must be strictly positive")

    @property
    def dimension(self) -> int:
        """Spatial dimension N (radial3d counts as 3)."""
        return _KIND_DIMENSION[self.kind]

    @property
    def axes(self) -> int:
        """Number of storage axes (1 for radial3d)."""
        return _KIND_AXES[self.kind]

    @property
    def axis_lengths(self) -> tuple[float, ...]:
        if self.kind == "radial3d":
            return (float(self.truncation_radius),)
        return self.extents

    @staticmethod
    def interval(length: float = 1.0) -> "Domain":
        return Domain("interval", (length,))

    @staticmethod
    def box2d(lx: float = 1.0, ly: float = 1.0) -> "Domain":
        return Domain("box2d", (lx, ly))

    @staticmethod
    def box3d(lx: float = 1.0, ly: float = 1.0, lz: float = 1.0) -> "Domain":
        return Domain("box3d", (lx, ly, lz))

    @staticmethod
    def radial3d(truncation_radius: float = 20.0) -> "Domain":
        return Domain("radial3d", (), truncation_radius)


def _tridiag_stencil(n: int) -> sp.csr_matrix:
    # second-difference matrix diag(-1, 2, -1), Dirichlet rows already folded in
    return sp.diags(
        [-np.ones(n - 1), 2.0 * np.ones(n), -np.ones(n - 1)], offsets=[-1, 0, 1]
    ).tocsr()


class Grid:
    """Tensor grid of interior nodes; x_i = i*h per axis, h = L/(n+1)."""

    MIN_POINTS = 8

    def __init__(self, domain: Domain, points_per_axis):
        if isinstance(points_per_axis, (int, np.integer)):
            points_per_axis = (int(points_per_axis),) * domain.axes
        shape = tuple(int(n) for n in points_per_axis)
        if len(shape) != domain.axes:
            raise ValueError(
                f"{domain.kind} needs {domain.axes} resolutions, got {len(shape)}"
            )
        if any(n < self.MIN_POINTS for n in shape):
            raise ValueError(f"at least {self.MIN_POINTS} interior points per axis")
        self.domain = domain
        self.shape = shape
        self.size = int(np.prod(shape))
        self.spacing = tuple(
            L / (n + 1) for L, n in zip(domain.axis_lengths, shape)
        )
        self.coords = tuple(
            np.arange(1, n + 1, dtype=float) * h for n, h in zip(shape, self.spacing)
        )
        self._weights: np.ndarray | None = None
        self._stiffness: sp.csr_matrix | None = None
        self._stiffness_lu = None
        self._poisson_ground: float | None = None

    def __eq__(self, other):
        return (
            isinstance(other, Grid)
            and self.domain == other.domain
            and self.shape == other.shape
        )

    def __hash__(self):
        return hash((self.domain, self.shape))

    def __repr__(self):
        return f"Grid({self.domain.kind}, shape={self.shape})"

    # -- quadrature -------------------------------------------------------

    @property
    def weights(self) -> np.ndarray:
        if self._weights is None:
            if self.domain.kind == "radial3d":
                rho = self.coords[0]
                h = self.spacing[0]
                w = 4.0 * math.pi * rho**2 * h
            else:
                w = np.full(self.size, float(np.prod(self.spacing)))
            w = np.ascontiguousarray(w, dtype=float)
            w.flags.writeable = False
            self._weights = w
        return self._weights

    # -- stiffness --------------------------------------------------------

    @property
    def stiffness(self) -> sp.csr_matrix:
        """Sparse K with u @ K @ u == h1_seminorm(u)**2 exactly."""
        if self._stiffness is None:
            if self.domain.kind == "radial3d":
                self._stiffness = self._radial_stiffness()
            else:
                self._stiffness = self._tensor_stiffness()
        return self._stiffness

    def _tensor_stiffness(self) -> sp.csr_matrix:
        cell = float(np.prod(self.spacing))
        K = None
        for a, (n, h) in enumerate(zip(self.shape, self.spacing)):
            term = _tridiag_stencil(n) * (cell / h**2)
            for b, m in enumerate(self.shape):
                if b < a:
                    term = sp.kron(sp.identity(m, format="csr"), term, format="csr")
                elif b > a:
                    term = sp.kron(term, sp.identity(m, format="csr"), format="csr")
            K = term if K is None else K + term
        return K.tocsr()

    def _radial_stiffness(self) -> sp.csr_matrix:
        n = self.size
        h = self.spacing[0]
        rho = self.coords[0]
        # edge midpoint areas; edge i joins node i to node i+1, the last edge
        # joins node n-1 to the Dirichlet boundary at rho = R
        mid = rho + 0.5 * h
        coef = 4.0 * math.pi * mid**2 / h
        diag = np.zeros(n)
        off = np.zeros(n - 1)
        diag[:-1] += coef[:-1]
        diag[1:] += coef[:-1]
        off -= coef[:-1]
        diag[-1] += coef[-1]
        return sp.diags([off, diag, off], offsets=[-1, 0, 1]).tocsr()

    def stiffness_solve(self, b: np.ndarray) -> np.ndarray:
        """Solve K x = b with a cached sparse factorization."""
        if self._stiffness_lu is None:
            self._stiffness_lu = spla.splu(self.stiffness.tocsc())
        return self._stiffness_lu.solve(np.asarray(b, dtype=float))

    def poisson_ground(self) -> float:
        """Smallest eigenvalue of the discrete Dirichlet Laplacian."""
        if self._poisson_ground is None:
            if self.domain.kind == "radial3d":
                K = self.stiffness
                M = sp.diags(self.weights).tocsc()
                if self.size <= 400:
                    import scipy.linalg as sla

                    vals = sla.eigh(
                        K.toarray(),
                        M.toarray(),
                        eigvals_only=True,
                        subset_by_index=[0, 0],
                    )
                    self._poisson_ground = float(vals[0])
                else:
                    vals = spla.eigsh(
                        K.tocsc(), k=1, M=M, sigma=0.0, which="LM",
                        return_eigenvectors=False,
                    )
                    self._poisson_ground = float(vals[0])
            else:
                lam = 0.0
                for (L, n, h) in zip(
                    self.domain.axis_lengths, self.shape, self.spacing
                ):
                    lam += (4.0 / h**2) * math.sin(math.pi * h / (2.0 * L)) ** 2
                self._poisson_ground = lam
        return self._poisson_ground

    # -- constructors for functions ---------------------------------------

    def function(self, values) -> "GridFunction":
        v = np.asarray(values, dtype=float)
        if v.shape == self.shape:
            v = v.reshape(-1)
        if v.shape != (self.size,):
            raise ValueError(f"values shape {v.shape} does not fit grid {self.shape}")
        return GridFunction(self, v.copy())

    def zeros(self) -> "GridFunction":
        return GridFunction(self, np.zeros(self.size))

    def from_callable(self, fn: Callable) -> "GridFunction":
        mesh = np.meshgrid(*self.coords, indexing="ij")
        return self.function(np.asarray(fn(*mesh), dtype=float))

    def meshes(self) -> tuple[np.ndarray, ...]:
        """Flattened coordinate arrays, one per storage axis."""
        mesh = np.meshgrid(*self.coords, indexing="ij")
        return tuple(m.reshape(-1) for m in mesh)


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Nodal values of a function vanishing on the boundary."""

    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.ascontiguousarray(self.values, dtype=float)
        if v.shape != (self.grid.size,):
            raise ValueError("values must be flat and match the grid size")
        if not np.all(np.isfinite(v)):
            raise ValueError("grid function values must be finite")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    def _check_same_grid(self, other: "GridFunction"):
        if self.grid != other.grid:
            raise ValueError("grid functions live on different grids")

    def __add__(self, other):
        self._check_same_grid(other)
        return GridFunction(self.grid, self.values + other.values)

    def __sub__(self, other):
        self._check_same_grid(other)
        return GridFunction(self.grid, self.values - other.values)

    def __mul__(self, other):
        if isinstance(other, GridFunction):
            self._check_same_grid(other)
            return GridFunction(self.grid, self.values * other.values)
        return GridFunction(self.grid, self.values * float(other))

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return GridFunction(self.grid, self.values / float(scalar))

    def __neg__(self):
        return GridFunction(self.grid, -self.values)

    def __abs__(self):
        return GridFunction(self.grid, np.abs(self.values))

    def min(self) -> float:
        return float(self.values.min())

    def max(self) -> float:
        return float(self.values.max())


def lp_norm(u: GridFunction, s: float) -> float:
    """Quadrature L^s norm, (sum_i w_i |u_i|^s)^(1/s).  Any s > 0."""
    s = float(s)
    if not math.isfinite(s) or s <= 0:
        raise ValueError("lp_norm requires a finite exponent s > 0")
    total = float(np.dot(u.grid.weights, np.abs(u.values) ** s))
    return total ** (1.0 / s)


def h1_seminorm(u: GridFunction) -> float:
    """Dirichlet seminorm from the edge sums behind the stiffness matrix."""
    K = u.grid.stiffness
    return math.sqrt(max(float(u.values @ (K @ u.values)), 0.0))


def apply_laplacian(u: GridFunction) -> GridFunction:
    """Negative discrete Laplacian, -lap(u) = (K @ u) / w."""
    g = u.grid
    return GridFunction(g, (g.stiffness @ u.values) / g.weights)


def inner(u: GridFunction, v: GridFunction) -> float:
    """Quadrature L^2 pairing sum_i w_i u_i v_i."""
    u._check_same_grid(v)
    return float(np.dot(u.grid.weights * u.values, v.values))
