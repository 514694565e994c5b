"""Source presets and random smooth fields used by sweeps and the CLI."""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .grid import Grid, GridFunction

__all__ = [
    "constant_source",
    "sine_source",
    "gaussian_source",
    "power_tail_source",
    "smooth_random_field",
    "indicator_region",
    "make_source",
]


def constant_source(grid: Grid, amplitude: float = 1.0) -> GridFunction:
    return grid.function(np.full(grid.size, float(amplitude)))


def sine_source(grid: Grid, amplitude: float = 1.0, modes: Sequence[int] | int = 1) -> GridFunction:
    """Product of fundamental-type sine modes, sin(pi k x / L) per axis.

    On radial3d the same formula is applied to the radial coordinate, which
    keeps the boundary value at the truncation radius equal to zero.
    """
    if isinstance(modes, (int, np.integer)):
        modes = (int(modes),) * grid.domain.axes
    if len(modes) != grid.domain.axes:
        raise ValueError("one mode index per axis")
    vals = np.ones(grid.shape)
    for axis, (k, x, L) in enumerate(zip(modes, grid.coords, grid.domain.axis_lengths)):
        tab = np.sin(math.pi * k * x / L)
        shape = [1] * grid.domain.axes
        shape[axis] = -1
        vals = vals * tab.reshape(shape)
    return grid.function(float(amplitude) * vals)


def _center(grid: Grid) -> np.ndarray:
    if grid.domain.kind == "radial3d":
        return np.zeros(1)
    return 0.5 * np.asarray(grid.domain.axis_lengths)


def _radius_from_center(grid: Grid, center: np.ndarray | None = None) -> np.ndarray:
    if center is None:
        center = _center(grid)
    mesh = grid.meshes()
    r2 = np.zeros(grid.size)
    for x, c in zip(mesh, center):
        r2 += (x - c) ** 2
    return np.sqrt(r2)


def gaussian_source(
    grid: Grid,
    amplitude: float = 1.0,
    width: float = 0.2,
    center: Sequence[float] | None = None,
) -> GridFunction:
    if width <= 0:
        raise ValueError("width must be positive")
    c = None if center is None else np.asarray(center, dtype=float)
    r = _radius_from_center(grid, c)
    return grid.function(float(amplitude) * np.exp(-0.5 * (r / float(width)) ** 2))


def power_tail_source(
    grid: Grid, amplitude: float = 1.0, alpha: float = 3.0, tail_radius: float = 1.0
) -> GridFunction:
    """f = C (1 + r^2)^(-alpha/2), so |f| <= C r^(-alpha) for r >= 1.

    ``tail_radius`` records the radius beyond which the power bound is
    meant to be used; the profile itself satisfies the bound for r >= 1
    with the same constant, so any tail_radius >= 1 is consistent.
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    if tail_radius < 1.0:
        raise ValueError("tail_radius must be >= 1 for the recorded bound to hold")
    r = _radius_from_center(grid)
    return grid.function(float(amplitude) * (1.0 + r**2) ** (-0.5 * float(alpha)))


def smooth_random_field(
    grid: Grid,
    rng: np.random.Generator,
    modes: int = 10,
    decay: float = 2.0,
    amplitude: float = 1.0,
) -> GridFunction:
    """Random boundary-compatible field with mode-k coefficients ~ k^-decay.

    Tensor domains use products of Dirichlet sines; radial3d uses the cosine
    family cos((k - 1/2) pi rho / R), which is flat at the origin and zero at
    the truncation radius.
    """
    axes = grid.domain.axes
    tables = []
    for x, L in zip(grid.coords, grid.domain.axis_lengths):
        k = np.arange(1, modes + 1, dtype=float)
        if grid.domain.kind == "radial3d":
            tab = np.cos((k[:, None] - 0.5) * math.pi * x[None, :] / L)
        else:
            tab = np.sin(k[:, None] * math.pi * x[None, :] / L)
        tables.append(tab)
    coeff = rng.standard_normal(size=(modes,) * axes)
    for axis in range(axes):
        shape = [1] * axes
        shape[axis] = modes
        k = np.arange(1, modes + 1, dtype=float).reshape(shape)
        coeff = coeff * k ** (-float(decay))
    field = coeff
    for axis in range(axes):
        # contract the leading mode index against its table
        field = np.tensordot(field, tables[axis], axes=([0], [0]))
    return grid.function(float(amplitude) * field)


def indicator_region(grid: Grid, lo: float = 0.25, hi: float = 0.75) -> GridFunction:
    """Indicator of the product region (lo, hi) in relative coordinates.

    For radial3d the region is the relative radial shell.
    """
    if not 0.0 <= lo < hi <= 1.0:
        raise ValueError("need 0 <= lo < hi <= 1")
    mesh = grid.meshes()
    mask = np.ones(grid.size, dtype=bool)
    for x, L in zip(mesh, grid.domain.axis_lengths):
        mask &= (x >= lo * L) & (x <= hi * L)
    return grid.function(mask.astype(float))


def make_source(grid: Grid, spec: dict) -> GridFunction:
    """Build a source from a preset descriptor (used by the CLI)."""
    kind = spec.get("preset")
    amplitude = float(spec.get("amplitude", 1.0))
    if kind == "constant":
        return constant_source(grid, amplitude)
    if kind == "sine":
        return sine_source(grid, amplitude, spec.get("modes", 1))
    if kind == "gaussian":
        return gaussian_source(grid, amplitude, float(spec.get("width", 0.2)), spec.get("center"))
    if kind == "power_tail":
        return power_tail_source(
            grid, amplitude, float(spec.get("alpha", 3.0)), float(spec.get("tail_radius", 1.0))
        )
    raise ValueError(f"unknown source preset {kind!r}")
