"""Uniform moving grids, discrete derivatives and exponentially weighted quadrature.

All descent computations run in a frame moving with the wave, where the
energy integrals carry the weight e^x.  Grid points are always generated
as ``origin + j*h`` (never accumulated), so a translation only relabels
the origin.  The weight factor at the origin is tracked multiplicatively
across translations: shifting a profile by ``a`` then scales every
weighted quadrature by exactly ``exp(a)`` up to a few ulps.  The
norm-restoring shift of the descent algorithm relies on this
factorisation being exact.

Quadrature is the composite midpoint rule on grid cells: the weight is
evaluated at the cell midpoint, zeroth-order integrands are averaged
over the cell corners, and derivatives at the midpoint are the exact
finite differences across the cell.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional

import numpy as np

from .errors import DomainTruncationError, GridMismatchError

# e^x is evaluated directly; keep the right endpoint well below overflow.
RIGHT_ENDPOINT_CAP = 600.0


@dataclass(frozen=True)
class Grid:
    """Uniform grid on ``[origin, origin + n_x*h]``, optionally a 2D strip.

    Parameters
    ----------
    origin : float
        x-coordinate of the leftmost grid point.
    h : float
        x-spacing, > 0.
    n_x : int
        Number of x-intervals (points are ``origin + j*h``, j = 0..n_x).
    dim : int
        1 for the line, 2 for a strip.
    half_width : float
        Strip half-width in solver coordinates (dim=2 only); points run
        from ``-half_width`` to ``+half_width`` in y.
    n_y : int
        Number of y-intervals (dim=2 only).
    weight_scale : float
        Value used for the exponential weight at ``origin``.  Defaults to
        ``exp(origin)`` and is updated multiplicatively under shifts so
        that translation scales weighted quadratures exactly.
    """

    origin: float
    h: float
    n_x: int
    dim: int = 1
    half_width: float = 0.0
    n_y: int = 0
    weight_scale: Optional[float] = field(default=None)

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValueError(f"dim must be 1 or 2, got {self.dim}")
        if not (self.h > 0.0) or not math.isfinite(self.h):
            raise ValueError(f"grid spacing must be positive, got {self.h}")
        if self.n_x < 2:
            raise ValueError(f"need at least 2 x-intervals, got {self.n_x}")
        if not math.isfinite(self.origin):
            raise ValueError("grid origin must be finite")
        if self.dim == 2:
            if not (self.half_width > 0.0):
                raise ValueError("strip half-width must be positive")
            if self.n_y < 2:
                raise ValueError(f"need at least 2 y-intervals, got {self.n_y}")
        if self.weight_scale is None:
            object.__setattr__(self, "weight_scale", math.exp(self.origin))

    @property
    def right(self) -> float:
        return self.origin + self.n_x * self.h

    @property
    def h_y(self) -> float:
        return 2.0 * self.half_width / self.n_y

    @property
    def shape(self) -> tuple:
        if self.dim == 1:
            return (self.n_x + 1,)
        return (self.n_x + 1, self.n_y + 1)

    @property
    def n_points(self) -> int:
        n = self.n_x + 1
        if self.dim == 2:
            n *= self.n_y + 1
        return n

    @property
    def x(self) -> np.ndarray:
        return self.origin + self.h * np.arange(self.n_x + 1)

    @property
    def y(self) -> np.ndarray:
        if self.dim != 2:
            raise ValueError("y coordinates exist only for dim=2 grids")
        return -self.half_width + self.h_y * np.arange(self.n_y + 1)


@dataclass(frozen=True, eq=False)
class Profile:
    """Samples of a function at every point of a :class:`Grid`.

    Immutable: the sample array is copied on construction and marked
    read-only, so profiles are safe to share.  For strips the rows at
    y = +-half_width must be exactly zero (homogeneous Dirichlet data).
    """

    grid: Grid
    samples: np.ndarray

    def __post_init__(self):
        arr = np.array(self.samples, dtype=np.float64, copy=True)
        if arr.shape != self.grid.shape:
            raise ValueError(
                f"sample shape {arr.shape} does not match grid shape {self.grid.shape}"
            )
        if not np.all(np.isfinite(arr)):
            raise ValueError("profile samples must all be finite")
        if self.grid.dim == 2:
            if np.any(arr[:, 0] != 0.0) or np.any(arr[:, -1] != 0.0):
                raise ValueError("strip profiles must vanish exactly at y = +-half_width")
        arr.setflags(write=False)
        object.__setattr__(self, "samples", arr)

    @classmethod
    def zeros(cls, grid: Grid) -> "Profile":
        return cls(grid, np.zeros(grid.shape))

    @classmethod
    def from_function(cls, grid: Grid, fn: Callable) -> "Profile":
        """Sample ``fn(x)`` (or ``fn(x, y)``) on the grid.

        For strips the boundary rows are forced to exact zeros so the
        Dirichlet invariant holds even when ``fn`` only vanishes there
        up to round-off.
        """
        if grid.dim == 1:
            vals = np.asarray(fn(grid.x), dtype=np.float64)
        else:
            X, Y = np.meshgrid(grid.x, grid.y, indexing="ij")
            vals = np.asarray(fn(X, Y), dtype=np.float64)
            vals = vals.copy()
            vals[:, 0] = 0.0
            vals[:, -1] = 0.0
        return cls(grid, vals)

    def max(self) -> float:
        return float(self.samples.max())

    def min(self) -> float:
        return float(self.samples.min())


def _require_same_grid(u: Profile, v: Profile) -> Grid:
    if u.grid is not v.grid and u.grid != v.grid:
        raise GridMismatchError("profiles live on different grids")
    return u.grid


def shift_grid(p: Profile, offset: float) -> Profile:
    """Translate a profile by relabeling its grid; samples are untouched."""
    if not math.isfinite(offset):
        raise ValueError(f"shift offset must be finite, got {offset}")
    g = p.grid
    new_grid = Grid(
        origin=g.origin + offset,
        h=g.h,
        n_x=g.n_x,
        dim=g.dim,
        half_width=g.half_width,
        n_y=g.n_y,
        weight_scale=g.weight_scale * math.exp(offset),
    )
    return Profile(new_grid, p.samples)


def diff_x(p: Profile) -> Profile:
    """Discrete x-derivative: centered inside, second-order one-sided at the ends."""
    s = p.samples
    h = p.grid.h
    d = np.empty_like(s)
    d[1:-1] = (s[2:] - s[:-2]) / (2.0 * h)
    d[0] = (-3.0 * s[0] + 4.0 * s[1] - s[2]) / (2.0 * h)
    d[-1] = (3.0 * s[-1] - 4.0 * s[-2] + s[-3]) / (2.0 * h)
    return Profile(p.grid, d)


@lru_cache(maxsize=64)
def _cell_weights(h: float, n_x: int) -> np.ndarray:
    """Relative midpoint weights exp((j + 1/2) h), cached per grid geometry."""
    span = n_x * h
    if span > 690.0:
        raise DomainTruncationError(
            f"domain length {span} would overflow the exponential weight"
        )
    w = np.exp((np.arange(n_x) + 0.5) * h)
    w.setflags(write=False)
    return w


def _check_cap(grid: Grid):
    if grid.right > RIGHT_ENDPOINT_CAP:
        raise DomainTruncationError(
            f"right endpoint {grid.right} exceeds the cap {RIGHT_ENDPOINT_CAP}; "
            "shift the domain left"
        )


def _cell_sum(grid: Grid, cell_values: np.ndarray) -> float:
    """Weighted sum of per-cell values with the midpoint weight e^{x_mid}."""
    _check_cap(grid)
    wrel = _cell_weights(grid.h, grid.n_x)
    if grid.dim == 1:
        s = float(np.sum(wrel * cell_values))
        return grid.weight_scale * s * grid.h
    s = float(np.sum(wrel * np.sum(cell_values, axis=1)))
    return grid.weight_scale * s * grid.h * grid.h_y


def _corner_mean(grid: Grid, values: np.ndarray) -> np.ndarray:
    if grid.dim == 1:
        return 0.5 * (values[:-1] + values[1:])
    return 0.25 * (
        values[:-1, :-1] + values[1:, :-1] + values[:-1, 1:] + values[1:, 1:]
    )


def _grad_cells(grid: Grid, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Per-cell grad(a).grad(b) from exact cross-cell differences."""
    h = grid.h
    if grid.dim == 1:
        da = np.diff(a) / h
        db = np.diff(b) / h
        return da * db
    dax = np.diff(a, axis=0) / h
    dbx = np.diff(b, axis=0) / h
    px = 0.5 * (dax[:, :-1] * dbx[:, :-1] + dax[:, 1:] * dbx[:, 1:])
    h_y = grid.h_y
    day = np.diff(a, axis=1) / h_y
    dby = np.diff(b, axis=1) / h_y
    py = 0.5 * (day[:-1, :] * dby[:-1, :] + day[1:, :] * dby[1:, :])
    return px + py


def weighted_integral(integrand: Profile) -> float:
    """Integral of the profile against the weight e^x (midpoint rule)."""
    g = integrand.grid
    return _cell_sum(g, _corner_mean(g, integrand.samples))


def integrate_values(grid: Grid, values: np.ndarray) -> float:
    """Like :func:`weighted_integral` but on a raw sample array."""
    return _cell_sum(grid, _corner_mean(grid, values))


def inner_l2exp(u: Profile, v: Profile) -> float:
    """Weighted L2 inner product: integral of e^x u v."""
    g = _require_same_grid(u, v)
    return _cell_sum(g, _corner_mean(g, u.samples * v.samples))


def inner_grad_exp(u: Profile, v: Profile) -> float:
    """Gradient part of the weighted H1 product: integral of e^x grad(u).grad(v)."""
    g = _require_same_grid(u, v)
    return _cell_sum(g, _grad_cells(g, u.samples, v.samples))


def inner_h1exp(u: Profile, v: Profile) -> float:
    """Weighted H1 inner product: integral of e^x (grad(u).grad(v) + u v)."""
    g = _require_same_grid(u, v)
    cells = _grad_cells(g, u.samples, v.samples) + _corner_mean(g, u.samples * v.samples)
    return _cell_sum(g, cells)


def norm_h1exp_sq(u: Profile) -> float:
    """Squared weighted H1 norm; zero only for the zero profile."""
    return inner_h1exp(u, u)
