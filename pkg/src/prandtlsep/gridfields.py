"""Nonuniform 1-D grids and the discrete calculus shared by all solvers.

Derivatives use sliding local polynomial stencils with weights generated by
the classic recursive algorithm for arbitrary node placement, so the same
code path serves interior (centered) and boundary (one-sided) nodes.
Cumulative integration is trapezoidal, which preserves monotonicity of the
primitive for non-negative integrands; that property is load-bearing for
the streamfunction map.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import ExtrapolationError, TooFewNodesError

_MIN_NODES = 64

# Stencil width per derivative order: formal accuracy is width - order for
# arbitrary nodes, i.e. >= 3rd order interior for all three.
_STENCIL_WIDTH = {1: 5, 2: 5, 3: 6}


def fd_weights(x: np.ndarray, x0: float, order: int) -> np.ndarray:
    """Finite-difference weights for the ``order``-th derivative at ``x0``.

    Fornberg's recursion on the arbitrary nodes ``x``; exact for
    polynomials up to degree ``len(x) - 1``.
    """
    n = len(x)
    c = np.zeros((n, order + 1))
    c[0, 0] = 1.0
    c1 = 1.0
    c4 = x[0] - x0
    for i in range(1, n):
        mn = min(i, order)
        c2 = 1.0
        c5 = c4
        c4 = x[i] - x0
        for j in range(i):
            c3 = x[i] - x[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[i, k] = c1 * (k * c[i - 1, k - 1] - c5 * c[i - 1, k]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for k in range(mn, 0, -1):
                c[j, k] = (c4 * c[j, k] - k * c[j, k - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c[:, order]


@dataclass(frozen=True, eq=False)
class Grid:
    """Strictly increasing nodes starting at 0."""

    nodes: np.ndarray
    stretching: str = "custom"
    _diff_cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        nodes = np.array(self.nodes, dtype=float, copy=True)
        if nodes.ndim != 1 or len(nodes) < _MIN_NODES:
            raise TooFewNodesError(f"grid needs >= {_MIN_NODES} nodes, got {nodes.shape}")
        if nodes[0] != 0.0:
            raise ValueError("grid must start at 0")
        if np.any(np.diff(nodes) <= 0):
            raise ValueError("grid nodes must be strictly increasing")
        nodes.flags.writeable = False
        object.__setattr__(self, "nodes", nodes)

    def __len__(self) -> int:
        return len(self.nodes)

    @property
    def span(self) -> float:
        return float(self.nodes[-1])

    def spacing(self) -> np.ndarray:
        return np.diff(self.nodes)

    # -- constructors ---------------------------------------------------------

    @classmethod
    def uniform(cls, n: int, x_max: float) -> "Grid":
        return cls(np.linspace(0.0, x_max, n), "uniform")

    @classmethod
    def geometric(cls, n: int, x_max: float, contrast: float = 50.0) -> "Grid":
        """Spacings grow geometrically; last/first spacing ratio = ``contrast``.

        Keeping the contrast (rather than the per-cell ratio) fixed makes the
        family refine uniformly, so convergence studies behave.
        """
        if contrast <= 1.0:
            return cls.uniform(n, x_max)
        ratio = contrast ** (1.0 / (n - 2))
        h = ratio ** np.arange(n - 1, dtype=float)
        nodes = np.concatenate(([0.0], np.cumsum(h)))
        nodes *= x_max / nodes[-1]
        return cls(nodes, "geometric")

    @classmethod
    def tanh_clustered(cls, n: int, x_max: float, strength: float = 4.0) -> "Grid":
        """Nodes clustered at 0 through a tanh map; ``strength`` ~ contrast."""
        xi = np.linspace(0.0, 1.0, n)
        nodes = x_max * (1.0 + np.tanh(strength * (xi - 1.0)) / np.tanh(strength))
        nodes[0] = 0.0
        nodes[-1] = x_max
        return cls(nodes, "tanh")

    @classmethod
    def power_clustered(cls, n: int, x_max: float, exponent: float = 2.0) -> "Grid":
        """Nodes x_max * (i/(n-1))**exponent; strong wall clustering."""
        xi = np.linspace(0.0, 1.0, n)
        return cls(x_max * xi**exponent, "power")

    def _diff_matrix(self, order: int):
        if order in self._diff_cache:
            return self._diff_cache[order]
        width = _STENCIL_WIDTH[order]
        n = len(self.nodes)
        if n < order + 3 or n < width:
            raise TooFewNodesError(f"need >= {max(order + 3, width)} nodes for order {order}")
        starts = np.empty(n, dtype=int)
        weights = np.empty((n, width))
        half = width // 2
        for i in range(n):
            lo = min(max(i - half, 0), n - width)
            starts[i] = lo
            weights[i] = fd_weights(self.nodes[lo : lo + width], self.nodes[i], order)
        self._diff_cache[order] = (starts, weights)
        return starts, weights

    def apply_diff(self, values: np.ndarray, order: int) -> np.ndarray:
        starts, weights = self._diff_matrix(order)
        width = weights.shape[1]
        idx = starts[:, None] + np.arange(width)[None, :]
        return np.einsum("ij,ij->i", weights, values[idx])


@dataclass(frozen=True, eq=False)
class Field:
    """Values attached to a grid."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float, copy=True)
        if values.shape != self.grid.nodes.shape:
            raise ValueError("field length must match its grid")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return len(self.values)

    def with_values(self, values: np.ndarray) -> "Field":
        return Field(self.grid, values)


def diff(f: Field, order: int) -> Field:
    """Derivative of the given order (1, 2 or 3) on the field's own grid."""
    if order not in (1, 2, 3):
        raise ValueError("order must be 1, 2 or 3")
    return f.with_values(f.grid.apply_diff(f.values, order))


def cumint(f: Field) -> Field:
    """Trapezoidal primitive vanishing at the first node."""
    x, v = f.grid.nodes, f.values
    out = np.empty_like(v)
    out[0] = 0.0
    np.cumsum(0.5 * (v[1:] + v[:-1]) * np.diff(x), out=out[1:])
    return f.with_values(out)


def trapz(f: Field) -> float:
    return float(np.trapezoid(f.values, f.grid.nodes))


def interpolate(f: Field, points: Sequence[float] | np.ndarray) -> np.ndarray:
    """Local cubic (4-point Lagrange) interpolation; exact on cubics.

    Queries must lie inside the grid span (tiny round-off overhang at the
    ends is tolerated and clipped).
    """
    pts = np.atleast_1d(np.asarray(points, dtype=float))
    x, v = f.grid.nodes, f.values
    tol = 1e-12 * max(1.0, f.grid.span)
    if np.any(pts < x[0] - tol) or np.any(pts > x[-1] + tol):
        raise ExtrapolationError("interpolation query outside grid span")
    pts = np.clip(pts, x[0], x[-1])
    n = len(x)
    right = np.searchsorted(x, pts)
    lo = np.clip(right - 2, 0, n - 4)
    out = np.zeros_like(pts)
    # 4-point Lagrange formula, vectorized over query points
    for j in range(4):
        lj = np.ones_like(pts)
        xj = x[lo + j]
        for m in range(4):
            if m == j:
                continue
            xm = x[lo + m]
            lj *= (pts - xm) / (xj - xm)
        out += v[lo + j] * lj
    return out


def resample(f: Field, grid: Grid) -> Field:
    """Interpolate a field onto another grid (span must be covered)."""
    return Field(grid, interpolate(f, grid.nodes))


def convergence_order(errors: Iterable[float]) -> float:
    """Observed order from errors on grids refined by 2 each time."""
    errs = [e for e in errors]
    if len(errs) < 2:
        raise ValueError("need at least two error samples")
    rates = [np.log2(errs[i] / errs[i + 1]) for i in range(len(errs) - 1)]
    return float(np.min(rates))
