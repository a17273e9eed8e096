"""Deterministic Gauss-Legendre quadrature.

Spatial integrals of torus-invariant densities are taken over the box
[-L, L]^n in logarithmic coordinates, times (2*pi)^n for the angles.  Along
each axis the Gauss-Legendre nodes are pulled through the map
x = L sinh(k xi) / sinh(k), which keeps the spacing fine where the densities
carry their mass and spends fewer nodes on the exponentially small tails.
k = 0 gives the plain rule.  Path
integrals in the deformation parameter use Gauss-Legendre on [0, 1].  All
reductions go through ``math.fsum``, which is correctly rounded and hence
independent of summation order.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from numpy.polynomial.legendre import leggauss

from .errors import ConfigError, NumericalFailure


@dataclass(frozen=True)
class GridSpec:
    half_width: float = 20.0
    nodes_per_axis: int = 64
    t_nodes: int = 16
    stretch: float = 2.0

    def __post_init__(self):
        if not self.half_width > 0:
            raise ConfigError("grid.L must be positive")
        if self.nodes_per_axis < 8 or self.nodes_per_axis % 2:
            raise ConfigError("grid.N must be an even integer >= 8")
        if self.t_nodes < 4:
            raise ConfigError("grid.t_nodes must be >= 4")
        if not 0 <= self.stretch <= 6:
            raise ConfigError("grid.stretch must lie in [0, 6]")

    def coarse(self) -> "GridSpec":
        """The embedded rule with half the spatial nodes."""
        return GridSpec(self.half_width, self.nodes_per_axis // 2, self.t_nodes, self.stretch)

    def coarse_path(self) -> "GridSpec":
        return GridSpec(self.half_width, self.nodes_per_axis, max(self.t_nodes // 2, 2), self.stretch)


@dataclass(frozen=True)
class IntegralValue:
    value: float
    error_estimate: float

    def __post_init__(self):
        if not self.error_estimate >= 0:
            raise ValueError("error estimate must be nonnegative")


@functools.lru_cache(maxsize=None)
def gauss_legendre(n_nodes: int, a: float = -1.0, b: float = 1.0):
    x, w = leggauss(n_nodes)
    half = 0.5 * (b - a)
    return a + half * (x + 1.0), half * w


@functools.lru_cache(maxsize=None)
def axis_rule(half_width: float, nodes: int, stretch: float = 2.0):
    """One-dimensional sinh-mapped Gauss-Legendre rule on [-L, L]."""
    xi, w = gauss_legendre(nodes)
    if stretch == 0:
        return half_width * xi, half_width * w
    s = math.sinh(stretch)
    x = half_width * np.sinh(stretch * xi) / s
    return x, w * half_width * stretch * np.cosh(stretch * xi) / s


@functools.lru_cache(maxsize=None)
def _tensor_rule(n: int, half_width: float, nodes: int, stretch: float):
    x, w = axis_rule(half_width, nodes, stretch)
    grids = np.meshgrid(*([x] * n), indexing="ij")
    weights = np.meshgrid(*([w] * n), indexing="ij")
    points = np.stack([g.ravel() for g in grids], axis=-1)
    wt = np.prod(np.stack([g.ravel() for g in weights], axis=-1), axis=-1)
    wt = wt * (2.0 * math.pi) ** n
    points.setflags(write=False)
    wt.setflags(write=False)
    return points, wt


def tensor_rule(n: int, half_width: float, nodes: int, stretch: float = 2.0):
    """Nodes (P, n) and weights (P,) of the tensor rule, angular factor included."""
    return _tensor_rule(n, float(half_width), int(nodes), float(stretch))


def grid_rule(n: int, grid: GridSpec):
    return tensor_rule(n, grid.half_width, grid.nodes_per_axis, grid.stretch)


def weighted_sum(values, weights, where: np.ndarray | None = None) -> float:
    values = np.asarray(values, dtype=np.float64)
    if not np.all(np.isfinite(values)):
        bad = int(np.flatnonzero(~np.isfinite(values))[0])
        loc = "" if where is None else f" at node {np.asarray(where)[bad].tolist()}"
        raise NumericalFailure(f"non-finite integrand value{loc}")
    return math.fsum((values * weights).tolist())


def integrate(density: Callable[[np.ndarray], np.ndarray], n: int,
              grid: GridSpec) -> IntegralValue:
    """(2 pi)^n * integral over [-L, L]^n of ``density``, with an N/2 error estimate."""
    def at(nodes):
        pts, wts = tensor_rule(n, grid.half_width, nodes, grid.stretch)
        return weighted_sum(density(pts), wts, pts)

    fine = at(grid.nodes_per_axis)
    coarse = at(grid.nodes_per_axis // 2)
    return IntegralValue(fine, abs(fine - coarse))


def path_integrate(f: Callable[[float], float], t_nodes: int) -> IntegralValue:
    """Integral of f over [0, 1]; the error estimate uses the halved rule."""
    def at(m):
        t, w = gauss_legendre(m, 0.0, 1.0)
        vals = [f(float(ti)) for ti in t]
        if not all(math.isfinite(v) for v in vals):
            raise NumericalFailure("non-finite path integrand")
        return math.fsum(v * wi for v, wi in zip(vals, w.tolist()))

    fine = at(t_nodes)
    coarse = at(max(t_nodes // 2, 1))
    return IntegralValue(fine, abs(fine - coarse))
