"""Holomorphic invariants F_k of torus-generated vector fields.

For the field X whose real part generates x -> x + t v in logarithmic
coordinates, the Hamiltonian is theta_X = <v, grad Phi>, the pairing of v
with the moment map.  The Laplacian is the trace of the complex Hessian
against omega, so Delta theta omega^n = n sqrt(-1) d dbar theta ^ omega^{n-1}
with no factor one half.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigError
from .functionals import Scenario, raw_values
from .geometry import JET_ORDER, Jet, Potential, Translated, metric_from_jet, potential_jet, wedge_density
from .quad import GridSpec, grid_rule, weighted_sum


@dataclass(frozen=True)
class ToricField:
    """Generator v of a one-parameter subgroup of the torus, plus a gauge constant for theta."""

    v: tuple
    constant: float = 0.0

    def __post_init__(self):
        v = tuple(float(c) for c in self.v)
        if not all(np.isfinite(v)):
            raise ConfigError("field vector must be finite")
        object.__setattr__(self, "v", v)

    @property
    def n(self) -> int:
        return len(self.v)


def theta_jet(phi: Jet, field: ToricField) -> Jet:
    """Order-(k-1) jet of theta_X = <v, grad Phi> + constant from an order-k jet of Phi."""
    if len(field.v) != phi.n:
        raise ConfigError(f"field has length {len(field.v)}, manifold has dimension {phi.n}")
    out = phi.derivative(0) * field.v[0]
    for i in range(1, phi.n):
        out = out + phi.derivative(i) * field.v[i]
    return out + field.constant


def theta_of_field(potential: Potential, field: ToricField):
    """Evaluator x -> theta_X(x) for the metric with the given potential."""
    def theta(x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return np.asarray(theta_jet(potential_jet(potential, x, 1), field).value, dtype=np.float64)
    return theta


@dataclass
class InvariantValues:
    n: int
    field: ToricField
    values: dict          # "F[k]" -> value
    errors: dict
    V: float

    def F(self, k: int) -> float:
        return self.values[f"F[{k}]"]

    @property
    def futaki(self) -> float:
        return self.values["F[0]"]


def invariant_values(potential: Potential, field: ToricField, grid: GridSpec) -> dict:
    n = potential.n
    x, w = grid_rule(n, grid)
    phi = potential_jet(potential, x, JET_ORDER)
    md = metric_from_jet(phi, x, "omega")
    G, R = md.G, md.R
    th = theta_jet(phi, field)
    theta = np.asarray(th.value)
    top = wedge_density([(G, n)])
    lap = n * wedge_density([(th.hessian(), 1), (G, n - 1)]) / top
    out = {"V": weighted_sum(top, w, x)}
    for k in range(n + 1):
        integrand = (k + 1) * lap * wedge_density([(R, k), (G, n - k)])
        if k < n:
            integrand = integrand + (n - k) * theta * (top - wedge_density([(R, k + 1), (G, n - k - 1)]))
        out[f"F[{k}]"] = weighted_sum(integrand, w, x)
    return out


def compute_invariants(potential: Potential, field: ToricField, grid: GridSpec) -> InvariantValues:
    """F_k for k = 0..n of the metric with potential ``potential``."""
    fine = invariant_values(potential, field, grid)
    coarse = invariant_values(potential, field, grid.coarse())
    errors = {key: abs(fine[key] - coarse[key]) for key in fine}
    values = {key: val for key, val in fine.items() if key != "V"}
    return InvariantValues(potential.n, field, values, errors, fine["V"])


def scenario_invariants(s: Scenario, field: ToricField, metric: str = "reference") -> InvariantValues:
    if metric not in ("reference", "target"):
        raise ConfigError("metric must be 'reference' or 'target'")
    return compute_invariants(s.reference if metric == "reference" else s.target, field, s.grid)


@dataclass
class Theorem3Result:
    k: int
    Fk: float
    F0: float
    residual: float
    error_estimate: float
    V: float


def check_theorem3(s: Scenario, field: ToricField, ks: Optional[Sequence[int]] = None,
                   metric: str = "reference") -> list[Theorem3Result]:
    inv = scenario_invariants(s, field, metric)
    ks = range(1, s.n + 1) if ks is None else ks
    out = []
    for k in ks:
        if not 1 <= k <= s.n:
            raise ConfigError(f"Theorem 3 check needs 1 <= k <= n, got k={k}")
        res = inv.F(k) - (k + 1) * inv.F(0)
        err = inv.errors[f"F[{k}]"] + (k + 1) * inv.errors["F[0]"]
        out.append(Theorem3Result(k, inv.F(k), inv.F(0), abs(res), err, inv.V))
    return out


@dataclass
class Prop32Result:
    k: int
    derivative: float
    expected: float
    residual: float
    error_estimate: float
    t_step: float


def flowed_energy(s: Scenario, field: ToricField, t: float, k: int, grid: GridSpec) -> float:
    """E_k of the potential phi_t = Phi(x + t v) - Phi(x), relative to the reference."""
    shifted = Translated(s.reference, np.asarray(field.v) * t)
    flowed = Scenario(f"{s.name}:flow", s.reference, shifted, grid, s.k_list)
    return raw_values(flowed, grid)[f"E[{k}]"]


def check_prop32(s: Scenario, field: ToricField, k: int, t_step: float = 1e-3) -> Prop32Result:
    """Richardson-extrapolated central difference of E_k along the flow versus F_k / V."""
    if not 0 <= k <= s.n:
        raise ConfigError(f"k must lie in 0..{s.n}")
    if not t_step > 0:
        raise ConfigError("t_step must be positive")

    def derivative(grid):
        def central(h):
            return (flowed_energy(s, field, h, k, grid) - flowed_energy(s, field, -h, k, grid)) / (2 * h)
        d1, d2 = central(t_step), central(t_step / 2)
        return (4 * d2 - d1) / 3, abs(d2 - d1)

    d, fd_err = derivative(s.grid)
    d_coarse, _ = derivative(s.grid.coarse())
    inv = compute_invariants(s.reference, field, s.grid)
    expected = inv.F(k) / inv.V
    err = abs(d - d_coarse) + fd_err / 3 + inv.errors[f"F[{k}]"] / inv.V
    return Prop32Result(k, d, expected, abs(d - expected), err, t_step)
