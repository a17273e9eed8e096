"""Energy functionals E_k^0, J_k, E_k, F_k, c_k and the identities among them.

Everything is evaluated on a tensor grid of logarithmic coordinates.  A
reference potential Phi_0 carries the metric omega and a target potential
Phi_1 carries omega_phi, with phi = Phi_1 - Phi_0.  Every value comes with
an error estimate: the change under halving the spatial rule plus the change
under halving the path rule.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from math import comb
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import ConfigError, NumericalFailure
from .geometry import (JET_ORDER, Jet, MetricData, Potential, generalized_eigenvalues,
                       metric_from_jet, potential_jet, ricci_potential_raw, wedge_density)
from .quad import GridSpec, gauss_legendre, grid_rule, weighted_sum

PATHS: dict[str, tuple[Callable[[float], float], Callable[[float], float]]] = {
    "linear": (lambda t: t, lambda t: 1.0),
    "quadratic": (lambda t: t * t, lambda t: 2.0 * t),
}


@dataclass(frozen=True)
class Scenario:
    """Reference metric, target metric and numerical resolution."""

    name: str
    reference: Potential
    target: Potential
    grid: GridSpec
    k_list: tuple = ()
    description: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.reference.n != self.target.n:
            raise ConfigError("reference and target live in different dimensions")
        n = self.reference.n
        if not self.k_list:
            object.__setattr__(self, "k_list", tuple(range(n + 1)))
        if any(not 0 <= k <= n for k in self.k_list):
            raise ConfigError(f"k_list must be a subset of 0..{n}")

    @property
    def n(self) -> int:
        return self.reference.n

    def with_grid(self, grid: GridSpec) -> "Scenario":
        return Scenario(self.name, self.reference, self.target, grid, self.k_list, self.description)

    def with_target(self, target: Potential, name: Optional[str] = None) -> "Scenario":
        return Scenario(name or self.name, self.reference, target, self.grid, self.k_list,
                        self.description)


# -- pointwise data ---------------------------------------------------------------

@dataclass
class NodeData:
    """Everything the spatial integrals need, at the nodes of one rule."""

    n: int
    x: np.ndarray
    w: np.ndarray
    phi0: Jet
    phi_diff: Jet
    ref: MetricData
    tgt: MetricData
    h: np.ndarray          # normalised Ricci potential of omega
    h_hess: np.ndarray     # its Hessian
    h_const: float
    u: Jet                 # order-2 jet of u
    V: float

    def integral(self, values) -> float:
        return weighted_sum(values, self.w, self.x)

    def mean(self, values) -> float:
        return self.integral(values) / self.V


def node_data(reference: Potential, target: Potential, grid: GridSpec) -> NodeData:
    n = reference.n
    x, w = grid_rule(n, grid)
    j0 = potential_jet(reference, x, JET_ORDER)
    j1 = potential_jet(target, x, JET_ORDER)
    ref = metric_from_jet(j0, x, "omega")
    tgt = metric_from_jet(j1, x, "omega_phi")
    vol_dens = ref.volume_density()
    V = weighted_sum(vol_dens, w)
    raw = ricci_potential_raw(reference, x, ref)
    # normalise int (e^h - 1) omega^n = 0, working relative to the mean for stability
    shift = weighted_sum(np.asarray(raw.value, dtype=np.float64) * vol_dens, w) / V
    avg = weighted_sum(np.exp(np.asarray(raw.value - shift, dtype=np.float64)) * vol_dens, w) / V
    c = -shift - math.log(avg)
    h_jet = raw + c
    phi_diff = j1 - j0
    u = tgt.logdet - ref.logdet + phi_diff.truncate(2) - h_jet
    return NodeData(n, x, w, j0, phi_diff, ref, tgt, np.asarray(h_jet.value), h_jet.hessian(),
                    c, u, V)


def ricci_normalisation_residual(nd: NodeData) -> float:
    """(1/V) int (e^h - 1) omega^n on the node set."""
    return nd.mean((np.exp(nd.h) - 1) * nd.ref.volume_density())


def target_ricci_potential(nd: NodeData) -> tuple[np.ndarray, float]:
    """Values of h_phi = -u + c on the nodes, normalised against omega_phi^n."""
    vol = nd.tgt.volume_density()
    Vp = nd.integral(vol)
    uv = np.asarray(nd.u.value, dtype=np.float64)
    shift = nd.integral(uv * vol) / Vp
    c = shift - math.log(nd.integral(np.exp(-(uv - shift)) * vol) / Vp)
    return -uv + c, c


# -- spatial functionals ------------------------------------------------------------

def _mix(*factors):
    return wedge_density([(a, e) for a, e in factors if e])


def spatial_values(nd: NodeData) -> dict[str, float]:
    """All path-free quantities for k = 0..n."""
    n = nd.n
    G0, R0, G1, R1 = nd.ref.G, nd.ref.R, nd.tgt.G, nd.tgt.R
    logratio = np.asarray(nd.tgt.logdet.value - nd.ref.logdet.value)
    h = nd.h
    D2u = nd.u.hessian()
    du = nd.u.gradient()
    uval = np.asarray(nd.u.value)
    dudu = du[..., :, None] * du[..., None, :]
    out = {"V": nd.V, "r": n * nd.integral(_mix((R0, 1), (G0, n - 1))) / nd.V,
           "hnorm": ricci_normalisation_residual(nd)}
    for k in range(n + 1):
        s1 = sum(_mix((R1, i), (G0, k - i), (G1, n - k)) for i in range(k + 1))
        s0 = sum(_mix((R0, i), (G0, k - i), (G0, n - k)) for i in range(k + 1))
        out[f"E0[{k}]"] = nd.mean((logratio - h) * s1) + nd.mean(h * s0)
        href = nd.mean(h * _mix((-nd.h_hess, k), (G0, n - k)))
        out[f"F[{k}]"] = nd.mean(uval * _mix((D2u, k), (G1, n - k))) + href
        out[f"c[{k}]"] = sum(
            (-1) ** (k - i) * comb(k + 1, i)
            * nd.mean(h * _mix((-nd.h_hess, k - i), (G0, n - k + i)))
            for i in range(k))
        if k >= 1:
            out[f"C2RHS[{k}]"] = (nd.mean(uval * (_mix((R1, k), (G1, n - k)) - _mix((G1, n))))
                                  + nd.mean(h * (_mix((R0, k), (G0, n - k)) - _mix((G0, n)))))
    if n >= 1:
        out["gradterm1"] = nd.mean(_mix((dudu, 1), (G1, n - 1)))
    if n >= 2:
        out["gradterm2"] = nd.mean(_mix((dudu, 1), (D2u, 1), (G1, n - 2)))
    return out


# -- path functionals ------------------------------------------------------------

def path_values(nd: NodeData, r: float, t_nodes: int, path: str = "linear") -> dict[str, float]:
    """J_k for k = 0..n and the K-energy from its derivative formula, along phi(t) = a(t) phi."""
    try:
        a_of, da_of = PATHS[path]
    except KeyError:
        raise ConfigError(f"unknown path {path!r}; choose from {sorted(PATHS)}") from None
    n = nd.n
    G0 = nd.ref.G
    phi = np.asarray(nd.phi_diff.value)
    ts, wts = gauss_legendre(t_nodes, 0.0, 1.0)
    j_terms = {k: [] for k in range(n + 1)}
    mab = []
    for t in ts.tolist():
        a, da = a_of(t), da_of(t)
        try:
            md = metric_from_jet(nd.phi0 + nd.phi_diff * a, nd.x, f"omega_phi(t={t:.6g})")
        except NumericalFailure as exc:
            raise NumericalFailure(f"path node t={t:.6g}: {exc}") from exc
        Gt, Rt = md.G, md.R
        top = _mix((Gt, n))
        for k in range(n + 1):
            if k == n:
                j_terms[k].append(0.0)
                continue
            integrand = da * phi * (top - _mix((G0, k + 1), (Gt, n - k - 1)))
            j_terms[k].append(-(n - k) * nd.mean(integrand))
        mab.append(-nd.mean(da * phi * (n * _mix((Rt, 1), (Gt, n - 1)) - r * top)))
    wl = wts.tolist()
    out = {f"J[{k}]": math.fsum(v * wi for v, wi in zip(j_terms[k], wl)) for k in range(n + 1)}
    out["E0_mabuchi"] = math.fsum(v * wi for v, wi in zip(mab, wl))
    return out


def raw_values(s: Scenario, grid: GridSpec, path: str = "linear") -> dict[str, float]:
    nd = node_data(s.reference, s.target, grid)
    vals = spatial_values(nd)
    vals.update(path_values(nd, vals["r"], grid.t_nodes, path))
    for k in range(s.n + 1):
        vals[f"E[{k}]"] = vals[f"E0[{k}]"] - vals[f"J[{k}]"]
    return vals


@dataclass
class FunctionalValues:
    """Per-k functionals with error estimates; keys such as "E[1]", "F[2]", "E0_mabuchi"."""

    n: int
    path: str
    values: dict
    errors: dict
    coarse: tuple = ()

    def __getitem__(self, key: str) -> float:
        return self.values[key]

    def E(self, k):
        return self.values[f"E[{k}]"]

    def F(self, k):
        return self.values[f"F[{k}]"]

    def error(self, key: str) -> float:
        return self.errors[key]

    def estimate(self, fn: Callable[[dict], float]) -> tuple[float, float]:
        """Value of a derived quantity and its error estimate from the coarse rules."""
        v = fn(self.values)
        return v, sum(abs(v - fn(c)) for c in self.coarse)


_CACHE: dict = {}


def compute_functionals(s: Scenario, path: str = "linear") -> FunctionalValues:
    key = (id(s.reference), id(s.target), s.grid, path)
    hit = _CACHE.get(key)
    if hit is not None and hit[0] is s:
        return hit[1]
    fine = raw_values(s, s.grid, path)
    coarse = (raw_values(s, s.grid.coarse(), path), raw_values(s, s.grid.coarse_path(), path))
    errors = {k: sum(abs(fine[k] - c[k]) for c in coarse) for k in fine}
    out = FunctionalValues(s.n, path, fine, errors, coarse)
    if len(_CACHE) > 32:
        _CACHE.clear()
    _CACHE[key] = (s, out)
    return out


# -- checks -------------------------------------------------------------------------

@dataclass
class Residual:
    """|lhs - rhs| with a scale for relative tolerances and a quadrature error estimate."""

    name: str
    params: dict
    lhs: float
    rhs: float
    residual: float
    scale: float
    error_estimate: float
    extra: dict = field(default_factory=dict)


def _residual(fv: FunctionalValues, name, params, lhs_fn, rhs_fn, scale_fn=None) -> Residual:
    lhs, rhs = lhs_fn(fv.values), rhs_fn(fv.values)
    _, err = fv.estimate(lambda v: lhs_fn(v) - rhs_fn(v))
    scale = max(1.0, abs(scale_fn(fv.values) if scale_fn else rhs))
    return Residual(name, params, lhs, rhs, abs(lhs - rhs), scale, err)


def theorem1_lhs(v: dict, k: int) -> float:
    return sum((-1) ** i * comb(k + 1, i + 1) * v[f"E[{i}]"] for i in range(k + 1))


def check_theorem1(s: Scenario, k: int, fv: Optional[FunctionalValues] = None) -> Residual:
    if not 1 <= k <= s.n:
        raise ConfigError(f"Theorem 1 needs 1 <= k <= n, got k={k}")
    fv = fv or compute_functionals(s)
    return _residual(fv, "theorem1", {"k": k}, lambda v: theorem1_lhs(v, k),
                     lambda v: v[f"F[{k}]"])


def corollary_sides(which: str, k: int, p: Optional[int] = None):
    """Left and right sides of one corollary identity as functions of the value dict."""
    if which == "C1":
        return (lambda v: sum((-1) ** i * comb(k - p, i - p) * v[f"E[{i}]"] for i in range(p, k + 1)),
                lambda v: sum((-1) ** i * comb(p + 1, i) * v[f"F[{k - i}]"] for i in range(p + 2)))
    if which == "C2":
        return (lambda v: v[f"E[{k}]"] - v[f"E[{k - 1}]"] - v["E[0]"],
                lambda v: v[f"C2RHS[{k}]"])
    if which == "C3":
        return (lambda v: v[f"E[{k}]"],
                lambda v: sum((-1) ** (k - i) * comb(k + 1, i) * v[f"F[{k - i}]"] for i in range(k))
                + (k + 1) * v["E[0]"])
    if which == "T1REC":
        return (lambda v: v[f"E[{k}]"] - v[f"E[{k - 1}]"],
                lambda v: sum((-1) ** (k - i) * comb(k, i) * v[f"F[{k - i}]"] for i in range(k))
                + v["E[0]"])
    raise ConfigError(f"unknown corollary item {which!r}")


def check_corollary(s: Scenario, which: str, k: int, p: Optional[int] = None,
                    fv: Optional[FunctionalValues] = None) -> Residual:
    n = s.n
    if which == "C1":
        if p is None or not 0 <= p <= k - 2 <= n - 2:
            raise ConfigError(f"C1 needs 0 <= p <= k-2 <= n-2, got p={p}, k={k}, n={n}")
    elif not 1 <= k <= n:
        raise ConfigError(f"{which} needs 1 <= k <= n, got k={k}")
    fv = fv or compute_functionals(s)
    lhs, rhs = corollary_sides(which, k, p)
    params = {"item": which, "k": k} if p is None else {"item": which, "p": p, "k": k}
    return _residual(fv, "corollary", params, lhs, rhs, scale_fn=lhs)


def pali_constants(v: dict, n: int) -> dict[str, float]:
    out = {"D1": 2 * v["E[0]"] - v["E[1]"] + v["gradterm1"]}
    if n >= 2:
        out["D2"] = 3 * v["E[0]"] - 3 * v["E[1]"] + v["E[2]"] + v["gradterm2"]
    return out


@dataclass
class PaliResult:
    constants_a: dict
    constants_b: dict
    spreads: dict
    error_estimates: dict


def check_pali_remark(sa: Scenario, sb: Scenario) -> PaliResult:
    if sa.reference is not sb.reference and repr(sa.reference) != repr(sb.reference):
        raise ConfigError("Pali check needs two scenarios on the same reference metric")
    fa, fb = compute_functionals(sa), compute_functionals(sb)
    n = sa.n
    ca, cb = pali_constants(fa.values, n), pali_constants(fb.values, n)
    spreads = {key: abs(ca[key] - cb[key]) for key in ca}
    errs = {}
    for key in ca:
        _, ea = fa.estimate(lambda v: pali_constants(v, n)[key])
        _, eb = fb.estimate(lambda v: pali_constants(v, n)[key])
        errs[key] = ea + eb
    return PaliResult(ca, cb, spreads, errs)


@dataclass
class Theorem2Result:
    k: int
    min_eigenvalue: float
    bound: float
    ricci_bound_ok: bool
    margin: float
    scale: float
    error_estimate: float

    @property
    def inequality_holds(self) -> Optional[bool]:
        if not self.ricci_bound_ok:
            return None
        return self.margin >= -1e-6 * self.scale


def ricci_lower_eigenvalue(s: Scenario) -> float:
    x, _ = grid_rule(s.n, s.grid)
    md = metric_from_jet(potential_jet(s.target, x), x)
    return float(np.min(generalized_eigenvalues(md.R, md.G)))


def check_theorem2(s: Scenario, k: int, fv: Optional[FunctionalValues] = None) -> Theorem2Result:
    if k < 2 or k > s.n:
        raise ConfigError(f"Theorem 2 needs 2 <= k <= n, got k={k}")
    lam = ricci_lower_eigenvalue(s)
    bound = -2.0 / (k - 1)
    fv = fv or compute_functionals(s)
    margin, err = fv.estimate(lambda v: v[f"E[{k}]"] - (k + 1) * v["E[0]"] - v[f"c[{k}]"])
    return Theorem2Result(k, lam, bound, lam >= bound, margin, max(1.0, abs(fv.E(k))), err)


def path_independence(s: Scenario) -> dict[str, Residual]:
    """J_k and the K-energy along t phi versus t^2 phi."""
    lin = compute_functionals(s, "linear")
    quad = compute_functionals(s, "quadratic")
    out = {}
    for key in [f"J[{k}]" for k in range(s.n + 1)] + ["E0_mabuchi"]:
        a, b = lin[key], quad[key]
        out[key] = Residual("path_independence", {"quantity": key}, a, b, abs(a - b),
                            max(1.0, abs(a)), lin.error(key) + quad.error(key))
    return out


def kenergy_consistency(s: Scenario, fv: Optional[FunctionalValues] = None) -> Residual:
    fv = fv or compute_functionals(s)
    return _residual(fv, "kenergy", {}, lambda v: v["E[0]"], lambda v: v["E0_mabuchi"],
                     scale_fn=lambda v: 1.0)
