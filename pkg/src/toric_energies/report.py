"""Check reports: one record per verified statement, with a pass/fail/inconclusive status.

A numeric check passes when its residual is within tolerance and the
tolerance exceeds the quadrature error estimate.  When the estimate is at
least as large as the tolerance the outcome is "inconclusive", whatever the
residual.  Exact checks pass or fail outright.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Optional, Sequence

import numpy as np

from . import identities
from .config import ScenarioConfig
from .errors import ConfigError
from .functionals import (FunctionalValues, Scenario, check_corollary, check_pali_remark,
                          check_theorem1, check_theorem2, compute_functionals,
                          kenergy_consistency, node_data, pali_constants, path_independence,
                          ricci_normalisation_residual)
from .geometry import FubiniStudy, det_small, metric_and_ricci
from .invariants import ToricField, check_prop32, compute_invariants
from .quad import GridSpec, grid_rule, integrate

REPORT_SCHEMA = 1

CONVENTIONS = {
    "coordinates": "x = log|z|^2 on the open torus orbit",
    "ddbar": "sqrt(-1) d dbar f has matrix D^2 f in x",
    "volume": "int omega^n = (2 pi)^n n! int det D^2 Phi dx",
    "ricci": "Ric has matrix -D^2 log det D^2 Phi",
    "kahler_class": "2 pi c_1; moment polytope {<a_i, mu> + b_i >= 0}",
    "ricci_potential": "Ric - omega = sqrt(-1) d dbar h, int (e^h - 1) omega^n = 0",
    "symplectic_potential": "Guillemin g = sum_i l_i log l_i",
    "laplacian": "Delta theta omega^n = n sqrt(-1) d dbar theta ^ omega^(n-1)",
    "hamiltonian": "theta_X = <v, grad Phi> + constant",
    "wedge_density": "prod e_j! times the mixed coefficient of det(sum t_j A_j)",
    "quadrature": "sinh-mapped Gauss-Legendre on [-L, L]^n, Gauss-Legendre in t, fsum reductions",
    "error_estimate": "change of the value when the spatial rule and the path rule are halved",
}

STATUSES = ("pass", "fail", "inconclusive", "skipped")


def jsonable(value):
    if isinstance(value, Fraction):
        return str(value)
    if isinstance(value, (np.floating, float)):
        value = float(value)
        return value if math.isfinite(value) else str(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.bool_,)):
        return bool(value)
    if isinstance(value, dict):
        return {str(k): jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [jsonable(v) for v in value.tolist()]
    return value


@dataclass
class CheckReport:
    check: str
    scenario: str
    params: dict
    value: object
    tolerance: float
    error_estimate: float
    status: str
    details: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.status not in STATUSES:
            raise ValueError(f"unknown status {self.status!r}")

    @property
    def passed(self) -> Optional[bool]:
        return {"pass": True, "fail": False}.get(self.status)

    def to_dict(self) -> dict:
        return jsonable({
            "check": self.check,
            "scenario": self.scenario,
            "params": self.params,
            "value": self.value,
            "tolerance": self.tolerance,
            "error_estimate": self.error_estimate,
            "pass": self.passed,
            "status": self.status,
            "details": self.details,
        })

    def line(self) -> str:
        params = " ".join(f"{k}={_fmt(v)}" for k, v in self.params.items())
        return (f"{self.status.upper():<12} {self.check:<20} {self.scenario:<24} {params:<22} "
                f"value={_fmt(self.value)} tol={_fmt(self.tolerance)} err={_fmt(self.error_estimate)}")


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.3e}"
    if isinstance(v, (list, tuple)):
        return "(" + ",".join(_fmt(c) for c in v) + ")"
    return str(v)


def numeric(check, scenario, params, residual, tolerance, error_estimate, **details) -> CheckReport:
    """Upper-bound check: residual <= tolerance, conclusive only when error_estimate < tolerance."""
    residual, tolerance, error_estimate = float(residual), float(tolerance), float(error_estimate)
    if not math.isfinite(residual) or not math.isfinite(error_estimate):
        status = "fail"
    elif error_estimate >= tolerance:
        status = "inconclusive"
    else:
        status = "pass" if residual <= tolerance else "fail"
    return CheckReport(check, scenario, params, residual, tolerance, error_estimate, status, details)


def lower_bound(check, scenario, params, value, threshold, error_estimate, **details) -> CheckReport:
    """value > threshold, decided only when the error band excludes the threshold."""
    value, threshold, error_estimate = float(value), float(threshold), float(error_estimate)
    if error_estimate >= threshold or abs(value - threshold) <= error_estimate:
        status = "inconclusive"
    else:
        status = "pass" if value > threshold else "fail"
    return CheckReport(check, scenario, params, value, threshold, error_estimate, status, details)


def exact(check, params, ok: bool, value="", **details) -> CheckReport:
    return CheckReport(check, "exact", params, value, 0.0, 0.0, "pass" if ok else "fail", details)


def skipped(check, scenario, params, reason, **details) -> CheckReport:
    return CheckReport(check, scenario, params, reason, 0.0, 0.0, "skipped", details)


# -- exact track --------------------------------------------------------------

def exact_checks(max_k: int = 40, max_m: int = 300) -> list[CheckReport]:
    if max_k < 1 or max_m < 1:
        raise ConfigError("--max-k and --max-m must be >= 1")
    out = []
    for name in identities.IdentityName:
        for k in range(1, max_k + 1):
            r = identities.verify_identity(name, k)
            out.append(exact(f"identity_{name.value}", {"k": k}, r.passed,
                             "equal" if r.passed else "differ", counterexample=r.counterexample))
    for m in range(1, max_m + 1):
        r = identities.appendix_report(m)
        ok = r.all_nonneg and r.penultimate_zero and r.claim1_pass and r.claim5_pass is not False
        out.append(exact("appendix", {"m": m}, ok, str(r.values[m - 1]),
                         all_nonneg=r.all_nonneg, penultimate_zero=r.penultimate_zero,
                         claim1=r.claim1_pass, claim1_exceptions=r.claim1_exceptions,
                         claim5=r.claim5_pass, claim5_detail=r.claim5_detail))
    c3 = identities.claim3_verify()
    out.append(exact("claim3", {}, c3["passed"], "certified" if c3["passed"] else "not certified",
                     expansion_match=c3["expansion_match"], link_ok=c3["link_ok"],
                     blocks_ok=c3["blocks_ok"],
                     coefficients={j: c["nonnegative"] for j, c in c3["certificates"].items()}))
    rem = identities.remark_asymptotic()
    target = Fraction(-57, 625)
    out.append(exact("remark_limit", {}, rem["exact_limit"] == target, rem["exact_limit"],
                     expected=target,
                     finite_m={d["m"]: d["value"] for d in rem["finite_m_values"]}))
    for k in range(2, max_k + 1):
        try:
            coeffs = identities.theorem2_coefficients(k)
            ok = identities.theorem2_reconstruction(k)
        except ArithmeticError as exc:
            out.append(exact("theorem2_coefficients", {"k": k}, False, str(exc)))
            continue
        out.append(exact("theorem2_coefficients", {"k": k}, ok, "nonnegative",
                         coefficients=coeffs))
    return out


# -- numeric track ------------------------------------------------------------

def calibration_checks(cfg: ScenarioConfig) -> list[CheckReport]:
    s = cfg.scenario
    tol = cfg.tolerance("calibration")
    ref, n, grid = s.reference, s.n, s.grid
    out = []
    exact_volume = (2 * math.pi) ** n * math.factorial(n) * ref.polytope.volume_and_barycenter()[0]

    def density(x):
        G, _ = metric_and_ricci(ref, x)
        return math.factorial(n) * det_small(G)

    q = integrate(density, n, grid)
    # the embedded N/2 rule is far less accurate than the N rule; compare with 2N instead
    finer = integrate(density, n, GridSpec(grid.half_width, 2 * grid.nodes_per_axis,
                                           grid.t_nodes, grid.stretch))
    rel = abs(q.value - exact_volume) / exact_volume
    out.append(numeric("volume", s.name, {"N": grid.nodes_per_axis}, rel, tol,
                       abs(q.value - finer.value) / exact_volume,
                       volume=q.value, exact=exact_volume))
    x, _ = grid_rule(n, grid)
    G, R = metric_and_ricci(ref, x)
    if isinstance(ref, FubiniStudy):
        out.append(numeric("ke_residual", s.name, {}, float(np.max(np.abs(R - G))), tol, 0.0))
    nd = node_data(ref, ref, grid)
    out.append(numeric("h_normalisation", s.name, {}, abs(ricci_normalisation_residual(nd)),
                       tol, 0.0, h_constant=nd.h_const))
    if isinstance(ref, FubiniStudy):
        out.append(numeric("h_vanishes", s.name, {}, float(np.max(np.abs(nd.h))), tol, 0.0,
                           h_constant=nd.h_const))
    return out


def _residual_report(check, s: Scenario, r, rel_tol) -> CheckReport:
    return numeric(check, s.name, r.params, r.residual, rel_tol * r.scale, r.error_estimate,
                   lhs=r.lhs, rhs=r.rhs, scale=r.scale)


def theorem1_checks(cfg: ScenarioConfig, ks: Optional[Sequence[int]] = None) -> list[CheckReport]:
    s = cfg.scenario
    ks = [k for k in s.k_list if 1 <= k <= s.n] if ks is None else ks
    fv = compute_functionals(s)
    return [_residual_report("theorem1", s, check_theorem1(s, k, fv), cfg.tolerance("theorem1"))
            for k in ks]


def corollary_items(n: int) -> list[tuple]:
    items = [("C1", k, p) for k in range(2, n + 1) for p in range(0, k - 1)]
    items += [("C2", k, None) for k in range(1, n + 1)]
    items += [("C3", k, None) for k in range(1, n + 1)]
    items += [("T1REC", k, None) for k in range(1, n + 1)]
    return items


def corollary_checks(cfg: ScenarioConfig, items: Optional[Iterable[tuple]] = None) -> list[CheckReport]:
    s = cfg.scenario
    fv = compute_functionals(s)
    items = corollary_items(s.n) if items is None else items
    return [_residual_report("corollary", s, check_corollary(s, which, k, p, fv),
                             cfg.tolerance("corollary"))
            for which, k, p in items]


def kenergy_checks(cfg: ScenarioConfig) -> list[CheckReport]:
    s = cfg.scenario
    return [_residual_report("kenergy", s, kenergy_consistency(s), cfg.tolerance("kenergy"))]


def path_checks(cfg: ScenarioConfig) -> list[CheckReport]:
    s = cfg.scenario
    res = path_independence(s)
    return [_residual_report("path_independence", s, r, cfg.tolerance("path"))
            for _, r in sorted(res.items())]


def theorem2_checks(cfg: ScenarioConfig, ks: Optional[Sequence[int]] = None) -> list[CheckReport]:
    s = cfg.scenario
    ks = list(range(2, s.n + 1)) if ks is None else ks
    out = []
    for k in ks:
        r = check_theorem2(s, k)
        gate = {"min_eigenvalue": r.min_eigenvalue, "bound": r.bound,
                "ricci_bound_ok": r.ricci_bound_ok}
        if not r.ricci_bound_ok:
            out.append(skipped("theorem2", s.name, {"k": k}, "gate rejected", **gate))
            continue
        out.append(numeric("theorem2", s.name, {"k": k}, max(0.0, -r.margin),
                           cfg.tolerance("theorem2") * r.scale, r.error_estimate,
                           margin=r.margin, scale=r.scale, **gate))
    return out


def pali_checks(a: ScenarioConfig, b: ScenarioConfig) -> list[CheckReport]:
    res = check_pali_remark(a.scenario, b.scenario)
    tol = min(a.tolerance("pali"), b.tolerance("pali"))
    name = f"{a.name}|{b.name}"
    out = []
    for key in sorted(res.spreads):
        out.append(numeric("pali_spread", name, {"constant": key}, res.spreads[key], tol,
                           res.error_estimates[key], value_a=res.constants_a[key],
                           value_b=res.constants_b[key]))
    if isinstance(a.scenario.reference, FubiniStudy):
        # on a Kahler-Einstein reference the constants are those of phi = 0, which vanish
        for key in sorted(res.spreads):
            _, ea = compute_functionals(a.scenario).estimate(lambda v: pali_constants(v, a.scenario.n)[key])
            out.append(numeric("pali_vanishing", a.name, {"constant": key},
                               abs(res.constants_a[key]), tol, ea))
    return out


def expected_futaki(cfg: ScenarioConfig, field_: ToricField) -> float:
    """F_0 / V = -<v, barycentre - tau> for the gauge theta = <v, mu>."""
    poly = cfg.scenario.reference.polytope
    _, bary = poly.volume_and_barycenter()
    return -float(np.dot(field_.v, bary - poly.canonical_centre()))


def theorem3_checks(cfg: ScenarioConfig, field_: Optional[ToricField] = None) -> list[CheckReport]:
    s = cfg.scenario
    field_ = field_ or cfg.field
    if field_ is None:
        raise ConfigError("theorem3 needs a field: set 'field' in the scenario or pass --v")
    n, grid = s.n, s.grid
    params = {"v": list(field_.v)}
    inv = compute_invariants(s.reference, field_, grid)
    V = inv.V
    out = []
    expected = expected_futaki(cfg, ToricField(field_.v))
    if abs(expected) < 1e-12:
        tol = cfg.tolerance("futaki_zero") * V
        for k in range(n + 1):
            out.append(numeric("futaki_vanishing", s.name, {**params, "k": k}, abs(inv.F(k)), tol,
                               inv.errors[f"F[{k}]"], F=inv.F(k), V=V))
    else:
        out.append(lower_bound("futaki_nonzero", s.name, params, abs(inv.F(0)),
                               cfg.tolerance("futaki_nonzero") * V, inv.errors["F[0]"],
                               F0=inv.F(0), V=V))
        out.append(numeric("futaki_barycentre", s.name, params,
                           abs(inv.F(0) / V - expected),
                           cfg.tolerance("barycentre") * max(1.0, abs(expected)),
                           inv.errors["F[0]"] / V, F0_over_V=inv.F(0) / V, expected=expected))
    for k in range(1, n + 1):
        tol = max(cfg.tolerance("theorem3") * abs(inv.F(0)), cfg.tolerance("theorem3_zero") * V)
        out.append(numeric("theorem3", s.name, {**params, "k": k},
                           abs(inv.F(k) - (k + 1) * inv.F(0)), tol,
                           inv.errors[f"F[{k}]"] + (k + 1) * inv.errors["F[0]"],
                           Fk=inv.F(k), F0=inv.F(0), V=V))
    shifted = compute_invariants(s.reference, ToricField(field_.v, field_.constant + 1.0), grid)
    for k in range(n + 1):
        key = f"F[{k}]"
        out.append(numeric("gauge", s.name, {**params, "k": k, "shift": 1.0},
                           abs(shifted.F(k) - inv.F(k)), cfg.tolerance("gauge") * V,
                           inv.errors[key] + shifted.errors[key]))
    if n >= 2:
        va = ToricField(tuple(c if i == 0 else 0.0 for i, c in enumerate(field_.v)), field_.constant)
        vb = ToricField(tuple(0.0 if i == 0 else c for i, c in enumerate(field_.v)))
        ia, ib = compute_invariants(s.reference, va, grid), compute_invariants(s.reference, vb, grid)
        for k in range(n + 1):
            key = f"F[{k}]"
            out.append(numeric("linearity", s.name, {**params, "k": k},
                               abs(inv.F(k) - ia.F(k) - ib.F(k)),
                               cfg.tolerance("linearity") * max(V, abs(inv.F(k))),
                               inv.errors[key] + ia.errors[key] + ib.errors[key]))
    if s.target is not s.reference:
        other = compute_invariants(s.target, field_, grid)
        for k in range(n + 1):
            key = f"F[{k}]"
            out.append(numeric("metric_independence", s.name, {**params, "k": k},
                               abs(other.F(k) - inv.F(k)),
                               cfg.tolerance("metric_independence") * max(V, abs(inv.F(k))),
                               inv.errors[key] + other.errors[key],
                               F_reference=inv.F(k), F_target=other.F(k)))
    return out


def prop32_checks(cfg: ScenarioConfig, field_: Optional[ToricField] = None,
                  ks: Optional[Sequence[int]] = None, t_step: float = 1e-3) -> list[CheckReport]:
    s = cfg.scenario
    field_ = field_ or cfg.field
    if field_ is None:
        raise ConfigError("prop32 needs a field: set 'field' in the scenario or pass --v")
    ks = list(s.k_list) if ks is None else ks
    out = []
    inv = compute_invariants(s.reference, field_, s.grid)
    for k in ks:
        r = check_prop32(s, field_, k, t_step)
        tol = cfg.tolerance("prop32") * max(1.0, abs(inv.F(k)) / inv.V)
        out.append(numeric("prop32", s.name, {"v": list(field_.v), "k": k, "t_step": t_step},
                           r.residual, tol, r.error_estimate,
                           derivative=r.derivative, expected=r.expected))
    return out


def scenario_checks(cfg: ScenarioConfig) -> list[CheckReport]:
    """Every single-scenario check that applies to ``cfg`` and is enabled in it."""
    s = cfg.scenario
    perturbed = s.target is not s.reference
    runners = [
        ("calibration", True, calibration_checks),
        ("theorem1", perturbed, theorem1_checks),
        ("corollary", perturbed and s.n >= 2, corollary_checks),
        ("kenergy", perturbed, kenergy_checks),
        ("path", perturbed, path_checks),
        ("theorem2", perturbed and s.n >= 2, theorem2_checks),
        ("theorem3", cfg.field is not None, theorem3_checks),
        ("prop32", cfg.field is not None, prop32_checks),
    ]
    out = []
    for name, applies, run in runners:
        if applies and name in cfg.checks:
            out += run(cfg)
    return out


def pali_pairs(configs: Sequence[ScenarioConfig]) -> list[tuple]:
    """Consecutive pairs of perturbed scenarios sharing a reference metric."""
    groups: dict = {}
    for cfg in configs:
        s = cfg.scenario
        if s.target is not s.reference and "pali" in cfg.checks:
            groups.setdefault(repr(s.reference), []).append(cfg)
    pairs = []
    for key in sorted(groups):
        group = groups[key]
        pairs += [(group[i], group[i + 1]) for i in range(len(group) - 1)]
    return pairs


# -- serialisation ----------------------------------------------------------------

def summary(checks: Sequence[CheckReport]) -> dict:
    return {status: sum(c.status == status for c in checks) for status in STATUSES}


def exit_code(checks: Sequence[CheckReport]) -> int:
    return 1 if any(c.status in ("fail", "inconclusive") for c in checks) else 0


def scenario_header(cfg: ScenarioConfig) -> dict:
    g = cfg.scenario.grid
    return {"name": cfg.name, "source": cfg.path, "config": cfg.source,
            "grid": {"L": g.half_width, "N": g.nodes_per_axis, "t_nodes": g.t_nodes,
                     "stretch": g.stretch},
            "reference": repr(cfg.scenario.reference), "target": repr(cfg.scenario.target)}


def to_json(checks: Sequence[CheckReport], configs: Sequence[ScenarioConfig] = ()) -> str:
    doc = {
        "schema": REPORT_SCHEMA,
        "conventions": CONVENTIONS,
        "scenarios": [scenario_header(c) for c in configs],
        "checks": [c.to_dict() for c in checks],
        "summary": summary(checks),
    }
    return json.dumps(jsonable(doc), indent=2, sort_keys=True) + "\n"


CSV_FIELDS = ("check", "scenario", "params", "value", "tolerance", "error_estimate", "status")


def to_csv(checks: Sequence[CheckReport]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    for key, value in sorted(CONVENTIONS.items()):
        # comment lines are written verbatim so that readers can skip on a leading '#'
        buf.write(f"# {key}: {value}\n")
    writer.writerow(CSV_FIELDS)
    for c in checks:
        d = c.to_dict()
        writer.writerow([d["check"], d["scenario"], json.dumps(d["params"], sort_keys=True),
                         repr(d["value"]) if isinstance(d["value"], float) else d["value"],
                         repr(d["tolerance"]), repr(d["error_estimate"]), d["status"]])
    return buf.getvalue()


def functional_rows(cfg: ScenarioConfig, fv: FunctionalValues, inv=None) -> list[dict]:
    """One row per (scenario, quantity, k) for export."""
    rows = []
    for key in sorted(fv.values):
        base, _, rest = key.partition("[")
        rows.append({"scenario": cfg.name, "quantity": base, "k": rest.rstrip("]") if rest else "",
                     "value": fv.values[key], "error_estimate": fv.errors[key]})
    if inv is not None:
        for key in sorted(inv.values):
            base, _, rest = key.partition("[")
            rows.append({"scenario": cfg.name, "quantity": f"invariant_{base}",
                         "k": rest.rstrip("]"), "value": inv.values[key],
                         "error_estimate": inv.errors[key]})
    return rows
