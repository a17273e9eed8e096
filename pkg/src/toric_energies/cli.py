"""Command line front end.

Exit codes: 0 when every check passes, 1 when a check fails or is
inconclusive, 2 for invalid input, 3 for numerical failures such as loss of
positivity.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path
from typing import Optional, Sequence

from .config import ScenarioConfig, load_scenario
from .errors import ConfigError, NumericalFailure
from .functionals import compute_functionals
from .invariants import ToricField, compute_invariants
from . import report as rp

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3

CHECKS = ("theorem1", "corollary", "pali", "theorem2", "theorem3", "prop32", "kenergy", "path")


def _vector(text: str) -> tuple:
    try:
        return tuple(float(c) for c in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


class _Parser(argparse.ArgumentParser):
    """Argument errors count as configuration errors."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="toric-energies",
                     description="Verify energy functional identities on toric Fano manifolds.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def output_options(p):
        p.add_argument("--out", type=Path, help="write the report to this file")
        p.add_argument("--format", choices=("json", "csv"), default="json")

    p = sub.add_parser("verify-exact", help="exact identity and sign sweeps")
    p.add_argument("--max-k", type=int, default=40)
    p.add_argument("--max-m", type=int, default=300)
    output_options(p)

    p = sub.add_parser("calibrate", help="volume, Kahler-Einstein and normalisation residuals")
    p.add_argument("--scenario", required=True, type=Path)
    output_options(p)

    p = sub.add_parser("check", help="run one numerical check")
    p.add_argument("name", choices=CHECKS)
    p.add_argument("--scenario", required=True, type=Path, action="append",
                   help="scenario file; pali takes two")
    p.add_argument("--k", type=int, action="append", help="restrict to this k (repeatable)")
    p.add_argument("--p", type=int, help="p for corollary item C1")
    p.add_argument("--item", choices=("C1", "C2", "C3", "T1REC"), help="corollary item")
    p.add_argument("--v", type=_vector, help="field generator, e.g. 1,1")
    p.add_argument("--t-step", type=float, default=1e-3)
    output_options(p)

    p = sub.add_parser("compute", help="dump functionals and invariants")
    p.add_argument("--scenario", required=True, type=Path)
    p.add_argument("--v", type=_vector, help="also compute F_k for this field")
    output_options(p)

    p = sub.add_parser("report", help="full suite over several scenarios")
    p.add_argument("--scenario", type=Path, action="append", default=[])
    p.add_argument("--exact", action="store_true", help="include the exact sweeps")
    p.add_argument("--max-k", type=int, default=40)
    p.add_argument("--max-m", type=int, default=300)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--format", choices=("json", "csv"), default="json")
    return parser


def _field(cfg: ScenarioConfig, v) -> Optional[ToricField]:
    if v is None:
        return cfg.field
    if len(v) != cfg.scenario.n:
        raise ConfigError(f"--v: expected {cfg.scenario.n} components, got {len(v)}")
    return ToricField(v)


def _run_check(args) -> tuple[list, list]:
    configs = [load_scenario(p) for p in args.scenario]
    if args.name == "pali":
        if len(configs) != 2:
            raise ConfigError("check pali needs exactly two --scenario files")
        return rp.pali_checks(*configs), configs
    if len(configs) != 1:
        raise ConfigError(f"check {args.name} takes a single --scenario")
    cfg = configs[0]
    n = cfg.scenario.n
    if args.k is not None and any(not 0 <= k <= n for k in args.k):
        raise ConfigError(f"--k must lie in 0..{n}")
    if args.name == "theorem1":
        checks = rp.theorem1_checks(cfg, args.k)
    elif args.name == "corollary":
        items = None
        if args.item == "C1" and args.p is not None and args.k:
            # explicit items are validated by the check itself
            items = [("C1", k, args.p) for k in args.k]
        elif args.item or args.k or args.p is not None:
            items = [it for it in rp.corollary_items(n)
                     if (args.item is None or it[0] == args.item)
                     and (not args.k or it[1] in args.k)
                     and (args.p is None or it[2] == args.p)]
            if not items:
                raise ConfigError("no corollary item matches the given --item/--k/--p")
        checks = rp.corollary_checks(cfg, items)
    elif args.name == "theorem2":
        checks = rp.theorem2_checks(cfg, args.k)
    elif args.name == "theorem3":
        checks = rp.theorem3_checks(cfg, _field(cfg, args.v))
    elif args.name == "prop32":
        if not args.t_step > 0:
            raise ConfigError("--t-step must be positive")
        checks = rp.prop32_checks(cfg, _field(cfg, args.v), args.k, args.t_step)
    elif args.name == "kenergy":
        checks = rp.kenergy_checks(cfg)
    else:
        checks = rp.path_checks(cfg)
    return checks, configs


def _emit(checks, configs, args) -> int:
    for c in checks:
        print(c.line())
    if getattr(args, "out", None):
        text = rp.to_csv(checks) if args.format == "csv" else rp.to_json(checks, configs)
        args.out.write_text(text)
    counts = rp.summary(checks)
    print("summary: " + ", ".join(f"{k}={v}" for k, v in counts.items()))
    return rp.exit_code(checks)


def _compute(args) -> int:
    cfg = load_scenario(args.scenario)
    fv = compute_functionals(cfg.scenario)
    field_ = _field(cfg, args.v)
    inv = compute_invariants(cfg.scenario.reference, field_, cfg.scenario.grid) if field_ else None
    rows = rp.functional_rows(cfg, fv, inv)
    if args.format == "csv":
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=("scenario", "quantity", "k", "value", "error_estimate"),
                                lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({**row, "value": repr(row["value"]),
                             "error_estimate": repr(row["error_estimate"])})
        text = buf.getvalue()
    else:
        doc = {"schema": rp.REPORT_SCHEMA, "conventions": rp.CONVENTIONS,
               "scenario": rp.scenario_header(cfg), "values": rows}
        text = json.dumps(rp.jsonable(doc), indent=2, sort_keys=True) + "\n"
    if args.out:
        args.out.write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _report(args) -> int:
    configs = [load_scenario(p) for p in args.scenario]
    if not configs and not args.exact:
        raise ConfigError("report needs --scenario files or --exact")
    checks = rp.exact_checks(args.max_k, args.max_m) if args.exact else []
    for cfg in configs:
        checks += rp.scenario_checks(cfg)
    for a, b in rp.pali_pairs(configs):
        checks += rp.pali_checks(a, b)
    return _emit(checks, configs, args)


def run_command(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "verify-exact":
            return _emit(rp.exact_checks(args.max_k, args.max_m), [], args)
        if args.command == "calibrate":
            cfg = load_scenario(args.scenario)
            return _emit(rp.calibration_checks(cfg), [cfg], args)
        if args.command == "check":
            checks, configs = _run_check(args)
            return _emit(checks, configs, args)
        if args.command == "compute":
            return _compute(args)
        return _report(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


def main() -> None:
    sys.exit(run_command())


if __name__ == "__main__":
    main()
