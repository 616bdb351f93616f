"""Command-line front-end: ``fujitalab <subcommand> --config FILE [--out-dir DIR]``.

Exit codes: 0 success, 1 failed verification or solver error, 2 bad configuration.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from pathlib import Path

from .config import (ConfigError, grid_from_config, initial_field, kernel_section, load_run_config,
                     load_sweep_plan, load_toml)
from .diagnostics import PreconditionError, kaplan_report, threshold_table
from .experiments import simulate, sweep
from .kernels import InvalidWindowError, KernelQuadratureError, estimate_expansion, fujita_exponent
from .verify import run_suite, suite_json

log = logging.getLogger("fujitalab")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def _require_config(args) -> Path:
    if not args.config:
        raise ConfigError(f"'{args.command}' needs --config FILE")
    return Path(args.config)


def _out_dir(args) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _kernel_from(raw: dict, base: Path):
    if "kernel" not in raw:
        raise ConfigError("missing [kernel] section")
    dim = int(raw.get("grid", {}).get("dim", raw["kernel"].get("dim", 1)))
    return kernel_section(raw["kernel"], dim, base)


def cmd_classify_kernel(args) -> int:
    path = _require_config(args)
    kernel = _kernel_from(load_toml(path), path.parent)
    try:
        exp = estimate_expansion(kernel)
    except (InvalidWindowError, KernelQuadratureError) as exc:
        print(f"classification failed: {exc}", file=sys.stderr)
        return EXIT_FAIL
    report = {
        "kernel": kernel.to_config(),
        "beta": exp.beta,
        "A": exp.A,
        "fit_window": list(exp.window),
        "fit_residual": exp.residual,
        "low_confidence": exp.low_confidence,
        "second_moment": exp.second_moment if math.isfinite(exp.second_moment) else "inf",
        "finite_second_moment": exp.finite_second_moment,
        "predicted_pF": fujita_exponent(exp, kernel.dim),
    }
    (_out_dir(args) / "classify.json").write_text(json.dumps(report, indent=2, sort_keys=True))
    print(f"{kernel.label}: beta={exp.beta:.4f} A={exp.A:.4f} residual={exp.residual:.2e} "
          f"m2={'finite' if exp.finite_second_moment else 'infinite'} p_F={report['predicted_pF']:.4f}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    cfg = load_run_config(_require_config(args))
    try:
        record = simulate(cfg, _out_dir(args))
    except (ArithmeticError, RuntimeError, ValueError) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    o = record.outcome
    detail = ", ".join(f"{k}={v}" for k, v in o.items() if k != "kind")
    print(f"{record.config_hash[:16]}  {o['kind']}  ({detail})")
    return EXIT_OK


def cmd_sweep(args) -> int:
    plan = load_sweep_plan(_require_config(args))
    out = Path(args.out_dir) if args.out_dir != "." else Path(plan.out_dir)
    res = sweep(plan, out, jobs=args.jobs)
    width = max(len(label) for label in res.labels)
    print(" " * width + "  " + "  ".join(f"p={p:<6g}" for p in res.ps))
    for label, row in zip(res.labels, res.records):
        print(f"{label:<{width}}  " + "  ".join(f"{r['outcome']['kind'][:8]:<8}" for r in row))
    for b in res.brackets:
        print(f"{b.kernel}: p_F~{b.predicted_pF} bracket=[{b.largest_blowup_p}, {b.smallest_decay_p}]"
              f" contains={b.contains_pF}")
    if res.resumed:
        print(f"({res.resumed} cells reused from earlier records)")
    return EXIT_OK


def cmd_verify(args) -> int:
    results = run_suite(seed=args.seed, mass_scale=args.corrupt_normalization)
    (_out_dir(args) / "verify.json").write_text(suite_json(results))
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.name}  ({r.seconds:.2f}s)")
    return EXIT_OK if all(r.passed for r in results) else EXIT_FAIL


def cmd_kaplan(args) -> int:
    path = _require_config(args)
    raw = load_toml(path)
    kernel = _kernel_from(raw, path.parent)
    if "grid" not in raw:
        raise ConfigError("missing [grid] section")
    grid = grid_from_config(raw["grid"])
    u0 = initial_field(raw.get("initial", {"type": "bump"}), grid)
    kap = dict(raw.get("kaplan", {}))
    p = float(kap.pop("p", raw.get("reaction", {}).get("p", 1.0)))
    times = [float(t) for t in kap.pop("times", [1.0, 5.0, 10.0])]
    if kap:
        raise ConfigError(f"unknown [kaplan] keys: {sorted(kap)}")
    if not times or min(times) <= 0:
        raise ConfigError("[kaplan] times must be positive")
    try:
        rep = kaplan_report(kernel, u0, p, times, estimate_expansion(kernel))
    except PreconditionError as exc:
        raise ConfigError(str(exc)) from exc
    rep.to_csv(_out_dir(args) / "kaplan.csv")
    print("t            f             f_dual        lower         upper")
    for row in zip(rep.times, rep.f, rep.f_dual, rep.lower, rep.upper):
        print("  ".join(f"{v:<12.6g}" for v in row))
    print(f"max relative duality gap {rep.max_relative_gap:.2e}")
    return EXIT_OK


def cmd_threshold(args) -> int:
    path = _require_config(args)
    raw = load_toml(path)
    kernel = _kernel_from(raw, path.parent)
    th = dict(raw.get("threshold", {}))
    radii = [float(r) for r in th.pop("radii", [0.5, 1.0, 2.0, 5.0])]
    ps = [float(p) for p in th.pop("p", [2.5, 3.0, 4.0])]
    if th:
        raise ConfigError(f"unknown [threshold] keys: {sorted(th)}")
    if not radii or not ps or min(radii) <= 0 or min(ps) <= 0:
        raise ConfigError("[threshold] radii and p must be nonempty and positive")
    rows = threshold_table(kernel, radii, ps)
    out = _out_dir(args)
    with open(out / "threshold.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=["R", "p", "lambda_min"])
        w.writeheader()
        for row in rows:
            w.writerow({k: repr(v) for k, v in row.items()})
    (out / "threshold.json").write_text(json.dumps({"kernel": kernel.to_config()}, indent=2,
                                                   sort_keys=True))
    for row in rows:
        print(f"R={row['R']:<6g} p={row['p']:<6g} lambda_min={row['lambda_min']:.6f}")
    return EXIT_OK


COMMANDS = {
    "classify-kernel": cmd_classify_kernel,
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
    "verify": cmd_verify,
    "kaplan": cmd_kaplan,
    "threshold": cmd_threshold,
}


def build_parser() -> argparse.ArgumentParser:
    # global flags are accepted before or after the subcommand
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=argparse.SUPPRESS, help="TOML configuration file")
    common.add_argument("--out-dir", default=argparse.SUPPRESS, help="output directory")
    common.add_argument("--jobs", type=int, default=argparse.SUPPRESS, help="parallel sweep workers")
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="seed for Monte Carlo checks")
    common.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)

    parser = argparse.ArgumentParser(prog="fujitalab", parents=[common],
                                     description="Fujita-exponent experiments for nonlocal dispersal.")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "classify-kernel": "fit hat J ~ 1 - A|xi|^beta and report p_F",
        "simulate": "run one configuration",
        "sweep": "run a (kernel, p) phase-diagram sweep",
        "verify": "run the invariant suite",
        "kaplan": "tabulate the Kaplan functional and its bounds",
        "threshold": "tabulate the indicator blow-up threshold",
    }
    for name, text in helps.items():
        sp = sub.add_parser(name, parents=[common], help=text)
        if name == "verify":
            sp.add_argument("--corrupt-normalization", type=float, default=1.0, metavar="FACTOR",
                            help="scale the discrete kernel mass (fault injection)")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    for name, default in (("config", None), ("out_dir", "."), ("jobs", None), ("seed", 0),
                          ("verbose", False)):
        if not hasattr(args, name):
            setattr(args, name, default)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())

