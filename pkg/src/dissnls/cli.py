"""Command line entry point: ``dissnls {run,check,resume,describe-config}``.

Config keys can be overridden by dotted path, either ``--set plan.dt=1e-4``
or ``--plan.dt 1e-4``. The exit code is 0 iff every requested check passes.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from . import acceptance
from .harness import ConfigError, ExperimentConfig, resume_experiment, run_many, worker_slots
from .params import sigma_schedule, thresholds, validate_indices


def _extract_dotted(argv: list[str]) -> tuple[list[str], list[str]]:
    """Pull ``--section.key value`` / ``--section.key=value`` out of argv."""
    rest, dotted = [], []
    i = 0
    while i < len(argv):
        tok = argv[i]
        name = tok[2:].split("=", 1)[0] if tok.startswith("--") else ""
        if "." in name:
            if "=" in tok:
                dotted.append(tok[2:])
            elif i + 1 < len(argv):
                dotted.append(f"{name}={argv[i + 1]}")
                i += 1
            else:
                raise ConfigError(f"{tok} needs a value")
        else:
            rest.append(tok)
        i += 1
    return rest, dotted


def _split_overrides(pairs: list[str]) -> dict[str, str]:
    out = {}
    for item in pairs:
        key, sep, val = item.partition("=")
        if not sep:
            raise ConfigError(f"expected key=value, got {item!r}")
        out[key.strip()] = val.strip()
    return out


def _load(path: str | None, overrides: dict[str, str]) -> ExperimentConfig:
    if path is None:
        return ExperimentConfig.from_mapping(overrides=overrides)
    return ExperimentConfig.from_ini(path, overrides)


def _cmd_run(args, overrides) -> int:
    cfgs = [_load(p, overrides) for p in args.configs]
    slots = args.slots or worker_slots()
    results = run_many(cfgs, slots)
    ok = True
    for out_dir, passed, err in results:
        with open(f"{out_dir}/summary.json") as fh:
            summary = json.load(fh)
        print(f"{out_dir}: {summary.get('status')}" + (f" ({err})" if err else ""))
        for c in summary.get("checks", []):
            print(f"  [{'PASS' if c['passed'] else 'FAIL'}] {c['name']}: {c['detail']}")
        ok &= passed
    return 0 if ok else 1


def _cmd_resume(args, overrides) -> int:
    rec = resume_experiment(args.run_dir, overrides)
    print(f"{rec.output_dir}: {rec.status}" + (f" ({rec.error})" if rec.error else ""))
    for c in rec.checks:
        print(f"  [{'PASS' if c.passed else 'FAIL'}] {c.name}: {c.detail}")
    return 0 if rec.passed else 1


def _cmd_check(args, overrides) -> int:
    only = [int(x) for x in args.only.split(",")] if args.only else None
    results = acceptance.acceptance_suite(points=args.points, mutate_sigma=args.mutate_sigma, only=only, workdir=args.workdir)
    print(acceptance.format_report(results))
    if args.json:
        with open(args.json, "w") as fh:
            fh.write(acceptance.report_json(results) + "\n")
    return 0 if all(r.passed for r in results) else 1


def _cmd_describe(args, overrides) -> int:
    cfg = _load(args.config, overrides)
    p, idx = cfg.model_params(), cfg.indices()
    plan = cfg.step_plan()
    print(cfg.to_ini().rstrip())
    print()
    print(f"# config hash   {cfg.config_hash}")
    print(f"# indices       {idx}")
    print(f"# t_end         {plan.t_end!r}  (1 - b t_end = {1 - p.b * plan.t_end:.3g})")
    print(f"# snapshots     {len(plan.snapshot_times) + 2 if plan.snapshot_times else 'every ' + str(plan.snapshot_stride) + ' steps'}")
    rep = validate_indices(p, idx, theorem_mode=cfg.theorem_mode)
    print(f"# index check   {'ok' if rep.ok else '; '.join(rep.violations)}")
    try:
        sched = sigma_schedule(p, idx)
        print(f"# sigma_1       {sched[1]:.6e}   sigma_J {sched[idx.J]:.6f}")
    except (ValueError, ArithmeticError) as exc:
        print(f"# sigma         unavailable: {exc}")
    if p.lambda_re != 0:
        th = thresholds(p, idx)
        print(f"# b0            {th.b0:g}   b1 {th.b1:g}   alpha1 gap {th.alpha1_gap:.3e}")
        print(f"# regime        {'inside' if th.theorem_regime else 'outside'} the proven constant regime")
        for note in th.notes:
            print(f"# note          {note}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="dissnls", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def with_set(sp):
        sp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override a dotted config key")
        return sp

    r = with_set(sub.add_parser("run", help="run one or more configured experiments"))
    r.add_argument("configs", nargs="+", help="INI config files")
    r.add_argument("--slots", type=int, default=None, help="parallel worker slots (default: $DISSNLS_WORKER_SLOTS or 1)")

    c = with_set(sub.add_parser("check", help="run the acceptance suite"))
    c.add_argument("--only", help="comma-separated criterion numbers")
    c.add_argument("--points", type=int, default=2048, help="grid points of the desk-scale grids")
    c.add_argument("--mutate-sigma", action="store_true", help="perturb sigma_1 (canary: criterion 11 must fail)")
    c.add_argument("--json", help="also write a machine-readable report here")
    c.add_argument("--workdir", help="keep run directories here instead of a temporary location")

    s = with_set(sub.add_parser("resume", help="continue a run from its latest checkpoint"))
    s.add_argument("run_dir")

    d = with_set(sub.add_parser("describe-config", help="print the resolved configuration and derived quantities"))
    d.add_argument("config", nargs="?", help="INI config file (defaults when omitted)")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        argv, dotted = _extract_dotted(list(sys.argv[1:] if argv is None else argv))
    except ConfigError as exc:
        ap.error(str(exc))
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        overrides = _split_overrides(args.set + dotted)
        handler = {"run": _cmd_run, "check": _cmd_check, "resume": _cmd_resume, "describe-config": _cmd_describe}[args.command]
        return handler(args, overrides)
    except (ConfigError, FileExistsError, FileNotFoundError, RuntimeError) as exc:
        print(f"dissnls: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
