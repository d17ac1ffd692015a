"""Command-line entry point: ``cspkit <command> [options]``.

Exit codes: 0 when every threshold checked by the command passes, 1 when
one fails, 2 for usage errors.
"""

from __future__ import annotations

import argparse
import io
import json
import logging
import sys
from typing import Optional, Sequence

import numpy as np

from .config import RunConfig, load_config
from .engine import build_stack
from .errors import CSPError
from .fibers import CURRENT, PREVIOUS, extract_cspf, write_frames_csv
from .harness import EXPERIMENTS, Experiment, report_csv, run_sweep, summary_line, table_report
from .manifold import GridSpec, build_cspm, write_cspm_csv
from .projection import SCHEMES, project, shooting_base, slow_phase_error
from .systems import SYSTEMS, get_system

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

MMH_VALIDATION_GRID = GridSpec.uniform(0.5, 2.0, 16)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _floats(text: str) -> tuple:
    try:
        return tuple(float(v) for v in text.replace(",", " ").split())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _add_common(p):
    p.add_argument("--config", help="flat key=value config file; flags override it")
    p.add_argument("--system", choices=SYSTEMS)
    p.add_argument("--kappa", type=float)
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--q", type=int)
    p.add_argument("--mode", choices=("two_step", "one_step"))
    p.add_argument("--grid-min", type=_floats)
    p.add_argument("--grid-max", type=_floats)
    p.add_argument("--grid-nodes", type=int)
    p.add_argument("--out")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="cspkit", description="Computational Singular Perturbation experiments")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("validate-mmh", help="compare numerics with the MMH closed forms")
    p.add_argument("--json", help="write the reports to this file")

    p = sub.add_parser("sweep", help="run an eps sweep and fit the order")
    _add_common(p)
    p.add_argument("--exp", required=True, choices=EXPERIMENTS)
    p.add_argument("--policy", choices=(CURRENT, PREVIOUS))
    p.add_argument("--scheme", choices=SCHEMES)
    p.add_argument("--eps", type=_floats, help="eps values (default: the experiment's window)")
    p.add_argument("--x0", type=_floats)
    p.add_argument("--horizon", type=float)
    p.add_argument("--json", help="write the JSON report here")

    p = sub.add_parser("manifold", help="tabulate the order-q CSP manifold")
    _add_common(p)
    p.add_argument("--eps", type=float, required=True)

    p = sub.add_parser("fibers", help="tabulate fast fiber frames along the CSP manifold")
    _add_common(p)
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--policy", choices=(CURRENT, PREVIOUS))

    p = sub.add_parser("project", help="project an initial condition along CSP fibers")
    _add_common(p)
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--x0", type=_floats, required=True)
    p.add_argument("--scheme", choices=SCHEMES)
    p.add_argument("--oracle", action="store_true", help="also measure slow-phase error against shooting")
    p.add_argument("--horizon", type=float)

    p = sub.add_parser("report", help="print JSON sweep reports as a table")
    p.add_argument("files", nargs="+")
    return parser


def _resolve(args) -> RunConfig:
    cfg = load_config(args.config) if getattr(args, "config", None) else RunConfig()
    mapping = {"system": "system", "kappa": "kappa", "lam": "lam", "q": "q", "mode": "mode",
               "policy": "policy", "scheme": "scheme", "grid_min": "grid_min", "grid_max": "grid_max",
               "grid_nodes": "grid_nodes", "out": "out", "x0": "x0", "horizon": "horizon"}
    for arg, attr in mapping.items():
        value = getattr(args, arg, None)
        if value is not None:
            setattr(cfg, attr, value)
    eps = getattr(args, "eps", None)
    if isinstance(eps, tuple):
        cfg.eps_list = eps
    return cfg


def _grid(cfg: RunConfig, sys_def) -> GridSpec:
    lo = cfg.grid_min if cfg.grid_min is not None else tuple(sys_def.domain_K[0])
    hi = cfg.grid_max if cfg.grid_max is not None else tuple(sys_def.domain_K[1])
    return GridSpec.uniform(lo, hi, cfg.grid_nodes or 33)


def _cmd_sweep(args, out) -> int:
    cfg = _resolve(args)
    sys_def = get_system(cfg.system, **cfg.system_params())
    exp = Experiment(args.exp, q=cfg.q, policy=cfg.policy, mode=cfg.mode, scheme=cfg.scheme,
                     system=cfg.system, params=cfg.system_params(), grid=_grid(cfg, sys_def),
                     x0=cfg.x0, horizon=cfg.horizon)
    table = run_sweep(exp, cfg.eps_list)
    report = table_report(table)
    text = report_csv(report)
    if cfg.out:
        with open(cfg.out, "w", newline="") as fh:
            fh.write(text)
    else:
        out.write(text)
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(report, fh, indent=2)
    for f in table.failures:
        out.write(f"failed eps={f['eps']!r}: {f['reason']}\n")
    out.write(summary_line(report) + "\n")
    return EXIT_OK if report["pass"] else EXIT_FAIL


def _cmd_validate(args, out) -> int:
    reports = []
    for q in (1, 2):
        exp = Experiment("oracle_diff", q=q, system="mmh", grid=MMH_VALIDATION_GRID)
        report = table_report(run_sweep(exp))
        reports.append(report)
        out.write(summary_line(report) + "\n")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(reports, fh, indent=2)
    return EXIT_OK if all(r["pass"] for r in reports) else EXIT_FAIL


def _cmd_manifold(args, out) -> int:
    cfg = _resolve(args)
    sys_def = get_system(cfg.system, **cfg.system_params())
    table = build_cspm(sys_def, build_stack(sys_def, cfg.q, cfg.mode), _grid(cfg, sys_def), args.eps)
    if cfg.out:
        write_cspm_csv(table, cfg.out)
        out.write(f"wrote {table.node_values.shape[0]} nodes of psi_{table.order} to {cfg.out}\n")
    else:
        buf = io.StringIO()
        for y, z in zip(table.nodes, table.node_values):
            buf.write(",".join(repr(float(v)) for v in (*y, *z)) + "\n")
        out.write(buf.getvalue())
    return EXIT_OK


def _cmd_fibers(args, out) -> int:
    cfg = _resolve(args)
    sys_def = get_system(cfg.system, **cfg.system_params())
    stack = build_stack(sys_def, cfg.q, cfg.mode)
    table = build_cspm(sys_def, stack, _grid(cfg, sys_def), args.eps)
    frames = [extract_cspf(stack, table, table.parent, y, args.eps, cfg.policy) for y in table.nodes]
    if cfg.out:
        write_frames_csv(frames, cfg.out)
        out.write(f"wrote {len(frames)} frames to {cfg.out}\n")
    else:
        for fr in frames:
            out.write(",".join(repr(float(v)) for v in (*fr.base.vector, *fr.columns.T.reshape(-1))) + "\n")
    return EXIT_OK


def _cmd_project(args, out) -> int:
    cfg = _resolve(args)
    sys_def = get_system(cfg.system, **cfg.system_params())
    if len(cfg.x0) != sys_def.dim:
        raise CSPError(f"x0 needs {sys_def.dim} entries for {cfg.system}")
    stack = build_stack(sys_def, max(cfg.q, 2) if args.oracle else cfg.q, cfg.mode)
    top = build_cspm(sys_def, stack, _grid(cfg, sys_def), args.eps)
    table = top
    while table.order > cfg.q:
        table = table.parent
    result = project(np.array(cfg.x0), table, stack.at_level(cfg.q), args.eps, cfg.scheme)
    err = None
    if args.oracle:
        oracle = shooting_base(sys_def, cfg.x0, top, args.eps)
        err = slow_phase_error(sys_def, oracle.vector, result.base.vector, args.eps, cfg.horizon)
    record = result.to_record(cfg.x0, err)
    text = json.dumps(record, indent=2) + "\n"
    if cfg.out:
        with open(cfg.out, "w") as fh:
            fh.write(text)
    out.write(text)
    return EXIT_OK


def _cmd_report(args, out) -> int:
    reports = []
    for path in args.files:
        with open(path) as fh:
            data = json.load(fh)
        reports.extend(data if isinstance(data, list) else [data])
    header = f"{'experiment':<18} {'q':>2} {'points':>6} {'slope':>8} {'r2':>9}  result"
    out.write(header + "\n" + "-" * len(header) + "\n")
    for r in reports:
        slope = "n/a" if r.get("slope") is None else f"{r['slope']:.4f}"
        r2 = "n/a" if r.get("r2") is None else f"{r['r2']:.6f}"
        out.write(f"{r['experiment']:<18} {r['params'].get('q', ''):>2} {len(r['rows']):>6} {slope:>8} {r2:>9}  "
                  f"{'PASS' if r['pass'] else 'FAIL'}\n")
    return EXIT_OK if all(r["pass"] for r in reports) else EXIT_FAIL


_COMMANDS = {
    "validate-mmh": _cmd_validate,
    "sweep": _cmd_sweep,
    "manifold": _cmd_manifold,
    "fibers": _cmd_fibers,
    "project": _cmd_project,
    "report": _cmd_report,
}


def run_cli(argv: Optional[Sequence[str]] = None, out=None) -> int:
    out = sys.stdout if out is None else out
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return _COMMANDS[args.command](args, out)
    except CSPError as exc:
        sys.stderr.write(f"cspkit: {type(exc).__name__}: {exc}\n")
        return EXIT_FAIL
    except (ValueError, KeyError, OSError) as exc:
        sys.stderr.write(f"cspkit: error: {exc}\n")
        return EXIT_USAGE


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
