#!/usr/bin/env python3
"""Run every order-of-accuracy sweep on the MMH model and write CSV + JSON reports.

    python scripts/run_sweeps.py --out results/
"""

import argparse
import json
import pathlib
import sys

from cspkit.harness import Experiment, report_csv, run_sweep, summary_line, table_report
from cspkit.manifold import GridSpec

PLAN = [
    ("manifold_error", (0, 1, 2), {}),
    ("fiber_angle", (0, 1, 2), {"policy": "current"}),
    ("fiber_angle", (1, 2), {"policy": "previous"}),
    ("lambda21_decay", (0, 1, 2), {}),
    ("lambda12_decay", (1, 2), {}),
    ("invariance_defect", (0, 1, 2), {}),
    ("oracle_diff", (1, 2), {"grid": GridSpec.uniform(0.5, 2.0, 16)}),
    ("projection_error", (1,), {"scheme": "fiber_search", "grid": GridSpec.uniform(0.1, 2.0, 64)}),
    ("projection_error", (1,), {"scheme": "vertical_base", "grid": GridSpec.uniform(0.1, 2.0, 64)}),
]


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", default="results", help="output directory")
    parser.add_argument("--mode", default="two_step", choices=("two_step", "one_step"))
    args = parser.parse_args(argv)
    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    reports = []
    for name, orders, extra in PLAN:
        for q in orders:
            exp = Experiment(name, q=q, mode=args.mode, **extra)
            report = table_report(run_sweep(exp))
            tag = "_".join(str(v) for v in (name, f"q{q}", extra.get("policy", ""), extra.get("scheme", "")) if v)
            (out / f"{tag}.csv").write_text(report_csv(report))
            reports.append(report)
            print(summary_line(report), flush=True)
    (out / "reports.json").write_text(json.dumps(reports, indent=2))
    return 0 if all(r["pass"] for r in reports) else 1


if __name__ == "__main__":
    sys.exit(main())
