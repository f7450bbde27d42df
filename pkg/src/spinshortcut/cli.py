"""Command-line entry point: ``spinshortcut run|calibrate|sweep``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .drive import AnsatzRejected, PulseAnsatz
from .harness import SCENARIO_KEYS, Scenario, ScenarioError, emit_report, run_scenario
from .params import ParameterError, PhysicalParams, load_config

ANSATZ_KEYS = {"U0_meV": "U0", "a1": "a1", "w1": "w1", "a2": "a2", "w2": "w2"}


def scenario_from_config(path, name=None, out=None, grid=None, steps=None, k_values=None) -> Scenario:
    if path is not None:
        params, extras = load_config(path, SCENARIO_KEYS)
    else:
        params, extras = PhysicalParams(), {}
    given = {ANSATZ_KEYS[k]: float(v) for k, v in extras.items() if k in ANSATZ_KEYS}
    ansatz = None
    if given:
        missing = sorted(set(ANSATZ_KEYS) - set(extras))
        if missing:
            raise ParameterError(f"incomplete ansatz in {path}: missing {', '.join(missing)}")
        ansatz = PulseAnsatz(t_f=params.t_f, **given)
    kw = {}
    if "k_values" in extras:
        kw["k_values"] = tuple(float(k) for k in extras["k_values"].split(","))
    if k_values is not None:
        kw["k_values"] = tuple(float(k) for k in k_values.split(","))
    if "stretch" in extras:
        kw["stretch"] = extras["stretch"]
    grid = grid if grid is not None else int(extras.get("grid", 4001))
    steps = steps if steps is not None else (int(extras["steps"]) if "steps" in extras else None)
    return Scenario(
        name=name or extras.get("scenario", "counterdiabatic"),
        params=params,
        ansatz=ansatz,
        output_dir=Path(out or "out"),
        grid=grid,
        steps=steps,
        **kw,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spinshortcut", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", type=Path, help="key=value parameter file")
        p.add_argument("--out", type=Path, default=Path("out"), help="output directory")
        p.add_argument("--grid", type=int, help="number of time samples (default 4001)")
        p.add_argument("--steps", type=int, help="integrator steps (default 10000 per ns)")

    run = sub.add_parser("run", help="run one scenario")
    common(run)
    run.add_argument("--scenario", choices=["reference", "counterdiabatic", "rotated", "sweep_tf", "calibrate"])
    cal = sub.add_parser("calibrate", help="fit the tanh ansatz to the reported populations and fields")
    common(cal)
    sw = sub.add_parser("sweep", help="stretch t_f by each k and compare H0 with H0 + H1")
    common(sw)
    sw.add_argument("--k", dest="k_values", help="comma separated stretch factors (default 1..8)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    name = {"calibrate": "calibrate", "sweep": "sweep_tf"}.get(args.command, getattr(args, "scenario", None))
    try:
        s = scenario_from_config(args.config, name, args.out, args.grid, args.steps, getattr(args, "k_values", None))
        result = run_scenario(s)
    except (ParameterError, ScenarioError, AnsatzRejected, OSError) as exc:
        print(f"spinshortcut: error: {exc}", file=sys.stderr)
        return 2
    text = emit_report([result], s.output_dir / "report.txt")
    sys.stdout.write(text)
    return 0 if all(c[3] for c in result.checks) else 1


if __name__ == "__main__":
    sys.exit(main())
