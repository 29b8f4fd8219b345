"""Command-line entry point.

    nomaris run [config.json] --seed 3 --baseline Proposed --out runs/
    nomaris sweep config.json --out sweep/
    nomaris beampattern [config.json] --out bp/ --steps 50
    nomaris selftest

Exit codes: 0 success, 2 infeasible scenario, 1 any other error.
"""

import argparse
import json
import os
import sys

from .orchestrator import (default_grid, emit_beampattern, prepare, run_baseline,
                           run_experiment, split_experiment)
from .scenario import InfeasibleScenario, PRESETS, preset

EXIT_OK, EXIT_ERROR, EXIT_INFEASIBLE = 0, 1, 2

def _load(args):
    """``(cfg, experiment_section)`` from the config file, or the preset."""
    if args.config:
        with open(args.config) as fh:
            data = json.load(fh)
        if args.preset:
            base = dict(PRESETS[args.preset])
            base.update(data)
            data = base
        return split_experiment(data)
    return preset(args.preset or "desk"), {}

def _seeds(args, exp, cfg):
    if args.seed is not None:
        return [args.seed]
    return list(exp.get("seeds", [cfg.seed]))

def _finish(results):
    return EXIT_INFEASIBLE if any(r.status == "Infeasible" for r in results) else EXIT_OK

def cmd_run(args):
    cfg, exp = _load(args)
    seeds = _seeds(args, exp, cfg)
    baselines = args.baseline or exp.get("baselines", ["Proposed"])
    results = run_experiment(cfg, args.out, seeds=seeds, baselines=baselines, sweep={},
                             timing=not args.no_timing)
    for r in results:
        if r.design is not None:
            name = f"design_seed{r.seed}_{r.baseline.replace(':', '-')}.json"
            with open(os.path.join(args.out, name), "w") as fh:
                json.dump(r.design.to_dict(), fh)
        print(f"seed={r.seed} baseline={r.baseline} status={r.status} sum_rate={r.sum_rate:.4f}"
              + (f" ({r.message})" if r.status == "Infeasible" else ""))
    return _finish(results)

def cmd_sweep(args):
    cfg, exp = _load(args)
    results = run_experiment(cfg, args.out, seeds=_seeds(args, exp, cfg),
                             baselines=args.baseline or exp.get("baselines", ["Proposed"]),
                             sweep=exp.get("sweep") or {}, timing=not args.no_timing)
    print(f"{len(results)} cells written to {os.path.join(args.out, 'summary.csv')}")
    return _finish(results)

def cmd_beampattern(args):
    cfg, exp = _load(args)
    seed = _seeds(args, exp, cfg)[0]
    c, ch, v0 = prepare(cfg, seed)
    design, trace = run_baseline(args.baseline[0] if args.baseline else "Proposed", c, ch, v0=v0)
    if not hasattr(design, "W"):
        raise ValueError("beampattern needs a single shared design (not a time-shared baseline)")
    os.makedirs(args.out, exist_ok=True)
    grid = default_grid(c, args.steps)
    emit_beampattern(c, ch, design, grid, os.path.join(args.out, "beampattern_xy.csv"))
    emit_beampattern(c, ch, design, {"theta_min": -90.0, "theta_max": 90.0, "steps": 181},
                     os.path.join(args.out, "beampattern_angle.csv"))
    print(f"seed={seed} status={trace.status.value}; beampatterns written to {args.out}")
    return EXIT_OK

def cmd_selftest(args):
    from . import selftest

    ok = selftest.run(print)
    return EXIT_OK if ok else EXIT_ERROR

def build_parser():
    p = argparse.ArgumentParser(prog="nomaris", description="RIS-assisted NOMA-ISAC joint beamforming")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config_required=False):
        sp.add_argument("config", nargs=None if config_required else "?",
                        help="JSON config (keys as SystemConfig fields, optional 'experiment')")
        sp.add_argument("--preset", choices=sorted(PRESETS), help="base parameter set")
        sp.add_argument("--seed", type=int, help="run only this seed")
        sp.add_argument("--baseline", action="append",
                        help="baseline to run (repeatable), e.g. Proposed, DiscretePhase:3, WithoutNoma:tin")
        sp.add_argument("--out", default="out", help="output directory")
        sp.add_argument("--no-timing", action="store_true",
                        help="write wall_ms as 0 so repeated runs are byte-identical")

    common(sub.add_parser("run", help="one scenario, one or more baselines"))
    common(sub.add_parser("sweep", help="seeds x baselines x one swept parameter"), True)
    bp = sub.add_parser("beampattern", help="optimize, then write beampattern CSVs")
    common(bp)
    bp.add_argument("--steps", type=int, default=50, help="grid points per axis")
    sub.add_parser("selftest", help="quick numerical self-checks")
    return p

def main(argv=None):
    args = build_parser().parse_args(argv)
    handler = {"run": cmd_run, "sweep": cmd_sweep, "beampattern": cmd_beampattern,
               "selftest": cmd_selftest}[args.command]
    try:
        return handler(args)
    except InfeasibleScenario as exc:
        print(f"infeasible scenario: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR

if __name__ == "__main__":
    sys.exit(main())
