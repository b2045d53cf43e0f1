"""Command line entry point: simulate, sweep, preset, tomo."""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import runner
from .nmrtools import reconstruct, tomograph
from .runner import ConfigError


def _simulate(args) -> int:
    cfg = runner.scenario_from_dict(runner.load_json(args.config))
    traj = runner.run_scenario(cfg, threads=args.threads)
    runner.emit(traj, args.format, args.out)
    return 0


def _sweep(args) -> int:
    cfg = runner.sweep_from_dict(runner.load_json(args.config))
    table = runner.run_sweep(cfg, threads=args.threads)
    runner.emit(table, args.format, args.out)
    return 0


def _preset(args) -> int:
    cfg = runner.preset(args.name, couplings=args.couplings)
    if isinstance(cfg, runner.SweepConfig):
        doc = runner.sweep_to_dict(cfg)
    else:
        doc = runner.scenario_to_dict(cfg)
    text = json.dumps(doc, indent=2) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    if args.print or not args.out:
        sys.stdout.write(text)
    return 0


def _tomo(args) -> int:
    cfg = runner.scenario_from_dict(runner.load_json(args.config))
    traj = runner.run_scenario(cfg, threads=args.threads, with_discord=False)
    rho = traj.states[-1]
    record = tomograph(rho)
    rebuilt = reconstruct(record)
    out = {
        "time_ms": float(traj.times[-1] * 1e3),
        "record": record,
        "frobenius_error": float(np.linalg.norm(rebuilt - rho)),
    }
    sys.stdout.write(json.dumps(out, indent=2) + "\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="blockadesim", description=__doc__)
    ap.add_argument("--threads", type=int, default=1, help="cap on worker threads (results do not depend on it)")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run a scenario config and write the trajectory")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--format", choices=["csv", "json"], default="csv")
    p.set_defaults(func=_simulate)

    p = sub.add_parser("sweep", help="run a drive-amplitude sweep config")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--format", choices=["csv", "json"], default="csv")
    p.set_defaults(func=_sweep)

    p = sub.add_parser("preset", help="emit a named scenario as a JSON config")
    p.add_argument("--name", required=True, choices=runner.PRESETS)
    p.add_argument("--couplings", help="JSON file with a 'couplings' matrix (Hz) for three-qubit presets")
    p.add_argument("--print", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=_preset)

    p = sub.add_parser("tomo", help="tomography roundtrip on the final state of a scenario")
    p.add_argument("--config", required=True)
    p.set_defaults(func=_tomo)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads < 1:
        print("error: --threads must be at least 1", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
