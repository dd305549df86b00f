"""Command line entry point: ``nore {pretrain,run,sweep,report}``.

Failures print one line, ``error: <Kind>: <message>``, to stderr and exit 1.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .config import ConfigError, load_config, parse_period, period_label, profile_config
from .experiment import CHECKPOINT_STEM, pretrain_world_model, run_cell, run_sweep, smoothed


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nore", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="key = value config file with sections")
    common.add_argument("--seed", type=int)
    common.add_argument("--out", type=Path, help="output directory")
    common.add_argument("--profile", choices=("desk", "paper"))
    common.add_argument("--mechanism", choices=("nore", "pepper", "baseline-G"))
    common.add_argument("--reset-period", help="integer steps or 'never'")
    common.add_argument("--checkpoint", type=Path,
                        help="checkpoint stem (default: <out>/pretrain/world_model)")
    common.add_argument("--jobs", type=int, default=1, help="parallel sweep cells")
    common.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="verb", required=True)
    for verb, text in (("pretrain", "train the world model"),
                       ("run", "preference learning for one mechanism and reset period"),
                       ("sweep", "all mechanisms x reset periods x seeds"),
                       ("report", "rebuild figures and manifest from sweep CSVs")):
        sub.add_parser(verb, parents=[common], help=text)
    return parser


def _config(args):
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
        overrides["seeds"] = (args.seed,)
    if args.mechanism:
        overrides["mechanism"] = args.mechanism
    if args.reset_period is not None:
        overrides["reset_period"] = parse_period(args.reset_period)
    if args.out is not None:
        overrides["out_dir"] = str(args.out)
    if args.config is not None:
        if args.profile:
            overrides["profile"] = args.profile
        return load_config(args.config, **overrides)
    return profile_config(args.profile or "desk", **overrides)


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _config(args)
        out = Path(cfg.out_dir)
        ckpt = args.checkpoint or out / "pretrain" / CHECKPOINT_STEM
        if args.verb == "pretrain":
            res = pretrain_world_model(cfg, out / "pretrain")
            elbo = [d["elbo"] for d in res.diagnostics]
            print(json.dumps({"checkpoint": str(res.checkpoint),
                              "reconstruction_accuracy": res.reconstruction_accuracy,
                              "elbo_initial": float(smoothed(elbo)[0]) if elbo else None,
                              "elbo_final": float(smoothed(elbo)[-1]) if elbo else None}))
        elif args.verb == "run":
            if not ckpt.with_suffix(".json").exists():
                raise FileNotFoundError(f"missing checkpoint {ckpt}")
            rec = run_cell(cfg, ckpt, cfg.mechanism, cfg.reset_period, cfg.seed, out / "runs")
            print(json.dumps({"mechanism": rec.mechanism,
                              "reset_period": period_label(rec.reset_period),
                              "files": rec.files}))
        elif args.verb == "sweep":
            rep = run_sweep(cfg, ckpt, out / "sweep", jobs=args.jobs)
            print(json.dumps({"manifest": str(rep.manifest), "cells": len(rep.records)}))
        elif args.verb == "report":
            from .figures import emit_figures
            files = emit_figures(out / "sweep")
            print(json.dumps({"figures": files}))
    except (ConfigError, FileNotFoundError, ValueError, RuntimeError, ArithmeticError) as exc:
        msg = str(exc).replace("\n", " ")
        print(f"error: {type(exc).__name__}: {msg}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
