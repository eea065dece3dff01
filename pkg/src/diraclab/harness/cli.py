"""Command-line interface.

One subcommand per estimator plus ``validate``; each binds a config file and
accepts overrides.  Exit codes: 0 success, 1 validation error, 2 compute
failure beyond the threshold.
"""

from __future__ import annotations

import argparse
import json
import sys

from ..errors import DiraclabError, SchemaError
from .config import ESTIMATOR_KEYS, load_config, validate_config
from .runner import run_experiment

SUBCOMMANDS = list(ESTIMATOR_KEYS) + ["validate"]


def build_parser():
    ap = argparse.ArgumentParser(
        prog="diraclab",
        description="experiments on randomly perturbed gapped Dirac-type models")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="experiment config file")
        p.add_argument("--seed", type=int, default=None, help="base seed override")
        p.add_argument("--samples", type=int, default=None)
        p.add_argument("--workers", type=int, default=None)
        p.add_argument("--out", default=None, help="output directory override")
        p.add_argument("--overwrite", action="store_true", default=None)
    return ap


def main(argv=None):
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return 1 if exc.code not in (0, None) else 0
    overrides = {"base_seed": args.seed, "samples": args.samples,
                 "workers": args.workers, "out": args.out,
                 "overwrite": args.overwrite}
    try:
        cfg = load_config(args.config, overrides=overrides)
    except SchemaError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    if args.command == "validate":
        try:
            validate_config(cfg)
        except (SchemaError, DiraclabError) as exc:
            print(f"invalid: {exc}", file=sys.stderr)
            return 1
        print(f"ok: estimator={cfg.estimator} hash={cfg.config_hash()}")
        return 0
    if cfg.estimator != args.command:
        print(f"config declares estimator {cfg.estimator!r}, "
              f"but the {args.command!r} subcommand was invoked",
              file=sys.stderr)
        return 1
    try:
        manifest = run_experiment(cfg)
    except SchemaError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return 1
    except DiraclabError as exc:
        print(f"compute failure: {exc}", file=sys.stderr)
        return 2
    print(json.dumps({"estimator": manifest.estimator,
                      "items": len(manifest.items),
                      "failures": len(manifest.failures),
                      "rows": manifest.n_rows,
                      "outputs": manifest.output_files}, indent=1))
    return 0


if __name__ == "__main__":
    sys.exit(main())
