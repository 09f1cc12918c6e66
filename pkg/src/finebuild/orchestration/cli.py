"""Command-line interface.

Verbs: synth, train-sr, super-resolve, cibm-weights, train-cls, eval,
ablate, report. Common flags: --config, --seed, --out, --overwrite, plus
repeatable --set section.key=value overrides. Exit codes: 0 success,
2 configuration error, 3 data error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import sys

from ..errors import ConfigError, DataError, FineBuildError, NumericalError
from .config import load_config
from .pipelines import (
    cmd_ablate,
    cmd_cibm_weights,
    cmd_eval,
    cmd_report,
    cmd_super_resolve,
    cmd_synth,
    cmd_train_cls,
    cmd_train_sr,
)

VERBS = {
    "synth": cmd_synth,
    "train-sr": cmd_train_sr,
    "super-resolve": cmd_super_resolve,
    "cibm-weights": cmd_cibm_weights,
    "train-cls": cmd_train_cls,
    "eval": cmd_eval,
    "ablate": cmd_ablate,
    "report": cmd_report,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="finebuild",
        description="Diffusion super-resolution and imbalance-aware "
        "fine-grained classification pipelines.",
    )
    sub = parser.add_subparsers(dest="verb", required=True)
    for verb in VERBS:
        p = sub.add_parser(verb)
        p.add_argument("--config", default=None, help="run configuration file")
        p.add_argument("--seed", type=int, default=None, help="override run.seed")
        p.add_argument("--out", default=None, help="override run.out")
        p.add_argument(
            "--overwrite", default=None, choices=["true", "false"],
            help="override run.overwrite",
        )
        p.add_argument(
            "--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
            help="override any config value (repeatable)",
        )
    return parser


def _collect_overrides(args) -> dict[tuple[str, str], str]:
    overrides: dict[tuple[str, str], str] = {}
    for item in args.set:
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise ConfigError(f"--set expects SECTION.KEY=VALUE, got {item!r}")
        target, value = item.split("=", 1)
        section, key = target.split(".", 1)
        overrides[(section.strip(), key.strip())] = value
    if args.seed is not None:
        overrides[("run", "seed")] = str(args.seed)
    if args.out is not None:
        overrides[("run", "out")] = args.out
    if args.overwrite is not None:
        overrides[("run", "overwrite")] = args.overwrite
    return overrides


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, _collect_overrides(args))
        out = VERBS[args.verb](cfg)
        print(f"{args.verb}: wrote {out}")
        return 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 4
    except FineBuildError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
