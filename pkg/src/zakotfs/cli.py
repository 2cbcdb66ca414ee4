"""Command-line entry point ``zakotfs``.

Exit codes: 0 success, 2 config error, 3 sync failure, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import experiments
from .config import default_config, load_config, parse_override
from .exceptions import ConfigError, EqualizationError, IQFormatError, SyncNotFoundError, ZakOTFSError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SYNC = 3
EXIT_NUMERICAL = 4

_RUNNERS = {
    "ber-sweep": lambda cfg, out, args: experiments.run_ber_sweep(cfg, out),
    "papr": lambda cfg, out, args: experiments.run_papr_compare(cfg, out),
    "isac-sense": lambda cfg, out, args: experiments.run_isac_sense(cfg, out).summary,
    "loopback": lambda cfg, out, args: experiments.run_loopback(cfg, out).summary,
    "demod-capture": lambda cfg, out, args: experiments.run_demod_capture(cfg, args.capture, out).summary,
}


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON experiment config")
    p.add_argument("--seed", type=int, help="base seed (overrides config)")
    p.add_argument("--out", help="output directory (overrides config out_dir)")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                   help="override a config field by dotted path; value parsed as JSON when possible")
    p.add_argument("--oversample", type=int, help="PAPR oversampling factor")
    p.add_argument("--threshold", type=float, help="header detection threshold")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="zakotfs", description="Zak-OTFS link simulations and capture processing")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _RUNNERS:
        p = sub.add_parser(name)
        _common(p)
        if name == "demod-capture":
            p.add_argument("capture", nargs="?", help="IQ file (overrides capture.path)")
    g = sub.add_parser("gen-config", help="print a default config for a mode")
    g.add_argument("--mode", default="ber-sweep", help="experiment mode")
    g.add_argument("--out", help="write config.json into this directory instead of stdout")
    return parser


def _overrides(args) -> list[tuple]:
    pairs = [parse_override(text) for text in args.overrides]
    pairs.insert(0, ("mode", args.command))
    if args.seed is not None:
        pairs.append(("seed", args.seed))
    if args.oversample is not None:
        pairs.append(("papr.oversample", args.oversample))
    if args.threshold is not None:
        pairs.append(("sync.threshold", args.threshold))
    if args.out is not None:
        pairs.append(("out_dir", args.out))
    return pairs


def _gen_config(args) -> int:
    text = default_config(args.mode).to_json()
    if args.out:
        path = Path(args.out) / "config.json"
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "gen-config":
            return _gen_config(args)
        base = None if args.config else default_config(args.command).to_dict()
        cfg = load_config(args.config, _overrides(args), base=base)
        result = _RUNNERS[args.command](cfg, Path(cfg.out_dir), args)
    except (ConfigError, IQFormatError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SyncNotFoundError as exc:
        print(f"sync failure: {exc}", file=sys.stderr)
        return EXIT_SYNC
    except (EqualizationError, ZakOTFSError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    print(json.dumps(result, indent=2, default=str))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
