"""Command-line entry point.

Usage::

    pvtwin [--config PATH] [--seed N] [--out DIR] <stage>

where ``<stage>`` is one of simulate, losses, synth, inject, train,
detect, report, or ``run`` for the whole chain. Success prints the
stage manifests as JSON; failure prints ``{"error": ..., "message": ...}``
to stderr and exits non-zero.
"""
from __future__ import annotations

import argparse
import json
import sys

from .config import STAGES, load_config
from .errors import MissingArtifactError, PVTwinError
from .pipeline import run_pipeline

EXIT_ERROR = 1
EXIT_USAGE = 2


def _global_flags(parser, suppress=False):
    default = argparse.SUPPRESS if suppress else None
    parser.add_argument("--config", metavar="PATH", default=default,
                        help="run configuration JSON (default: bundled reference config)")
    parser.add_argument("--seed", type=int, metavar="N", default=default,
                        help="override the master seed")
    parser.add_argument("--out", metavar="DIR", default=argparse.SUPPRESS if suppress else "out",
                        help="artifact directory (default: ./out)")


def build_parser():
    parser = argparse.ArgumentParser(prog="pvtwin", description=__doc__.split("\n")[0])
    _global_flags(parser)
    sub = parser.add_subparsers(dest="command", required=True, metavar="<stage>")
    helps = {
        "simulate": "monitoring history and model baseline",
        "losses": "daily loss archive and soiling analysis",
        "synth": "synthetic weather blocks",
        "inject": "production with sampled losses and injected faults",
        "train": "neural estimators with k-fold cross-validation",
        "detect": "threshold bands and fault detection scores",
        "report": "summary report and plot data",
        "run": "all stages in order",
    }
    for name in (*STAGES, "run"):
        p = sub.add_parser(name, help=helps[name])
        _global_flags(p, suppress=True)
    return parser


def _error(kind, message, **extra):
    doc = {"error": kind, "message": message, **extra}
    print(json.dumps(doc, sort_keys=True, default=str), file=sys.stderr)


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        if exc.code not in (0, None):
            _error("usage_error", "invalid command line")
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg = cfg.with_seed(args.seed)
        stages = STAGES if args.command == "run" else (args.command,)
        manifests = run_pipeline(cfg, args.out, stages)
    except MissingArtifactError as exc:
        _error(exc.kind, str(exc), stage=exc.stage, path=exc.path)
        return EXIT_ERROR
    except PVTwinError as exc:
        _error(exc.kind, str(exc), **getattr(exc, "diagnostics", {}))
        return EXIT_ERROR
    except (OSError, ValueError) as exc:
        _error("error", str(exc))
        return EXIT_ERROR
    print(json.dumps({"status": "ok", "stages": manifests}, indent=1, sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
