"""Command line entry point: ``ewslab <fig1|fig2|fig3|theorem> --config FILE``.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 empty analysis window.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace

from .config import load_config
from .errors import ConfigError, EmptyAnalysisWindow, NumericalError
from .experiments import RUNNERS, write_outputs

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_EMPTY = 0, 2, 3, 4


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ewslab", description=__doc__.splitlines()[0])
    ap.add_argument("experiment", choices=sorted(RUNNERS))
    ap.add_argument("--config", help="sectioned key = value file (defaults if omitted)")
    ap.add_argument("--out", help="output directory (overrides experiment.output_dir)")
    ap.add_argument("--seed", type=int, help="master seed, unsigned 64-bit")
    ap.add_argument("--svg", action="store_true", help="also write SVG plots")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config)
        cfg = replace(cfg, experiment=args.experiment)
        if args.seed is not None:
            cfg = replace(cfg, sim=replace(cfg.sim, seed=args.seed))
        if args.svg:
            cfg = replace(cfg, emit_svg=True)
        if args.out:
            cfg = replace(cfg, output_dir=args.out)
        cfg.validate()
    except (ConfigError, OSError) as exc:
        print(f"ewslab: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        result = RUNNERS[args.experiment](cfg)
    except EmptyAnalysisWindow as exc:
        print(f"ewslab: empty analysis window: {exc}", file=sys.stderr)
        return EXIT_EMPTY
    except NumericalError as exc:
        print(f"ewslab: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    out = write_outputs(result, cfg, cfg.output_dir)
    print(json.dumps({"experiment": result.name, "output_dir": str(out), **result.summary}, sort_keys=True))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
