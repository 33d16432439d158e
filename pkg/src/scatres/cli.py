"""Batch front end: config in, CSV/JSON/binary artifacts plus manifest out.

Subcommands cover the pipeline stage by stage (simulate, section,
pressure, quantize, resonances, weyl) or end to end (all).  Runs are
deterministic for a fixed config and seed; the manifest records the
config hash, the seed, library versions, and a content hash per artifact.

Exit codes: 0 success, 1 config error, 2 numeric failure, 3 failed
consistency check.
"""

import argparse
import sys
from pathlib import Path

import numpy as np

from .config import load_config
from .errors import (
    BoundaryAmbiguityError,
    ConfigError,
    ConsistencyError,
    ScatresError,
)
from .io import write_manifest
from .pipeline import STAGES, stages_available


def _parser():
    p = argparse.ArgumentParser(
        prog="scatres",
        description="chaotic-scattering resonance pipeline")
    p.add_argument("subcommand",
                   choices=sorted(STAGES) + ["all"],
                   help="pipeline stage to run")
    p.add_argument("--config", required=True, help="TOML run configuration")
    p.add_argument("--out", default=None, help="output directory")
    p.add_argument("--seed", type=int, default=None,
                   help="override run.seed from the config")
    p.add_argument("--threads", type=int, default=1,
                   help="worker cap (stages currently run serially)")
    p.add_argument("--verbose", action="store_true")
    return p


def run(subcommand, config_path, out=None, seed=None, verbose=False):
    """Programmatic entry point mirroring the command line.

    Returns the process exit status (0 success, 1 config error, 2 numeric
    failure, 3 failed consistency check) and writes the same artifacts.
    """
    argv = [subcommand, "--config", str(config_path)]
    if out is not None:
        argv += ["--out", str(out)]
    if seed is not None:
        argv += ["--seed", str(seed)]
    if verbose:
        argv.append("--verbose")
    return main(argv)


def main(argv=None):
    args = _parser().parse_args(argv)
    try:
        config = load_config(args.config)
    except ConfigError as exc:
        for line in exc.problems:
            print(f"config error: {line}", file=sys.stderr)
        return 1

    seed = args.seed if args.seed is not None else config.section("run").get("seed", 0)
    out_dir = Path(args.out or config.section("run").get("out_dir", "scatres_out"))
    out_dir.mkdir(parents=True, exist_ok=True)

    if args.subcommand == "all":
        stages = [s for s in ("simulate", "section", "pressure", "quantize",
                              "resonances", "weyl")
                  if s in stages_available(config)]
        if not stages:
            print("config error: no stage has its required tables",
                  file=sys.stderr)
            return 1
    else:
        stages = [args.subcommand]

    artifacts = []
    try:
        for name in stages:
            if args.verbose:
                print(f"[scatres] running {name}", file=sys.stderr)
            _, files = STAGES[name](config, out_dir)
            artifacts.extend(files)
    except ConfigError as exc:
        for line in exc.problems:
            print(f"config error: {line}", file=sys.stderr)
        return 1
    except (ConsistencyError, BoundaryAmbiguityError) as exc:
        print(f"consistency failure in {name}: {exc}", file=sys.stderr)
        return 3
    except (ScatresError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numeric failure in {name}: {exc}", file=sys.stderr)
        return 2

    write_manifest(out_dir, config.text, seed, artifacts)
    if args.verbose:
        print(f"[scatres] wrote {len(artifacts) + 1} artifacts to {out_dir}",
              file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
