"""``latent-forge`` command-line entry point.

Exit codes: 0 on success, 2 for usage or configuration problems, 3 for
numeric failures.
"""

import argparse
import json
import os
import sys
import time

import numpy as np

from . import __version__
from .commands import COMMANDS
from .config import DEFAULTS, PRESETS, ConfigError, resolve
from .errors import InvalidArgument, LoadFailure, NumericFailure
from .gradcheck import run_suite
from .storage import write_csv

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 2, 3
MANIFEST = "run_manifest.json"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def build_parser():
    p = _Parser(prog="latent-forge", description="Deep-kernel active learning experiments.")
    p.add_argument("--version", action="version", version=f"latent-forge {__version__}")
    p.add_argument("command", choices=sorted(DEFAULTS))
    p.add_argument("--config", help="JSON config document or a previous run_manifest.json")
    p.add_argument("--set", dest="sets", action="append", default=[], metavar="KEY=VALUE",
                   help="dot-path override, value parsed as JSON when possible")
    p.add_argument("--preset", default="full-scale", choices=sorted(PRESETS))
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--quiet", action="store_true")
    return p


def cmd_grad_check(cfg, out, progress=None):
    results = run_suite(int(cfg["seeds"]), int(cfg["seed"]))
    tol = float(cfg["tolerance"])
    rows = {"suite": [], "seed": [], "relative_error": [], "pass": []}
    for name, errs in results.items():
        for s, e in enumerate(errs):
            rows["suite"].append(name)
            rows["seed"].append(int(cfg["seed"]) + s)
            rows["relative_error"].append(e)
            rows["pass"].append(int(e < tol))
    write_csv(os.path.join(out, "grad_check.csv"), list(rows), rows)
    worst = max(max(v) for v in results.values())
    if progress:
        for name, errs in results.items():
            progress(f"{name}: max relative error {max(errs):.3e}")
    if not worst < tol:
        raise NumericFailure(f"gradient check failed: worst relative error {worst:.3e} >= {tol}")
    return ["grad_check.csv"]


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def run(argv=None):
    args = build_parser().parse_args(argv)
    cfg = resolve(args.command, args.preset, args.config, args.sets)
    try:
        os.makedirs(args.out, exist_ok=True)
        probe = os.path.join(args.out, ".write-probe")
        with open(probe, "w"):
            pass
        os.remove(probe)
    except OSError as exc:
        raise ConfigError(f"output directory {args.out!r} is not writable: {exc}") from None

    def progress(msg):
        if not args.quiet:
            print(f"[{args.command}] {msg}", file=sys.stderr)

    fn = cmd_grad_check if args.command == "grad-check" else COMMANDS[args.command]
    started = time.perf_counter()
    artifacts = fn(cfg, args.out, progress)
    manifest = {
        "command": args.command,
        "preset": args.preset,
        "config": _jsonable(cfg),
        "seed": int(cfg.get("seed", 0)),
        "artifacts": artifacts,
        "wall_clock_s": time.perf_counter() - started,
        "version": __version__,
    }
    with open(os.path.join(args.out, MANIFEST), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    progress(f"wrote {len(artifacts)} artifacts to {args.out}")
    return EXIT_OK


def main(argv=None):
    try:
        return run(argv)
    except SystemExit as exc:
        # --help / --version
        return exc.code if isinstance(exc.code, int) else EXIT_OK
    except (ConfigError, InvalidArgument, LoadFailure) as exc:
        print(f"latent-forge: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericFailure as exc:
        print(f"latent-forge: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
