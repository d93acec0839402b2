"""``amppr`` command line.

Examples::

    amppr se-run --set delta=2.49 --out out/
    amppr basin --out out/ --threads 1
    amppr phase-transition --config pt.json --seed 7 --out out/

Exit codes: 0 success, 1 runtime failure, 2 bad configuration.
"""

import argparse
import json
import logging
import os
import sys
import time

from . import config as cfgmod
from .experiments import COMMANDS
from .io import version_string, write_summary, write_table

log = logging.getLogger("amppr")


def _parse_set(items):
    out = {}
    for item in items or []:
        if "=" not in item:
            raise cfgmod.ConfigError(f"--set expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        try:
            out[k] = json.loads(v)
        except json.JSONDecodeError:
            out[k] = v
    return out


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file (schema_version 1)")
    common.add_argument("--out", default=".", help="output directory")
    common.add_argument("--seed", type=int, help="master seed (u64)")
    common.add_argument("--threads", type=int, default=1, help="worker processes for trials")
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="override one parameter; VALUE is parsed as JSON when possible")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="amppr", description=__doc__.split("\n")[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=f"run the {name} experiment")
    return p


def run(command, cfg, out, threads=1, fmt_kind="csv"):
    """Run one experiment and write its tables and ``summary.json`` under ``out``."""
    os.makedirs(out, exist_ok=True)
    h = cfgmod.config_hash(command, cfg)
    ctx = {"config_hash": h, "threads": threads}
    t0 = time.perf_counter()
    tables, summary = COMMANDS[command](cfg, ctx)
    t1 = time.perf_counter()
    paths = [
        write_table(os.path.join(out, stem), cols, rows, fmt_kind, desc)
        for stem, cols, rows, desc in tables
    ]
    t2 = time.perf_counter()
    doc = {
        "command": command,
        "config": json.loads(cfgmod.canonical(command, cfg)),
        "config_hash": h,
        "version": version_string(),
        "wall_clock_s": {"compute": t1 - t0, "write": t2 - t1},
        "outputs": [os.path.basename(p) for p in paths],
        "result": summary,
    }
    write_summary(os.path.join(out, "summary.json"), doc)
    return doc


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        if args.threads < 1:
            raise cfgmod.ConfigError("--threads must be >= 1")
        if args.seed is not None and not 0 <= args.seed < 2**64:
            raise cfgmod.ConfigError("--seed must be a u64")
        file_cfg = cfgmod.load_file(args.config) if args.config else None
        cfg = cfgmod.build(args.command, file_cfg, _parse_set(args.set), args.seed)
    except cfgmod.ConfigError as exc:
        print(f"amppr: config error: {exc}", file=sys.stderr)
        return 2
    try:
        doc = run(args.command, cfg, args.out, args.threads, args.format)
    except Exception as exc:  # noqa: BLE001 - reported as exit code 1
        log.debug("failure", exc_info=True)
        print(f"amppr: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    log.info("wrote %s", ", ".join(doc["outputs"]))
    return 0


if __name__ == "__main__":
    sys.exit(main())
