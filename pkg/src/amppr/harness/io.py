"""Output writers: CSV/JSON tables with sidecar schema descriptors, summaries."""

import csv
import json
import os
import subprocess

from .. import __version__
from ..metrics import fmt

TABLE_SCHEMA_VERSION = 1


def version_string():
    """``git describe``-style version; falls back to the package version."""
    here = os.path.dirname(os.path.abspath(__file__))
    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty", "--tags"],
            cwd=here, capture_output=True, text=True, timeout=5, check=True,
        )
        return f"{__version__}+g{out.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        return __version__


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, str):
        return v
    return fmt(v)


def write_table(path_stem, columns, rows, fmt_kind="csv", description=""):
    """Write ``rows`` (sequences matching ``columns``) plus ``<stem>.schema.json``.

    ``columns`` is a list of (name, type, description) triples. Returns the
    path of the data file.
    """
    names = [c[0] for c in columns]
    if fmt_kind == "csv":
        path = path_stem + ".csv"
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(names)
            for row in rows:
                w.writerow([_cell(v) for v in row])
    elif fmt_kind == "json":
        path = path_stem + ".json"
        with open(path, "w") as fh:
            json.dump([dict(zip(names, row)) for row in rows], fh, indent=1, allow_nan=True)
            fh.write("\n")
    else:
        raise ValueError(f"unknown format {fmt_kind!r}")
    schema = {
        "schema_version": TABLE_SCHEMA_VERSION,
        "format": fmt_kind,
        "file": os.path.basename(path),
        "description": description,
        "columns": [{"name": n, "type": t, "description": d} for n, t, d in columns],
    }
    with open(path_stem + ".schema.json", "w") as fh:
        json.dump(schema, fh, indent=1)
        fh.write("\n")
    return path


def write_summary(path, doc):
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True, allow_nan=True)
        fh.write("\n")
