"""Output files with a provenance header line."""

from __future__ import annotations

import csv
import io
from pathlib import Path

from . import __version__


def provenance_line(config_hash: str, master_seed: int) -> str:
    return f"# rram-mcmc {__version__} config_sha256={config_hash} master_seed={master_seed}"


def provenance(config_hash: str, master_seed: int) -> dict:
    return {"tool": "rram-mcmc", "version": __version__, "config_sha256": config_hash, "master_seed": master_seed}


def _fmt(v) -> str:
    if hasattr(v, "item"):
        v = v.item()
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_csv(path, header, rows, prov: str | None = None) -> Path:
    """Write ``rows`` under ``header``; floats use repr so values round-trip."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    buf = io.StringIO()
    if prov:
        buf.write(prov + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    path.write_text(buf.getvalue())
    return path


def read_csv(path) -> tuple[list[str], list[list[str]]]:
    """Inverse of :func:`write_csv`; comment lines are skipped."""
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(line for line in fh if not line.startswith("#")))
    return rows[0], rows[1:]


def write_text(path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    return path
