"""CSV emission (the output contract), parse-back, and run manifests."""

from __future__ import annotations

import json
import math
from pathlib import Path

from .metrics import RunMetrics, StepRecord

CSV_COLUMNS = ("method", "replication", "t", "content_or_coverage", "width",
               "noninformative", "threshold", "rank", "u_t", "epoch_k")


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return repr(value)
    return str(value)


def emit_csv(metrics: RunMetrics, path) -> Path:
    """Write one row per (method, replication, logged t); header always present."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    try:
        with path.open("w", encoding="utf-8", newline="\n") as fh:
            fh.write(",".join(CSV_COLUMNS) + "\n")
            for row in metrics.rows:
                fh.write(",".join((
                    row.method, str(row.replication), str(row.t),
                    _fmt(row.value), _fmt(row.width), _fmt(row.noninformative),
                    _fmt(row.threshold), _fmt(row.rank), _fmt(row.offset),
                    _fmt(row.epoch),
                )) + "\n")
    except OSError as exc:
        raise OSError(f"failed writing metrics CSV to {path}: {exc}") from exc
    return path


def _parse_opt_int(text: str) -> int | None:
    return int(text) if text else None


def _parse_opt_float(text: str) -> float | None:
    return float(text) if text else None


def load_csv(path) -> list[StepRecord]:
    """Parse an emitted CSV back into records (round-trip of emit_csv)."""
    path = Path(path)
    rows: list[StepRecord] = []
    with path.open("r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != ",".join(CSV_COLUMNS):
            raise ValueError(f"{path}: unexpected header {header!r}")
        for lineno, line in enumerate(fh, start=2):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != len(CSV_COLUMNS):
                raise ValueError(f"{path}:{lineno}: expected {len(CSV_COLUMNS)} fields")
            rows.append(StepRecord(
                method=parts[0], replication=int(parts[1]), t=int(parts[2]),
                value=float(parts[3]), width=float(parts[4]),
                noninformative=_parse_opt_float(parts[5]),
                threshold=float(parts[6]), rank=_parse_opt_int(parts[7]),
                offset=float(parts[8]), epoch=_parse_opt_int(parts[9])))
    return rows


def write_manifest(path, config: dict, notes: tuple[str, ...] = ()) -> Path:
    """Record seed, configuration and library version next to the CSV."""
    from .. import __version__
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {
        "library": "tuconform",
        "version": __version__,
        "config": config,
        "notes": list(notes) + [
            "cs thresholds use the closed-form offset; curves from mixture-"
            "boundary confidence sequences will differ modestly",
        ],
    }
    path.write_text(json.dumps(payload, indent=2, sort_keys=True, default=str) + "\n",
                    encoding="utf-8")
    return path
