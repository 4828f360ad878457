"""Result tables shared by the runner and the analysis tools.

The CSV header is fixed; missing fields are written empty and floats use 17
significant digits so values survive a round trip unchanged.
"""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path
from typing import Iterable

FIELDS = (
    "theta",
    "method",
    "param",
    "observable",
    "steps",
    "extra_rx",
    "value",
    "discarded_weight",
    "num_terms",
    "runtime_s",
)

Row = dict[str, object]


def _fmt(value: object) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return f"{value:.17g}"
    return str(value)


def rows_to_csv(rows: Iterable[Row]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(FIELDS)
    for row in rows:
        writer.writerow([_fmt(row.get(f)) for f in FIELDS])
    return buf.getvalue()


def _parse(field: str, text: str) -> object:
    if text == "":
        return None
    if field in ("theta", "value", "discarded_weight", "runtime_s"):
        return float(text)
    if field in ("steps", "num_terms"):
        return int(text)
    if field == "extra_rx":
        return text in ("1", "true", "True")
    return text


def rows_from_csv(text: str) -> list[Row]:
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None or tuple(header) != FIELDS:
        raise ValueError(f"unexpected results header {header!r}")
    return [{f: _parse(f, v) for f, v in zip(FIELDS, rec)} for rec in reader]


def write_results(rows: list[Row], path: str | Path, fmt: str = "csv", provenance: dict | None = None) -> None:
    """Write rows as CSV (provenance goes to ``<path>.meta.json``) or JSON."""
    path = Path(path)
    if fmt == "csv":
        path.write_text(rows_to_csv(rows), encoding="utf-8")
        if provenance is not None:
            Path(str(path) + ".meta.json").write_text(json.dumps(provenance, indent=2, sort_keys=True), "utf-8")
    elif fmt == "json":
        doc = {"fields": list(FIELDS), "rows": [{f: row.get(f) for f in FIELDS} for row in rows]}
        if provenance is not None:
            doc["provenance"] = provenance
        path.write_text(json.dumps(doc, indent=2), encoding="utf-8")
    else:
        raise ValueError(f"unknown format {fmt!r}")


def read_results(path: str | Path) -> list[Row]:
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    if path.suffix == ".json":
        doc = json.loads(text)
        return [{f: r.get(f) for f in FIELDS} for r in doc["rows"]]
    return rows_from_csv(text)
