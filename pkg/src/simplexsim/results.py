"""Result serialization: versioned CSV tables and the run manifest.

Floats are written with ``repr`` (shortest round-trip form), so a replayed
run that computes the same numbers produces the same bytes.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

from .experiments import CSV_SCHEMA, RunResult


def format_cell(v: object) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_table(path: Path, columns: list[str], rows: list[list]) -> None:
    """Versioned CSV: one comment line naming the schema, then the table."""
    with open(path, "w", newline="") as f:
        f.write(f"# schema: {CSV_SCHEMA}\n")
        w = csv.writer(f, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([format_cell(v) for v in row])


def write_table_json(path: Path, columns: list[str], rows: list[list]) -> None:
    doc = {
        "schema": CSV_SCHEMA,
        "columns": columns,
        "rows": [dict(zip(columns, row)) for row in rows],
    }
    with open(path, "w") as f:
        json.dump(doc, f, indent=2)
        f.write("\n")


def write_manifest(path: Path, manifest: dict) -> None:
    with open(path, "w") as f:
        json.dump(manifest, f, indent=2)
        f.write("\n")


def write_run(out_dir: str | Path, result: RunResult, table_format: str = "csv") -> dict[str, Path]:
    """Write results, manifest, and any extra tables; returns the paths."""
    if table_format not in ("csv", "json"):
        raise ValueError(f"unknown table format {table_format!r}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths: dict[str, Path] = {}
    ext = table_format
    writer = write_table if table_format == "csv" else write_table_json
    results_path = out / f"results.{ext}"
    writer(results_path, result.columns, result.rows)
    paths["results"] = results_path
    for stem, (columns, rows) in result.extras.items():
        p = out / f"{stem}.{ext}"
        writer(p, columns, rows)
        paths[stem] = p
    manifest_path = out / "manifest.json"
    write_manifest(manifest_path, result.manifest)
    paths["manifest"] = manifest_path
    return paths


def read_rows(path: str | Path) -> list[dict]:
    """Read a results CSV back into dicts, converting numeric cells."""
    with open(path) as f:
        first = f.readline()
        if not first.startswith("#"):
            f.seek(0)
        rows = []
        for rec in csv.DictReader(f):
            out: dict[str, object] = {}
            for k, v in rec.items():
                try:
                    out[k] = int(v)
                except ValueError:
                    try:
                        out[k] = float(v)
                    except ValueError:
                        out[k] = v
            rows.append(out)
        return rows
