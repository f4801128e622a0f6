import csv
import json
import logging
import math
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from .strategy import ExperimentOutput

logger = logging.getLogger("mimosim")


def _plain(value: Any) -> Any:
    """Convert numpy scalars and non-finite floats into JSON/CSV friendly values."""
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_plain(v) for v in value.tolist()]
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (np.floating, float)):
        value = float(value)
        return value if math.isfinite(value) else None
    return value


def write_csv(path: Path, rows: List[Dict[str, Any]], columns: Optional[Sequence[str]] = None) -> Path:
    """Write rows with a fixed column order, the order of the first row when `columns` is not given."""
    if columns is None:
        columns = list(rows[0].keys()) if rows else []
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.DictWriter(f, fieldnames=list(columns), extrasaction="raise", lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: ("" if v is None else v) for k, v in _plain(row).items()})
    return path


def write_json(path: Path, payload: Any) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(_plain(payload), f, indent=2, sort_keys=True)
        f.write("\n")
    return path


def write_output(output: ExperimentOutput, out_dir: Path) -> List[Path]:
    """Write every table as CSV and the records and summary as one JSON report."""
    written = []
    for name, rows in sorted(output.tables.items()):
        written.append(write_csv(out_dir / f"{name}.csv", rows))
    report = {
        "kind": output.kind.value,
        "converged": output.converged,
        "records": output.records,
        "summary": output.summary,
    }
    written.append(write_json(out_dir / f"{output.kind.value}_report.json", report))
    for path in written:
        logger.info("Wrote %s", path)
    return written
