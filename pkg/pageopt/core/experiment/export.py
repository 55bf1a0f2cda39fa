"""CSV and JSON persistence for experiment outputs.

Absent values serialize as empty fields; floats are written with the
shortest decimal representation that round-trips.
"""

import json
from pathlib import Path
from typing import Any, Dict, Iterable, List, Sequence

import pandas as pd
from pydantic import BaseModel

from pageopt.core.utils.json_schema import (
    REPORT_COLUMNS,
    SUMMARY_COLUMNS,
    TRACE_COLUMNS,
    CheckReport,
    CompareRow,
    ExperimentSpec,
    SummaryRow,
    SweepRow,
    TelemetryRecord,
)
from pageopt.core.utils.logging import get_logger

logger = get_logger(__name__)

SWEEP_COLUMNS = list(SweepRow.model_fields)
COMPARE_COLUMNS = list(CompareRow.model_fields)

# nullable integer columns must not be widened to float by pandas
_INT_COLUMNS = ("t", "oracle_calls", "paper_calls", "seed", "chosen_index", "T",
                "theory_T", "n", "b", "b_prime", "seeds", "replicates")


def _write_rows(path: Path, rows: Iterable[BaseModel], columns: Sequence[str]) -> Path:
    records = [row.model_dump(mode="json") for row in rows]
    frame = pd.DataFrame.from_records(records, columns=list(columns))
    for column in frame.columns:
        if column in _INT_COLUMNS:
            frame[column] = frame[column].astype("Int64")
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, na_rep="")
    logger.debug(f"Wrote {len(records)} rows to {path}")
    return path


def trace_filename(seed: int) -> str:
    return f"trace_seed{seed}.csv"


def write_trace(path: Path, trace: List[TelemetryRecord]) -> Path:
    """One row per recorded iteration, columns in TRACE_COLUMNS order."""
    return _write_rows(path, trace, TRACE_COLUMNS)


def write_summary(path: Path, rows: List[SummaryRow]) -> Path:
    return _write_rows(path, rows, SUMMARY_COLUMNS)


def write_sweep(path: Path, rows: List[SweepRow]) -> Path:
    return _write_rows(path, rows, SWEEP_COLUMNS)


def write_compare(path: Path, rows: List[CompareRow]) -> Path:
    return _write_rows(path, rows, COMPARE_COLUMNS)


def write_reports(path: Path, reports: List[CheckReport]) -> Path:
    return _write_rows(path, reports, REPORT_COLUMNS)


def write_spec(path: Path, spec: ExperimentSpec) -> Path:
    """Echo of the fully resolved experiment spec."""
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(spec.model_dump_json(indent=2) + "\n", encoding="utf-8")
    return path


def write_json(path: Path, payload: Dict[str, Any]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, indent=2, ensure_ascii=False)
        f.write("\n")
    return path


def read_csv(path: Path) -> pd.DataFrame:
    """Load any CSV written above; empty fields come back as NaN."""
    return pd.read_csv(path)


def load_spec(path: Path) -> ExperimentSpec:
    """Parse an ExperimentSpec JSON file (raises pydantic's ValidationError on bad content)."""
    return ExperimentSpec.model_validate_json(Path(path).read_text(encoding="utf-8"))
