"""Writes suite results into an output directory."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Any, Dict, List, Sequence, Union

from .experiments import ExperimentOutcome
from .models import SuiteReport


def _finite(value: Any) -> Any:
    """Replace NaN / inf (recursively) by None so the JSON stays strict."""
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, dict):
        return {k: _finite(v) for k, v in value.items()}
    if isinstance(value, list):
        return [_finite(v) for v in value]
    return value


def _cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


class ReportStore:
    """Output directory holding report.json, per-experiment CSVs and plotdata/."""

    def __init__(self, out_dir: Union[str, Path]):
        # Relative directories resolve against the working directory, like the CLI paths.
        self.out_dir = Path(out_dir).expanduser()
        self.out_dir.mkdir(parents=True, exist_ok=True)

    @property
    def report_path(self) -> Path:
        return self.out_dir / "report.json"

    def write_report(self, report: SuiteReport) -> Path:
        payload = _finite(report.model_dump(mode="json"))
        text = json.dumps(payload, sort_keys=True, indent=2, allow_nan=False)
        self.report_path.write_text(text + "\n", encoding="utf-8")
        return self.report_path

    def write_table(self, path: Path, rows: Sequence[Dict[str, Any]]) -> Path:
        path.parent.mkdir(parents=True, exist_ok=True)
        columns: List[str] = []
        for row in rows:
            for key in row:
                if key not in columns:
                    columns.append(key)
        with path.open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(columns)
            for row in rows:
                writer.writerow([_cell(row.get(c)) for c in columns])
        return path

    def write_criteria(self, outcome: ExperimentOutcome) -> Path:
        """<name>.csv: one row per criterion."""
        report = outcome.report
        rows = [
            {
                "criterion": c.name,
                "passed": c.passed,
                "asserted": c.asserted,
                "value": c.value,
                "threshold": c.threshold,
                "detail": c.detail,
            }
            for c in report.criteria
        ]
        return self.write_table(self.out_dir / f"{report.name}.csv", rows)

    def write_outcomes(self, outcomes: Sequence[ExperimentOutcome], report: SuiteReport) -> List[Path]:
        written = [self.write_report(report)]
        for outcome in outcomes:
            written.append(self.write_criteria(outcome))
            name = outcome.report.name
            for table, rows in sorted(outcome.report.tables.items()):
                if table in outcome.plotdata:
                    continue
                written.append(self.write_table(self.out_dir / f"{name}_{table}.csv", rows))
            for table, rows in sorted(outcome.plotdata.items()):
                written.append(self.write_table(self.out_dir / "plotdata" / f"{name}_{table}.csv", rows))
        return written
