import csv
import io
import json
import math
import sys
from pathlib import Path
from typing import Optional

from core.exceptions import ConfigError
from core.logger import get_logger
from schemas.report import ExperimentReport, ReportRow
from schemas.run import OutputFormat

logger = get_logger(__name__)

COLUMNS = ['experiment', 'param_name', 'param_value', 'quantity', 'value', 'target', 'tolerance', 'pass']


def _number(value: Optional[float]) -> str:
    if value is None:
        return ''
    return f"{value:.8g}"


def _json_number(value: Optional[float]) -> Optional[float]:
    if value is None or not math.isfinite(value):
        return None
    return float(value)


def render_csv(report: ExperimentReport) -> str:
    output = io.StringIO()
    writer = csv.DictWriter(output, fieldnames=COLUMNS, lineterminator='\n')

    writer.writeheader()

    for row in report.rows:
        writer.writerow({
            'experiment': row.experiment,
            'param_name': row.param_name,
            'param_value': _number(row.param_value),
            'quantity': row.quantity,
            'value': _number(row.value),
            'target': _number(row.target),
            'tolerance': _number(row.tolerance),
            'pass': 'true' if row.passed else 'false',
        })

    content = output.getvalue()
    output.close()
    return content


def _record(row: ReportRow) -> dict:
    return {
        'experiment': row.experiment,
        'param_name': row.param_name,
        'param_value': _json_number(row.param_value),
        'quantity': row.quantity,
        'value': _json_number(row.value),
        'target': _json_number(row.target),
        'tolerance': _json_number(row.tolerance),
        'pass': row.passed,
    }


def render_json(report: ExperimentReport) -> str:
    return json.dumps([_record(row) for row in report.rows], indent=2) + '\n'


def emit_report(report: ExperimentReport, fmt: OutputFormat = OutputFormat.CSV, path: Optional[Path] = None) -> None:
    """Write the report rows as CSV or JSON; without a path they go to stdout."""
    fmt = OutputFormat(fmt)
    content = render_csv(report) if fmt == OutputFormat.CSV else render_json(report)

    if path is None:
        sys.stdout.write(content)
        return

    try:
        with open(path, 'w', encoding='utf-8', newline='') as handle:
            handle.write(content)
    except OSError as e:
        raise ConfigError(f"cannot write report to {path}: {e}") from e

    logger.info(f"Wrote {len(report.rows)} {fmt.value} rows to {path}")
