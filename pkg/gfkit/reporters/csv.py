# pylint: disable=too-few-public-methods
import csv
import logging
from typing import Any, List

from gfkit.reporters.base import REPORT_COLUMNS, Reporter, ReportRow


def format_value(value: Any) -> str:
    """
    Format a cell: missing values stay empty, floats keep their full precision.
    """

    if value is None:
        return ""

    if isinstance(value, float):
        return repr(value)

    return str(value)


def row_values(row: ReportRow) -> List[str]:
    values = row.dict()
    return [format_value(values[column]) for column in REPORT_COLUMNS]


class CsvReporter(Reporter):
    """
    Write one line per model and run with the columns of
    :data:`gfkit.reporters.base.REPORT_COLUMNS`. The experiment report is
    written by this reporter.

    Example usage:

    .. code-block:: python

        >>> from gfkit.reporters.base import ReportRow
        >>> from gfkit.reporters.csv import CsvReporter
        >>>
        >>> row = ReportRow(model="conv", run="0", mde_m=412.5)
        >>> CsvReporter([row], "report.csv").report()
    """

    def report(self) -> None:
        logging.info('Writing report to "%s"', str(self.report_path))
        self.report_path.parent.mkdir(parents=True, exist_ok=True)

        with self.report_path.open("w", newline="") as file:
            writer = csv.writer(file, lineterminator="\n")
            writer.writerow(REPORT_COLUMNS)

            for row in self.rows:
                writer.writerow(row_values(row))
