# pylint: disable=too-few-public-methods

"""
This module contains the definition of Reporters which are responsible for
exposing evaluation results in several formats.
"""

from abc import ABC, abstractmethod
import logging
from pathlib import Path
from typing import Any, List, Sequence, Union

from pydantic import BaseModel  # pylint: disable=no-name-in-module

from gfkit.metrics import MetricsReport

# Columns of a report row, in output order
REPORT_COLUMNS = [
    "model",
    "run",
    "mde_m",
    "mde_ma_m",
    "empty_count",
    "iou_all",
    "iou_na",
    "iou_rock",
    "iou_glacier",
    "iou_oim",
]


class ReportRow(MetricsReport):
    """
    Metrics of one evaluated model. ``run`` is the run index or ``ensemble``.
    """

    model: str
    run: str


class Report(BaseModel):
    rows: List[ReportRow] = list()


class Reporter(ABC):
    """
    Abstract class which describes the bare minimum of a Reporter. A
    reporter writes the collected rows into ``report_path``.

    Example usage:

    .. code-block:: python

        >>> from gfkit.reporters.base import Reporter
        >>>
        >>>
        >>> class JsonReporter(Reporter):
        >>>     def report(self) -> None:
        >>>         self.report_path.write_text(self._get_report().json())

    :param rows: Report rows, one per model and run
    :type rows: Sequence[ReportRow]

    :param report_path: Destination of the report
    :type report_path: Union[str, Path]
    """

    def __init__(
        self, rows: Sequence[ReportRow], report_path: Union[str, Path]
    ) -> None:
        self.rows = list(rows)
        self.report_path = Path(report_path)

    def _get_report(self) -> Report:
        logging.debug("Generating report of %d rows", len(self.rows))
        return Report(rows=self.rows)

    @abstractmethod
    def report(self) -> Any:
        """
        Do the actual reporting based on the rows collected.
        """
