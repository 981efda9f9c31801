# flake8: noqa
from gfkit.reporters.base import REPORT_COLUMNS, Report, Reporter, ReportRow
from gfkit.reporters.csv import CsvReporter
from gfkit.reporters.json import JsonReporter
