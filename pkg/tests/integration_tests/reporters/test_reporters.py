import csv
import json
from pathlib import Path

import pytest

from gfkit.reporters.base import REPORT_COLUMNS, ReportRow
from gfkit.reporters.csv import CsvReporter
from gfkit.reporters.json import JsonReporter
from tests.fixtures import temporary_dir

assert temporary_dir


def get_rows():
    return [
        ReportRow(model="conv", run="0", mde_m=400.0, images_evaluated=4),
        ReportRow(model="conv", run="ensemble", empty_count=4, images_evaluated=4),
    ]


@pytest.mark.integration
def test_csv_reporter(temporary_dir):
    report_path = Path(temporary_dir) / "nested" / "report.csv"

    CsvReporter(get_rows(), report_path).report()

    with report_path.open() as file:
        rows = list(csv.reader(file))

    assert rows[0] == REPORT_COLUMNS
    assert rows[1][:4] == ["conv", "0", "400.0", ""]
    assert rows[2][:5] == ["conv", "ensemble", "", "", "4"]


@pytest.mark.integration
def test_json_reporter(temporary_dir):
    report_path = Path(temporary_dir) / "report.json"

    JsonReporter(get_rows(), report_path).report()
    report = json.loads(report_path.read_text())

    assert [row["run"] for row in report["rows"]] == ["0", "ensemble"]
    assert report["rows"][0]["mde_m"] == 400.0
    assert report["rows"][1]["mde_m"] is None
    assert report["rows"][0]["images_evaluated"] == 4
