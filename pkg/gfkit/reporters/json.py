# pylint: disable=too-few-public-methods
import logging

from gfkit.reporters.base import Reporter


class JsonReporter(Reporter):
    """
    Write every row, including ``images_evaluated``, as one Json document.
    """

    def report(self) -> None:
        logging.info('Writing report to "%s"', str(self.report_path))
        self.report_path.parent.mkdir(parents=True, exist_ok=True)
        self.report_path.write_text(self._get_report().json(indent=2))
