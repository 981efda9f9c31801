# flake8: noqa
from gfkit.exceptions import (
    AbortRunError,
    CheckpointError,
    ConfigurationError,
    GeometryError,
    MissingFrontError,
    ShapeError,
)
from gfkit.frontline import FrontSet, Zone, ZoneMask, extract_front, fill_holes
from gfkit.metrics import ConfusionCounts, MetricsReport, dataset_report, mde, miou

__version__ = "0.1.0"
