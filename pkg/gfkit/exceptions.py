class ShapeError(ValueError):
    """
    Raised when the shapes given to an operation do not conform to its
    contract. The message always names the offending shapes.
    """


class ConfigurationError(ValueError):
    """
    Custom exception for configuration values which violate an invariant
    of the model, training, scene or experiment configuration.
    """


class GeometryError(ValueError):
    """
    Raised by the synthetic scene generator when the requested geometry
    degenerates, for example the calving front leaves the image.
    """


class CheckpointError(ValueError):
    """
    Raised when a checkpoint file is malformed or does not match the
    parameters of the model it is loaded into.
    """


class MissingFrontError(Exception):
    """
    Signals an image without a usable calving front. This is not a failure,
    callers count these images in the ∅ column of the report.

    :param message: Human readable reason
    :type message: str

    :param ground_truth_empty: True if the ground truth itself has no front
    :type ground_truth_empty: bool
    """

    def __init__(self, message: str, ground_truth_empty: bool = False) -> None:
        super().__init__(message)
        self.ground_truth_empty = ground_truth_empty


class AbortRunError(Exception):
    """
    Custom exception to make sure that a diverging training run is aborted
    with a diagnostic instead of silently producing NaN checkpoints.
    """
