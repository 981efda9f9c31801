"""
Combination of independently trained networks.
"""

from enum import Enum
import logging
from typing import List, Sequence

import numpy as np

from gfkit.exceptions import ConfigurationError
from gfkit.nn.network import Network
from gfkit.synth.dataset import SitsSample
from gfkit.training.inference import predict_series

# Floor of the combined probabilities before taking the logarithm
PROBABILITY_FLOOR = 1e-12


class EnsembleMethod(str, Enum):
    MEAN = "mean"
    VOTE = "vote"


def combine(
    member_probabilities: Sequence[np.ndarray],
    method: EnsembleMethod = EnsembleMethod.MEAN,
) -> np.ndarray:
    """
    Combine per-member class probabilities of shape ``(T, K, H, W)`` into
    log-probabilities. ``mean`` averages the probabilities, ``vote`` uses the
    share of members voting for each class.

    :raises: ``ConfigurationError`` if no member or differently shaped members
        are given
    """

    if not member_probabilities:
        raise ConfigurationError("an ensemble needs at least one member")

    shapes = {probabilities.shape for probabilities in member_probabilities}

    if len(shapes) != 1:
        raise ConfigurationError(
            f"ensemble members disagree on shape: {sorted(shapes)}"
        )

    stacked = np.stack(member_probabilities)

    if EnsembleMethod(method) == EnsembleMethod.VOTE:
        classes = stacked.shape[2]
        votes = np.argmax(stacked, axis=2)
        combined = np.stack(
            [np.mean(votes == label, axis=0) for label in range(classes)], axis=1
        )
    else:
        combined = stacked.mean(axis=0)

    return np.log(np.maximum(combined, PROBABILITY_FLOOR))


def ensemble(
    models: Sequence[Network],
    sample: SitsSample,
    method: EnsembleMethod = EnsembleMethod.MEAN,
) -> np.ndarray:
    """
    Predict a series with every member and combine the results.

    :param models: Networks built from the same configuration
    :type models: Sequence[Network]

    :param sample: The series to predict
    :type sample: SitsSample

    :param method: Combination method
    :type method: EnsembleMethod

    :return: Returns log-probabilities of shape ``(T, K, H, W)``
    :rtype: np.ndarray

    :raises: ``ConfigurationError`` if the members were built from different
        configurations
    """

    if not models:
        raise ConfigurationError("an ensemble needs at least one member")

    reference = models[0].cfg

    if any(model.cfg != reference for model in models[1:]):
        raise ConfigurationError("ensemble members must share one model configuration")

    members: List[np.ndarray] = [predict_series(model, sample) for model in models]
    logging.debug(
        "Combined %d members by %s", len(members), EnsembleMethod(method).value
    )
    return combine(members, method)
