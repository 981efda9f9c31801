import numpy as np
import pytest
from scipy.special import softmax

from gfkit.autodiff.tensor import Tensor, no_grad
from gfkit.frontline import Zone
from gfkit.nn.network import Network, crop_for_eval
from gfkit.training.inference import predict_series, time_windows, to_masks
from tests.helpers import TINY_EVAL_CROP, random_series, tiny_model_config


@pytest.mark.parametrize(
    "length,window,expected",
    [
        (10, 4, [(0, 4), (4, 8), (6, 10)]),
        (8, 4, [(0, 4), (4, 8)]),
        (3, 4, [(0, 3)]),
        (5, 1, [(0, 1), (1, 2), (2, 3), (3, 4), (4, 5)]),
    ],
)
def test_time_windows(length, window, expected):
    assert time_windows(length, window) == expected


def test_prediction_shape_and_distribution():
    model = Network(tiny_model_config(), np.random.default_rng(0))
    sample = random_series(frames=2, side=12)

    probabilities = predict_series(model, sample)

    assert probabilities.shape == (2, 4, 12, 12)
    assert (probabilities >= 0.0).all()
    assert np.allclose(probabilities.sum(axis=1), 1.0)


def test_single_tile_matches_direct_forward():
    model = Network(tiny_model_config(), np.random.default_rng(0))
    sample = random_series(frames=1, side=TINY_EVAL_CROP)
    margin = (model.cfg.context - TINY_EVAL_CROP) // 2
    widths = ((0, 0), (margin, margin), (margin, margin))
    padded = np.pad(sample.images(), widths, mode="symmetric")

    with no_grad():
        logits = model(Tensor(padded[None, :, None])).numpy()

    expected = softmax(crop_for_eval(logits[0], TINY_EVAL_CROP), axis=1)

    assert np.allclose(predict_series(model, sample), expected, atol=1e-12)


def test_tile_batch_does_not_change_the_result():
    model = Network(tiny_model_config(), np.random.default_rng(1))
    sample = random_series(frames=1, side=20)

    together = predict_series(model, sample, tile_batch=16)
    one_by_one = predict_series(model, sample, tile_batch=1)

    assert np.allclose(together, one_by_one, atol=1e-12)


def test_long_series_is_predicted_in_windows():
    model = Network(tiny_model_config("ltae", frames=3), np.random.default_rng(0))
    sample = random_series(frames=5, side=8)

    probabilities = predict_series(model, sample)

    assert probabilities.shape == (5, 4, 8, 8)
    assert np.allclose(probabilities[:3], predict_series(model, sample.window(0, 3)))
    assert np.allclose(
        probabilities[3:], predict_series(model, sample.window(2, 3))[1:], atol=1e-10
    )


def test_to_masks():
    probabilities = np.zeros((2, 4, 3, 3))
    probabilities[0, Zone.OIM] = 1.0
    probabilities[1, Zone.GLACIER] = 1.0

    masks = to_masks(probabilities, 25.0)

    assert [mask.resolution_m_per_px for mask in masks] == [25.0, 25.0]
    assert (masks[0].classes == Zone.OIM).all()
    assert (masks[1].classes == Zone.GLACIER).all()
