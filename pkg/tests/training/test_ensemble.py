import numpy as np
import pytest

from gfkit.exceptions import ConfigurationError
from gfkit.nn.network import Network
from gfkit.training.ensemble import EnsembleMethod, combine, ensemble
from gfkit.training.inference import predict_series
from tests.helpers import random_series, tiny_model_config


def probabilities(*distribution):
    """One frame of one pixel with the given class distribution."""

    return np.array(distribution, dtype=np.float64).reshape(1, -1, 1, 1)


def test_single_member_keeps_its_prediction():
    member = np.random.default_rng(0).dirichlet(np.ones(4), size=(2, 3, 3))
    member = np.moveaxis(member, -1, 1)

    combined = combine([member])

    assert np.allclose(np.exp(combined), member)
    assert np.array_equal(combined.argmax(axis=1), member.argmax(axis=1))


def test_opposing_members_average():
    combined = combine([probabilities(0.9, 0.1), probabilities(0.1, 0.9)])

    assert np.allclose(np.exp(combined).ravel(), [0.5, 0.5])


def test_agreement_is_preserved():
    members = [probabilities(0.6, 0.3, 0.1), probabilities(0.8, 0.1, 0.1)]

    for method in EnsembleMethod:
        assert combine(members, method).argmax(axis=1).item() == 0


def test_vote_counts_members():
    members = [
        probabilities(0.6, 0.4),
        probabilities(0.55, 0.45),
        probabilities(0.1, 0.9),
    ]

    combined = combine(members, EnsembleMethod.VOTE)

    assert np.allclose(np.exp(combined).ravel(), [2 / 3, 1 / 3])


def test_vote_floors_unanimous_rejection():
    combined = combine([probabilities(1.0, 0.0)], "vote")

    assert np.isfinite(combined).all()


def test_combine_errors():
    with pytest.raises(ConfigurationError):
        combine([])

    with pytest.raises(ConfigurationError):
        combine([probabilities(0.5, 0.5), probabilities(0.2, 0.3, 0.5)])


def test_ensemble_averages_member_predictions():
    cfg = tiny_model_config()
    models = [Network(cfg, np.random.default_rng(seed)) for seed in (0, 1)]
    sample = random_series(frames=1, side=8)

    combined = ensemble(models, sample)
    expected = np.mean([predict_series(model, sample) for model in models], axis=0)

    assert combined.shape == (1, 4, 8, 8)
    assert np.allclose(np.exp(combined), expected)


def test_ensemble_members_share_configuration():
    models = [
        Network(tiny_model_config(), np.random.default_rng(0)),
        Network(tiny_model_config(base_channels=16), np.random.default_rng(0)),
    ]

    with pytest.raises(ConfigurationError):
        ensemble(models, random_series(frames=1, side=8))

    with pytest.raises(ConfigurationError):
        ensemble([], random_series(frames=1, side=8))
