# flake8: noqa
from gfkit.training.augment import AugmentConfig, augment
from gfkit.training.ensemble import EnsembleMethod, combine, ensemble
from gfkit.training.inference import predict_series, time_windows, to_masks
from gfkit.training.losses import dice_loss, segmentation_loss, smoothed_cross_entropy
from gfkit.training.optim import SGD, ReduceLROnPlateau
from gfkit.training.trainer import RunConfig, RunResult, TrainConfig, train
