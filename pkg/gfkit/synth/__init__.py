# flake8: noqa

from gfkit.synth.dataset import (
    Frame,
    SitsSample,
    read_dataset,
    read_series,
    render_mask,
    write_dataset,
    write_series,
)
from gfkit.synth.scene import SceneParams, generate, generate_dataset, speckle
