"""Frequency-domain masking augmentation and desk-scale detector tooling."""

__version__ = "0.1.0"

from . import augment, imageio, metrics, nn, pruning, rng, spectra, synthgen, transforms  # noqa: F401
from .augment import GeoSpec, MaskSpec, PipelineSpec  # noqa: F401
from .nn import Model, TrainConfig, default_model  # noqa: F401
from .pruning import PruneSpec  # noqa: F401
from .synthgen import DatasetManifest, GridPattern, HighFreqPeaks, UpsampleReplica  # noqa: F401
