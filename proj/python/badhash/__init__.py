"""Clean-label backdoor experiments on deep hashing retrieval."""

import json

from ._badhash import (
    ConfigError,
    Error,
    ImagePairMetrics,
    average_precision,
    binarize,
    hadamard_centers,
    hamming_distance,
    image_metrics,
    make_desk_dataset,
    mean_average_precision,
    psnr_from_mse,
    rank,
    read_code_dump,
    smooth_label,
    t_map,
    write_code_dump,
)
from . import _badhash


def load_config(path, seed=None, out=None, overrides=()):
    """Resolved experiment config as a dict."""
    return json.loads(_badhash.load_config(str(path), seed, None if out is None else str(out), list(overrides)))


def run_pipeline(config, seed=None, out=None, overrides=()):
    """Run (or resume) the full pipeline; returns the summary dict."""
    return json.loads(_badhash.run_pipeline(str(config), seed, None if out is None else str(out), list(overrides)))


def run_comparison(config, seed=None, out=None, overrides=()):
    """BadHash against the BadNets baseline; returns the comparison rows."""
    return json.loads(_badhash.run_comparison(str(config), seed, None if out is None else str(out), list(overrides)))


__all__ = [
    "ConfigError",
    "Error",
    "ImagePairMetrics",
    "average_precision",
    "binarize",
    "hadamard_centers",
    "hamming_distance",
    "image_metrics",
    "load_config",
    "make_desk_dataset",
    "mean_average_precision",
    "psnr_from_mse",
    "rank",
    "read_code_dump",
    "run_comparison",
    "run_pipeline",
    "smooth_label",
    "t_map",
    "write_code_dump",
]
