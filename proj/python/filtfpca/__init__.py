"""Filtrated functional principal component analysis.

A similarity network over groups of grid-sampled trajectories is
filtrated into nested communities; each community contributes one common
principal component per layer, selected by an iterative information
criterion. The heavy lifting lives in the compiled `_core` module.
"""

from . import _core
from ._core import (
    ConfigError,
    DegenerateGroupError,
    DimensionError,
    FormatError,
    GridMismatchError,
    GroupLookupError,
    IngestError,
    Model,
    __version__,
    load_long_csv,
    load_model,
    lowpass_filter,
    ordinary_fpca,
    remove_outliers,
    segment_epochs,
    signed_sqrt,
    simulate,
)


def _as_named_groups(data):
    """Accept a dict of arrays or an iterable of (id, array) pairs."""
    if hasattr(data, "items"):
        return list(data.items())
    return list(data)


def fit(data, dimension, **kwargs):
    """Fit a filt-fPCA model; `data` maps group ids to (n, T) arrays."""
    return _core.fit(_as_named_groups(data), dimension, **kwargs)


def select_dimension(data, p=0.9, subtract_mean=True):
    """Smallest layer count explaining fraction p of every group's variance."""
    return _core.select_dimension(_as_named_groups(data), p, subtract_mean)


def select_penalty(data, candidates, dimension, subtract_mean=True):
    """Pick (a, b) over a candidate grid; see the command-line fit --grid."""
    return _core.select_penalty(_as_named_groups(data), list(candidates), dimension,
                                subtract_mean)


def weight_matrix(data, subtract_mean=True):
    """Scaled-covariance distance matrix between the groups."""
    return _core.weight_matrix(_as_named_groups(data), subtract_mean)


def write_long_csv(data, path):
    """Write groups to the interchange CSV (group_id,epoch_id,t_index,value)."""
    _core.write_long_csv(_as_named_groups(data), path)


__all__ = [
    "ConfigError",
    "DegenerateGroupError",
    "DimensionError",
    "FormatError",
    "GridMismatchError",
    "GroupLookupError",
    "IngestError",
    "Model",
    "__version__",
    "fit",
    "load_long_csv",
    "load_model",
    "lowpass_filter",
    "ordinary_fpca",
    "remove_outliers",
    "segment_epochs",
    "select_dimension",
    "select_penalty",
    "signed_sqrt",
    "simulate",
    "weight_matrix",
    "write_long_csv",
]
