"""Trajectory distributions for ODEs whose vector field is a Gaussian process."""

import json as _json

from . import _core
from ._core import (  # noqa: F401
    ConfigError,
    FactorizationFailure,
    GaussianState,
    GpField,
    GpPosterior,
    GridEscape,
    InvalidStep,
    KernelConfig,
    LinearField,
    MomentTerms,
    TrainingSet,
    TrajectoryDistribution,
    closed_form_moments,
    condition,
    ensemble_stats,
    linear,
    mm_trajectory,
    pull_trajectory,
    quadrature_moments,
    sample_on_grid,
)

__version__ = _core.__version__


def default_config(experiment):
    return _json.loads(_core.default_config(experiment))


def run_experiment(config, write_files=False):
    """Run an experiment from a config dict. Returns (summary dict, trajectories)."""
    summary, trajectories = _core.run_experiment(_json.dumps(config), write_files)
    return _json.loads(summary), trajectories
