"""P1 finite elements for sharp Moser-Trudinger constants on planar domains."""

import json

from ._core import (
    ConvergenceError,
    Discretization,
    Error,
    Mesh,
    OverflowError,
    ValidationError,
    __version__,
    annulus_capacity,
    disk,
    load_mesh,
    maximize,
    minimize_F,
    neumann_lambda1,
    profile_phi,
    set_thread_count,
    solve_green,
    square,
    thread_count,
    verify_profile,
)
from ._core import _run_experiment


def run_experiment(config):
    """Runs one pipeline from a config dict and returns the manifest as a dict."""
    return json.loads(_run_experiment(json.dumps(config)))


__all__ = [
    "ConvergenceError",
    "Discretization",
    "Error",
    "Mesh",
    "OverflowError",
    "ValidationError",
    "__version__",
    "annulus_capacity",
    "disk",
    "load_mesh",
    "maximize",
    "minimize_F",
    "neumann_lambda1",
    "profile_phi",
    "run_experiment",
    "set_thread_count",
    "solve_green",
    "square",
    "thread_count",
    "verify_profile",
]
