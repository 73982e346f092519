"""Linear branch-flow models and switch reconfiguration for radial feeders."""

import json

from ._gridflow import (
    GridflowError,
    Network,
    compare_errors,
    linearization_error,
    load_case,
    parse_case,
    solve_acpf,
    solve_linear,
)
from ._gridflow import _reconfigure

__all__ = [
    "GridflowError",
    "Network",
    "compare_errors",
    "linearization_error",
    "load_case",
    "parse_case",
    "reconfigure",
    "solve_acpf",
    "solve_linear",
]


def reconfigure(network, alpha=0.0, beta=0.0, gamma=0.0, *, loop_cuts=True, pf_min=None,
                gap=1e-6, method="branch-and-bound", max_nodes=1_000_000, time_limit=600.0):
    """Solve the switch/compensator problem; returns the solution document as a dict.

    method is "branch-and-bound" or "enumerate". pf_min bounds P^2 / (P^2 + Q^2)
    at the root, the squared power factor.
    """
    text = _reconfigure(network, alpha, beta, gamma, loop_cuts, pf_min, gap, method, max_nodes, time_limit)
    return json.loads(text)
