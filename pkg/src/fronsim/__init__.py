"""fronsim: deterministic multi-robot frontier exploration simulator.

A team of robots explores an unknown occupancy grid. Each robot predicts an
execution-fidelity score from local features; the score reweights its
frontier allocation (Voronoi-filtered utility/distance/repulsion scoring)
and drives a hysteresis switch between A* guidance and a reactive local
policy. The fidelity model recalibrates online from self-supervised
pseudo-labels. The harness reproduces ablation and scalability comparisons
at desk scale.
"""

from .config import RunConfig
from .episode import run_episode, run_episode_with_metrics
from .kernels import BACKEND as KERNEL_BACKEND
from .variants import Variant, parse_variant

__version__ = "0.1.0"

__all__ = [
    "RunConfig",
    "Variant",
    "parse_variant",
    "run_episode",
    "run_episode_with_metrics",
    "KERNEL_BACKEND",
    "__version__",
]
