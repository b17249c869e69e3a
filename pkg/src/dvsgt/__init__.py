"""Distributed variable sample-size stochastic gradient tracking over
i.i.d. random networks, with baselines and a numerical theory toolkit."""

__version__ = "0.1.0"

from . import algorithms, graphs, kernels, metrics, problems, schedules, theory

__all__ = [
    "__version__",
    "algorithms",
    "graphs",
    "kernels",
    "metrics",
    "problems",
    "schedules",
    "theory",
]
