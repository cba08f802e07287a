"""Energy-minimal planning of distributed Earth-observation image processing
on a ring of LEO satellites: orbital timing, link budgets, per-slot topology,
energy models, and an alternating-minimization planner with baselines."""

from .kernels import BACKEND as kernel_backend

__version__ = "0.1.0"

__all__ = ["kernel_backend", "__version__"]
