"""Sparse delay-Doppler channel estimation for vehicle-to-vehicle links.

The package bundles four pieces that are usually scattered across separate
codebases:

* proximal operators for element-wise and grouped sparsity penalties,
  including the nested element-within-group operator (``ddsparse.proxops``),
* a geometry-based stochastic scatterer simulator for two-lane road scenes
  (``ddsparse.channel``),
* the discrete observation model — pilot matrix, pulse-shaping leakage
  kernel, measurement synthesis (``ddsparse.observation``),
* an ADMM estimator with region-structured groups plus classical baselines,
  and a Monte-Carlo benchmark harness with a CLI (``ddsparse.estimator``,
  ``ddsparse.harness``).
"""

from .lattice import DelayDopplerGrid, SpreadingFunction, nearest_bin
from .proxops import GroupProxParams, Regularizer, prox, prox_group, prox_nested

__version__ = "0.1.0"

__all__ = [
    "DelayDopplerGrid",
    "SpreadingFunction",
    "nearest_bin",
    "Regularizer",
    "GroupProxParams",
    "prox",
    "prox_group",
    "prox_nested",
    "__version__",
]
