"""Pure-numpy fallback of the fused partition nested-prox kernel.

Semantics must match ddsparse.proxops._kernels exactly; the test suite
cross-checks the two backends bit-for-bit on random partitions.
"""

from __future__ import annotations

import numpy as np


def nested_prox_groups(mag, perm, starts, lam_e, f_g, lam_g, c):
    """Nested prox on magnitudes over all groups of a partition.

    Parameters
    ----------
    mag : (n,) float64
        Entry magnitudes |b_j|.
    perm, starts : int arrays
        CSR-style group layout: group g owns perm[starts[g]:starts[g+1]].
    lam_e : float
        Effective element soft threshold (penalty already scaled by the
        splitting parameter).
    f_g : Regularizer
        Group penalty family.
    lam_g, c : float
        Group multiplier and objective scale of the group stage,
        argmin_t 1/2 (s-t)^2 + c f_g(t; lam_g) applied to each group norm.

    Returns
    -------
    (n,) float64 array of shrunken magnitudes (same entry order as ``mag``).
    """
    from . import scaled_prox  # deferred to avoid a circular import at load

    perm = np.asarray(perm, dtype=np.int64)
    starts = np.asarray(starts, dtype=np.int64)
    u = np.maximum(0.0, mag - lam_e)
    usq = u * u
    norms = np.sqrt(np.add.reduceat(usq[perm], starts[:-1]))
    shrunk = np.asarray(scaled_prox(norms, lam_g, f_g, c), dtype=np.float64)
    gamma = np.divide(shrunk, norms, out=np.zeros_like(norms), where=norms > 0)
    sizes = np.diff(starts)
    out = np.empty_like(mag)
    out[perm] = u[perm] * np.repeat(gamma, sizes)
    return out
