# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled fused kernel for the partition-wide nested proximal update.

Covers the soft element stage combined with soft/SCAD/MCP group stages at an
arbitrary objective scale c (= 1/rho^2 in the solver).  Semantics mirror
ddsparse.proxops._numpy_backend.nested_prox_groups; the test suite
cross-checks both backends on random partitions.
"""

from libc.math cimport sqrt

import numpy as np


cdef inline double _penalty(int kind, double t, double lam, double mu) nogil:
    if kind == 0:  # soft
        return lam * t
    if kind == 1:  # scad
        if t <= lam:
            return lam * t
        if t <= mu * lam:
            return -(t * t - 2.0 * mu * lam * t + lam * lam) / (2.0 * (mu - 1.0))
        return 0.5 * (mu + 1.0) * lam * lam
    # mcp
    if t <= mu * lam:
        return lam * t - t * t / (2.0 * mu)
    return 0.5 * mu * lam * lam


cdef inline double _clip(double x, double lo, double hi) nogil:
    if x < lo:
        return lo
    if x > hi:
        return hi
    return x


cdef inline double _scaled_prox(int kind, double s, double lam, double mu,
                                double c) nogil:
    """argmin_t 1/2 (s-t)^2 + c * penalty(t; lam); ties -> smallest t."""
    cdef double cand[4]
    cdef int ncand = 0, i
    cdef double a, t, obj, best_obj, best_t
    if c == 0.0 or lam == 0.0:
        return s
    if kind == 0:
        t = s - c * lam
        return t if t > 0.0 else 0.0
    if kind == 1:  # scad branches: [0,lam], [lam,mu*lam], [mu*lam,inf)
        cand[ncand] = _clip(s - c * lam, 0.0, lam)
        ncand += 1
        a = 1.0 - c / (mu - 1.0)
        if a > 0.0:
            cand[ncand] = _clip((s - c * mu * lam / (mu - 1.0)) / a, lam, mu * lam)
            ncand += 1
        else:
            cand[ncand] = lam
            ncand += 1
            cand[ncand] = mu * lam
            ncand += 1
        cand[ncand] = s if s > mu * lam else mu * lam
        ncand += 1
    else:  # mcp branches: [0, mu*lam], [mu*lam, inf)
        a = 1.0 - c / mu
        if a > 0.0:
            cand[ncand] = _clip((s - c * lam) / a, 0.0, mu * lam)
            ncand += 1
        else:
            cand[ncand] = 0.0
            ncand += 1
            cand[ncand] = mu * lam
            ncand += 1
        cand[ncand] = s if s > mu * lam else mu * lam
        ncand += 1
    best_obj = 0.0
    best_t = 0.0
    for i in range(ncand):
        t = cand[i]
        obj = 0.5 * (s - t) * (s - t) + c * _penalty(kind, t, lam, mu)
        if i == 0 or obj < best_obj or (obj == best_obj and t < best_t):
            best_obj = obj
            best_t = t
    return best_t


def nested_prox_groups(double[::1] mag, long[::1] perm, long[::1] starts,
                       double lam_e, int gkind, double lam_g, double mu,
                       double c, double[::1] out):
    """Fused nested prox over all groups; writes shrunken magnitudes to out."""
    cdef Py_ssize_t g, j, idx
    cdef Py_ssize_t ngroups = starts.shape[0] - 1
    cdef double u, ssq, norm, gamma
    with nogil:
        for g in range(ngroups):
            ssq = 0.0
            for j in range(starts[g], starts[g + 1]):
                idx = perm[j]
                u = mag[idx] - lam_e
                if u < 0.0:
                    u = 0.0
                out[idx] = u
                ssq += u * u
            norm = sqrt(ssq)
            if norm > 0.0:
                gamma = _scaled_prox(gkind, norm, lam_g, mu, c) / norm
            else:
                gamma = 0.0
            for j in range(starts[g], starts[g + 1]):
                idx = perm[j]
                out[idx] *= gamma
    return None
