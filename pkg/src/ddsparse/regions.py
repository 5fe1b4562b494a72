"""Delay-Doppler region decomposition and group partitioning.

The static clutter of a road scene occupies a U-shaped set on the
delay-Doppler lattice:

* region 1 — delays within ``delta_m`` bins of the direct path, where static
  scatterers may take any Doppler in ``[-k_s, k_s]`` bins,
* region 2 — longer delays, where static Doppler concentrates in two strips
  just below the band edges ``±k_s`` (``delta_k`` rows each),
* region 3 — the rest of the lattice, populated only by isolated mobile
  scatterers.

Regions can be derived from scene geometry (sweeping constant-delay ellipses
against the roadside strips) or estimated from a least-squares pre-estimate
via energy-knee heuristics.  ``build_partition`` turns a region record into
the group structure consumed by the nested shrinkage estimator: one group per
Doppler row in region 1, one group per row segment in each region-2 strip,
and singletons elsewhere.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .lattice import DelayDopplerGrid, SpreadingFunction, nearest_bin


@dataclass(frozen=True)
class Regions:
    """Region boundaries in lattice units (all inclusive indices).

    ``m0``..``m0 + delta_m`` is the region-1 delay band; delays up to
    ``m_max`` with ``|k|`` in ``(k_s - delta_k, k_s]`` form region 2;
    ``k_max`` records the largest Doppler bin any path may occupy.
    """

    m0: int
    delta_m: int
    m_max: int
    k_s: int
    delta_k: int
    k_max: int

    def __post_init__(self):
        if not 0 <= self.m0 <= self.m0 + self.delta_m <= self.m_max:
            raise ValueError("need 0 <= m0 <= m0 + delta_m <= m_max")
        if not 0 <= self.k_s - self.delta_k <= self.k_s <= self.k_max:
            raise ValueError("need 0 <= k_s - delta_k <= k_s <= k_max")

    def to_record(self) -> tuple:
        return (self.m0, self.delta_m, self.m_max, self.k_s, self.delta_k, self.k_max)

    @classmethod
    def from_record(cls, record) -> "Regions":
        vals = [int(v) for v in record]
        if len(vals) != 6:
            raise ValueError("region record must have six integers")
        return cls(*vals)

    def region_of(self, k: int, m: int) -> int:
        """Region label (1, 2 or 3) of lattice node (k, m)."""
        if self.m0 <= m <= self.m0 + self.delta_m and abs(k) <= self.k_s:
            return 1
        if (
            self.m0 + self.delta_m < m <= self.m_max
            and self.k_s - self.delta_k < abs(k) <= self.k_s
        ):
            return 2
        return 3


@dataclass(frozen=True)
class GroupPartition:
    """Disjoint index groups covering the whole lattice vector.

    Stored in flat form: ``perm`` concatenates all group index sets and
    ``starts`` marks group boundaries (``starts[g]:starts[g+1]`` slices group
    ``g`` out of ``perm``).  ``labels`` carries each group's region.
    """

    n: int
    perm: np.ndarray
    starts: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        perm = np.asarray(self.perm, dtype=np.int64)
        starts = np.asarray(self.starts, dtype=np.int64)
        object.__setattr__(self, "perm", perm)
        object.__setattr__(self, "starts", starts)
        object.__setattr__(self, "labels", np.asarray(self.labels, dtype=np.int64))
        if starts.ndim != 1 or len(starts) < 1 or starts[0] != 0:
            raise ValueError("starts must begin at 0")
        if starts[-1] != len(perm) or np.any(np.diff(starts) <= 0):
            raise ValueError("groups must be non-empty and tile perm")
        if len(self.labels) != len(starts) - 1:
            raise ValueError("one label per group required")
        # Bitmap check: every index covered exactly once.
        if len(perm) != self.n:
            raise ValueError("partition must cover all indices")
        seen = np.zeros(self.n, dtype=bool)
        if perm.min(initial=0) < 0 or perm.max(initial=-1) >= self.n:
            raise ValueError("index out of range")
        seen[perm] = True
        if not seen.all() or len(np.unique(perm)) != self.n:
            raise ValueError("groups must be disjoint and cover all indices")

    @classmethod
    def from_groups(cls, n: int, groups, labels=None) -> "GroupPartition":
        groups = [np.asarray(g, dtype=np.int64) for g in groups]
        sizes = [len(g) for g in groups]
        perm = np.concatenate(groups) if groups else np.empty(0, dtype=np.int64)
        starts = np.concatenate(([0], np.cumsum(sizes)))
        if labels is None:
            labels = np.full(len(groups), 3)
        return cls(n, perm, starts, labels)

    @property
    def n_groups(self) -> int:
        return len(self.starts) - 1

    @property
    def sizes(self) -> np.ndarray:
        return np.diff(self.starts)

    def group(self, g: int) -> np.ndarray:
        return self.perm[self.starts[g] : self.starts[g + 1]]

    def groups(self):
        for g in range(self.n_groups):
            yield self.group(g)

    def region_counts(self) -> dict:
        return {r: int(np.sum(self.labels == r)) for r in (1, 2, 3)}

    @cached_property
    def group_of_index(self) -> np.ndarray:
        """Inverse map: lattice index -> group id."""
        out = np.empty(self.n, dtype=np.int64)
        out[self.perm] = np.repeat(np.arange(self.n_groups), self.sizes)
        return out

    def to_rows(self):
        """(group_id, index) pairs in group order, for audit export."""
        gid = np.repeat(np.arange(self.n_groups), self.sizes)
        return np.column_stack([gid, self.perm])

    def restricted(self, support: np.ndarray) -> "GroupPartition":
        """Partition induced on a subset of indices (renumbered 0..len-1).

        Groups that do not intersect the support are dropped.
        """
        support = np.asarray(support, dtype=np.int64)
        pos = -np.ones(self.n, dtype=np.int64)
        pos[support] = np.arange(len(support))
        groups, labels = [], []
        for g in range(self.n_groups):
            sub = pos[self.group(g)]
            sub = sub[sub >= 0]
            if len(sub):
                groups.append(sub)
                labels.append(self.labels[g])
        return GroupPartition.from_groups(len(support), groups, labels)


def build_partition(regions: Regions, grid: DelayDopplerGrid) -> GroupPartition:
    """Group the lattice according to a region record.

    Region 1 contributes one group per Doppler row spanning the near-delay
    band; region 2 one group per row segment per strip; everything else is a
    singleton.  Groups never straddle the ``k = 0`` axis in region 2.
    """
    if regions.m_max > grid.m - 1 or regions.k_max > grid.k:
        raise ValueError("regions exceed the lattice")
    r1_rows = range(-regions.k_s, regions.k_s + 1)
    r1_cols = range(regions.m0, regions.m0 + regions.delta_m + 1)
    groups = [[grid.vec_index(k, m) for m in r1_cols] for k in r1_rows]
    labels = [1] * len(groups)

    r2_first = regions.m0 + regions.delta_m + 1
    r2_cols = range(r2_first, regions.m_max + 1)
    if regions.delta_k > 0 and r2_first <= regions.m_max:
        for k_abs in range(regions.k_s - regions.delta_k + 1, regions.k_s + 1):
            for sign in (+1, -1):
                if k_abs == 0 and sign == -1:
                    continue  # the k = 0 row cannot appear twice
                groups.append([grid.vec_index(sign * k_abs, m) for m in r2_cols])
                labels.append(2)

    member = np.zeros(grid.n, dtype=bool)
    for g in groups:
        member[g] = True
    rest = np.flatnonzero(~member)
    groups.extend([j] for j in rest)
    labels.extend([3] * len(rest))
    return GroupPartition.from_groups(grid.n, groups, labels)


# --------------------------------------------------------------------------
# Geometric variant
# --------------------------------------------------------------------------


def min_strip_doppler_on_ellipse(scenario, tau_total: float, n_samples: int = 8192):
    """Minimum |Doppler| over the constant-delay ellipse inside the strips.

    The ellipse has foci at TX and RX and total path length
    ``tau_total * c``.  Returns None when it does not intersect the diffuse
    strips (including their extent along the road section).
    """
    g = scenario.geometry
    tx, rx = scenario.tx, scenario.rx
    length = tau_total * g.propagation_speed
    cx = 0.5 * (tx.x + rx.x)
    cf = 0.5 * abs(rx.x - tx.x)
    a = 0.5 * length
    if a <= cf:
        return None  # delay at or below line of sight: degenerate ellipse
    b = np.sqrt(a * a - cf * cf)

    def sweep(ts):
        x = cx + a * np.cos(ts)
        y = b * np.sin(ts)
        ok = (
            (np.abs(y) >= g.road_width / 2.0)
            & (np.abs(y) <= g.road_width / 2.0 + g.strip_depth)
            & (np.abs(x) <= g.section_length / 2.0)
        )
        if not ok.any():
            return None, None
        d1 = np.hypot(x - tx.x, y - tx.y)
        d2 = np.hypot(x - rx.x, y - rx.y)
        nus = (tx.v * (x - tx.x) / d1 + rx.v * (x - rx.x) / d2) / g.wavelength
        i = int(np.argmin(np.abs(nus[ok])))
        return float(np.abs(nus[ok][i])), ts[ok][i]

    ts = np.linspace(0.0, 2 * np.pi, n_samples, endpoint=False)
    best, t_best = sweep(ts)
    if best is None:
        return None
    # Two local refinement passes around the coarse winner.
    width = 2 * np.pi / n_samples
    for _ in range(2):
        local = np.linspace(t_best - width, t_best + width, 201)
        cand, t_cand = sweep(local)
        if cand is not None and cand < best:
            best, t_best = cand, t_cand
        width /= 50.0
    return best


def sufficient_delay_margin(scenario) -> float:
    """Smallest region-1 depth (seconds) guaranteeing diffuse confinement.

    Beyond the delay of the ellipse through the outer strip edge on the
    perpendicular bisector, the near-zero-Doppler part of the strips is
    exhausted; region 2's Doppler band then captures all remaining clutter.
    """
    g = scenario.geometry
    d0 = abs(scenario.rx.x - scenario.tx.x)
    reach = np.hypot(d0 / 2.0, g.road_width / 2.0 + g.strip_depth)
    return 2.0 * reach / g.propagation_speed - scenario.tau_los


def geometric_regions(scenario, grid: DelayDopplerGrid, delta_tau: float) -> Regions:
    """Region boundaries from scene geometry.

    ``delta_tau`` sets the region-1 delay depth beyond the direct path; the
    region-2 Doppler width comes from the minimum |Doppler| on the
    constant-delay ellipse at ``tau_los + delta_tau`` intersected with the
    strips (dense parameter sweep).
    """
    if delta_tau <= 0:
        raise ValueError("delta_tau must be positive")
    tau0 = scenario.tau_los - scenario.delay_origin
    m0 = int(grid.delay_bin(tau0))
    if not 0 <= m0 <= grid.m - 1:
        raise ValueError(f"direct path delay bin {m0} is off-lattice")
    m_end = int(grid.delay_bin(tau0 + delta_tau))
    if m_end > grid.m - 1:
        warnings.warn("region-1 delay depth clipped to the lattice edge")
        m_end = grid.m - 1
    m_max = grid.m - 1

    scale = grid.doppler_scale
    k_s = int(nearest_bin(scenario.static_doppler_bound * scale))
    if k_s > grid.k:
        warnings.warn("static Doppler band clipped to the lattice edge")
        k_s = grid.k
    k_max = int(min(grid.k, nearest_bin(scenario.geometry.doppler_ceiling * scale)))
    k_max = max(k_max, k_s)

    nu_inner = min_strip_doppler_on_ellipse(scenario, scenario.tau_los + delta_tau)
    if nu_inner is None:
        warnings.warn("delay ellipse misses the diffuse strips; region 2 is empty")
        delta_k = 0
    else:
        # One-bin guard against rounding at the inner band edge.
        k_inner = max(0, int(nearest_bin(nu_inner * scale)) - 1)
        delta_k = k_s - min(k_inner, k_s)
    return Regions(m0, m_end - m0, m_max, k_s, delta_k, k_max)


# --------------------------------------------------------------------------
# Data-driven variant
# --------------------------------------------------------------------------


def estimate_regions_from_data(
    x_ls: SpreadingFunction, alpha_d: float = 0.4, alpha_nu: float = 0.6
) -> Regions:
    """Region boundaries from the energy profile of a pre-estimate.

    The delay knee is where the running mean of column energies (from the
    strongest column onward) falls below ``alpha_d`` times its first value;
    the Doppler band edges are the first crossings below
    ``alpha_nu * peak`` of the folded row-energy profile of the remaining
    columns.  When a crossing does not exist the boundary clamps to the
    lattice edge with a warning.
    """
    if not 0 < alpha_d < 1 or not 0 < alpha_nu < 1:
        raise ValueError("thresholds must lie in (0, 1)")
    grid = x_ls.grid
    h = x_ls.as_matrix()  # rows k = -K..K, columns m = 0..M-1
    col_energy = np.sum(np.abs(h) ** 2, axis=0)
    if not np.any(col_energy > 0):
        raise ValueError("pre-estimate has no energy")
    m0 = int(np.argmax(col_energy))

    tail = col_energy[m0:]
    running_mean = np.cumsum(tail) / np.arange(1, len(tail) + 1)
    below = np.flatnonzero(running_mean <= alpha_d * running_mean[0])
    if len(below):
        delta_m = int(below[0]) + 1  # number of columns averaged at the knee
    else:
        warnings.warn("no delay knee found; clamping region 1 to the lattice edge")
        delta_m = len(tail) - 1
    delta_m = min(delta_m, grid.m - 1 - m0)

    # Folded Doppler profile of the columns beyond the region-1 band.
    far = np.abs(h[:, m0 + delta_m :]) ** 2
    row = np.sum(far, axis=1)  # index k + K
    e_nu = np.empty(grid.k + 1)
    e_nu[0] = row[grid.k]  # k = 0 appears once, not twice
    for k in range(1, grid.k + 1):
        e_nu[k] = row[grid.k + k] + row[grid.k - k]
    k0 = int(np.argmax(e_nu))
    t2 = alpha_nu * e_nu[k0]

    above = np.flatnonzero(e_nu[k0 + 1 :] < t2)
    if len(above):
        k_s = k0 + 1 + int(above[0])  # first bin below the threshold
    else:
        warnings.warn("no upper Doppler crossing; clamping to the lattice edge")
        k_s = grid.k
    below_band = np.flatnonzero(e_nu[:k0] < t2)
    if len(below_band):
        k_inner = int(below_band[-1])  # crossing row below the band
    else:
        k_inner = 0
        if k0 > 0:
            warnings.warn("no lower Doppler crossing; band extends to zero")
    delta_k = k_s - min(k_inner, k_s)

    m_max = grid.m - 1
    return Regions(m0, delta_m, m_max, k_s, delta_k, grid.k)
