"""Delay-Doppler lattice bookkeeping shared by simulator, observation model
and estimators.

A channel tap lives on the integer lattice (k, m) with Doppler bin
k in [-K, K] and delay tap m in [0, M-1].  The lattice is flattened into a
single vector with index j = m*(2K+1) + k + K, the ordering every matrix in
the observation model uses.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def nearest_bin(x):
    """Nearest-integer lattice rounding, half away from -inf (floor(x+0.5)).

    Deterministic and free of the round-half-to-even surprises of np.round;
    works on scalars and arrays.
    """
    return np.floor(np.asarray(x) + 0.5).astype(int)


@dataclass(frozen=True)
class DelayDopplerGrid:
    """Sampling lattice of the discretized delay-Doppler channel.

    Parameters
    ----------
    ts : float
        Sample period in seconds.
    nr : int
        Number of received samples in the observation block.
    k : int
        Doppler half-span; bins run -k .. k (2k+1 rows).
    m : int
        Number of delay taps; taps run 0 .. m-1.

    The Doppler axis must oversample the observation, 2k+1 >= nr, so that the
    discrete representation can hold any length-nr received block.
    """

    ts: float
    nr: int
    k: int
    m: int

    def __post_init__(self):
        if self.ts <= 0:
            raise ValueError("sample period must be positive")
        if self.nr < 1 or self.k < 0 or self.m < 1:
            raise ValueError("grid dimensions must be positive")
        if 2 * self.k + 1 < self.nr:
            raise ValueError(
                f"Doppler axis too short: 2K+1={2 * self.k + 1} < N_r={self.nr}"
            )

    @property
    def n_doppler(self) -> int:
        """Number of Doppler rows, 2K+1."""
        return 2 * self.k + 1

    @property
    def n(self) -> int:
        """Total number of lattice points M*(2K+1)."""
        return self.m * self.n_doppler

    @property
    def doppler_scale(self) -> float:
        """Multiply a Doppler shift in Hz by this to get a fractional bin."""
        return self.ts * self.n_doppler

    @property
    def doppler_bin_hz(self) -> float:
        """Doppler frequency step of one bin, 1/((2K+1) Ts)."""
        return 1.0 / self.doppler_scale

    def vec_index(self, kk, mm):
        """Flatten Doppler bin kk in [-K,K], delay tap mm in [0,M-1]."""
        kk = np.asarray(kk)
        mm = np.asarray(mm)
        if np.any(np.abs(kk) > self.k):
            raise ValueError("Doppler bin outside [-K, K]")
        if np.any((mm < 0) | (mm >= self.m)):
            raise ValueError("delay tap outside [0, M-1]")
        return mm * self.n_doppler + kk + self.k

    def unvec(self, j):
        """Inverse of vec_index: j -> (kk, mm)."""
        j = np.asarray(j)
        if np.any((j < 0) | (j >= self.n)):
            raise ValueError("vector index out of range")
        mm, r = np.divmod(j, self.n_doppler)
        return r - self.k, mm

    def doppler_bin(self, nu_hz):
        """Nearest Doppler bin for a shift in Hz (not range-checked)."""
        return nearest_bin(np.asarray(nu_hz) * self.doppler_scale)

    def delay_bin(self, tau_s):
        """Nearest delay tap for a delay in seconds (not range-checked)."""
        return nearest_bin(np.asarray(tau_s) / self.ts)


@dataclass
class SpreadingFunction:
    """Discrete spreading function: complex amplitudes on a delay-Doppler grid."""

    grid: DelayDopplerGrid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.complex128)
        if self.values.shape != (self.grid.n,):
            raise ValueError(
                f"expected {self.grid.n} values, got shape {self.values.shape}"
            )

    @classmethod
    def zeros(cls, grid: DelayDopplerGrid) -> "SpreadingFunction":
        return cls(grid, np.zeros(grid.n, dtype=np.complex128))

    def as_matrix(self) -> np.ndarray:
        """Return H[k+K, m], shape (2K+1, M)."""
        return self.values.reshape(self.grid.m, self.grid.n_doppler).T

    @classmethod
    def from_matrix(cls, grid: DelayDopplerGrid, h: np.ndarray) -> "SpreadingFunction":
        h = np.asarray(h, dtype=np.complex128)
        if h.shape != (grid.n_doppler, grid.m):
            raise ValueError(f"expected shape {(grid.n_doppler, grid.m)}, got {h.shape}")
        return cls(grid, h.T.reshape(-1))

    @property
    def energy(self) -> float:
        return float(np.vdot(self.values, self.values).real)
