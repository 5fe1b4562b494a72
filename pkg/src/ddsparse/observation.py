"""Discrete observation model: pulse shaping, leakage kernel, pilot matrix.

The received block is modeled as y = S G x + z where

* x is the vectorized on-lattice spreading function (one complex gain per
  delay-Doppler bin),
* G spreads every lattice gain over neighboring bins according to the
  transmit/receive pulse pair and the finite observation length (leakage),
* S maps the leaky spreading function to received samples through the known
  pilot sequence,
* z is circular complex white Gaussian noise.

The module also evaluates the *exact* off-grid spreading function of a set of
continuous (delay, Doppler, gain) paths, which is what G approximates on the
lattice, plus the time-domain tap representation used as a cross-check oracle
in the tests.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lattice import DelayDopplerGrid

_INT_TOL = 1e-12


# ---------------------------------------------------------------------------
# pulses
# ---------------------------------------------------------------------------


def raised_cosine(t, ts: float, beta: float):
    """Zero-phase raised-cosine pulse p(t), unit peak, Nyquist for sample ts.

    Exact zeros at nonzero integer multiples of ts and the removable
    singularity at |t| = ts/(2 beta) are special-cased so that on-grid
    evaluations are exact (the leakage matrix degenerates to the identity in
    the Nyquist case).
    """
    t = np.asarray(t, dtype=float)
    u = np.atleast_1d(t / ts)
    out = np.empty_like(u)
    # exact delta on integer lags
    on_int = np.abs(u - np.round(u)) < _INT_TOL
    out[on_int] = (np.abs(u[on_int]) < 0.5).astype(float)
    rest = ~on_int
    ur = u[rest]
    if beta > 0:
        den = 1.0 - (2.0 * beta * ur) ** 2
        sing = np.abs(den) < _INT_TOL
        val = np.empty_like(ur)
        # removable singularity at u = 1/(2 beta)
        val[sing] = (np.pi / 4.0) * np.sinc(1.0 / (2.0 * beta))
        ok = ~sing
        val[ok] = np.sinc(ur[ok]) * np.cos(np.pi * beta * ur[ok]) / den[ok]
        out[rest] = val
    else:
        out[rest] = np.sinc(ur)
    return out.reshape(t.shape) if t.ndim else float(out[0])


def root_raised_cosine(t, ts: float, beta: float):
    """Zero-phase root-raised-cosine pulse, unit energy over ts.

    Convolving two of these reproduces :func:`raised_cosine` (cross-checked
    numerically in the tests).
    """
    t = np.asarray(t, dtype=float)
    u = np.atleast_1d(t / ts)
    out = np.empty_like(u)
    at_zero = np.abs(u) < _INT_TOL
    out[at_zero] = 1.0 - beta + 4.0 * beta / np.pi
    if beta > 0:
        at_sing = np.abs(np.abs(u) - 1.0 / (4.0 * beta)) < _INT_TOL
        rest = ~(at_zero | at_sing)
        out[at_sing] = (beta / np.sqrt(2.0)) * (
            (1.0 + 2.0 / np.pi) * np.sin(np.pi / (4.0 * beta))
            + (1.0 - 2.0 / np.pi) * np.cos(np.pi / (4.0 * beta))
        )
    else:
        rest = ~at_zero
    ur = u[rest]
    num = np.sin(np.pi * ur * (1.0 - beta)) + 4.0 * beta * ur * np.cos(
        np.pi * ur * (1.0 + beta)
    )
    den = np.pi * ur * (1.0 - (4.0 * beta * ur) ** 2)
    out[rest] = num / den
    out /= np.sqrt(ts)
    return out.reshape(t.shape) if t.ndim else float(out[0])


@dataclass(frozen=True)
class PulsePair:
    """Matched transmit/receive root-raised-cosine pair.

    ``support`` is the one-sided width (seconds) outside which the combined
    zero-phase pulse is truncated to exactly zero.
    """

    rolloff: float = 0.25
    support: float = 1e-6

    def __post_init__(self):
        if not 0.0 <= self.rolloff <= 1.0:
            raise ValueError("rolloff must lie in [0, 1]")
        if self.support <= 0:
            raise ValueError("support must be positive")

    def combined(self, t, ts: float):
        """Effective pulse p = p_t * p_r (raised cosine), windowed to support."""
        t = np.asarray(t, dtype=float)
        val = raised_cosine(t, ts, self.rolloff)
        out = np.where(np.abs(t) < self.support, val, 0.0)
        return out if out.ndim else float(out)

    def root(self, t, ts: float):
        """One root pulse of the pair, windowed to the same support."""
        t = np.asarray(t, dtype=float)
        val = root_raised_cosine(t, ts, self.rolloff)
        out = np.where(np.abs(t) < self.support, val, 0.0)
        return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# Dirichlet kernel
# ---------------------------------------------------------------------------


def dirichlet_kernel(k, x, nr: int, big_k: int):
    """Windowed-exponential DFT coefficient w(k, x).

    (2K+1)-point DFT, at bin k, of exp(j 2 pi x n) observed for n = 0..nr-1;
    x is the frequency normalized to the sample rate (nu * Ts).  Periodic in
    (k/(2K+1) - x) with period 1; the on-grid case returns exactly nr/(2K+1).
    """
    n2 = 2 * big_k + 1
    if nr > n2:
        raise ValueError("observation length exceeds DFT size (need 2K+1 >= N_r)")
    k = np.asarray(k)
    delta = k / n2 - np.asarray(x)
    # reduce by periodicity; integer offsets hit the on-grid value exactly
    frac = delta - np.round(delta)
    on_grid = np.abs(frac) < _INT_TOL
    frac_safe = np.where(on_grid, 0.5, frac)  # dummy to avoid 0/0
    num = np.sin(np.pi * frac_safe * nr)
    den = np.sin(np.pi * frac_safe)
    phase = np.exp(-1j * np.pi * frac_safe * (nr - 1))
    val = phase * num / (n2 * den)
    out = np.where(on_grid, nr / n2 + 0j, val)
    return out if out.ndim else complex(out)


# ---------------------------------------------------------------------------
# leakage kernel and pilot matrix
# ---------------------------------------------------------------------------


def leakage_entry(kk, mm, kp, mp, grid: DelayDopplerGrid, pulse: PulsePair):
    """Single leakage coefficient g[k, m, k', m']."""
    n2 = grid.n_doppler
    w = dirichlet_kernel(np.asarray(kk) - np.asarray(kp), 0.0, grid.nr, grid.k)
    ph = np.exp(-2j * np.pi * np.asarray(kp) * (np.asarray(mm) - np.asarray(mp)) / n2)
    return ph * w * pulse.combined((np.asarray(mm) - np.asarray(mp)) * grid.ts, grid.ts)


def build_leakage_matrix(
    grid: DelayDopplerGrid, pulse: PulsePair, threshold: float | None = None
):
    """Dense leakage matrix G, shape (n, n), column-indexed by source bins.

    G[(k,m),(k',m')] = exp(-j 2 pi k'(m-m')/(2K+1)) w(k-k', 0) p((m-m') Ts).
    With ``threshold`` set, entries below threshold * max|G| are dropped and a
    CSR sparse matrix is returned instead (leakage decays quickly, so the
    thresholded variant is nearly banded).

    Intended for small grids; the benchmark path never materializes G (see
    :func:`pilot_leakage_product`).
    """
    n2, m = grid.n_doppler, grid.m
    offsets = np.arange(-(n2 - 1), n2)
    wvec = dirichlet_kernel(offsets, 0.0, grid.nr, grid.k)  # w(dk, 0)
    a = np.arange(n2)
    w_toe = wvec[(a[:, None] - a[None, :]) + n2 - 1]  # W[k, k'] = w(k - k')
    kp_signed = a - grid.k
    g = np.zeros((grid.n, grid.n), dtype=np.complex128)
    for mm in range(m):
        for mp in range(m):
            dm = mm - mp
            pval = float(pulse.combined(dm * grid.ts, grid.ts))
            if pval == 0.0:
                continue
            row = pval * np.exp(-2j * np.pi * kp_signed * dm / n2)
            g[mm * n2 : (mm + 1) * n2, mp * n2 : (mp + 1) * n2] = w_toe * row[None, :]
    if threshold is not None:
        from scipy.sparse import csr_matrix

        mask = np.abs(g) >= threshold * np.abs(g).max()
        return csr_matrix(np.where(mask, g, 0.0))
    return g


def make_pilot(grid: DelayDopplerGrid, seed=None, kind: str = "gaussian") -> np.ndarray:
    """Pilot sequence s[n] for n = -(M-1) .. N_r-1 (length N_r + M - 1).

    "gaussian" draws i.i.d. circular complex Gaussian symbols rescaled to
    exactly unit average power; "ones" is the constant sequence used by
    degenerate-case tests.
    """
    length = grid.nr + grid.m - 1
    if kind == "ones":
        return np.ones(length, dtype=np.complex128)
    if kind != "gaussian":
        raise ValueError(f"unknown pilot kind {kind!r}")
    rng = np.random.default_rng(seed)
    s = rng.standard_normal(length) + 1j * rng.standard_normal(length)
    return s * np.sqrt(length / np.sum(np.abs(s) ** 2))


def build_pilot_matrix(pilot: np.ndarray, grid: DelayDopplerGrid) -> np.ndarray:
    """Pilot observation matrix S, shape (N_r, n).

    Block m equals diag(s[-m], ..., s[N_r-1-m]) @ Omega with the Vandermonde
    phase matrix Omega[i, j] = exp(j 2 pi i (j - K) / (2K+1)).
    """
    pilot = np.asarray(pilot, dtype=np.complex128)
    if pilot.shape != (grid.nr + grid.m - 1,):
        raise ValueError(
            f"pilot must have length N_r + M - 1 = {grid.nr + grid.m - 1}"
        )
    n2 = grid.n_doppler
    i = np.arange(grid.nr)[:, None]
    j = np.arange(n2)[None, :] - grid.k
    omega = np.exp(2j * np.pi * i * j / n2)
    s = np.empty((grid.nr, grid.n), dtype=np.complex128)
    for m in range(grid.m):
        # s[n - m] for n = 0..N_r-1 lives at pilot[(M-1-m) : (M-1-m)+N_r]
        win = pilot[grid.m - 1 - m : grid.m - 1 - m + grid.nr]
        s[:, m * n2 : (m + 1) * n2] = win[:, None] * omega
    return s


def pilot_leakage_product(
    s_mat: np.ndarray, grid: DelayDopplerGrid, pulse: PulsePair
) -> np.ndarray:
    """A = S @ G without materializing G.

    Uses the block structure of G: its (m, m') block is W * row(m - m') with a
    shared Toeplitz Doppler-smear factor W, so A's column block m' equals
    sum_m (S_m W) * row(m - m'), needing only M small matmuls.
    """
    n2, m = grid.n_doppler, grid.m
    nr = s_mat.shape[0]
    offsets = np.arange(-(n2 - 1), n2)
    wvec = dirichlet_kernel(offsets, 0.0, grid.nr, grid.k)
    a = np.arange(n2)
    w_toe = wvec[(a[:, None] - a[None, :]) + n2 - 1]
    kp_signed = a - grid.k
    sw = np.empty((m, nr, n2), dtype=np.complex128)  # S_m @ W per delay block
    for mm in range(m):
        sw[mm] = s_mat[:, mm * n2 : (mm + 1) * n2] @ w_toe
    out = np.zeros((nr, grid.n), dtype=np.complex128)
    for mp in range(m):
        acc = np.zeros((nr, n2), dtype=np.complex128)
        for mm in range(m):
            dm = mm - mp
            pval = float(pulse.combined(dm * grid.ts, grid.ts))
            if pval == 0.0:
                continue
            row = pval * np.exp(-2j * np.pi * kp_signed * dm / n2)
            acc += sw[mm] * row[None, :]
        out[:, mp * n2 : (mp + 1) * n2] = acc
    return out


def apply_leakage(x: np.ndarray, grid: DelayDopplerGrid, pulse: PulsePair) -> np.ndarray:
    """x_l = G x without materializing G.

    Exploits the same block structure as :func:`pilot_leakage_product`: the
    (m, m') block of G is the shared Doppler-smear Toeplitz W scaled by a
    pulse sample and a per-source-bin phase row, so the product costs M^2
    small matvecs instead of an N x N matrix.  This is the map from an
    on-lattice point spreading function to the spreading function an
    N_r-sample receiver actually observes.
    """
    x = np.asarray(x, dtype=np.complex128)
    if x.shape != (grid.n,):
        raise ValueError(f"expected a length-{grid.n} lattice vector")
    n2, m = grid.n_doppler, grid.m
    blocks = x.reshape(m, n2)
    offsets = np.arange(-(n2 - 1), n2)
    wvec = dirichlet_kernel(offsets, 0.0, grid.nr, grid.k)
    a = np.arange(n2)
    w_toe = wvec[(a[:, None] - a[None, :]) + n2 - 1]
    kp_signed = a - grid.k
    out = np.zeros((m, n2), dtype=np.complex128)
    for mm in range(m):
        for mp in range(m):
            dm = mm - mp
            pval = float(pulse.combined(dm * grid.ts, grid.ts))
            if pval == 0.0:
                continue
            row = pval * np.exp(-2j * np.pi * kp_signed * dm / n2)
            out[mm] += w_toe @ (row * blocks[mp])
    return out.reshape(-1)


# ---------------------------------------------------------------------------
# exact off-grid synthesis and oracles
# ---------------------------------------------------------------------------


def spreading_with_leakage(
    taus, nus, gains, grid: DelayDopplerGrid, pulse: PulsePair
) -> np.ndarray:
    """Exact spreading function of continuous paths, vectorized on the lattice.

    For each path (tau, nu, gain) accumulates
    gain * exp(-j 2 pi nu (m Ts - tau)) p(m Ts - tau) w(k, nu Ts)
    over all lattice bins (k, m).  This is the quantity the on-lattice
    approximation G x tries to reproduce.
    """
    taus = np.atleast_1d(np.asarray(taus, dtype=float))
    nus = np.atleast_1d(np.asarray(nus, dtype=float))
    gains = np.atleast_1d(np.asarray(gains, dtype=np.complex128))
    n2 = grid.n_doppler
    kbins = np.arange(-grid.k, grid.k + 1)
    mtaps = np.arange(grid.m)
    h = np.zeros((n2, grid.m), dtype=np.complex128)
    for tau, nu, gain in zip(taus, nus, gains, strict=True):
        wcol = dirichlet_kernel(kbins, nu * grid.ts, grid.nr, grid.k)
        lag = mtaps * grid.ts - tau
        prow = pulse.combined(lag, grid.ts) * np.exp(-2j * np.pi * nu * lag)
        h += gain * np.outer(wcol, prow)
    return h.T.reshape(-1)  # vec index j = m (2K+1) + k + K


def time_taps_from_paths(taus, nus, gains, grid: DelayDopplerGrid, pulse: PulsePair):
    """Time-varying taps h[n, m] of continuous paths (oracle for the tests)."""
    n = np.arange(grid.nr)[:, None]
    m = np.arange(grid.m)[None, :]
    h = np.zeros((grid.nr, grid.m), dtype=np.complex128)
    for tau, nu, gain in zip(
        np.atleast_1d(taus), np.atleast_1d(nus), np.atleast_1d(gains), strict=True
    ):
        h += (
            gain
            * np.exp(2j * np.pi * nu * ((n - m) * grid.ts + tau))
            * pulse.combined(m * grid.ts - tau, grid.ts)
        )
    return h


def spreading_dft(h_nm: np.ndarray, grid: DelayDopplerGrid) -> np.ndarray:
    """(2K+1)-point DFT of time taps: H[k, m], k = -K..K (rows k+K)."""
    n2 = grid.n_doppler
    n = np.arange(grid.nr)
    k = np.arange(-grid.k, grid.k + 1)
    dft = np.exp(-2j * np.pi * np.outer(k, n) / n2) / n2
    return dft @ h_nm


def received_time_domain(h_nm: np.ndarray, pilot: np.ndarray, grid: DelayDopplerGrid):
    """y[n] = sum_m h[n, m] s[n - m] (noise-free, direct time-domain oracle)."""
    y = np.zeros(grid.nr, dtype=np.complex128)
    for n in range(grid.nr):
        for m in range(grid.m):
            y[n] += h_nm[n, m] * pilot[grid.m - 1 + n - m]
    return y


def synthesize_measurement(
    x: np.ndarray, a_mat: np.ndarray, noise_var: float, rng=None
) -> np.ndarray:
    """y = A x + z with z ~ CN(0, noise_var I); noise_var = 0 is noise-free."""
    if noise_var < 0:
        raise ValueError("noise variance must be nonnegative")
    y = a_mat @ np.asarray(x, dtype=np.complex128)
    if noise_var > 0:
        rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
        z = np.sqrt(noise_var / 2.0) * (
            rng.standard_normal(y.shape) + 1j * rng.standard_normal(y.shape)
        )
        y = y + z
    return y
