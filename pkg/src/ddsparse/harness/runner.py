"""Monte-Carlo benchmark sweeps, NMSE accounting, and the leakage ablation.

A sweep runs the full estimation pipeline per (seed, SNR, estimator):
draw a road scene, place its paths on the lattice, synthesize a pilot
observation at the requested SNR, derive the group partition from the
scene geometry, run the estimator, and score it.  All randomness comes
from the explicit seed list, so rows are reproducible bit for bit; the
expensive per-seed artifacts (observation operator and its factorization)
are shared across the SNR and estimator axes.
"""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, replace

import numpy as np

from ..channel import ground_truth_spreading, oracle_diffuse_variance, sample_scenario
from ..estimator import (
    AdmmConfig,
    Precomputed,
    admm_solve,
    cs_estimate,
    hsd_estimate,
    known_support_estimate,
    ls_estimate,
    wiener_estimate,
)
from ..lattice import DelayDopplerGrid
from ..observation import (
    PulsePair,
    apply_leakage,
    build_pilot_matrix,
    make_pilot,
    pilot_leakage_product,
    spreading_with_leakage,
)
from ..proxops import Regularizer
from ..regions import Regions, build_partition, geometric_regions
from .config import ExperimentConfig

_PILOT_STREAM = 101
_NOISE_STREAM = 202


def nmse(x_hat: np.ndarray, x_true: np.ndarray) -> float:
    """Squared error normalized by the true energy, ||x_hat - x||^2 / ||x||^2."""
    x_hat = np.asarray(x_hat)
    x_true = np.asarray(x_true)
    if x_hat.shape != x_true.shape:
        raise ValueError(f"shape mismatch: {x_hat.shape} vs {x_true.shape}")
    denom = float(np.real(np.vdot(x_true, x_true)))
    if denom <= 0.0:
        raise ValueError("true channel has zero energy")
    diff = x_hat - x_true
    return float(np.real(np.vdot(diff, diff))) / denom


def realized_snr_db(signal: np.ndarray, noise: np.ndarray) -> float:
    """Empirical SNR of one synthesized measurement, in dB."""
    ps = float(np.real(np.vdot(signal, signal)))
    pn = float(np.real(np.vdot(noise, noise)))
    return 10.0 * np.log10(ps / pn)


@dataclass(frozen=True)
class BenchmarkRow:
    """One (estimator, SNR, seed) cell of a sweep.

    ``nmse`` is None exactly when the cell failed, in which case ``error``
    holds the diagnostic; failed cells never abort the sweep.
    """

    estimator: str
    snr_db: float
    seed: int
    nmse: float | None
    iterations: int
    wall_time: float
    error: str = ""

    def __post_init__(self):
        if self.nmse is None and not self.error:
            raise ValueError("a row without an NMSE must carry an error message")
        if self.nmse is not None and not self.nmse >= 0.0:
            raise ValueError("NMSE must be nonnegative")
        if self.iterations < 0:
            raise ValueError("iteration count must be nonnegative")


@dataclass(frozen=True)
class AblationRow:
    """Paired leakage-model comparison for one (estimator, SNR, seed) cell."""

    estimator: str
    snr_db: float
    seed: int
    nmse_compensated: float | None
    nmse_uncompensated: float | None
    error: str = ""

    def __post_init__(self):
        missing = self.nmse_compensated is None or self.nmse_uncompensated is None
        if missing and not self.error:
            raise ValueError("a row without NMSE values must carry an error message")


def inflate_regions(regions: Regions, factor: float) -> Regions:
    """Widen a region record by ``factor``, clamped to the lattice.

    Models a receiver that over-estimates the delay spread and Doppler
    band of the scene: the dense groups grow, absorbing bins that are
    actually empty.
    """
    if factor < 1.0:
        raise ValueError("inflation factor must be >= 1")
    if factor == 1.0:
        return regions
    delta_m = min(regions.m_max - regions.m0, int(np.ceil(regions.delta_m * factor)))
    k_s = min(regions.k_max, int(np.ceil(regions.k_s * factor)))
    delta_k = min(k_s, int(np.ceil(regions.delta_k * factor)))
    return Regions(regions.m0, delta_m, regions.m_max, k_s, delta_k, regions.k_max)


# ---------------------------------------------------------------------------
# per-seed context
# ---------------------------------------------------------------------------


class SeedSystem:
    """Everything one seed contributes to a sweep, built once and reused
    across the SNR and estimator axes."""

    def __init__(self, cfg: ExperimentConfig, seed: int):
        self.cfg = cfg
        self.seed = seed
        self.grid = cfg.grid()
        self.pulse = PulsePair()
        self.scenario = sample_scenario(
            cfg.geometry, cfg.n_md, cfg.n_sd, cfg.n_di, seed=seed, profile=cfg.profile
        ).synced_to_los(self.grid)
        self.x_true = ground_truth_spreading(self.scenario, self.grid).values
        pilot = make_pilot(self.grid, seed=[seed, _PILOT_STREAM], kind=cfg.pilot_kind)
        self.s_mat = build_pilot_matrix(pilot, self.grid)
        if cfg.use_leakage:
            self.a = pilot_leakage_product(self.s_mat, self.grid, self.pulse)
        else:
            self.a = self.s_mat
        self.regions = inflate_regions(
            geometric_regions(self.scenario, self.grid, cfg.delta_tau),
            cfg.region_inflation,
        )
        self.partition = build_partition(self.regions, self.grid)
        self.pre = Precomputed(self.a, cfg.rho)
        self.pre_ridge = Precomputed(self.a, cfg.ls_rho)
        self.support = self.x_true != 0
        self.region_mask = self.partition.labels[self.partition.group_of_index] != 3
        self.diffuse_var = oracle_diffuse_variance(self.scenario, self.grid)
        self.true_power = float(np.real(np.vdot(self.x_true, self.x_true)))
        self.ax = self.a @ self.x_true
        self.signal_power = float(np.real(np.vdot(self.ax, self.ax)))
        rng = np.random.default_rng([seed, _NOISE_STREAM])
        self.z0 = (
            rng.standard_normal(self.grid.nr) + 1j * rng.standard_normal(self.grid.nr)
        ) / np.sqrt(2.0)

    def noise_var(self, snr_db: float) -> float:
        return self.signal_power / (self.grid.nr * 10.0 ** (snr_db / 10.0))

    def measurement(self, snr_db: float) -> np.ndarray:
        return self.ax + np.sqrt(self.noise_var(snr_db)) * self.z0


def _group_regularizer(cfg: ExperimentConfig, name: str) -> Regularizer:
    if name == "nested-scad":
        return Regularizer.scad(cfg.scad_mu)
    if name == "nested-mcp":
        return Regularizer.mcp(cfg.mcp_mu)
    return Regularizer.soft()


def _admm_config(cfg: ExperimentConfig, lam_group: float, lam_elem: float, f_g=None):
    return AdmmConfig(
        lam_group=lam_group,
        lam_elem=lam_elem,
        rho=cfg.rho,
        f_g=f_g if f_g is not None else Regularizer.soft(),
        n_max=cfg.n_max,
        tol=cfg.tol,
        track_objective=False,
    )


def dispatch_estimator(
    name: str,
    y: np.ndarray,
    a: np.ndarray,
    noise_var: float,
    cfg: ExperimentConfig,
    *,
    partition,
    pre: Precomputed,
    pre_ridge: Precomputed,
    support: np.ndarray,
    diffuse_var: np.ndarray,
    region_mask: np.ndarray,
    true_power: float,
):
    """Run one named estimator; returns (x_hat, iterations).

    The noise-calibrated penalty rule lam = scale * sigma_z * sqrt(N_r)
    tracks how the matched-filter noise level of the observation operator
    grows with the block length, so a single dimensionless scale works
    across SNR points and presets.
    """
    n_obs = a.shape[0]
    sigma = float(np.sqrt(noise_var))
    unit = sigma * np.sqrt(n_obs)
    if name == "ls":
        return ls_estimate(y, a, rho=cfg.ls_rho, pre=pre_ridge), 0
    if name == "wiener":
        x = wiener_estimate(y, a, region_mask, noise_var, total_power=true_power)
        return x, 0
    if name == "hsd":
        x = hsd_estimate(
            y, a, diffuse_var, noise_var, gamma=cfg.hsd_gamma,
            rho=cfg.ls_rho, pre=pre_ridge,
        )
        return x, 0
    if name == "oracle-support":
        lam = cfg.oracle_lam_scale * unit
        res = known_support_estimate(
            y, a, support, _admm_config(cfg, lam, lam / cfg.lam_ratio),
            partition=partition,
        )
        return res.x_hat, res.iterations
    if name == "cs":
        lam_e = cfg.cs_lam_scale * unit
        res = cs_estimate(y, a, _admm_config(cfg, 0.0, lam_e), pre=pre)
        return res.x_hat, res.iterations
    if name in ("nested-soft", "nested-scad", "nested-mcp"):
        lam_g = cfg.lam_scale * unit
        acfg = _admm_config(
            cfg, lam_g, lam_g / cfg.lam_ratio, f_g=_group_regularizer(cfg, name)
        )
        res = admm_solve(y, a, partition, acfg, pre=pre)
        return res.x_hat, res.iterations
    raise ValueError(f"unknown estimator {name!r}")


def _dispatch_on(system: SeedSystem, name: str, y: np.ndarray, noise_var: float):
    return dispatch_estimator(
        name, y, system.a, noise_var, system.cfg,
        partition=system.partition,
        pre=system.pre,
        pre_ridge=system.pre_ridge,
        support=system.support,
        diffuse_var=system.diffuse_var,
        region_mask=system.region_mask,
        true_power=system.true_power,
    )


# ---------------------------------------------------------------------------
# sweeps
# ---------------------------------------------------------------------------


def run_benchmark(cfg: ExperimentConfig) -> list:
    """Full sweep: one row per (seed, SNR, estimator), sorted.

    Any per-cell failure (including a seed whose scene does not fit on the
    lattice) is recorded in its rows and the sweep continues.
    """
    rows = []
    for seed in cfg.seeds:
        try:
            system = SeedSystem(cfg, seed)
        except Exception as exc:  # scene-level failure poisons the whole seed
            msg = f"{type(exc).__name__}: {exc}"
            for snr in cfg.snr_db:
                for est in cfg.estimators:
                    rows.append(BenchmarkRow(est, snr, seed, None, 0, 0.0, msg))
            continue
        for snr in cfg.snr_db:
            noise_var = system.noise_var(snr)
            y = system.measurement(snr)
            for est in cfg.estimators:
                start = time.perf_counter()
                try:
                    x_hat, iters = _dispatch_on(system, est, y, noise_var)
                    err = nmse(x_hat, system.x_true)
                    wall = time.perf_counter() - start
                    rows.append(BenchmarkRow(est, snr, seed, err, iters, wall))
                except Exception as exc:
                    wall = time.perf_counter() - start
                    msg = f"{type(exc).__name__}: {exc}"
                    rows.append(BenchmarkRow(est, snr, seed, None, 0, wall, msg))
    rows.sort(key=lambda r: (r.estimator, r.snr_db, r.seed))
    return rows


def mean_nmse(rows) -> dict:
    """Mean linear NMSE of successful rows, keyed by (estimator, snr_db)."""
    cells: dict = {}
    for r in rows:
        if r.nmse is None:
            continue
        cells.setdefault((r.estimator, r.snr_db), []).append(r.nmse)
    return {key: float(np.mean(vals)) for key, vals in cells.items()}


def leakage_ablation(cfg: ExperimentConfig) -> list:
    """Estimate every cell twice: leakage modeled versus ignored.

    The measurement is synthesized from the exact spreading function of the
    scene's paths (continuous delays and Dopplers when ``cfg.fractional``,
    lattice-snapped otherwise).  Because the pilot operator composed with
    the on-lattice leakage kernel equals the pilot operator alone whenever
    the combined pulse is Nyquist and the Doppler axis covers the block,
    the model choice is observable in the delay-Doppler domain: the
    compensated arm maps its sparse solution through the leakage kernel
    before scoring against the true spreading function, while the
    uncompensated arm reports its solution as-is.
    """
    grid = cfg.grid()
    pulse = PulsePair()
    rows = []
    for seed in cfg.seeds:
        try:
            scenario = sample_scenario(
                cfg.geometry, cfg.n_md, cfg.n_sd, cfg.n_di, seed=seed,
                profile=cfg.profile,
            ).synced_to_los(grid)
            x_point = ground_truth_spreading(scenario, grid).values
            taus, nus, gains, _ = scenario.paths()
            taus = taus - scenario.delay_origin
            if not cfg.fractional:
                taus = grid.delay_bin(taus) * grid.ts
                nus = grid.doppler_bin(nus) * grid.doppler_bin_hz
            x_leaky = spreading_with_leakage(taus, nus, gains, grid, pulse)
            pilot = make_pilot(grid, seed=[seed, _PILOT_STREAM], kind=cfg.pilot_kind)
            s_mat = build_pilot_matrix(pilot, grid)
            a_comp = pilot_leakage_product(s_mat, grid, pulse)
            regions = inflate_regions(
                geometric_regions(scenario, grid, cfg.delta_tau),
                cfg.region_inflation,
            )
            partition = build_partition(regions, grid)
            support = x_point != 0
            region_mask = partition.labels[partition.group_of_index] != 3
            diffuse_var = oracle_diffuse_variance(scenario, grid)
            true_power = float(np.real(np.vdot(x_leaky, x_leaky)))
            y0 = s_mat @ x_leaky
            signal_power = float(np.real(np.vdot(y0, y0)))
            rng = np.random.default_rng([seed, _NOISE_STREAM])
            z0 = (
                rng.standard_normal(grid.nr) + 1j * rng.standard_normal(grid.nr)
            ) / np.sqrt(2.0)
            arms = {
                True: (a_comp, Precomputed(a_comp, cfg.rho), Precomputed(a_comp, cfg.ls_rho)),
                False: (s_mat, Precomputed(s_mat, cfg.rho), Precomputed(s_mat, cfg.ls_rho)),
            }
        except Exception as exc:
            msg = f"{type(exc).__name__}: {exc}"
            for snr in cfg.snr_db:
                for est in cfg.estimators:
                    rows.append(AblationRow(est, snr, seed, None, None, msg))
            continue
        for snr in cfg.snr_db:
            noise_var = signal_power / (grid.nr * 10.0 ** (snr / 10.0))
            y = y0 + np.sqrt(noise_var) * z0
            for est in cfg.estimators:
                try:
                    scores = {}
                    for compensated, (a, pre, pre_ridge) in arms.items():
                        x_hat, _ = dispatch_estimator(
                            est, y, a, noise_var, cfg,
                            partition=partition, pre=pre, pre_ridge=pre_ridge,
                            support=support, diffuse_var=diffuse_var,
                            region_mask=region_mask, true_power=true_power,
                        )
                        if compensated:
                            x_hat = apply_leakage(x_hat, grid, pulse)
                        scores[compensated] = nmse(x_hat, x_leaky)
                    rows.append(
                        AblationRow(est, snr, seed, scores[True], scores[False])
                    )
                except Exception as exc:
                    msg = f"{type(exc).__name__}: {exc}"
                    rows.append(AblationRow(est, snr, seed, None, None, msg))
    rows.sort(key=lambda r: (r.estimator, r.snr_db, r.seed))
    return rows


def ablation_delta_db(rows) -> dict:
    """Mean NMSE gain of the compensated arm, in dB, per (estimator, snr)."""
    comp: dict = {}
    unc: dict = {}
    for r in rows:
        if r.nmse_compensated is None or r.nmse_uncompensated is None:
            continue
        comp.setdefault((r.estimator, r.snr_db), []).append(r.nmse_compensated)
        unc.setdefault((r.estimator, r.snr_db), []).append(r.nmse_uncompensated)
    return {
        key: float(10.0 * np.log10(np.mean(unc[key]) / np.mean(comp[key])))
        for key in comp
    }


def delay_window_sweep(
    cfg: ExperimentConfig, m_values, estimator: str, snr_db: float
) -> dict:
    """NMSE of one estimator as the receiver's delay window M varies.

    The physical channel and measurement are fixed (synthesized on the
    widest window); each narrower window estimates with a truncated
    operator and is scored against the full channel, so energy beyond the
    window is an error floor the estimator cannot remove.  Returns
    {M: [per-seed NMSE]}.
    """
    m_values = sorted(int(v) for v in m_values)
    if m_values[0] < 1:
        raise ValueError("delay windows must be positive")
    m_full = max(m_values)
    full_cfg = replace(cfg, m=m_full)
    grid_full = full_cfg.grid()
    pulse = PulsePair()
    out: dict = {m: [] for m in m_values}
    for seed in cfg.seeds:
        scenario = sample_scenario(
            cfg.geometry, cfg.n_md, cfg.n_sd, cfg.n_di, seed=seed, profile=cfg.profile
        ).synced_to_los(grid_full)
        x_full = ground_truth_spreading(scenario, grid_full).values
        pilot = make_pilot(grid_full, seed=[seed, _PILOT_STREAM], kind=cfg.pilot_kind)
        s_full = build_pilot_matrix(pilot, grid_full)
        a_full = (
            pilot_leakage_product(s_full, grid_full, pulse)
            if cfg.use_leakage
            else s_full
        )
        ax = a_full @ x_full
        noise_var = float(np.real(np.vdot(ax, ax))) / (
            grid_full.nr * 10.0 ** (snr_db / 10.0)
        )
        rng = np.random.default_rng([seed, _NOISE_STREAM])
        z0 = (
            rng.standard_normal(grid_full.nr) + 1j * rng.standard_normal(grid_full.nr)
        ) / np.sqrt(2.0)
        y = ax + np.sqrt(noise_var) * z0
        for m in m_values:
            grid_m = DelayDopplerGrid(cfg.ts, cfg.nr, cfg.k, m)
            s_m = build_pilot_matrix(pilot[m_full - m :], grid_m)
            a_m = (
                pilot_leakage_product(s_m, grid_m, pulse) if cfg.use_leakage else s_m
            )
            with warnings.catch_warnings():
                # narrow windows clip the near region by construction
                warnings.simplefilter("ignore")
                regions = inflate_regions(
                    geometric_regions(scenario, grid_m, cfg.delta_tau),
                    cfg.region_inflation,
                )
            partition = build_partition(regions, grid_m)
            n_m = grid_m.n
            x_hat, _ = dispatch_estimator(
                estimator, y, a_m, noise_var, cfg,
                partition=partition,
                pre=Precomputed(a_m, cfg.rho),
                pre_ridge=Precomputed(a_m, cfg.ls_rho),
                support=x_full[:n_m] != 0,
                diffuse_var=oracle_diffuse_variance(scenario, grid_m),
                region_mask=partition.labels[partition.group_of_index] != 3,
                true_power=float(np.real(np.vdot(x_full[:n_m], x_full[:n_m]))),
            )
            embedded = np.zeros(grid_full.n, dtype=np.complex128)
            embedded[:n_m] = x_hat
            out[m].append(nmse(embedded, x_full))
    return out
