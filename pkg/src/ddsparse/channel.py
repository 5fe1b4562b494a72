"""Geometry-based stochastic scatterer simulator for two-lane road scenes.

A scene consists of a transmitter and receiver driving along the x axis, plus
three scatterer populations:

* MD — mobile discrete: other vehicles on the road, each with its own speed
  (oncoming traffic has negative speed),
* SD — static discrete: signs, bridges, parked vehicles near the road edges,
  placed with a two-component Gaussian mixture across the two roadsides,
* DI — diffuse: dense static clutter (guardrails, vegetation) distributed
  uniformly over two strips flanking the road.

Every path, including line of sight, is parameterized by a bistatic delay
(path length over propagation speed) and a Doppler shift from the projected
relative velocities at departure and arrival.  Gains are zero-mean complex
Gaussian with an exponential power-delay profile and per-population power
offsets.  The line of sight is represented as a pseudo-scatterer on the
TX-RX segment with zero speed, which reproduces the direct path's delay and
Doppler exactly through the same bistatic formulas.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .lattice import DelayDopplerGrid, SpreadingFunction

KINDS = ("los", "md", "sd", "di")

KMH = 1.0 / 3.6  # km/h -> m/s

C_LIGHT = 299792458.0


@dataclass(frozen=True)
class Geometry:
    """Static description of the road scene and sampling ranges.

    Distances in meters, speeds in m/s (the CLI converts km/h).  ``wavelength``
    and ``propagation_speed`` set the Doppler and delay scales; presets for
    small grids use synthetic values so that both structures occupy a useful
    number of lattice bins.
    """

    road_width: float = 50.0
    strip_depth: float = 25.0
    section_length: float = 1000.0
    wavelength: float = C_LIGHT / 5.8e9
    propagation_speed: float = C_LIGHT
    v_max: float = 45.0
    speed_range: tuple[float, float] = (60.0 * KMH, 160.0 * KMH)
    distance_range: tuple[float, float] = (100.0, 200.0)
    sd_mean_offset: float = 10.0
    sd_sigma: float = 5.0

    def __post_init__(self):
        if min(self.road_width, self.strip_depth, self.section_length) <= 0:
            raise ValueError("geometry dimensions must be positive")
        if self.wavelength <= 0 or self.propagation_speed <= 0:
            raise ValueError("wavelength and propagation speed must be positive")
        lo, hi = self.speed_range
        if not 0 < lo <= hi:
            raise ValueError("speed range must be positive and ordered")
        if hi > self.v_max:
            raise ValueError("speed range exceeds the configured v_max")
        dlo, dhi = self.distance_range
        if not 0 < dlo <= dhi:
            raise ValueError("distance range must be positive and ordered")
        if dhi >= self.section_length:
            raise ValueError("TX-RX distance must fit inside the section")

    @property
    def doppler_ceiling(self) -> float:
        """Upper bound 4 v_max / wavelength on any path's |Doppler|."""
        return 4.0 * self.v_max / self.wavelength


@dataclass(frozen=True)
class PowerProfile:
    """Exponential power-delay profile with per-population offsets (dB)."""

    ref_power: float = 1.0
    decay: float = 0.2e-6
    offsets_db: dict = field(
        default_factory=lambda: {"los": 0.0, "md": 0.0, "sd": 10.0, "di": 20.0}
    )

    def variance(self, kind: str, tau: float, tau_los: float) -> float:
        """Mean power of a path of the given population at delay tau."""
        off = self.offsets_db[kind]
        return (
            self.ref_power
            * 10.0 ** (-off / 10.0)
            * float(np.exp(-(tau - tau_los) / self.decay))
        )


@dataclass
class Scatterer:
    kind: str
    x: float
    y: float
    v: float = 0.0  # signed speed along +x; 0 for all static populations
    gain: complex = 0.0 + 0.0j
    gain_var: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown scatterer kind {self.kind!r}")


@dataclass
class VehicleState:
    x: float
    y: float
    v: float


@dataclass
class Scenario:
    """One sampled scene: vehicles, scatterers and their drawn gains."""

    geometry: Geometry
    tx: VehicleState
    rx: VehicleState
    scatterers: list[Scatterer]
    seed: int | None = None
    delay_origin: float = 0.0  # subtracted from all delays on the lattice

    # -- per-path parameters -------------------------------------------------
    def path_delay(self, sc: Scatterer) -> float:
        """Bistatic delay (TX -> scatterer -> RX path length over c)."""
        d1 = np.hypot(sc.x - self.tx.x, sc.y - self.tx.y)
        d2 = np.hypot(sc.x - self.rx.x, sc.y - self.rx.y)
        return float(d1 + d2) / self.geometry.propagation_speed

    def path_doppler(self, sc: Scatterer) -> float:
        """Doppler from projected relative speeds at departure and arrival."""
        lam = self.geometry.wavelength
        d1 = np.hypot(sc.x - self.tx.x, sc.y - self.tx.y)
        d2 = np.hypot(sc.x - self.rx.x, sc.y - self.rx.y)
        cos_t = (sc.x - self.tx.x) / d1 if d1 > 0 else 0.0
        cos_r = (sc.x - self.rx.x) / d2 if d2 > 0 else 0.0
        return ((self.tx.v - sc.v) * cos_t + (self.rx.v - sc.v) * cos_r) / lam

    def paths(self):
        """(delays, dopplers, gains, kinds) arrays over all paths, LOS first."""
        taus = np.array([self.path_delay(s) for s in self.scatterers])
        nus = np.array([self.path_doppler(s) for s in self.scatterers])
        gains = np.array([s.gain for s in self.scatterers], dtype=np.complex128)
        kinds = np.array([s.kind for s in self.scatterers])
        return taus, nus, gains, kinds

    # -- derived scales -------------------------------------------------------
    @property
    def tau_los(self) -> float:
        """Line-of-sight delay (minimum over all paths)."""
        return float(
            np.hypot(self.rx.x - self.tx.x, self.rx.y - self.tx.y)
            / self.geometry.propagation_speed
        )

    @property
    def nu_los(self) -> float:
        return (self.tx.v - self.rx.v) / self.geometry.wavelength * (
            1.0 if self.rx.x >= self.tx.x else -1.0
        )

    @property
    def static_doppler_bound(self) -> float:
        """nu_S = (v_T + v_R)/wavelength, the largest |Doppler| of any static path."""
        return (abs(self.tx.v) + abs(self.rx.v)) / self.geometry.wavelength

    def counts(self) -> dict:
        out = {k: 0 for k in KINDS}
        for s in self.scatterers:
            out[s.kind] += 1
        return out

    def synced_to_los(self, grid: DelayDopplerGrid) -> "Scenario":
        """Copy with the delay origin on the whole bin preceding the LOS."""
        origin = float(np.floor(self.tau_los / grid.ts) * grid.ts)
        return replace(self, delay_origin=origin)


def sample_scenario(
    geometry: Geometry,
    n_md: int = 10,
    n_sd: int = 10,
    n_di: int = 400,
    seed=None,
    profile: PowerProfile | None = None,
) -> Scenario:
    """Draw a random scene and its path gains.

    The draw order (vehicles, MD, SD, DI, then gains) is fixed, so a seed
    fully determines the scenario.
    """
    rng = np.random.default_rng(seed)
    profile = profile or PowerProfile()
    g = geometry
    half = g.section_length / 2.0

    d0 = rng.uniform(*g.distance_range)
    v_t, v_r = rng.uniform(*g.speed_range, size=2)
    tx = VehicleState(-d0 / 2.0, 0.0, float(v_t))
    rx = VehicleState(+d0 / 2.0, 0.0, float(v_r))

    scatterers = [Scatterer("los", 0.0, 0.0, 0.0)]
    for _ in range(n_md):
        sign = 1.0 if rng.random() < 0.5 else -1.0
        scatterers.append(
            Scatterer(
                "md",
                float(rng.uniform(-half, half)),
                float(rng.uniform(-g.road_width / 2.0, g.road_width / 2.0)),
                float(sign * rng.uniform(*g.speed_range)),
            )
        )
    for _ in range(n_sd):
        side = 1.0 if rng.random() < 0.5 else -1.0
        y = side * (g.road_width / 2.0 + g.sd_mean_offset) + rng.normal(0.0, g.sd_sigma)
        scatterers.append(
            Scatterer("sd", float(rng.uniform(-half, half)), float(y), 0.0)
        )
    for _ in range(n_di):
        side = 1.0 if rng.random() < 0.5 else -1.0
        y = side * rng.uniform(g.road_width / 2.0, g.road_width / 2.0 + g.strip_depth)
        scatterers.append(
            Scatterer("di", float(rng.uniform(-half, half)), float(y), 0.0)
        )

    scenario = Scenario(g, tx, rx, scatterers, seed=seed)
    draw_gains(scenario, profile, rng)
    return scenario


def draw_gains(scenario: Scenario, profile: PowerProfile, rng=None) -> None:
    """Draw zero-mean complex Gaussian gains per the power-delay profile.

    Stores both the gain and its variance on each scatterer (the variance is
    what covariance-oracle consumers need).
    """
    rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
    tau_los = scenario.tau_los
    for sc in scenario.scatterers:
        var = profile.variance(sc.kind, scenario.path_delay(sc), tau_los)
        sc.gain_var = var
        sc.gain = complex(
            np.sqrt(var / 2.0) * (rng.standard_normal() + 1j * rng.standard_normal())
        )


def ground_truth_spreading(
    scenario: Scenario, grid: DelayDopplerGrid
) -> SpreadingFunction:
    """Accumulate path gains on their nearest lattice bins.

    Raises if any path rounds outside the lattice, naming the offending path
    (the caller must enlarge M or K, or adjust the delay origin).
    """
    x = np.zeros(grid.n, dtype=np.complex128)
    taus, nus, gains, kinds = scenario.paths()
    taus = taus - scenario.delay_origin
    ms = grid.delay_bin(taus)
    ks = grid.doppler_bin(nus)
    for i, (kind, m_i, k_i) in enumerate(zip(kinds, ms, ks)):
        if not 0 <= m_i < grid.m or abs(k_i) > grid.k:
            raise ValueError(
                f"path {i} ({kind}) rounds off-lattice: delay bin {m_i} "
                f"(tau={taus[i]:.3e}s), Doppler bin {k_i} (nu={nus[i]:.3e}Hz); "
                f"grid has M={grid.m}, K={grid.k}"
            )
        x[grid.vec_index(int(k_i), int(m_i))] += gains[i]
    return SpreadingFunction(grid, x)


def oracle_diffuse_variance(scenario: Scenario, grid: DelayDopplerGrid) -> np.ndarray:
    """Per-bin aggregate gain variance of the diffuse population.

    The per-path variances stored at draw time are summed on each path's
    lattice bin — the oracle diagonal a genie-aided detector would use.
    """
    var = np.zeros(grid.n)
    for i, sc in enumerate(scenario.scatterers):
        if sc.kind != "di":
            continue
        tau = scenario.path_delay(sc) - scenario.delay_origin
        m_i = int(grid.delay_bin(tau))
        k_i = int(grid.doppler_bin(scenario.path_doppler(sc)))
        if 0 <= m_i < grid.m and abs(k_i) <= grid.k:
            var[grid.vec_index(k_i, m_i)] += sc.gain_var
    return var


def doppler_along_strip(scenario: Scenario, y: float, xs: np.ndarray) -> np.ndarray:
    """Doppler of a static scatterer swept along the line at lateral offset y."""
    return np.array(
        [scenario.path_doppler(Scatterer("di", float(x), y)) for x in xs]
    )
