"""CSV artifacts: spreading functions, benchmark rows, plot tables.

Everything is plain text so experiment outputs stay auditable and
diffable.  Floats are written with ``repr``, which round-trips exactly
and is deterministic, so identical runs produce byte-identical files.
"""

from __future__ import annotations

import csv
import re
from pathlib import Path

import numpy as np

from ..channel import Scenario
from ..lattice import DelayDopplerGrid, SpreadingFunction
from ..regions import GroupPartition, Regions

_GRID_HEADER = re.compile(
    r"#\s*grid\s+K=(\S+)\s+M=(\S+)\s+nr=(\S+)\s+ts=(\S+)\s*$"
)


def _fmt(x) -> str:
    return repr(float(x))


# ---------------------------------------------------------------------------
# spreading functions
# ---------------------------------------------------------------------------


def export_spreading_csv(sf: SpreadingFunction, path) -> None:
    """Write the nonzero bins of a spreading function as (k, m, Re, Im) rows."""
    grid = sf.grid
    lines = [
        f"# grid K={grid.k} M={grid.m} nr={grid.nr} ts={_fmt(grid.ts)}",
        "k,m,re,im",
    ]
    nz = np.flatnonzero(sf.values)
    kk, mm = grid.unvec(nz)
    for k, m, v in zip(kk, mm, sf.values[nz]):
        lines.append(f"{int(k)},{int(m)},{_fmt(v.real)},{_fmt(v.imag)}")
    Path(path).write_text("\n".join(lines) + "\n")


def import_spreading_csv(path) -> SpreadingFunction:
    """Read a (k, m, Re, Im) table back into a spreading function.

    Bins absent from the file are zero.  A duplicate (k, m) pair is an
    error rather than a silent overwrite: duplicated rows in a measurement
    export almost always mean a broken producer.
    """
    text = Path(path).read_text().splitlines()
    if not text:
        raise ValueError(f"{path}: empty file, expected a grid header")
    m = _GRID_HEADER.match(text[0])
    if m is None:
        raise ValueError(f"{path}: malformed grid header {text[0]!r}")
    grid = DelayDopplerGrid(
        ts=float(m.group(4)), nr=int(m.group(3)), k=int(m.group(1)), m=int(m.group(2))
    )
    if len(text) < 2 or text[1].strip() != "k,m,re,im":
        raise ValueError(f"{path}: missing 'k,m,re,im' column header")
    values = np.zeros(grid.n, dtype=np.complex128)
    seen = set()
    for ln, line in enumerate(text[2:], start=3):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 4:
            raise ValueError(f"{path}:{ln}: expected 4 fields, got {len(parts)}")
        try:
            kk, mm = int(parts[0]), int(parts[1])
            re_, im_ = float(parts[2]), float(parts[3])
        except ValueError as exc:
            raise ValueError(f"{path}:{ln}: malformed row: {exc}") from exc
        if abs(kk) > grid.k or not 0 <= mm < grid.m:
            raise ValueError(
                f"{path}:{ln}: bin (k={kk}, m={mm}) outside K={grid.k}, M={grid.m}"
            )
        if (kk, mm) in seen:
            raise ValueError(f"{path}:{ln}: duplicate bin (k={kk}, m={mm})")
        seen.add((kk, mm))
        values[grid.vec_index(kk, mm)] = complex(re_, im_)
    return SpreadingFunction(grid, values)


# ---------------------------------------------------------------------------
# benchmark artifacts
# ---------------------------------------------------------------------------


def export_benchmark_csv(rows, path) -> None:
    """Primary benchmark table; wall times live in a separate file so this
    one is byte-identical across reruns of the same config."""
    lines = ["estimator,snr_db,seed,nmse,iterations,error"]
    for r in rows:
        nmse = "" if r.nmse is None else _fmt(r.nmse)
        err = r.error.replace("\n", " ").replace(",", ";")
        lines.append(f"{r.estimator},{_fmt(r.snr_db)},{r.seed},{nmse},{r.iterations},{err}")
    Path(path).write_text("\n".join(lines) + "\n")


def export_timing_csv(rows, path) -> None:
    lines = ["estimator,snr_db,seed,wall_time_s"]
    for r in rows:
        lines.append(f"{r.estimator},{_fmt(r.snr_db)},{r.seed},{_fmt(r.wall_time)}")
    Path(path).write_text("\n".join(lines) + "\n")


def export_ablation_csv(rows, path) -> None:
    lines = ["estimator,snr_db,seed,nmse_compensated,nmse_uncompensated,error"]
    for r in rows:
        comp = "" if r.nmse_compensated is None else _fmt(r.nmse_compensated)
        unc = "" if r.nmse_uncompensated is None else _fmt(r.nmse_uncompensated)
        err = r.error.replace("\n", " ").replace(",", ";")
        lines.append(f"{r.estimator},{_fmt(r.snr_db)},{r.seed},{comp},{unc},{err}")
    Path(path).write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# scene and partition audit exports
# ---------------------------------------------------------------------------


def export_scenario_csv(scenario: Scenario, path) -> None:
    """Scene audit table: vehicles in the header, one row per path."""
    g = scenario.geometry
    lines = [
        f"# tx x={_fmt(scenario.tx.x)} v={_fmt(scenario.tx.v)}"
        f" rx x={_fmt(scenario.rx.x)} v={_fmt(scenario.rx.v)}"
        f" wavelength={_fmt(g.wavelength)} delay_origin={_fmt(scenario.delay_origin)}",
        "kind,x,y,v,tau,nu,gain_re,gain_im,gain_var",
    ]
    for sc in scenario.scatterers:
        tau = scenario.path_delay(sc)
        nu = scenario.path_doppler(sc)
        gain = sc.gain if sc.gain is not None else 0.0j
        var = sc.gain_var if sc.gain_var is not None else 0.0
        lines.append(
            f"{sc.kind},{_fmt(sc.x)},{_fmt(sc.y)},{_fmt(sc.v)},{_fmt(tau)},"
            f"{_fmt(nu)},{_fmt(gain.real)},{_fmt(gain.imag)},{_fmt(var)}"
        )
    Path(path).write_text("\n".join(lines) + "\n")


def export_regions_csv(regions: Regions, path) -> None:
    lines = [
        "m0,delta_m,m_max,k_s,delta_k,k_max",
        ",".join(str(v) for v in regions.to_record()),
    ]
    Path(path).write_text("\n".join(lines) + "\n")


def import_regions_csv(path) -> Regions:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if len(rows) < 2 or rows[0] != ["m0", "delta_m", "m_max", "k_s", "delta_k", "k_max"]:
        raise ValueError(f"{path}: not a region record")
    return Regions.from_record([int(v) for v in rows[1]])


def export_partition_csv(partition: GroupPartition, path) -> None:
    lines = ["group_id,index"]
    for gid, idx in partition.to_rows():
        lines.append(f"{gid},{idx}")
    Path(path).write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# plot tables
# ---------------------------------------------------------------------------


def nmse_db(value: float) -> float:
    """10 log10(NMSE); raises on nonpositive input."""
    if value <= 0:
        raise ValueError("NMSE must be positive to convert to dB")
    return float(10.0 * np.log10(value))


def emit_plots_csv(rows, out_dir) -> list:
    """One NMSE-versus-SNR table per estimator, ready for gnuplot.

    Each file has comment headers and comma-separated columns
    (snr_db, mean_nmse_db, std_nmse_db): the mean is taken over the raw
    linear NMSE values of successful rows and converted to dB afterwards;
    the std column is the population spread of the per-row dB values.
    """
    rows = [r for r in rows if r.nmse is not None]
    if not rows:
        raise ValueError("no successful rows to plot")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    estimators = sorted({r.estimator for r in rows})
    paths = []
    for est in estimators:
        mine = [r for r in rows if r.estimator == est]
        snrs = sorted({r.snr_db for r in mine})
        lines = [f"# estimator: {est}", "# snr_db,mean_nmse_db,std_nmse_db"]
        for snr in snrs:
            vals = np.array([r.nmse for r in mine if r.snr_db == snr])
            mean_db = nmse_db(float(np.mean(vals)))
            std_db = float(np.std(10.0 * np.log10(np.maximum(vals, 1e-300))))
            lines.append(f"{_fmt(snr)},{_fmt(mean_db)},{_fmt(std_db)}")
        path = out_dir / f"nmse_vs_snr_{est}.csv"
        path.write_text("\n".join(lines) + "\n")
        paths.append(path)
    return paths
