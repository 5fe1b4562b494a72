"""Tests for experiment configs, CSV formats, the benchmark loop, and the CLI.

Oracles used here:

* hand-computed NMSE values for trivial estimates (exact, zero, doubled),
* dB conversions checked against 10*log10 by hand (0.01 -> -20 dB),
* round-trip identity for every exporter/importer pair,
* determinism checked by running the same sweep twice and comparing bytes.
"""

import numpy as np
import pytest

from dataclasses import replace

from ddsparse.harness import (
    ExperimentConfig,
    SeedSystem,
    ablation_config,
    BenchmarkRow,
    delay_window_sweep,
    emit_plots_csv,
    export_benchmark_csv,
    export_regions_csv,
    export_spreading_csv,
    import_regions_csv,
    import_spreading_csv,
    inflate_regions,
    leakage_ablation,
    main,
    mean_nmse,
    nmse,
    nmse_db,
    realized_snr_db,
    run_benchmark,
)
from ddsparse.lattice import DelayDopplerGrid, SpreadingFunction
from ddsparse.regions import Regions


def fast_config(**overrides) -> ExperimentConfig:
    base = dict(
        seeds=(0, 1),
        snr_db=(10.0, 20.0),
        estimators=("ls", "oracle-support"),
        n_di=40,
    )
    base.update(overrides)
    return replace(ExperimentConfig.preset("tiny"), **base)


class TestExperimentConfig:
    def test_presets_build_valid_grids(self):
        for name in ("tiny", "desk", "paper"):
            cfg = ExperimentConfig.preset(name)
            grid = cfg.grid()
            assert grid.n == grid.m * grid.n_doppler

    def test_preset_rejects_unknown_name(self):
        with pytest.raises(ValueError):
            ExperimentConfig.preset("huge")

    def test_json_round_trip(self, tmp_path):
        cfg = replace(
            ExperimentConfig.preset("tiny"),
            seeds=(3, 5),
            snr_db=(5.0, 15.0),
            lam_scale=2.5,
        )
        path = tmp_path / "cfg.json"
        cfg.save(path)
        assert ExperimentConfig.load(path) == cfg

    def test_unknown_estimator_rejected_at_construction(self):
        with pytest.raises(ValueError, match="estimator"):
            fast_config(estimators=("ls", "bogus"))

    def test_validation_errors(self):
        with pytest.raises(ValueError):
            fast_config(seeds=())
        with pytest.raises(ValueError):
            fast_config(lam_ratio=0.0)
        with pytest.raises(ValueError):
            fast_config(alpha_d=1.5)
        with pytest.raises(ValueError):
            fast_config(pilot_kind="chirp")
        with pytest.raises(ValueError):
            fast_config(region_inflation=0.5)

    def test_ablation_config_pads_doppler_axis(self):
        base = ExperimentConfig.preset("tiny")
        padded = ablation_config(base, pad=1.5)
        assert padded.fractional
        assert 2 * padded.k + 1 >= int(1.4 * base.nr)
        padded.grid()  # still a valid lattice


class TestSpreadingCsv:
    def grid(self):
        return DelayDopplerGrid(ts=50e-9, nr=16, k=8, m=3)

    def test_round_trip(self, tmp_path):
        grid = self.grid()
        rng = np.random.default_rng(0)
        x = SpreadingFunction.zeros(grid)
        for k, m in ((-8, 0), (0, 1), (5, 2)):
            x.values[grid.vec_index(k, m)] = rng.standard_normal() + 1j * rng.standard_normal()
        path = tmp_path / "x.csv"
        export_spreading_csv(x, path)
        back = import_spreading_csv(path)
        assert back.grid == grid
        assert np.allclose(back.values, x.values)

    def test_round_trip_all_zero(self, tmp_path):
        grid = self.grid()
        path = tmp_path / "zero.csv"
        export_spreading_csv(SpreadingFunction.zeros(grid), path)
        back = import_spreading_csv(path)
        assert back.grid == grid
        assert not back.values.any()

    def test_duplicate_bin_rejected(self, tmp_path):
        path = tmp_path / "dup.csv"
        path.write_text(
            "# grid K=8 M=3 nr=16 ts=5e-08\nk,m,re,im\n1,1,1.0,0.0\n1,1,2.0,0.0\n"
        )
        with pytest.raises(ValueError, match="duplicate"):
            import_spreading_csv(path)

    def test_out_of_range_bin_rejected(self, tmp_path):
        path = tmp_path / "range.csv"
        path.write_text("# grid K=8 M=3 nr=16 ts=5e-08\nk,m,re,im\n9,0,1.0,0.0\n")
        with pytest.raises(ValueError):
            import_spreading_csv(path)

    def test_malformed_row_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("# grid K=8 M=3 nr=16 ts=5e-08\nk,m,re,im\n1,0,1.0\n")
        with pytest.raises(ValueError, match=":3:"):
            import_spreading_csv(path)

    def test_missing_header_rejected(self, tmp_path):
        path = tmp_path / "hdr.csv"
        path.write_text("k,m,re,im\n1,0,1.0,0.0\n")
        with pytest.raises(ValueError):
            import_spreading_csv(path)


class TestRegionsCsv:
    def test_round_trip(self, tmp_path):
        reg = Regions(m0=1, delta_m=3, m_max=7, k_s=10, delta_k=4, k_max=32)
        path = tmp_path / "regions.csv"
        export_regions_csv(reg, path)
        assert import_regions_csv(path) == reg


class TestNmse:
    def test_exact_estimate_scores_zero(self):
        x = np.array([1.0 + 1j, 2.0, -3.0j])
        assert nmse(x, x) == 0.0

    def test_zero_estimate_scores_one(self):
        x = np.array([1.0 + 1j, 2.0, -3.0j])
        assert nmse(np.zeros(3, dtype=complex), x) == pytest.approx(1.0)

    def test_doubled_estimate_scores_one(self):
        x = np.array([1.0 + 1j, 2.0, -3.0j])
        assert nmse(2 * x, x) == pytest.approx(1.0)

    def test_zero_truth_rejected(self):
        with pytest.raises(ValueError):
            nmse(np.ones(3), np.zeros(3))

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError):
            nmse(np.ones(3), np.ones(4))

    def test_nmse_db_of_hundredth_is_minus_twenty(self):
        assert nmse_db(0.01) == pytest.approx(-20.0)
        with pytest.raises(ValueError):
            nmse_db(0.0)


class TestBenchmarkRow:
    def test_failed_row_needs_message(self):
        with pytest.raises(ValueError):
            BenchmarkRow("ls", 10.0, 0, None, 0, 0.0)

    def test_negative_nmse_rejected(self):
        with pytest.raises(ValueError):
            BenchmarkRow("ls", 10.0, 0, -0.5, 0, 0.0)

    def test_successful_row(self):
        row = BenchmarkRow("ls", 10.0, 0, 0.25, 3, 0.1)
        assert row.error == ""


class TestInflateRegions:
    def test_identity_factor(self):
        reg = Regions(0, 3, 7, 10, 4, 32)
        assert inflate_regions(reg, 1.0) == reg

    def test_growth_is_clamped_to_lattice(self):
        reg = Regions(0, 3, 7, 10, 4, 32)
        big = inflate_regions(reg, 100.0)
        assert big.delta_m == reg.m_max - reg.m0
        assert big.k_s == reg.k_max
        assert big.delta_k == big.k_s

    def test_rejects_shrinking(self):
        with pytest.raises(ValueError):
            inflate_regions(Regions(0, 3, 7, 10, 4, 32), 0.9)


class TestSeedSystem:
    def test_realized_snr_tracks_nominal(self):
        system = SeedSystem(fast_config(), 0)
        for snr in (0.0, 20.0):
            y = system.measurement(snr)
            noise = y - system.ax
            assert realized_snr_db(system.ax, noise) == pytest.approx(snr, abs=0.5)

    def test_truth_is_confined_to_regions(self):
        system = SeedSystem(fast_config(), 0)
        outside = system.partition.labels[system.partition.group_of_index] == 3
        assert not system.x_true[outside].any()


class TestRunBenchmark:
    def test_row_grid_is_complete_and_sorted(self):
        cfg = fast_config()
        rows = run_benchmark(cfg)
        assert len(rows) == len(cfg.seeds) * len(cfg.snr_db) * len(cfg.estimators)
        keys = [(r.estimator, r.snr_db, r.seed) for r in rows]
        assert keys == sorted(keys)
        assert all(r.nmse is not None for r in rows)
        means = mean_nmse(rows)
        assert set(means) == {
            (e, s) for e in cfg.estimators for s in cfg.snr_db
        }

    def test_deterministic_and_csv_stable(self, tmp_path):
        cfg = fast_config(seeds=(0,), snr_db=(10.0,))
        first = run_benchmark(cfg)
        second = run_benchmark(cfg)
        strip = lambda rows: [
            (r.estimator, r.snr_db, r.seed, r.nmse, r.iterations, r.error)
            for r in rows
        ]
        assert strip(first) == strip(second)
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        export_benchmark_csv(first, a)
        export_benchmark_csv(second, b)
        assert a.read_bytes() == b.read_bytes()


class TestEmitPlots:
    def rows(self):
        return [
            BenchmarkRow("cs", 0.0, 0, 0.01, 5, 0.1),
            BenchmarkRow("cs", 10.0, 0, 0.1, 5, 0.1),
            BenchmarkRow("cs", 10.0, 1, 0.3, 5, 0.1),
            BenchmarkRow("cs", 20.0, 0, 0.5, 5, 0.1),
            BenchmarkRow("cs", 20.0, 1, None, 0, 0.0, "boom"),
        ]

    def test_one_line_per_snr_and_linear_mean(self, tmp_path):
        (path,) = emit_plots_csv(self.rows(), tmp_path)
        assert path.name == "nmse_vs_snr_cs.csv"
        lines = path.read_text().strip().splitlines()
        data = [ln for ln in lines if not ln.startswith("#")]
        assert len(data) == 3
        by_snr = {float(ln.split(",")[0]): float(ln.split(",")[1]) for ln in data}
        assert by_snr[0.0] == pytest.approx(-20.0)
        # mean of 0.1 and 0.3 is 0.2 -> -6.9897 dB; the failed row is excluded
        assert by_snr[10.0] == pytest.approx(10 * np.log10(0.2))
        assert by_snr[20.0] == pytest.approx(10 * np.log10(0.5))

    def test_all_failed_rejected(self, tmp_path):
        rows = [BenchmarkRow("cs", 0.0, 0, None, 0, 0.0, "boom")]
        with pytest.raises(ValueError):
            emit_plots_csv(rows, tmp_path)


class TestLeakageAblation:
    def test_on_grid_full_aperture_is_a_no_op(self):
        # With nr = 2K+1 and lattice-snapped paths the leakage kernel is the
        # identity, so both arms see the same operator and the same truth;
        # the paired NMSE gap must vanish.
        cfg = fast_config(
            nr=65, k=32, seeds=(0,), snr_db=(25.0,),
            estimators=("cs",), fractional=False,
        )
        rows = leakage_ablation(cfg)
        assert len(rows) == 1
        row = rows[0]
        assert row.error == ""
        delta = 10 * np.log10(row.nmse_uncompensated / row.nmse_compensated)
        assert abs(delta) < 0.05

    def test_seed_failure_produces_error_rows(self):
        # An impossible geometry (scene too deep for the delay window) must
        # produce error rows, not an exception.
        cfg = fast_config(
            m=2, seeds=(0,), snr_db=(25.0,), estimators=("ls",),
            delta_tau=5e-6,
        )
        rows = leakage_ablation(cfg)
        assert len(rows) == 1 and rows[0].error != ""


class TestDelayWindowSweep:
    def test_structure(self):
        cfg = fast_config(seeds=(0, 1), snr_db=(20.0,))
        out = delay_window_sweep(cfg, (4, 8), "ls", 20.0)
        assert set(out) == {4, 8}
        assert all(len(v) == 2 for v in out.values())
        assert all(x >= 0 for v in out.values() for x in v)


class TestCli:
    def test_simulate_writes_scene_and_channel(self, tmp_path):
        assert main(["simulate", "--preset", "tiny", "--seed", "0",
                     "--out", str(tmp_path)]) == 0
        assert (tmp_path / "scenario.csv").exists()
        x = import_spreading_csv(tmp_path / "spreading.csv")
        assert x.values.any()

    def test_regions_from_file(self, tmp_path):
        main(["simulate", "--preset", "tiny", "--seed", "0", "--out", str(tmp_path)])
        out = tmp_path / "reg"
        assert main(["regions", "--input", str(tmp_path / "spreading.csv"),
                     "--out", str(out)]) == 0
        reg = import_regions_csv(out / "regions.csv")
        assert reg.delta_m >= 0 and reg.k_s >= 0
        assert (out / "partition.csv").exists()

    def test_regions_from_simulated_pilot(self, tmp_path):
        assert main(["regions", "--preset", "tiny", "--seed", "1",
                     "--snr", "20", "--out", str(tmp_path)]) == 0
        assert (tmp_path / "regions.csv").exists()

    def test_estimate_writes_result(self, tmp_path):
        assert main(["estimate", "--preset", "tiny", "--seed", "0",
                     "--snr", "20", "--estimator", "ls",
                     "--out", str(tmp_path)]) == 0
        assert (tmp_path / "estimate.csv").exists()
        assert (tmp_path / "truth.csv").exists()

    def test_estimate_cv_requires_nested(self, tmp_path):
        assert main(["estimate", "--preset", "tiny", "--seed", "0",
                     "--estimator", "ls", "--cv", "--out", str(tmp_path)]) == 1

    def test_benchmark_outputs_and_determinism(self, tmp_path):
        args = ["benchmark", "--preset", "tiny", "--seed", "0",
                "--snr", "10", "--estimators", "ls", "oracle-support"]
        out1, out2 = tmp_path / "r1", tmp_path / "r2"
        assert main(args + ["--out", str(out1)]) == 0
        assert main(args + ["--out", str(out2)]) == 0
        for name in ("benchmark.csv", "benchmark_timing.csv", "config.json",
                     "nmse_vs_snr_ls.csv"):
            assert (out1 / name).exists()
        assert (out1 / "benchmark.csv").read_bytes() == \
            (out2 / "benchmark.csv").read_bytes()

    def test_ablate_leakage_runs(self, tmp_path):
        assert main(["ablate-leakage", "--preset", "tiny", "--seed", "0",
                     "--snr", "25", "--estimators", "cs", "--pad", "1.0",
                     "--out", str(tmp_path)]) == 0
        assert (tmp_path / "ablation.csv").exists()

    def test_bad_preset_exits_via_argparse(self):
        with pytest.raises(SystemExit):
            main(["simulate", "--preset", "huge"])

    def test_unknown_estimator_is_reported(self, tmp_path):
        assert main(["estimate", "--preset", "tiny", "--seed", "0",
                     "--estimator", "bogus", "--out", str(tmp_path)]) == 1

    def test_config_file_round_trip(self, tmp_path):
        cfg = fast_config(seeds=(4,))
        cfg_path = tmp_path / "cfg.json"
        cfg.save(cfg_path)
        assert main(["simulate", "--config", str(cfg_path),
                     "--out", str(tmp_path)]) == 0
