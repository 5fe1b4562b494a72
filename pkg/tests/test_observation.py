"""Tests for pulses, Doppler leakage kernels, pilot matrices and synthesis.

Oracles used here:

* closed-form pulse anchors (exact zeros at integer lags, removable
  singularities checked against neighboring samples),
* numeric self-convolution of the root pulse against the combined pulse,
* direct double-sum / time-domain convolution implementations of the
  measurement pipeline, evaluated on small grids,
* DFT of the sampled time-variant taps versus the analytic spreading vector.
"""

import numpy as np
import pytest

from ddsparse.lattice import DelayDopplerGrid, SpreadingFunction
from ddsparse.observation import (
    PulsePair,
    apply_leakage,
    build_leakage_matrix,
    build_pilot_matrix,
    dirichlet_kernel,
    make_pilot,
    pilot_leakage_product,
    raised_cosine,
    received_time_domain,
    root_raised_cosine,
    spreading_dft,
    spreading_with_leakage,
    synthesize_measurement,
    time_taps_from_paths,
)

TS = 50e-9


class TestPulses:
    def test_raised_cosine_nyquist_property(self):
        # Exactly 1 at t=0 and exactly 0 at every other integer lag.
        lags = np.arange(-8, 9)
        vals = raised_cosine(lags * TS, TS, 0.25)
        expect = (lags == 0).astype(float)
        assert np.array_equal(vals, expect)

    def test_raised_cosine_midpoint_value(self):
        # Frozen from the closed form at t = Ts/2, beta = 0.25:
        # sinc(1/2) cos(pi/8) / (1 - 1/16).
        got = raised_cosine(np.array([TS / 2]), TS, 0.25)[0]
        expect = np.sinc(0.5) * np.cos(np.pi / 8) / (1 - 1 / 16)
        assert got == pytest.approx(expect, rel=1e-14)
        assert got == pytest.approx(0.6273706428612298, rel=1e-12)

    def test_raised_cosine_singularity_is_removable(self):
        # At |t| = Ts/(2 beta) the generic formula is 0/0; the filled-in
        # value must match the limit from both sides.
        beta = 0.4
        t_sing = TS / (2 * beta)
        v0 = raised_cosine(np.array([t_sing]), TS, beta)[0]
        eps = 1e-7 * TS
        left = raised_cosine(np.array([t_sing - eps]), TS, beta)[0]
        right = raised_cosine(np.array([t_sing + eps]), TS, beta)[0]
        assert v0 == pytest.approx(left, abs=1e-6)
        assert v0 == pytest.approx(right, abs=1e-6)

    def test_raised_cosine_scalar_input(self):
        assert raised_cosine(0.0, TS, 0.25) == pytest.approx(1.0)
        assert np.asarray(raised_cosine(0.0, TS, 0.25)).shape == ()

    def test_root_raised_cosine_center_value(self):
        # 1 - beta + 4 beta / pi at t = 0 (unit Ts normalization).
        beta = 0.25
        got = root_raised_cosine(np.array([0.0]), 1.0, beta)[0]
        assert got == pytest.approx(1 - beta + 4 * beta / np.pi, rel=1e-14)

    def test_root_raised_cosine_singularity_continuous(self):
        beta = 0.25
        t_sing = 1.0 / (4 * beta)
        v0 = root_raised_cosine(np.array([t_sing]), 1.0, beta)[0]
        near = root_raised_cosine(np.array([t_sing + 1e-8]), 1.0, beta)[0]
        assert v0 == pytest.approx(near, abs=1e-6)

    def test_root_self_convolution_matches_combined(self):
        # The combined pulse is the matched-filtered root pulse; check
        # p_rrc * p_rrc (numeric convolution) against p_rc on a fine grid.
        beta = 0.25
        dt = 1e-3  # in units of Ts
        t = np.arange(-30.0, 30.0 + dt / 2, dt)
        rrc = root_raised_cosine(t, 1.0, beta)
        conv = np.convolve(rrc, rrc) * dt
        t_full = np.arange(len(conv)) * dt - 60.0
        probe = np.abs(t_full) <= 4.0
        rc = raised_cosine(t_full[probe], 1.0, beta)
        assert np.max(np.abs(conv[probe] - rc)) < 2e-3

    def test_pulse_pair_window(self):
        pp = PulsePair(rolloff=0.25, support=3 * TS)
        assert pp.combined(np.array([3.5 * TS]), TS)[0] == 0.0
        assert pp.combined(np.array([0.0]), TS)[0] == 1.0

    def test_pulse_pair_validation(self):
        with pytest.raises(ValueError):
            PulsePair(rolloff=1.5)
        with pytest.raises(ValueError):
            PulsePair(support=-1.0)


class TestDirichletKernel:
    def test_on_grid_value(self):
        # k = 0 and zero offset: Nr / (2K+1), purely real.
        val = dirichlet_kernel(0, 0.0, nr=64, big_k=32)
        assert val == pytest.approx(64 / 65)
        assert val.imag == 0.0

    def test_on_grid_other_bins_vanish(self):
        # When the Doppler sits exactly on bin k0, every other bin is zero
        # only at full aperture nr = 2K+1; check that case exactly.
        nr, big_k = 65, 32
        x = 5 / (2 * big_k + 1)  # on bin 5
        for k in range(-big_k, big_k + 1):
            val = dirichlet_kernel(k, x, nr=nr, big_k=big_k)
            if k == 5:
                assert val == pytest.approx(1.0)
            else:
                assert abs(val) < 1e-12

    def test_conjugate_symmetry(self):
        # w(-k, -x) = conj(w(k, x)) for the real sampling window.
        rng = np.random.default_rng(0)
        for _ in range(20):
            k = int(rng.integers(-32, 33))
            x = float(rng.uniform(-0.5, 0.5))
            a = dirichlet_kernel(k, x, nr=64, big_k=32)
            b = dirichlet_kernel(-k, -x, nr=64, big_k=32)
            assert a == pytest.approx(np.conj(b), abs=1e-12)

    def test_brute_force_sum(self):
        # w(k, x) is (1/(2K+1)) sum_n exp(-j 2 pi (k/(2K+1) - x) n); compare
        # against the plain sum for random arguments.
        nr, big_k = 48, 40
        n2 = 2 * big_k + 1
        rng = np.random.default_rng(1)
        for _ in range(20):
            k = int(rng.integers(-big_k, big_k + 1))
            x = float(rng.uniform(-1.2, 1.2))
            direct = np.exp(-2j * np.pi * (k / n2 - x) * np.arange(nr)).sum() / n2
            got = dirichlet_kernel(k, x, nr=nr, big_k=big_k)
            assert got == pytest.approx(direct, abs=1e-10)

    def test_rejects_oversized_aperture(self):
        with pytest.raises(ValueError):
            dirichlet_kernel(0, 0.0, nr=70, big_k=32)


class TestLeakageMatrix:
    def test_identity_at_full_aperture_nyquist_pulse(self):
        # With nr = 2K+1 and an ideal Nyquist pulse the leakage matrix is
        # exactly the identity (off-grid smearing vanishes on the lattice).
        grid = DelayDopplerGrid(ts=TS, nr=65, k=32, m=4)
        pulse = PulsePair(rolloff=0.25, support=10 * TS)
        g_mat = build_leakage_matrix(grid, pulse)
        assert np.max(np.abs(g_mat - np.eye(grid.n))) < 1e-10

    def test_padded_aperture_leaks(self):
        # Zero-padding the Doppler axis (2K+1 > nr) smears energy off the
        # diagonal; the matrix must be visibly non-identity.
        grid = DelayDopplerGrid(ts=TS, nr=32, k=32, m=4)
        pulse = PulsePair(rolloff=0.25, support=10 * TS)
        g_mat = build_leakage_matrix(grid, pulse)
        off = np.abs(g_mat - np.diag(np.diag(g_mat)))
        assert off.max() > 0.05

    def test_sparse_thresholded_variant(self):
        grid = DelayDopplerGrid(ts=TS, nr=32, k=16, m=3)
        pulse = PulsePair(rolloff=0.25, support=10 * TS)
        dense = build_leakage_matrix(grid, pulse)
        sparse = build_leakage_matrix(grid, pulse, threshold=1e-3)
        kept = np.abs(dense) >= 1e-3
        assert np.allclose(sparse.toarray()[kept], dense[kept])
        assert sparse.nnz <= kept.sum()

    def test_apply_leakage_matches_dense_product(self):
        # The matrix-free application must agree with materializing the
        # kernel, including on a padded Doppler axis where leakage is strong.
        grid = DelayDopplerGrid(ts=TS, nr=24, k=18, m=4)
        pulse = PulsePair(rolloff=0.25, support=10 * TS)
        g_mat = build_leakage_matrix(grid, pulse)
        rng = np.random.default_rng(7)
        for _ in range(5):
            x = rng.standard_normal(grid.n) + 1j * rng.standard_normal(grid.n)
            assert np.allclose(apply_leakage(x, grid, pulse), g_mat @ x, atol=1e-12)

    def test_apply_leakage_rejects_wrong_length(self):
        grid = DelayDopplerGrid(ts=TS, nr=24, k=18, m=4)
        pulse = PulsePair(rolloff=0.25, support=10 * TS)
        with pytest.raises(ValueError):
            apply_leakage(np.ones(grid.n + 1, dtype=complex), grid, pulse)


class TestPilotMatrix:
    def test_unit_power_and_length(self):
        grid = DelayDopplerGrid(ts=TS, nr=64, k=32, m=8)
        s = make_pilot(grid, seed=0)
        assert s.shape == (grid.nr + grid.m - 1,)
        assert np.mean(np.abs(s) ** 2) == pytest.approx(1.0)

    def test_ones_pilot_block_is_dft_like(self):
        # With a constant pilot each column of a block is a pure phase ramp
        # of unit-modulus entries.
        grid = DelayDopplerGrid(ts=TS, nr=16, k=8, m=2)
        s = np.ones(grid.nr + grid.m - 1, dtype=np.complex128)
        s_mat = build_pilot_matrix(s, grid)
        assert s_mat.shape == (grid.nr, grid.n)
        assert np.allclose(np.abs(s_mat), 1.0)
        n2 = grid.n_doppler
        col = s_mat[:, grid.vec_index(3, 0)]
        expect = np.exp(2j * np.pi * 3 * np.arange(grid.nr) / n2)
        assert np.allclose(col, expect, atol=1e-12)

    def test_rejects_wrong_pilot_length(self):
        grid = DelayDopplerGrid(ts=TS, nr=16, k=8, m=2)
        with pytest.raises(ValueError):
            build_pilot_matrix(np.ones(10, dtype=complex), grid)

    def test_matrix_action_equals_time_domain_convolution(self):
        # S x must equal the double sum y[n] = sum_m h[n, m] s[n - m] with the
        # taps synthesized from the spreading function on the lattice.
        grid = DelayDopplerGrid(ts=TS, nr=32, k=16, m=4)
        rng = np.random.default_rng(2)
        s = make_pilot(grid, seed=3)
        s_mat = build_pilot_matrix(s, grid)
        x = rng.standard_normal(grid.n) + 1j * rng.standard_normal(grid.n)
        # Build taps h[n, m] from the spreading function directly.
        h_nm = np.zeros((grid.nr, grid.m), dtype=np.complex128)
        for mm in range(grid.m):
            for kk in range(-grid.k, grid.k + 1):
                c = x[grid.vec_index(kk, mm)]
                h_nm[:, mm] += c * np.exp(
                    2j * np.pi * kk * np.arange(grid.nr) / grid.n_doppler
                )
        y_direct = received_time_domain(h_nm, s, grid)
        assert np.max(np.abs(s_mat @ x - y_direct)) < 1e-10


class TestSpreadingSynthesis:
    def grid(self):
        return DelayDopplerGrid(ts=TS, nr=64, k=32, m=8)

    def test_matches_dft_of_time_taps(self):
        # Independent oracle: sample h[n, m] from the path formula, take the
        # Doppler DFT, compare with the analytic leaky spreading vector.
        grid = self.grid()
        pulse = PulsePair(rolloff=0.25, support=8 * TS)
        rng = np.random.default_rng(4)
        taus = rng.uniform(0.5, 6.5, size=5) * TS
        nus = rng.uniform(-0.4, 0.4, size=5) / (grid.ts * grid.n_doppler) * grid.k
        gains = rng.standard_normal(5) + 1j * rng.standard_normal(5)
        x_leaky = spreading_with_leakage(taus, nus, gains, grid, pulse)
        h_nm = time_taps_from_paths(taus, nus, gains, grid, pulse)
        h_km = spreading_dft(h_nm, grid)  # (2K+1, M) matrix of bins
        x_dft = SpreadingFunction.from_matrix(grid, h_km).values
        assert np.max(np.abs(x_leaky - x_dft)) < 1e-10

    def test_on_grid_path_concentrates(self):
        # A path exactly on a lattice node at full aperture puts >=99.9% of
        # its energy in that single bin.
        grid = DelayDopplerGrid(ts=TS, nr=65, k=32, m=8)
        pulse = PulsePair(rolloff=0.25, support=10 * TS)
        scale = grid.ts * grid.n_doppler
        x = spreading_with_leakage(
            np.array([3 * TS]), np.array([7 / scale]), np.array([1.0 + 0j]),
            grid, pulse,
        )
        j = grid.vec_index(7, 3)
        total = np.sum(np.abs(x) ** 2)
        assert np.abs(x[j]) ** 2 / total > 0.999

    def test_off_grid_path_spreads(self):
        # Half-bin offsets in both coordinates leave well under 90% of the
        # energy in any single bin.
        grid = self.grid()
        pulse = PulsePair(rolloff=0.25, support=10 * TS)
        scale = grid.ts * grid.n_doppler
        x = spreading_with_leakage(
            np.array([3.5 * TS]), np.array([7.5 / scale]), np.array([1.0 + 0j]),
            grid, pulse,
        )
        p = np.abs(x) ** 2
        assert p.max() / p.sum() < 0.9
        assert (p > 0.01 * p.max()).sum() >= 2

    def test_rejects_mismatched_path_arrays(self):
        grid = self.grid()
        with pytest.raises(ValueError):
            spreading_with_leakage(
                np.array([TS]), np.array([0.0, 1.0]), np.array([1.0 + 0j]),
                grid, PulsePair(),
            )


class TestFullProduct:
    def test_chunked_product_matches_dense(self):
        # The memory-light pilot x leakage product must agree with the
        # explicit dense S @ G to near machine precision.
        grid = DelayDopplerGrid(ts=TS, nr=32, k=20, m=4)
        pulse = PulsePair(rolloff=0.25, support=6 * TS)
        s = make_pilot(grid, seed=9)
        s_mat = build_pilot_matrix(s, grid)
        g_mat = build_leakage_matrix(grid, pulse)
        a_dense = s_mat @ g_mat
        a_fast = pilot_leakage_product(s_mat, grid, pulse)
        assert np.max(np.abs(a_dense - a_fast)) < 1e-12


class TestMeasurementSynthesis:
    def test_noise_free_and_deterministic(self):
        rng = np.random.default_rng(5)
        a = rng.standard_normal((12, 6)) + 1j * rng.standard_normal((12, 6))
        x = rng.standard_normal(6) + 1j * rng.standard_normal(6)
        y0 = synthesize_measurement(x, a, 0.0)
        assert np.array_equal(y0, a @ x)
        y1 = synthesize_measurement(x, a, 0.5, rng=np.random.default_rng(7))
        y2 = synthesize_measurement(x, a, 0.5, rng=np.random.default_rng(7))
        assert np.array_equal(y1, y2)
        assert not np.array_equal(y1, y0)

    def test_noise_variance_calibration(self):
        # Mean |z|^2 over many draws matches the requested variance.
        a = np.eye(200, dtype=complex)
        x = np.zeros(200, dtype=complex)
        rng = np.random.default_rng(11)
        power = np.mean(
            [
                np.mean(np.abs(synthesize_measurement(x, a, 0.25, rng=rng)) ** 2)
                for _ in range(50)
            ]
        )
        assert power == pytest.approx(0.25, rel=0.05)

    def test_rejects_negative_variance(self):
        a = np.eye(3, dtype=complex)
        with pytest.raises(ValueError):
            synthesize_measurement(np.zeros(3, dtype=complex), a, -1.0)
