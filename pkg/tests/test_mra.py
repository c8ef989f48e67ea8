import numpy as np
import pytest

from momentlab.measurements import (
    block_structure_for_power_spectrum,
    second_moment_blocks,
    to_real_fourier,
)
from momentlab.mra import (
    GroupAction,
    act,
    action_matrix,
    estimate_second_moment,
    exact_population_moment,
    extract_invariants,
    instance_noise_amplification,
    load_observations,
    random_group_element,
    recover,
    sample_complexity_sweep,
    save_observations,
    simulate_observations,
)
from momentlab.priors import (
    GeneratorNetwork,
    Layer,
    random_relu_network,
    sample_mixing,
)
from momentlab.so3 import haar_euler_angles, wigner_block


class TestGroupAction:
    def test_identity_elements(self, rng):
        for group in (GroupAction.cyclic(7), GroupAction.dihedral(6), GroupAction.sphere(3)):
            x = rng.normal(size=group.N)
            e = 0 if group.kind == "cyclic" else (0, 0) if group.kind == "dihedral" else (0, 0, 0)
            np.testing.assert_allclose(act(e, x, group), x, atol=1e-12)

    def test_cyclic_inverse(self, rng):
        group = GroupAction.cyclic(9)
        x = rng.normal(size=9)
        for s in (1, 4, 8):
            y = act(s, x, group)
            np.testing.assert_allclose(act(9 - s, y, group), x, atol=1e-12)

    def test_action_matches_time_domain_shift(self, rng):
        # block-coordinate action = transform of the plain circular shift
        N = 8
        group = GroupAction.cyclic(N)
        v = rng.normal(size=N)
        for s in range(N):
            lhs = act(s, to_real_fourier(v), group)
            rhs = to_real_fourier(np.roll(v, s))
            np.testing.assert_allclose(lhs, rhs, atol=1e-12)

    def test_dihedral_reflection_matches_time_reversal(self, rng):
        N = 7
        group = GroupAction.dihedral(N)
        v = rng.normal(size=N)
        lhs = act((0, 1), to_real_fourier(v), group)
        # time reversal t -> -t fixes index 0; numpy reversal is the reversal
        # composed with a shift by N-1, so undo that with one more shift
        rhs = act(1, to_real_fourier(v[::-1].copy()), GroupAction.cyclic(N))
        np.testing.assert_allclose(lhs, rhs, atol=1e-12)

    def test_matrices_orthogonal_and_block_diagonal(self, rng):
        for group in (GroupAction.cyclic(8), GroupAction.dihedral(5), GroupAction.sphere(2)):
            blocks = group.blocks
            for _ in range(20):
                g = random_group_element(group, rng)
                M = action_matrix(g, group)
                np.testing.assert_allclose(M @ M.T, np.eye(group.N), atol=1e-10)
                off = M.copy()
                for sl in blocks.slices():
                    off[sl, sl] = 0.0
                assert np.max(np.abs(off)) < 1e-12

    def test_norm_and_moment_invariance(self, rng):
        for group in (GroupAction.cyclic(9), GroupAction.dihedral(8), GroupAction.sphere(4)):
            blocks = group.blocks
            x = rng.normal(size=group.N)
            base = second_moment_blocks(x, blocks)
            for _ in range(100):
                g = random_group_element(group, rng)
                y = act(g, x, group)
                assert abs(np.linalg.norm(y) - np.linalg.norm(x)) < 1e-10
                np.testing.assert_allclose(
                    second_moment_blocks(y, blocks), base, atol=1e-10 * max(1, base.max())
                )

    def test_cyclic_and_dihedral_share_invariants(self, rng):
        # reflections preserve block energies, so both groups determine the
        # same invariant vector
        N = 8
        x = rng.normal(size=N)
        blocks = block_structure_for_power_spectrum(N)
        inv_c = extract_invariants(
            exact_population_moment(x, GroupAction.cyclic(N)), blocks
        )
        inv_d = extract_invariants(
            exact_population_moment(x, GroupAction.dihedral(N)), blocks
        )
        np.testing.assert_allclose(inv_c, inv_d, atol=1e-12)
        np.testing.assert_allclose(inv_c, second_moment_blocks(x, blocks), atol=1e-12)

    def test_so3_per_degree_energy_preserved(self, rng):
        group = GroupAction.sphere(4)
        x = rng.normal(size=25)
        base = second_moment_blocks(x, group.blocks)
        for _ in range(10):
            y = act(tuple(haar_euler_angles(rng)), x, group)
            np.testing.assert_allclose(
                second_moment_blocks(y, group.blocks), base, atol=1e-8
            )

    def test_invalid_parameters(self, rng):
        with pytest.raises(ValueError):
            act(9, rng.normal(size=8), GroupAction.cyclic(8))
        with pytest.raises(ValueError):
            act((1, 2), rng.normal(size=8), GroupAction.dihedral(8))


class TestSimulate:
    def test_noiseless_orbit_preserves_energies(self, rng):
        group = GroupAction.cyclic(8)
        x = rng.normal(size=8)
        obs = simulate_observations(x, group, 50, 0.0, seed=1)
        base = second_moment_blocks(x, group.blocks)
        for row in obs.observations:
            np.testing.assert_allclose(
                second_moment_blocks(row, group.blocks), base, atol=1e-10
            )

    def test_single_observation_shape(self, rng):
        for group in (GroupAction.cyclic(5), GroupAction.sphere(2)):
            obs = simulate_observations(rng.normal(size=group.N), group, 1, 0.3, seed=0)
            assert obs.observations.shape == (1, group.N)

    def test_first_moment_matches_orbit_mean(self, rng):
        # column mean approximates the orbit average (DC component only)
        N, n, sigma = 8, 100_000, 1.0
        group = GroupAction.cyclic(N)
        x = rng.normal(size=N)
        obs = simulate_observations(x, group, n, sigma, seed=5)
        col_mean = obs.observations.mean(axis=0)
        expected = np.zeros(N)
        expected[0] = x[0]          # rotation blocks average to zero
        col_std = obs.observations.std(axis=0)
        assert np.all(np.abs(col_mean - expected) < 3.0 * col_std / np.sqrt(n) + 1e-12)

    def test_deterministic(self, rng):
        group = GroupAction.sphere(2)
        x = rng.normal(size=9)
        a = simulate_observations(x, group, 20, 0.1, seed=3).observations
        b = simulate_observations(x, group, 20, 0.1, seed=3).observations
        np.testing.assert_array_equal(a, b)


class TestSecondMomentEstimate:
    def test_zero_signal_zero_noise(self):
        group = GroupAction.cyclic(4)
        obs = simulate_observations(np.zeros(4), group, 10, 0.0, seed=0)
        est = estimate_second_moment(obs)
        np.testing.assert_array_equal(est.matrix, np.zeros((4, 4)))

    def test_exact_orbit_average_of_delta(self):
        # cyclic N=4, x = delta in time domain: orbit average is I/4 in any
        # orthonormal coordinates
        N = 4
        group = GroupAction.cyclic(N)
        x = to_real_fourier(np.array([1.0, 0.0, 0.0, 0.0]))
        M = exact_population_moment(x, group)
        np.testing.assert_allclose(M, np.eye(N) / N, atol=1e-12)

    def test_symmetric(self, rng):
        group = GroupAction.cyclic(6)
        obs = simulate_observations(rng.normal(size=6), group, 500, 0.7, seed=2)
        M = estimate_second_moment(obs).matrix
        assert np.max(np.abs(M - M.T)) < 1e-12

    def test_monte_carlo_error_within_three_expected(self, rng):
        N, n, sigma = 8, 200_000, 0.5
        group = GroupAction.cyclic(N)
        x = rng.normal(size=N)
        obs = simulate_observations(x, group, n, sigma, seed=9)
        M = estimate_second_moment(obs).matrix
        M_pop = exact_population_moment(x, group) + 0.0
        err = np.linalg.norm(M - M_pop)
        # independent plug-in estimate of the expected Monte Carlo error
        Y = obs.observations
        sq = np.einsum("ni,nj->nij", Y, Y)
        ent_var = sq.var(axis=0) / n
        expected = np.sqrt(ent_var.sum())
        assert err < 3.0 * expected


class TestExtractInvariants:
    def test_population_moment_recovers_block_energies(self, rng):
        for group in (GroupAction.cyclic(8), GroupAction.dihedral(7), GroupAction.sphere(3)):
            x = rng.normal(size=group.N)
            M = exact_population_moment(x, group)
            np.testing.assert_allclose(
                extract_invariants(M, group.blocks),
                second_moment_blocks(x, group.blocks),
                atol=1e-6,
            )

    def test_zero_signal_with_noise_correction(self, rng):
        group = GroupAction.cyclic(6)
        obs = simulate_observations(np.zeros(6), group, 50_000, 0.4, seed=1)
        inv = extract_invariants(estimate_second_moment(obs), group.blocks)
        assert np.max(np.abs(inv)) < 0.05

    def test_single_degree_content(self, rng):
        group = GroupAction.sphere(2)
        x = np.zeros(9)
        x[4:9] = rng.normal(size=5)          # degree-2 block only
        M = exact_population_moment(x, group)
        inv = extract_invariants(M, group.blocks)
        np.testing.assert_allclose(inv[:2], [0.0, 0.0], atol=1e-6)
        assert inv[2] == pytest.approx(x @ x, abs=1e-6)


class TestBlockScalarLaw:
    def test_exact_moment_is_block_scalar(self, rng):
        group = GroupAction.sphere(4)
        x = rng.normal(size=25)
        M = exact_population_moment(x, group)
        E = second_moment_blocks(x, group.blocks)
        expected = np.zeros_like(M)
        for k, sl in enumerate(group.blocks.slices()):
            d = group.blocks.dims[k]
            expected[sl, sl] = (E[k] / d) * np.eye(d)
        np.testing.assert_allclose(M, expected, atol=1e-6)

    def test_monte_carlo_matches_per_block(self, rng):
        group = GroupAction.sphere(4)
        x = rng.normal(size=25)
        x /= np.linalg.norm(x)
        obs = simulate_observations(x, group, 100_000, 0.0, seed=3)
        M_mc = estimate_second_moment(obs).matrix
        E = second_moment_blocks(x, group.blocks)
        for k, sl in enumerate(group.blocks.slices()):
            d = group.blocks.dims[k]
            target = (E[k] / d) * np.eye(d)
            rel = np.linalg.norm(M_mc[sl, sl] - target) / np.linalg.norm(target)
            assert rel < 0.02


class TestRecovery:
    def test_noiseless_round_trip(self, rng):
        N = 9
        blocks = block_structure_for_power_spectrum(N)
        prior = random_relu_network((2, 10, N), seed=4)
        A = sample_mixing(N, "special-orthogonal", 6)
        from momentlab.priors import generator_forward

        z_true = rng.normal(size=2)
        x_true = A.entries @ generator_forward(prior, z_true)
        inv = second_moment_blocks(x_true, blocks)
        rec = recover(inv, prior, A, blocks, seed=0, restarts=20)
        assert rec.error_fn(x_true) < 1e-6

    def test_zero_image_prior(self):
        N = 5
        blocks = block_structure_for_power_spectrum(N)
        prior = GeneratorNetwork((Layer(np.zeros((N, 2)), "identity"),))
        rec = recover(np.zeros(blocks.R), prior, np.eye(N), blocks, seed=0, restarts=3)
        np.testing.assert_array_equal(rec.x_hat, np.zeros(N))
        # absolute error reported when the truth is the zero signal
        assert rec.error_fn(np.zeros(N)) == 0.0

    def test_perturbed_invariants_give_proportional_error(self, rng):
        N = 9
        blocks = block_structure_for_power_spectrum(N)
        prior = random_relu_network((2, 10, N), seed=4)
        A = sample_mixing(N, "special-orthogonal", 6)
        from momentlab.priors import generator_forward

        delta = 1e-3
        errs = []
        for seed in range(20):
            z_true = np.random.default_rng(seed).normal(size=2)
            x_true = A.entries @ generator_forward(prior, z_true)
            inv = second_moment_blocks(x_true, blocks)
            noise = np.random.default_rng(1000 + seed).normal(size=blocks.R)
            inv_noisy = inv * (1.0 + delta * noise)
            rec = recover(inv_noisy, prior, A, blocks, seed=seed, restarts=15)
            errs.append(rec.error_fn(x_true))
        assert np.median(errs) < 100 * delta


class TestSampleComplexity:
    def test_noiseless_needs_few_observations(self):
        N = 8
        group = GroupAction.cyclic(N)
        prior = random_relu_network((2, 10, N), seed=11)
        A = sample_mixing(N, "special-orthogonal", 11)
        result = sample_complexity_sweep(
            prior, A, group, [0.0], 0.1, seeds=range(3), true_seed=0, n_min=4, n_cap=64
        )
        assert result.rows[0]["n_star"] == 4

    def test_median_error_decreases_along_grid(self):
        # fixed sigma: growing n must (weakly) improve the median error
        N = 8
        group = GroupAction.cyclic(N)
        prior = random_relu_network((2, 10, N), seed=11)
        A = sample_mixing(N, "special-orthogonal", 11)
        from momentlab.mra import draw_ground_truth, extract_invariants as ext

        _, _, x_star, _, _ = draw_ground_truth(prior, A.entries, 0, 0.4)
        meds = []
        for n in (100, 2000, 40000):
            errs = []
            for seed in range(10):
                obs = simulate_observations(x_star, group, n, 0.5, seed=(n, seed))
                inv = ext(estimate_second_moment(obs), group.blocks)
                rec = recover(inv, prior, A, group.blocks, seed=(n, seed, 1), restarts=8)
                errs.append(rec.error_fn(x_star))
            meds.append(np.median(errs))
        assert sorted(meds, reverse=True) == meds

    def test_amplification_screen(self):
        N = 8
        group = GroupAction.cyclic(N)
        prior = random_relu_network((2, 10, N), seed=11)
        A = sample_mixing(N, "special-orthogonal", 11)
        amp = instance_noise_amplification(prior, A.entries, group.blocks, 0, 0.4)
        assert np.isfinite(amp) and amp > 0


class TestPersistence:
    def test_roundtrip(self, rng, tmp_path):
        group = GroupAction.sphere(2)
        x = rng.normal(size=9)
        obs = simulate_observations(x, group, 17, 0.25, seed=12)
        path = tmp_path / "obs.mra"
        save_observations(path, obs)
        loaded = load_observations(path)
        assert loaded.group.kind == "so3-bandlimited"
        assert loaded.group.L == 2
        assert loaded.sigma == 0.25
        assert loaded.seed == 12
        np.testing.assert_array_equal(loaded.observations, obs.observations)

    def test_magic_check(self, tmp_path):
        path = tmp_path / "bad.mra"
        path.write_bytes(b"NOPE" + b"\x00" * 40)
        with pytest.raises(ValueError):
            load_observations(path)
