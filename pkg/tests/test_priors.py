import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.stats import kstest

from momentlab.measurements import (
    DimensionError,
    block_structure_for_power_spectrum,
    second_moment_blocks,
)
from momentlab.priors import (
    GeneratorNetwork,
    Layer,
    SparsePrior,
    ambient_network,
    estimate_image_dimension,
    generator_forward,
    generator_jacobian,
    generic_orthonormal_sparse_prior,
    network_from_json,
    network_to_json,
    perturb_final_layer,
    random_relu_network,
    sample_mixing,
    sample_sparse,
    sparse_prior_from_json,
    sparse_prior_to_json,
    standard_basis_sparse_prior,
)


class TestGeneratorForward:
    def test_zero_weights_give_zero(self, rng):
        net = GeneratorNetwork(
            (Layer(np.zeros((5, 3)), "relu"), Layer(np.zeros((4, 5)), "identity"))
        )
        for _ in range(5):
            assert np.all(generator_forward(net, rng.normal(size=3)) == 0)

    def test_single_relu_layer(self):
        net = GeneratorNetwork((Layer(np.eye(2), "relu"),))
        np.testing.assert_array_equal(
            generator_forward(net, np.array([1.0, -2.0])), [1.0, 0.0]
        )

    def test_matches_layer_by_layer_oracle(self):
        rng = np.random.default_rng(0)
        W1 = rng.normal(size=(6, 2))
        W2 = rng.normal(size=(4, 6))
        net = GeneratorNetwork((Layer(W1, "relu"), Layer(W2, "identity")))
        z = np.array([1.0, 0.0])
        expected = W2 @ np.maximum(W1 @ z, 0.0)
        np.testing.assert_allclose(generator_forward(net, z), expected, atol=1e-12)

    def test_dimension_mismatch(self):
        net = ambient_network(4)
        with pytest.raises(DimensionError):
            generator_forward(net, np.ones(3))

    def test_activations(self):
        z = np.array([-2.0, -0.5, 0.5, 2.0])
        leaky = GeneratorNetwork((Layer(np.eye(4), "leaky-relu(0.1)"),))
        np.testing.assert_allclose(
            generator_forward(leaky, z), [-0.2, -0.05, 0.5, 2.0]
        )
        hard = GeneratorNetwork((Layer(np.eye(4), "hardtanh(-1,1)"),))
        np.testing.assert_allclose(generator_forward(hard, z), [-1.0, -0.5, 0.5, 1.0])

    @given(st.integers(0, 10**6), st.floats(0.1, 10.0))
    def test_positive_homogeneity_of_relu_nets(self, seed, c):
        net = random_relu_network((2, 6, 5), seed=seed)
        z = np.random.default_rng(seed + 1).normal(size=2)
        lhs = generator_forward(net, c * z)
        rhs = c * generator_forward(net, z)
        np.testing.assert_allclose(lhs, rhs, atol=1e-10 * max(1.0, np.abs(rhs).max()))


class TestGeneratorJacobian:
    def test_matches_finite_differences(self, rng):
        net = random_relu_network((3, 8, 6, 7), seed=4)
        h = 1e-6
        for _ in range(10):
            z = rng.normal(size=3)
            J = generator_jacobian(net, z)
            J_fd = np.empty_like(J)
            for j in range(3):
                e = np.zeros(3)
                e[j] = h
                J_fd[:, j] = (
                    generator_forward(net, z + e) - generator_forward(net, z - e)
                ) / (2 * h)
            np.testing.assert_allclose(J, J_fd, atol=1e-5)


class TestImageDimension:
    def test_linear_rank_two(self, rng):
        # product of two rank-2 factors, no activations
        U = rng.normal(size=(7, 2))
        V = rng.normal(size=(2, 5))
        net = GeneratorNetwork((Layer(V, "identity"), Layer(U, "identity")))
        assert estimate_image_dimension(net, trials=5, seed=0).value == 2

    def test_generic_relu_net_with_latent_two(self):
        net = random_relu_network((2, 7, 9), seed=1)
        est = estimate_image_dimension(net, trials=50, seed=0)
        assert est.value == 2

    def test_constant_zero_net(self):
        net = GeneratorNetwork((Layer(np.zeros((4, 3)), "relu"),))
        assert estimate_image_dimension(net, trials=5, seed=0).value == 0

    def test_never_exceeds_min_layer_width(self):
        for seed in range(10):
            widths = (3, 2, 6, 5)  # bottleneck width 2
            net = random_relu_network(widths, seed=seed)
            est = estimate_image_dimension(net, trials=20, seed=seed)
            assert est.value <= min(widths)


class TestSparsePrior:
    def test_full_support_dense(self):
        prior = SparsePrior(np.eye(6), 6, "generic-orthonormal")
        x = sample_sparse(prior, seed=0)
        assert np.count_nonzero(x) == 6

    def test_single_support_is_basis_vector(self):
        prior = SparsePrior(np.eye(6), 1, "generic-orthonormal")
        x = sample_sparse(prior, seed=3)
        assert np.count_nonzero(x) == 1

    def test_two_sparse_in_generic_basis(self):
        prior = generic_orthonormal_sparse_prior(10, 2, seed=5)
        for seed in range(10):
            x = sample_sparse(prior, seed=seed)
            coeffs = prior.basis.T @ x
            assert np.sum(np.abs(coeffs) > 1e-12) == 2

    def test_generic_orthonormal_energies_strictly_positive(self):
        # distinguishes generic bases from standard-basis sparsity
        blocks = block_structure_for_power_spectrum(10)
        prior = generic_orthonormal_sparse_prior(10, 2, seed=7)
        for seed in range(100):
            x = sample_sparse(prior, seed=seed)
            assert np.all(second_moment_blocks(x, blocks) > 0)

    def test_standard_basis_prior_blockifies_time_deltas(self):
        prior = standard_basis_sparse_prior(8, 2)
        blocks = block_structure_for_power_spectrum(8)
        # shifting the support must preserve the power spectrum
        c = np.zeros(8)
        c[1], c[4] = 1.5, -0.5
        from momentlab.measurements import to_real_fourier

        x = to_real_fourier(c)
        x_shifted = to_real_fourier(np.roll(c, 3))
        np.testing.assert_allclose(
            second_moment_blocks(x, blocks),
            second_moment_blocks(x_shifted, blocks),
            atol=1e-12,
        )
        # and both are realizable by the prior (columns of its basis)
        np.testing.assert_allclose(prior.basis @ c, x, atol=1e-12)

    def test_sparsity_bounds(self):
        with pytest.raises(ValueError):
            SparsePrior(np.eye(4), 5)
        with pytest.raises(ValueError):
            SparsePrior(np.eye(4), 0)


class TestSampleMixing:
    def test_special_orthogonal_contract(self):
        for seed in range(1000):
            A = sample_mixing(6, "special-orthogonal", seed)
            err = np.max(np.abs(A.entries.T @ A.entries - np.eye(6)))
            assert err < 1e-10
            assert abs(np.linalg.det(A.entries) - 1.0) < 1e-10

    def test_reproducible(self):
        A1 = sample_mixing(5, "general-linear", 123)
        A2 = sample_mixing(5, "general-linear", 123)
        np.testing.assert_array_equal(A1.entries, A2.entries)

    def test_so2_angle_uniform(self):
        rng = np.random.default_rng(0)
        angles = np.empty(100_000)
        for i in range(angles.size):
            A = sample_mixing(2, "special-orthogonal", rng).entries
            angles[i] = np.arctan2(A[1, 0], A[0, 0])
        stat = kstest(angles, "uniform", args=(-np.pi, 2 * np.pi)).statistic
        assert stat < 0.01


class TestSerialization:
    def test_network_roundtrip(self):
        net = random_relu_network((2, 5, 4), seed=9)
        clone = network_from_json(network_to_json(net))
        assert clone.latent_dim == net.latent_dim
        z = np.array([0.3, -1.2])
        np.testing.assert_array_equal(
            generator_forward(clone, z), generator_forward(net, z)
        )

    def test_sparse_roundtrip(self):
        prior = generic_orthonormal_sparse_prior(6, 2, seed=1)
        clone = sparse_prior_from_json(sparse_prior_to_json(prior))
        np.testing.assert_array_equal(clone.basis, prior.basis)
        assert clone.sparsity == prior.sparsity
        assert clone.kind == prior.kind


class TestPerturbFinalLayer:
    def test_small_relative_change(self):
        net = random_relu_network((2, 6, 8), seed=2)
        bumped = perturb_final_layer(net, rel_scale=1e-2, seed=0)
        base = net.layers[-1].weight
        delta = bumped.layers[-1].weight - base
        assert 0 < np.linalg.norm(delta) < 0.1 * np.linalg.norm(base)
        for a, b in zip(net.layers[:-1], bumped.layers[:-1]):
            np.testing.assert_array_equal(a.weight, b.weight)
