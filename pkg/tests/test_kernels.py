import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sgldr import _core
from sgldr.kernels import (
    KernelError,
    build_big_K,
    build_kernel_state,
    build_permutation,
    gram_matrix,
    median_bandwidth,
    psd_factor,
    rbf,
    rbf_grad_first,
)


class TestRbf:
    def test_coincident_points(self):
        assert rbf([1.0, 2.0], [1.0, 2.0], 0.7) == 1.0

    def test_hand_value_1d(self):
        assert rbf([0.0], [1.0], 1.0) == pytest.approx(math.exp(-1.0), rel=1e-12)

    def test_hand_value_2d(self):
        assert rbf([0.0, 0.0], [1.0, 1.0], 2.0) == pytest.approx(math.exp(-1.0), rel=1e-12)

    def test_rejects_nonpositive_bandwidth(self):
        with pytest.raises(KernelError):
            rbf([0.0], [1.0], 0.0)

    # ranges keep the exponent above float64 underflow so the bound stays strict
    @given(st.lists(st.floats(-3, 3), min_size=1, max_size=4),
           st.lists(st.floats(-3, 3), min_size=1, max_size=4),
           st.floats(0.5, 10))
    def test_symmetric_and_bounded(self, a, b, h):
        n = min(len(a), len(b))
        a, b = a[:n], b[:n]
        v = rbf(a, b, h)
        assert 0.0 < v <= 1.0
        assert v == rbf(b, a, h)


class TestRbfGradFirst:
    def test_zero_at_coincident_points(self):
        np.testing.assert_allclose(rbf_grad_first([1.0], [1.0], 0.5), [0.0])

    def test_hand_value(self):
        assert rbf_grad_first([1.0], [0.0], 1.0)[0] == pytest.approx(
            -2.0 * math.exp(-1.0), rel=1e-12
        )

    def test_matches_finite_difference(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            zj, zi = rng.normal(size=3), rng.normal(size=3)
            h = rng.uniform(0.3, 3.0)
            fd = np.empty(3)
            for c in range(3):
                e = np.zeros(3)
                e[c] = 1e-6
                fd[c] = (rbf(zj + e, zi, h) - rbf(zj - e, zi, h)) / 2e-6
            np.testing.assert_allclose(rbf_grad_first(zj, zi, h), fd, atol=1e-6)

    def test_antisymmetry(self):
        rng = np.random.default_rng(1)
        a, b = rng.normal(size=2), rng.normal(size=2)
        np.testing.assert_allclose(
            rbf_grad_first(a, b, 1.1), -rbf_grad_first(b, a, 1.1), rtol=1e-12
        )


class TestGramMatrix:
    def test_single_particle(self):
        np.testing.assert_array_equal(gram_matrix([[0.5]], 1.0), [[1.0]])

    def test_identical_particles(self):
        g = gram_matrix([[1.0, 2.0], [1.0, 2.0]], 0.5)
        np.testing.assert_allclose(g, np.ones((2, 2)))

    def test_matches_elementwise_rbf(self):
        rng = np.random.default_rng(2)
        z = rng.normal(size=(3, 2))
        g = gram_matrix(z, 0.8)
        for i in range(3):
            for j in range(3):
                assert g[i, j] == pytest.approx(rbf(z[i], z[j], 0.8), abs=1e-14)

    def test_symmetric_unit_diagonal(self):
        rng = np.random.default_rng(3)
        z = rng.normal(size=(6, 4))
        g = gram_matrix(z, 1.2)
        np.testing.assert_array_equal(g, g.T)
        np.testing.assert_array_equal(np.diag(g), np.ones(6))
        assert np.all(g > 0) and np.all(g <= 1)


class TestMedianBandwidth:
    def test_two_particles_unit_distance(self):
        assert median_bandwidth([[0.0], [1.0]]) == pytest.approx(1.0 / math.log(3), rel=1e-12)

    def test_coincident_floor(self):
        assert median_bandwidth(np.zeros((5, 2))) == 1e-8

    def test_quadratic_scaling(self):
        rng = np.random.default_rng(4)
        z = rng.normal(size=(7, 3))
        h1 = median_bandwidth(z)
        h2 = median_bandwidth(3.0 * z)
        assert h2 == pytest.approx(9.0 * h1, rel=1e-12)

    def test_even_count_lower_middle(self):
        # 4 particles -> 6 pairwise distances; median is the 3rd smallest
        z = np.array([[0.0], [1.0], [3.0], [7.0]])
        dists = sorted(abs(a - b) for i, a in enumerate(z[:, 0]) for b in z[i + 1:, 0])
        expected = dists[(len(dists) - 1) // 2] ** 2 / math.log(5)
        assert median_bandwidth(z) == pytest.approx(expected, rel=1e-12)

    def test_rejects_single_particle(self):
        with pytest.raises(KernelError):
            median_bandwidth([[1.0]])


class TestPsdFactor:
    def test_identity(self):
        L, jitter = psd_factor(np.eye(4))
        np.testing.assert_array_equal(L, np.eye(4))
        assert jitter == 0.0

    def test_coincident_particle_gram(self):
        gram = np.ones((2, 2))
        L, jitter = psd_factor(gram)
        assert jitter <= 1e-8
        assert np.max(np.abs(L @ L.T - gram)) < 1e-7

    def test_reconstruction(self):
        rng = np.random.default_rng(5)
        z = rng.normal(size=(5, 2))
        gram = gram_matrix(z, 0.9)
        L, jitter = psd_factor(gram)
        target = gram + jitter * np.eye(5)
        assert np.max(np.abs(L @ L.T - target)) < 1e-10

    def test_random_ensembles_need_small_jitter(self):
        rng = np.random.default_rng(6)
        for _ in range(25):
            z = rng.normal(size=(rng.integers(2, 8), rng.integers(1, 4)))
            gram = gram_matrix(z, rng.uniform(0.2, 2.0))
            _, jitter = psd_factor(gram)
            assert jitter <= 1e-8


class TestPermutation:
    def test_trivial_cases(self):
        np.testing.assert_array_equal(build_permutation(1, 4).index_map, np.arange(4))
        np.testing.assert_array_equal(build_permutation(5, 1).index_map, np.arange(5))

    def test_k2_d2_mapping(self):
        spec = build_permutation(2, 2)
        # dimension-major (coord c, particle p) at c*K + p -> particle-major p*d + c
        for c in range(2):
            for p in range(2):
                assert spec.index_map[c * 2 + p] == p * 2 + c

    def test_bijection_and_orthogonality(self):
        for K, d in [(2, 2), (3, 4), (5, 3)]:
            spec = build_permutation(K, d)
            assert sorted(spec.index_map) == list(range(K * d))
            P = spec.matrix()
            np.testing.assert_array_equal(P @ P.T, np.eye(K * d))

    def test_reorders_vectors(self):
        K, d = 3, 2
        rng = np.random.default_rng(7)
        particle_major = rng.normal(size=K * d)
        dim_major = particle_major.reshape(K, d).T.ravel()
        P = build_permutation(K, d).matrix()
        np.testing.assert_array_equal(P @ particle_major, dim_major)


class TestBigK:
    def test_d1_is_gram_itself(self):
        gram = np.array([[1.0, 0.3], [0.3, 1.0]])
        np.testing.assert_allclose(build_big_K(gram, 1), gram)

    def test_identity_gram(self):
        big = build_big_K(np.eye(3), 2)
        np.testing.assert_array_equal(big, np.eye(6))

    def test_dense_multiply_equivalence(self):
        rng = np.random.default_rng(8)
        for _ in range(50):
            K = int(rng.integers(1, 6))
            d = int(rng.integers(1, 5))
            z = rng.normal(size=(K, d))
            gram = gram_matrix(z, rng.uniform(0.3, 2.0))
            grads = rng.normal(size=(K, d))
            big = build_big_K(gram, d)
            lhs = (big @ grads.ravel()).reshape(K, d)
            np.testing.assert_allclose(lhs, gram @ grads, atol=1e-12)


class TestBackends:
    def test_backend_selected(self):
        assert _core.BACKEND in ("cython", "python")

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 2 ** 32 - 1), st.integers(2, 8), st.integers(1, 4),
           st.floats(0.2, 3.0))
    def test_backends_agree(self, seed, K, d, h):
        rng = np.random.default_rng(seed)
        z = rng.normal(size=(K, d))
        g = rng.normal(size=(K, d))
        gram_a = _core.rbf_gram(z, h)
        gram_b = _core._kernels_py.rbf_gram(z, h)
        np.testing.assert_allclose(gram_a, gram_b, atol=1e-14)
        np.testing.assert_allclose(
            _core.pairwise_sq_dists(z), _core._kernels_py.pairwise_sq_dists(z), atol=1e-13
        )
        np.testing.assert_allclose(
            _core.svgd_drift(z, g, gram_a, h),
            _core._kernels_py.svgd_drift(z, g, gram_b, h),
            atol=1e-12,
        )


def test_build_kernel_state_modes():
    rng = np.random.default_rng(9)
    z = rng.normal(size=(4, 2))
    state = build_kernel_state(z, "rbf-median")
    assert state.bandwidth == pytest.approx(median_bandwidth(z))
    state = build_kernel_state(z, "rbf-fixed", h=0.5)
    assert state.bandwidth == 0.5
    state = build_kernel_state(z, "identity")
    assert state.identity
    np.testing.assert_array_equal(state.gram, np.eye(4))
    with pytest.raises(KernelError):
        build_kernel_state(z, "rbf-fixed")
    with pytest.raises(KernelError):
        build_kernel_state(z, "bogus")
