import numpy as np
import pytest

from ckdr.errors import DataError, DegenerateKernelError
from ckdr.kernels import (
    KernelSpec,
    cross_gram,
    eval_kernel,
    gram,
    normalize_spec,
    normalized_gram,
)
from ckdr.oracle import ExplicitFeatureMap


def test_gaussian_identical_points_is_one():
    k = KernelSpec(kind="gaussian", bandwidth=3.7)
    x = np.array([0.4, -1.2])
    # exponent of zero
    assert eval_kernel(k, x, x) == 1.0


def test_linear_dot_product():
    k = KernelSpec(kind="linear")
    # 1*3 + 2*(-1) = 1
    assert eval_kernel(k, [1.0, 2.0], [3.0, -1.0]) == pytest.approx(1.0)


def test_polynomial_homogeneous_square():
    k = KernelSpec(kind="polynomial", degree=2)
    x, y = np.array([1.0, 1.0]), np.array([2.0, 0.0])
    brute = sum(a * b for a, b in zip(x, y)) ** 2  # independent dot-product route
    assert brute == 4.0
    assert eval_kernel(k, x, y) == pytest.approx(4.0)


def test_eval_symmetry():
    rng = np.random.default_rng(0)
    x, y = rng.standard_normal(3), rng.standard_normal(3)
    for k in (
        KernelSpec(kind="linear"),
        KernelSpec(kind="gaussian", bandwidth=0.8),
        KernelSpec(kind="polynomial", degree=3),
        KernelSpec(kind="coordinate-linear", coords=(0, 2)),
    ):
        assert eval_kernel(k, x, y) == eval_kernel(k, y, x)


def test_dimension_mismatch_rejected():
    with pytest.raises(DataError):
        eval_kernel(KernelSpec(kind="linear"), [1.0, 2.0], [1.0])


def test_gaussian_formula_uses_bandwidth():
    k = KernelSpec(kind="gaussian", bandwidth=4.0)
    assert eval_kernel(k, [0.0], [2.0]) == pytest.approx(np.exp(-1.0))


def test_gram_linear_orthonormal_points():
    K = gram(KernelSpec(kind="linear"), np.eye(2))
    np.testing.assert_array_equal(K, np.eye(2))


def test_gram_gaussian_identical_points():
    K = gram(KernelSpec(kind="gaussian", bandwidth=1.0), np.zeros((2, 1)))
    np.testing.assert_array_equal(K, np.ones((2, 2)))


def test_gram_coordinate_linear_second_coordinate():
    # pairs of second coordinates (1, 2): products 1, 2, 2, 4
    k = KernelSpec(kind="coordinate-linear", coords=(1,))
    K = gram(k, np.array([[5.0, 1.0], [7.0, 2.0]]))
    np.testing.assert_allclose(K, [[1.0, 2.0], [2.0, 4.0]])


def test_gram_is_exactly_symmetric():
    rng = np.random.default_rng(3)
    X = rng.standard_normal((7, 4))
    for k in (KernelSpec(kind="gaussian", bandwidth=1.3), KernelSpec(kind="polynomial", degree=2)):
        K = gram(k, X)
        assert np.array_equal(K, K.T)


def test_normalized_gram_single_point():
    k = normalize_spec(KernelSpec(kind="linear"), [[1.0]])
    np.testing.assert_allclose(normalized_gram(k, [[1.0]]), [[1.0]])


def test_normalized_gram_halves():
    K = normalized_gram(KernelSpec(kind="linear"), np.eye(2))
    np.testing.assert_allclose(K, 0.5 * np.eye(2))


def test_normalized_trace_at_most_one():
    rng = np.random.default_rng(4)
    X = rng.standard_normal((6, 3)) * 2.0
    for raw in (KernelSpec(kind="linear"), KernelSpec(kind="polynomial", degree=2)):
        k = normalize_spec(raw, X)
        assert np.trace(normalized_gram(k, X)) <= 1.0 + 1e-12


def test_normalized_times_n_recovers_gram():
    rng = np.random.default_rng(5)
    spec = KernelSpec(kind="gaussian", bandwidth=1.0)
    for n in (1, 2, 4, 8):  # power-of-two division is exact in IEEE
        X = rng.standard_normal((n, 2))
        assert np.array_equal(normalized_gram(spec, X) * n, gram(spec, X))
    X = rng.standard_normal((3, 2))
    np.testing.assert_allclose(normalized_gram(spec, X) * 3, gram(spec, X), rtol=1e-15)


def test_normalize_spec_gaussian_unchanged():
    k = KernelSpec(kind="gaussian", bandwidth=1.0)
    assert normalize_spec(k, np.ones((3, 2))).scale == 1.0


def test_normalize_spec_linear_quarter():
    k = normalize_spec(KernelSpec(kind="linear"), np.array([[2.0, 0.0], [1.0, 0.0]]))
    assert k.scale == pytest.approx(0.25)


def test_normalize_spec_precomputed():
    M = np.diag([2.5, 1.0])
    k = normalize_spec(KernelSpec(kind="precomputed", matrix=M), np.arange(2))
    assert k.scale == pytest.approx(0.4)


def test_normalize_spec_zero_diagonal_rejected():
    with pytest.raises(DegenerateKernelError):
        normalize_spec(KernelSpec(kind="linear"), np.zeros((3, 2)))


def test_grams_are_psd():
    rng = np.random.default_rng(6)
    X = rng.standard_normal((10, 3))
    for k in (
        KernelSpec(kind="linear"),
        KernelSpec(kind="gaussian", bandwidth=0.5),
        KernelSpec(kind="polynomial", degree=2),
        KernelSpec(kind="coordinate-linear", coords=(0, 1)),
    ):
        w = np.linalg.eigvalsh(gram(k, X))
        assert w.min() >= -1e-8 * max(w.max(), 1e-300)


def test_disjoint_coordinate_kernels_have_orthogonal_features():
    k1 = KernelSpec(kind="coordinate-linear", coords=(0,), normalize=False)
    k2 = KernelSpec(kind="coordinate-linear", coords=(1, 2), normalize=False)
    rng = np.random.default_rng(7)
    X = rng.standard_normal((5, 3))
    f1 = ExplicitFeatureMap(k1, 3)(X)
    f2 = ExplicitFeatureMap(k2, 3)(X)
    # stacked features live on disjoint coordinates: cross inner products vanish
    stacked1 = np.hstack([f1, np.zeros_like(f2)])
    stacked2 = np.hstack([np.zeros_like(f1), f2])
    assert np.all(stacked1 @ stacked2.T == 0.0)


def test_precomputed_requires_psd():
    with pytest.raises(DataError):
        KernelSpec(kind="precomputed", matrix=np.array([[1.0, 2.0], [2.0, 1.0]]))


def test_precomputed_gram_and_eval():
    M = np.array([[2.0, 0.5], [0.5, 1.0]])
    k = KernelSpec(kind="precomputed", matrix=M)
    np.testing.assert_allclose(gram(k, np.arange(2)), M)
    assert eval_kernel(k, 0, 1) == pytest.approx(0.5)
    with pytest.raises(DataError):
        gram(k, np.arange(3))


def test_cross_gram_matches_eval():
    rng = np.random.default_rng(8)
    X, Y = rng.standard_normal((4, 3)), rng.standard_normal((3, 3))
    for k in (KernelSpec(kind="gaussian", bandwidth=1.1), KernelSpec(kind="polynomial", degree=3)):
        K = cross_gram(k, X, Y)
        for i in range(4):
            for j in range(3):
                assert K[i, j] == pytest.approx(eval_kernel(k, X[i], Y[j]), rel=1e-12)


def test_spec_validation():
    with pytest.raises(DataError):
        KernelSpec(kind="polynomial")
    with pytest.raises(DataError):
        KernelSpec(kind="gaussian", bandwidth=-1.0)
    with pytest.raises(DataError):
        KernelSpec(kind="coordinate-linear", coords=())
    with pytest.raises(DataError):
        KernelSpec(kind="splines")
