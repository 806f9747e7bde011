"""基础核、元核与 Gram 矩阵的单元测试。"""
from __future__ import annotations

import math

import numpy as np
import pytest

from toolkits.kt_regression.exceptions import InputError
from toolkits.kt_regression.kernels import (
    base_gram,
    base_matrix,
    eval_base,
    eval_meta,
    gram,
    meta_matrix,
)
from toolkits.kt_regression.schemas import KernelSpec, MetaKernelSpec


def test_gaussian_identical_points():
    spec = KernelSpec("gaussian", 0.3)
    assert eval_base(spec, [1.5, -2.0], [1.5, -2.0]) == 1.0


def test_wendland_support_boundary():
    assert eval_base(KernelSpec("wendland0", 1.0), [0.0], [1.0]) == 0.0
    assert eval_base(KernelSpec("wendland0", 1.0), [0.0], [0.25]) == pytest.approx(0.75)


def test_gaussian_unit_distance():
    value = eval_base(KernelSpec("gaussian", 1.0), [0.0], [1.0])
    assert value == pytest.approx(0.606530659, abs=1e-9)


def test_laplace_value():
    value = eval_base(KernelSpec("laplace", 2.0), [0.0, 0.0], [3.0, 4.0])
    assert value == pytest.approx(math.exp(-2.5))


def test_dimension_mismatch():
    with pytest.raises(InputError):
        eval_base(KernelSpec("gaussian", 1.0), [0.0], [0.0, 1.0])
    with pytest.raises(InputError):
        base_matrix(KernelSpec("gaussian", 1.0), np.zeros((2, 1)), np.zeros((3, 2)))


def test_unknown_family_and_bad_bandwidth():
    with pytest.raises(InputError):
        KernelSpec("cauchy", 1.0)
    with pytest.raises(InputError):
        KernelSpec("gaussian", 0.0)
    with pytest.raises(InputError):
        MetaKernelSpec("product", KernelSpec("gaussian", 1.0))


def test_nw_meta_kernel_diagonal():
    meta = MetaKernelSpec("nw", KernelSpec("gaussian", 1.0))
    assert eval_meta(meta, ([0.3], 2.0), ([0.3], 2.0)) == pytest.approx(5.0)


def test_rr_meta_kernel_vanishes_outside_support():
    meta = MetaKernelSpec("rr", KernelSpec("wendland0", 0.5))
    assert eval_meta(meta, ([0.0], 3.0), ([2.0], -7.0)) == 0.0


def test_rr_meta_kernel_value():
    meta = MetaKernelSpec("rr", KernelSpec("gaussian", 1.0))
    value = eval_meta(meta, ([0.0], 1.0), ([1.0], -1.0))
    assert value == pytest.approx(math.exp(-1.0) - math.exp(-0.5))
    assert value == pytest.approx(-0.238651, abs=1e-6)


def test_concatenated_meta_kernel_uses_joint_vector():
    base = KernelSpec("laplace", 0.7)
    meta = MetaKernelSpec("concat", base)
    expected = eval_base(base, [0.1, 0.2, 1.0], [0.4, -0.3, -0.5])
    assert eval_meta(meta, ([0.1, 0.2], 1.0), ([0.4, -0.3], -0.5)) == pytest.approx(
        expected
    )


def test_base_only_meta_ignores_labels():
    base = KernelSpec("gaussian", 0.5)
    meta = MetaKernelSpec("base", base)
    assert eval_meta(meta, ([0.0], 10.0), ([0.2], -3.0)) == pytest.approx(
        eval_base(base, [0.0], [0.2])
    )


def test_gram_single_point():
    meta = MetaKernelSpec("nw", KernelSpec("gaussian", 1.0))
    matrix = gram(meta, np.array([[0.5]]), np.array([3.0]))
    assert matrix.shape == (1, 1)
    assert matrix[0, 0] == pytest.approx(eval_meta(meta, ([0.5], 3.0), ([0.5], 3.0)))


def test_gram_identical_points_is_rank_one():
    meta = MetaKernelSpec("nw", KernelSpec("gaussian", 1.0))
    matrix = gram(meta, np.zeros((2, 1)), np.zeros(2))
    np.testing.assert_array_equal(matrix, np.ones((2, 2)))


@pytest.mark.parametrize("family", ["gaussian", "laplace", "wendland0"])
def test_gram_matches_scalar_evaluations(family):
    rng = np.random.default_rng(3)
    x = rng.normal(size=(3, 2))
    spec = KernelSpec(family, 1.3)
    matrix = base_gram(spec, x)
    for i in range(3):
        for j in range(3):
            assert matrix[i, j] == pytest.approx(eval_base(spec, x[i], x[j]), abs=1e-15)
    np.testing.assert_array_equal(matrix, matrix.T)


@pytest.mark.parametrize("mode", ["base", "concat", "nw", "rr"])
def test_meta_gram_symmetric_psd(mode):
    rng = np.random.default_rng(11)
    x = rng.uniform(-1, 1, size=(12, 1))
    y = rng.normal(size=12)
    meta = MetaKernelSpec(mode, KernelSpec("gaussian", 0.4))
    matrix = gram(meta, x, y)
    np.testing.assert_array_equal(matrix, matrix.T)
    assert np.linalg.eigvalsh(matrix).min() > -1e-10
    np.testing.assert_allclose(matrix, meta_matrix(meta, x, y, x, y), atol=1e-15)


@pytest.mark.parametrize("family", ["gaussian", "laplace", "wendland0"])
def test_base_kernels_shift_invariant(family):
    rng = np.random.default_rng(21)
    spec = KernelSpec(family, 1.7)
    for _ in range(50):
        d = int(rng.integers(1, 4))
        x1, x2 = rng.normal(size=d), rng.normal(size=d)
        shift = rng.uniform(-10, 10, size=d)
        plain = eval_base(spec, x1, x2)
        moved = eval_base(spec, x1 + shift, x2 + shift)
        assert moved == pytest.approx(plain, rel=1e-12, abs=1e-12)


@pytest.mark.parametrize("family", ["gaussian", "laplace", "wendland0"])
def test_base_kernels_monotone_in_bandwidth(family):
    rng = np.random.default_rng(8)
    bandwidths = np.geomspace(0.01, 100.0, 40)
    for _ in range(20):
        x1, x2 = rng.normal(size=2), rng.normal(size=2)
        values = [eval_base(KernelSpec(family, h), x1, x2) for h in bandwidths]
        assert all(b >= a for a, b in zip(values, values[1:]))


def _random_labeled_set(rng: np.random.Generator, d: int):
    n = int(rng.integers(1, 21))
    return rng.normal(size=(n, d)), rng.uniform(-5, 5, size=n)


@pytest.mark.parametrize("mode", ["base", "concat", "nw", "rr"])
@pytest.mark.parametrize("family", ["gaussian", "laplace"])
def test_meta_gram_psd_on_random_sets(mode, family):
    rng = np.random.default_rng(50)
    for _ in range(50):
        x, y = _random_labeled_set(rng, int(rng.integers(1, 4)))
        spec = KernelSpec(family, float(rng.uniform(0.2, 3.0)))
        matrix = gram(MetaKernelSpec(mode, spec), x, y)
        assert np.linalg.eigvalsh(matrix).min() >= -1e-8 * np.trace(matrix)


@pytest.mark.parametrize("mode", ["base", "nw", "rr"])
def test_wendland_meta_gram_psd_in_one_dimension(mode):
    # (1 - r)_+ 仅在一维上正定
    rng = np.random.default_rng(51)
    for _ in range(50):
        x, y = _random_labeled_set(rng, 1)
        spec = KernelSpec("wendland0", float(rng.uniform(0.2, 3.0)))
        matrix = gram(MetaKernelSpec(mode, spec), x, y)
        assert np.linalg.eigvalsh(matrix).min() >= -1e-8 * np.trace(matrix)
