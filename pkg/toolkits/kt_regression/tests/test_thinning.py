"""KT-Compress++ 各组成部分的结构性质与确定性测试。"""
from __future__ import annotations

import math

import numpy as np
import pytest

from toolkits.kt_regression.data import gen_sim
from toolkits.kt_regression.exceptions import InputError
from toolkits.kt_regression.kernels import eval_meta
from toolkits.kt_regression.rng import RandomStream
from toolkits.kt_regression.schemas import (
    Coreset,
    KernelSpec,
    LabeledDataset,
    MetaKernelSpec,
    ThinningConfig,
)
from toolkits.kt_regression.thinning import (
    KernelOracle,
    baseline_coreset,
    compress,
    default_compression_level,
    get_swap_params,
    is_power_of_four,
    kt_compress_pp,
    kt_halve,
    kt_split,
    kt_swap,
    largest_power_of_four,
    load_coreset_csv,
    mmd_sq,
    mmd_sq_naive,
    save_coreset_csv,
    standard_thin,
)

GAUSS = KernelSpec("gaussian", 0.5)


def _meta(mode: str = "nw") -> MetaKernelSpec:
    return MetaKernelSpec(mode, GAUSS)


def _random_data(n: int, seed: int, d: int = 1) -> LabeledDataset:
    rng = np.random.default_rng(seed)
    return LabeledDataset(x=rng.normal(size=(n, d)), y=rng.normal(size=n))


def _assert_subset(coreset: Coreset, pool) -> None:
    values = coreset.indices
    assert np.unique(values).size == values.size
    assert np.all(np.isin(values, np.asarray(pool)))


# ----------------------------------------------------------------------
# MMD
# ----------------------------------------------------------------------
def test_mmd_identical_sets_is_zero():
    data = _random_data(6, 0)
    value = mmd_sq(_meta(), data, [1, 3, 4], [1, 3, 4])
    assert value.mmd_squared == pytest.approx(0.0, abs=1e-12)


def test_mmd_two_points():
    data = _random_data(2, 1)
    meta = _meta("rr")
    z0 = (data.x[0], data.y[0])
    z1 = (data.x[1], data.y[1])
    expected = eval_meta(meta, z0, z0) - 2 * eval_meta(meta, z0, z1) + eval_meta(
        meta, z1, z1
    )
    value = mmd_sq(meta, data, [0], [1])
    assert value.raw == pytest.approx(expected, abs=1e-12)
    assert value.mmd_squared >= 0


@pytest.mark.parametrize("seed", range(20))
def test_mmd_matches_double_loop(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 11))
    data = _random_data(n, seed + 100, d=2)
    a = rng.choice(n, size=int(rng.integers(1, n + 1)), replace=False)
    b = rng.choice(n, size=int(rng.integers(1, n + 1)), replace=False)
    mode = ["base", "concat", "nw", "rr"][seed % 4]
    value = mmd_sq(_meta(mode), data, a, b)
    assert value.raw == pytest.approx(mmd_sq_naive(_meta(mode), data, a, b), abs=1e-12)


def test_mmd_empty_set_rejected():
    with pytest.raises(InputError):
        mmd_sq(_meta(), _random_data(4, 0), [], [0])


def test_oracle_on_the_fly_matches_cached():
    data = _random_data(20, 4)
    cached = KernelOracle(_meta(), data)
    streamed = KernelOracle(_meta(), data, gram_cap=0)
    assert cached.cached and not streamed.cached
    rows, cols = [3, 7, 0], [19, 2, 5, 5]
    np.testing.assert_allclose(cached.block(rows, cols), streamed.block(rows, cols))
    np.testing.assert_allclose(cached.diag(rows), streamed.diag(rows))


def test_oracle_local_reuses_cache_for_whole_universe():
    data = _random_data(12, 3)
    universe = np.random.default_rng(3).permutation(12)
    oracle = KernelOracle(_meta("rr"), data, universe)
    whole = oracle.local(universe)
    assert whole is oracle.local(universe)
    assert oracle.restrict(universe) is oracle
    part = universe[:6]
    np.testing.assert_array_equal(oracle.local(part), whole[:6, :6])
    restricted = oracle.restrict(part)
    assert restricted is not oracle and restricted.cached
    np.testing.assert_array_equal(restricted.local(part), whole[:6, :6])
    assert KernelOracle(_meta(), data, gram_cap=0).local(universe) is None


def test_oracle_restrict_caches_small_subsets_of_streamed_universe():
    data = _random_data(32, 1)
    streamed = KernelOracle(_meta(), data, gram_cap=16)
    assert not streamed.cached
    assert streamed.restrict(np.arange(20)) is streamed
    small = streamed.restrict(np.arange(8, 24))
    assert small.cached
    np.testing.assert_allclose(
        small.block([8, 9], [10, 23]), streamed.block([8, 9], [10, 23])
    )


@pytest.mark.parametrize("cap", [64, 0])
def test_row_sums_chunked_by_element_budget(monkeypatch, cap):
    data = _random_data(40, 6, d=2)
    oracle = KernelOracle(_meta("rr"), data, gram_cap=cap)
    rows = np.arange(0, 40, 3)
    cols = np.arange(40)[::-1]
    expected = oracle.block(rows, cols).sum(axis=1)
    monkeypatch.setattr("toolkits.kt_regression.thinning._BLOCK_ELEMENTS", 20)
    np.testing.assert_allclose(oracle.row_sums(rows, cols), expected, rtol=1e-12)


# ----------------------------------------------------------------------
# get_swap_params / kt-split
# ----------------------------------------------------------------------
def test_swap_params_zero_vmax():
    assert get_swap_params(0.7, 0.0, 0.5) == (0.0, 0.7)


def test_swap_params_from_zero_sigma():
    threshold, sigma = get_swap_params(0.0, 1.0, 0.01)
    assert threshold == pytest.approx(1.0)
    assert sigma == pytest.approx(1.0)


def test_swap_params_clamped_growth():
    threshold, sigma = get_swap_params(1.0, 1.0, 2.0)
    assert threshold == pytest.approx(1.0)
    assert sigma == pytest.approx(1.0)


def test_swap_params_rejects_nonpositive_delta():
    with pytest.raises(InputError):
        get_swap_params(0.0, 1.0, 0.0)


def test_split_single_pair():
    data = _random_data(2, 0)
    first, second = kt_split(_meta(), data, [0, 1], 0.5, RandomStream(3))
    assert len(first) == len(second) == 1
    assert sorted([*first.indices, *second.indices]) == [0, 1]


@pytest.mark.parametrize("seed", range(100))
def test_split_partition_and_determinism(seed):
    data = _random_data(40, seed)
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 41))
    indices = rng.permutation(40)[:n]
    first, second = kt_split(_meta(), data, indices, 0.5, RandomStream(seed))
    half = n // 2
    assert len(first) == len(second) == half
    merged = np.sort(np.concatenate([first.indices, second.indices]))
    np.testing.assert_array_equal(merged, np.sort(indices[: 2 * half]))
    again = kt_split(_meta(), data, indices, 0.5, RandomStream(seed))
    np.testing.assert_array_equal(again[0].indices, first.indices)
    np.testing.assert_array_equal(again[1].indices, second.indices)


def test_split_duplicate_pair():
    data = LabeledDataset(x=np.zeros((4, 1)), y=np.ones(4))
    first, second = kt_split(_meta(), data, [0, 1, 2, 3], 0.5, RandomStream(0))
    assert len(first) == len(second) == 2


def test_split_requires_two_points():
    with pytest.raises(InputError):
        kt_split(_meta(), _random_data(3, 0), [2], 0.5, RandomStream(0))


# ----------------------------------------------------------------------
# kt-swap
# ----------------------------------------------------------------------
def test_baseline_positions():
    np.testing.assert_array_equal(baseline_coreset([9, 8, 7, 6, 5]), [8, 6])


def test_swap_two_points_prefers_baseline_on_tie():
    data = LabeledDataset(x=[[0.0], [1.0]], y=[0.0, 0.0])
    meta = _meta("base")
    chosen = kt_swap(meta, data, [0, 1], (Coreset([0], 2), Coreset([1], 2)))
    np.testing.assert_array_equal(chosen.indices, [1])


def test_swap_identical_points_zero_mmd():
    data = LabeledDataset(x=np.ones((6, 1)), y=np.ones(6))
    idx = np.arange(6)
    candidates = kt_split(_meta(), data, idx, 0.5, RandomStream(1))
    chosen = kt_swap(_meta(), data, idx, candidates)
    assert len(chosen) == 3
    value = mmd_sq(_meta(), data, None, chosen)
    assert value.mmd_squared == pytest.approx(0, abs=1e-12)


@pytest.mark.parametrize("seed", range(100))
def test_swap_improves_on_all_candidates(seed):
    data = _random_data(16, seed)
    rng = np.random.default_rng(seed)
    n = 2 * int(rng.integers(1, 9))
    idx = rng.permutation(16)[:n]
    meta = _meta(["nw", "rr", "base"][seed % 3])
    candidates = kt_split(meta, data, idx, 0.5, RandomStream(seed))
    history: list[float] = []
    chosen = kt_swap(meta, data, idx, candidates, history=history)

    _assert_subset(chosen, idx)
    assert len(chosen) == n // 2
    value = mmd_sq(meta, data, idx, chosen).raw
    for option in (baseline_coreset(idx), candidates[0], candidates[1]):
        assert value <= mmd_sq(meta, data, idx, option).raw + 1e-12
    assert len(history) == n // 2 + 1
    assert all(b <= a + 1e-12 for a, b in zip(history, history[1:]))
    assert history[-1] == pytest.approx(value, abs=1e-9)


def test_swap_rejects_size_mismatch():
    data = _random_data(4, 0)
    with pytest.raises(InputError):
        kt_swap(_meta(), data, [0, 1, 2, 3], (Coreset([0], 4), Coreset([1, 2], 4)))


# ----------------------------------------------------------------------
# KT 减半
# ----------------------------------------------------------------------
def test_halve_two_points_is_symmetric():
    data = LabeledDataset(x=[[0.0], [1.0]], y=[1.0, -1.0])
    hits = 0
    for seed in range(1000):
        chosen = kt_halve(_meta(), data, [0, 1], 0.5, RandomStream(seed))
        assert len(chosen) == 1
        hits += int(chosen.indices[0] == 0)
    assert 400 <= hits <= 600


def test_halve_duplicates_zero_mmd():
    data = LabeledDataset(x=np.zeros((8, 1)), y=np.zeros(8))
    chosen = kt_halve(_meta(), data, np.arange(8), 0.5, RandomStream(2))
    assert len(chosen) == 4
    value = mmd_sq(_meta(), data, None, chosen)
    assert value.mmd_squared == pytest.approx(0, abs=1e-12)


def test_halve_deterministic_size_sixteen():
    data = _random_data(16, 5)
    first = kt_halve(_meta(), data, np.arange(16), 0.5, RandomStream(8))
    second = kt_halve(_meta(), data, np.arange(16), 0.5, RandomStream(8))
    assert len(first) == 8
    np.testing.assert_array_equal(first.indices, second.indices)
    _assert_subset(first, np.arange(16))


def test_halve_odd_input_drops_last():
    data = _random_data(17, 6)
    chosen = kt_halve(_meta(), data, np.arange(17), 0.5, RandomStream(0))
    assert len(chosen) == 8
    assert 16 not in chosen.indices


# ----------------------------------------------------------------------
# Compress 与 KT-Compress++
# ----------------------------------------------------------------------
def test_power_of_four_helpers():
    assert [n for n in range(1, 70) if is_power_of_four(n)] == [1, 4, 16, 64]
    assert largest_power_of_four(100) == 64
    assert largest_power_of_four(16512) == 16384
    assert default_compression_level(256) == 7
    assert default_compression_level(4) == 5
    assert default_compression_level(2) == 0


def test_compress_identity_at_base_size():
    data = _random_data(16, 0)
    idx = np.random.default_rng(0).permutation(16)
    out = compress(_meta(), data, idx, 2, 0.1, RandomStream(0))
    np.testing.assert_array_equal(out.indices, idx)


def test_compress_size_laws():
    data = _random_data(64, 1)
    assert len(compress(_meta(), data, np.arange(4), 0, 0.1, RandomStream(0))) == 2
    out = compress(_meta(), data, np.arange(64), 1, 0.1, RandomStream(0))
    assert len(out) == 16
    _assert_subset(out, np.arange(64))


def test_compress_inadmissible_size_suggests_truncation():
    data = _random_data(48, 0)
    with pytest.raises(InputError, match="16"):
        compress(_meta(), data, np.arange(48), 1, 0.1, RandomStream(0))


def test_compress_pp_smallest_case():
    data = _random_data(4, 0)
    config = ThinningConfig(meta=_meta(), g_override=0)
    assert len(kt_compress_pp(_meta(), data, config)) == 2


@pytest.mark.parametrize("mode", ["nw", "rr"])
def test_compress_pp_sqrt_size(mode):
    data = gen_sim(256, 3)
    meta = MetaKernelSpec(mode, KernelSpec("wendland0", 0.3))
    coreset = kt_compress_pp(meta, data, ThinningConfig(meta=meta, seed=5))
    assert len(coreset) == 16
    _assert_subset(coreset, np.arange(256))


@pytest.mark.parametrize("seed", range(100))
def test_compress_pp_deterministic_and_sized(seed):
    n = [16, 64][seed % 2]
    g = [None, 0, 1][seed % 3]
    data = _random_data(n, seed)
    config = ThinningConfig(meta=_meta(), seed=seed, g_override=g)
    first = kt_compress_pp(_meta(), data, config)
    second = kt_compress_pp(_meta(), data, config)
    assert len(first) == math.isqrt(n)
    np.testing.assert_array_equal(first.indices, second.indices)
    _assert_subset(first, np.arange(n))


def test_compress_pp_with_compression_stage():
    data = _random_data(256, 9)
    config = ThinningConfig(meta=_meta(), seed=1, g_override=1)
    coreset = kt_compress_pp(_meta(), data, config)
    assert len(coreset) == 16
    _assert_subset(coreset, np.arange(256))


def test_compress_pp_streaming_matches_cached():
    data = _random_data(64, 2)
    cached = ThinningConfig(meta=_meta(), seed=4, g_override=1)
    streamed = ThinningConfig(meta=_meta(), seed=4, g_override=1, gram_cap=0)
    np.testing.assert_array_equal(
        kt_compress_pp(_meta(), data, cached).indices,
        kt_compress_pp(_meta(), data, streamed).indices,
    )


def test_compress_pp_rejects_non_power_of_four():
    data = _random_data(100, 0)
    with pytest.raises(InputError, match="64"):
        kt_compress_pp(_meta(), data, ThinningConfig(meta=_meta()))


# ----------------------------------------------------------------------
# 标准稀疏化与核心集文件
# ----------------------------------------------------------------------
def test_standard_thin_full_permutation():
    coreset = standard_thin(10, 10, RandomStream(0))
    np.testing.assert_array_equal(np.sort(coreset.indices), np.arange(10))


def test_standard_thin_uniform_single_draw():
    counts = np.zeros(4)
    for seed in range(4000):
        counts[standard_thin(4, 1, RandomStream(seed)).indices[0]] += 1
    sd = math.sqrt(4000 * 0.25 * 0.75)
    assert np.all(np.abs(counts - 1000) <= 4 * sd)


def test_standard_thin_deterministic_and_range():
    data = _random_data(30, 0)
    first = standard_thin(data, 5, RandomStream(7))
    second = standard_thin(data, 5, RandomStream(7))
    np.testing.assert_array_equal(first.indices, second.indices)
    with pytest.raises(InputError):
        standard_thin(data, 31, RandomStream(0))
    with pytest.raises(InputError):
        standard_thin(data, 0, RandomStream(0))


def test_coreset_csv(tmp_path):
    path = tmp_path / "coreset.csv"
    save_coreset_csv(Coreset([5, 2, 9], 10), path)
    assert path.read_text(encoding="utf-8").splitlines() == [
        "position,dataset_index",
        "0,5",
        "1,2",
        "2,9",
    ]
    np.testing.assert_array_equal(load_coreset_csv(path, 10).indices, [5, 2, 9])


def test_coreset_csv_bad_row(tmp_path):
    path = tmp_path / "coreset.csv"
    path.write_text("position,dataset_index\n0,1\n2,3\n", encoding="utf-8")
    with pytest.raises(InputError, match="第 3 行"):
        load_coreset_csv(path, 10)


def test_coreset_csv_not_utf8(tmp_path):
    path = tmp_path / "coreset.csv"
    path.write_bytes(b"position,dataset_index\n0,\xff\n")
    with pytest.raises(InputError, match="UTF-8"):
        load_coreset_csv(path, 10)
