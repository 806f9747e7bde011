"""KT-Compress++ 核稀疏化：kt-split、kt-swap、对称化减半、递归 Compress。

同时提供标准稀疏化（均匀无放回抽样）基线与经验 MMD 诊断。
所有例程都是 (数据, 配置, 随机流) 的纯函数，输出为指向数据集的 :class:`Coreset`。
"""
from __future__ import annotations

import csv
import logging
import math
from collections.abc import Sequence
from pathlib import Path
from typing import Any

import numpy as np

from .exceptions import InputError, ResultIOError
from .kernels import eval_meta, gram, meta_matrix
from .rng import RandomStream
from .schemas import (
    Coreset,
    LabeledDataset,
    MetaKernelSpec,
    MetaMode,
    MmdValue,
    SplitState,
    ThinningConfig,
)

logger = logging.getLogger(__name__)

DEFAULT_GRAM_CAP = 4096
# 行和分块时单个子块的元素上限
_BLOCK_ELEMENTS = 2**22


# ----------------------------------------------------------------------
# 核矩阵访问
# ----------------------------------------------------------------------
class KernelOracle:
    """一次稀疏化调用内的元核访问对象。

    当全集规模不超过 ``gram_cap`` 时一次性预计算 Gram 矩阵，
    否则按需计算所请求的子块。
    """

    def __init__(
        self,
        meta: MetaKernelSpec,
        data: LabeledDataset,
        universe: Any = None,
        gram_cap: int = DEFAULT_GRAM_CAP,
    ) -> None:
        self.meta = meta
        self.data = data
        self.gram_cap = gram_cap
        universe = (
            np.arange(data.n, dtype=np.int64)
            if universe is None
            else np.asarray(universe, dtype=np.int64)
        )
        self._universe = universe
        self._gram: np.ndarray | None = None
        self._positions: np.ndarray | None = None
        if 0 < universe.size <= gram_cap:
            self._attach(universe, gram(meta, data.x[universe], data.y[universe]))
            logger.debug("已缓存 %d×%d 的元核 Gram 矩阵", universe.size, universe.size)

    def _attach(self, universe: np.ndarray, matrix: np.ndarray) -> None:
        positions = np.full(self.data.n, -1, dtype=np.int64)
        positions[universe] = np.arange(universe.size)
        self._universe = universe
        self._positions = positions
        self._gram = matrix

    @property
    def cached(self) -> bool:
        return self._gram is not None

    def _cache_positions(self, indices: np.ndarray) -> np.ndarray | None:
        if self._gram is None:
            return None
        positions = self._positions[indices]
        if positions.min(initial=0) < 0:
            return None
        return positions

    def local(self, indices: Any) -> np.ndarray | None:
        """返回 indices 上的 Gram 子矩阵（行列顺序同 indices）。

        indices 恰为缓存全集时直接返回缓存本身；未缓存时返回 ``None``。
        """
        idx = np.asarray(indices, dtype=np.int64).reshape(-1)
        if self._gram is not None and np.array_equal(idx, self._universe):
            return self._gram
        positions = self._cache_positions(idx)
        if positions is None:
            return None
        return self._gram[np.ix_(positions, positions)]

    def restrict(self, indices: Any) -> KernelOracle:
        """限制到 indices 上的访问对象，子矩阵只复制一次。"""
        idx = np.asarray(indices, dtype=np.int64).reshape(-1)
        if self._gram is None and idx.size > self.gram_cap:
            return self
        local = self.local(idx)
        if local is None:
            return KernelOracle(self.meta, self.data, idx, self.gram_cap)
        if local is self._gram:
            return self
        view = KernelOracle(self.meta, self.data, idx, gram_cap=0)
        view.gram_cap = self.gram_cap
        view._attach(idx, local)
        return view

    def block(self, rows: Any, cols: Any) -> np.ndarray:
        rows = np.asarray(rows, dtype=np.int64).reshape(-1)
        cols = np.asarray(cols, dtype=np.int64).reshape(-1)
        pr = self._cache_positions(rows)
        pc = self._cache_positions(cols)
        if pr is not None and pc is not None:
            return self._gram[np.ix_(pr, pc)]
        x, y = self.data.x, self.data.y
        return meta_matrix(self.meta, x[rows], y[rows], x[cols], y[cols])

    def diag(self, rows: Any) -> np.ndarray:
        rows = np.asarray(rows, dtype=np.int64).reshape(-1)
        pr = self._cache_positions(rows)
        if pr is not None:
            return self._gram[pr, pr]
        # 平移不变核满足 k(x, x) = 1
        y = self.data.y[rows]
        if self.meta.mode in (MetaMode.NW, MetaMode.RR):
            return 1.0 + y * y
        return np.ones(rows.size)

    def row_sums(self, rows: Any, cols: Any) -> np.ndarray:
        """返回 Σ_{c∈cols} k(z_r, z_c)，按元素预算分块以控制内存。"""
        rows = np.asarray(rows, dtype=np.int64).reshape(-1)
        cols = np.asarray(cols, dtype=np.int64).reshape(-1)
        total = np.zeros(rows.size)
        step = max(1, _BLOCK_ELEMENTS // max(rows.size, 1))
        pr = self._cache_positions(rows)
        pc = self._cache_positions(cols)
        if pr is None or pc is None:
            for start in range(0, cols.size, step):
                total += self.block(rows, cols[start : start + step]).sum(axis=1)
            return total
        # Gram 矩阵对称：取 cols 对应的整行，再沿轴 0 求和
        whole_rows = np.array_equal(pr, np.arange(self._gram.shape[0]))
        for start in range(0, pc.size, step):
            chunk = self._gram[pc[start : start + step]]
            total += (chunk if whole_rows else chunk[:, pr]).sum(axis=0)
        return total


def _resolve(data: LabeledDataset, subset: Any) -> np.ndarray:
    if subset is None:
        return np.arange(data.n, dtype=np.int64)
    if isinstance(subset, Coreset):
        return subset.indices
    indices = np.asarray(subset, dtype=np.int64).reshape(-1)
    if indices.size and (indices.min() < 0 or indices.max() >= data.n):
        raise InputError(f"下标超出数据集范围 [0, {data.n})")
    return indices


def _as_indices(indices: Any) -> np.ndarray:
    if isinstance(indices, Coreset):
        return indices.indices
    return np.asarray(indices, dtype=np.int64).reshape(-1)


# ----------------------------------------------------------------------
# MMD 诊断
# ----------------------------------------------------------------------
def mmd_sq(
    meta: MetaKernelSpec,
    data: LabeledDataset,
    a: Any = None,
    b: Any = None,
    *,
    oracle: KernelOracle | None = None,
) -> MmdValue:
    """两个等权经验测度之间的 MMD²；``None`` 表示整个数据集。"""
    ia = _resolve(data, a)
    ib = _resolve(data, b)
    if ia.size == 0 or ib.size == 0:
        raise InputError("计算 MMD 的点集不能为空")
    if oracle is None:
        oracle = KernelOracle(meta, data, np.union1d(ia, ib))
    kaa = oracle.row_sums(ia, ia).sum() / (ia.size * ia.size)
    kab = oracle.row_sums(ia, ib).sum() / (ia.size * ib.size)
    kbb = oracle.row_sums(ib, ib).sum() / (ib.size * ib.size)
    raw = float(kaa - 2.0 * kab + kbb)
    return MmdValue(mmd_squared=max(raw, 0.0), raw=raw, n_a=ia.size, n_b=ib.size)


def mmd_sq_naive(
    meta: MetaKernelSpec, data: LabeledDataset, a: Any = None, b: Any = None
) -> float:
    """逐对标量求值的 MMD² 双重求和实现，用作校验基准。"""
    ia = _resolve(data, a)
    ib = _resolve(data, b)
    if ia.size == 0 or ib.size == 0:
        raise InputError("计算 MMD 的点集不能为空")

    def mean_kernel(left: np.ndarray, right: np.ndarray) -> float:
        total = 0.0
        for i in left:
            for j in right:
                total += eval_meta(
                    meta, (data.x[i], data.y[i]), (data.x[j], data.y[j])
                )
        return total / (left.size * right.size)

    return mean_kernel(ia, ia) - 2.0 * mean_kernel(ia, ib) + mean_kernel(ib, ib)


# ----------------------------------------------------------------------
# kt-split
# ----------------------------------------------------------------------
def get_swap_params(sigma: float, vmax: float, delta: float) -> tuple[float, float]:
    """计算交换阈值 c 并更新次高斯参数 σ，返回 (c, 新 σ)。"""
    if not delta > 0:
        raise InputError(f"失败概率 delta 必须为正数：{delta}")
    log_term = max(math.log(2.0 / delta), 0.0)
    vmax_sq = vmax * vmax
    threshold = max(vmax * sigma * math.sqrt(2.0 * log_term), vmax_sq)
    if threshold <= 0:
        return threshold, sigma
    sigma_sq = sigma * sigma
    growth = max(1.0 + (vmax_sq - 2.0 * threshold) * sigma_sq / threshold**2, 0.0)
    return threshold, math.sqrt(sigma_sq + vmax_sq * growth)


def kt_split(
    meta: MetaKernelSpec,
    data: LabeledDataset,
    indices: Any,
    delta: float,
    rng: RandomStream,
    *,
    oracle: KernelOracle | None = None,
    state: SplitState | None = None,
) -> tuple[Coreset, Coreset]:
    """将输入序列按相邻点对概率交换，划分为两个候选核心集。

    奇数长度时末尾元素被丢弃。``state`` 若给出，会在每轮被原地更新。
    """
    idx = _as_indices(indices)
    n = idx.size
    if n < 2:
        raise InputError(f"kt-split 至少需要 2 个点，实际为 {n}")
    if oracle is None:
        oracle = KernelOracle(meta, data, idx)
    local = oracle.local(idx)
    half = n // 2
    if state is None:
        state = SplitState(delta=delta / n)
    uniforms = rng.generator().random(half)

    first = np.empty(half, dtype=np.int64)
    second = np.empty(half, dtype=np.int64)
    in_first = np.zeros(2 * half, dtype=bool)

    for i in range(half):
        left, right = 2 * i, 2 * i + 1
        if local is not None:
            kpair = local[left : right + 1, : right + 1]
        else:
            kpair = oracle.block(idx[left : right + 1], idx[: right + 1])
        vmax_sq = kpair[0, left] + kpair[1, right] - 2.0 * kpair[0, right]
        vmax = math.sqrt(max(vmax_sq, 0.0))
        threshold, state.sigma = get_swap_params(state.sigma, vmax, state.delta)

        diff = kpair[0, :left] - kpair[1, :left]
        theta = diff.sum() - 2.0 * diff[in_first[:left]].sum()
        if threshold > 0:
            prob_swap = min(1.0, 0.5 * max(1.0 - theta / threshold, 0.0))
        else:
            # 重复点对：θ/c 约定为 0
            prob_swap = 0.5

        if uniforms[i] < prob_swap:
            first[i], second[i] = idx[right], idx[left]
            in_first[right] = True
        else:
            first[i], second[i] = idx[left], idx[right]
            in_first[left] = True

    return Coreset(first, data.n), Coreset(second, data.n)


# ----------------------------------------------------------------------
# kt-swap
# ----------------------------------------------------------------------
def baseline_coreset(indices: Any) -> np.ndarray:
    """基线核心集：已处理序列中第 2、4、6…… 个点（位置 1, 3, 5, ...）。"""
    idx = _as_indices(indices)
    half = idx.size // 2
    return idx[1 : 2 * half : 2].copy()


def _positions_in(idx: np.ndarray, values: np.ndarray) -> np.ndarray:
    sorter = np.argsort(idx, kind="stable")
    found = np.searchsorted(idx, values, sorter=sorter)
    found = np.clip(found, 0, idx.size - 1)
    positions = sorter[found]
    if not np.array_equal(idx[positions], values):
        raise InputError("候选核心集包含不在输入序列中的点")
    return positions


def kt_swap(
    meta: MetaKernelSpec,
    data: LabeledDataset,
    indices: Any,
    candidates: tuple[Coreset, Coreset],
    *,
    oracle: KernelOracle | None = None,
    history: list[float] | None = None,
) -> Coreset:
    """在 {基线, S1, S2} 中选出 MMD 最小者，再逐位置贪心替换以进一步减小 MMD。

    每个位置上，候选为当前元素与所有未入选的输入点；精确相等时保留当前元素，
    否则取位置最靠前者。``history`` 若给出，
    依次追加选定后以及每个位置处理后的原始 MMD²。
    """
    idx = _as_indices(indices)
    n = idx.size
    m = n // 2
    if m == 0:
        raise InputError("kt-swap 至少需要 2 个点")
    if np.unique(idx).size != n:
        raise InputError("kt-swap 的输入序列存在重复下标")
    first, second = (_as_indices(c) for c in candidates)
    if first.size != m or second.size != m:
        raise InputError(
            f"候选核心集大小应为 {m}，实际为 {first.size} 与 {second.size}"
        )
    if oracle is None:
        oracle = KernelOracle(meta, data, idx)
    local = oracle.local(idx)

    def column(j: int) -> np.ndarray:
        # 对称矩阵的第 j 行即第 j 列
        if local is not None:
            return local[j]
        return oracle.block(idx, idx[j : j + 1])[:, 0]

    diag = oracle.diag(idx)
    b = oracle.row_sums(idx, idx)
    const = b.sum() / (n * n)

    def raw_mmd(quad: float, lin: float) -> float:
        return quad / (m * m) - 2.0 * lin / (m * n) + const

    options = [
        _positions_in(idx, baseline_coreset(idx)),
        _positions_in(idx, first),
        _positions_in(idx, second),
    ]
    best_pos: np.ndarray | None = None
    best_s: np.ndarray | None = None
    best_value = math.inf
    for positions in options:
        s = oracle.row_sums(idx, idx[positions])
        value = raw_mmd(s[positions].sum(), b[positions].sum())
        if value < best_value:
            best_pos, best_s, best_value = positions.copy(), s, value

    core, s = best_pos, best_s
    quad = s[core].sum()
    lin = b[core].sum()
    if history is not None:
        history.append(raw_mmd(quad, lin))

    in_core = np.zeros(n, dtype=bool)
    in_core[core] = True
    lin_weight = 2.0 / (m * n)
    for t in range(m):
        old = core[t]
        k_old = column(old)
        score = (2.0 * (s - k_old) + diag) / (m * m) - lin_weight * b
        score[in_core] = np.inf
        score[old] = (2.0 * (s[old] - k_old[old]) + diag[old]) / (m * m) - (
            lin_weight * b[old]
        )
        new = int(np.argmin(score))
        if new != old and score[new] < score[old]:
            k_new = column(new)
            quad += (
                -2.0 * s[old]
                + diag[old]
                + 2.0 * (s[new] - k_old[new])
                + diag[new]
            )
            lin += b[new] - b[old]
            s += k_new
            s -= k_old
            in_core[old] = False
            in_core[new] = True
            core[t] = new
        if history is not None:
            history.append(raw_mmd(quad, lin))

    return Coreset(idx[core], data.n)


# ----------------------------------------------------------------------
# KT 减半、Compress 与 Compress++
# ----------------------------------------------------------------------
def kt_halve(
    meta: MetaKernelSpec,
    data: LabeledDataset,
    indices: Any,
    delta: float,
    rng: RandomStream,
    *,
    oracle: KernelOracle | None = None,
) -> Coreset:
    """对称化核稀疏化减半：以 1/2 概率返回 kt-swap 结果，否则返回其补集。"""
    idx = _as_indices(indices)
    if idx.size < 2:
        raise InputError(f"KT 减半至少需要 2 个点，实际为 {idx.size}")
    processed = idx[: 2 * (idx.size // 2)]
    if oracle is None:
        oracle = KernelOracle(meta, data, processed)
    else:
        oracle = oracle.restrict(processed)
    candidates = kt_split(meta, data, processed, delta, rng.child(0), oracle=oracle)
    chosen = kt_swap(meta, data, processed, candidates, oracle=oracle)
    if rng.child(1).generator().random() < 0.5:
        return chosen
    complement = processed[~np.isin(processed, chosen.indices)]
    return Coreset(complement, data.n)


def is_power_of_four(n: int) -> bool:
    return n > 0 and n & (n - 1) == 0 and (n.bit_length() - 1) % 2 == 0


def largest_power_of_four(n: int) -> int:
    if n < 1:
        raise InputError(f"规模必须为正整数：{n}")
    return 4 ** ((n.bit_length() - 1) // 2)


def default_compression_level(n: int) -> int:
    """默认压缩级别 g = ⌈log₂ log₂ n + 3.1⌉。"""
    if n < 4:
        return 0
    return math.ceil(math.log2(math.log2(n)) + 3.1)


def compress(
    meta: MetaKernelSpec,
    data: LabeledDataset,
    indices: Any,
    g: int,
    delta: float,
    rng: RandomStream,
    *,
    oracle: KernelOracle | None = None,
) -> Coreset:
    """递归 Compress：四等分、分别压缩、拼接后用 KT 减半，输出 2^g·√|S| 个点。"""
    idx = _as_indices(indices)
    n = idx.size
    base = 4**g
    if n == base:
        return Coreset(idx, data.n)
    if n < base or not is_power_of_four(n // base) or n % base:
        hint = base * largest_power_of_four(n // base) if n >= base else None
        suffix = f"，最大可截断规模为 {hint}" if hint else ""
        raise InputError(
            f"Compress 的输入规模 {n} 不是 4^g·4^a（g={g}）的形式{suffix}"
        )
    if oracle is None:
        oracle = KernelOracle(meta, data, idx)
    blocks = np.split(idx, 4)
    parts = [
        compress(meta, data, block, g, delta, rng.child(i), oracle=oracle).indices
        for i, block in enumerate(blocks)
    ]
    merged = np.concatenate(parts)
    budget = min(merged.size**2 * delta, 1.0)
    return kt_halve(meta, data, merged, budget, rng.child(4), oracle=oracle)


def kt_compress_pp(
    meta: MetaKernelSpec,
    data: LabeledDataset,
    config: ThinningConfig,
    rng: RandomStream | None = None,
) -> Coreset:
    """KT-Compress++：先压缩到 2^g·√n 个点，再经 g 次 KT 减半得到 √n 个点。"""
    n = data.n
    if not is_power_of_four(n):
        suggestion = largest_power_of_four(n)
        raise InputError(
            f"KT-Compress++ 要求样本量为 4 的幂，实际为 {n}，可截断至 n={suggestion}"
        )
    if rng is None:
        rng = RandomStream(config.seed)
    log4n = (n.bit_length() - 1) // 2
    requested = (
        config.g_override
        if config.g_override is not None
        else default_compression_level(n)
    )
    g = min(requested, log4n)
    logger.info(
        "开始 KT-Compress++：n=%d，元核=%s，g=%d（请求值 %d），delta=%g",
        n,
        meta.mode.value,
        g,
        requested,
        config.delta,
    )
    all_indices = np.arange(n, dtype=np.int64)
    if n == 1:
        return Coreset(all_indices, n)
    oracle = KernelOracle(meta, data, all_indices, gram_cap=config.gram_cap)

    compress_delta = (config.delta / 2) / (n * 4 ** (g + 1) * max(log4n - g, 1))
    coreset = compress(
        meta, data, all_indices, g, compress_delta, rng.child(0), oracle=oracle
    )
    logger.debug("Compress 输出 %d 个点", len(coreset))
    halving_delta = (config.delta / 2) / g if g > 0 else config.delta
    for round_index in range(g):
        coreset = kt_halve(
            meta,
            data,
            coreset.indices,
            halving_delta,
            rng.child(1 + round_index),
            oracle=oracle,
        )
        logger.debug("第 %d 次 KT 减半后剩余 %d 个点", round_index + 1, len(coreset))
    logger.info("KT-Compress++ 完成：输出 %d 个点", len(coreset))
    return coreset


def standard_thin(data: LabeledDataset | int, n_out: int, rng: RandomStream) -> Coreset:
    """标准稀疏化：均匀无放回抽取 n_out 个下标，保持抽取顺序。"""
    n = data.n if isinstance(data, LabeledDataset) else int(data)
    if not 1 <= n_out <= n:
        raise InputError(f"n_out 必须位于 [1, {n}]，实际为 {n_out}")
    drawn = rng.generator().choice(n, size=n_out, replace=False)
    return Coreset(drawn, n)


# ----------------------------------------------------------------------
# 核心集 CSV 读写
# ----------------------------------------------------------------------
def save_coreset_csv(coreset: Coreset, path: str | Path) -> None:
    path = Path(path)
    try:
        with path.open("w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["position", "dataset_index"])
            for position, index in enumerate(coreset.indices):
                writer.writerow([position, int(index)])
    except OSError as exc:
        raise ResultIOError(f"无法写入核心集文件：{exc}", path=str(path)) from exc
    logger.info("已写出核心集（%d 个点）：%s", len(coreset), path)


def load_coreset_csv(path: str | Path, parent_size: int) -> Coreset:
    path = Path(path)
    try:
        with path.open("r", encoding="utf-8-sig", newline="") as fh:
            rows: Sequence[list[str]] = list(csv.reader(fh))
    except UnicodeDecodeError as exc:
        raise InputError(
            f"核心集文件不是 UTF-8 编码：{exc.reason}", location=str(path)
        ) from exc
    except OSError as exc:
        raise ResultIOError(f"无法读取核心集文件：{exc}", path=str(path)) from exc
    indices = []
    for line_no, row in enumerate(rows[1:], start=2):
        try:
            position, index = int(row[0]), int(row[1])
        except (IndexError, ValueError) as exc:
            raise InputError("核心集文件格式错误", location=f"第 {line_no} 行") from exc
        if position != len(indices):
            raise InputError("核心集位置列不连续", location=f"第 {line_no} 行")
        indices.append(index)
    return Coreset(np.asarray(indices, dtype=np.int64), parent_size)


__all__ = [
    "KernelOracle",
    "mmd_sq",
    "mmd_sq_naive",
    "get_swap_params",
    "kt_split",
    "baseline_coreset",
    "kt_swap",
    "kt_halve",
    "compress",
    "kt_compress_pp",
    "standard_thin",
    "default_compression_level",
    "is_power_of_four",
    "largest_power_of_four",
    "save_coreset_csv",
    "load_coreset_csv",
]
