"""定义工具包内部使用的数据结构。"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import StrEnum
from typing import Any

import numpy as np

from .exceptions import InputError


class KernelFamily(StrEnum):
    """基础核函数族。"""

    GAUSSIAN = "gaussian"
    LAPLACE = "laplace"
    WENDLAND0 = "wendland0"


class MetaMode(StrEnum):
    """定义在 (x, y) 上的元核类型。"""

    BASE_ONLY = "base"
    CONCATENATED = "concat"
    NW = "nw"
    RR = "rr"


class Method(StrEnum):
    """基准测试支持的估计方法。"""

    FULL_NW = "full-nw"
    ST_NW = "st-nw"
    KT_NW = "kt-nw"
    FULL_KRR = "full-krr"
    ST_KRR = "st-krr"
    KT_KRR = "kt-krr"

    @property
    def estimator(self) -> str:
        return self.value.split("-")[1]

    @property
    def strategy(self) -> str:
        return self.value.split("-")[0]

    @property
    def is_krr(self) -> bool:
        return self.estimator == "krr"

    @property
    def is_randomized(self) -> bool:
        return self.strategy != "full"


def _parse_enum(enum_cls: type[StrEnum], value: Any, what: str) -> Any:
    try:
        return enum_cls(value)
    except ValueError as exc:
        choices = ", ".join(member.value for member in enum_cls)
        raise InputError(f"未知的{what}：{value!r}，可选值为 {choices}") from exc


def _frozen_array(values: Any, ndim: int, dtype: Any = float) -> np.ndarray:
    array = np.array(values, dtype=dtype)
    if array.ndim != ndim:
        raise InputError(f"数组维度应为 {ndim}，实际为 {array.ndim}")
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class KernelSpec:
    """平移不变的基础核 k(x1, x2) = κ(‖x1 − x2‖ / h)。"""

    family: KernelFamily
    bandwidth: float

    def __post_init__(self) -> None:
        family = _parse_enum(KernelFamily, self.family, "核函数族")
        object.__setattr__(self, "family", family)
        bandwidth = float(self.bandwidth)
        if not math.isfinite(bandwidth) or bandwidth <= 0:
            raise InputError(f"带宽必须为正数：{self.bandwidth}")
        object.__setattr__(self, "bandwidth", bandwidth)


@dataclass(frozen=True)
class MetaKernelSpec:
    """由基础核构造、作用在 (x, y) 对上的元核。"""

    mode: MetaMode
    base: KernelSpec

    def __post_init__(self) -> None:
        mode = _parse_enum(MetaMode, self.mode, "元核类型")
        object.__setattr__(self, "mode", mode)


@dataclass(frozen=True)
class LabeledDataset:
    """带标签的数据集，x 为 n×d 矩阵，y 为长度 n 的向量。"""

    x: np.ndarray
    y: np.ndarray
    feature_names: tuple[str, ...] | None = None
    binary: bool = False

    def __post_init__(self) -> None:
        x = np.array(self.x, dtype=float)
        if x.ndim == 1:
            x = x[:, np.newaxis]
        if x.ndim != 2:
            raise InputError(f"协变量必须是二维矩阵，实际维度为 {x.ndim}")
        y = np.array(self.y, dtype=float).reshape(-1)
        if x.shape[0] < 1 or x.shape[1] < 1:
            raise InputError("数据集至少需要一行一列")
        if y.shape[0] != x.shape[0]:
            raise InputError(f"标签数量 {y.shape[0]} 与样本数量 {x.shape[0]} 不一致")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise InputError("数据集中包含 NaN 或 Inf")
        if self.feature_names is not None:
            names = tuple(str(name) for name in self.feature_names)
            if len(names) != x.shape[1]:
                raise InputError("特征名数量与列数不一致")
            object.__setattr__(self, "feature_names", names)
        x.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return int(self.x.shape[0])

    @property
    def d(self) -> int:
        return int(self.x.shape[1])

    def subset(self, indices: Any) -> LabeledDataset:
        """按给定的行号（保持顺序）抽取子数据集。"""
        rows = np.asarray(indices, dtype=np.int64)
        return LabeledDataset(
            x=self.x[rows],
            y=self.y[rows],
            feature_names=self.feature_names,
            binary=self.binary,
        )


@dataclass(frozen=True)
class StandardizationStats:
    """按列标准化所用的均值与标准差。"""

    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self) -> None:
        mean = _frozen_array(self.mean, 1)
        std = _frozen_array(self.std, 1)
        if mean.shape != std.shape:
            raise InputError("均值与标准差长度不一致")
        if np.any(std <= 0):
            raise InputError("标准差必须为正数")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "std", std)

    def apply(self, x: np.ndarray) -> np.ndarray:
        return (np.asarray(x, dtype=float) - self.mean) / self.std

    def invert(self, z: np.ndarray) -> np.ndarray:
        return np.asarray(z, dtype=float) * self.std + self.mean


@dataclass(frozen=True, eq=False)
class Coreset:
    """指向某个数据集的有序下标列表，所有稀疏化例程的输出。"""

    indices: np.ndarray
    parent_size: int

    def __post_init__(self) -> None:
        indices = np.array(self.indices, dtype=np.int64).reshape(-1)
        parent_size = int(self.parent_size)
        if indices.size and (indices.min() < 0 or indices.max() >= parent_size):
            raise InputError(f"核心集下标超出范围 [0, {parent_size})")
        if np.unique(indices).size != indices.size:
            raise InputError("核心集中存在重复下标")
        indices.setflags(write=False)
        object.__setattr__(self, "indices", indices)
        object.__setattr__(self, "parent_size", parent_size)

    def __len__(self) -> int:
        return int(self.indices.size)


@dataclass
class SplitState:
    """kt-split 逐轮更新的次高斯参数 σ 与每轮失败概率 δ。"""

    delta: float
    sigma: float = 0.0


@dataclass(frozen=True)
class ThinningConfig:
    """KT-Compress++ 的运行参数。"""

    meta: MetaKernelSpec
    delta: float = 0.5
    seed: int = 0
    g_override: int | None = None
    gram_cap: int = 4096

    def __post_init__(self) -> None:
        if not 0 < self.delta <= 1:
            raise InputError(f"失败概率 delta 必须位于 (0, 1]：{self.delta}")
        if not 0 <= int(self.seed) < 2**64:
            raise InputError(f"随机种子必须是 64 位无符号整数：{self.seed}")
        if self.g_override is not None and self.g_override < 0:
            raise InputError(f"压缩级别 g 不能为负：{self.g_override}")
        if self.gram_cap < 0:
            raise InputError(f"Gram 缓存上限不能为负：{self.gram_cap}")


@dataclass(frozen=True)
class MmdValue:
    """经验 MMD²；``raw`` 保留未截断的原始值用于比较。"""

    mmd_squared: float
    raw: float
    n_a: int
    n_b: int


@dataclass(frozen=True)
class NWModel:
    """Nadaraya-Watson 模型：支撑点与基础核。"""

    support_x: np.ndarray
    support_y: np.ndarray
    base: KernelSpec

    def __post_init__(self) -> None:
        support_x = _frozen_array(self.support_x, 2)
        support_y = _frozen_array(self.support_y, 1)
        if support_x.shape[0] == 0:
            raise InputError("NW 模型的支撑集不能为空")
        if support_y.shape[0] != support_x.shape[0]:
            raise InputError("支撑点与标签数量不一致")
        object.__setattr__(self, "support_x", support_x)
        object.__setattr__(self, "support_y", support_y)

    @property
    def size(self) -> int:
        return int(self.support_x.shape[0])


@dataclass(frozen=True)
class KRRModel:
    """核岭回归模型：支撑点、对偶系数 α 与正则化参数 λ。"""

    support_x: np.ndarray
    alpha: np.ndarray
    base: KernelSpec
    lam: float
    jitter: float = 0.0

    def __post_init__(self) -> None:
        support_x = _frozen_array(self.support_x, 2)
        alpha = _frozen_array(self.alpha, 1)
        if support_x.shape[0] == 0:
            raise InputError("KRR 模型的支撑集不能为空")
        if alpha.shape[0] != support_x.shape[0]:
            raise InputError("对偶系数数量与支撑点数量不一致")
        if not self.lam > 0:
            raise InputError(f"正则化参数 λ 必须为正数：{self.lam}")
        object.__setattr__(self, "support_x", support_x)
        object.__setattr__(self, "alpha", alpha)

    @property
    def size(self) -> int:
        return int(self.support_x.shape[0])


@dataclass(frozen=True)
class TrialConfig:
    """单次试验的配置。"""

    method: Method
    n: int
    base: KernelSpec
    lam: float | None = None
    delta: float = 0.5
    seed: int = 0
    meta_override: MetaKernelSpec | None = None
    n_out: int | None = None
    g_override: int | None = None
    gram_cap: int = 4096

    def __post_init__(self) -> None:
        method = _parse_enum(Method, self.method, "方法")
        object.__setattr__(self, "method", method)
        if method.is_krr and self.lam is None:
            raise InputError(f"{method.value} 需要提供正则化参数 λ")
        if not method.is_krr and self.lam is not None:
            raise InputError(f"{method.value} 不接受正则化参数 λ")
        if self.lam is not None and not self.lam > 0:
            raise InputError(f"正则化参数 λ 必须为正数：{self.lam}")
        if self.meta_override is not None and method.strategy != "kt":
            raise InputError("meta_override 仅适用于 kt-* 方法")
        if self.n_out is not None and method.strategy != "st":
            raise InputError("n_out 仅适用于 st-* 方法")
        if not 0 < self.delta <= 1:
            raise InputError(f"失败概率 delta 必须位于 (0, 1]：{self.delta}")


@dataclass(frozen=True)
class TrialResult:
    """单次 (method, n, seed) 试验的结果记录。"""

    config: TrialConfig
    n: int
    n_out: int
    mse: float
    train_seconds: float
    predict_seconds_per_1k: float
    defaulted_predictions: int = 0

    def as_row(self) -> dict[str, Any]:
        return {
            "method": self.config.method.value,
            "n": self.n,
            "n_out": self.n_out,
            "h": self.config.base.bandwidth,
            "lambda": self.config.lam,
            "seed": self.config.seed,
            "mse": self.mse,
            "train_seconds": self.train_seconds,
            "predict_seconds_per_1k": self.predict_seconds_per_1k,
            "defaulted_predictions": self.defaulted_predictions,
        }


@dataclass(frozen=True)
class GridSpec:
    """超参数网格。"""

    h_values: tuple[float, ...]
    lambda_values: tuple[float, ...] | None = None
    trials_per_cell: int = 100
    validation_size: int = 10_000
    full_trials_per_cell: int = 1

    def __post_init__(self) -> None:
        h_values = tuple(float(h) for h in self.h_values)
        if not h_values or any(h <= 0 for h in h_values):
            raise InputError("带宽网格不能为空且必须全部为正数")
        object.__setattr__(self, "h_values", h_values)
        if self.lambda_values is not None:
            lambda_values = tuple(float(lam) for lam in self.lambda_values)
            if not lambda_values or any(lam <= 0 for lam in lambda_values):
                raise InputError("λ 网格不能为空且必须全部为正数")
            object.__setattr__(self, "lambda_values", lambda_values)
        if self.trials_per_cell < 1 or self.full_trials_per_cell < 1:
            raise InputError("每个网格单元至少运行一次试验")
        if self.validation_size < 1:
            raise InputError("验证集规模必须为正数")


@dataclass
class GridResult:
    """网格搜索结果：最优单元与完整结果表。"""

    best_h: float
    best_lambda: float | None
    table: list[dict[str, Any]] = field(default_factory=list)


__all__ = [
    "KernelFamily",
    "MetaMode",
    "Method",
    "KernelSpec",
    "MetaKernelSpec",
    "LabeledDataset",
    "StandardizationStats",
    "Coreset",
    "SplitState",
    "ThinningConfig",
    "MmdValue",
    "NWModel",
    "KRRModel",
    "TrialConfig",
    "TrialResult",
    "GridSpec",
    "GridResult",
]
