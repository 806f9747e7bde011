"""数据集生成、CSV 读写、标准化与划分。"""
from __future__ import annotations

import csv
import json
import logging
import math
from pathlib import Path
from typing import Any

import numpy as np

from .exceptions import InputError, ResultIOError
from .rng import RandomStream
from .schemas import LabeledDataset, StandardizationStats
from .thinning import largest_power_of_four

logger = logging.getLogger(__name__)

SIM_HALF_WIDTH = math.sqrt(3.0)
SIM_NOISE_STD = 1.0


def f_star(x: np.ndarray) -> np.ndarray:
    """模拟任务的回归函数 f*(x) = 8·sin(8πx)·exp(x)。"""
    x = np.asarray(x, dtype=float)
    return 8.0 * np.sin(8.0 * np.pi * x) * np.exp(x)


def gen_sim(n: int, seed: int) -> LabeledDataset:
    """生成一维模拟数据：x ~ Unif[−√3, √3]，y = f*(x) + N(0, 1) 噪声。"""
    if n < 1:
        raise InputError(f"样本量必须为正整数：{n}")
    generator = RandomStream(seed).generator()
    x = generator.uniform(-SIM_HALF_WIDTH, SIM_HALF_WIDTH, size=(n, 1))
    noise = generator.normal(0.0, SIM_NOISE_STD, size=n)
    y = f_star(x[:, 0]) + noise
    return LabeledDataset(x=x, y=y, feature_names=("x",))


# ----------------------------------------------------------------------
# CSV
# ----------------------------------------------------------------------
def _resolve_target(target: str | int, header: list[str] | None, width: int) -> int:
    if isinstance(target, int) or target.lstrip("-").isdigit():
        column = int(target)
        if column < 0:
            column += width
        if not 0 <= column < width:
            raise InputError(f"目标列 {target} 超出范围（共 {width} 列）")
        return column
    if header is None:
        raise InputError(f"按列名 {target!r} 选择目标列时文件必须带表头")
    if target not in header:
        raise InputError(f"文件中不存在目标列 {target!r}")
    return header.index(target)


def load_csv(
    path: str | Path, target_column: str | int = -1, has_header: bool = True
) -> LabeledDataset:
    """读取逗号分隔的数值 CSV，目标列作为 y，其余列按文件顺序作为 x。"""
    path = Path(path)
    try:
        with path.open("r", encoding="utf-8-sig", newline="") as fh:
            rows = [row for row in csv.reader(fh) if row]
    except FileNotFoundError as exc:
        raise InputError(f"找不到数据文件：{path}") from exc
    except UnicodeDecodeError as exc:
        raise InputError(
            f"数据文件不是 UTF-8 编码：{exc.reason}", location=str(path)
        ) from exc
    except OSError as exc:
        raise ResultIOError(f"无法读取数据文件：{exc}", path=str(path)) from exc

    header = [name.strip() for name in rows[0]] if has_header and rows else None
    body = rows[1:] if has_header else rows
    first_line = 2 if has_header else 1
    if not body:
        raise InputError(f"文件中没有数据行：{path}")
    width = len(header) if header is not None else len(body[0])
    target = _resolve_target(target_column, header, width)
    if width < 2:
        raise InputError("CSV 至少需要一个特征列和一个目标列")

    values = np.empty((len(body), width))
    for offset, row in enumerate(body):
        line_no = first_line + offset
        if len(row) != width:
            raise InputError(
                f"列数应为 {width}，实际为 {len(row)}", location=f"第 {line_no} 行"
            )
        for column, cell in enumerate(row):
            try:
                value = float(cell)
            except ValueError:
                value = math.nan
            if not math.isfinite(value):
                raise InputError(
                    f"无法解析的数值 {cell!r}",
                    location=f"第 {line_no} 行，第 {column + 1} 列",
                )
            values[offset, column] = value

    feature_columns = [c for c in range(width) if c != target]
    names = tuple(header[c] for c in feature_columns) if header else None
    data = LabeledDataset(
        x=values[:, feature_columns], y=values[:, target], feature_names=names
    )
    logger.info("已读取数据集 %s：n=%d，d=%d", path.name, data.n, data.d)
    return data


def save_csv(data: LabeledDataset, path: str | Path, target_name: str = "y") -> None:
    """写出带表头的 CSV，目标列位于最后。"""
    path = Path(path)
    names = list(data.feature_names or (f"x{i}" for i in range(data.d)))
    try:
        with path.open("w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow([*names, target_name])
            for features, label in zip(data.x, data.y, strict=True):
                writer.writerow([repr(float(v)) for v in (*features, label)])
    except OSError as exc:
        raise ResultIOError(f"无法写入数据文件：{exc}", path=str(path)) from exc
    logger.info("已写出数据集（n=%d）：%s", data.n, path)


def summary(data: LabeledDataset) -> dict[str, Any]:
    """数据集概要：规模与逐列统计量。"""
    names = list(data.feature_names or (f"x{i}" for i in range(data.d)))
    columns = {}
    for name, column in zip([*names, "y"], [*data.x.T, data.y], strict=True):
        columns[name] = {
            "mean": float(np.mean(column)),
            "std": float(np.std(column)),
            "min": float(np.min(column)),
            "max": float(np.max(column)),
        }
    return {"n": data.n, "d": data.d, "binary": data.binary, "columns": columns}


def save_summary(data: LabeledDataset, path: str | Path) -> None:
    path = Path(path)
    try:
        path.write_text(
            json.dumps(summary(data), ensure_ascii=False, indent=2) + "\n",
            encoding="utf-8",
        )
    except OSError as exc:
        raise ResultIOError(f"无法写入数据集概要：{exc}", path=str(path)) from exc


# ----------------------------------------------------------------------
# 变换
# ----------------------------------------------------------------------
def standardize(data: LabeledDataset) -> tuple[LabeledDataset, StandardizationStats]:
    """逐列减均值、除以标准差；常数列的标准差记为 1。标签保持不变。"""
    if data.n < 2:
        raise InputError(f"标准化至少需要 2 行数据，实际为 {data.n}")
    mean = data.x.mean(axis=0)
    std = data.x.std(axis=0)
    std = np.where(std > 0, std, 1.0)
    stats = StandardizationStats(mean=mean, std=std)
    scaled = LabeledDataset(
        x=stats.apply(data.x),
        y=data.y,
        feature_names=data.feature_names,
        binary=data.binary,
    )
    return scaled, stats


def apply_standardization(
    data: LabeledDataset, stats: StandardizationStats
) -> LabeledDataset:
    """用训练集的统计量变换另一个数据集。"""
    if stats.mean.size != data.d:
        raise InputError(
            f"标准化统计量维度 {stats.mean.size} 与数据维度 {data.d} 不一致"
        )
    return LabeledDataset(
        x=stats.apply(data.x),
        y=data.y,
        feature_names=data.feature_names,
        binary=data.binary,
    )


def split(
    data: LabeledDataset, fractions: tuple[float, float], seed: int
) -> tuple[LabeledDataset, LabeledDataset]:
    """按随机排列切分为训练集与测试集。"""
    train_frac, test_frac = fractions
    if min(train_frac, test_frac) <= 0 or not math.isclose(sum(fractions), 1.0):
        raise InputError(f"划分比例必须为正且和为 1：{fractions}")
    n_train = int(round(data.n * train_frac))
    if n_train < 1 or n_train >= data.n:
        raise InputError(f"划分后存在空集合：n={data.n}，比例={fractions}")
    order = RandomStream(seed).generator().permutation(data.n)
    return data.subset(order[:n_train]), data.subset(order[n_train:])


def truncate_pow4(data: LabeledDataset, seed: int) -> LabeledDataset:
    """均匀无放回抽样，将样本量截断到不超过 n 的最大 4 的幂。"""
    if data.n < 4:
        raise InputError(f"截断至 4 的幂至少需要 4 行数据，实际为 {data.n}")
    target = largest_power_of_four(data.n)
    if target == data.n:
        return data
    keep = RandomStream(seed).generator().choice(data.n, size=target, replace=False)
    logger.info("样本量 %d 截断为 %d，丢弃 %d 行", data.n, target, data.n - target)
    return data.subset(keep)


def with_binary_labels(data: LabeledDataset) -> LabeledDataset:
    """将数据集标记为二分类（标签需为 0 或 1）。"""
    if not np.all(np.isin(data.y, (0.0, 1.0))):
        raise InputError("二分类标签必须为 0 或 1")
    return LabeledDataset(
        x=data.x, y=data.y, feature_names=data.feature_names, binary=True
    )


__all__ = [
    "f_star",
    "gen_sim",
    "load_csv",
    "save_csv",
    "summary",
    "save_summary",
    "standardize",
    "apply_standardization",
    "split",
    "truncate_pow4",
    "with_binary_labels",
]
