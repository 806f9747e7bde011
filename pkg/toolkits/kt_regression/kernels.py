"""基础核、元核以及 Gram 矩阵的计算。

所有核对象在构造后不可变，求值为纯函数，可在多线程中并发使用。
Gram 矩阵由 ``pdist`` 的上三角距离展开，逐元素严格对称。
"""
from __future__ import annotations

import numpy as np
from scipy.spatial.distance import cdist, pdist, squareform

from .exceptions import InputError
from .schemas import KernelFamily, KernelSpec, MetaKernelSpec, MetaMode


def _as_points(values: np.ndarray) -> np.ndarray:
    points = np.asarray(values, dtype=float)
    if points.ndim == 1:
        points = points[np.newaxis, :]
    if points.ndim != 2 or points.shape[1] < 1:
        raise InputError(f"点集必须是 m×d 矩阵，实际形状为 {points.shape}")
    return points


def _check_dims(xa: np.ndarray, xb: np.ndarray) -> None:
    if xa.shape[1] != xb.shape[1]:
        raise InputError(f"协变量维度不一致：{xa.shape[1]} 与 {xb.shape[1]}")


def _metric(spec: KernelSpec) -> str:
    return "sqeuclidean" if spec.family is KernelFamily.GAUSSIAN else "euclidean"


def _profile(spec: KernelSpec, dist: np.ndarray) -> np.ndarray:
    # 原地把距离矩阵变换为核值
    h = spec.bandwidth
    if spec.family is KernelFamily.GAUSSIAN:
        dist /= -(2.0 * h * h)
        return np.exp(dist, out=dist)
    dist /= -h
    if spec.family is KernelFamily.LAPLACE:
        return np.exp(dist, out=dist)
    dist += 1.0
    return np.maximum(dist, 0.0, out=dist)


def base_matrix(spec: KernelSpec, xa: np.ndarray, xb: np.ndarray) -> np.ndarray:
    """返回矩阵 [k(xa_i, xb_j)]。"""
    xa = _as_points(xa)
    xb = _as_points(xb)
    _check_dims(xa, xb)
    return _profile(spec, cdist(xa, xb, _metric(spec)))


def _symmetric_base(spec: KernelSpec, x: np.ndarray) -> np.ndarray:
    return _profile(spec, squareform(pdist(x, _metric(spec))))


def eval_base(spec: KernelSpec, x1: np.ndarray, x2: np.ndarray) -> float:
    x1 = np.asarray(x1, dtype=float).reshape(-1)
    x2 = np.asarray(x2, dtype=float).reshape(-1)
    if x1.shape != x2.shape or x1.size == 0:
        raise InputError(f"协变量维度不一致：{x1.size} 与 {x2.size}")
    return float(base_matrix(spec, x1, x2)[0, 0])


def _labels(values: np.ndarray, points: np.ndarray) -> np.ndarray:
    labels = np.asarray(values, dtype=float).reshape(-1)
    if labels.size != points.shape[0]:
        raise InputError("标签数量与点数量不一致")
    return labels


def _combine(
    meta: MetaKernelSpec, kxx: np.ndarray, ya: np.ndarray, yb: np.ndarray
) -> np.ndarray:
    # kxx 为新分配的矩阵，可原地改写
    if meta.mode is MetaMode.BASE_ONLY:
        return kxx
    yy = np.outer(ya, yb)
    if meta.mode is MetaMode.NW:
        yy += 1.0
        kxx *= yy
        return kxx
    yy *= kxx
    kxx *= kxx
    kxx += yy
    return kxx


def meta_matrix(
    meta: MetaKernelSpec,
    xa: np.ndarray,
    ya: np.ndarray,
    xb: np.ndarray,
    yb: np.ndarray,
) -> np.ndarray:
    """返回元核矩阵 [k_meta((xa_i, ya_i), (xb_j, yb_j))]。"""
    xa = _as_points(xa)
    xb = _as_points(xb)
    ya = _labels(ya, xa)
    yb = _labels(yb, xb)
    if meta.mode is MetaMode.CONCATENATED:
        _check_dims(xa, xb)
        za = np.column_stack([xa, ya])
        zb = np.column_stack([xb, yb])
        return base_matrix(meta.base, za, zb)
    return _combine(meta, base_matrix(meta.base, xa, xb), ya, yb)


def eval_meta(
    meta: MetaKernelSpec,
    z1: tuple[np.ndarray, float],
    z2: tuple[np.ndarray, float],
) -> float:
    (x1, y1), (x2, y2) = z1, z2
    x1 = np.asarray(x1, dtype=float).reshape(-1)
    x2 = np.asarray(x2, dtype=float).reshape(-1)
    if x1.shape != x2.shape or x1.size == 0:
        raise InputError(f"协变量维度不一致：{x1.size} 与 {x2.size}")
    return float(meta_matrix(meta, x1, [y1], x2, [y2])[0, 0])


def gram(meta: MetaKernelSpec, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """带标签点集上的元核 Gram 矩阵（稠密、严格对称）。"""
    x = _as_points(x)
    if x.shape[0] == 0:
        raise InputError("Gram 矩阵需要非空点集")
    y = _labels(y, x)
    if meta.mode is MetaMode.CONCATENATED:
        return _symmetric_base(meta.base, np.column_stack([x, y]))
    return _combine(meta, _symmetric_base(meta.base, x), y, y)


def base_gram(spec: KernelSpec, x: np.ndarray) -> np.ndarray:
    x = _as_points(x)
    if x.shape[0] == 0:
        raise InputError("Gram 矩阵需要非空点集")
    return _symmetric_base(spec, x)


__all__ = [
    "base_matrix",
    "eval_base",
    "meta_matrix",
    "eval_meta",
    "gram",
    "base_gram",
]
