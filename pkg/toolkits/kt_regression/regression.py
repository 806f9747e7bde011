"""Nadaraya-Watson 与核岭回归估计器，可在全量数据或任意核心集上拟合。"""
from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Any

import numpy as np

from .exceptions import InputError, ResultIOError
from .kernels import base_gram, base_matrix
from .linalg import solve_spd_with_jitter
from .rng import RandomStream
from .schemas import (
    Coreset,
    KernelSpec,
    KRRModel,
    LabeledDataset,
    MetaKernelSpec,
    MetaMode,
    NWModel,
    ThinningConfig,
)
from .thinning import DEFAULT_GRAM_CAP, kt_compress_pp

logger = logging.getLogger(__name__)

Model = NWModel | KRRModel


def _support(data: LabeledDataset, coreset: Coreset | None) -> LabeledDataset:
    if coreset is None:
        return data
    if coreset.parent_size != data.n:
        raise InputError(
            f"核心集对应的数据集规模为 {coreset.parent_size}，实际数据集为 {data.n}"
        )
    if len(coreset) == 0:
        raise InputError("支撑集不能为空")
    return data.subset(coreset.indices)


def _query(model: Model, x: np.ndarray) -> np.ndarray:
    point = np.asarray(x, dtype=float).reshape(-1)
    if point.size != model.support_x.shape[1]:
        raise InputError(
            f"查询点维度 {point.size} 与模型维度 {model.support_x.shape[1]} 不一致"
        )
    return point


# ----------------------------------------------------------------------
# Nadaraya-Watson
# ----------------------------------------------------------------------
def fit_nw(
    data: LabeledDataset, coreset: Coreset | None, base: KernelSpec
) -> NWModel:
    """保存所选支撑点，不做额外计算。"""
    support = _support(data, coreset)
    return NWModel(support_x=support.x, support_y=support.y, base=base)


def _nw_point(model: NWModel, x: np.ndarray) -> tuple[float, bool]:
    weights = base_matrix(model.base, _query(model, x), model.support_x)[0]
    denominator = weights.sum()
    if denominator == 0:
        return 0.0, True
    return float(weights @ model.support_y / denominator), False


def predict_nw(model: NWModel, x: np.ndarray) -> float:
    """核加权平均；分母恰为 0 时返回默认值 0。"""
    return _nw_point(model, x)[0]


# ----------------------------------------------------------------------
# 核岭回归
# ----------------------------------------------------------------------
def fit_krr(
    data: LabeledDataset, coreset: Coreset | None, base: KernelSpec, lam: float
) -> KRRModel:
    """求解 (K + m·λ·I)·α = y。"""
    if not lam > 0:
        raise InputError(f"正则化参数 λ 必须为正数：{lam}")
    support = _support(data, coreset)
    m = support.n
    kernel = base_gram(base, support.x)
    system = kernel + m * lam * np.eye(m)
    alpha, jitter = solve_spd_with_jitter(
        system, support.y, jitter_base=float(np.trace(kernel)) / m
    )
    residual = np.max(np.abs(system @ alpha - support.y))
    tolerance = 1e-6 * (1.0 + np.max(np.abs(support.y)))
    if residual > tolerance:
        logger.warning("KRR 残差 %.3e 超过容差 %.3e", residual, tolerance)
    return KRRModel(support_x=support.x, alpha=alpha, base=base, lam=lam, jitter=jitter)


def predict_krr(model: KRRModel, x: np.ndarray) -> float:
    weights = base_matrix(model.base, _query(model, x), model.support_x)[0]
    return float(weights @ model.alpha)


# ----------------------------------------------------------------------
# 核稀疏化版本
# ----------------------------------------------------------------------
def _thin(
    data: LabeledDataset,
    meta: MetaKernelSpec,
    delta: float,
    rng: RandomStream,
    g_override: int | None,
    gram_cap: int,
) -> Coreset:
    config = ThinningConfig(
        meta=meta,
        delta=delta,
        seed=rng.seed,
        g_override=g_override,
        gram_cap=gram_cap,
    )
    return kt_compress_pp(meta, data, config, rng=rng)


def fit_kt_nw(
    data: LabeledDataset,
    base: KernelSpec,
    delta: float,
    rng: RandomStream,
    *,
    meta: MetaKernelSpec | None = None,
    g_override: int | None = None,
    gram_cap: int = DEFAULT_GRAM_CAP,
) -> NWModel:
    """以 k_NW 元核运行 KT-Compress++，再在核心集上拟合 NW。"""
    meta = meta or MetaKernelSpec(MetaMode.NW, base)
    coreset = _thin(data, meta, delta, rng, g_override, gram_cap)
    return fit_nw(data, coreset, base)


def fit_kt_krr(
    data: LabeledDataset,
    base: KernelSpec,
    delta: float,
    lambda_prime: float,
    rng: RandomStream,
    *,
    meta: MetaKernelSpec | None = None,
    g_override: int | None = None,
    gram_cap: int = DEFAULT_GRAM_CAP,
) -> KRRModel:
    """以 k_RR 元核运行 KT-Compress++，再在核心集上以 λ′ 拟合 KRR。"""
    if not lambda_prime > 0:
        raise InputError(f"正则化参数 λ′ 必须为正数：{lambda_prime}")
    meta = meta or MetaKernelSpec(MetaMode.RR, base)
    coreset = _thin(data, meta, delta, rng, g_override, gram_cap)
    return fit_krr(data, coreset, base, lambda_prime)


# ----------------------------------------------------------------------
# 预测与评估
# ----------------------------------------------------------------------
def predict(model: Model, x: np.ndarray) -> float:
    if isinstance(model, NWModel):
        return predict_nw(model, x)
    return predict_krr(model, x)


def predict_many(model: Model, xs: np.ndarray) -> tuple[np.ndarray, int]:
    """逐点预测，返回 (预测值, NW 取默认值的次数)。"""
    points = np.asarray(xs, dtype=float)
    if points.ndim == 1:
        points = points[:, np.newaxis]
    predictions = np.empty(points.shape[0])
    defaulted = 0
    if isinstance(model, NWModel):
        for i, point in enumerate(points):
            predictions[i], was_default = _nw_point(model, point)
            defaulted += was_default
    else:
        for i, point in enumerate(points):
            predictions[i] = predict_krr(model, point)
    return predictions, defaulted


def evaluate(model: Model, test: LabeledDataset) -> tuple[float, int]:
    """返回 (测试集 MSE, 取默认值的预测次数)。"""
    predictions, defaulted = predict_many(model, test.x)
    if defaulted:
        logger.debug("%d/%d 个 NW 预测因分母为 0 取默认值 0", defaulted, test.n)
    return float(np.mean((predictions - test.y) ** 2)), defaulted


def mse(model: Model, test: LabeledDataset) -> float:
    if test.n == 0:
        raise InputError("测试集不能为空")
    return evaluate(model, test)[0]


# ----------------------------------------------------------------------
# JSON 序列化
# ----------------------------------------------------------------------
def model_to_dict(model: Model) -> dict[str, Any]:
    payload: dict[str, Any] = {
        "kind": "nw" if isinstance(model, NWModel) else "krr",
        "kernel": {"family": model.base.family.value, "h": model.base.bandwidth},
        "support_x": model.support_x.tolist(),
    }
    if isinstance(model, NWModel):
        payload["support_y"] = model.support_y.tolist()
    else:
        payload["lambda"] = model.lam
        payload["alpha"] = model.alpha.tolist()
        payload["jitter"] = model.jitter
    return payload


def model_from_dict(payload: dict[str, Any]) -> Model:
    try:
        kernel = payload["kernel"]
        base = KernelSpec(kernel["family"], kernel["h"])
        kind = payload["kind"]
        support_x = payload["support_x"]
        if kind == "nw":
            return NWModel(
                support_x=support_x, support_y=payload["support_y"], base=base
            )
        if kind == "krr":
            return KRRModel(
                support_x=support_x,
                alpha=payload["alpha"],
                base=base,
                lam=payload["lambda"],
                jitter=payload.get("jitter", 0.0),
            )
    except KeyError as exc:
        raise InputError(f"模型描述缺少字段：{exc}") from exc
    raise InputError(f"未知模型类型：{payload.get('kind')!r}")


def save_model(model: Model, path: str | Path) -> None:
    path = Path(path)
    try:
        path.write_text(json.dumps(model_to_dict(model)) + "\n", encoding="utf-8")
    except OSError as exc:
        raise ResultIOError(f"无法写入模型文件：{exc}", path=str(path)) from exc


def load_model(path: str | Path) -> Model:
    path = Path(path)
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except UnicodeDecodeError as exc:
        raise InputError(
            f"模型文件不是 UTF-8 编码：{exc.reason}", location=str(path)
        ) from exc
    except OSError as exc:
        raise ResultIOError(f"无法读取模型文件：{exc}", path=str(path)) from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"模型文件不是合法的 JSON：{exc}") from exc
    return model_from_dict(payload)


__all__ = [
    "fit_nw",
    "predict_nw",
    "fit_krr",
    "predict_krr",
    "fit_kt_nw",
    "fit_kt_krr",
    "predict",
    "predict_many",
    "evaluate",
    "mse",
    "model_to_dict",
    "model_from_dict",
    "save_model",
    "load_model",
]
