"""基准测试：{Full, ST, KT} × {NW, KRR} 试验、网格搜索、元核消融与结果输出。"""
from __future__ import annotations

import csv
import json
import logging
import math
import time
from collections.abc import Callable, Sequence
from pathlib import Path
from typing import Any

import numpy as np
from joblib import Parallel, delayed

from .data import gen_sim, truncate_pow4
from .exceptions import InputError, ResultIOError
from .regression import (
    Model,
    fit_krr,
    fit_kt_krr,
    fit_kt_nw,
    fit_nw,
    predict_many,
)
from .rng import RandomStream, derive_seed
from .schemas import (
    GridResult,
    GridSpec,
    KernelFamily,
    KernelSpec,
    LabeledDataset,
    MetaKernelSpec,
    MetaMode,
    Method,
    TrialConfig,
    TrialResult,
)
from .thinning import is_power_of_four, standard_thin

logger = logging.getLogger(__name__)

RESULT_COLUMNS = [
    "method",
    "n",
    "n_out",
    "h",
    "lambda",
    "seed",
    "mse",
    "train_seconds",
    "predict_seconds_per_1k",
    "defaulted_predictions",
]

# derive_seed 路径标签
_TRAIN_TAG = 0
_VALIDATION_TAG = 1
_TEST_TAG = 2
_TRIAL_TAG = 3
_TRUNCATE_TAG = 4


# ----------------------------------------------------------------------
# 单次试验
# ----------------------------------------------------------------------
def _fit_full_nw(config: TrialConfig, train: LabeledDataset) -> Model:
    return fit_nw(train, None, config.base)


def _fit_st_nw(config: TrialConfig, train: LabeledDataset) -> Model:
    coreset = standard_thin(train, _st_size(config, train), RandomStream(config.seed))
    return fit_nw(train, coreset, config.base)


def _fit_kt_nw(config: TrialConfig, train: LabeledDataset) -> Model:
    return fit_kt_nw(
        train,
        config.base,
        config.delta,
        RandomStream(config.seed),
        meta=config.meta_override,
        g_override=config.g_override,
        gram_cap=config.gram_cap,
    )


def _fit_full_krr(config: TrialConfig, train: LabeledDataset) -> Model:
    return fit_krr(train, None, config.base, config.lam)


def _fit_st_krr(config: TrialConfig, train: LabeledDataset) -> Model:
    coreset = standard_thin(train, _st_size(config, train), RandomStream(config.seed))
    return fit_krr(train, coreset, config.base, config.lam)


def _fit_kt_krr(config: TrialConfig, train: LabeledDataset) -> Model:
    return fit_kt_krr(
        train,
        config.base,
        config.delta,
        config.lam,
        RandomStream(config.seed),
        meta=config.meta_override,
        g_override=config.g_override,
        gram_cap=config.gram_cap,
    )


def _st_size(config: TrialConfig, train: LabeledDataset) -> int:
    return config.n_out if config.n_out is not None else math.isqrt(train.n)


def _get_fitter(method: Method) -> Callable[[TrialConfig, LabeledDataset], Model]:
    handlers = {
        Method.FULL_NW: _fit_full_nw,
        Method.ST_NW: _fit_st_nw,
        Method.KT_NW: _fit_kt_nw,
        Method.FULL_KRR: _fit_full_krr,
        Method.ST_KRR: _fit_st_krr,
        Method.KT_KRR: _fit_kt_krr,
    }
    if method not in handlers:
        raise InputError(f"暂不支持的方法：{method}")
    return handlers[method]


def _score(predictions: np.ndarray, test: LabeledDataset) -> float:
    if test.binary:
        # 二分类：预测值以 0.5 为阈值，报告错误率
        return float(np.mean((predictions >= 0.5) != (test.y >= 0.5)))
    return float(np.mean((predictions - test.y) ** 2))


def run_trial(
    config: TrialConfig, train: LabeledDataset, test: LabeledDataset
) -> TrialResult:
    """拟合（含稀疏化）并在测试集上评估，记录训练与预测耗时。"""
    if train.d != test.d:
        raise InputError(f"训练集维度 {train.d} 与测试集维度 {test.d} 不一致")
    if config.method.strategy == "kt" and not is_power_of_four(train.n):
        train = truncate_pow4(train, derive_seed(config.seed, _TRUNCATE_TAG))

    fitter = _get_fitter(config.method)
    start = time.perf_counter_ns()
    model = fitter(config, train)
    train_seconds = (time.perf_counter_ns() - start) / 1e9

    start = time.perf_counter_ns()
    predictions, defaulted = predict_many(model, test.x)
    predict_seconds = (time.perf_counter_ns() - start) / 1e9

    result = TrialResult(
        config=config,
        n=train.n,
        n_out=model.size,
        mse=_score(predictions, test),
        train_seconds=train_seconds,
        predict_seconds_per_1k=predict_seconds * 1000.0 / test.n,
        defaulted_predictions=defaulted,
    )
    if defaulted:
        logger.info(
            "试验 %s seed=%d：%d/%d 个 NW 预测取默认值 0",
            config.method.value,
            config.seed,
            defaulted,
            test.n,
        )
    logger.debug(
        "试验 %s n=%d seed=%d：mse=%.6g，训练 %.4fs",
        config.method.value,
        result.n,
        config.seed,
        result.mse,
        train_seconds,
    )
    return result


def _order_key(result: TrialResult) -> tuple[str, int, int]:
    return result.config.method.value, result.n, result.config.seed


def run_trials(
    jobs: Sequence[tuple[TrialConfig, LabeledDataset, LabeledDataset]],
    n_jobs: int = 1,
) -> list[TrialResult]:
    """在进程池中运行相互独立的试验，结果按 (method, n, seed) 排序。"""
    if n_jobs == 1:
        results = [run_trial(*job) for job in jobs]
    else:
        results = Parallel(n_jobs=n_jobs)(delayed(run_trial)(*job) for job in jobs)
    return sorted(results, key=_order_key)


def simulate(
    method: Method,
    n: int,
    trials: int,
    base: KernelSpec,
    seed: int,
    *,
    lam: float | None = None,
    delta: float = 0.5,
    test_size: int = 10_000,
    g_override: int | None = None,
    gram_cap: int = 4096,
    n_jobs: int = 1,
) -> list[TrialResult]:
    """在模拟数据上重复试验：每次试验使用新的训练集，测试集共享。"""
    if trials < 1:
        raise InputError("试验次数至少为 1")
    test = gen_sim(test_size, derive_seed(seed, _TEST_TAG))
    jobs = []
    for t in range(trials):
        config = TrialConfig(
            method=method,
            n=n,
            base=base,
            lam=lam,
            delta=delta,
            seed=derive_seed(seed, _TRIAL_TAG, t),
            g_override=g_override,
            gram_cap=gram_cap,
        )
        train = gen_sim(n, derive_seed(seed, _TRAIN_TAG, n, t))
        jobs.append((config, train, test))
    results = run_trials(jobs, n_jobs=n_jobs)
    logger.info(
        "%s n=%d 共 %d 次试验：平均 MSE %.6g",
        Method(method).value,
        n,
        trials,
        float(np.mean([r.mse for r in results])),
    )
    return results


# ----------------------------------------------------------------------
# 网格搜索
# ----------------------------------------------------------------------
def grid_search(
    method: Method,
    grid: GridSpec,
    train: LabeledDataset,
    validation: LabeledDataset,
    seed: int,
    *,
    family: KernelFamily | str = KernelFamily.GAUSSIAN,
    delta: float = 0.5,
    meta_mode: MetaMode | None = None,
    gram_cap: int = 4096,
    n_jobs: int = 1,
) -> GridResult:
    """逐单元计算平均验证 MSE，返回最优单元（并列时取较小 h，再取较小 λ）。"""
    method = Method(method)
    meta_mode = MetaMode(meta_mode) if meta_mode is not None else None
    if method.is_krr and grid.lambda_values is None:
        raise InputError(f"{method.value} 的网格搜索需要 λ 网格")
    lambdas: Sequence[float | None] = (
        grid.lambda_values if method.is_krr else (None,)
    )
    trials = (
        grid.trials_per_cell if method.is_randomized else grid.full_trials_per_cell
    )
    seeds = [derive_seed(seed, _TRIAL_TAG, t) for t in range(trials)]

    table: list[dict[str, Any]] = []
    for h in grid.h_values:
        base = KernelSpec(family, h)
        meta = MetaKernelSpec(meta_mode, base) if meta_mode is not None else None
        for lam in lambdas:
            jobs = [
                (
                    TrialConfig(
                        method=method,
                        n=train.n,
                        base=base,
                        lam=lam,
                        delta=delta,
                        seed=trial_seed,
                        meta_override=meta,
                        gram_cap=gram_cap,
                    ),
                    train,
                    validation,
                )
                for trial_seed in seeds
            ]
            scores = [r.mse for r in run_trials(jobs, n_jobs=n_jobs)]
            row = {
                "method": method.value,
                "meta": meta_mode.value if meta_mode is not None else "",
                "h": h,
                "lambda": lam,
                "trials": trials,
                "mean_mse": float(np.mean(scores)),
                "std_mse": float(np.std(scores)),
            }
            logger.debug("网格单元 h=%g λ=%s：%.6g", h, lam, row["mean_mse"])
            table.append(row)

    best = min(
        table,
        key=lambda row: (row["mean_mse"], row["h"], row["lambda"] or 0.0),
    )
    logger.info(
        "%s 网格搜索最优：h=%g，λ=%s，验证 MSE=%.6g",
        method.value,
        best["h"],
        best["lambda"],
        best["mean_mse"],
    )
    return GridResult(best_h=best["h"], best_lambda=best["lambda"], table=table)


# ----------------------------------------------------------------------
# 元核消融
# ----------------------------------------------------------------------
def run_ablation(
    estimator: str,
    n_list: Sequence[int],
    grid: GridSpec,
    seeds: Sequence[int],
    *,
    family: KernelFamily | str | None = None,
    modes: Sequence[MetaMode] | None = None,
    delta: float = 0.5,
    test_size: int = 10_000,
    master_seed: int = 0,
    n_jobs: int = 1,
) -> list[dict[str, Any]]:
    """对每个 n 与每种元核：先网格搜索，再在多个种子上报告测试 MSE 的均值与标准差。"""
    if estimator not in ("nw", "krr"):
        raise InputError(f"未知估计器：{estimator!r}，可选 nw 或 krr")
    if not seeds:
        raise InputError("消融实验至少需要一个种子")
    method = Method.KT_NW if estimator == "nw" else Method.KT_KRR
    target = MetaMode.NW if estimator == "nw" else MetaMode.RR
    if family is None:
        family = KernelFamily.WENDLAND0 if estimator == "nw" else KernelFamily.GAUSSIAN
    if not modes:
        modes = (MetaMode.BASE_ONLY, MetaMode.CONCATENATED, target)

    validation = gen_sim(
        grid.validation_size, derive_seed(master_seed, _VALIDATION_TAG)
    )
    test = gen_sim(test_size, derive_seed(master_seed, _TEST_TAG))
    rows: list[dict[str, Any]] = []
    for n in n_list:
        selection_train = gen_sim(n, derive_seed(master_seed, _TRAIN_TAG, n))
        for mode in modes:
            mode = MetaMode(mode)
            best = grid_search(
                method,
                grid,
                selection_train,
                validation,
                master_seed,
                family=family,
                delta=delta,
                meta_mode=mode,
                n_jobs=n_jobs,
            )
            base = KernelSpec(family, best.best_h)
            jobs = [
                (
                    TrialConfig(
                        method=method,
                        n=n,
                        base=base,
                        lam=best.best_lambda,
                        delta=delta,
                        seed=int(seed),
                        meta_override=MetaKernelSpec(mode, base),
                    ),
                    gen_sim(n, derive_seed(int(seed), _TRAIN_TAG, n)),
                    test,
                )
                for seed in seeds
            ]
            scores = [r.mse for r in run_trials(jobs, n_jobs=n_jobs)]
            rows.append(
                {
                    "estimator": estimator,
                    "n": n,
                    "meta": mode.value,
                    "h": best.best_h,
                    "lambda": best.best_lambda,
                    "trials": len(scores),
                    "mean_mse": float(np.mean(scores)),
                    "std_mse": float(np.std(scores)),
                }
            )
            logger.info(
                "消融 %s n=%d 元核=%s：平均 MSE %.6g",
                estimator,
                n,
                mode.value,
                rows[-1]["mean_mse"],
            )
    return rows


# ----------------------------------------------------------------------
# 结果输出
# ----------------------------------------------------------------------
def _format_value(value: Any) -> Any:
    if isinstance(value, float):
        return float(format(value, ".9g"))
    return value


def _format_cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return format(value, ".9g")
    return str(value)


def emit_table(
    rows: Sequence[dict[str, Any]],
    fmt: str,
    path: str | Path,
    columns: Sequence[str] | None = None,
) -> None:
    """将结果行写为 CSV 或 JSON；浮点数保留 9 位有效数字，文件以换行结尾。"""
    if not rows:
        raise InputError("没有可写出的结果")
    if fmt not in ("csv", "json"):
        raise InputError(f"未知输出格式：{fmt!r}，可选 csv 或 json")
    columns = list(columns or rows[0].keys())
    path = Path(path)
    try:
        with path.open("w", encoding="utf-8", newline="") as fh:
            if fmt == "csv":
                writer = csv.writer(fh, lineterminator="\n")
                writer.writerow(columns)
                for row in rows:
                    writer.writerow([_format_cell(row.get(c)) for c in columns])
            else:
                payload = [
                    {c: _format_value(row.get(c)) for c in columns} for row in rows
                ]
                fh.write(json.dumps(payload, ensure_ascii=False, indent=2) + "\n")
    except OSError as exc:
        raise ResultIOError(f"无法写入结果文件：{exc}", path=str(path)) from exc
    logger.info("已写出 %d 行结果：%s", len(rows), path)


def emit_results(
    results: Sequence[TrialResult], fmt: str, path: str | Path
) -> None:
    ordered = sorted(results, key=_order_key)
    emit_table([r.as_row() for r in ordered], fmt, path, columns=RESULT_COLUMNS)


__all__ = [
    "RESULT_COLUMNS",
    "run_trial",
    "run_trials",
    "simulate",
    "grid_search",
    "run_ablation",
    "emit_table",
    "emit_results",
]
