"""命令行入口：simulate、thin、ablation、bench、gridsearch 五个子命令。"""
from __future__ import annotations

import argparse
import logging
from collections.abc import Sequence
from pathlib import Path

import numpy as np

from . import __version__
from .bench import (
    emit_results,
    emit_table,
    grid_search,
    run_ablation,
    run_trials,
    simulate,
)
from .data import (
    apply_standardization,
    gen_sim,
    load_csv,
    save_summary,
    split,
    standardize,
    with_binary_labels,
)
from .exceptions import InputError, KTRegressionError
from .presets import ensure_presets_loaded, get_preset
from .rng import RandomStream, derive_seed
from .schemas import (
    GridSpec,
    KernelFamily,
    KernelSpec,
    LabeledDataset,
    MetaKernelSpec,
    MetaMode,
    Method,
    ThinningConfig,
    TrialConfig,
)
from .thinning import kt_compress_pp, save_coreset_csv

logger = logging.getLogger(__name__)

_SPLIT_TAG = 0
_SEED_TAG = 100


def _float_list(text: str) -> tuple[float, ...]:
    try:
        values = tuple(float(part) for part in text.split(",") if part.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"无法解析的数值列表：{text!r}") from exc
    if not values:
        raise argparse.ArgumentTypeError("列表不能为空")
    return values


def _int_list(text: str) -> tuple[int, ...]:
    try:
        values = tuple(int(part) for part in text.split(",") if part.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"无法解析的整数列表：{text!r}") from exc
    if not values:
        raise argparse.ArgumentTypeError("列表不能为空")
    return values


def _jobs(args: argparse.Namespace) -> int:
    return 1 if args.strict_timing else args.jobs


def _delta(args: argparse.Namespace) -> float:
    return args.delta if args.delta is not None else float(get_preset("delta"))


def _gram_cap(args: argparse.Namespace) -> int:
    return args.gram_cap if args.gram_cap is not None else int(get_preset("gram_cap"))


# ----------------------------------------------------------------------
# 子命令
# ----------------------------------------------------------------------
def _cmd_simulate(args: argparse.Namespace) -> None:
    test_size = args.test_size or int(get_preset("sim_test_size"))
    results = simulate(
        Method(args.method),
        args.n,
        args.trials,
        KernelSpec(args.kernel, args.h),
        args.seed,
        lam=args.lam,
        delta=_delta(args),
        test_size=test_size,
        g_override=args.g,
        gram_cap=_gram_cap(args),
        n_jobs=_jobs(args),
    )
    emit_results(results, args.format, args.out)


def _cmd_thin(args: argparse.Namespace) -> None:
    data = load_csv(args.input, args.target)
    if args.standardize:
        data, _ = standardize(data)
    if args.summary is not None:
        save_summary(data, args.summary)
    meta = MetaKernelSpec(args.meta, KernelSpec(args.kernel, args.h))
    config = ThinningConfig(
        meta=meta,
        delta=_delta(args),
        seed=args.seed,
        g_override=args.g,
        gram_cap=_gram_cap(args),
    )
    coreset = kt_compress_pp(meta, data, config, rng=RandomStream(args.seed))
    if args.format == "csv":
        save_coreset_csv(coreset, args.out)
    else:
        rows = [
            {"position": position, "dataset_index": int(index)}
            for position, index in enumerate(coreset.indices)
        ]
        emit_table(rows, "json", args.out)
    logger.info("核心集规模 %d（原始规模 %d）", len(coreset), data.n)


def _grid(args: argparse.Namespace, method: Method) -> GridSpec:
    h_values = args.h_grid or tuple(get_preset("h_grid"))
    lambda_values = None
    if method.is_krr:
        lambda_values = args.lambda_grid or tuple(get_preset("lambda_grid"))
    per_cell = get_preset("trials_per_cell")
    trials = args.trials_per_cell or int(per_cell["randomized"])
    full_trials = int(per_cell["full"])
    validation_size = args.validation_size or int(get_preset("sim_validation_size"))
    return GridSpec(
        h_values=h_values,
        lambda_values=lambda_values,
        trials_per_cell=trials,
        full_trials_per_cell=full_trials,
        validation_size=validation_size,
    )


def _cmd_ablation(args: argparse.Namespace) -> None:
    method = Method.KT_NW if args.estimator == "nw" else Method.KT_KRR
    family = args.kernel or get_preset("ablation_kernels")[args.estimator]
    seeds = [derive_seed(args.seed, _SEED_TAG, t) for t in range(args.trials)]
    rows = run_ablation(
        args.estimator,
        args.n_list,
        _grid(args, method),
        seeds,
        family=family,
        modes=args.meta,
        delta=_delta(args),
        test_size=args.test_size or int(get_preset("sim_test_size")),
        master_seed=args.seed,
        n_jobs=_jobs(args),
    )
    emit_table(rows, args.format, args.out)


def _standardize_target(
    train: LabeledDataset, test: LabeledDataset
) -> tuple[LabeledDataset, LabeledDataset]:
    mean = float(np.mean(train.y))
    std = float(np.std(train.y)) or 1.0

    def scaled(data: LabeledDataset) -> LabeledDataset:
        return LabeledDataset(
            x=data.x, y=(data.y - mean) / std, feature_names=data.feature_names
        )

    return scaled(train), scaled(test)


def _load_train_test(args: argparse.Namespace) -> tuple[LabeledDataset, LabeledDataset]:
    data = load_csv(args.train, args.target)
    if args.test is not None:
        train, test = data, load_csv(args.test, args.target)
    else:
        fraction = args.split
        if not 0 < fraction < 1:
            raise InputError(f"--split 必须位于 (0, 1)：{fraction}")
        train, test = split(
            data, (fraction, 1.0 - fraction), derive_seed(args.seed, _SPLIT_TAG)
        )
    if args.standardize_target:
        if args.binary_labels:
            raise InputError("--standardize-target 不能与 --binary-labels 同时使用")
        train, test = _standardize_target(train, test)
    if args.binary_labels:
        train, test = with_binary_labels(train), with_binary_labels(test)
    if args.standardize:
        train, stats = standardize(train)
        test = apply_standardization(test, stats)
    return train, test


def _bench_hyperparameters(
    args: argparse.Namespace, method: Method
) -> tuple[str, float, float | None]:
    """命令行参数优先，其余由 --dataset-preset 指定的真实数据预设补全。"""
    kernel, h, lam = args.kernel, args.h, args.lam
    if args.dataset_preset is not None:
        preset = get_preset(args.dataset_preset)
        kernel = kernel or preset["kernel"]
        h = h if h is not None else float(preset["h"])
        if lam is None and method.is_krr:
            # 全量 KRR 使用 λ，核心集上的 KRR 使用 λ′
            key = "lambda" if method.strategy == "full" else "lambda_prime"
            lam = float(preset[key])
    if kernel is None or h is None:
        raise InputError("必须给出 --kernel 与 --h，或使用 --dataset-preset")
    return kernel, h, lam


def _cmd_bench(args: argparse.Namespace) -> None:
    train, test = _load_train_test(args)
    method = Method(args.method)
    kernel, h, lam = _bench_hyperparameters(args, method)
    if args.summary is not None:
        save_summary(train, args.summary)
    if test.binary:
        logger.info("标签为二分类，mse 列报告分类错误率")
    jobs = [
        (
            TrialConfig(
                method=method,
                n=train.n,
                base=KernelSpec(kernel, h),
                lam=lam,
                delta=_delta(args),
                seed=derive_seed(args.seed, _SEED_TAG, t),
                g_override=args.g,
                gram_cap=_gram_cap(args),
            ),
            train,
            test,
        )
        for t in range(args.trials)
    ]
    emit_results(run_trials(jobs, n_jobs=_jobs(args)), args.format, args.out)


def _cmd_gridsearch(args: argparse.Namespace) -> None:
    method = Method(args.method)
    grid = _grid(args, method)
    if args.train is not None:
        data = load_csv(args.train, args.target)
        fraction = float(get_preset("real_validation_fraction"))
        train, validation = split(
            data, (1.0 - fraction, fraction), derive_seed(args.seed, _SPLIT_TAG)
        )
        if args.standardize:
            train, stats = standardize(train)
            validation = apply_standardization(validation, stats)
    else:
        if args.n is None:
            raise InputError("未提供 --train 时必须给出模拟样本量 --n")
        train = gen_sim(args.n, derive_seed(args.seed, 0, args.n))
        validation = gen_sim(grid.validation_size, derive_seed(args.seed, 1))
    result = grid_search(
        method,
        grid,
        train,
        validation,
        args.seed,
        family=args.kernel,
        delta=_delta(args),
        meta_mode=args.meta,
        gram_cap=_gram_cap(args),
        n_jobs=_jobs(args),
    )
    emit_table(result.table, args.format, args.out)


# ----------------------------------------------------------------------
# 参数解析
# ----------------------------------------------------------------------
def _common_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="唯一的随机种子")
    common.add_argument("--out", type=Path, required=True, help="输出文件路径")
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("--delta", type=float, default=None, help="失败概率 δ")
    common.add_argument("--g", type=int, default=None, help="覆盖压缩等级")
    common.add_argument("--gram-cap", type=int, default=None)
    common.add_argument("--jobs", type=int, default=1, help="并行试验数")
    common.add_argument(
        "--strict-timing", action="store_true", help="计时试验独占进程（强制 --jobs 1）"
    )
    common.add_argument("--presets", type=Path, default=None, help="自定义预设 JSON")
    common.add_argument("--verbose", "-v", action="store_true")
    return common


def _grid_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--h-grid", type=_float_list, default=None)
    parser.add_argument("--lambda-grid", type=_float_list, default=None)
    parser.add_argument("--trials-per-cell", type=int, default=None)
    parser.add_argument("--validation-size", type=int, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kt-regression", description="核稀疏化加速的非参数回归"
    )
    parser.add_argument("--version", action="version", version=__version__)
    commands = parser.add_subparsers(dest="command", required=True)
    common = _common_parser()
    kernels = [family.value for family in KernelFamily]
    methods = [method.value for method in Method]
    metas = [mode.value for mode in MetaMode]

    sim = commands.add_parser("simulate", parents=[common], help="模拟数据上的重复试验")
    sim.add_argument("--method", choices=methods, required=True)
    sim.add_argument("--n", type=int, required=True)
    sim.add_argument("--trials", type=int, default=1)
    sim.add_argument("--kernel", choices=kernels, required=True)
    sim.add_argument("--h", type=float, required=True)
    sim.add_argument("--lambda", dest="lam", type=float, default=None)
    sim.add_argument("--test-size", type=int, default=None)
    sim.set_defaults(handler=_cmd_simulate)

    thin = commands.add_parser("thin", parents=[common], help="对 CSV 数据运行核稀疏化")
    thin.add_argument("--input", type=Path, required=True)
    thin.add_argument("--target", default="-1", help="目标列（序号或列名）")
    thin.add_argument("--kernel", choices=kernels, required=True)
    thin.add_argument("--h", type=float, required=True)
    thin.add_argument("--meta", choices=metas, required=True)
    thin.add_argument("--standardize", action="store_true")
    thin.add_argument("--summary", type=Path, default=None, help="数据集概要 JSON")
    thin.set_defaults(handler=_cmd_thin)

    ablation = commands.add_parser("ablation", parents=[common], help="元核消融实验")
    ablation.add_argument("--estimator", choices=("nw", "krr"), required=True)
    ablation.add_argument("--n-list", type=_int_list, required=True)
    ablation.add_argument("--trials", type=int, default=1)
    ablation.add_argument("--kernel", choices=kernels, default=None)
    ablation.add_argument("--meta", choices=metas, nargs="+", default=None)
    ablation.add_argument("--test-size", type=int, default=None)
    _grid_arguments(ablation)
    ablation.set_defaults(handler=_cmd_ablation)

    bench = commands.add_parser("bench", parents=[common], help="真实数据基准测试")
    bench.add_argument("--train", type=Path, required=True)
    bench.add_argument("--target", default="-1", help="目标列（序号或列名）")
    source = bench.add_mutually_exclusive_group()
    source.add_argument("--test", type=Path, default=None)
    source.add_argument("--split", type=float, default=0.8, help="训练集比例")
    bench.add_argument("--method", choices=methods, required=True)
    bench.add_argument("--kernel", choices=kernels, default=None)
    bench.add_argument("--h", type=float, default=None)
    bench.add_argument(
        "--dataset-preset",
        choices=("california", "susy"),
        default=None,
        help="真实数据超参数预设（核、h、λ 与 λ′）",
    )
    bench.add_argument("--lambda", dest="lam", type=float, default=None)
    bench.add_argument("--trials", type=int, default=1)
    bench.add_argument("--standardize", action="store_true")
    bench.add_argument("--standardize-target", action="store_true")
    bench.add_argument("--binary-labels", action="store_true")
    bench.add_argument("--summary", type=Path, default=None, help="训练集概要 JSON")
    bench.set_defaults(handler=_cmd_bench)

    gridsearch = commands.add_parser(
        "gridsearch", parents=[common], help="超参数网格搜索"
    )
    gridsearch.add_argument("--method", choices=methods, required=True)
    gridsearch.add_argument(
        "--kernel", choices=kernels, default=KernelFamily.GAUSSIAN.value
    )
    gridsearch.add_argument("--meta", choices=metas, default=None)
    gridsearch.add_argument("--n", type=int, default=None, help="模拟训练集规模")
    gridsearch.add_argument("--train", type=Path, default=None)
    gridsearch.add_argument("--target", default="-1")
    gridsearch.add_argument("--standardize", action="store_true")
    _grid_arguments(gridsearch)
    gridsearch.set_defaults(handler=_cmd_gridsearch)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        if args.presets is not None:
            ensure_presets_loaded(args.presets)
        if args.jobs < 1:
            raise InputError(f"--jobs 必须为正整数：{args.jobs}")
        args.handler(args)
    except KTRegressionError as exc:
        logger.error("%s 失败：%s", args.command, exc)
        return exc.exit_code
    return 0


if __name__ == "__main__":  # pragma: no cover
    raise SystemExit(main())
