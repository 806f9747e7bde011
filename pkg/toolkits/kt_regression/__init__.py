"""核稀疏化加速的非参数回归工具包。

提供 Nadaraya-Watson 与核岭回归估计器，以及用于压缩训练集的
核稀疏化（KT-Compress++）流程和配套的基准测试命令行。
"""

from __future__ import annotations

from .exceptions import InputError, KTRegressionError, NumericalError, ResultIOError
from .regression import (
    evaluate,
    fit_krr,
    fit_kt_krr,
    fit_kt_nw,
    fit_nw,
    mse,
    predict,
    predict_krr,
    predict_nw,
)
from .rng import RandomStream, derive_seed
from .schemas import (
    Coreset,
    KernelFamily,
    KernelSpec,
    KRRModel,
    LabeledDataset,
    MetaKernelSpec,
    MetaMode,
    Method,
    NWModel,
    ThinningConfig,
)
from .thinning import kt_compress_pp, standard_thin

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "KTRegressionError",
    "InputError",
    "NumericalError",
    "ResultIOError",
    "RandomStream",
    "derive_seed",
    "KernelFamily",
    "KernelSpec",
    "MetaMode",
    "MetaKernelSpec",
    "LabeledDataset",
    "Coreset",
    "ThinningConfig",
    "Method",
    "NWModel",
    "KRRModel",
    "kt_compress_pp",
    "standard_thin",
    "fit_nw",
    "predict_nw",
    "fit_krr",
    "predict_krr",
    "fit_kt_nw",
    "fit_kt_krr",
    "predict",
    "evaluate",
    "mse",
]
