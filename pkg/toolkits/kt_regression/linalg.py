"""对称正定线性方程组的求解，失败时逐级增加对角抖动。"""
from __future__ import annotations

import logging

import numpy as np
from scipy import linalg

from .exceptions import NumericalError

logger = logging.getLogger(__name__)

MAX_RETRIES = 6
JITTER_SCALE = 1e-10


def solve_spd_with_jitter(
    matrix: np.ndarray, rhs: np.ndarray, *, jitter_base: float | None = None
) -> tuple[np.ndarray, float]:
    """用 Cholesky 分解求解 matrix·x = rhs，返回 (x, 实际使用的抖动)。

    先以零抖动尝试；失败后抖动取 1e-10·jitter_base（默认 trace/m），
    每次重试乘以 10，最多重试 6 次。
    """
    matrix = np.asarray(matrix, dtype=float)
    rhs = np.asarray(rhs, dtype=float)
    m = matrix.shape[0]
    identity = np.eye(m)
    if jitter_base is None:
        jitter_base = float(np.trace(matrix)) / m
    if not jitter_base > 0:
        jitter_base = 1.0
    jitter = 0.0
    for attempt in range(MAX_RETRIES + 1):
        if attempt == 1:
            jitter = JITTER_SCALE * jitter_base
        elif attempt > 1:
            jitter *= 10.0
        try:
            factor = linalg.cho_factor(matrix + jitter * identity, lower=True)
        except linalg.LinAlgError:
            logger.debug("Cholesky 分解失败（抖动 %.3e），继续增加抖动", jitter)
            continue
        if jitter > 0:
            logger.warning("Cholesky 分解在抖动 %.3e 下成功", jitter)
        return linalg.cho_solve(factor, rhs), jitter
    raise NumericalError(
        f"增加抖动后 Cholesky 分解仍然失败，最终抖动为 {jitter:.3e}", jitter=jitter
    )


__all__ = ["solve_spd_with_jitter"]
