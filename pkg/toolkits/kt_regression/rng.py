"""可复现的计数器型随机数流。

每条流由 (主种子, 路径) 唯一确定：底层使用 Philox 计数器型生成器，
通过 ``SeedSequence(seed, spawn_key=path)`` 派生。子流只依赖自身路径，
因此递归的遍历顺序不会影响兄弟分支的随机数。
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import InputError

_SEED_LIMIT = 2**64


def _check_seed(seed: int) -> int:
    seed = int(seed)
    if not 0 <= seed < _SEED_LIMIT:
        raise InputError(f"随机种子必须是 64 位无符号整数：{seed}")
    return seed


@dataclass(frozen=True)
class RandomStream:
    """以 (seed, path) 标识的随机数流。"""

    seed: int
    path: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "seed", _check_seed(self.seed))
        object.__setattr__(self, "path", tuple(int(p) for p in self.path))

    def child(self, index: int) -> RandomStream:
        return RandomStream(self.seed, (*self.path, int(index)))

    def generator(self) -> np.random.Generator:
        """返回该流的新生成器；同一条流每次都从相同状态开始。"""
        sequence = np.random.SeedSequence(self.seed, spawn_key=self.path)
        return np.random.Generator(np.random.Philox(sequence))


def derive_seed(seed: int, *path: int) -> int:
    """为独立的子实验派生一个 64 位整数种子。"""
    sequence = np.random.SeedSequence(
        _check_seed(seed), spawn_key=tuple(int(p) for p in path)
    )
    return int(sequence.generate_state(1, dtype=np.uint64)[0])


__all__ = ["RandomStream", "derive_seed"]
