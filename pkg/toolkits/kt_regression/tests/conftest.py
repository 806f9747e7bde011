"""测试配置，确保可以从仓库根目录导入工具包。"""
from __future__ import annotations

import sys
from pathlib import Path

import pytest

ROOT = Path(__file__).resolve().parents[3]
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

from toolkits.kt_regression.presets import reset_presets  # noqa: E402


@pytest.fixture(autouse=True)
def _fresh_presets():
    reset_presets()
    yield
    reset_presets()
