"""默认配置预设的读取与查询。"""
from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Any

from .exceptions import InputError, ResultIOError

logger = logging.getLogger(__name__)

_PRESETS: dict[str, Any] = {}
_PRESET_PATH = Path(__file__).resolve().parent / "presets" / "defaults.json"


def ensure_presets_loaded(path: str | Path | None = None) -> dict[str, Any]:
    """读取预设文件；传入 ``path`` 时用该文件替换已缓存的预设。"""
    global _PRESETS
    if _PRESETS and path is None:
        return _PRESETS
    source = Path(path) if path is not None else _PRESET_PATH
    try:
        with source.open("r", encoding="utf-8") as fh:
            loaded = json.load(fh)
    except FileNotFoundError as exc:
        raise ResultIOError(f"未找到预设文件：{source}", path=str(source)) from exc
    except UnicodeDecodeError as exc:
        raise InputError(
            f"预设文件不是 UTF-8 编码：{exc.reason}", location=str(source)
        ) from exc
    except json.JSONDecodeError as exc:
        raise InputError(
            f"预设文件不是合法的 JSON：{exc}", location=str(source)
        ) from exc
    except OSError as exc:
        raise ResultIOError(f"无法读取预设文件：{exc}", path=str(source)) from exc
    if not isinstance(loaded, dict):
        raise InputError("预设文件顶层必须是对象")
    _PRESETS = loaded
    logger.info("已加载配置预设：%s", sorted(_PRESETS))
    return _PRESETS


def get_preset(name: str) -> Any:
    presets = ensure_presets_loaded()
    if name not in presets:
        raise InputError(f"未知配置预设：{name}")
    return presets[name]


def reset_presets() -> None:
    """清空缓存，下次访问时重新读取内置预设。"""
    global _PRESETS
    _PRESETS = {}


__all__ = ["ensure_presets_loaded", "get_preset", "reset_presets"]
