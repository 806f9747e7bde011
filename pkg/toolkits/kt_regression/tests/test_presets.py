"""配置预设加载的测试。"""
from __future__ import annotations

import json

import pytest

from toolkits.kt_regression.exceptions import InputError, ResultIOError
from toolkits.kt_regression.presets import (
    ensure_presets_loaded,
    get_preset,
    reset_presets,
)


def test_builtin_defaults():
    assert get_preset("delta") == 0.5
    assert get_preset("gram_cap") == 4096
    assert get_preset("ablation_kernels") == {"nw": "wendland0", "krr": "gaussian"}
    assert get_preset("california")["h"] == 10.0
    assert get_preset("susy")["lambda_prime"] == 0.1


def test_unknown_key():
    with pytest.raises(InputError):
        get_preset("temperature")


def test_user_presets_replace_builtin(tmp_path):
    path = tmp_path / "custom.json"
    path.write_text(json.dumps({"delta": 0.1}), encoding="utf-8")
    ensure_presets_loaded(path)
    assert get_preset("delta") == 0.1
    with pytest.raises(InputError):
        get_preset("gram_cap")
    reset_presets()
    assert get_preset("gram_cap") == 4096


def test_bad_preset_files(tmp_path):
    with pytest.raises(ResultIOError):
        ensure_presets_loaded(tmp_path / "missing.json")
    broken = tmp_path / "broken.json"
    broken.write_text("{", encoding="utf-8")
    with pytest.raises(InputError):
        ensure_presets_loaded(broken)
    listed = tmp_path / "list.json"
    listed.write_text("[1, 2]", encoding="utf-8")
    with pytest.raises(InputError):
        ensure_presets_loaded(listed)


def test_non_utf8_preset_file(tmp_path):
    path = tmp_path / "latin1.json"
    path.write_bytes(b'{"delta": "\xe9"}')
    with pytest.raises(InputError, match="UTF-8"):
        ensure_presets_loaded(path)
