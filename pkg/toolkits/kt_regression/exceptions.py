"""定义工具包内部使用的自定义异常类型。"""
from __future__ import annotations


class KTRegressionError(Exception):
    """基础异常类型，所有业务异常均应继承该类。

    ``exit_code`` 为命令行入口捕获该异常后返回的进程退出码。
    """

    exit_code = 1


class InputError(KTRegressionError):
    """输入错误，例如参数越界、规模不合法或 CSV 内容无法解析。"""

    exit_code = 2

    def __init__(self, message: str, location: str | None = None) -> None:
        if location:
            message = f"{message}（位置：{location}）"
        super().__init__(message)
        self.location = location


class NumericalError(KTRegressionError):
    """数值错误，例如逐级增加抖动后 Cholesky 分解仍然失败。"""

    exit_code = 3

    def __init__(self, message: str, jitter: float | None = None) -> None:
        super().__init__(message)
        self.jitter = jitter


class ResultIOError(KTRegressionError):
    """文件读写失败。"""

    exit_code = 4

    def __init__(self, message: str, path: str | None = None) -> None:
        super().__init__(message)
        self.path = path


__all__ = ["KTRegressionError", "InputError", "NumericalError", "ResultIOError"]
