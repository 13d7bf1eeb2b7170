# -*- coding: utf-8 -*-
"""
infra/error_handler.py
Исключения предметной области и обёртка этапов с логированием и автоповторами для IO.
"""

import functools
import time
from typing import Any, Callable, Tuple, Type, TypeVar

from infra.logger import get_logger

F = TypeVar("F", bound=Callable[..., Any])

_NO_DEFAULT = object()


# ---------- Исключения ----------

class ODEstimationError(Exception):
    """Базовая ошибка пайплайна OD-оценки."""


class InvalidLinkError(ODEstimationError):
    """Нечисловые или недопустимые атрибуты связи."""


class NetworkValidationError(ODEstimationError):
    """Файл сети не разбирается или нарушает инварианты."""


class AssemblyError(ODEstimationError):
    """Не хватает наблюдений для сборки системы ограничений."""


class ConvergenceError(ODEstimationError):
    """Солвер не снизил невязку ниже допуска."""

    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = residual


class UnroutableDemandError(ODEstimationError):
    """Положительный спрос без единого маршрута."""

    def __init__(self, message: str, pair: Tuple[int, int]):
        super().__init__(message)
        self.pair = pair


class AssignmentError(ODEstimationError):
    """Нечисловое время проезда (ошибка пропускной способности)."""


class ShapeMismatchError(ODEstimationError):
    """Размерности входов/параметров не совпадают."""


class TrainingError(ODEstimationError):
    """Обучение прервано (пустая выборка, нечисловой градиент)."""


class ScenarioError(ODEstimationError):
    """Некорректный сценарий или неизвестная связь."""


class DataFormatError(ODEstimationError):
    """Ошибка формата файла (OD, наблюдения, датасет, чекпоинт)."""


class ConfigError(ODEstimationError):
    """Ошибка файла конфигурации."""


# ---------- Выполнение этапов ----------

class ErrorHandler:
    def __init__(self, retries: int = 1, base_delay: float = 0.5, backoff: float = 2.0,
                 retry_on: Tuple[Type[BaseException], ...] = (OSError,)):
        """
        :param retries: количество попыток (повторяются только ошибки из retry_on)
        :param base_delay: задержка перед первой повторной попыткой (сек)
        :param backoff: коэффициент роста задержки (экспоненциальный)
        :param retry_on: типы ошибок, при которых имеет смысл повтор (IO)
        """
        self.retries = max(1, retries)
        self.base_delay = base_delay
        self.backoff = backoff
        self.retry_on = retry_on
        self.logger = get_logger()

    def run(self, func: Callable[..., Any], *args, default: Any = _NO_DEFAULT, stage: str = "Неизвестный этап", **kwargs) -> Any:
        """
        Выполнить функцию в рамках этапа.
        Ошибки логируются и пробрасываются дальше; default возвращается только
        для IO-ошибок, если вызывающий явно его задал.
        """
        delay = self.base_delay
        previous_stage = self.logger.current_stage
        self.logger.stage(stage)
        started = time.time()
        try:
            for attempt in range(1, self.retries + 1):
                try:
                    result = func(*args, **kwargs)
                    if attempt > 1:
                        self.logger.status(f"{stage} — успешно с {attempt}-й попытки", status="ok")
                    self.logger.debug(f"{stage}: выполнено за {time.time() - started:.3f} сек")
                    return result
                except self.retry_on as e:
                    self.logger.error(f"Ошибка IO на этапе {stage} (попытка {attempt}/{self.retries}): {e}")
                    if attempt < self.retries:
                        time.sleep(delay)
                        delay *= self.backoff
                        continue
                    if default is not _NO_DEFAULT:
                        self.logger.status(f"{stage} — провал после {self.retries} попыток, значение по умолчанию", status="warn")
                        return default
                    raise
                except Exception as e:
                    self.logger.error(f"Ошибка на этапе {stage}: {type(e).__name__}: {e}")
                    raise
        finally:
            self.logger.stage(previous_stage)


def safe_run(stage: str = "Неизвестный этап", retries: int = 1, base_delay: float = 0.5, backoff: float = 2.0, default: Any = _NO_DEFAULT):
    """
    Декоратор этапа пайплайна.
    Пример:
        @safe_run(stage="Сборка ограничений")
        def assemble(...): ...
    """
    def decorator(func: F) -> F:
        @functools.wraps(func)
        def wrapper(*args, **kwargs):
            handler = ErrorHandler(retries=retries, base_delay=base_delay, backoff=backoff)
            return handler.run(func, *args, default=default, stage=stage, **kwargs)
        return wrapper  # type: ignore
    return decorator
