# -*- coding: utf-8 -*-
"""
analysis/neural.py
Обратная модель потоки → OD: однослойная сеть прямого распространения на numpy
(ReLU, dropout после скрытого слоя, L1 по весам, MSE, оптимизатор Adam).
"""

import json
import math
import os
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from analysis.metrics import ErrorReport, error_stats
from infra.error_handler import DataFormatError, ShapeMismatchError, TrainingError, safe_run
from infra.logger import get_logger
from system import config


TRAIN, INFER = "train", "infer"
PARAM_NAMES = ("W1", "b1", "W2", "b2")
CHECKPOINT_FORMAT = "od-nn/1"


# ---------- Типы ----------

@dataclass
class NNModel:
    W1: np.ndarray            # hidden × S
    b1: np.ndarray
    W2: np.ndarray            # out × hidden
    b2: np.ndarray
    dropout_rate: float = 0.2
    l1_lambda: float = 0.02
    input_scale: Optional[np.ndarray] = None   # делитель входов, если включена нормализация

    def __post_init__(self):
        for name in PARAM_NAMES:
            setattr(self, name, np.asarray(getattr(self, name), dtype=float))
        if self.input_scale is not None:
            self.input_scale = np.asarray(self.input_scale, dtype=float)
        h, s = self.W1.shape
        out = self.W2.shape[0]
        if self.b1.shape != (h,) or self.W2.shape != (out, h) or self.b2.shape != (out,):
            raise ShapeMismatchError(f"Несогласованные формы параметров: W1 {self.W1.shape}, b1 {self.b1.shape}, "
                                     f"W2 {self.W2.shape}, b2 {self.b2.shape}")
        if self.input_scale is not None and (self.input_scale.shape != (s,) or np.any(self.input_scale <= 0)):
            raise ShapeMismatchError(f"input_scale должен иметь форму ({s},) и быть > 0")
        if not all(np.all(np.isfinite(getattr(self, n))) for n in PARAM_NAMES):
            raise TrainingError("Параметры модели содержат нечисловые значения")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError(f"dropout_rate должен быть в [0, 1), получено {self.dropout_rate}")
        if self.l1_lambda < 0:
            raise ValueError(f"l1_lambda должен быть ≥ 0, получено {self.l1_lambda}")

    @property
    def in_dim(self) -> int:
        return self.W1.shape[1]

    @property
    def hidden_dim(self) -> int:
        return self.W1.shape[0]

    @property
    def out_dim(self) -> int:
        return self.W2.shape[0]

    @classmethod
    def initialize(cls, in_dim: int, out_dim: int, hidden_dim: int = 80, dropout_rate: float = 0.2,
                   l1_lambda: float = 0.02, rng: Optional[np.random.Generator] = None,
                   output_bias: Optional[np.ndarray] = None) -> "NNModel":
        """Равномерная инициализация He: U(−√(6/fan_in), √(6/fan_in)), смещения скрытого слоя 0"""
        rng = rng if rng is not None else np.random.default_rng(0)
        lim1 = math.sqrt(6.0 / in_dim)
        lim2 = math.sqrt(6.0 / hidden_dim)
        W1 = rng.uniform(-lim1, lim1, size=(hidden_dim, in_dim))
        W2 = rng.uniform(-lim2, lim2, size=(out_dim, hidden_dim))
        b2 = np.zeros(out_dim) if output_bias is None else np.asarray(output_bias, dtype=float).copy()
        return cls(W1=W1, b1=np.zeros(hidden_dim), W2=W2, b2=b2, dropout_rate=dropout_rate, l1_lambda=l1_lambda)

    def params(self) -> Dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in PARAM_NAMES}

    def l1_norm(self) -> float:
        return float(np.abs(self.W1).sum() + np.abs(self.W2).sum())

    def predict(self, x: np.ndarray) -> np.ndarray:
        y_hat, _ = forward(self, x, mode=INFER)
        return y_hat


@dataclass
class TrainConfig:
    learning_rate: float = 0.001
    epochs: int = 50
    batch_size: int = 96
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError(f"learning_rate должен быть > 0, получено {self.learning_rate}")
        if self.batch_size < 1 or self.epochs < 1:
            raise ValueError(f"batch_size и epochs должны быть ≥ 1, получено {self.batch_size}, {self.epochs}")

    @classmethod
    def from_settings(cls, settings: Optional[Dict] = None, seed: Optional[int] = None) -> "TrainConfig":
        s = settings or config.TRAIN
        return cls(learning_rate=float(s["learning_rate"]), epochs=int(s["epochs"]), batch_size=int(s["batch_size"]),
                   beta1=float(s["beta1"]), beta2=float(s["beta2"]), eps=float(s["eps"]),
                   seed=int(s["seed"] if seed is None else seed))


@dataclass
class Dataset:
    inputs: np.ndarray        # K × S
    targets: np.ndarray       # K × M
    train_idx: np.ndarray
    test_idx: np.ndarray
    hours: Optional[np.ndarray] = None

    def __post_init__(self):
        self.inputs = np.atleast_2d(np.asarray(self.inputs, dtype=float))
        self.targets = np.atleast_2d(np.asarray(self.targets, dtype=float))
        self.train_idx = np.asarray(self.train_idx, dtype=int)
        self.test_idx = np.asarray(self.test_idx, dtype=int)
        k = self.inputs.shape[0]
        if self.targets.shape[0] != k:
            raise ShapeMismatchError(f"Датасет: {k} входов и {self.targets.shape[0]} целей")
        if np.intersect1d(self.train_idx, self.test_idx).size:
            raise DataFormatError("Датасет: обучающая и тестовая выборки пересекаются")
        if np.any(self.targets < 0):
            raise DataFormatError("Датасет: отрицательные значения OD в целях")
        self.hours = np.arange(k) if self.hours is None else np.asarray(self.hours, dtype=int)

    @property
    def n_samples(self) -> int:
        return self.inputs.shape[0]

    def train_part(self) -> Tuple[np.ndarray, np.ndarray]:
        return self.inputs[self.train_idx], self.targets[self.train_idx]

    def test_part(self) -> Tuple[np.ndarray, np.ndarray]:
        return self.inputs[self.test_idx], self.targets[self.test_idx]


@dataclass
class ForwardCache:
    x: np.ndarray
    z1: np.ndarray
    h: np.ndarray             # выход скрытого слоя после dropout
    dropout_scale: Optional[np.ndarray]
    z2: np.ndarray
    y_hat: np.ndarray
    mode: str


@dataclass
class AdamState:
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)
    t: int = 0

    @classmethod
    def fresh(cls, model: NNModel) -> "AdamState":
        return cls(m={k: np.zeros_like(p) for k, p in model.params().items()},
                   v={k: np.zeros_like(p) for k, p in model.params().items()})


# ---------- Прямой и обратный проход ----------

def forward(model: NNModel, x: np.ndarray, mode: str = INFER,
            rng: Optional[np.random.Generator] = None) -> Tuple[np.ndarray, ForwardCache]:
    """ŷ = ReLU(W2·dropout(ReLU(W1·x + b1)) + b2); x — вектор или батч строк"""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    batch = np.atleast_2d(x)
    if batch.ndim != 2 or batch.shape[1] != model.in_dim:
        raise ShapeMismatchError(f"Вход формы {x.shape}, модель ожидает {model.in_dim} датчиков")
    if not np.all(np.isfinite(batch)):
        raise ShapeMismatchError("Вход содержит нечисловые значения")
    if model.input_scale is not None:
        batch = batch / model.input_scale

    z1 = batch @ model.W1.T + model.b1
    y1 = np.maximum(z1, 0.0)
    scale = None
    if mode == TRAIN and model.dropout_rate > 0:
        if rng is None:
            raise TrainingError("Режим обучения с dropout требует генератор случайных чисел")
        keep = 1.0 - model.dropout_rate
        scale = (rng.random(y1.shape) < keep) / keep
        h = y1 * scale
    elif mode in (TRAIN, INFER):
        h = y1
    else:
        raise ValueError(f"Неизвестный режим {mode!r}")
    z2 = h @ model.W2.T + model.b2
    y_hat = np.maximum(z2, 0.0)

    cache = ForwardCache(x=batch, z1=z1, h=h, dropout_scale=scale, z2=z2, y_hat=y_hat, mode=mode)
    return (y_hat[0] if single else y_hat), cache


def loss(model: NNModel, y_hat: np.ndarray, targets: np.ndarray) -> float:
    """Среднее по батчу и элементам (y − ŷ)² + λ·Σ|W|"""
    y_hat = np.atleast_2d(y_hat)
    targets = np.atleast_2d(np.asarray(targets, dtype=float))
    if y_hat.shape != targets.shape or y_hat.size == 0:
        raise ShapeMismatchError(f"Прогноз {y_hat.shape} и цели {targets.shape} различаются")
    return float(np.mean((y_hat - targets) ** 2) + model.l1_lambda * model.l1_norm())


def backward(model: NNModel, cache: ForwardCache, targets: np.ndarray) -> Dict[str, np.ndarray]:
    """Градиенты полной цели; для L1 субградиент sign(w), sign(0) = 0"""
    targets = np.atleast_2d(np.asarray(targets, dtype=float))
    if targets.shape != cache.y_hat.shape:
        raise ShapeMismatchError(f"Кэш прямого прохода на {cache.y_hat.shape}, цели {targets.shape}")
    if cache.z1.shape[1] != model.hidden_dim or cache.z2.shape[1] != model.out_dim:
        raise ShapeMismatchError("Кэш прямого прохода не соответствует модели")
    n, m = targets.shape
    d_out = 2.0 * (cache.y_hat - targets) / (n * m)
    d_z2 = d_out * (cache.z2 > 0)
    grads = {
        "W2": d_z2.T @ cache.h + model.l1_lambda * np.sign(model.W2),
        "b2": d_z2.sum(axis=0),
    }
    d_h = d_z2 @ model.W2
    if cache.dropout_scale is not None:
        d_h = d_h * cache.dropout_scale
    d_z1 = d_h * (cache.z1 > 0)
    grads["W1"] = d_z1.T @ cache.x + model.l1_lambda * np.sign(model.W1)
    grads["b1"] = d_z1.sum(axis=0)
    return grads


def adam_step(model: NNModel, grads: Dict[str, np.ndarray], state: AdamState, cfg: TrainConfig) -> NNModel:
    """Один шаг Adam с коррекцией смещения моментов; параметры меняются на месте"""
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise TrainingError(f"Нечисловой градиент для {name} на шаге {state.t + 1}")
        if g.shape != state.m[name].shape:
            raise ShapeMismatchError(f"Градиент {name} формы {g.shape}, состояние {state.m[name].shape}")
    state.t += 1
    t = state.t
    for name, g in grads.items():
        state.m[name] = cfg.beta1 * state.m[name] + (1.0 - cfg.beta1) * g
        state.v[name] = cfg.beta2 * state.v[name] + (1.0 - cfg.beta2) * g * g
        m_hat = state.m[name] / (1.0 - cfg.beta1 ** t)
        v_hat = state.v[name] / (1.0 - cfg.beta2 ** t)
        setattr(model, name, getattr(model, name) - cfg.learning_rate * m_hat / (np.sqrt(v_hat) + cfg.eps))
    return model


# ---------- Обучение и оценка ----------

class NNTrainer:
    """
    Обучение обратной модели:
    - инициализация He, смещение выхода = среднее целей обучающей выборки
    - перемешанные мини-батчи, dropout, Adam
    - трасса средней ошибки по эпохам
    """

    def __init__(self, nn_settings: Optional[Dict] = None, train_config: Optional[TrainConfig] = None):
        self.nn_settings = nn_settings or config.NN
        self.cfg = train_config or TrainConfig.from_settings()
        self.logger = get_logger()

    @safe_run(stage="Обучение нейросети")
    def train(self, dataset: Dataset) -> Tuple[NNModel, List[float]]:
        x, y = dataset.train_part()
        if x.shape[0] == 0:
            raise TrainingError("Пустая обучающая выборка")
        cfg = self.cfg
        rng = np.random.default_rng(cfg.seed)
        model = NNModel.initialize(
            in_dim=x.shape[1],
            out_dim=y.shape[1],
            hidden_dim=int(self.nn_settings["hidden_dim"]),
            dropout_rate=float(self.nn_settings["dropout"]),
            l1_lambda=float(self.nn_settings["l1_lambda"]),
            rng=rng,
            output_bias=y.mean(axis=0),
        )
        if self.nn_settings.get("normalize_inputs"):
            peak = x.max(axis=0)
            model.input_scale = np.where(peak > 0, peak, 1.0)

        state = AdamState.fresh(model)
        trace: List[float] = []
        self.logger.init_progress(cfg.epochs)
        for epoch in range(1, cfg.epochs + 1):
            order = rng.permutation(x.shape[0])
            total = 0.0
            for start in range(0, len(order), cfg.batch_size):
                idx = order[start:start + cfg.batch_size]
                y_hat, cache = forward(model, x[idx], mode=TRAIN, rng=rng)
                batch_loss = loss(model, y_hat, y[idx])
                if not math.isfinite(batch_loss):
                    raise TrainingError(f"Эпоха {epoch}: нечисловое значение функции потерь")
                adam_step(model, backward(model, cache, y[idx]), state, cfg)
                total += batch_loss * len(idx)
            trace.append(total / x.shape[0])
            self.logger.step_done(f"эпоха {epoch}, loss {trace[-1]:.4f}")
        return model, trace


def train(dataset: Dataset, train_config: Optional[TrainConfig] = None,
          nn_settings: Optional[Dict] = None) -> Tuple[NNModel, List[float]]:
    return NNTrainer(nn_settings, train_config).train(dataset)


def evaluate_nn(model, inputs: np.ndarray, targets: np.ndarray) -> ErrorReport:
    """MSE/RMSE/rRMSE прогноза OD в режиме вывода (без dropout)"""
    inputs = np.atleast_2d(np.asarray(inputs, dtype=float))
    if inputs.shape[0] == 0:
        raise ShapeMismatchError("Пустая тестовая выборка")
    return error_stats(np.atleast_2d(targets), np.atleast_2d(model.predict(inputs)))


# ---------- Чекпоинт ----------

@safe_run(stage="Сохранение модели", retries=2)
def save_model(model: NNModel, path: str, seed: Optional[int] = None) -> str:
    doc = {
        "format": CHECKPOINT_FORMAT,
        "in_dim": model.in_dim,
        "hidden_dim": model.hidden_dim,
        "out_dim": model.out_dim,
        "dropout_rate": model.dropout_rate,
        "l1_lambda": model.l1_lambda,
        "seed": seed,
        "input_scale": None if model.input_scale is None else model.input_scale.tolist(),
    }
    doc.update({name: p.tolist() for name, p in model.params().items()})
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(doc, f)
    return path


@safe_run(stage="Загрузка модели", retries=2)
def load_model(path: str, n_free: Optional[int] = None) -> NNModel:
    """Модель из чекпоинта; n_free — число свободных элементов маски OD"""
    with open(path, "r", encoding="utf-8") as f:
        try:
            doc = json.load(f)
        except json.JSONDecodeError as e:
            raise DataFormatError(f"{path}: ошибка разбора в строке {e.lineno}: {e.msg}") from e
    if doc.get("format") != CHECKPOINT_FORMAT:
        raise DataFormatError(f"{path}: неизвестный формат чекпоинта {doc.get('format')!r}")
    missing = [k for k in PARAM_NAMES + ("dropout_rate", "l1_lambda") if k not in doc]
    if missing:
        raise DataFormatError(f"{path}: нет полей {missing}")
    model = NNModel(W1=doc["W1"], b1=doc["b1"], W2=doc["W2"], b2=doc["b2"],
                    dropout_rate=float(doc["dropout_rate"]), l1_lambda=float(doc["l1_lambda"]),
                    input_scale=doc.get("input_scale"))
    for key, actual in (("in_dim", model.in_dim), ("hidden_dim", model.hidden_dim), ("out_dim", model.out_dim)):
        if key in doc and int(doc[key]) != actual:
            raise ShapeMismatchError(f"{path}: {key}={doc[key]} не совпадает с формой параметров ({actual})")
    if n_free is not None and model.out_dim != n_free:
        raise ShapeMismatchError(f"{path}: модель выдаёт {model.out_dim} элементов OD, а маска сети — {n_free}")
    return model
