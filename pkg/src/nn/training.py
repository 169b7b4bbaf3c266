"""
Laço de treinamento por minilotes com Adam e decaimento da taxa.

A cada época os índices são embaralhados com o gerador da semente do
treinamento; o último minilote incompleto é mantido. A taxa de aprendizado
é multiplicada por `lr_decay_factor` a cada `lr_drop_period_epochs` épocas.
"""

from dataclasses import dataclass, field
from typing import Iterator, List, Optional

import numpy as np
from pydantic import BaseModel, Field

from src.nn.mlp import Mlp, backward, forward
from src.nn.optim import AdamState, adam_step
from src.utils.errors import DatasetError, SchemaError, TrainingDivergedError
from src.utils.logger import get_logger

logger = get_logger(__name__)


class TrainConfig(BaseModel):
    """Hiperparâmetros de um estágio de treinamento."""

    minibatch_size: int = Field(default=5, ge=1)
    initial_lr: float = Field(default=0.005, gt=0.0)
    lr_decay_factor: float = Field(default=0.9, gt=0.0, le=1.0)
    lr_drop_period_epochs: int = Field(default=20, ge=1)
    epochs: int = Field(default=200, ge=0)
    seed: int = 0

    def learning_rate(self, epoch: int) -> float:
        """Taxa de aprendizado na época `epoch` (contada a partir de 0)."""
        return self.initial_lr * self.lr_decay_factor ** (epoch // self.lr_drop_period_epochs)


@dataclass
class FitResult:
    """Rede treinada e histórico do MSE de treino por época."""

    mlp: Mlp
    history: List[float] = field(default_factory=list)


def mse(pred: np.ndarray, target: np.ndarray) -> float:
    """
    Erro quadrático médio componente a componente.

    Raises:
        SchemaError: Se os formatos forem diferentes
        DatasetError: Se a entrada for vazia
    """
    pred = np.asarray(pred, dtype=float)
    target = np.asarray(target, dtype=float)
    if pred.shape != target.shape:
        raise SchemaError(f"Formatos diferentes em mse: {pred.shape} e {target.shape}")
    if pred.size == 0:
        raise DatasetError("mse de entrada vazia")
    return float(np.mean((pred - target) ** 2))


def rmse(pred: np.ndarray, target: np.ndarray) -> float:
    return float(np.sqrt(mse(pred, target)))


def iterate_minibatches(n: int, batch_size: int, rng: np.random.Generator) -> Iterator[np.ndarray]:
    """Índices embaralhados em minilotes; o último pode ser menor."""
    order = rng.permutation(n)
    for start in range(0, n, batch_size):
        yield order[start:start + batch_size]


def mse_grad(pred: np.ndarray, target: np.ndarray) -> np.ndarray:
    """∂MSE/∂pred para o MSE médio sobre todos os elementos."""
    return 2.0 * (pred - target) / pred.size


def fit(
    mlp: Mlp,
    X: np.ndarray,
    Y: np.ndarray,
    config: TrainConfig,
    log_every: Optional[int] = None
) -> FitResult:
    """
    Treina a rede por MSE em dados já normalizados.

    Args:
        mlp: Rede inicial
        X: Entradas (n, n_inputs)
        Y: Alvos (n, n_outputs) ou (n,) para saída única
        config: Hiperparâmetros
        log_every: Intervalo de épocas para log em DEBUG

    Returns:
        FitResult com a rede treinada e o MSE de treino por época

    Raises:
        DatasetError: Se não houver dados
        TrainingDivergedError: Se a perda ou o gradiente deixar de ser finito
    """
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None]
    if X.shape[0] == 0:
        raise DatasetError("Treinamento sem amostras")
    if X.shape[0] != Y.shape[0]:
        raise SchemaError(f"{X.shape[0]} entradas para {Y.shape[0]} alvos")

    rng = np.random.default_rng(config.seed)
    params = mlp.parameters()
    state = AdamState.zeros_like(params)
    history: List[float] = []

    for epoch in range(config.epochs):
        lr = config.learning_rate(epoch)
        for idx in iterate_minibatches(X.shape[0], config.minibatch_size, rng):
            xb, yb = X[idx], Y[idx]
            pred = forward(mlp, xb)
            grads, _ = backward(mlp, xb, mse_grad(pred, yb))
            try:
                params, state = adam_step(params, grads.as_list(), state, lr)
            except TrainingDivergedError as e:
                raise TrainingDivergedError(str(e), epoch=epoch) from e
            mlp = mlp.with_parameters(params)

        if not mlp.all_finite():
            raise TrainingDivergedError("Parâmetros não finitos", epoch=epoch)
        epoch_loss = mse(forward(mlp, X), Y)
        if not np.isfinite(epoch_loss):
            raise TrainingDivergedError("Perda de treino não finita", epoch=epoch)
        history.append(epoch_loss)

        if log_every and (epoch + 1) % log_every == 0:
            logger.debug(f"Época {epoch + 1}/{config.epochs}: MSE={epoch_loss:.6g}, lr={lr:.3g}")

    return FitResult(mlp=mlp, history=history)
