"""
Perda composta com peso dinâmico do segundo estágio.

L = z·L_p + (1 - z)·L_d, onde L_p mede a distância da saída implícita da
ES-NET à teoria de seção equivalente e L_d o erro de previsão do retorno.
O peso z é a massa da normal N(x_s^s, 1) no intervalo entre 2·x_s^s - f e
f, que vale erf(|d|/√2) com d = f - x_s^s; z é zerado quando todas as
dimensões estão dentro da tolerância δ. O peso é tratado como constante na
diferenciação.
"""

import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field
from scipy.special import erf

from src.nn.mlp import Gradients, backward, forward
from src.nn.optim import AdamState, adam_step
from src.nn.training import mse, mse_grad
from src.utils.errors import TrainingDivergedError


class CompositeLossConfig(BaseModel):
    """
    Configuração da perda composta.

    Attributes:
        gate_delta: Tolerância δ em unidades normalizadas; z = 0 se max|d| <= δ
        aggregation: Agregação de z entre as dimensões de saída
        freeze_sp: Congela a SP-NET no ajuste fino
        use_theory_loss: False desliga L_p (z ≡ 0), usado pela BL-NET
    """

    gate_delta: float = Field(default=0.05, ge=0.0)
    aggregation: str = Field(default="mean", pattern="^mean$")
    freeze_sp: bool = False
    use_theory_loss: bool = True


@dataclass(frozen=True)
class Stage2Batch:
    """
    Minilote normalizado do segundo estágio.

    Attributes:
        shape: Forma BMT (B, 3) na escala de entrada da ES-NET
        process: Features de processo (B, P) na escala da SP-NET
        label: Retorno (B, 1) na escala de rótulo da SP-NET
        theory: f_ES-NET(shape) (B, 2) na escala de saída da ES-NET
    """

    shape: np.ndarray
    process: np.ndarray
    label: np.ndarray
    theory: np.ndarray

    def __len__(self) -> int:
        return self.shape.shape[0]

    def take(self, idx: np.ndarray) -> "Stage2Batch":
        return Stage2Batch(self.shape[idx], self.process[idx], self.label[idx], self.theory[idx])


@dataclass(frozen=True)
class StepLoss:
    """Partes da perda de um passo: L_p, L_d, z e o total ponderado."""

    loss_p: float
    loss_d: float
    z: float

    @property
    def total(self) -> float:
        return self.z * self.loss_p + (1.0 - self.z) * self.loss_d


def dynamic_weight(
    x_implicit: np.ndarray,
    f_theory: np.ndarray,
    cfg: Optional[CompositeLossConfig] = None
) -> float:
    """
    Peso dinâmico z ∈ [0, 1].

    Para lotes (B, 2), d_j é o desvio absoluto médio no lote da dimensão j.

    Args:
        x_implicit: Saída implícita normalizada (2,) ou (B, 2)
        f_theory: Alvo teórico normalizado com o mesmo formato
        cfg: Configuração (δ)

    Returns:
        z = média_j erf(d_j/√2), ou 0 se max_j d_j <= δ

    Raises:
        ValueError: Se alguma entrada não for finita
    """
    cfg = cfg or CompositeLossConfig()
    x = np.atleast_2d(np.asarray(x_implicit, dtype=float))
    f = np.atleast_2d(np.asarray(f_theory, dtype=float))
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(f))):
        raise ValueError("Entradas não finitas no peso dinâmico")

    deviation = np.mean(np.abs(f - x), axis=0)
    if np.max(deviation) <= cfg.gate_delta:
        return 0.0
    return float(np.mean(erf(deviation / math.sqrt(2.0))))


def composite_loss_and_grads(
    pe,
    batch: Stage2Batch,
    cfg: CompositeLossConfig,
    z: Optional[float] = None
) -> Tuple[StepLoss, Gradients, Gradients]:
    """
    Perdas e gradientes da perda composta para um minilote.

    A ES-NET recebe ∇(z·L_p + (1-z)·L_d) e a SP-NET ∇((1-z)·L_d).

    Args:
        pe: PeNet
        batch: Minilote normalizado
        cfg: Configuração da perda
        z: Peso congelado; se None, é calculado pelo desvio do lote

    Returns:
        Tupla (perdas, gradientes da ES-NET, gradientes da SP-NET)
    """
    implicit = forward(pe.es.mlp, batch.shape)
    sp_input = np.hstack([implicit, batch.process])
    pred = forward(pe.sp.mlp, sp_input)

    loss_p = mse(implicit, batch.theory)
    loss_d = mse(pred, batch.label)
    if z is None:
        z = dynamic_weight(implicit, batch.theory, cfg) if cfg.use_theory_loss else 0.0

    sp_grads, sp_input_grad = backward(pe.sp.mlp, sp_input, (1.0 - z) * mse_grad(pred, batch.label))
    implicit_grad = sp_input_grad[:, :implicit.shape[1]] + z * mse_grad(implicit, batch.theory)
    es_grads, _ = backward(pe.es.mlp, batch.shape, implicit_grad)

    return StepLoss(loss_p=loss_p, loss_d=loss_d, z=z), es_grads, sp_grads


def composite_step(
    pe,
    batch: Stage2Batch,
    cfg: CompositeLossConfig,
    es_state: AdamState,
    sp_state: AdamState,
    lr: float
):
    """
    Um passo do Adam para as duas sub-redes com a perda composta.

    Returns:
        Tupla (nova PeNet, novo estado ES, novo estado SP, StepLoss)

    Raises:
        TrainingDivergedError: Se alguma perda não for finita
    """
    if len(batch) == 0:
        raise ValueError("Minilote vazio")

    losses, es_grads, sp_grads = composite_loss_and_grads(pe, batch, cfg)
    if not (np.isfinite(losses.loss_p) and np.isfinite(losses.loss_d)):
        raise TrainingDivergedError("Perda composta não finita")

    es_params, es_state = adam_step(pe.es.mlp.parameters(), es_grads.as_list(), es_state, lr)
    es = pe.es.with_mlp(pe.es.mlp.with_parameters(es_params))

    sp = pe.sp
    # Com z = 1 a SP-NET não recebe gradiente algum e não deve andar por momento
    if not cfg.freeze_sp and losses.z < 1.0:
        sp_params, sp_state = adam_step(pe.sp.mlp.parameters(), sp_grads.as_list(), sp_state, lr)
        sp = pe.sp.with_mlp(pe.sp.mlp.with_parameters(sp_params))

    return pe.with_subnets(es=es, sp=sp), es_state, sp_state, losses
