"""
Otimizador Adam com correção de viés.

A atualização é funcional: adam_step devolve novos parâmetros e um novo
estado, sem alterar os recebidos.
"""

from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from src.utils.errors import SchemaError, TrainingDivergedError


@dataclass(frozen=True)
class AdamState:
    """
    Estado do Adam.

    Attributes:
        m: Acumuladores de primeiro momento
        v: Acumuladores de segundo momento
        step: Número de passos já dados
        beta1, beta2, eps: Constantes do método
    """

    m: Tuple[np.ndarray, ...]
    v: Tuple[np.ndarray, ...]
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros_like(
        cls,
        params: Sequence[np.ndarray],
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8
    ) -> "AdamState":
        zeros = tuple(np.zeros_like(p, dtype=float) for p in params)
        return cls(m=zeros, v=tuple(np.zeros_like(p, dtype=float) for p in params),
                   step=0, beta1=beta1, beta2=beta2, eps=eps)


def adam_step(
    params: Sequence[np.ndarray],
    grads: Sequence[np.ndarray],
    state: AdamState,
    lr: float
) -> Tuple[List[np.ndarray], AdamState]:
    """
    Um passo do Adam.

    Args:
        params: Parâmetros atuais
        grads: Gradientes com os mesmos formatos
        state: Estado do otimizador
        lr: Taxa de aprendizado

    Returns:
        Tupla (novos parâmetros, novo estado)

    Raises:
        SchemaError: Se os formatos não coincidirem
        TrainingDivergedError: Se algum gradiente não for finito
    """
    if len(params) != len(grads) or len(params) != len(state.m):
        raise SchemaError("Parâmetros, gradientes e estado com tamanhos diferentes")
    for p, g in zip(params, grads):
        if p.shape != g.shape:
            raise SchemaError(f"Gradiente {g.shape} não corresponde ao parâmetro {p.shape}")
        if not np.all(np.isfinite(g)):
            raise TrainingDivergedError("Gradiente não finito no passo do Adam")

    step = state.step + 1
    b1, b2 = state.beta1, state.beta2
    correction1 = 1.0 - b1 ** step
    correction2 = 1.0 - b2 ** step

    new_params, new_m, new_v = [], [], []
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m = b1 * m + (1.0 - b1) * g
        v = b2 * v + (1.0 - b2) * g * g
        m_hat = m / correction1
        v_hat = v / correction2
        new_params.append(p - lr * m_hat / (np.sqrt(v_hat) + state.eps))
        new_m.append(m)
        new_v.append(v)

    new_state = AdamState(
        m=tuple(new_m), v=tuple(new_v), step=step,
        beta1=b1, beta2=b2, eps=state.eps,
    )
    return new_params, new_state
