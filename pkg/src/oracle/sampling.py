"""
Amostragem por hipercubo latino (LHS).

Cada dimensão é dividida em n estratos de mesma largura; cada estrato
recebe exatamente um ponto, posicionado uniformemente dentro dele, e a
atribuição de estratos é uma permutação independente por dimensão.
"""

from typing import Optional, Sequence, Tuple

import numpy as np

from src.utils.errors import GeometryError


def lhs_sample(
    n: int,
    bounds: Sequence[Tuple[float, float]],
    seed: Optional[int] = None,
    rng: Optional[np.random.Generator] = None
) -> np.ndarray:
    """
    Gera n pontos por hipercubo latino.

    Args:
        n: Número de pontos (>= 1)
        bounds: Limites [lo, hi] por dimensão
        seed: Semente do gerador (ignorada se rng for fornecido)
        rng: Gerador numpy já inicializado

    Returns:
        Matriz (n, d) de pontos

    Raises:
        GeometryError: Se n < 1 ou algum limite for inválido
    """
    if n < 1:
        raise GeometryError(f"Número de amostras deve ser >= 1 (n={n})")
    if len(bounds) == 0:
        raise GeometryError("Nenhuma dimensão informada")

    bounds_arr = np.asarray(bounds, dtype=float)
    if bounds_arr.ndim != 2 or bounds_arr.shape[1] != 2:
        raise GeometryError(f"Limites devem ter formato (d, 2), recebido {bounds_arr.shape}")
    lo, hi = bounds_arr[:, 0], bounds_arr[:, 1]
    if not np.all(np.isfinite(bounds_arr)) or np.any(lo >= hi):
        raise GeometryError(f"Limites inválidos: {bounds_arr.tolist()}")

    rng = rng if rng is not None else np.random.default_rng(seed)
    d = bounds_arr.shape[0]

    unit = np.empty((n, d))
    for j in range(d):
        strata = rng.permutation(n)
        unit[:, j] = (strata + rng.random(n)) / n

    return lo + unit * (hi - lo)


def stratum_counts(points: np.ndarray, bounds: Sequence[Tuple[float, float]]) -> np.ndarray:
    """
    Contagem de pontos por estrato em cada dimensão.

    Returns:
        Matriz (d, n) com a contagem de cada estrato
    """
    points = np.atleast_2d(points)
    n, d = points.shape
    counts = np.zeros((d, n), dtype=int)
    for j, (lo, hi) in enumerate(bounds):
        idx = np.floor((points[:, j] - lo) / (hi - lo) * n).astype(int)
        np.add.at(counts[j], np.clip(idx, 0, n - 1), 1)
    return counts
