"""
Normalização de features ajustada apenas no conjunto de treino.

O modo padrão é min-max para [0, 1]; valores fora da faixa de treino são
mapeados para fora de [0, 1] sem recorte.
"""

from dataclasses import dataclass
from typing import Any, Dict, List, Literal, Sequence

import numpy as np

from src.utils.errors import SchemaError


@dataclass(frozen=True)
class Normalizer:
    """
    Escala afim por coluna: x_norm = (x - offset) / scale.

    Attributes:
        columns: Nomes das colunas
        offset: Mínimo (minmax) ou média (standard) por coluna
        scale: Amplitude (minmax) ou desvio padrão (standard) por coluna
        mode: "minmax" ou "standard"
    """

    columns: List[str]
    offset: np.ndarray
    scale: np.ndarray
    mode: Literal["minmax", "standard"] = "minmax"

    def apply(self, x: np.ndarray) -> np.ndarray:
        return (np.asarray(x, dtype=float) - self.offset) / self.scale

    def invert(self, x_norm: np.ndarray) -> np.ndarray:
        return np.asarray(x_norm, dtype=float) * self.scale + self.offset

    def select(self, names: Sequence[str]) -> "Normalizer":
        """Normalizador restrito às colunas dadas, na ordem dada."""
        missing = [name for name in names if name not in self.columns]
        if missing:
            raise SchemaError(f"Colunas ausentes no normalizador: {missing}")
        idx = [self.columns.index(name) for name in names]
        return Normalizer(list(names), self.offset[idx].copy(), self.scale[idx].copy(), self.mode)

    def concat(self, other: "Normalizer") -> "Normalizer":
        if other.mode != self.mode:
            raise SchemaError("Normalizadores com modos diferentes")
        return Normalizer(
            self.columns + other.columns,
            np.concatenate([self.offset, other.offset]),
            np.concatenate([self.scale, other.scale]),
            self.mode,
        )

    def out_of_range(self, x: np.ndarray) -> np.ndarray:
        """Máscara por linha de valores fora de [0, 1] após a normalização."""
        if self.mode != "minmax":
            return np.zeros(np.atleast_2d(x).shape[0], dtype=bool)
        z = np.atleast_2d(self.apply(x))
        return np.any((z < 0.0) | (z > 1.0), axis=1)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "columns": list(self.columns),
            "offset": self.offset.tolist(),
            "scale": self.scale.tolist(),
            "mode": self.mode,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "Normalizer":
        return cls(
            columns=list(data["columns"]),
            offset=np.asarray(data["offset"], dtype=float),
            scale=np.asarray(data["scale"], dtype=float),
            mode=data.get("mode", "minmax"),
        )


def fit_normalizer(
    data: np.ndarray,
    columns: Sequence[str],
    mode: Literal["minmax", "standard"] = "minmax"
) -> Normalizer:
    """
    Ajusta um normalizador às colunas de `data`.

    Args:
        data: Matriz (n, d) ou vetor (n,) para d = 1
        columns: Nomes das d colunas
        mode: "minmax" (padrão) ou "standard"

    Returns:
        Normalizer ajustado

    Raises:
        SchemaError: Se uma coluna for constante ou o número de nomes não bater
    """
    data = np.asarray(data, dtype=float)
    if data.ndim == 1:
        data = data[:, None]
    if data.shape[1] != len(columns):
        raise SchemaError(f"{data.shape[1]} colunas de dados para {len(columns)} nomes")

    for j, name in enumerate(columns):
        if np.unique(data[:, j]).size < 2:
            raise SchemaError(f"Coluna constante não pode ser normalizada: {name}")

    if mode == "minmax":
        offset = data.min(axis=0)
        scale = data.max(axis=0) - offset
    elif mode == "standard":
        offset = data.mean(axis=0)
        scale = data.std(axis=0)
    else:
        raise SchemaError(f"Modo de normalização desconhecido: {mode}")

    return Normalizer(list(columns), offset, scale, mode)


def normalizer_from_bounds(columns: Sequence[str], bounds: Sequence[Sequence[float]]) -> Normalizer:
    """
    Normalizador min-max definido diretamente por limites [lo, hi].

    Raises:
        SchemaError: Se algum limite tiver lo >= hi
    """
    bounds_arr = np.asarray(bounds, dtype=float)
    if bounds_arr.shape != (len(columns), 2) or np.any(bounds_arr[:, 0] >= bounds_arr[:, 1]):
        raise SchemaError(f"Limites inválidos para normalizador: {bounds_arr.tolist()}")
    return Normalizer(
        list(columns),
        bounds_arr[:, 0].copy(),
        bounds_arr[:, 1] - bounds_arr[:, 0],
        "minmax",
    )
