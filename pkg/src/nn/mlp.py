"""
Rede densa mínima (MLP) com retropropagação exata.

Os pesos de cada camada têm formato (fan_in, fan_out) e a camada calcula
z = x @ W + b. As camadas ocultas usam a ativação configurada e a camada de
saída é linear. `backward` devolve também o gradiente em relação à entrada,
que é o que permite encadear SP-NET ∘ ES-NET.
"""

from dataclasses import dataclass
from typing import Callable, Dict, List, Sequence, Tuple

import numpy as np

from src.utils.errors import SchemaError


def _sigmoid(z: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * z))


# nome -> (função, derivada expressa em termos de (z, a))
ACTIVATIONS: Dict[str, Tuple[Callable, Callable]] = {
    "tanh": (np.tanh, lambda z, a: 1.0 - a * a),
    "sigmoid": (_sigmoid, lambda z, a: a * (1.0 - a)),
    "relu": (lambda z: np.maximum(z, 0.0), lambda z, a: (z > 0).astype(float)),
    "linear": (lambda z: z, lambda z, a: np.ones_like(z)),
}


@dataclass(frozen=True)
class Mlp:
    """
    Perceptron multicamadas imutável.

    Attributes:
        layer_dims: (entrada, ocultas..., saída)
        weights: Matrizes (fan_in, fan_out) por camada
        biases: Vetores (fan_out,) por camada
        hidden_activation: Nome da ativação oculta
        output_activation: Nome da ativação de saída (linear)
    """

    layer_dims: Tuple[int, ...]
    weights: Tuple[np.ndarray, ...]
    biases: Tuple[np.ndarray, ...]
    hidden_activation: str = "tanh"
    output_activation: str = "linear"

    def __post_init__(self) -> None:
        if len(self.layer_dims) < 2:
            raise SchemaError(f"MLP exige ao menos duas dimensões ({self.layer_dims})")
        if len(self.weights) != len(self.layer_dims) - 1 or len(self.biases) != len(self.weights):
            raise SchemaError("Número de camadas inconsistente com layer_dims")
        for k, (W, b) in enumerate(zip(self.weights, self.biases)):
            expected = (self.layer_dims[k], self.layer_dims[k + 1])
            if W.shape != expected or b.shape != (expected[1],):
                raise SchemaError(
                    f"Camada {k}: pesos {W.shape} e bias {b.shape}, esperado {expected}"
                )
        for name in (self.hidden_activation, self.output_activation):
            if name not in ACTIVATIONS:
                raise SchemaError(f"Ativação desconhecida: {name}")

    @property
    def n_inputs(self) -> int:
        return self.layer_dims[0]

    @property
    def n_outputs(self) -> int:
        return self.layer_dims[-1]

    def parameters(self) -> List[np.ndarray]:
        """Parâmetros na ordem [W0, b0, W1, b1, ...]."""
        params: List[np.ndarray] = []
        for W, b in zip(self.weights, self.biases):
            params.extend((W, b))
        return params

    def with_parameters(self, params: Sequence[np.ndarray]) -> "Mlp":
        """Nova rede com os parâmetros dados (mesma ordem de `parameters`)."""
        return Mlp(
            layer_dims=self.layer_dims,
            weights=tuple(np.array(p, dtype=float) for p in params[0::2]),
            biases=tuple(np.array(p, dtype=float) for p in params[1::2]),
            hidden_activation=self.hidden_activation,
            output_activation=self.output_activation,
        )

    def all_finite(self) -> bool:
        return all(np.all(np.isfinite(p)) for p in self.parameters())


@dataclass(frozen=True)
class Gradients:
    """Gradientes dos parâmetros, com o mesmo formato de Mlp."""

    weights: Tuple[np.ndarray, ...]
    biases: Tuple[np.ndarray, ...]

    def as_list(self) -> List[np.ndarray]:
        grads: List[np.ndarray] = []
        for gW, gb in zip(self.weights, self.biases):
            grads.extend((gW, gb))
        return grads

    def scaled(self, factor: float) -> "Gradients":
        return Gradients(
            weights=tuple(factor * g for g in self.weights),
            biases=tuple(factor * g for g in self.biases),
        )


def init_mlp(
    layer_dims: Sequence[int],
    hidden_activation: str = "tanh",
    seed: int = 0
) -> Mlp:
    """
    Inicializa uma MLP com Glorot uniforme e bias zero.

    Args:
        layer_dims: (entrada, ocultas..., saída), todas positivas
        hidden_activation: "tanh", "sigmoid" ou "relu"
        seed: Semente do gerador

    Returns:
        Mlp determinística para a semente dada

    Raises:
        SchemaError: Se houver menos de duas dimensões ou alguma não positiva
    """
    dims = tuple(int(d) for d in layer_dims)
    if len(dims) < 2 or any(d <= 0 for d in dims):
        raise SchemaError(f"Dimensões inválidas para MLP: {list(layer_dims)}")

    rng = np.random.default_rng(seed)
    weights = []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
    biases = [np.zeros(fan_out) for fan_out in dims[1:]]
    return Mlp(dims, tuple(weights), tuple(biases), hidden_activation=hidden_activation)


def _as_batch(mlp: Mlp, x: np.ndarray) -> Tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    batch = x[None, :] if single else x
    if batch.ndim != 2 or batch.shape[1] != mlp.n_inputs:
        raise SchemaError(f"Entrada com formato {x.shape}, esperado (..., {mlp.n_inputs})")
    if not np.all(np.isfinite(batch)):
        raise ValueError("Entrada contém valores não finitos")
    return batch, single


def forward_with_cache(mlp: Mlp, X: np.ndarray) -> Tuple[np.ndarray, List[Tuple[np.ndarray, np.ndarray, np.ndarray]]]:
    """
    Passo direto em lote guardando (entrada, z, ativação) de cada camada.

    Args:
        mlp: Rede
        X: Matriz (B, n_inputs)
    """
    cache = []
    a = X
    last = len(mlp.weights) - 1
    for k, (W, b) in enumerate(zip(mlp.weights, mlp.biases)):
        z = a @ W + b
        act_name = mlp.output_activation if k == last else mlp.hidden_activation
        out = ACTIVATIONS[act_name][0](z)
        cache.append((a, z, out))
        a = out
    return a, cache


def forward(mlp: Mlp, x: np.ndarray) -> np.ndarray:
    """
    Avalia a rede para um vetor (n_inputs,) ou lote (B, n_inputs).

    Raises:
        SchemaError: Se a dimensão da entrada não corresponder
    """
    batch, single = _as_batch(mlp, x)
    y, _ = forward_with_cache(mlp, batch)
    return y[0] if single else y


def backward(mlp: Mlp, x: np.ndarray, upstream_grad: np.ndarray) -> Tuple[Gradients, np.ndarray]:
    """
    Gradientes exatos por modo reverso.

    Os gradientes de parâmetros são somados sobre o lote; quem chama inclui
    o fator 1/B da perda em `upstream_grad`.

    Args:
        mlp: Rede
        x: Entrada (n_inputs,) ou (B, n_inputs)
        upstream_grad: ∂L/∂y com o mesmo formato da saída

    Returns:
        Tupla (gradientes dos parâmetros, ∂L/∂x com o formato de x)

    Raises:
        SchemaError: Se os formatos forem inconsistentes
    """
    batch, single = _as_batch(mlp, x)
    delta = np.asarray(upstream_grad, dtype=float)
    if single:
        delta = delta[None, :]
    if delta.shape != (batch.shape[0], mlp.n_outputs):
        raise SchemaError(
            f"Gradiente de saída com formato {np.shape(upstream_grad)}, "
            f"esperado ({batch.shape[0]}, {mlp.n_outputs})"
        )

    _, cache = forward_with_cache(mlp, batch)
    last = len(mlp.weights) - 1
    grad_w: List[np.ndarray] = [np.empty(0)] * len(mlp.weights)
    grad_b: List[np.ndarray] = [np.empty(0)] * len(mlp.weights)

    for k in range(last, -1, -1):
        a_in, z, a_out = cache[k]
        act_name = mlp.output_activation if k == last else mlp.hidden_activation
        dz = delta * ACTIVATIONS[act_name][1](z, a_out)
        grad_w[k] = a_in.T @ dz
        grad_b[k] = dz.sum(axis=0)
        delta = dz @ mlp.weights[k].T

    input_grad = delta[0] if single else delta
    return Gradients(tuple(grad_w), tuple(grad_b)), input_grad
