"""
Persistência de redes em JSON.

O codificador JSON usa a representação decimal mais curta que recupera o
mesmo double, então salvar e carregar reproduz os parâmetros bit a bit.
"""

import json
import os
from typing import Any, Dict

import numpy as np

from src.nn.mlp import Mlp
from src.utils.errors import ArtifactIOError, SchemaError


def mlp_to_dict(mlp: Mlp) -> Dict[str, Any]:
    """Documento JSON-serializável de uma MLP (pesos em ordem de linhas)."""
    return {
        "layer_dims": list(mlp.layer_dims),
        "hidden_activation": mlp.hidden_activation,
        "output_activation": mlp.output_activation,
        "weights": [W.tolist() for W in mlp.weights],
        "biases": [b.tolist() for b in mlp.biases],
    }


def mlp_from_dict(data: Dict[str, Any]) -> Mlp:
    """
    Reconstrói uma MLP a partir de mlp_to_dict.

    Raises:
        SchemaError: Se o documento estiver incompleto
    """
    try:
        dims = tuple(int(d) for d in data["layer_dims"])
        weights = tuple(
            np.asarray(W, dtype=float).reshape(dims[k], dims[k + 1])
            for k, W in enumerate(data["weights"])
        )
        biases = tuple(np.asarray(b, dtype=float) for b in data["biases"])
    except (KeyError, ValueError, IndexError) as e:
        raise SchemaError(f"Documento de MLP inválido: {e}") from e
    return Mlp(
        layer_dims=dims,
        weights=weights,
        biases=biases,
        hidden_activation=data.get("hidden_activation", "tanh"),
        output_activation=data.get("output_activation", "linear"),
    )


def save_json(document: Dict[str, Any], path: str) -> str:
    """
    Grava um documento JSON com chaves ordenadas.

    Raises:
        ArtifactIOError: Em falhas de escrita
    """
    try:
        directory = os.path.dirname(path)
        if directory:
            os.makedirs(directory, exist_ok=True)
        with open(path, "w", encoding="utf-8") as f:
            json.dump(document, f, indent=2, sort_keys=True, ensure_ascii=False)
            f.write("\n")
    except OSError as e:
        raise ArtifactIOError(f"Falha ao salvar JSON ({e})", path) from e
    return path


def load_json(path: str) -> Dict[str, Any]:
    """
    Lê um documento JSON.

    Raises:
        ArtifactIOError: Se o arquivo não existir ou não for JSON válido
    """
    try:
        with open(path, "r", encoding="utf-8") as f:
            return json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise ArtifactIOError(f"Falha ao ler JSON ({e})", path) from e
