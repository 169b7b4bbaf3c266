"""
Hierarquia de exceções do retorno.

Cada exceção também herda do builtin que o código lançaria de qualquer
forma (ValueError, RuntimeError ou IOError), então quem já captura esses
tipos continua funcionando.
"""

from typing import Optional


class RetornoError(Exception):
    """Raiz de todas as exceções do pacote."""


class InvalidMaterialError(RetornoError, ValueError):
    """Módulo de elasticidade ou especificação de material inválida."""


class GeometryError(RetornoError, ValueError):
    """Seção, forma ou disposição de camadas inválida."""


class NoPhysicalSolutionError(GeometryError):
    """O termo entre colchetes da equação cúbica de t0 não é positivo."""


class GeometryViolationError(GeometryError):
    """A espessura equivalente resultante viola t0 < 2R."""


class SchemaError(RetornoError, ValueError):
    """Colunas de features incompatíveis, ausentes ou constantes."""


class DatasetError(RetornoError, ValueError):
    """Dataset vazio, pequeno demais ou com valores não finitos."""


class TrainingDivergedError(RetornoError, RuntimeError):
    """Perda ou gradiente não finito durante o treinamento."""

    def __init__(self, message: str, epoch: Optional[int] = None):
        if epoch is not None:
            message = f"{message} (época {epoch})"
        super().__init__(message)
        self.epoch = epoch


class ArtifactIOError(RetornoError, IOError):
    """Falha de leitura ou escrita de um artefato em disco."""

    def __init__(self, message: str, path: str):
        super().__init__(f"{message}: {path}")
        self.path = path
