"""
Configuração do sistema de logging do retorno.

Este módulo implementa o logging formatado e colorido usado por todos os
módulos do pacote (motor de seção equivalente, oráculo, redes e harness).
"""

import logging
import os
import sys
from typing import Optional

# Importação condicional para colorlog
try:
    import colorlog
    HAS_COLORLOG = True
except ImportError:
    HAS_COLORLOG = False

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
DATE_FORMAT = "%Y-%m-%d %H:%M:%S"

# Nível forçado pela CLI (--log-level); tem precedência sobre o ambiente
_forced_level: Optional[str] = None


def _resolve_level(log_level: Optional[str]) -> int:
    """
    Resolve o nível numérico a partir do parâmetro ou do ambiente.

    Ordem de precedência: parâmetro explícito, nível forçado pela CLI,
    RETORNO_LOG_LEVEL, LOG_LEVEL e por fim INFO.
    """
    level = (
        log_level
        or _forced_level
        or os.environ.get("RETORNO_LOG_LEVEL")
        or os.environ.get("LOG_LEVEL")
        or "INFO"
    )
    return getattr(logging, level.upper(), logging.INFO)


def setup_logger(
    name: str = "retorno",
    log_level: Optional[str] = None,
    log_file: Optional[str] = None
) -> logging.Logger:
    """
    Configura e retorna um logger formatado, opcionalmente com cores.

    Args:
        name: Nome do logger
        log_level: Nível de log (DEBUG, INFO, WARNING, ERROR, CRITICAL)
        log_file: Caminho opcional para o arquivo de log

    Returns:
        Logger configurado
    """
    if not log_file:
        log_file = os.environ.get("RETORNO_LOG_FILE")

    logger = logging.getLogger(name)
    logger.setLevel(_resolve_level(log_level))
    logger.propagate = False

    # Remover handlers existentes para evitar duplicação
    if logger.handlers:
        logger.handlers.clear()

    if HAS_COLORLOG:
        formatter = colorlog.ColoredFormatter(
            "%(log_color)s" + LOG_FORMAT,
            datefmt=DATE_FORMAT,
            log_colors={
                "DEBUG": "cyan",
                "INFO": "green",
                "WARNING": "yellow",
                "ERROR": "red",
                "CRITICAL": "red,bg_white",
            }
        )
    else:
        formatter = logging.Formatter(LOG_FORMAT, datefmt=DATE_FORMAT)

    # Logs vão para stderr: stdout fica reservado para o JSON da CLI
    console_handler = logging.StreamHandler(sys.stderr)
    console_handler.setFormatter(formatter)
    logger.addHandler(console_handler)

    if log_file:
        log_dir = os.path.dirname(log_file)
        if log_dir:
            os.makedirs(log_dir, exist_ok=True)

        file_handler = logging.FileHandler(log_file, encoding="utf-8")
        file_handler.setFormatter(logging.Formatter(LOG_FORMAT, datefmt=DATE_FORMAT))
        logger.addHandler(file_handler)

    return logger


def get_logger(name: str = "retorno") -> logging.Logger:
    """
    Obtém um logger existente ou cria um novo se não existir.

    Args:
        name: Nome do logger

    Returns:
        Logger para o nome especificado
    """
    logger = logging.getLogger(name)

    if not logger.handlers:
        return setup_logger(name)

    return logger


def set_global_level(log_level: str) -> None:
    """
    Ajusta o nível de todos os loggers já criados pelo pacote.

    Usado pela CLI quando o usuário passa --log-level.

    Args:
        log_level: Nome do nível (DEBUG, INFO, ...)
    """
    global _forced_level
    _forced_level = log_level.upper()
    numeric_level = _resolve_level(None)

    for logger_name in list(logging.root.manager.loggerDict):
        if logger_name == "retorno" or logger_name.startswith("src"):
            logging.getLogger(logger_name).setLevel(numeric_level)
