"""
Módulo de configuração do retorno.

Este módulo carrega a configuração de experimento a partir dos padrões,
do arquivo .env, de um arquivo JSON e de variáveis de ambiente, nessa ordem
de precedência crescente, e a valida com os modelos pydantic do harness.
"""

import hashlib
import json
import os
from pathlib import Path
from typing import Any, Dict, Optional

# Importação condicional para python-dotenv
try:
    from dotenv import load_dotenv
    HAS_DOTENV = True
except ImportError:
    HAS_DOTENV = False

from src.utils.errors import ArtifactIOError
from src.utils.logger import get_logger

logger = get_logger(__name__)

# Variável de ambiente -> (caminho na configuração, conversor)
ENV_MAPPINGS = {
    "RETORNO_MASTER_SEED": (("master_seed",), int),
    "RETORNO_N_RUNS": (("n_runs",), int),
    "RETORNO_JOBS": (("jobs",), int),
    "RETORNO_NOISE_SIGMA": (("generator", "noise_sigma"), float),
    "RETORNO_OUTPUT_DIR": (("output_dir",), str),
}


def canonical_json(obj: Any) -> str:
    """JSON canônico: chaves ordenadas e separadores compactos."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def config_hash(obj: Any) -> str:
    """Hash SHA-256 do JSON canônico de uma configuração."""
    return hashlib.sha256(canonical_json(obj).encode("utf-8")).hexdigest()


def load_config_dict(config_path: Optional[str] = None) -> Dict[str, Any]:
    """
    Carrega a configuração bruta (dicionário) já mesclada.

    Args:
        config_path: Caminho opcional para arquivo de configuração JSON

    Returns:
        Dicionário com padrões + arquivo + ambiente
    """
    from src.config.defaults import get_default_config

    config = get_default_config()

    _load_environment_variables()

    if config_path:
        _load_config_file(config_path, config)

    _override_with_env_vars(config)

    logger.debug(f"Configuração carregada: {json.dumps(config, indent=2)}")
    return config


def load_config(config_path: Optional[str] = None):
    """
    Carrega e valida a configuração de experimento.

    Args:
        config_path: Caminho opcional para arquivo de configuração JSON

    Returns:
        ExperimentConfig validado

    Raises:
        ArtifactIOError: Se o arquivo JSON não puder ser lido ou interpretado
        pydantic.ValidationError: Se algum valor violar o esquema
    """
    # Importação tardia: o harness depende deste módulo
    from src.harness.experiment import ExperimentConfig

    return ExperimentConfig.model_validate(load_config_dict(config_path))


def _load_environment_variables() -> None:
    """Carrega variáveis de ambiente do arquivo .env se disponível."""
    if not HAS_DOTENV:
        logger.debug("python-dotenv não está instalado. Variáveis de .env não serão carregadas.")
        return

    dot_env = Path(".env")
    if not dot_env.exists():
        project_root = Path(__file__).parents[2]  # src/utils/ -> src/ -> raiz
        dot_env = project_root / ".env"

    if dot_env.exists():
        logger.debug(f"Carregando variáveis de ambiente de {dot_env}")
        load_dotenv(dotenv_path=dot_env)


def _load_config_file(config_path: str, config: Dict[str, Any]) -> None:
    """
    Carrega configurações de um arquivo JSON sobre o dicionário dado.

    Raises:
        ArtifactIOError: Se o arquivo não existir ou não for JSON válido
    """
    try:
        with open(config_path, "r", encoding="utf-8") as f:
            file_config = json.load(f)
    except (json.JSONDecodeError, OSError) as e:
        raise ArtifactIOError(f"Erro ao carregar arquivo de configuração ({e})", config_path) from e

    if not isinstance(file_config, dict):
        raise ArtifactIOError("Arquivo de configuração deve conter um objeto JSON", config_path)

    _recursive_update(config, file_config)
    logger.debug(f"Configurações carregadas de {config_path}")


def _override_with_env_vars(config: Dict[str, Any]) -> None:
    """Sobrescreve configurações com variáveis de ambiente."""
    for env_var, (path, type_func) in ENV_MAPPINGS.items():
        if env_var not in os.environ:
            continue
        try:
            value = type_func(os.environ[env_var])
        except ValueError as e:
            logger.warning(f"Erro ao processar variável de ambiente {env_var}: {e}")
            continue

        target = config
        for key in path[:-1]:
            target = target.setdefault(key, {})
        target[path[-1]] = value
        logger.debug(f"Variável de ambiente {env_var} definida: {value}")


def _recursive_update(target: Dict[str, Any], source: Dict[str, Any]) -> None:
    """
    Atualiza recursivamente um dicionário com valores de outro.

    Args:
        target: Dicionário alvo a ser atualizado
        source: Dicionário fonte com os valores a serem copiados
    """
    for key, value in source.items():
        if key in target and isinstance(target[key], dict) and isinstance(value, dict):
            _recursive_update(target[key], value)
        else:
            target[key] = value
