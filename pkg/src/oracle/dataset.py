"""
Construção, divisão e serialização dos datasets sintéticos.

Dataset1 reúne tubos de camada única (material de referência) e Dataset2
tubos bimetálicos rotulados pela integração exata das duas camadas, sem
passar pela teoria de seção equivalente. Assim o erro da teoria no regime
plástico fica presente nos dados.
"""

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, List, Literal, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field
from tqdm import tqdm

from src.oracle.bending import (
    GridConfig,
    MaterialSpec,
    ProcessFactorConfig,
    ProcessParams,
    springback_angle,
)
from src.oracle.sampling import lhs_sample
from src.section.equivalence import BmtShape, SingleShape
from src.utils.config import config_hash
from src.utils.errors import ArtifactIOError, DatasetError, SchemaError
from src.utils.logger import get_logger

logger = get_logger(__name__)

LABEL = "springback"
SINGLE_SHAPE_FEATURES = ["Do", "T"]
BMT_SHAPE_FEATURES = ["Do", "T", "Tr"]
PROCESS_FEATURES = ["RB", "alphaB", "vB", "omegaB"]
OPTIONAL_PROCESS_FEATURES = ["Lp_die", "gap", "friction"]

# Identificadores de fluxo de ruído por dataset
_NOISE_STREAM_SINGLE = 1
_NOISE_STREAM_BMT = 2


class SamplingBounds(BaseModel):
    """Limites de amostragem [lo, hi] de cada fator."""

    Do: Tuple[float, float] = (12.0, 30.0)
    T: Tuple[float, float] = (0.8, 2.5)
    Tr: Tuple[float, float] = (0.2, 0.8)
    RB: Tuple[float, float] = (40.0, 120.0)
    alphaB: Tuple[float, float] = (30.0, 120.0)
    vB: Tuple[float, float] = (5.0, 20.0)
    omegaB: Tuple[float, float] = (0.2, 1.0)
    Lp_die: Tuple[float, float] = (0.0, 50.0)
    gap: Tuple[float, float] = (0.0, 0.5)
    friction: Tuple[float, float] = (0.05, 0.3)

    def for_features(self, names: Sequence[str]) -> List[Tuple[float, float]]:
        return [tuple(getattr(self, name)) for name in names]

    def midpoint(self, name: str) -> float:
        lo, hi = getattr(self, name)
        return 0.5 * (lo + hi)


class GeneratorConfig(BaseModel):
    """Configuração do gerador de dados sintéticos."""

    seed: int = 2023
    n1: int = 600
    n2: int = 80
    outer_material: MaterialSpec = MaterialSpec(E=80700.0, sigma_y=150.0, Et=500.0)
    inner_material: MaterialSpec = MaterialSpec(E=110000.0, sigma_y=200.0, Et=1000.0)
    bounds: SamplingBounds = SamplingBounds()
    noise_sigma: float = Field(default=0.05, ge=0.0)
    c_v: float = 0.02
    c_omega: float = 0.01
    grid: GridConfig = GridConfig()
    integration: Literal["polar", "strip"] = "polar"
    include_optional_features: bool = False
    invert_tr: bool = False

    @property
    def materials(self) -> Tuple[MaterialSpec, MaterialSpec]:
        return self.outer_material, self.inner_material

    @property
    def lambda2(self) -> float:
        return self.inner_material.E / self.outer_material.E

    def process_factor(self) -> ProcessFactorConfig:
        """Fator g com referências nos pontos médios dos limites de vB e ωB."""
        return ProcessFactorConfig(
            v_ref=self.bounds.midpoint("vB"),
            omega_ref=self.bounds.midpoint("omegaB"),
            c_v=self.c_v,
            c_omega=self.c_omega,
        )

    def process_features(self) -> List[str]:
        extra = OPTIONAL_PROCESS_FEATURES if self.include_optional_features else []
        return PROCESS_FEATURES + extra


@dataclass(frozen=True)
class Sample:
    """Uma amostra rotulada: features nomeadas e ângulo de retorno (graus)."""

    features: Dict[str, float]
    label: float


@dataclass
class Dataset:
    """
    Conjunto de amostras com esquema comum.

    Attributes:
        features: Matriz (n, d) na ordem de `schema`
        labels: Vetor (n,) com o retorno elástico em graus
        schema: Nomes das features
        provenance: Hash de configuração, semente e índices de divisão
    """

    features: np.ndarray
    labels: np.ndarray
    schema: List[str]
    provenance: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.features = np.atleast_2d(np.asarray(self.features, dtype=float))
        self.labels = np.asarray(self.labels, dtype=float).reshape(-1)
        if self.features.size == 0 and self.labels.size == 0:
            self.features = self.features.reshape(0, len(self.schema))
        if self.features.shape != (self.labels.size, len(self.schema)):
            raise SchemaError(
                f"Formato inconsistente: features {self.features.shape}, "
                f"rótulos {self.labels.shape}, esquema {self.schema}"
            )
        if not (np.all(np.isfinite(self.features)) and np.all(np.isfinite(self.labels))):
            raise DatasetError("Dataset contém NaN ou Inf")

    def __len__(self) -> int:
        return self.labels.size

    @property
    def samples(self) -> List[Sample]:
        return [
            Sample(features=dict(zip(self.schema, row.tolist())), label=float(label))
            for row, label in zip(self.features, self.labels)
        ]

    def columns(self, names: Sequence[str]) -> np.ndarray:
        """Submatriz com as colunas pedidas, na ordem pedida."""
        missing = [name for name in names if name not in self.schema]
        if missing:
            raise SchemaError(f"Features ausentes no dataset: {missing}")
        return self.features[:, [self.schema.index(name) for name in names]]

    def subset(self, indices: Sequence[int], **provenance: Any) -> "Dataset":
        indices = np.asarray(indices, dtype=int)
        return Dataset(
            features=self.features[indices],
            labels=self.labels[indices],
            schema=list(self.schema),
            provenance={**self.provenance, **provenance},
        )

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(self.features, columns=self.schema)
        frame[LABEL] = self.labels
        return frame


def save_dataset_csv(dataset: Dataset, path: str) -> str:
    """
    Salva o dataset em CSV (UTF-8, cabeçalho, 9 algarismos significativos).

    Raises:
        ArtifactIOError: Em falhas de escrita
    """
    try:
        directory = os.path.dirname(path)
        if directory:
            os.makedirs(directory, exist_ok=True)
        dataset.to_frame().to_csv(
            path, index=False, float_format="%.9g", lineterminator="\n", encoding="utf-8"
        )
    except OSError as e:
        raise ArtifactIOError(f"Falha ao salvar dataset ({e})", path) from e
    logger.info(f"Dataset com {len(dataset)} amostras salvo em {path}")
    return path


def load_dataset_csv(path: str) -> Dataset:
    """
    Carrega um dataset salvo por save_dataset_csv.

    Raises:
        ArtifactIOError: Se o arquivo não puder ser lido
        SchemaError: Se a coluna de rótulo estiver ausente
    """
    try:
        frame = pd.read_csv(path, encoding="utf-8")
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise ArtifactIOError(f"Falha ao ler dataset ({e})", path) from e
    if LABEL not in frame.columns:
        raise SchemaError(f"Coluna '{LABEL}' ausente em {path}")
    schema = [column for column in frame.columns if column != LABEL]
    return Dataset(
        features=frame[schema].to_numpy(dtype=float),
        labels=frame[LABEL].to_numpy(dtype=float),
        schema=schema,
        provenance={"source": os.path.abspath(path)},
    )


def _label_row(args: Tuple) -> float:
    """Rotula uma linha; função de módulo para poder ir a outro processo."""
    row, schema, config, stream, index = args
    values = dict(zip(schema, row))
    if "Tr" in values:
        shape = BmtShape(Do=values["Do"], T=values["T"], Tr=values["Tr"])
    else:
        shape = SingleShape(Do_eq=values["Do"], T_eq=values["T"])
    process = ProcessParams(
        RB=values["RB"],
        alphaB=values["alphaB"],
        vB=values["vB"],
        omegaB=values["omegaB"],
        Lp_die=values.get("Lp_die"),
        gap=values.get("gap"),
        friction=values.get("friction"),
    )
    return springback_angle(
        shape,
        process,
        config.materials,
        noise_sigma=config.noise_sigma,
        # Fluxo próprio por amostra: saída idêntica em paralelo ou em série
        rng_seed=(config.seed + index, stream),
        process_factor=config.process_factor(),
        grid=config.grid,
        integration=config.integration,
        invert_tr=config.invert_tr,
    )


def _build_dataset(
    config: GeneratorConfig,
    n: int,
    schema: List[str],
    lhs_seed: int,
    stream: int,
    name: str,
    jobs: int,
    show_progress: bool
) -> Dataset:
    if n < 1:
        raise DatasetError(f"{name}: número de amostras deve ser >= 1 (n={n})")

    points = lhs_sample(n, config.bounds.for_features(schema), seed=lhs_seed)
    tasks = [(row.tolist(), schema, config, stream, i) for i, row in enumerate(points)]

    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as executor:
            labels = list(tqdm(
                executor.map(_label_row, tasks, chunksize=16),
                total=n, desc=name, disable=not show_progress,
            ))
    else:
        labels = [_label_row(task) for task in tqdm(tasks, desc=name, disable=not show_progress)]

    return Dataset(
        features=points,
        labels=np.asarray(labels),
        schema=list(schema),
        provenance={
            "name": name,
            "config_hash": config_hash(config.model_dump(mode="json")),
            "seed": config.seed,
        },
    )


def generate_datasets(
    config: Optional[GeneratorConfig] = None,
    out_dir: Optional[str] = None,
    jobs: int = 1,
    show_progress: bool = False
) -> Tuple[Dataset, Dataset]:
    """
    Gera Dataset1 (camada única) e Dataset2 (bimetálico).

    Args:
        config: Configuração do gerador (padrões se None)
        out_dir: Diretório para dataset1.csv e dataset2.csv (opcional)
        jobs: Processos para rotulagem paralela
        show_progress: Exibe barras de progresso

    Returns:
        Tupla (dataset1, dataset2)

    Raises:
        DatasetError: Se n1 ou n2 for menor que 1
        ArtifactIOError: Em falhas de escrita
    """
    config = config or GeneratorConfig()
    process = config.process_features()

    logger.info(f"Gerando datasets: n1={config.n1}, n2={config.n2}, semente={config.seed}")
    dataset1 = _build_dataset(
        config, config.n1, SINGLE_SHAPE_FEATURES + process, config.seed,
        _NOISE_STREAM_SINGLE, "dataset1", jobs, show_progress,
    )
    dataset2 = _build_dataset(
        config, config.n2, BMT_SHAPE_FEATURES + process, config.seed + 1,
        _NOISE_STREAM_BMT, "dataset2", jobs, show_progress,
    )

    if out_dir:
        save_dataset_csv(dataset1, os.path.join(out_dir, "dataset1.csv"))
        save_dataset_csv(dataset2, os.path.join(out_dir, "dataset2.csv"))

    return dataset1, dataset2


def split_dataset(dataset: Dataset, train_frac: float = 0.8, seed: int = 0) -> Tuple[Dataset, Dataset]:
    """
    Divide o dataset em treino e teste após embaralhamento com semente.

    O treino recebe ceil(n·train_frac) amostras e o teste o restante.

    Raises:
        ValueError: Se train_frac estiver fora de (0, 1)
        DatasetError: Se o teste ficar vazio
    """
    if not 0.0 < train_frac < 1.0:
        raise ValueError(f"train_frac deve estar em (0, 1) (recebido {train_frac})")
    n = len(dataset)
    # Folga para 0.8·n não virar n·0.8 + ε no ceil
    n_train = math.ceil(n * train_frac - 1e-9)
    if n_train < 1 or n_train >= n:
        raise DatasetError(f"Dataset com {n} amostras não gera treino e teste não vazios")

    order = np.random.default_rng(seed).permutation(n)
    train_idx = np.sort(order[:n_train])
    test_idx = np.sort(order[n_train:])
    split_info = {"split_seed": seed, "test_indices": test_idx.tolist()}
    return (
        dataset.subset(train_idx, role="train", **split_info),
        dataset.subset(test_idx, role="test", **split_info),
    )
