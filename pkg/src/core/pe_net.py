"""
Sub-redes ES-NET e SP-NET, montagem da PE-NET e treinamento do primeiro estágio.

A ES-NET mapeia a forma bimetálica (Do, T, Tr) na forma equivalente de
camada única (Do_eq, T_eq); a SP-NET mapeia (Do, T, processo...) no ângulo
de retorno. A saída da ES-NET é expressa na mesma escala que as duas
primeiras entradas da SP-NET, de modo que a PE-NET é a composição direta
sp(concat(es(forma), processo)).
"""

from dataclasses import dataclass, field, replace
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from src.core.composite_loss import CompositeLossConfig
from src.nn.mlp import Mlp, forward, init_mlp
from src.nn.normalizer import Normalizer, fit_normalizer, normalizer_from_bounds
from src.nn.persistence import load_json, mlp_from_dict, mlp_to_dict, save_json
from src.nn.training import TrainConfig, fit, rmse
from src.oracle.dataset import (
    BMT_SHAPE_FEATURES,
    LABEL,
    SINGLE_SHAPE_FEATURES,
    Dataset,
    split_dataset,
)
from src.oracle.sampling import lhs_sample
from src.section.equivalence import BmtShape, equivalent_tube
from src.utils.errors import DatasetError, GeometryError, SchemaError
from src.utils.logger import get_logger

logger = get_logger(__name__)

HIDDEN_UNITS = 10
ES_DIMS = (len(BMT_SHAPE_FEATURES), HIDDEN_UNITS, len(SINGLE_SHAPE_FEATURES))
ES_OUTPUT_SCHEMA = ["Do_eq", "T_eq"]
FORMAT_VERSION = 1


@dataclass(frozen=True)
class EsNet:
    """
    Rede de seção equivalente [3, 10, 2].

    Attributes:
        mlp: Rede densa
        input_norm: Escala de (Do, T, Tr)
        output_norm: Escala de (Do, T) compartilhada com a entrada da SP-NET
    """

    mlp: Mlp
    input_norm: Normalizer
    output_norm: Normalizer

    def __post_init__(self) -> None:
        if tuple(self.mlp.layer_dims) != ES_DIMS:
            raise SchemaError(f"ES-NET exige dimensões {list(ES_DIMS)}, recebido {list(self.mlp.layer_dims)}")
        if self.input_norm.columns != BMT_SHAPE_FEATURES:
            raise SchemaError(f"Entrada da ES-NET deve ser {BMT_SHAPE_FEATURES}")
        if self.output_norm.columns != SINGLE_SHAPE_FEATURES:
            raise SchemaError(f"Saída da ES-NET deve estar na escala de {SINGLE_SHAPE_FEATURES}")

    def with_mlp(self, mlp: Mlp) -> "EsNet":
        return replace(self, mlp=mlp)

    def predict_shape(self, shapes: np.ndarray) -> np.ndarray:
        """Forma equivalente (Do_eq, T_eq) em mm para formas BMT em mm."""
        return self.output_norm.invert(forward(self.mlp, self.input_norm.apply(np.atleast_2d(shapes))))

    def rescaled(self, output_norm: Normalizer) -> "EsNet":
        """
        Mesma função em mm com saída expressa em outra escala.

        A troca de escala é afim e a camada de saída é linear, então ela é
        absorvida nos pesos e no bias da última camada.
        """
        if output_norm.columns != self.output_norm.columns:
            raise SchemaError(f"Escala de saída com colunas {output_norm.columns}")
        ratio = self.output_norm.scale / output_norm.scale
        shift = (self.output_norm.offset - output_norm.offset) / output_norm.scale
        weights = list(self.mlp.weights)
        biases = list(self.mlp.biases)
        weights[-1] = weights[-1] * ratio
        biases[-1] = biases[-1] * ratio + shift
        mlp = replace(self.mlp, weights=tuple(weights), biases=tuple(biases))
        return EsNet(mlp=mlp, input_norm=self.input_norm, output_norm=output_norm)


@dataclass(frozen=True)
class SpNet:
    """
    Rede de previsão do retorno [2 + P, 10, 1].

    Attributes:
        mlp: Rede densa
        input_norm: Escala de (Do, T, processo...)
        label_norm: Escala do ângulo de retorno
    """

    mlp: Mlp
    input_norm: Normalizer
    label_norm: Normalizer

    def __post_init__(self) -> None:
        n_process = len(self.input_norm.columns) - len(SINGLE_SHAPE_FEATURES)
        if self.input_norm.columns[:2] != SINGLE_SHAPE_FEATURES or n_process < 0:
            raise SchemaError(f"Entrada da SP-NET deve começar por {SINGLE_SHAPE_FEATURES}")
        expected = (2 + n_process, HIDDEN_UNITS, 1)
        if tuple(self.mlp.layer_dims) != expected:
            raise SchemaError(
                f"SP-NET com {n_process} features de processo exige {list(expected)}, "
                f"recebido {list(self.mlp.layer_dims)}"
            )
        if self.label_norm.columns != [LABEL]:
            raise SchemaError(f"Rótulo da SP-NET deve ser '{LABEL}'")

    @property
    def process_features(self) -> List[str]:
        return self.input_norm.columns[2:]

    @property
    def shape_norm(self) -> Normalizer:
        return self.input_norm.select(SINGLE_SHAPE_FEATURES)

    @property
    def process_norm(self) -> Normalizer:
        return self.input_norm.select(self.process_features)

    def with_mlp(self, mlp: Mlp) -> "SpNet":
        return replace(self, mlp=mlp)


@dataclass(frozen=True)
class PeNet:
    """
    PE-NET montada: ES-NET seguida da SP-NET.

    Attributes:
        es: Rede de seção equivalente
        sp: Rede de previsão
        lambda2: Razão de módulos usada pela teoria de referência
        loss_config: Configuração da perda composta
        invert_tr: Convenção de Tr da teoria de referência
        provenance: Sementes, hash de configuração e estágio
    """

    es: EsNet
    sp: SpNet
    lambda2: float
    loss_config: CompositeLossConfig = field(default_factory=CompositeLossConfig)
    invert_tr: bool = False
    provenance: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        sp_shape = self.sp.shape_norm
        same_scale = (
            np.array_equal(self.es.output_norm.offset, sp_shape.offset)
            and np.array_equal(self.es.output_norm.scale, sp_shape.scale)
        )
        if not same_scale:
            raise SchemaError("Saída da ES-NET e entrada da SP-NET usam escalas diferentes")
        if not self.lambda2 > 0:
            raise SchemaError(f"lambda2 deve ser positivo ({self.lambda2})")

    @property
    def input_schema(self) -> List[str]:
        return BMT_SHAPE_FEATURES + self.sp.process_features

    def with_subnets(self, es: Optional[EsNet] = None, sp: Optional[SpNet] = None) -> "PeNet":
        return replace(self, es=es or self.es, sp=sp or self.sp)

    def normalize_inputs(self, raw: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Divide (B, 3 + P) bruto em forma e processo normalizados."""
        raw = np.atleast_2d(np.asarray(raw, dtype=float))
        if raw.shape[1] != len(self.input_schema):
            raise SchemaError(f"Entrada com {raw.shape[1]} colunas, esperado {self.input_schema}")
        return self.es.input_norm.apply(raw[:, :3]), self.sp.process_norm.apply(raw[:, 3:])

    def theory_targets(self, shapes: np.ndarray) -> np.ndarray:
        """f_ES-NET das formas BMT brutas, na escala de saída da ES-NET."""
        return self.es.output_norm.apply(theory_shapes(shapes, self.lambda2, self.invert_tr))


@dataclass
class PreExploreReport:
    """Ajuste da ES-NET à teoria em pontos reservados."""

    rmse_normalized: float
    rmse_Do: float
    rmse_T: float
    n_train: int
    n_holdout: int
    history: List[float] = field(default_factory=list)


@dataclass
class PretrainReport:
    """Erro de teste da SP-NET em graus e o do preditor constante."""

    test_rmse: float
    baseline_rmse: float
    n_train: int
    n_test: int
    history: List[float] = field(default_factory=list)


@dataclass
class PredictionResult:
    """Ângulos previstos (graus) e máscara de entradas fora da faixa de treino."""

    values: np.ndarray
    out_of_range: np.ndarray

    @property
    def any_out_of_range(self) -> bool:
        return bool(np.any(self.out_of_range))


def theory_shapes(shapes: np.ndarray, lambda2: float, invert_tr: bool = False) -> np.ndarray:
    """
    Aplica a teoria de seção equivalente a cada linha (Do, T, Tr).

    Raises:
        GeometryError: Nomeando a primeira linha sem solução
    """
    shapes = np.atleast_2d(np.asarray(shapes, dtype=float))
    out = np.empty((shapes.shape[0], 2))
    for i, (Do, T, Tr) in enumerate(shapes):
        try:
            single = equivalent_tube(BmtShape(Do=Do, T=T, Tr=Tr), lambda2, invert_tr=invert_tr)
        except GeometryError as e:
            raise type(e)(f"Equivalência falhou no ponto {i} (Do={Do}, T={T}, Tr={Tr}): {e}") from e
        out[i] = (single.Do_eq, single.T_eq)
    return out


def build_esnet(
    shape_bounds: Sequence[Tuple[float, float]],
    output_norm: Normalizer,
    seed: int = 0,
    hidden_activation: str = "tanh"
) -> EsNet:
    """ES-NET com pesos aleatórios e entrada escalada pelos limites do domínio de formas."""
    return EsNet(
        mlp=init_mlp(ES_DIMS, hidden_activation=hidden_activation, seed=seed),
        input_norm=normalizer_from_bounds(BMT_SHAPE_FEATURES, shape_bounds),
        output_norm=output_norm,
    )


def fit_spnet_normalizers(
    train: Dataset,
    process_features: Sequence[str]
) -> Tuple[Normalizer, Normalizer]:
    """
    Ajusta os normalizadores de entrada e rótulo da SP-NET no treino.

    Raises:
        SchemaError: Se faltar alguma feature
    """
    columns = SINGLE_SHAPE_FEATURES + list(process_features)
    return (
        fit_normalizer(train.columns(columns), columns),
        fit_normalizer(train.labels, [LABEL]),
    )


def build_spnet(
    input_norm: Normalizer,
    label_norm: Normalizer,
    seed: int = 0,
    hidden_activation: str = "tanh"
) -> SpNet:
    """SP-NET com pesos aleatórios para os normalizadores dados."""
    dims = (len(input_norm.columns), HIDDEN_UNITS, 1)
    return SpNet(
        mlp=init_mlp(dims, hidden_activation=hidden_activation, seed=seed),
        input_norm=input_norm,
        label_norm=label_norm,
    )


def pre_explore_esnet(
    es: EsNet,
    shape_bounds: Sequence[Tuple[float, float]],
    n_theory: int,
    lambda2: float,
    config: TrainConfig,
    invert_tr: bool = False,
    holdout_frac: float = 0.2
) -> Tuple[EsNet, PreExploreReport]:
    """
    Pré-exploração da ES-NET guiada pela teoria de seção equivalente.

    Sorteia n_theory formas por LHS (semente de `config`), rotula cada uma
    com a teoria e treina a ES-NET por MSE na escala normalizada. Uma fração
    `holdout_frac` dos pontos fica fora do treino para medir o ajuste.

    Args:
        es: ES-NET inicial
        shape_bounds: Limites [lo, hi] de (Do, T, Tr)
        n_theory: Número de pontos teóricos
        lambda2: Razão de módulos E2/E1
        config: Hiperparâmetros do estágio
        invert_tr: Convenção de Tr
        holdout_frac: Fração reservada para avaliação

    Returns:
        Tupla (ES-NET treinada, relatório com RMSE normalizado e em mm)

    Raises:
        DatasetError: Se n_theory < 1
        GeometryError: Se a teoria falhar em algum ponto
    """
    if n_theory < 1:
        raise DatasetError(f"n_theory deve ser >= 1 (recebido {n_theory})")

    points = lhs_sample(n_theory, shape_bounds, seed=config.seed)
    targets = theory_shapes(points, lambda2, invert_tr)

    n_holdout = int(round(n_theory * holdout_frac))
    order = np.random.default_rng(config.seed).permutation(n_theory)
    if n_holdout < 1 or n_holdout >= n_theory:
        # Poucos pontos: avalia no próprio treino
        train_idx = hold_idx = order
    else:
        train_idx, hold_idx = order[n_holdout:], order[:n_holdout]

    X = es.input_norm.apply(points)
    Y = es.output_norm.apply(targets)
    logger.info(f"Pré-explorando ES-NET: {len(train_idx)} pontos teóricos, λ2={lambda2:.4g}")
    result = fit(es.mlp, X[train_idx], Y[train_idx], config, log_every=50)
    trained = es.with_mlp(result.mlp)

    pred = forward(trained.mlp, X[hold_idx])
    pred_mm = trained.output_norm.invert(pred)
    report = PreExploreReport(
        rmse_normalized=rmse(pred, Y[hold_idx]),
        rmse_Do=rmse(pred_mm[:, 0], targets[hold_idx, 0]),
        rmse_T=rmse(pred_mm[:, 1], targets[hold_idx, 1]),
        n_train=len(train_idx),
        n_holdout=len(hold_idx),
        history=result.history,
    )
    logger.info(
        f"ES-NET: RMSE normalizado={report.rmse_normalized:.4g}, "
        f"Do={report.rmse_Do:.4g} mm, T={report.rmse_T:.4g} mm"
    )
    return trained, report


def pretrain_spnet(
    sp: SpNet,
    dataset1: Dataset,
    config: TrainConfig,
    split_seed: int = 0,
    train_frac: float = 0.8
) -> Tuple[SpNet, PretrainReport]:
    """
    Pré-treino da SP-NET no Dataset1.

    Args:
        sp: SP-NET inicial (normalizadores já ajustados)
        dataset1: Dataset de camada única
        config: Hiperparâmetros do estágio
        split_seed: Semente da divisão treino/teste
        train_frac: Fração de treino

    Returns:
        Tupla (SP-NET treinada, relatório com RMSE de teste em graus)

    Raises:
        SchemaError: Se o dataset não tiver as features da SP-NET
    """
    columns = sp.input_norm.columns
    train, test = split_dataset(dataset1, train_frac=train_frac, seed=split_seed)
    X_train = sp.input_norm.apply(train.columns(columns))
    Y_train = sp.label_norm.apply(train.labels[:, None])

    logger.info(f"Pré-treinando SP-NET: {len(train)} amostras de treino, {len(test)} de teste")
    result = fit(sp.mlp, X_train, Y_train, config, log_every=50)
    trained = sp.with_mlp(result.mlp)

    pred = trained.label_norm.invert(forward(trained.mlp, trained.input_norm.apply(test.columns(columns))))
    report = PretrainReport(
        test_rmse=rmse(pred[:, 0], test.labels),
        baseline_rmse=rmse(np.full(len(test), train.labels.mean()), test.labels),
        n_train=len(train),
        n_test=len(test),
        history=result.history,
    )
    logger.info(f"SP-NET: RMSE de teste={report.test_rmse:.4f}° (constante: {report.baseline_rmse:.4f}°)")
    return trained, report


def assemble(
    es: EsNet,
    sp: SpNet,
    lambda2: float,
    loss_config: Optional[CompositeLossConfig] = None,
    invert_tr: bool = False,
    provenance: Optional[Dict[str, Any]] = None
) -> PeNet:
    """
    Monta a PE-NET a partir das duas sub-redes.

    Se a escala de saída da ES-NET diferir da escala de (Do, T) da SP-NET,
    a ES-NET é reescalada (rescaled) antes da montagem.

    Raises:
        SchemaError: Se os esquemas da ligação ES → SP não forem compatíveis
    """
    sp_shape = sp.shape_norm
    if not (
        np.array_equal(es.output_norm.offset, sp_shape.offset)
        and np.array_equal(es.output_norm.scale, sp_shape.scale)
    ):
        logger.info("Reescalando a saída da ES-NET para a escala de entrada da SP-NET")
        es = es.rescaled(sp_shape)
    return PeNet(
        es=es,
        sp=sp,
        lambda2=lambda2,
        loss_config=loss_config or CompositeLossConfig(),
        invert_tr=invert_tr,
        provenance=dict(provenance or {}),
    )


def pe_forward(pe: PeNet, shape_norm: np.ndarray, process_norm: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Passo direto da PE-NET em escala normalizada.

    Returns:
        Tupla (retorno normalizado (B, 1), saída implícita x_s^s (B, 2))
    """
    implicit = forward(pe.es.mlp, np.atleast_2d(shape_norm))
    y = forward(pe.sp.mlp, np.hstack([implicit, np.atleast_2d(process_norm)]))
    return y, implicit


def theory_forward(pe: PeNet, raw: np.ndarray) -> np.ndarray:
    """
    Caminho teórico: a ES-NET é substituída pela teoria exata.

    Returns:
        Retorno normalizado (B, 1) = sp(concat(teoria(forma), processo))
    """
    raw = np.atleast_2d(np.asarray(raw, dtype=float))
    _, process_norm = pe.normalize_inputs(raw)
    return forward(pe.sp.mlp, np.hstack([pe.theory_targets(raw[:, :3]), process_norm]))


def _raw_matrix(pe: PeNet, raw: Union[np.ndarray, Dataset, pd.DataFrame]) -> np.ndarray:
    if isinstance(raw, Dataset):
        return raw.columns(pe.input_schema)
    if isinstance(raw, pd.DataFrame):
        missing = [name for name in pe.input_schema if name not in raw.columns]
        if missing:
            raise SchemaError(f"Features ausentes na entrada: {missing}")
        return raw[pe.input_schema].to_numpy(dtype=float)
    matrix = np.atleast_2d(np.asarray(raw, dtype=float))
    if matrix.shape[1] != len(pe.input_schema):
        raise SchemaError(f"Entrada com {matrix.shape[1]} colunas, esperado {pe.input_schema}")
    return matrix


def predict(pe: PeNet, raw: Union[np.ndarray, Dataset, pd.DataFrame]) -> PredictionResult:
    """
    Ângulo de retorno em graus para entradas BMT brutas.

    Entradas fora da faixa dos normalizadores são aceitas e marcadas.

    Args:
        pe: PE-NET treinada
        raw: Matriz (B, 3 + P) na ordem de pe.input_schema, Dataset ou DataFrame

    Returns:
        PredictionResult

    Raises:
        SchemaError: Se faltar alguma feature
    """
    matrix = _raw_matrix(pe, raw)
    shape_norm, process_norm = pe.normalize_inputs(matrix)
    y, _ = pe_forward(pe, shape_norm, process_norm)
    flags = pe.es.input_norm.out_of_range(matrix[:, :3]) | pe.sp.process_norm.out_of_range(matrix[:, 3:])
    if np.any(flags):
        logger.warning(f"{int(flags.sum())} entrada(s) fora da faixa de treino")
    return PredictionResult(values=pe.sp.label_norm.invert(y)[:, 0], out_of_range=flags)


def _esnet_to_dict(es: EsNet) -> Dict[str, Any]:
    return {
        "mlp": mlp_to_dict(es.mlp),
        "input_norm": es.input_norm.to_dict(),
        "output_norm": es.output_norm.to_dict(),
    }


def _esnet_from_dict(data: Dict[str, Any]) -> EsNet:
    return EsNet(
        mlp=mlp_from_dict(data["mlp"]),
        input_norm=Normalizer.from_dict(data["input_norm"]),
        output_norm=Normalizer.from_dict(data["output_norm"]),
    )


def _spnet_to_dict(sp: SpNet) -> Dict[str, Any]:
    return {
        "mlp": mlp_to_dict(sp.mlp),
        "input_norm": sp.input_norm.to_dict(),
        "label_norm": sp.label_norm.to_dict(),
    }


def _spnet_from_dict(data: Dict[str, Any]) -> SpNet:
    return SpNet(
        mlp=mlp_from_dict(data["mlp"]),
        input_norm=Normalizer.from_dict(data["input_norm"]),
        label_norm=Normalizer.from_dict(data["label_norm"]),
    )


def _check_kind(data: Dict[str, Any], kind: str, path: str) -> None:
    if data.get("kind") != kind:
        raise SchemaError(f"{path} não contém um modelo '{kind}' (encontrado {data.get('kind')!r})")


def save_esnet(es: EsNet, path: str, provenance: Optional[Dict[str, Any]] = None) -> str:
    return save_json(
        {"kind": "es_net", "version": FORMAT_VERSION, "net": _esnet_to_dict(es), "provenance": provenance or {}},
        path,
    )


def load_esnet(path: str) -> EsNet:
    data = load_json(path)
    _check_kind(data, "es_net", path)
    try:
        return _esnet_from_dict(data["net"])
    except KeyError as e:
        raise SchemaError(f"Modelo ES-NET incompleto em {path}: {e}") from e


def save_spnet(sp: SpNet, path: str, provenance: Optional[Dict[str, Any]] = None) -> str:
    return save_json(
        {"kind": "sp_net", "version": FORMAT_VERSION, "net": _spnet_to_dict(sp), "provenance": provenance or {}},
        path,
    )


def load_spnet(path: str) -> SpNet:
    data = load_json(path)
    _check_kind(data, "sp_net", path)
    try:
        return _spnet_from_dict(data["net"])
    except KeyError as e:
        raise SchemaError(f"Modelo SP-NET incompleto em {path}: {e}") from e


def save_penet(pe: PeNet, path: str) -> str:
    """
    Salva a PE-NET completa (sub-redes, normalizadores, perda e proveniência).

    Raises:
        ArtifactIOError: Em falhas de escrita
    """
    document = {
        "kind": "pe_net",
        "version": FORMAT_VERSION,
        "es": _esnet_to_dict(pe.es),
        "sp": _spnet_to_dict(pe.sp),
        "lambda2": pe.lambda2,
        "invert_tr": pe.invert_tr,
        "loss_config": pe.loss_config.model_dump(mode="json"),
        "provenance": pe.provenance,
    }
    return save_json(document, path)


def load_penet(path: str) -> PeNet:
    """
    Carrega uma PE-NET salva por save_penet.

    Raises:
        ArtifactIOError: Se o arquivo não puder ser lido
        SchemaError: Se o documento não for uma PE-NET válida
    """
    data = load_json(path)
    _check_kind(data, "pe_net", path)
    try:
        return PeNet(
            es=_esnet_from_dict(data["es"]),
            sp=_spnet_from_dict(data["sp"]),
            lambda2=float(data["lambda2"]),
            loss_config=CompositeLossConfig.model_validate(data.get("loss_config", {})),
            invert_tr=bool(data.get("invert_tr", False)),
            provenance=data.get("provenance", {}),
        )
    except KeyError as e:
        raise SchemaError(f"Modelo PE-NET incompleto em {path}: {e}") from e


def load_model(path: str) -> Union[EsNet, SpNet, PeNet]:
    """Carrega qualquer um dos três tipos de modelo pelo campo 'kind'."""
    kind = load_json(path).get("kind")
    loaders = {"es_net": load_esnet, "sp_net": load_spnet, "pe_net": load_penet}
    if kind not in loaders:
        raise SchemaError(f"Tipo de modelo desconhecido em {path}: {kind!r}")
    return loaders[kind](path)
