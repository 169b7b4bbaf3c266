"""
Orquestração de experimentos com várias sementes.

Cada execução i usa a semente master_seed + i; dela derivam as sementes de
divisão, inicialização e embaralhamento, compartilhadas por todos os
métodos da mesma execução. O primeiro estágio (pré-exploração da ES-NET e
pré-treino da SP-NET) é calculado uma vez por execução e reutilizado pelos
métodos que dependem dele.
"""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field
from tqdm import tqdm

from src.core.composite_loss import CompositeLossConfig
from src.core.finetune import STAGE2_DEFAULTS, finetune
from src.core.pe_net import (
    EsNet,
    PreExploreReport,
    PretrainReport,
    SpNet,
    assemble,
    build_esnet,
    build_spnet,
    fit_spnet_normalizers,
    pre_explore_esnet,
    pretrain_spnet,
)
from src.harness.report import ExperimentReport, RunRecord, build_report
from src.nn.mlp import forward, init_mlp
from src.nn.normalizer import fit_normalizer
from src.nn.training import TrainConfig, fit, rmse
from src.oracle.bending import ProcessParams, springback_angle
from src.oracle.dataset import (
    BMT_SHAPE_FEATURES,
    LABEL,
    Dataset,
    GeneratorConfig,
    generate_datasets,
    load_dataset_csv,
    split_dataset,
)
from src.section.equivalence import BmtShape, equivalent_tube
from src.utils.config import config_hash
from src.utils.errors import GeometryError, TrainingDivergedError
from src.utils.logger import get_logger

logger = get_logger(__name__)

PE_NET = "PE-NET"
PE_NET_WMA = "PE-NET-WMA"
PE_NET_WSP = "PE-NET-WSP"
BL_NET = "BL-NET"
BP_NET = "BP-NET"
ALL_METHODS = [PE_NET, PE_NET_WMA, PE_NET_WSP, BL_NET, BP_NET]
_NEEDS_STAGE1 = {PE_NET, PE_NET_WMA, PE_NET_WSP}

MethodName = Literal["PE-NET", "PE-NET-WMA", "PE-NET-WSP", "BL-NET", "BP-NET"]


class ExperimentConfig(BaseModel):
    """
    Configuração de um lote de experimentos.

    Attributes:
        generator: Gerador dos datasets sintéticos
        dataset1_path, dataset2_path: CSVs existentes (substituem o gerador)
        es_train, sp_train, finetune_train: Hiperparâmetros de cada estágio
        loss: Perda composta do segundo estágio
        n_runs: Número de execuções com sementes pareadas
        master_seed: Semente base; a execução i usa master_seed + i
        methods: Métodos avaliados em run_ablations
        n_theory: Pontos teóricos da pré-exploração
        train_frac: Fração de treino das divisões
        stage1_selection: "per_run" ou "median"
        output_dir: Diretório dos relatórios
        jobs: Processos paralelos
    """

    generator: GeneratorConfig = GeneratorConfig()
    dataset1_path: Optional[str] = None
    dataset2_path: Optional[str] = None
    es_train: TrainConfig = TrainConfig(epochs=300)
    sp_train: TrainConfig = TrainConfig(epochs=200)
    finetune_train: TrainConfig = TrainConfig(**STAGE2_DEFAULTS)
    loss: CompositeLossConfig = CompositeLossConfig()
    n_runs: int = Field(default=10, ge=1)
    master_seed: int = 0
    methods: List[MethodName] = Field(default_factory=lambda: list(ALL_METHODS))
    n_theory: int = Field(default=500, ge=1)
    train_frac: float = Field(default=0.8, gt=0.0, lt=1.0)
    stage1_selection: Literal["per_run", "median"] = "per_run"
    hidden_activation: Literal["tanh", "sigmoid", "relu"] = "tanh"
    output_dir: str = "results"
    jobs: int = Field(default=1, ge=1)
    show_progress: bool = False


@dataclass
class Stage1Result:
    """Sub-redes do primeiro estágio de uma execução (iniciais e treinadas)."""

    run_index: int
    es_init: EsNet
    sp_init: SpNet
    es: EsNet
    sp: SpNet
    es_report: PreExploreReport
    sp_report: PretrainReport


@dataclass
class TheoryBaselineResult:
    """RMSE da teoria pura e amostras excluídas por falha da equivalência."""

    rmse: float
    n_used: int
    failed_indices: List[int] = field(default_factory=list)


def run_seeds(master_seed: int, run_index: int) -> Dict[str, int]:
    """
    Sementes derivadas da execução `run_index`.

    Todas as sementes vêm de SeedSequence(master_seed + run_index), então a
    execução i é a mesma em qualquer lote que a contenha.
    """
    run_seed = master_seed + run_index
    names = ["split", "es_init", "sp_init", "es_train", "sp_train", "finetune", "control_init"]
    state = np.random.SeedSequence(run_seed).generate_state(len(names))
    return {"run": run_seed, **{name: int(value) for name, value in zip(names, state)}}


def _with_seed(config: TrainConfig, seed: int) -> TrainConfig:
    return config.model_copy(update={"seed": seed})


def load_or_generate(cfg: ExperimentConfig) -> Tuple[Dataset, Dataset]:
    """Carrega os CSVs configurados ou gera os datasets."""
    if cfg.dataset1_path and cfg.dataset2_path:
        return load_dataset_csv(cfg.dataset1_path), load_dataset_csv(cfg.dataset2_path)
    return generate_datasets(cfg.generator, jobs=cfg.jobs, show_progress=cfg.show_progress)


def run_stage1(cfg: ExperimentConfig, dataset1: Dataset, run_index: int) -> Stage1Result:
    """
    Primeiro estágio de uma execução: pré-treino da SP-NET e pré-exploração da ES-NET.

    A escala de saída da ES-NET é a escala de (Do, T) ajustada no treino do
    Dataset1, a mesma das duas primeiras entradas da SP-NET.
    """
    seeds = run_seeds(cfg.master_seed, run_index)
    process = cfg.generator.process_features()

    train1, _ = split_dataset(dataset1, train_frac=cfg.train_frac, seed=seeds["split"])
    input_norm, label_norm = fit_spnet_normalizers(train1, process)
    sp_init = build_spnet(input_norm, label_norm, seed=seeds["sp_init"], hidden_activation=cfg.hidden_activation)
    sp, sp_report = pretrain_spnet(
        sp_init, dataset1, _with_seed(cfg.sp_train, seeds["sp_train"]),
        split_seed=seeds["split"], train_frac=cfg.train_frac,
    )

    shape_bounds = cfg.generator.bounds.for_features(BMT_SHAPE_FEATURES)
    es_init = build_esnet(
        shape_bounds, sp_init.shape_norm, seed=seeds["es_init"], hidden_activation=cfg.hidden_activation
    )
    es, es_report = pre_explore_esnet(
        es_init, shape_bounds, cfg.n_theory, cfg.generator.lambda2,
        _with_seed(cfg.es_train, seeds["es_train"]), invert_tr=cfg.generator.invert_tr,
    )
    return Stage1Result(run_index, es_init, sp_init, es, sp, es_report, sp_report)


def select_median_stage1(stage1: List[Stage1Result]) -> Tuple[EsNet, SpNet]:
    """
    ES-NET e SP-NET com erro mediano do primeiro estágio.

    Para número par de execuções escolhe a mediana inferior.
    """
    by_es = sorted(stage1, key=lambda s: (s.es_report.rmse_normalized, s.run_index))
    by_sp = sorted(stage1, key=lambda s: (s.sp_report.test_rmse, s.run_index))
    middle = (len(stage1) - 1) // 2
    return by_es[middle].es, by_sp[middle].sp


def _finetune_rmse(
    cfg: ExperimentConfig,
    es: EsNet,
    sp: SpNet,
    dataset2: Dataset,
    seeds: Dict[str, int],
    loss: CompositeLossConfig
) -> Tuple[float, float]:
    pe = assemble(
        es, sp, cfg.generator.lambda2, loss_config=loss, invert_tr=cfg.generator.invert_tr,
        provenance={"run_seed": seeds["run"]},
    )
    result = finetune(
        pe, dataset2, _with_seed(cfg.finetune_train, seeds["finetune"]), loss,
        split_seed=seeds["split"], train_frac=cfg.train_frac,
    )
    return result.test_rmse, result.untuned_test_rmse


def _bl_net_rmse(cfg: ExperimentConfig, dataset2: Dataset, seeds: Dict[str, int]) -> float:
    """PE-NET sem pré-operações: pesos aleatórios, escalas do Dataset2 e só a perda de dados."""
    process = cfg.generator.process_features()
    train2, _ = split_dataset(dataset2, train_frac=cfg.train_frac, seed=seeds["split"])
    input_norm, label_norm = fit_spnet_normalizers(train2, process)
    sp = build_spnet(input_norm, label_norm, seed=seeds["control_init"], hidden_activation=cfg.hidden_activation)
    es = build_esnet(
        cfg.generator.bounds.for_features(BMT_SHAPE_FEATURES), sp.shape_norm,
        seed=seeds["control_init"] + 1, hidden_activation=cfg.hidden_activation,
    )
    loss = cfg.loss.model_copy(update={"use_theory_loss": False, "freeze_sp": False})
    rmse_value, _ = _finetune_rmse(cfg, es, sp, dataset2, seeds, loss)
    return rmse_value


def _bp_net_rmse(cfg: ExperimentConfig, dataset2: Dataset, seeds: Dict[str, int]) -> float:
    """Rede [3 + P, 10, 1] simples treinada só no Dataset2."""
    columns = BMT_SHAPE_FEATURES + cfg.generator.process_features()
    train2, test2 = split_dataset(dataset2, train_frac=cfg.train_frac, seed=seeds["split"])
    input_norm = fit_normalizer(train2.columns(columns), columns)
    label_norm = fit_normalizer(train2.labels, [LABEL])

    mlp = init_mlp((len(columns), 10, 1), hidden_activation=cfg.hidden_activation, seed=seeds["control_init"])
    result = fit(
        mlp, input_norm.apply(train2.columns(columns)), label_norm.apply(train2.labels[:, None]),
        _with_seed(cfg.finetune_train, seeds["finetune"]),
    )
    pred = label_norm.invert(forward(result.mlp, input_norm.apply(test2.columns(columns))))
    return rmse(pred[:, 0], test2.labels)


def run_stage2(
    cfg: ExperimentConfig,
    dataset2: Dataset,
    stage1: Optional[Stage1Result],
    selected: Optional[Tuple[EsNet, SpNet]],
    run_index: int,
    methods: List[str]
) -> RunRecord:
    """
    Avalia os métodos de uma execução com sementes e divisões pareadas.

    Divergências são registradas no RunRecord sem interromper o lote.
    """
    seeds = run_seeds(cfg.master_seed, run_index)
    record = RunRecord(run_index=run_index, seed=seeds["run"])
    if stage1 is not None:
        record.stage1 = {
            "sp_rmse": stage1.sp_report.test_rmse,
            "es_rmse_Do": stage1.es_report.rmse_Do,
            "es_rmse_T": stage1.es_report.rmse_T,
            "es_rmse_normalized": stage1.es_report.rmse_normalized,
        }
    es_trained, sp_trained = selected if selected else (
        (stage1.es, stage1.sp) if stage1 is not None else (None, None)
    )

    for method in methods:
        try:
            if method == PE_NET:
                value, untuned = _finetune_rmse(cfg, es_trained, sp_trained, dataset2, seeds, cfg.loss)
                record.untuned_rmse = untuned
            elif method == PE_NET_WMA:
                value, _ = _finetune_rmse(cfg, stage1.es_init, sp_trained, dataset2, seeds, cfg.loss)
            elif method == PE_NET_WSP:
                value, _ = _finetune_rmse(cfg, es_trained, stage1.sp_init, dataset2, seeds, cfg.loss)
            elif method == BL_NET:
                value = _bl_net_rmse(cfg, dataset2, seeds)
            elif method == BP_NET:
                value = _bp_net_rmse(cfg, dataset2, seeds)
            else:
                raise ValueError(f"Método desconhecido: {method}")
        except TrainingDivergedError as e:
            logger.error(f"Execução {run_index}, {method}: treinamento divergiu ({e})")
            record.rmse[method] = None
            record.errors[method] = str(e)
            continue
        record.rmse[method] = value

    return record


def _stage1_task(args: Tuple[ExperimentConfig, Dataset, int]) -> Stage1Result:
    return run_stage1(*args)


def _stage2_task(args: Tuple) -> RunRecord:
    return run_stage2(*args)


def _map(fn, tasks: List[Any], jobs: int, desc: str, show_progress: bool) -> List[Any]:
    """Executa em série ou em processos; o resultado segue a ordem das tarefas."""
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as executor:
            return list(tqdm(executor.map(fn, tasks), total=len(tasks), desc=desc, disable=not show_progress))
    return [fn(task) for task in tqdm(tasks, desc=desc, disable=not show_progress)]


def theory_baseline(dataset2: Dataset, generator: Optional[GeneratorConfig] = None) -> TheoryBaselineResult:
    """
    RMSE da teoria pura no Dataset2.

    Cada amostra BMT é convertida no tubo equivalente e o retorno desse tubo
    de camada única, com o material de referência e sem ruído, é comparado
    ao rótulo. Amostras em que a equivalência falha são excluídas e listadas.

    Args:
        dataset2: Dataset bimetálico rotulado
        generator: Materiais, fator de processo e integração (padrões se None)

    Returns:
        TheoryBaselineResult
    """
    generator = generator or GeneratorConfig()
    lambda2 = generator.lambda2
    predictions, labels, failed = [], [], []

    for i, sample in enumerate(dataset2.samples):
        values = sample.features
        try:
            single = equivalent_tube(
                BmtShape(Do=values["Do"], T=values["T"], Tr=values["Tr"]), lambda2,
                invert_tr=generator.invert_tr,
            )
        except GeometryError as e:
            logger.warning(f"Amostra {i} excluída da linha de base teórica: {e}")
            failed.append(i)
            continue

        process = ProcessParams(
            RB=values["RB"], alphaB=values["alphaB"], vB=values["vB"], omegaB=values["omegaB"],
            Lp_die=values.get("Lp_die"), gap=values.get("gap"), friction=values.get("friction"),
        )
        predictions.append(springback_angle(
            single, process, generator.materials,
            process_factor=generator.process_factor(),
            grid=generator.grid,
            integration=generator.integration,
        ))
        labels.append(sample.label)

    if not predictions:
        return TheoryBaselineResult(rmse=float("nan"), n_used=0, failed_indices=failed)
    return TheoryBaselineResult(
        rmse=rmse(np.asarray(predictions), np.asarray(labels)),
        n_used=len(predictions),
        failed_indices=failed,
    )


def _run_batch(
    cfg: ExperimentConfig,
    methods: List[str],
    kind: str,
    datasets: Optional[Tuple[Dataset, Dataset]] = None
) -> ExperimentReport:
    dataset1, dataset2 = datasets or load_or_generate(cfg)
    runs = list(range(cfg.n_runs))
    logger.info(f"{kind}: {cfg.n_runs} execuções, métodos={methods}, semente base={cfg.master_seed}")

    stage1: List[Optional[Stage1Result]] = [None] * cfg.n_runs
    selected = None
    if _NEEDS_STAGE1.intersection(methods):
        stage1 = _map(
            _stage1_task, [(cfg, dataset1, i) for i in runs], cfg.jobs, "estágio 1", cfg.show_progress
        )
        if cfg.stage1_selection == "median":
            selected = select_median_stage1(stage1)

    records = _map(
        _stage2_task,
        [(cfg, dataset2, stage1[i], selected, i, methods) for i in runs],
        cfg.jobs, "estágio 2", cfg.show_progress,
    )
    baseline = theory_baseline(dataset2, cfg.generator)
    logger.info(f"Linha de base teórica: RMSE={baseline.rmse:.4f}° ({baseline.n_used} amostras)")

    return build_report(
        kind=kind,
        methods=methods,
        records=records,
        theory_rmse=baseline.rmse,
        theory_failed=baseline.failed_indices,
        provenance={
            "config_hash": config_hash(cfg.model_dump(mode="json")),
            "master_seed": cfg.master_seed,
            "n_runs": cfg.n_runs,
            "stage1_selection": cfg.stage1_selection,
            "dataset1": dict(dataset1.provenance),
            "dataset2": dict(dataset2.provenance),
            "methods_config": {
                "BL-NET": "arquitetura PE-NET [3,10,2]+[2+P,10,1], sem pré-operações, perda só de dados",
                "BP-NET": "MLP [3+P,10,1], só Dataset2",
                "finetune_train": cfg.finetune_train.model_dump(mode="json"),
            },
            "gate_interpretation": "z = 0 quando max_j |f_j - x_j| <= delta; senão média_j erf(|d_j|/√2)",
        },
    )


def run_experiment(
    cfg: ExperimentConfig,
    datasets: Optional[Tuple[Dataset, Dataset]] = None
) -> ExperimentReport:
    """
    Experimento dos dois estágios (SP-NET, ES-NET e PE-NET) com n_runs sementes.

    Args:
        cfg: Configuração do experimento
        datasets: Datasets já carregados (opcional)

    Returns:
        ExperimentReport com RMSEs por execução, medianas e referências
    """
    return _run_batch(cfg, [PE_NET], "experiment", datasets)


def run_ablations(
    cfg: ExperimentConfig,
    datasets: Optional[Tuple[Dataset, Dataset]] = None
) -> ExperimentReport:
    """
    Experimentos de controle com sementes e divisões pareadas por execução.

    Returns:
        ExperimentReport com um RMSE por método e execução
    """
    return _run_batch(cfg, list(cfg.methods), "ablation", datasets)
