"""
Ajuste fino da PE-NET no Dataset2 com a perda composta.
"""

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from src.core.composite_loss import CompositeLossConfig, Stage2Batch, composite_step
from src.core.pe_net import PeNet, pe_forward
from src.nn.optim import AdamState
from src.nn.training import TrainConfig, iterate_minibatches, rmse
from src.oracle.dataset import Dataset, split_dataset
from src.utils.errors import TrainingDivergedError
from src.utils.logger import get_logger

logger = get_logger(__name__)

# Padrões do segundo estágio
STAGE2_DEFAULTS = dict(
    minibatch_size=2,
    initial_lr=1e-4,
    lr_decay_factor=0.8,
    lr_drop_period_epochs=20,
    epochs=100,
)


@dataclass(frozen=True)
class EpochTrace:
    """Médias por época de L_p, L_d e z nos minilotes."""

    epoch: int
    loss_p: float
    loss_d: float
    z: float
    lr: float


@dataclass
class FinetuneResult:
    """
    Resultado do ajuste fino.

    Attributes:
        pe: PE-NET ajustada
        test_rmse: RMSE de teste em graus após o ajuste
        untuned_test_rmse: RMSE de teste da PE-NET recém-montada
        trace: (L_p, L_d, z) por época
    """

    pe: PeNet
    test_rmse: float
    untuned_test_rmse: float
    trace: List[EpochTrace] = field(default_factory=list)


def stage2_config(**overrides) -> TrainConfig:
    return TrainConfig(**{**STAGE2_DEFAULTS, **overrides})


def stage2_batch(pe: PeNet, dataset: Dataset) -> Stage2Batch:
    """
    Converte um dataset BMT em arrays normalizados do segundo estágio.

    Raises:
        SchemaError: Se faltar alguma feature de pe.input_schema
        GeometryError: Se a teoria falhar em alguma amostra
    """
    raw = dataset.columns(pe.input_schema)
    shape_norm, process_norm = pe.normalize_inputs(raw)
    return Stage2Batch(
        shape=shape_norm,
        process=process_norm,
        label=pe.sp.label_norm.apply(dataset.labels[:, None]),
        theory=pe.theory_targets(raw[:, :3]),
    )


def evaluate_rmse(pe: PeNet, batch: Stage2Batch) -> float:
    """RMSE em graus de uma PE-NET num lote normalizado."""
    y, _ = pe_forward(pe, batch.shape, batch.process)
    label_norm = pe.sp.label_norm
    return rmse(label_norm.invert(y), label_norm.invert(batch.label))


def finetune(
    pe: PeNet,
    dataset2: Dataset,
    config: Optional[TrainConfig] = None,
    loss_config: Optional[CompositeLossConfig] = None,
    split_seed: int = 0,
    train_frac: float = 0.8
) -> FinetuneResult:
    """
    Ajuste fino da PE-NET montada.

    A divisão 80/20 usa `split_seed`; o embaralhamento por época usa
    `config.seed`. Cada minilote executa um composite_step.

    Args:
        pe: PE-NET montada
        dataset2: Dataset bimetálico
        config: Hiperparâmetros (padrões do segundo estágio se None)
        loss_config: Perda composta (a da PE-NET se None)
        split_seed: Semente da divisão
        train_frac: Fração de treino

    Returns:
        FinetuneResult com o RMSE de teste antes e depois do ajuste

    Raises:
        TrainingDivergedError: Com o índice da época
    """
    config = config or stage2_config()
    loss_config = loss_config or pe.loss_config
    train, test = split_dataset(dataset2, train_frac=train_frac, seed=split_seed)
    train_batch = stage2_batch(pe, train)
    test_batch = stage2_batch(pe, test)

    untuned = evaluate_rmse(pe, test_batch)
    logger.info(f"Ajuste fino: {len(train)} amostras de treino, RMSE inicial={untuned:.4f}°")

    rng = np.random.default_rng(config.seed)
    es_state = AdamState.zeros_like(pe.es.mlp.parameters())
    sp_state = AdamState.zeros_like(pe.sp.mlp.parameters())
    trace: List[EpochTrace] = []

    for epoch in range(config.epochs):
        lr = config.learning_rate(epoch)
        parts = []
        for idx in iterate_minibatches(len(train_batch), config.minibatch_size, rng):
            try:
                pe, es_state, sp_state, losses = composite_step(
                    pe, train_batch.take(idx), loss_config, es_state, sp_state, lr
                )
            except TrainingDivergedError as e:
                raise TrainingDivergedError(str(e), epoch=epoch) from e
            parts.append((losses.loss_p, losses.loss_d, losses.z))

        mean_p, mean_d, mean_z = np.mean(parts, axis=0)
        trace.append(EpochTrace(epoch=epoch, loss_p=float(mean_p), loss_d=float(mean_d), z=float(mean_z), lr=lr))
        if (epoch + 1) % 20 == 0:
            logger.debug(f"Época {epoch + 1}: L_p={mean_p:.4g}, L_d={mean_d:.4g}, z={mean_z:.3f}")

    tuned = evaluate_rmse(pe, test_batch)
    if not np.isfinite(tuned):
        raise TrainingDivergedError("RMSE de teste não finito", epoch=config.epochs - 1)
    logger.info(f"Ajuste fino concluído: RMSE de teste={tuned:.4f}° (antes {untuned:.4f}°)")
    return FinetuneResult(pe=pe, test_rmse=tuned, untuned_test_rmse=untuned, trace=trace)
