"""
Fixtures compartilhadas dos testes.

As configurações pequenas mantêm cada teste abaixo de alguns segundos;
os experimentos completos ficam em test_acceptance.py com o marcador slow.
"""

import numpy as np
import pytest

from src.core.composite_loss import CompositeLossConfig
from src.core.pe_net import assemble, build_esnet, build_spnet, fit_spnet_normalizers
from src.nn.training import TrainConfig
from src.oracle.bending import GridConfig, MaterialSpec
from src.oracle.dataset import BMT_SHAPE_FEATURES, GeneratorConfig, generate_datasets, split_dataset


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def small_generator():
    """Gerador pequeno com grade reduzida."""
    return GeneratorConfig(seed=7, n1=40, n2=20, grid=GridConfig(n_radial=16, n_angular=64))


@pytest.fixture(scope="session")
def small_datasets(small_generator):
    return generate_datasets(small_generator)


@pytest.fixture
def quick_train():
    return TrainConfig(epochs=3, minibatch_size=5, seed=1)


@pytest.fixture
def materials():
    return (
        MaterialSpec(E=80700.0, sigma_y=150.0, Et=500.0),
        MaterialSpec(E=110000.0, sigma_y=200.0, Et=1000.0),
    )


@pytest.fixture
def small_penet(small_generator, small_datasets):
    """PE-NET montada com pesos aleatórios e escalas do Dataset1 pequeno."""
    dataset1, _ = small_datasets
    train1, _ = split_dataset(dataset1, seed=0)
    input_norm, label_norm = fit_spnet_normalizers(train1, small_generator.process_features())
    sp = build_spnet(input_norm, label_norm, seed=3)
    es = build_esnet(small_generator.bounds.for_features(BMT_SHAPE_FEATURES), sp.shape_norm, seed=4)
    return assemble(es, sp, small_generator.lambda2, loss_config=CompositeLossConfig())
