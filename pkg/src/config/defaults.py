"""
Valores padrão da configuração de experimento.

O dicionário tem a mesma forma de ExperimentConfig e serve de base para a
mesclagem com .env, arquivo JSON e variáveis de ambiente.
"""

from typing import Any, Dict


def _stage(epochs: int, minibatch_size: int, initial_lr: float, lr_decay_factor: float) -> Dict[str, Any]:
    return {
        "epochs": epochs,
        "minibatch_size": minibatch_size,
        "initial_lr": initial_lr,
        "lr_decay_factor": lr_decay_factor,
        "lr_drop_period_epochs": 20,
        "seed": 0,
    }


def get_default_config() -> Dict[str, Any]:
    """
    Retorna a configuração padrão completa.

    Returns:
        Dicionário aninhado com todos os padrões
    """
    config = {
        "generator": {
            "seed": 2023,
            "n1": 600,  # Dataset1: tubos de camada única
            "n2": 80,  # Dataset2: tubos bimetálicos
            "outer_material": {"E": 80700.0, "sigma_y": 150.0, "Et": 500.0,
                               "hardening": "linear", "n_power": 0.2},
            "inner_material": {"E": 110000.0, "sigma_y": 200.0, "Et": 1000.0,
                               "hardening": "linear", "n_power": 0.2},
            "bounds": {
                "Do": [12.0, 30.0],  # mm
                "T": [0.8, 2.5],  # mm
                "Tr": [0.2, 0.8],
                "RB": [40.0, 120.0],  # mm
                "alphaB": [30.0, 120.0],  # graus
                "vB": [5.0, 20.0],  # mm/s
                "omegaB": [0.2, 1.0],  # rad/s
                "Lp_die": [0.0, 50.0],
                "gap": [0.0, 0.5],
                "friction": [0.05, 0.3],
            },
            "noise_sigma": 0.05,  # graus
            "c_v": 0.02,
            "c_omega": 0.01,
            "grid": {"n_radial": 64, "n_angular": 256, "n_strips": 400000},
            "integration": "polar",
            "include_optional_features": False,
            "invert_tr": False,
        },
        "dataset1_path": None,
        "dataset2_path": None,
        "es_train": _stage(300, 5, 0.005, 0.9),
        "sp_train": _stage(200, 5, 0.005, 0.9),
        "finetune_train": _stage(100, 2, 1e-4, 0.8),
        "loss": {
            "gate_delta": 0.05,
            "aggregation": "mean",
            "freeze_sp": False,
            "use_theory_loss": True,
        },
        "n_runs": 10,  # 30 na reprodução completa
        "master_seed": 0,
        "methods": ["PE-NET", "PE-NET-WMA", "PE-NET-WSP", "BL-NET", "BP-NET"],
        "n_theory": 500,
        "train_frac": 0.8,
        "stage1_selection": "per_run",
        "hidden_activation": "tanh",
        "output_dir": "results",
        "jobs": 1,
        "show_progress": False,
    }

    return config
