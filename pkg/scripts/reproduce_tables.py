#!/usr/bin/env python3
"""
Reprodução completa das tabelas de resultados.

Gera os datasets uma vez, roda o experimento dos dois estágios e as
ablações com 30 execuções cada e grava os relatórios em subdiretórios de
`--out`. Leva horas com jobs=1.
"""

import argparse
import os
import sys

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from src.harness.experiment import load_or_generate, run_ablations, run_experiment
from src.harness.report import emit_report, format_report
from src.utils.config import load_config
from src.utils.logger import get_logger

logger = get_logger("reproduce")


def print_header(message):
    """Imprime uma mensagem formatada como cabeçalho."""
    print("\n" + "=" * 60)
    print(f" {message}")
    print("=" * 60 + "\n")


def main():
    parser = argparse.ArgumentParser(description="Reproduz as tabelas de RMSE com 30 execuções")
    parser.add_argument("--config", default=None)
    parser.add_argument("--out", default="results/reproduction")
    parser.add_argument("--runs", type=int, default=30)
    parser.add_argument("--jobs", type=int, default=1)
    args = parser.parse_args()

    cfg = load_config(args.config).model_copy(
        update={"n_runs": args.runs, "jobs": args.jobs, "show_progress": True}
    )
    datasets = load_or_generate(cfg)

    diverged = False
    for name, runner in (("experiment", run_experiment), ("ablation", run_ablations)):
        logger.info(f"Iniciando {name} com {cfg.n_runs} execuções")
        report = runner(cfg, datasets=datasets)
        emit_report(report, os.path.join(args.out, name))
        print_header(name)
        print(format_report(report))
        diverged = diverged or report.any_diverged

    return 1 if diverged else 0


if __name__ == "__main__":
    sys.exit(main())
