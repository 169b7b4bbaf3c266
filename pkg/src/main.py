#!/usr/bin/env python3
"""
Retorno - Previsão de Retorno Elástico em Tubos Bimetálicos
-----------------------------------------------------------

Interface de linha de comando:
1. equiv: forma equivalente de um tubo bimetálico
2. gen-data: geração de Dataset1 e Dataset2
3. pre-explore / pretrain / finetune: os dois estágios da PE-NET
4. predict / eval: uso de um modelo salvo
5. experiment / ablate / report: lotes com várias sementes e relatórios

Saída de resultados vai para stdout; logs vão para stderr.
"""

import argparse
import json
import os
import sys
from typing import List, Optional

import pandas as pd
from pydantic import ValidationError

# Adicionar o diretório raiz ao Python path
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from src.core.finetune import finetune
from src.core.pe_net import (
    PeNet,
    assemble,
    build_esnet,
    build_spnet,
    fit_spnet_normalizers,
    load_esnet,
    load_penet,
    load_spnet,
    pre_explore_esnet,
    predict,
    pretrain_spnet,
    save_esnet,
    save_penet,
    save_spnet,
)
from src.harness.experiment import (
    ExperimentConfig,
    run_ablations,
    run_experiment,
    theory_baseline,
)
from src.harness.report import emit_report, format_report, load_report
from src.nn.normalizer import normalizer_from_bounds
from src.nn.training import rmse
from src.oracle.dataset import (
    BMT_SHAPE_FEATURES,
    LABEL,
    SINGLE_SHAPE_FEATURES,
    generate_datasets,
    load_dataset_csv,
    split_dataset,
)
from src.section.equivalence import BmtShape, equivalence_summary
from src.utils.config import config_hash, load_config
from src.utils.errors import RetornoError
from src.utils.logger import get_logger, set_global_level

logger = get_logger("retorno")

EXIT_DIVERGED = 1
EXIT_ERROR = 2


def _print_json(payload: dict) -> None:
    print(json.dumps(payload, indent=2, sort_keys=True, ensure_ascii=False))


def _config(args: argparse.Namespace) -> ExperimentConfig:
    cfg = load_config(getattr(args, "config", None))
    updates = {}
    if getattr(args, "runs", None) is not None:
        updates["n_runs"] = args.runs
    if getattr(args, "jobs", None) is not None:
        updates["jobs"] = args.jobs
    if getattr(args, "out", None) is not None and args.command in ("experiment", "ablate"):
        updates["output_dir"] = args.out
    # Revalida para aplicar as restrições dos campos sobrescritos
    return ExperimentConfig.model_validate({**cfg.model_dump(), **updates})


def cmd_equiv(args: argparse.Namespace) -> int:
    cfg = _config(args)
    E1 = args.E1 if args.E1 is not None else cfg.generator.outer_material.E
    E2 = args.E2 if args.E2 is not None else cfg.generator.inner_material.E
    shape = BmtShape(Do=args.Do, T=args.T, Tr=args.Tr)
    _print_json(equivalence_summary(shape, E1, E2, invert_tr=cfg.generator.invert_tr))
    return 0


def cmd_gen_data(args: argparse.Namespace) -> int:
    cfg = _config(args)
    generator = cfg.generator
    if args.seed is not None:
        generator = generator.model_copy(update={"seed": args.seed})
    dataset1, dataset2 = generate_datasets(
        generator, out_dir=args.out, jobs=cfg.jobs, show_progress=cfg.show_progress
    )
    _print_json({"dataset1": len(dataset1), "dataset2": len(dataset2), "out": args.out})
    return 0


def cmd_pretrain(args: argparse.Namespace) -> int:
    cfg = _config(args)
    dataset1 = load_dataset_csv(args.dataset1)
    train1, _ = split_dataset(dataset1, train_frac=cfg.train_frac, seed=cfg.master_seed)
    input_norm, label_norm = fit_spnet_normalizers(train1, cfg.generator.process_features())
    sp = build_spnet(input_norm, label_norm, seed=cfg.sp_train.seed, hidden_activation=cfg.hidden_activation)
    sp, report = pretrain_spnet(sp, dataset1, cfg.sp_train, split_seed=cfg.master_seed, train_frac=cfg.train_frac)
    save_spnet(sp, args.out, provenance={
        "config_hash": config_hash(cfg.model_dump(mode="json")),
        "split_seed": cfg.master_seed,
        "test_rmse": report.test_rmse,
    })
    _print_json({"test_rmse": report.test_rmse, "baseline_rmse": report.baseline_rmse, "model": args.out})
    return 0


def cmd_pre_explore(args: argparse.Namespace) -> int:
    cfg = _config(args)
    bounds = cfg.generator.bounds
    if args.sp:
        output_norm = load_spnet(args.sp).shape_norm
    else:
        output_norm = normalizer_from_bounds(SINGLE_SHAPE_FEATURES, bounds.for_features(SINGLE_SHAPE_FEATURES))
    es = build_esnet(
        bounds.for_features(BMT_SHAPE_FEATURES), output_norm,
        seed=cfg.es_train.seed, hidden_activation=cfg.hidden_activation,
    )
    es, report = pre_explore_esnet(
        es, bounds.for_features(BMT_SHAPE_FEATURES), cfg.n_theory, cfg.generator.lambda2,
        cfg.es_train, invert_tr=cfg.generator.invert_tr,
    )
    save_esnet(es, args.out, provenance={
        "config_hash": config_hash(cfg.model_dump(mode="json")),
        "n_theory": cfg.n_theory,
        "rmse_normalized": report.rmse_normalized,
    })
    _print_json({
        "rmse_normalized": report.rmse_normalized,
        "rmse_Do": report.rmse_Do,
        "rmse_T": report.rmse_T,
        "model": args.out,
    })
    return 0


def cmd_finetune(args: argparse.Namespace) -> int:
    cfg = _config(args)
    dataset2 = load_dataset_csv(args.dataset2)
    pe = assemble(
        load_esnet(args.es), load_spnet(args.sp), cfg.generator.lambda2,
        loss_config=cfg.loss, invert_tr=cfg.generator.invert_tr,
        provenance={"config_hash": config_hash(cfg.model_dump(mode="json")), "split_seed": cfg.master_seed},
    )
    result = finetune(pe, dataset2, cfg.finetune_train, cfg.loss, split_seed=cfg.master_seed, train_frac=cfg.train_frac)
    save_penet(result.pe, args.out)
    _print_json({
        "test_rmse": result.test_rmse,
        "untuned_test_rmse": result.untuned_test_rmse,
        "trace": [
            {"epoch": t.epoch, "loss_p": t.loss_p, "loss_d": t.loss_d, "z": t.z}
            for t in result.trace
        ],
        "model": args.out,
    })
    return 0


def cmd_predict(args: argparse.Namespace) -> int:
    pe = load_penet(args.model)
    frame = pd.read_csv(args.input, encoding="utf-8")
    result = predict(pe, frame)
    out = pd.DataFrame({LABEL: result.values, "out_of_range": result.out_of_range})
    if args.output:
        out.to_csv(args.output, index=False, lineterminator="\n", encoding="utf-8")
        logger.info(f"Previsões salvas em {args.output}")
    else:
        out.to_csv(sys.stdout, index=False, lineterminator="\n")
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    pe: PeNet = load_penet(args.model)
    dataset = load_dataset_csv(args.dataset)
    result = predict(pe, dataset)
    _print_json({
        "rmse": rmse(result.values, dataset.labels),
        "n": len(dataset),
        "out_of_range": int(result.out_of_range.sum()),
    })
    return 0


def cmd_theory(args: argparse.Namespace) -> int:
    cfg = _config(args)
    result = theory_baseline(load_dataset_csv(args.dataset2), cfg.generator)
    _print_json({"rmse": result.rmse, "n_used": result.n_used, "failed_indices": result.failed_indices})
    return 0


def _run_batch(args: argparse.Namespace, runner) -> int:
    cfg = _config(args)
    report = runner(cfg)
    emit_report(report, cfg.output_dir)
    print(format_report(report))
    return EXIT_DIVERGED if report.any_diverged else 0


def cmd_experiment(args: argparse.Namespace) -> int:
    return _run_batch(args, run_experiment)


def cmd_ablate(args: argparse.Namespace) -> int:
    return _run_batch(args, run_ablations)


def cmd_report(args: argparse.Namespace) -> int:
    report = load_report(args.input)
    print(format_report(report))
    return EXIT_DIVERGED if report.any_diverged else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="retorno",
        description="Previsão de retorno elástico em tubos bimetálicos com PE-NET",
    )
    parser.add_argument("--log-level", default=None, help="DEBUG, INFO, WARNING, ERROR")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("equiv", help="Forma equivalente de um tubo bimetálico")
    p.add_argument("--Do", type=float, required=True)
    p.add_argument("--T", type=float, required=True)
    p.add_argument("--Tr", type=float, required=True)
    p.add_argument("--E1", type=float, default=None, help="Módulo da camada externa (MPa)")
    p.add_argument("--E2", type=float, default=None, help="Módulo da camada interna (MPa)")
    p.add_argument("--config", default=None)
    p.set_defaults(func=cmd_equiv)

    p = sub.add_parser("gen-data", help="Gera dataset1.csv e dataset2.csv")
    p.add_argument("--config", default=None)
    p.add_argument("--seed", type=int, default=None, help="Sobrescreve generator.seed")
    p.add_argument("--out", required=True)
    p.add_argument("--jobs", type=int, default=None)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("pre-explore", help="Pré-exploração da ES-NET pela teoria")
    p.add_argument("--config", default=None)
    p.add_argument("--sp", default=None, help="SP-NET cuja escala de (Do, T) a ES-NET deve usar")
    p.add_argument("--out", default="es_net.json")
    p.set_defaults(func=cmd_pre_explore)

    p = sub.add_parser("pretrain", help="Pré-treino da SP-NET no Dataset1")
    p.add_argument("--dataset1", required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--out", default="sp_net.json")
    p.set_defaults(func=cmd_pretrain)

    p = sub.add_parser("finetune", help="Ajuste fino da PE-NET no Dataset2")
    p.add_argument("--dataset2", required=True)
    p.add_argument("--es", required=True)
    p.add_argument("--sp", required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--out", default="pe_net.json")
    p.set_defaults(func=cmd_finetune)

    p = sub.add_parser("predict", help="Previsão com uma PE-NET salva")
    p.add_argument("--model", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--output", default=None)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("eval", help="RMSE de uma PE-NET salva num dataset")
    p.add_argument("--model", required=True)
    p.add_argument("--dataset", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("theory", help="RMSE da linha de base teórica no Dataset2")
    p.add_argument("--dataset2", required=True)
    p.add_argument("--config", default=None)
    p.set_defaults(func=cmd_theory)

    for name, func, text in (
        ("experiment", cmd_experiment, "Experimento dos dois estágios com várias sementes"),
        ("ablate", cmd_ablate, "Experimentos de controle"),
    ):
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", default=None)
        p.add_argument("--out", default=None)
        p.add_argument("--runs", type=int, default=None)
        p.add_argument("--jobs", type=int, default=None)
        p.set_defaults(func=func)

    p = sub.add_parser("report", help="Mostra um relatório salvo")
    p.add_argument("--in", dest="input", required=True)
    p.set_defaults(func=cmd_report)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Função principal da CLI; devolve o código de saída."""
    args = build_parser().parse_args(argv)
    if args.log_level:
        set_global_level(args.log_level)

    try:
        return args.func(args)
    except (RetornoError, ValidationError) as e:
        logger.error(str(e))
        return EXIT_ERROR
    except KeyboardInterrupt:
        logger.warning("Operação cancelada pelo usuário.")
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
