"""
Relatórios de experimento: medianas, dados de box-plot e arquivos de saída.

Os arquivos são escritos com chaves e linhas em ordem estável, então o
mesmo lote produz bytes idênticos.
"""

import json
import math
import os
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd
from tabulate import tabulate

from src.nn.persistence import load_json, save_json
from src.utils.errors import ArtifactIOError
from src.utils.logger import get_logger

logger = get_logger(__name__)

BOX_COLUMNS = ["method", "min", "q1", "median", "q3", "max"]
RUN_COLUMNS = ["method", "seed", "rmse"]

# Valores publicados com dados de elementos finitos; servem só de referência
PUBLISHED_REFERENCES: Dict[str, Any] = {
    "note": "referência, fonte de dados diferente (simulação por elementos finitos)",
    "stage1": {"SP-NET": 0.7672, "ES-NET Do": 0.7133, "ES-NET T": 0.4916},
    "methods": {
        "PE-NET": 0.3922,
        "PE-NET-WMA": 0.6019,
        "BP-NET": 6.3572,
        "BL-NET": 6.9424,
        "PE-NET-WSP": 23.7527,
    },
    "theory_baseline": 1.6164,
}


@dataclass
class RunRecord:
    """
    Resultado de uma execução.

    Attributes:
        run_index: Índice da execução no lote
        seed: Semente da execução (master_seed + run_index)
        rmse: RMSE de teste (graus) por método; None se divergiu
        untuned_rmse: RMSE da PE-NET montada antes do ajuste fino
        stage1: Métricas do primeiro estágio
        errors: Mensagem de erro por método que divergiu
    """

    run_index: int
    seed: int
    rmse: Dict[str, Optional[float]] = field(default_factory=dict)
    untuned_rmse: Optional[float] = None
    stage1: Dict[str, float] = field(default_factory=dict)
    errors: Dict[str, str] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "run_index": self.run_index,
            "seed": self.seed,
            "rmse": dict(self.rmse),
            "untuned_rmse": self.untuned_rmse,
            "stage1": dict(self.stage1),
            "errors": dict(self.errors),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "RunRecord":
        return cls(
            run_index=int(data["run_index"]),
            seed=int(data["seed"]),
            rmse=dict(data.get("rmse", {})),
            untuned_rmse=data.get("untuned_rmse"),
            stage1=dict(data.get("stage1", {})),
            errors=dict(data.get("errors", {})),
        )


@dataclass
class ExperimentReport:
    """
    Relatório de um lote de execuções.

    Attributes:
        kind: "experiment" ou "ablation"
        methods: Métodos avaliados, na ordem de saída
        runs: Registros por execução
        medians: Mediana do RMSE por método (None se todas divergiram)
        box: Estatísticas de box-plot por método
        stage1_medians: Medianas das métricas do primeiro estágio
        untuned_median: Mediana do RMSE da PE-NET sem ajuste fino
        theory_rmse: RMSE da linha de base teórica
        theory_failed: Amostras excluídas da linha de base
        failed_runs: Pares "execução:método" que divergiram
        references: Valores publicados, apenas como referência
        provenance: Hash de configuração e sementes
    """

    kind: str
    methods: List[str]
    runs: List[RunRecord]
    medians: Dict[str, Optional[float]]
    box: Dict[str, Dict[str, float]]
    stage1_medians: Dict[str, float]
    untuned_median: Optional[float]
    theory_rmse: Optional[float]
    theory_failed: List[int]
    failed_runs: List[str]
    references: Dict[str, Any] = field(default_factory=lambda: dict(PUBLISHED_REFERENCES))
    provenance: Dict[str, Any] = field(default_factory=dict)

    @property
    def any_diverged(self) -> bool:
        return bool(self.failed_runs)

    def values(self, method: str) -> List[float]:
        """RMSEs finitos do método, na ordem das execuções."""
        return [r.rmse[method] for r in self.runs if r.rmse.get(method) is not None]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "kind": self.kind,
            "methods": list(self.methods),
            "runs": [r.to_dict() for r in self.runs],
            "medians": dict(self.medians),
            "box": {k: dict(v) for k, v in self.box.items()},
            "stage1_medians": dict(self.stage1_medians),
            "untuned_median": self.untuned_median,
            "theory_rmse": self.theory_rmse,
            "theory_failed": list(self.theory_failed),
            "failed_runs": list(self.failed_runs),
            "references": self.references,
            "provenance": self.provenance,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ExperimentReport":
        return cls(
            kind=data["kind"],
            methods=list(data["methods"]),
            runs=[RunRecord.from_dict(r) for r in data["runs"]],
            medians=dict(data["medians"]),
            box={k: dict(v) for k, v in data["box"].items()},
            stage1_medians=dict(data.get("stage1_medians", {})),
            untuned_median=data.get("untuned_median"),
            theory_rmse=data.get("theory_rmse"),
            theory_failed=list(data.get("theory_failed", [])),
            failed_runs=list(data.get("failed_runs", [])),
            references=data.get("references", {}),
            provenance=data.get("provenance", {}),
        )


def box_stats(values: List[float]) -> Dict[str, float]:
    """
    Mínimo, quartis (interpolação linear inclusiva) e máximo.

    Raises:
        ValueError: Se a lista for vazia
    """
    if not values:
        raise ValueError("Estatísticas de box-plot de lista vazia")
    q = np.percentile(np.asarray(values, dtype=float), [0, 25, 50, 75, 100], method="linear")
    return dict(zip(BOX_COLUMNS[1:], (float(v) for v in q)))


def _median(values: List[float]) -> Optional[float]:
    return float(np.median(values)) if values else None


def _finite_or_none(value: Optional[float]) -> Optional[float]:
    return value if value is not None and math.isfinite(value) else None


def build_report(
    kind: str,
    methods: List[str],
    records: List[RunRecord],
    theory_rmse: Optional[float] = None,
    theory_failed: Optional[List[int]] = None,
    provenance: Optional[Dict[str, Any]] = None
) -> ExperimentReport:
    """Agrega os registros por execução em medianas e dados de box-plot."""
    records = sorted(records, key=lambda r: r.run_index)
    medians: Dict[str, Optional[float]] = {}
    box: Dict[str, Dict[str, float]] = {}
    failed: List[str] = []

    for method in methods:
        values = [r.rmse[method] for r in records if r.rmse.get(method) is not None]
        failed.extend(f"{r.run_index}:{method}" for r in records if r.rmse.get(method) is None)
        medians[method] = _median(values)
        if values:
            box[method] = box_stats(values)

    stage1_keys = sorted({key for r in records for key in r.stage1})
    stage1_medians = {
        key: _median([r.stage1[key] for r in records if key in r.stage1]) for key in stage1_keys
    }
    untuned = [r.untuned_rmse for r in records if r.untuned_rmse is not None]

    if failed:
        logger.warning(f"{len(failed)} treinamento(s) divergiram: {failed}")

    return ExperimentReport(
        kind=kind,
        methods=list(methods),
        runs=records,
        medians=medians,
        box=box,
        stage1_medians=stage1_medians,
        untuned_median=_median(untuned),
        theory_rmse=_finite_or_none(theory_rmse),
        theory_failed=list(theory_failed or []),
        failed_runs=failed,
        provenance=dict(provenance or {}),
    )


def runs_frame(report: ExperimentReport) -> pd.DataFrame:
    """Tabela (method, seed, rmse) sem as execuções que divergiram."""
    rows = [
        (method, r.seed, r.rmse[method])
        for method in report.methods
        for r in report.runs
        if r.rmse.get(method) is not None
    ]
    return pd.DataFrame(rows, columns=RUN_COLUMNS)


def box_frame(report: ExperimentReport) -> pd.DataFrame:
    rows = [[method] + [report.box[method][c] for c in BOX_COLUMNS[1:]]
            for method in report.methods if method in report.box]
    return pd.DataFrame(rows, columns=BOX_COLUMNS)


def emit_report(report: ExperimentReport, out_dir: str) -> List[str]:
    """
    Grava report.json, rmse_runs.csv e boxplot.csv em `out_dir`.

    Returns:
        Caminhos gravados

    Raises:
        ArtifactIOError: Em falhas de escrita
    """
    json_path = save_json(report.to_dict(), os.path.join(out_dir, "report.json"))
    paths = [json_path]
    for name, frame in (("rmse_runs.csv", runs_frame(report)), ("boxplot.csv", box_frame(report))):
        path = os.path.join(out_dir, name)
        try:
            frame.to_csv(path, index=False, lineterminator="\n", encoding="utf-8")
        except OSError as e:
            raise ArtifactIOError(f"Falha ao salvar relatório ({e})", path) from e
        paths.append(path)

    logger.info(f"Relatório salvo em {out_dir}")
    return paths


def load_report(in_dir: str) -> ExperimentReport:
    """
    Lê o report.json de um diretório.

    Raises:
        ArtifactIOError: Se o arquivo não existir ou for inválido
    """
    path = os.path.join(in_dir, "report.json")
    data = load_json(path)
    try:
        return ExperimentReport.from_dict(data)
    except (KeyError, TypeError) as e:
        raise ArtifactIOError(f"Relatório inválido ({e})", path) from e


def _fmt(value: Optional[float]) -> str:
    return "-" if value is None else f"{value:.4f}"


def format_report(report: ExperimentReport) -> str:
    """Tabela de medianas e quartis ao lado dos valores de referência."""
    references = report.references.get("methods", {})
    rows = []
    for method in report.methods:
        box = report.box.get(method, {})
        rows.append([
            method,
            len(report.values(method)),
            _fmt(report.medians.get(method)),
            _fmt(box.get("q1")),
            _fmt(box.get("q3")),
            _fmt(references.get(method)),
        ])
    table = tabulate(
        rows,
        headers=["Método", "Execuções", "Mediana (°)", "Q1", "Q3", "Referência (°)"],
        tablefmt="github",
    )

    lines = [table, ""]
    stage1_refs = report.references.get("stage1", {})
    names = {"sp_rmse": "SP-NET", "es_rmse_Do": "ES-NET Do", "es_rmse_T": "ES-NET T"}
    for key, label in names.items():
        if key in report.stage1_medians:
            lines.append(
                f"{label}: mediana {_fmt(report.stage1_medians[key])} "
                f"(referência {_fmt(stage1_refs.get(label))})"
            )
    if report.untuned_median is not None:
        lines.append(f"PE-NET sem ajuste fino: mediana {_fmt(report.untuned_median)}")
    lines.append(
        f"Linha de base teórica: {_fmt(report.theory_rmse)} "
        f"(referência {_fmt(report.references.get('theory_baseline'))})"
    )
    if report.failed_runs:
        lines.append(f"Divergências: {', '.join(report.failed_runs)}")
    lines.append(f"Nota: {report.references.get('note', '')}")
    return "\n".join(lines)


def dumps_report(report: ExperimentReport) -> str:
    """JSON do relatório com chaves ordenadas."""
    return json.dumps(report.to_dict(), indent=2, sort_keys=True, ensure_ascii=False)
