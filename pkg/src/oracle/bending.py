"""
Oráculo de retorno elástico por flexão pura elasto-plástica.

Este módulo substitui a simulação por elementos finitos: a seção plana do
tubo é fletida até a curvatura κ = 1/RB, o momento de carregamento é obtido
por integração da lei constitutiva sobre a seção e o descarregamento é
elástico (Δκ = M / ΣE_k·I_k). Para anéis concêntricos a linha neutra não se
desloca, então ε = κ·y em toda a seção.

Duas integrações independentes estão disponíveis:
    - loading_moment: quadratura polar (Gauss-Legendre por trechos, com
      quebras no raio e nos ângulos de escoamento);
    - loading_moment_strips: soma direta de faixas 1-D ao longo de y.
"""

import math
from dataclasses import dataclass
from typing import Literal, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from src.section.equivalence import BmtShape, SingleShape, annulus_inertia
from src.utils.errors import GeometryError, InvalidMaterialError
from src.utils.logger import get_logger

logger = get_logger(__name__)


class MaterialSpec(BaseModel):
    """
    Material elasto-plástico com encruamento.

    Attributes:
        E: Módulo de elasticidade (MPa)
        sigma_y: Tensão de escoamento (MPa)
        Et: Módulo tangente do ramo plástico (MPa), usado no encruamento linear
        hardening: "linear" (bilinear) ou "power" (σ = σ_y·(E|ε|/σ_y)^n)
        n_power: Expoente do encruamento potencial
    """

    model_config = ConfigDict(frozen=True)

    E: float
    sigma_y: float
    Et: float = 0.0
    hardening: Literal["linear", "power"] = "linear"
    n_power: float = Field(default=0.2, gt=0.0, lt=1.0)

    @model_validator(mode="after")
    def _check_constants(self) -> "MaterialSpec":
        if self.E <= 0 or self.sigma_y <= 0:
            raise InvalidMaterialError(
                f"E e sigma_y devem ser positivos (E={self.E}, sigma_y={self.sigma_y})"
            )
        if not 0 <= self.Et < self.E:
            raise InvalidMaterialError(f"Et fora de [0, E) (Et={self.Et}, E={self.E})")
        return self

    @property
    def yield_strain(self) -> float:
        return self.sigma_y / self.E

    def stress(self, strain: np.ndarray) -> np.ndarray:
        """Tensão (MPa) para a deformação dada, ímpar em ε."""
        strain = np.asarray(strain, dtype=float)
        magnitude = np.abs(strain)
        eps_y = self.yield_strain
        if self.hardening == "linear":
            plastic = self.sigma_y + self.Et * (magnitude - eps_y)
        else:
            plastic = self.sigma_y * np.power(np.maximum(magnitude, eps_y) / eps_y, self.n_power)
        return np.sign(strain) * np.where(magnitude <= eps_y, self.E * magnitude, plastic)


class GridConfig(BaseModel):
    """Resolução das integrações numéricas."""

    n_radial: int = Field(default=64, ge=2)
    n_angular: int = Field(default=256, ge=16)
    n_strips: int = Field(default=400_000, ge=100)


class ProcessFactorConfig(BaseModel):
    """
    Fator de processo determinístico g aplicado ao retorno puro.

    g = 1 + c_v·tanh((vB - v_ref)/v_ref) + c_omega·tanh((ωB - ω_ref)/ω_ref)
    """

    v_ref: float = Field(default=12.5, gt=0.0)
    omega_ref: float = Field(default=0.6, gt=0.0)
    c_v: float = 0.02
    c_omega: float = 0.01

    def factor(self, process: "ProcessParams") -> float:
        return (
            1.0
            + self.c_v * math.tanh((process.vB - self.v_ref) / self.v_ref)
            + self.c_omega * math.tanh((process.omegaB - self.omega_ref) / self.omega_ref)
        )


@dataclass(frozen=True)
class ProcessParams:
    """
    Fatores de processo da flexão rotativa.

    Attributes:
        RB: Raio da matriz de dobra (mm)
        alphaB: Ângulo de dobra (graus)
        vB: Velocidade de avanço da matriz de pressão (mm/s)
        omegaB: Velocidade angular de processamento (rad/s)
        Lp_die: Posição inicial da matriz de pressão (mm)
        gap: Folga entre tubo e ferramentas (mm)
        friction: Coeficiente de atrito
    """

    RB: float
    alphaB: float
    vB: float = 12.5
    omegaB: float = 0.6
    Lp_die: Optional[float] = None
    gap: Optional[float] = None
    friction: Optional[float] = None

    def __post_init__(self) -> None:
        if self.RB <= 0 or self.alphaB <= 0:
            raise GeometryError(
                f"RB e alphaB devem ser positivos (RB={self.RB}, alphaB={self.alphaB})"
            )
        for name in ("Lp_die", "gap", "friction"):
            value = getattr(self, name)
            if value is not None and value < 0:
                raise GeometryError(f"{name} não pode ser negativo ({value})")

    @property
    def curvature(self) -> float:
        return 1.0 / self.RB


# Camada = ((r_in, r_out), material)
Layer = Tuple[Tuple[float, float], MaterialSpec]


def _check_layers(layers: Sequence[Layer]) -> list:
    """Valida e ordena as camadas pelo raio interno."""
    ordered = sorted(layers, key=lambda layer: layer[0][0])
    for (r_in, r_out), _ in ordered:
        if r_in < 0 or r_out <= r_in:
            raise GeometryError(f"Camada inválida (r_in={r_in}, r_out={r_out})")
    for (prev, _), (cur, _) in zip(ordered, ordered[1:]):
        # Tolerância para raios de junção calculados por caminhos diferentes
        if cur[0] < prev[1] - 1e-12 * max(1.0, prev[1]):
            raise GeometryError(f"Camadas sobrepostas: {prev} e {cur}")
    return ordered


def _radial_pieces(r_in: float, r_out: float, rho_y: float) -> list:
    if r_in < rho_y < r_out:
        return [(r_in, rho_y), (rho_y, r_out)]
    return [(r_in, r_out)]


def _layer_moment_polar(
    r_in: float,
    r_out: float,
    material: MaterialSpec,
    kappa: float,
    n_radial: int,
    n_angular: int
) -> float:
    rho_y = material.yield_strain / kappa
    # Dois trechos angulares por quadrante
    n_theta = max(n_angular // 8, 4)
    x_r, w_r = np.polynomial.legendre.leggauss(n_radial)
    x_t, w_t = np.polynomial.legendre.leggauss(n_theta)

    total = 0.0
    for lo, hi in _radial_pieces(r_in, r_out, rho_y):
        rho = (0.5 * (hi - lo) * (x_r + 1.0) + lo)[:, None]
        w_rho = (0.5 * (hi - lo) * w_r)[:, None]
        theta_y = np.arcsin(np.minimum(1.0, rho_y / rho))

        for a, b in ((np.zeros_like(theta_y), theta_y), (theta_y, np.full_like(theta_y, np.pi / 2))):
            half = 0.5 * (b - a)
            theta = half * (x_t[None, :] + 1.0) + a
            y = rho * np.sin(theta)
            integrand = material.stress(kappa * y) * y * rho
            total += float(np.sum(w_rho * half * w_t[None, :] * integrand))
    return 4.0 * total


def loading_moment(
    kappa: float,
    layers: Sequence[Layer],
    grid: Optional[GridConfig] = None
) -> float:
    """
    Momento de carregamento M = ∫ σ(κ·y)·y dA sobre a seção (N·mm).

    Args:
        kappa: Curvatura (1/mm), não negativa
        layers: Lista de ((r_in, r_out), MaterialSpec) concêntricas e disjuntas
        grid: Resolução da quadratura polar

    Returns:
        Momento em N·mm

    Raises:
        GeometryError: Se as camadas forem inválidas ou sobrepostas
    """
    if kappa < 0:
        raise GeometryError(f"Curvatura negativa ({kappa})")
    grid = grid or GridConfig()
    ordered = _check_layers(layers)
    if kappa == 0:
        return 0.0
    return sum(
        _layer_moment_polar(r_in, r_out, material, kappa, grid.n_radial, grid.n_angular)
        for (r_in, r_out), material in ordered
    )


def loading_moment_strips(
    kappa: float,
    layers: Sequence[Layer],
    n_strips: int = 400_000
) -> float:
    """
    Momento de carregamento por soma de faixas horizontais (1-D).

    Cada faixa em y tem largura igual à corda da camada naquela altura;
    a soma usa pontos médios em [0, r_out] e dobra pela simetria.
    """
    if kappa < 0:
        raise GeometryError(f"Curvatura negativa ({kappa})")
    ordered = _check_layers(layers)
    if kappa == 0:
        return 0.0

    total = 0.0
    for (r_in, r_out), material in ordered:
        h = r_out / n_strips
        y = (np.arange(n_strips) + 0.5) * h
        chord = 2.0 * (
            np.sqrt(np.maximum(r_out * r_out - y * y, 0.0))
            - np.sqrt(np.maximum(r_in * r_in - y * y, 0.0))
        )
        total += float(np.sum(material.stress(kappa * y) * y * chord) * h)
    return 2.0 * total


def shape_layers(
    shape: Union[BmtShape, SingleShape],
    materials: Sequence[MaterialSpec],
    invert_tr: bool = False
) -> list:
    """
    Camadas ((r_in, r_out), material) de uma forma de tubo.

    Para BmtShape, materials = (externo, interno); para SingleShape só o
    primeiro material é usado. Camadas de espessura nula são omitidas.
    """
    if isinstance(shape, BmtShape):
        if len(materials) < 2:
            raise InvalidMaterialError("Tubo bimetálico exige dois materiais")
        section = shape.to_section(E1=materials[0].E, E2=materials[1].E, invert_tr=invert_tr)
        layers = []
        if section.t1 > 0:
            layers.append(((section.r, section.outer_radius), materials[0]))
        if section.t2 > 0:
            layers.append(((section.inner_radius, section.r), materials[1]))
        return layers
    return [((shape.inner_radius, shape.outer_radius), materials[0])]


def flexural_rigidity(layers: Sequence[Layer]) -> float:
    """Rigidez elástica à flexão Σ E_k·I_k (N·mm²)."""
    return sum(material.E * annulus_inertia(r_out, r_in) for (r_in, r_out), material in layers)


def max_fiber_strain(shape: Union[BmtShape, SingleShape], RB: float) -> float:
    """Deformação na fibra mais externa para a curvatura 1/RB."""
    outer = shape.Do / 2.0 if isinstance(shape, BmtShape) else shape.outer_radius
    return outer / RB


def springback_angle(
    shape: Union[BmtShape, SingleShape],
    process: ProcessParams,
    materials: Sequence[MaterialSpec],
    noise_sigma: float = 0.0,
    rng_seed: Optional[Union[int, Sequence[int]]] = None,
    process_factor: Optional[ProcessFactorConfig] = None,
    grid: Optional[GridConfig] = None,
    integration: Literal["polar", "strip"] = "polar",
    invert_tr: bool = False
) -> float:
    """
    Ângulo de retorno elástico Δα (graus).

    Δα_puro = αB · RB · M(1/RB) / ΣE_k·I_k; o valor devolvido é
    Δα_puro · g(processo) + ruído ~ Normal(0, noise_sigma²).

    Args:
        shape: Forma do tubo (bimetálico ou único)
        process: Parâmetros de processo
        materials: Materiais por camada (externo primeiro)
        noise_sigma: Desvio padrão do ruído (graus)
        rng_seed: Semente (ou sequência de entropia) do gerador do ruído
        process_factor: Configuração de g; None significa g ≡ 1
        grid: Resolução da integração
        integration: "polar" ou "strip"
        invert_tr: Convenção invertida de Tr

    Returns:
        Δα em graus
    """
    grid = grid or GridConfig()
    layers = shape_layers(shape, materials, invert_tr=invert_tr)
    kappa = process.curvature
    if integration == "strip":
        moment = loading_moment_strips(kappa, layers, n_strips=grid.n_strips)
    else:
        moment = loading_moment(kappa, layers, grid=grid)

    delta = process.alphaB * process.RB * moment / flexural_rigidity(layers)
    if process_factor is not None:
        delta *= process_factor.factor(process)
    if noise_sigma > 0:
        rng = np.random.default_rng(rng_seed)
        delta += float(rng.normal(0.0, noise_sigma))
    return delta
