"""
Motor de seção transformada para tubos bimetálicos (BMT).

Este módulo converte a seção de um tubo de duas camadas concêntricas em um
tubo equivalente de material único, preservando a rigidez elástica à flexão.
A camada externa (material 1) é a referência de módulo; a camada interna é
escalada pela razão de módulos λ₂ = E₂/E₁.

Convenções:
    - Tr é a fração da espessura total ocupada pela camada externa
      (Tr = t1 / T); `invert_tr=True` inverte a convenção.
    - O deslocamento de centróide e é positivo para fora do raio de junção.
    - O diâmetro externo equivalente é 2R + t0 (superfície média ± meia espessura).
    - Tensões seguem a convenção tração-positiva: y > 0 é a fibra tracionada
      quando M > 0.

Todas as funções são puras e seguras para uso concorrente.
"""

import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np
from scipy.optimize import brentq

from src.utils.errors import (
    GeometryError,
    GeometryViolationError,
    InvalidMaterialError,
    NoPhysicalSolutionError,
)
from src.utils.logger import get_logger

logger = get_logger(__name__)

# Tolerância relativa do resíduo da cúbica (|g(t0) - K| < RESIDUAL_RTOL * K)
RESIDUAL_RTOL = 1e-10

# Número de faixas da integração direta do micro-elemento
DEFAULT_MICRO_STRIPS = 2000


@dataclass(frozen=True)
class LayeredSection:
    """
    Seção de tubo bimetálico descrita pelo raio de junção.

    Attributes:
        r: Raio da junção entre as camadas (mm)
        t1: Espessura da camada externa (mm)
        t2: Espessura da camada interna (mm)
        E1: Módulo de elasticidade da camada externa, referência (MPa)
        E2: Módulo de elasticidade da camada interna (MPa)
    """

    r: float
    t1: float
    t2: float
    E1: float
    E2: float

    def __post_init__(self) -> None:
        if self.E1 <= 0 or self.E2 <= 0:
            raise InvalidMaterialError(
                f"Módulos devem ser positivos (E1={self.E1}, E2={self.E2})"
            )
        if self.r <= 0:
            raise GeometryError(f"Raio de junção deve ser positivo (r={self.r})")
        if self.t1 < 0 or self.t2 < 0 or self.t1 + self.t2 <= 0:
            raise GeometryError(
                f"Espessuras inválidas (t1={self.t1}, t2={self.t2})"
            )
        if self.t2 >= self.r:
            raise GeometryError(
                f"Raio interno não positivo (r={self.r}, t2={self.t2})"
            )

    @property
    def lambda2(self) -> float:
        """Razão de módulos da camada interna em relação à externa."""
        return modulus_ratio(self.E2, self.E1)

    @property
    def outer_radius(self) -> float:
        return self.r + self.t1

    @property
    def inner_radius(self) -> float:
        return self.r - self.t2


@dataclass(frozen=True)
class BmtShape:
    """
    Parâmetros de forma do tubo bimetálico usados como features.

    Attributes:
        Do: Diâmetro externo (mm)
        T: Espessura total da parede (mm)
        Tr: Fração da espessura ocupada pela camada externa
    """

    Do: float
    T: float
    Tr: float

    def __post_init__(self) -> None:
        if self.Do <= 0:
            raise GeometryError(f"Diâmetro externo deve ser positivo (Do={self.Do})")
        if not 0 < self.T < self.Do / 2:
            raise GeometryError(
                f"Espessura fora do intervalo (0, Do/2) (T={self.T}, Do={self.Do})"
            )
        if not 0.0 <= self.Tr <= 1.0:
            raise GeometryError(f"Razão de espessura fora de [0, 1] (Tr={self.Tr})")

    def to_section(self, E1: float, E2: float, invert_tr: bool = False) -> LayeredSection:
        """
        Converte a forma em seção por camadas.

        Args:
            E1: Módulo da camada externa (MPa)
            E2: Módulo da camada interna (MPa)
            invert_tr: Se True, interpreta Tr como fração da camada interna

        Returns:
            LayeredSection com r = Do/2 - t1
        """
        outer_fraction = 1.0 - self.Tr if invert_tr else self.Tr
        t1 = outer_fraction * self.T
        t2 = self.T - t1
        r = self.Do / 2.0 - t1
        return LayeredSection(r=r, t1=t1, t2=t2, E1=E1, E2=E2)


@dataclass(frozen=True)
class EquivalentTube:
    """Tubo equivalente descrito pela superfície média (R) e espessura (t0)."""

    R: float
    t0: float

    def __post_init__(self) -> None:
        if self.R <= 0:
            raise GeometryError(f"Raio equivalente não positivo (R={self.R})")
        if not 0 < self.t0 < 2 * self.R:
            raise GeometryViolationError(
                f"Espessura equivalente fora de (0, 2R) (t0={self.t0}, R={self.R})"
            )

    def to_shape(self) -> "SingleShape":
        return SingleShape(Do_eq=2.0 * self.R + self.t0, T_eq=self.t0)


@dataclass(frozen=True)
class SingleShape:
    """Forma do tubo de camada única (saída implícita da ES-NET)."""

    Do_eq: float
    T_eq: float

    def __post_init__(self) -> None:
        if not self.Do_eq > 2.0 * self.T_eq > 0:
            raise GeometryError(
                f"Forma equivalente inválida (Do_eq={self.Do_eq}, T_eq={self.T_eq})"
            )

    @property
    def outer_radius(self) -> float:
        return self.Do_eq / 2.0

    @property
    def inner_radius(self) -> float:
        return self.Do_eq / 2.0 - self.T_eq


@dataclass(frozen=True)
class SectionProperties:
    """
    Propriedades da seção transformada.

    Attributes:
        lambda2: Razão de módulos E2/E1
        IZ0: Momento de inércia equivalente (mm⁴)
        SZ0: Momento estático do micro-elemento transformado em relação ao
            eixo centroidal (mm³ por unidade de largura)
    """

    lambda2: float
    IZ0: float
    SZ0: float


def modulus_ratio(E_i: float, E_m: float) -> float:
    """
    Razão de módulos λ = E_i / E_m.

    Raises:
        InvalidMaterialError: Se algum módulo não for positivo
    """
    if E_i <= 0 or E_m <= 0:
        raise InvalidMaterialError(
            f"Módulos devem ser positivos (E_i={E_i}, E_m={E_m})"
        )
    return E_i / E_m


def centroid_offset(t1: float, t2: float, lambda2: float) -> float:
    """
    Deslocamento do eixo centroidal do micro-elemento transformado.

    O micro-elemento tem a faixa externa (largura 1) entre 0 e t1 e a faixa
    interna (largura λ₂) entre -t2 e 0, com origem no raio de junção.

    Args:
        t1: Espessura da camada externa (mm)
        t2: Espessura da camada interna (mm)
        lambda2: Razão de módulos E2/E1

    Returns:
        e em mm, positivo para fora

    Raises:
        GeometryError: Se o denominador t1 + λ₂·t2 for nulo
    """
    denominator = t1 + lambda2 * t2
    if denominator <= 0:
        raise GeometryError(
            f"Micro-elemento degenerado (t1={t1}, t2={t2}, lambda2={lambda2})"
        )
    return (t1 * t1 - lambda2 * t2 * t2) / (2.0 * denominator)


def annulus_inertia(r_out: float, r_in: float) -> float:
    """Momento de inércia exato de uma coroa circular em relação ao diâmetro."""
    return math.pi / 4.0 * (r_out ** 4 - r_in ** 4)


def composite_inertia(section: LayeredSection) -> float:
    """
    Momento de inércia equivalente IZ0 = I₁ + λ₂·I₂ (em unidades de E1).

    Args:
        section: Seção por camadas

    Returns:
        IZ0 em mm⁴
    """
    i_outer = annulus_inertia(section.outer_radius, section.r)
    i_inner = annulus_inertia(section.r, section.inner_radius)
    return i_outer + section.lambda2 * i_inner


def bending_stress(M: float, y: float, lambda_i: float, IZ0: float) -> float:
    """
    Tensão normal na fibra y da camada i da seção transformada.

    Convenção tração-positiva: σ = λ_i · M · y / IZ0.

    Raises:
        ZeroDivisionError: Se IZ0 for nulo
        GeometryError: Se IZ0 for negativo
    """
    if IZ0 == 0:
        raise ZeroDivisionError("IZ0 nulo: seção sem rigidez")
    if IZ0 < 0:
        raise GeometryError(f"IZ0 negativo ({IZ0})")
    return lambda_i * M * y / IZ0


def cubic_rhs(R: float, section: LayeredSection, lambda2: float) -> float:
    """
    Termo independente K da cúbica t0³ + 4R²·t0 - K = 0.

    K = (1/R)·[(r+t1)⁴ - (1-λ₂)·r⁴ - λ₂·(r-t2)⁴]
    """
    r, t1, t2 = section.r, section.t1, section.t2
    bracket = (r + t1) ** 4 - (1.0 - lambda2) * r ** 4 - lambda2 * (r - t2) ** 4
    return bracket / R


def solve_equivalent_thickness(R: float, section: LayeredSection, lambda2: float) -> float:
    """
    Resolve a espessura equivalente t0 (raiz positiva única da cúbica).

    g(t) = t³ + 4R²t é estritamente crescente em t > 0, então a raiz é
    única. O intervalo [0, min(2R, K^(1/3) + K/(4R²))] é resolvido com
    brentq e polido com Newton.

    Args:
        R: Raio equivalente da superfície média (mm)
        section: Seção por camadas
        lambda2: Razão de módulos

    Returns:
        t0 em mm

    Raises:
        GeometryError: Se R não for positivo
        NoPhysicalSolutionError: Se K <= 0
        GeometryViolationError: Se a raiz exigir t0 >= 2R
    """
    if R <= 0:
        raise GeometryError(f"Raio equivalente não positivo (R={R})")

    K = cubic_rhs(R, section, lambda2)
    if not K > 0:
        raise NoPhysicalSolutionError(
            f"Sem solução física para t0: K={K} (R={R}, seção={section})"
        )

    def residual(t: float) -> float:
        return t * t * t + 4.0 * R * R * t - K

    upper = min(2.0 * R, K ** (1.0 / 3.0) + K / (4.0 * R * R))
    if residual(upper) < 0:
        # Só acontece quando o limite é 2R: a raiz estaria além da geometria
        raise GeometryViolationError(
            f"Espessura equivalente exigiria t0 >= 2R (R={R}, K={K})"
        )

    t0 = brentq(residual, 0.0, upper, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)

    # Polimento de Newton; g' = 3t² + 4R² > 0
    for _ in range(3):
        step = residual(t0) / (3.0 * t0 * t0 + 4.0 * R * R)
        t0 -= step
        if abs(step) <= 1e-16 * max(t0, 1.0):
            break

    if t0 >= 2.0 * R:
        raise GeometryViolationError(f"t0={t0} >= 2R={2.0 * R}")
    return t0


def equivalent_section(shape: BmtShape, lambda2: float, invert_tr: bool = False) -> EquivalentTube:
    """
    Tubo equivalente (R, t0) de uma forma BMT.

    Args:
        shape: Forma do BMT
        lambda2: Razão de módulos E2/E1
        invert_tr: Convenção invertida de Tr

    Returns:
        EquivalentTube
    """
    # E1 = 1 e E2 = λ₂ mantêm as propriedades em unidades da referência
    section = shape.to_section(E1=1.0, E2=lambda2, invert_tr=invert_tr)
    e = centroid_offset(section.t1, section.t2, lambda2)
    R = section.r + e
    t0 = solve_equivalent_thickness(R, section, lambda2)
    return EquivalentTube(R=R, t0=t0)


def equivalent_tube(shape: BmtShape, lambda2: float, invert_tr: bool = False) -> SingleShape:
    """
    Função teórica f_ES-NET: forma BMT → forma do tubo único equivalente.

    Compõe centroid_offset → R = r + e → solve_equivalent_thickness e
    devolve SingleShape(2R + t0, t0). A inércia do tubo devolvido em torno
    do próprio eixo é igual a composite_inertia da seção de entrada.
    """
    return equivalent_section(shape, lambda2, invert_tr=invert_tr).to_shape()


def equivalent_tube_batch(
    shapes: np.ndarray,
    lambda2: float,
    invert_tr: bool = False
) -> np.ndarray:
    """
    Aplica equivalent_tube a uma matriz (n, 3) de colunas (Do, T, Tr).

    Returns:
        Matriz (n, 2) com colunas (Do_eq, T_eq)
    """
    shapes = np.atleast_2d(np.asarray(shapes, dtype=float))
    out = np.empty((shapes.shape[0], 2))
    for i, (Do, T, Tr) in enumerate(shapes):
        single = equivalent_tube(BmtShape(Do=Do, T=T, Tr=Tr), lambda2, invert_tr=invert_tr)
        out[i] = (single.Do_eq, single.T_eq)
    return out


def micro_element_area_moment(
    t1: float,
    t2: float,
    lambda2: float,
    axis_offset: float,
    n_strips: int = DEFAULT_MICRO_STRIPS
) -> float:
    """
    Momento estático do micro-elemento transformado por integração em faixas.

    A camada externa ocupa [0, t1] com largura 1 e a interna [-t2, 0] com
    largura λ₂. O momento é tomado em relação ao eixo em y = axis_offset.
    A regra do ponto médio é exata para o integrando linear.

    Returns:
        S em mm³ por unidade de largura
    """
    total = 0.0
    for lo, hi, width in ((0.0, t1, 1.0), (-t2, 0.0, lambda2)):
        if hi <= lo:
            continue
        edges = np.linspace(lo, hi, n_strips + 1)
        mid = 0.5 * (edges[:-1] + edges[1:])
        total += float(np.sum((mid - axis_offset) * width * np.diff(edges)))
    return total


def section_properties(section: LayeredSection) -> SectionProperties:
    """Propriedades da seção transformada (λ₂, IZ0 e SZ0 no eixo centroidal)."""
    lambda2 = section.lambda2
    e = centroid_offset(section.t1, section.t2, lambda2)
    return SectionProperties(
        lambda2=lambda2,
        IZ0=composite_inertia(section),
        SZ0=micro_element_area_moment(section.t1, section.t2, lambda2, e),
    )


def equivalence_summary(
    shape: BmtShape,
    E1: float,
    E2: float,
    invert_tr: bool = False
) -> dict:
    """
    Resumo da equivalência usado pela subcomando `equiv` da CLI.

    Returns:
        Dicionário com R, t0, Do_eq, T_eq e IZ0
    """
    lambda2 = modulus_ratio(E2, E1)
    section = shape.to_section(E1=E1, E2=E2, invert_tr=invert_tr)
    tube = equivalent_section(shape, lambda2, invert_tr=invert_tr)
    single = tube.to_shape()
    result = {
        "lambda2": lambda2,
        "R": tube.R,
        "t0": tube.t0,
        "Do_eq": single.Do_eq,
        "T_eq": single.T_eq,
        "IZ0": composite_inertia(section),
    }
    logger.debug(f"Equivalência calculada: {result}")
    return result


def layer_bounds(section: LayeredSection) -> Tuple[Tuple[float, float], Tuple[float, float]]:
    """Limites radiais (r_in, r_out) das camadas externa e interna."""
    return (section.r, section.outer_radius), (section.inner_radius, section.r)
