"""Map the bond law (f, J, d) to elastic moduli and fracture energy, and back.

For a central-force kernel the small-strain energy density is
``2 mu |E|^2 + lambda (tr E)^2`` with ``mu == lambda``, and a fully opened
crack carries energy ``G_c`` per unit area::

    d = 2:  mu = lambda = f'(0) M_2 / 4
    d = 3:  mu = lambda = f'(0) M_3 / 5
    G_c = (2 omega_{d-1} / omega_d) f_inf M_d

where ``M_p = int_0^1 r^p J(r) dr`` and ``omega_k`` is the unit-ball volume in
``k`` dimensions.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from functools import cached_property

from .kernel import (
    UNIT_BALL_VOLUME,
    CohesivePotential,
    InfluenceFunction,
    ball_normalization,
    influence_moment,
)

_MODULI_DIVISOR = {2: 4.0, 3: 5.0}


def _check_dimension(d: int) -> None:
    if d not in (2, 3):
        raise ValueError(f"dimension must be 2 or 3, got {d!r}")


def _moduli_moment(J: InfluenceFunction, d: int) -> float:
    return influence_moment(J, d) / _MODULI_DIVISOR[d]


def _fracture_moment(J: InfluenceFunction, d: int) -> float:
    return 2.0 * UNIT_BALL_VOLUME[d - 1] / UNIT_BALL_VOLUME[d] * influence_moment(J, d)


def elastic_moduli(f: CohesivePotential, J: InfluenceFunction, d: int) -> tuple[float, float]:
    """Return ``(mu, lambda)``; the two are always equal for this model."""
    _check_dimension(d)
    mu = f.initial_slope * _moduli_moment(J, d)
    return mu, mu


def energy_release_rate(f: CohesivePotential, J: InfluenceFunction, d: int) -> float:
    """Fracture energy ``G_c`` per unit crack length (d=2) or area (d=3)."""
    _check_dimension(d)
    return f.plateau * _fracture_moment(J, d)


def fit_kernel(target_mu: float, target_Gc: float, J: InfluenceFunction, d: int) -> CohesivePotential:
    """Exponential profile whose ``mu`` and ``G_c`` equal the targets.

    Each constant is linear in one profile parameter, so the inversion is exact.
    """
    _check_dimension(d)
    if not (target_mu > 0.0 and target_Gc > 0.0):
        raise ValueError("fit targets must be positive")
    slope = target_mu / _moduli_moment(J, d)
    plateau = target_Gc / _fracture_moment(J, d)
    return CohesivePotential.exponential(slope, plateau)


@dataclass(frozen=True)
class MaterialModel:
    """Density, horizon and bond law, with the derived macroscopic constants."""

    density: float
    horizon: float
    dimension: int
    potential: CohesivePotential
    influence: InfluenceFunction = InfluenceFunction()

    def __post_init__(self) -> None:
        _check_dimension(self.dimension)
        if not self.density > 0.0:
            raise ValueError("density must be positive")
        if not self.horizon > 0.0:
            raise ValueError("horizon must be positive")

    @cached_property
    def mu(self) -> float:
        return elastic_moduli(self.potential, self.influence, self.dimension)[0]

    @cached_property
    def lam(self) -> float:
        return elastic_moduli(self.potential, self.influence, self.dimension)[1]

    @cached_property
    def Gc(self) -> float:
        return energy_release_rate(self.potential, self.influence, self.dimension)

    @cached_property
    def normalization(self) -> float:
        """``m``, the influence-weighted first moment of the unit ball."""
        return ball_normalization(self.influence, self.dimension)

    @cached_property
    def neighborhood_volume(self) -> float:
        """``V_d = eps^d omega_d``."""
        return self.horizon**self.dimension * UNIT_BALL_VOLUME[self.dimension]

    @cached_property
    def inflection_radius(self) -> float:
        return self.potential.inflection_radius()

    def with_horizon(self, horizon: float) -> "MaterialModel":
        return replace(self, horizon=horizon)
