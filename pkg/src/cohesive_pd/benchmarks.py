"""Standard set-ups shared by the CLI and the acceptance suite.

* ``pluck``: a smooth sine-bump displacement in a pinned square; no cracks.
* ``notch_opening``: a symmetric opening of a horizontal line through the
  middle of the interior, tapered by a smooth bump so that it vanishes at the
  collar; an optional pre-cut notch removes the bonds across the left half.
  Its elastic energy (bulk plus ``G_c`` times the opened length) is known in
  closed form, which makes it admissible initial data for the process-zone bound.
* ``mode_i_opening``: the same jump without taper, used by the nucleation scan.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .calibration import MaterialModel
from .grid import DomainGrid, DomainSpec, build_grid
from .kernel import CohesivePotential, InfluenceFunction


@dataclass(frozen=True, eq=False)
class Setup:
    grid: DomainGrid
    material: MaterialModel
    u0: np.ndarray
    v0: np.ndarray
    lefm_u0: float = float("nan")


def unit_material(horizon: float, dimension: int = 2) -> MaterialModel:
    """``rho = f'(0) = f_inf = 1``, ``J = 1``, exponential profile."""
    return MaterialModel(1.0, horizon, dimension, CohesivePotential.exponential(1.0, 1.0),
                         InfluenceFunction.constant())


def _interior_bump(x: np.ndarray, lo: float, hi: float, power: int) -> np.ndarray:
    s = np.clip((x - lo) / (hi - lo), 0.0, 1.0)
    return np.prod(np.sin(np.pi * s) ** power, axis=1)


def pluck(spacing: float = 1.0 / 75.0, m_ratio: int = 3, collar_cells: int = 7,
          amplitude: float = 1e-3, material: MaterialModel | None = None) -> Setup:
    """Unit square, ``u0 = A sin sin (1, 1)/sqrt 2`` over the interior, ``v0 = 0``.

    The defaults give a 61 x 61 interior at ``m_ratio`` 3.
    """
    eps = m_ratio * spacing
    collar = collar_cells * spacing
    material = unit_material(eps) if material is None else material.with_horizon(eps)
    grid = build_grid(DomainSpec(((0.0, 1.0), (0.0, 1.0)), spacing, eps, collar))
    phi = _interior_bump(grid.positions, collar, 1.0 - collar, 1)
    u0 = amplitude * phi[:, None] * np.array([1.0, 1.0]) / math.sqrt(2.0)
    return Setup(grid, material, u0, np.zeros_like(u0))


def notch_lefm_energy(material: MaterialModel, amplitude: float, width: float) -> float:
    """Elastic energy of :func:`notch_opening`'s initial field.

    ``u = (A/2) sign(y - c) g(x) g(y) e_y`` with ``g = sin^2`` over a square
    of side ``w``.  Using ``int g^2 = 3w/8`` and ``int g'^2 = pi^2 / (2w)``,
    the bulk term is ``(A^2/4)(3 pi^2/16)(3 mu + lambda)``.  The jump runs the
    full width; the pre-cut part carries the same ``G_c`` per length, so the
    notch does not change the energy.
    """
    mu, lam = material.mu, material.lam
    bulk = amplitude**2 / 4.0 * (3.0 * math.pi**2 / 16.0) * (3.0 * mu + lam)
    return bulk + material.Gc * width


def notch_opening(horizon: float, m_ratio: int = 3, collar: float = 0.4,
                  amplitude: float = 1.0, width: float = 1.0, notch: bool = True,
                  material: MaterialModel | None = None) -> Setup:
    """Tapered opening of the mid-line of a square with interior side ``width``.

    The box is ``[0, width + 2 collar]^2`` and ``v0 = 0``.  With ``notch`` the
    bonds crossing the mid-line over the left half of the interior are removed.
    """
    spacing = horizon / m_ratio
    material = unit_material(horizon) if material is None else material.with_horizon(horizon)
    side = width + 2.0 * collar
    mid = 0.5 * side
    cuts = (((collar - spacing, mid), (mid, mid)),) if notch else ()
    grid = build_grid(DomainSpec(((0.0, side), (0.0, side)), spacing, horizon, collar, notch=cuts))
    x = grid.positions
    phi = _interior_bump(x, collar, side - collar, 2)
    u0 = np.zeros_like(x)
    u0[:, 1] = 0.5 * amplitude * np.sign(x[:, 1] - mid) * phi
    lefm = notch_lefm_energy(material, amplitude, width)
    return Setup(grid, material, u0, np.zeros_like(u0), lefm)


def mode_i_opening(grid: DomainGrid, amplitude: float = 0.5,
                   normal=(0.0, 1.0), point=(0.5, 0.5)) -> np.ndarray:
    """``u = +-(A/2) n`` on either side of the line through ``point``."""
    n = np.asarray(normal, dtype=float)
    n = n / np.linalg.norm(n)
    side = np.sign((grid.positions - np.asarray(point)) @ n)
    return 0.5 * amplitude * side[:, None] * n
