"""Pairwise cohesive constitutive law.

A bond between points ``x`` and ``y`` with separation ``q = |y - x|`` and unit
direction ``e`` carries the scalar strain ``S = (u(y) - u(x)) . e / q``.  Its
energy per unit length is ``(1/eps) J(q/eps) f(q S^2)`` where ``f`` is a concave
profile (:class:`CohesivePotential`) and ``J`` a radial weight on the unit ball
(:class:`InfluenceFunction`).  The force per unit length is the derivative of
that energy with respect to ``q S``; it grows linearly for small strain and
softens past the critical strain ``S_c = rbar / sqrt(q)``.

Every function here is pure and vectorised over numpy arrays.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np
from numpy.typing import ArrayLike
from scipy import integrate, interpolate, optimize

# Volume of the unit ball in dimensions 1, 2, 3.
UNIT_BALL_VOLUME = {1: 2.0, 2: np.pi, 3: 4.0 * np.pi / 3.0}


class ProfileKind(str, Enum):
    EXPONENTIAL = "exponential"
    RATIONAL = "rational"
    TABLE = "table"


class InfluenceKind(str, Enum):
    CONSTANT = "constant"
    CONICAL = "conical"
    TABLE = "table"


class RootNotFoundError(ValueError):
    """The inflection equation f'(rho) + 2 rho f''(rho) = 0 has no root."""


@dataclass(frozen=True)
class CohesivePotential:
    """Concave, increasing bond profile ``f`` with ``f(0) = 0``.

    Parameters
    ----------
    initial_slope:
        ``f'(0)``; sets the small-strain stiffness.
    plateau:
        ``lim f(rho)`` as ``rho -> inf``; sets the fracture energy.
    profile_kind:
        ``exponential``: ``f = f_inf (1 - exp(-a rho))``;
        ``rational``: ``f = f_inf a rho / (1 + a rho)``, with ``a = f'(0)/f_inf``;
        ``table``: monotone cubic interpolation of ``table`` (use
        :meth:`from_table`).
    """

    initial_slope: float
    plateau: float
    profile_kind: ProfileKind = ProfileKind.EXPONENTIAL
    table: tuple[tuple[float, ...], tuple[float, ...]] | None = None
    _interp: object = field(default=None, repr=False, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "profile_kind", ProfileKind(self.profile_kind))
        if self.profile_kind is ProfileKind.TABLE:
            if self.table is None:
                raise ValueError("table profile requires a (rho, f) table")
            object.__setattr__(self, "_interp", _build_profile_table(*self.table))
            return
        if not (self.initial_slope >= 0.0 and self.plateau >= 0.0):
            raise ValueError("initial_slope and plateau must be non-negative")

    @classmethod
    def exponential(cls, initial_slope: float, plateau: float) -> "CohesivePotential":
        return cls(float(initial_slope), float(plateau), ProfileKind.EXPONENTIAL)

    @classmethod
    def rational(cls, initial_slope: float, plateau: float) -> "CohesivePotential":
        return cls(float(initial_slope), float(plateau), ProfileKind.RATIONAL)

    @classmethod
    def from_table(cls, rho: Sequence[float], values: Sequence[float]) -> "CohesivePotential":
        """Profile through the points ``(rho_k, f_k)``; ``rho_0 = 0, f_0 = 0`` required.

        Beyond the last abscissa the profile is held at its last value.
        The table is rejected unless it describes a strictly increasing,
        concave function.
        """
        rho = tuple(float(r) for r in rho)
        values = tuple(float(v) for v in values)
        interp = _build_profile_table(rho, values)
        slope0 = float(interp.derivative()(0.0))
        return cls(slope0, values[-1], ProfileKind.TABLE, (rho, values), interp)

    @property
    def _rate(self) -> float:
        return self.initial_slope / self.plateau

    def value(self, rho: ArrayLike) -> np.ndarray:
        """``f(rho)`` for ``rho >= 0``."""
        rho = np.asarray(rho, dtype=float)
        kind = self.profile_kind
        if kind is ProfileKind.TABLE:
            return self._table_eval(rho, 0)
        if self.plateau == 0.0:
            return np.zeros_like(rho)
        a = self._rate
        if kind is ProfileKind.EXPONENTIAL:
            return -self.plateau * np.expm1(-a * rho)
        return self.plateau * a * rho / (1.0 + a * rho)

    def slope(self, rho: ArrayLike) -> np.ndarray:
        """``f'(rho)``."""
        rho = np.asarray(rho, dtype=float)
        kind = self.profile_kind
        if kind is ProfileKind.TABLE:
            return self._table_eval(rho, 1)
        if self.plateau == 0.0:
            return np.zeros_like(rho)
        a = self._rate
        if kind is ProfileKind.EXPONENTIAL:
            return self.initial_slope * np.exp(-a * rho)
        return self.initial_slope / (1.0 + a * rho) ** 2

    def curvature(self, rho: ArrayLike) -> np.ndarray:
        """``f''(rho)``."""
        rho = np.asarray(rho, dtype=float)
        kind = self.profile_kind
        if kind is ProfileKind.TABLE:
            return self._table_eval(rho, 2)
        if self.plateau == 0.0:
            return np.zeros_like(rho)
        a = self._rate
        if kind is ProfileKind.EXPONENTIAL:
            return -a * self.initial_slope * np.exp(-a * rho)
        return -2.0 * a * self.initial_slope / (1.0 + a * rho) ** 3

    def value_and_slope(self, rho: ArrayLike) -> tuple[np.ndarray, np.ndarray]:
        """``(f(rho), f'(rho))`` sharing the transcendental evaluation."""
        rho = np.asarray(rho, dtype=float)
        if self.profile_kind is ProfileKind.EXPONENTIAL and self.plateau > 0.0:
            decay = np.exp(-self._rate * rho)
            return self.plateau * (1.0 - decay), self.initial_slope * decay
        return self.value(rho), self.slope(rho)

    def _table_eval(self, rho: np.ndarray, nu: int) -> np.ndarray:
        interp = self._interp
        last = interp.x[-1]
        inside = rho < last
        out = np.empty_like(rho)
        out[inside] = interp(rho[inside], nu)
        out[~inside] = self.plateau if nu == 0 else 0.0
        return out

    def inflection_argument(self) -> float:
        """Root ``rho_bar`` of ``f'(rho) + 2 rho f''(rho) = 0``."""
        kind = self.profile_kind
        if kind is ProfileKind.EXPONENTIAL:
            return self.plateau / (2.0 * self.initial_slope)
        if kind is ProfileKind.RATIONAL:
            return self.plateau / (3.0 * self.initial_slope)
        return _table_inflection(self)

    def inflection_radius(self) -> float:
        """``rbar = sqrt(rho_bar)``; the critical strain is ``rbar / sqrt(q)``."""
        return float(np.sqrt(self.inflection_argument()))


def _build_profile_table(rho: Sequence[float], values: Sequence[float]):
    rho = np.asarray(rho, dtype=float)
    values = np.asarray(values, dtype=float)
    if rho.ndim != 1 or rho.shape != values.shape or rho.size < 3:
        raise ValueError("profile table needs matching 1-D arrays with at least 3 points")
    if rho[0] != 0.0 or values[0] != 0.0:
        raise ValueError("profile table must start at (0, 0)")
    if np.any(np.diff(rho) <= 0.0):
        raise ValueError("profile table abscissae must be strictly increasing")
    secants = np.diff(values) / np.diff(rho)
    if np.any(secants <= 0.0):
        raise ValueError("profile table must be strictly increasing")
    if np.any(np.diff(secants) > 1e-12 * np.abs(secants[:-1])):
        raise ValueError("profile table is not concave")
    interp = interpolate.PchipInterpolator(rho, values, extrapolate=False)
    # Monotone cubics of concave data can still bend upward inside a cell.
    probe = np.linspace(rho[0], rho[-1], 64 * rho.size)
    scale = np.max(np.abs(secants)) / max(rho[-1], 1e-300)
    if np.any(interp(probe, 2) > 1e-9 * scale):
        raise ValueError("interpolated profile is not concave")
    return interp


def _table_inflection(f: CohesivePotential) -> float:
    interp = f._interp
    knots = interp.x

    def g(r: float) -> float:
        return float(interp(r, 1) + 2.0 * r * interp(r, 2))

    # Sample strictly inside the table; the second derivative may jump at knots.
    top = knots[-1] * (1.0 - 1e-12)
    grid = np.unique(np.concatenate([np.linspace(0.0, top, 2048), knots[1:-1]]))
    vals = np.array([g(r) for r in grid])
    sign_change = np.nonzero((vals[:-1] > 0.0) & (vals[1:] <= 0.0))[0]
    if sign_change.size == 0:
        raise RootNotFoundError(
            "profile table has no inflection root inside its range; "
            "the force law never softens (check concavity / table extent)"
        )
    k = sign_change[0]
    if vals[k + 1] == 0.0:
        return float(grid[k + 1])
    return float(optimize.bisect(g, grid[k], grid[k + 1], xtol=1e-15,
                                 rtol=4 * np.finfo(float).eps))


@dataclass(frozen=True)
class InfluenceFunction:
    """Radial weight ``J`` on the rescaled unit ball; zero for ``r >= 1``.

    ``constant``: ``J = scale``; ``conical``: ``J = scale (1 - r)``;
    ``table``: piecewise-linear through ``table = (r_k, J_k)`` on ``[0, 1]``.
    """

    kind: InfluenceKind = InfluenceKind.CONSTANT
    scale: float = 1.0
    table: tuple[tuple[float, ...], tuple[float, ...]] | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", InfluenceKind(self.kind))
        if self.scale < 0.0:
            raise ValueError("influence scale must be non-negative")
        if self.kind is InfluenceKind.TABLE:
            if self.table is None:
                raise ValueError("table influence requires an (r, J) table")
            r, j = (np.asarray(a, dtype=float) for a in self.table)
            if r.ndim != 1 or r.shape != j.shape or r.size < 2:
                raise ValueError("influence table needs matching 1-D arrays")
            if r[0] != 0.0 or r[-1] != 1.0 or np.any(np.diff(r) <= 0.0):
                raise ValueError("influence table abscissae must increase from 0 to 1")
            if np.any(j < 0.0) or not np.all(np.isfinite(j)):
                raise ValueError("influence values must be finite and non-negative")
            object.__setattr__(self, "table", (tuple(r), tuple(j)))

    @classmethod
    def constant(cls, scale: float = 1.0) -> "InfluenceFunction":
        return cls(InfluenceKind.CONSTANT, scale)

    @classmethod
    def conical(cls, scale: float = 1.0) -> "InfluenceFunction":
        return cls(InfluenceKind.CONICAL, scale)

    @classmethod
    def from_table(cls, r: Sequence[float], values: Sequence[float]) -> "InfluenceFunction":
        return cls(InfluenceKind.TABLE, 1.0, (tuple(r), tuple(values)))

    def closure(self, r: ArrayLike) -> np.ndarray:
        """``J(min(r, 1))``, with ``J(1)`` taken as the limit from inside.

        Discretisations evaluate ``J`` through this form: a lattice cell whose
        centre lies on or just beyond the horizon sphere still has its counted
        (partial) volume inside the ball, where ``J`` is close to ``J(1-)``.
        """
        r = np.minimum(np.asarray(r, dtype=float), 1.0)
        if self.kind is InfluenceKind.CONSTANT:
            return np.full_like(r, self.scale)
        if self.kind is InfluenceKind.CONICAL:
            return self.scale * (1.0 - r)
        return np.interp(r, self.table[0], self.table[1])

    def __call__(self, r: ArrayLike) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        return np.where(r < 1.0, self.closure(r), 0.0)

    def breakpoints(self) -> tuple[float, ...]:
        """Interior kinks of ``J`` in (0, 1), used to split quadrature panels."""
        if self.kind is InfluenceKind.TABLE:
            return tuple(self.table[0][1:-1])
        return ()


@dataclass(frozen=True)
class BondGeometry:
    """A single bond: separation ``|y - x|``, unit direction and horizon."""

    separation: float
    direction: tuple[float, ...]
    horizon: float

    def __post_init__(self) -> None:
        e = np.asarray(self.direction, dtype=float)
        if not (self.separation > 0.0):
            raise ValueError("bond separation must be positive")
        if not (self.separation < self.horizon):
            raise ValueError("bond separation must be smaller than the horizon")
        if abs(float(np.linalg.norm(e)) - 1.0) > 1e-12:
            raise ValueError("bond direction must be a unit vector")
        object.__setattr__(self, "direction", tuple(float(c) for c in e))

    @classmethod
    def between(cls, x: ArrayLike, y: ArrayLike, horizon: float) -> "BondGeometry":
        xi = np.asarray(y, dtype=float) - np.asarray(x, dtype=float)
        q = float(np.linalg.norm(xi))
        if q == 0.0:
            raise ValueError("bond endpoints coincide")
        return cls(q, tuple(xi / q), horizon)


# ---------------------------------------------------------------------------
# Array kernels: S, q (separations) and eps broadcast together.
# ---------------------------------------------------------------------------

def potential_per_length(S, q, eps, f: CohesivePotential, J: InfluenceFunction):
    """``(1/eps) J(q/eps) f(q S^2)``."""
    S = np.asarray(S, dtype=float)
    return J.closure(np.asarray(q) / eps) / eps * f.value(q * S * S)


def force_per_length(S, q, eps, f: CohesivePotential, J: InfluenceFunction):
    """``(2/eps) J(q/eps) f'(q S^2) S``."""
    S = np.asarray(S, dtype=float)
    return 2.0 / eps * J.closure(np.asarray(q) / eps) * f.slope(q * S * S) * S


def force_curvature(S, q, eps, f: CohesivePotential, J: InfluenceFunction):
    """``(2/eps) J (f'(q S^2) + 2 q S^2 f''(q S^2))``; changes sign at ``S_c``."""
    S = np.asarray(S, dtype=float)
    rho = q * S * S
    return 2.0 / eps * J.closure(np.asarray(q) / eps) * (f.slope(rho) + 2.0 * rho * f.curvature(rho))


# ---------------------------------------------------------------------------
# Single-bond API.
# ---------------------------------------------------------------------------

def bond_strain(u_x: ArrayLike, u_y: ArrayLike, geom: BondGeometry) -> float:
    """``S = (u_y - u_x) . e / |y - x|``."""
    du = np.asarray(u_y, dtype=float) - np.asarray(u_x, dtype=float)
    return float(du @ np.asarray(geom.direction)) / geom.separation


def bond_potential(S, geom: BondGeometry, f: CohesivePotential, J: InfluenceFunction):
    return potential_per_length(S, geom.separation, geom.horizon, f, J)


def bond_force_per_length(S, geom: BondGeometry, f: CohesivePotential, J: InfluenceFunction):
    return force_per_length(S, geom.separation, geom.horizon, f, J)


def bond_force_curvature(S, geom: BondGeometry, f: CohesivePotential, J: InfluenceFunction):
    return force_curvature(S, geom.separation, geom.horizon, f, J)


def critical_strain(separation, f: CohesivePotential):
    """``rbar / sqrt(separation)``: the strain at which the bond force peaks."""
    separation = np.asarray(separation, dtype=float)
    if np.any(separation <= 0.0):
        raise ValueError("separation must be positive")
    return f.inflection_radius() / np.sqrt(separation)


# ---------------------------------------------------------------------------
# Influence moments.
# ---------------------------------------------------------------------------

def influence_moment(J: InfluenceFunction, p: int, resolution: int | None = None) -> float:
    """``int_0^1 r^p J(r) dr``.

    By default adaptive Gauss-Kronrod quadrature with absolute tolerance 1e-12.
    With ``resolution`` set, a composite 8-point Gauss-Legendre rule on
    ``resolution`` equal panels (split at the kinks of ``J``) is used instead,
    which makes the quadrature refinement explicit.
    """
    if not (isinstance(p, (int, np.integer)) and 0 <= p <= 6):
        raise ValueError("moment order p must be an integer in [0, 6]")
    edges = np.unique(np.concatenate([[0.0, 1.0], J.breakpoints()]))
    if resolution is None:
        total = 0.0
        for a, b in zip(edges[:-1], edges[1:]):
            val, _ = integrate.quad(lambda r: r**p * float(J.closure(r)), a, b,
                                    epsabs=1e-12, epsrel=1e-13, limit=200)
            total += val
        return total
    if resolution < 1:
        raise ValueError("resolution must be a positive integer")
    nodes, weights = np.polynomial.legendre.leggauss(8)
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        panel = np.linspace(a, b, resolution + 1)
        lo, hi = panel[:-1, None], panel[1:, None]
        r = 0.5 * (hi - lo) * nodes + 0.5 * (hi + lo)
        total += float(np.sum(0.5 * (hi - lo) * weights * r**p * J.closure(r)))
    return total


def ball_normalization(J: InfluenceFunction, d: int) -> float:
    """``m = int_{|xi|<1} |xi| J(|xi|) dxi = d omega_d int_0^1 r^d J dr``."""
    if d not in (2, 3):
        raise ValueError("dimension must be 2 or 3")
    return d * UNIT_BALL_VOLUME[d] * influence_moment(J, d)
