"""Process zone, fracture set, the zone-measure bound and nucleation stability.

*Exceedance.*  For a node ``x_i`` the weighted fraction of its neighbourhood
whose bond strain exceeds ``k |xi|^(alpha - 1)``::

    P_i = (1 / (eps^d m)) sum_{j exceeding} (q_ij / eps) J(q_ij / eps) w_ij

with ``m`` the influence normalisation.  The *process zone* is the set of
interior nodes with ``P_i > theta``; the *fracture set* is the process zone for
``k = rbar, alpha = 1/2, theta = 1/2`` (a majority of bonds past the critical
strain).

*Stability.*  For a direction ``nu`` the half-neighbourhood matrix::

    A_nu(x_i) = -(2 / (eps V_d)) sum_{(x_j - x_i).nu < 0} curvature(S_ij) / q_ij e e^T w_ij

has a positive eigenvalue when bonds across the plane with normal ``nu`` are
softening; the node is then flagged as a nucleation site.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate

from .calibration import MaterialModel
from .dynamics import bond_strains
from .grid import DomainGrid
from .kernel import force_curvature

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ProcessZoneParams:
    """Threshold ``k``, exponent ``alpha`` and volume fraction ``theta``.

    A bond of length ``q`` exceeds when ``|S| > k q^(alpha - 1)``.
    """

    k_threshold: float
    alpha: float = 0.5
    theta: float = 0.5

    def __post_init__(self) -> None:
        if not self.k_threshold > 0.0:
            raise ValueError("k_threshold must be positive")
        if not 0.5 <= self.alpha < 1.0:
            raise ValueError("alpha must lie in [1/2, 1)")
        if not 0.0 < self.theta <= 1.0:
            raise ValueError("theta must lie in (0, 1]")

    @property
    def beta(self) -> float:
        return 2.0 * self.alpha - 1.0

    @classmethod
    def fracture_set(cls, material: MaterialModel) -> "ProcessZoneParams":
        """Preset ``k = rbar, alpha = 1/2, theta = 1/2``."""
        return cls(material.inflection_radius, 0.5, 0.5)

    def check_against(self, material: MaterialModel) -> None:
        rbar = material.inflection_radius
        if self.k_threshold > rbar * (1.0 + 1e-12):
            raise ValueError(f"k_threshold {self.k_threshold} exceeds rbar = {rbar}")


@dataclass(frozen=True, eq=False)
class ProcessZone:
    nodes: np.ndarray         # node indices, ascending
    measure: float            # count * h^d
    exceedance: np.ndarray    # P_i for every interior node (grid.interior order)


@dataclass(frozen=True, eq=False)
class StabilityReport:
    """Per-node results of a direction sweep (rows follow ``nodes``)."""

    nodes: np.ndarray
    matrices: np.ndarray      # (n, d, d) A at the most unstable direction
    lam_max: np.ndarray       # (n,)
    directions: np.ndarray    # (n, d) most unstable direction nu*
    unstable: np.ndarray      # (n,) bool

    @property
    def flagged(self) -> np.ndarray:
        return self.nodes[self.unstable]


def _bond_subset(grid: DomainGrid, nodes: np.ndarray) -> np.ndarray:
    starts, stops = grid.offsets[nodes], grid.offsets[nodes + 1]
    if len(nodes) == 0:
        return np.zeros(0, dtype=np.int64)
    lengths = stops - starts
    return np.repeat(starts - np.cumsum(lengths) + lengths, lengths) + np.arange(lengths.sum())


def _local_rows(grid: DomainGrid, nodes: np.ndarray, bonds: np.ndarray) -> np.ndarray:
    lengths = grid.offsets[nodes + 1] - grid.offsets[nodes]
    return np.repeat(np.arange(len(nodes)), lengths)


def exceedance_field(grid: DomainGrid, u: np.ndarray, material: MaterialModel,
                     params: ProcessZoneParams, nodes: np.ndarray | None = None) -> np.ndarray:
    """``P_i`` for each node in ``nodes`` (default: all interior nodes)."""
    params.check_against(material)
    nodes = grid.interior if nodes is None else np.asarray(nodes, dtype=np.int64)
    bonds = _bond_subset(grid, nodes)
    rows = _local_rows(grid, nodes, bonds)
    eps, d = material.horizon, material.dimension
    q = grid.bond_q[bonds]
    S = bond_strains(grid, np.asarray(u, dtype=float), bonds)
    exceeding = np.abs(S) > params.k_threshold * q ** (params.alpha - 1.0)
    # Radii are clipped at the horizon like J itself: a straddling cell's
    # counted volume lies inside the ball.
    r = np.minimum(q / eps, 1.0)
    weight = r * material.influence.closure(r) * grid.bond_w[bonds]
    total = np.bincount(rows, weights=np.where(exceeding, weight, 0.0), minlength=len(nodes))
    return total / (eps**d * material.normalization)


def neighborhood_exceedance(grid: DomainGrid, u: np.ndarray, i: int, params: ProcessZoneParams,
                            material: MaterialModel) -> float:
    """Weighted fraction of node ``i``'s neighbourhood past the threshold."""
    return float(exceedance_field(grid, u, material, params, np.array([i]))[0])


def process_zone(grid: DomainGrid, u: np.ndarray, params: ProcessZoneParams,
                 material: MaterialModel) -> ProcessZone:
    """Interior nodes with exceedance ``> theta`` and their total cell volume."""
    P = exceedance_field(grid, u, material, params)
    nodes = grid.interior[P > params.theta]
    return ProcessZone(nodes, len(nodes) * grid.cell_volume, P)


def energy_constant(lefm_u0: float, v0_norm: float, density: float, b_norm_integral: float,
                    v0_squared: bool = False) -> float:
    """``C(t) = ((2 LEFM(u0) + rho |v0| + 1)^(1/2) + rho^(-1/2) int |b|)^2 - 1``.

    ``v0_squared`` uses ``rho |v0|^2`` instead of ``rho |v0|``.
    """
    kin = density * (v0_norm**2 if v0_squared else v0_norm)
    return (np.sqrt(2.0 * lefm_u0 + kin + 1.0) + b_norm_integral / np.sqrt(density)) ** 2 - 1.0


def process_zone_bound(params: ProcessZoneParams, material: MaterialModel, t: float,
                       lefm_u0: float, v0_norm: float,
                       b_history: float | Callable[[float], float] = 0.0, *,
                       v0_squared: bool = False, secant_slope: bool = False) -> float:
    """Upper bound on the process-zone measure at time ``t``.

    ``eps^(1-beta) / (theta k^2 s) * C(t) / (2 m)`` where ``s = f'(0)`` by
    default.  ``b_history`` is either ``int_0^t ||b||_{L2}`` or a callable
    ``tau -> ||b(tau)||_{L2}`` integrated here over ``[0, t]``.  With
    ``secant_slope`` the slope is replaced by the secant ``f(k^2 eps^beta) /
    (k^2 eps^beta)``, which is never larger than ``f'(0)`` and therefore gives a
    bound that is never smaller.
    """
    for name, value in (("t", t), ("lefm_u0", lefm_u0), ("v0_norm", v0_norm)):
        if not np.isfinite(value):
            raise ValueError(f"{name} must be finite")
    if callable(b_history):
        b_int = integrate.quad(b_history, 0.0, t, limit=200)[0] if t > 0 else 0.0
    else:
        b_int = float(b_history)
    eps = material.horizon
    k2 = params.k_threshold**2
    C = energy_constant(lefm_u0, v0_norm, material.density, b_int, v0_squared)
    C_alt = energy_constant(lefm_u0, v0_norm, material.density, b_int, not v0_squared)
    if secant_slope:
        arg = k2 * eps**params.beta
        slope = float(material.potential.value(arg)) / arg
    else:
        slope = material.potential.initial_slope
    scale = eps ** (1.0 - params.beta) / (params.theta * k2 * slope) / (2.0 * material.normalization)
    log.debug("zone bound t=%g: |v0| form %s -> %.17g, alternative -> %.17g",
              t, "squared" if v0_squared else "unsquared", scale * C, scale * C_alt)
    return float(scale * C)


# ---------------------------------------------------------------------------
# Stability matrix and direction sweep.
# ---------------------------------------------------------------------------

def direction_fan(direction_count: int, d: int) -> np.ndarray:
    """Unit directions swept by :func:`nucleation_scan`.

    2-D: ``direction_count`` equally spaced angles on the full circle.  3-D: the
    first ``direction_count`` points of an area-preserving map of the Halton
    sequence (bases 2, 3) onto the sphere.  Both fans are nested: the fan for
    ``2n`` contains the fan for ``n``.
    """
    if d == 2:
        if direction_count < 8:
            raise ValueError("need at least 8 directions in 2-D")
        ang = 2.0 * np.pi * np.arange(direction_count) / direction_count
        return np.stack([np.cos(ang), np.sin(ang)], axis=1)
    if d == 3:
        if direction_count < 26:
            raise ValueError("need at least 26 directions in 3-D")
        k = np.arange(1, direction_count + 1)
        z = 1.0 - 2.0 * _radical_inverse(k, 2)
        phi = 2.0 * np.pi * _radical_inverse(k, 3)
        s = np.sqrt(np.maximum(0.0, 1.0 - z * z))
        return np.stack([s * np.cos(phi), s * np.sin(phi), z], axis=1)
    raise ValueError("dimension must be 2 or 3")


def _radical_inverse(k: np.ndarray, base: int) -> np.ndarray:
    k = k.copy()
    out = np.zeros(len(k))
    scale = 1.0 / base
    while np.any(k > 0):
        out += (k % base) * scale
        k //= base
        scale /= base
    return out


def _bond_stiffness(grid, u, material, bonds):
    """``-(2/(eps V_d)) curvature / q * w`` per bond (the e e^T coefficient)."""
    eps = material.horizon
    q = grid.bond_q[bonds]
    S = bond_strains(grid, np.asarray(u, dtype=float), bonds)
    curv = force_curvature(S, q, eps, material.potential, material.influence)
    return -2.0 / (eps * material.neighborhood_volume) * curv / q * grid.bond_w[bonds]


# Bonds whose projection on nu is below this fraction of their length are
# treated as lying in the separating plane and excluded from both halves.
_PLANE_TOL = 1e-12


def _behind(projection: np.ndarray, q: np.ndarray) -> np.ndarray:
    return projection < -_PLANE_TOL * q


def stability_matrix(grid: DomainGrid, u: np.ndarray, i: int, nu, material: MaterialModel) -> np.ndarray:
    """``A_nu`` at node ``i``: a symmetric ``d x d`` matrix."""
    nu = np.asarray(nu, dtype=float)
    if abs(np.linalg.norm(nu) - 1.0) > 1e-12:
        raise ValueError("direction must be a unit vector")
    bonds = np.arange(grid.offsets[i], grid.offsets[i + 1])
    coef = _bond_stiffness(grid, u, material, bonds)
    xi = grid.bond_xi[bonds]
    e = xi / grid.bond_q[bonds][:, None]
    mask = _behind(xi @ nu, grid.bond_q[bonds])
    A = np.einsum("b,bk,bl->kl", coef * mask, e, e)
    lower = np.tril_indices(grid.dimension, -1)
    A[lower] = A.T[lower]
    return A


def nucleation_scan(grid: DomainGrid, u: np.ndarray, material: MaterialModel,
                    direction_count: int = 64, nodes: np.ndarray | None = None) -> StabilityReport:
    """Sweep ``nu`` over :func:`direction_fan` at each node; rank by ``lambda_max``."""
    d = grid.dimension
    fan = direction_fan(direction_count, d)
    nodes = grid.interior if nodes is None else np.asarray(nodes, dtype=np.int64)
    bonds = _bond_subset(grid, nodes)
    rows = _local_rows(grid, nodes, bonds)
    coef = _bond_stiffness(grid, u, material, bonds)
    xi = grid.bond_xi[bonds]
    e = xi / grid.bond_q[bonds][:, None]
    comps = [(k, l) for k in range(d) for l in range(k, d)]
    outer = {kl: coef * e[:, kl[0]] * e[:, kl[1]] for kl in comps}

    n = len(nodes)
    q = grid.bond_q[bonds]
    projections = xi @ fan.T

    def matrices(k: int) -> np.ndarray:
        mask = _behind(projections[:, k], q)
        A = np.zeros((n, d, d))
        for (a, b) in comps:
            A[:, a, b] = np.bincount(rows[mask], weights=outer[(a, b)][mask], minlength=n)
            A[:, b, a] = A[:, a, b]
        return A

    lam = np.zeros((len(fan), n))
    if n:
        for k in range(len(fan)):
            lam[k] = np.linalg.eigvalsh(matrices(k))[:, -1]
    choice = _most_unstable(lam, fan)
    cols = np.arange(n)
    best = np.zeros((n, d, d))
    for k in np.unique(choice):
        sel = choice == k
        best[sel] = matrices(k)[sel]
    best_lam = lam[choice, cols]
    return StabilityReport(nodes, best, best_lam, fan[choice], best_lam > 0.0)


def _most_unstable(lam: np.ndarray, fan: np.ndarray) -> np.ndarray:
    """Index of the maximising direction per node, with a tie-break.

    On a lattice ``A_nu`` is piecewise constant in ``nu`` (it changes only when
    the separating plane sweeps across a bond), so the maximum is usually
    attained on a whole run of directions.  In 2-D the middle of the
    contiguous (circular) run containing the first maximiser is returned; in
    3-D the tied direction closest to the mean of the tied set.
    """
    nfan, n = lam.shape
    if n == 0:
        return np.zeros(0, dtype=np.int64)
    top = lam.max(axis=0)
    scale = np.maximum(np.abs(lam).max(axis=0), np.finfo(float).tiny)
    tied = lam >= top - 1e-10 * scale
    choice = np.argmax(lam, axis=0)
    for col in range(n):
        ties = tied[:, col]
        if ties.sum() <= 1:
            continue
        if fan.shape[1] == 2:
            k0 = choice[col]
            lo = 0
            while lo < nfan - 1 and ties[(k0 - lo - 1) % nfan]:
                lo += 1
            hi = 0
            while hi < nfan - 1 - lo and ties[(k0 + hi + 1) % nfan]:
                hi += 1
            choice[col] = (k0 + (hi - lo) // 2) % nfan
        else:
            mean = fan[ties].mean(axis=0)
            idx = np.flatnonzero(ties)
            choice[col] = idx[np.argmax(fan[idx] @ mean)]
    return choice


def unstable_flags(grid: DomainGrid, report: StabilityReport) -> np.ndarray:
    """Per-node boolean array (all nodes) from a report."""
    flags = np.zeros(grid.num_nodes, dtype=bool)
    flags[report.nodes[report.unstable]] = True
    return flags
