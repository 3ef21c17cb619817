"""Nonlocal force assembly, velocity-Verlet stepping and the energy ledger.

The discrete equation of motion at an interior node is::

    rho a_i = F_i + b(t, x_i),
    F_i = (2 / V_d) sum_j force_per_length(S_ij) e_ij w_ij,   V_d = eps^d omega_d.

Constrained (collar) nodes carry ``u = v = a = 0``.  The potential energy sums
bond energies over *all* nodes, so that collar nodes inside the horizon of the
interior contribute, which makes ``-dPD/du_i = h^d F_i`` hold exactly and the
discrete flow Hamiltonian.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum
from functools import lru_cache
from typing import Callable, Iterator

import numpy as np
from numpy.typing import ArrayLike

from .calibration import MaterialModel
from .grid import DomainGrid

THREADS_ENV = "COHESIVE_PD_THREADS"


def default_threads() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


class BodyForceKind(str, Enum):
    NONE = "none"
    CONSTANT = "constant"
    RAMPED = "ramped"
    PLANE_WAVE = "plane_wave"


@dataclass(frozen=True)
class BodyForce:
    """Closed-form body force density ``b(t, x)`` with its time derivative.

    ``constant``: ``b = vector``.
    ``ramped``: ``b = vector * min(t / ramp_time, 1)``.
    ``plane_wave``: ``b = vector * sin(k . x - omega t)``.
    """

    kind: BodyForceKind = BodyForceKind.NONE
    vector: tuple[float, ...] = ()
    ramp_time: float = 1.0
    wave_vector: tuple[float, ...] = ()
    omega: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", BodyForceKind(self.kind))
        object.__setattr__(self, "vector", tuple(float(c) for c in self.vector))
        object.__setattr__(self, "wave_vector", tuple(float(c) for c in self.wave_vector))
        if self.kind is not BodyForceKind.NONE and not self.vector:
            raise ValueError("body force needs a vector")
        if self.kind is BodyForceKind.RAMPED and not self.ramp_time > 0.0:
            raise ValueError("ramp_time must be positive")
        if self.kind is BodyForceKind.PLANE_WAVE and len(self.wave_vector) != len(self.vector):
            raise ValueError("wave_vector and vector must have the same length")

    @classmethod
    def none(cls) -> "BodyForce":
        return cls()

    @classmethod
    def constant(cls, vector: ArrayLike) -> "BodyForce":
        return cls(BodyForceKind.CONSTANT, tuple(vector))

    @classmethod
    def ramped(cls, vector: ArrayLike, ramp_time: float) -> "BodyForce":
        return cls(BodyForceKind.RAMPED, tuple(vector), ramp_time=ramp_time)

    @classmethod
    def plane_wave(cls, vector: ArrayLike, wave_vector: ArrayLike, omega: float) -> "BodyForce":
        return cls(BodyForceKind.PLANE_WAVE, tuple(vector), wave_vector=tuple(wave_vector), omega=omega)

    @property
    def is_zero(self) -> bool:
        return self.kind is BodyForceKind.NONE or not any(self.vector)

    def value(self, t: float, x: np.ndarray) -> np.ndarray:
        """``b(t, x)`` at the rows of ``x``."""
        out = np.zeros_like(x, dtype=float)
        if self.kind is BodyForceKind.NONE:
            return out
        vec = np.asarray(self.vector)
        if self.kind is BodyForceKind.CONSTANT:
            out[:] = vec
        elif self.kind is BodyForceKind.RAMPED:
            out[:] = vec * min(t / self.ramp_time, 1.0)
        else:
            phase = x @ np.asarray(self.wave_vector) - self.omega * t
            out[:] = np.sin(phase)[:, None] * vec
        return out

    def rate(self, t: float, x: np.ndarray) -> np.ndarray:
        """``db/dt`` at the rows of ``x`` (right derivative at ramp corners)."""
        out = np.zeros_like(x, dtype=float)
        if self.kind is BodyForceKind.RAMPED and t < self.ramp_time:
            out[:] = np.asarray(self.vector) / self.ramp_time
        elif self.kind is BodyForceKind.PLANE_WAVE:
            phase = x @ np.asarray(self.wave_vector) - self.omega * t
            out[:] = -self.omega * np.cos(phase)[:, None] * np.asarray(self.vector)
        return out


@dataclass(frozen=True)
class EnergyLedger:
    """Energies at one instant and the running balance bookkeeping.

    ``total = kinetic + potential - external`` with ``external = int b . u``;
    ``work_integral`` accumulates ``int_0^t int b_t . u`` by the trapezoid rule,
    ``force_norm_integral`` accumulates ``int_0^t ||b||_{L2}``.
    """

    kinetic: float
    potential: float
    external: float
    initial_total: float
    work_integral: float = 0.0
    force_norm_integral: float = 0.0
    rate_power: float = 0.0      # int b_t . u at this instant (trapezoid endpoint)
    force_norm: float = 0.0      # ||b(t)||_{L2} at this instant

    @property
    def total(self) -> float:
        return self.kinetic + self.potential - self.external

    @property
    def residual(self) -> float:
        return abs(self.total - self.initial_total + self.work_integral)


@dataclass(frozen=True, eq=False)
class SimState:
    """Nodal fields at time ``t`` plus the energy ledger."""

    t: float
    u: np.ndarray
    v: np.ndarray
    a: np.ndarray
    ledger: EnergyLedger
    forcing: np.ndarray = field(repr=False, default=None)   # F + b at time t


class _BondOperator:
    """Per-bond constants for one (grid, material) pair.

    Strains and profile values are evaluated once per unordered pair; the
    force on each interior node is then gathered over its own directed bonds
    in neighbour order, so every node has a single writer and a fixed
    reduction order.  Pairs with both ends on the collar are skipped: their
    strain is identically zero.
    """

    def __init__(self, grid: DomainGrid, material: MaterialModel):
        if grid.dimension != material.dimension:
            raise ValueError("grid and material dimensions differ")
        eps = material.horizon
        if not np.isclose(eps, grid.horizon, rtol=1e-12, atol=0.0):
            raise ValueError("grid horizon and material horizon differ")
        vd = material.neighborhood_volume
        jc = material.influence.closure(grid.bond_q / eps)
        bi, bj = grid.bond_i, grid.bond_j
        free = ~grid.constrained
        pair = (bi < bj) & (free[bi] | free[bj])
        pair_index = np.full(len(bi), -1, dtype=np.int64)
        pair_index[pair] = np.arange(int(pair.sum()))
        # Directed bond (j, i) maps to the same pair as (i, j); the bond list is
        # sorted by (owner, neighbour), so the reverse bond is found by search.
        key = bi * grid.num_nodes + bj
        reverse = np.searchsorted(key, bj * grid.num_nodes + bi)
        pid = np.where(pair, pair_index, pair_index[reverse])

        self.num_nodes = grid.num_nodes
        self.dimension = grid.dimension
        self.p_i = bi[pair]
        self.p_j = bj[pair]
        self.p_q = grid.bond_q[pair]
        self.p_e = [np.ascontiguousarray(grid.bond_xi[pair, k] / self.p_q) for k in range(grid.dimension)]
        # Energy of a pair counted from both ends: 2 (h^d / V_d) (1/eps) J w.
        self.p_energy = 2.0 * grid.cell_volume / vd / eps * jc[pair] * grid.bond_w[pair]
        # Force magnitude factor: (2/V_d) (2/eps) J w.
        self.p_force = (2.0 / vd) * (2.0 / eps) * jc[pair] * grid.bond_w[pair]
        ib = grid.interior_bonds
        self.d_i = bi[ib]
        self.d_pair = pid[ib]
        # Direction from the owner, so the pair magnitude applies unchanged.
        self.d_e = [np.ascontiguousarray(grid.bond_xi[ib, k] / grid.bond_q[ib])
                    for k in range(grid.dimension)]

    def strains(self, u: np.ndarray) -> np.ndarray:
        S = np.zeros(len(self.p_i))
        for k in range(self.dimension):
            comp = np.ascontiguousarray(u[:, k])
            S += (comp.take(self.p_j) - comp.take(self.p_i)) * self.p_e[k]
        S /= self.p_q
        return S

    def forces(self, f, u: np.ndarray, with_energy: bool = False):
        S = self.strains(u)
        rho = self.p_q * S * S
        if with_energy:
            val, slope = f.value_and_slope(rho)
            energy = float(np.dot(self.p_energy, val))
        else:
            slope, energy = f.slope(rho), None
        mag = self.p_force * slope * S
        return self.gather(mag), energy

    def gather(self, mag: np.ndarray, lo: int = 0, hi: int | None = None,
               out: np.ndarray | None = None) -> np.ndarray:
        if out is None:
            out = np.zeros((self.num_nodes, self.dimension))
        hi = len(self.d_i) if hi is None else hi
        owner = self.d_i[lo:hi]
        m = mag.take(self.d_pair[lo:hi])
        for k in range(self.dimension):
            out[:, k] += np.bincount(owner, weights=m * self.d_e[k][lo:hi], minlength=self.num_nodes)
        return out

    def energy(self, f, u: np.ndarray) -> float:
        S = self.strains(u)
        return float(np.dot(self.p_energy, f.value(self.p_q * S * S)))


@lru_cache(maxsize=16)
def _operator(grid: DomainGrid, material: MaterialModel) -> _BondOperator:
    return _BondOperator(grid, material)


def bond_strains(grid: DomainGrid, u: np.ndarray, bonds: np.ndarray | None = None) -> np.ndarray:
    """``S_ij`` for the given directed-bond indices (all bonds by default)."""
    bonds = slice(None) if bonds is None else bonds
    du = u[grid.bond_j[bonds]] - u[grid.bond_i[bonds]]
    return np.einsum("bk,bk->b", du, grid.bond_xi[bonds]) / grid.bond_q[bonds] ** 2


def _force_and_energy(grid: DomainGrid, u: np.ndarray, material: MaterialModel,
                      threads: int | None, with_energy: bool):
    op = _operator(grid, material)
    u = np.asarray(u, dtype=float)
    threads = default_threads() if threads is None else max(1, int(threads))
    nb = len(op.d_i)
    if threads == 1 or nb < 4096:
        return op.forces(material.potential, u, with_energy=with_energy)
    S = op.strains(u)
    rho = op.p_q * S * S
    val, slope = material.potential.value_and_slope(rho)
    mag = op.p_force * slope * S
    # Split at owner-node boundaries so each node has exactly one writer.
    cuts = np.linspace(0, nb, threads + 1).astype(np.int64)
    cuts[1:-1] = np.searchsorted(op.d_i, op.d_i[cuts[1:-1]], side="left")
    cuts = np.unique(cuts)
    parts = [np.zeros_like(u) for _ in range(len(cuts) - 1)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        list(pool.map(lambda k: op.gather(mag, cuts[k], cuts[k + 1], parts[k]), range(len(parts))))
    F = parts[0]
    for part in parts[1:]:
        F += part       # disjoint node supports: only exact zeros are added
    energy = float(np.dot(op.p_energy, val)) if with_energy else None
    return F, energy


def assemble_force(grid: DomainGrid, u: np.ndarray, material: MaterialModel,
                   threads: int | None = None) -> np.ndarray:
    """Internal force density at every node; zero on the collar.

    Each node's sum runs over its neighbours in a fixed order, so the result is
    bit-identical for any ``threads``.
    """
    return _force_and_energy(grid, u, material, threads, False)[0]


def total_potential(grid: DomainGrid, u: np.ndarray, material: MaterialModel) -> float:
    """``PD = sum_i h^d (1/V_d) sum_j W(S_ij) w_ij`` over all nodes.

    Collar nodes are included: their bonds into the interior store energy.
    ``u`` is assumed to vanish on the collar.
    """
    return _operator(grid, material).energy(material.potential, np.asarray(u, dtype=float))


def kinetic_energy(grid: DomainGrid, v: np.ndarray, material: MaterialModel) -> float:
    return 0.5 * material.density * grid.cell_volume * float(np.sum(v * v))


def stable_dt(grid: DomainGrid, material: MaterialModel, safety: float = 0.5) -> float:
    """``safety * sqrt(2 rho / K_max)`` from the linearised row-sum stiffness."""
    if not (0.0 < safety <= 1.0):
        raise ValueError("safety must lie in (0, 1]")
    eps = material.horizon
    jc = material.influence.closure(grid.bond_q / eps)
    row = (2.0 / material.neighborhood_volume) * (2.0 / eps) * material.potential.initial_slope \
        * jc * grid.bond_w / grid.bond_q
    K = np.bincount(grid.bond_i, weights=row, minlength=grid.num_nodes)[grid.interior]
    kmax = float(K.max()) if K.size else 0.0
    if kmax <= 0.0:
        raise ValueError("no interior stiffness; cannot bound the time step")
    return safety * float(np.sqrt(2.0 * material.density / kmax))


def _pin(grid: DomainGrid, *arrays: np.ndarray) -> None:
    for arr in arrays:
        arr[grid.constrained] = 0.0


def _ledger_terms(grid, material, t, u, body_force):
    """(external work b.u, rate power b_t.u, ||b||) at time t."""
    if body_force.is_zero:
        return 0.0, 0.0, 0.0
    vol = grid.cell_volume
    x = grid.positions
    b = body_force.value(t, x)
    _pin(grid, b)
    bt = body_force.rate(t, x)
    _pin(grid, bt)
    return (vol * float(np.sum(b * u)), vol * float(np.sum(bt * u)),
            float(np.sqrt(vol * np.sum(b * b))))


def _body(grid: DomainGrid, body_force: BodyForce, t: float) -> np.ndarray | float:
    if body_force.is_zero:
        return 0.0
    b = body_force.value(t, grid.positions)
    _pin(grid, b)
    return b


def initial_state(grid: DomainGrid, material: MaterialModel, u0: ArrayLike,
                  v0: ArrayLike | None = None, body_force: BodyForce | None = None,
                  t0: float = 0.0, threads: int | None = None) -> SimState:
    """Pin the collar, evaluate the forcing and open the energy ledger."""
    body_force = body_force or BodyForce.none()
    u = np.array(u0, dtype=float, copy=True).reshape(grid.num_nodes, grid.dimension)
    v = np.zeros_like(u) if v0 is None else np.array(v0, dtype=float, copy=True).reshape(u.shape)
    _pin(grid, u, v)
    F, pd = _force_and_energy(grid, u, material, threads, True)
    forcing = F + _body(grid, body_force, t0)
    _pin(grid, forcing)
    a = forcing / material.density
    ext, power, bnorm = _ledger_terms(grid, material, t0, u, body_force)
    ke = kinetic_energy(grid, v, material)
    ledger = EnergyLedger(ke, pd, ext, ke + pd - ext, rate_power=power, force_norm=bnorm)
    return SimState(t0, u, v, a, ledger, forcing)


def step(state: SimState, grid: DomainGrid, material: MaterialModel,
         body_force: BodyForce | None, dt: float, threads: int | None = None) -> SimState:
    """One velocity-Verlet step; returns a new state (inputs are not modified)."""
    body_force = body_force or BodyForce.none()
    rho = material.density
    half = state.v + (0.5 * dt / rho) * state.forcing
    _pin(grid, half)
    u = state.u + dt * half
    _pin(grid, u)
    t = state.t + dt
    F, pd = _force_and_energy(grid, u, material, threads, True)
    forcing = F + _body(grid, body_force, t)
    _pin(grid, forcing)
    v = half + (0.5 * dt / rho) * forcing
    _pin(grid, v)
    a = forcing / rho

    old = state.ledger
    ext, power, bnorm = _ledger_terms(grid, material, t, u, body_force)
    ledger = replace(
        old,
        kinetic=kinetic_energy(grid, v, material),
        potential=pd,
        external=ext,
        work_integral=old.work_integral + 0.5 * dt * (old.rate_power + power),
        force_norm_integral=old.force_norm_integral + 0.5 * dt * (old.force_norm + bnorm),
        rate_power=power,
        force_norm=bnorm,
    )
    return SimState(t, u, v, a, ledger, forcing)


def energy_balance_residual(state: SimState) -> float:
    """``|EPD(t) - EPD(0) + int_0^t int b_t . u|`` from the state's ledger."""
    return state.ledger.residual


def run(state: SimState, grid: DomainGrid, material: MaterialModel,
        body_force: BodyForce | None, dt: float, steps: int, stride: int = 1,
        threads: int | None = None) -> Iterator[tuple[int, SimState]]:
    """Yield ``(step_index, state)`` at index 0 and every ``stride`` steps after."""
    if stride < 1:
        raise ValueError("stride must be >= 1")
    yield 0, state
    for n in range(1, steps + 1):
        state = step(state, grid, material, body_force, dt, threads)
        if n % stride == 0 or n == steps:
            yield n, state


def simulate(grid: DomainGrid, material: MaterialModel, u0: ArrayLike, v0: ArrayLike | None,
             body_force: BodyForce | None, t_end: float, *, safety: float = 0.5,
             dt: float | None = None, stride: int = 1, threads: int | None = None,
             callback: Callable[[int, SimState], None] | None = None) -> SimState:
    """Integrate from ``t = 0`` to ``t_end`` and return the final state.

    The step is ``stable_dt(safety)`` shortened so that an integer number of
    steps lands on ``t_end`` (unless ``dt`` is given).
    """
    if not t_end > 0.0:
        raise ValueError("t_end must be positive")
    if dt is None:
        dt_max = stable_dt(grid, material, safety)
        steps = int(np.ceil(t_end / dt_max - 1e-12))
        dt = t_end / steps
    else:
        steps = int(round(t_end / dt))
    state = initial_state(grid, material, u0, v0, body_force, threads=threads)
    for n, state in run(state, grid, material, body_force, dt, steps, stride, threads):
        if callback is not None:
            callback(n, state)
    return state
