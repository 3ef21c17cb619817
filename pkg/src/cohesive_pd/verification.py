"""Dense-quadrature checks of the nonlocal energy against its elastic limit.

The nonlocal energy of a displacement ``u`` on a box ``D`` is::

    PD(u) = int_D (1/(eps omega_d)) int_{|e|=1} int_0^1 J(r) f(eps r S^2) r^(d-1) dr de dx,
    S = (u(x + eps r e) - u(x)) . e / (eps r),

and the elastic (LEFM) energy is ``int_D 2 mu |E u|^2 + lambda (div u)^2 + G_c L``
with ``L`` the length of the jump set.  The fields in the catalog below have
closed-form elastic energies, and :func:`pd_energy_dense` integrates ``PD`` with
Gauss rules whose panels are split where the integrand is not smooth (at a
jump line, one horizon either side of it, at the radius where a bond first
crosses the line, and at the angles where crossing begins).  Resolution is
doubled until successive values agree to a relative ``1e-4``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numpy.polynomial.legendre import leggauss

from .calibration import MaterialModel
from .dynamics import initial_state, run, stable_dt
from .grid import DomainSpec, build_grid
from .kernel import UNIT_BALL_VOLUME

CONVERGENCE_TOL = 1e-4
INEQUALITY_SLACK = 1e-3


class NonConvergedError(RuntimeError):
    """Dense quadrature did not settle before the resolution ceiling."""


Box = tuple[tuple[float, float], ...]


def unit_box(d: int) -> Box:
    return tuple((0.0, 1.0) for _ in range(d))


# ---------------------------------------------------------------------------
# Field catalog.
# ---------------------------------------------------------------------------

class AnalyticField:
    """Displacement field with exact strain and jump set."""

    kind: str = "abstract"
    dimension: int = 2

    def displacement(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def strain(self, x: np.ndarray) -> np.ndarray:
        """Symmetric gradient of the absolutely continuous part, shape (..., d, d)."""
        raise NotImplementedError

    def jump_plane(self) -> tuple[np.ndarray, np.ndarray] | None:
        """``(point, unit normal)`` of the single jump line/plane, if any."""
        return None

    def jump_length(self, box: Box) -> float:
        """``H^{d-1}`` measure of the jump set inside ``box``."""
        plane = self.jump_plane()
        if plane is None:
            return 0.0
        if self.dimension != 2:
            raise NotImplementedError("jump measure is implemented for lines in 2-D")
        return _chord_length(box, *plane)

    def bulk_energy(self, box: Box, mu: float, lam: float) -> float:
        """``int_box 2 mu |E|^2 + lambda (tr E)^2`` in closed form."""
        raise NotImplementedError

    def x_panels(self, box: Box, axis: int) -> int:
        """Number of equal base panels along ``axis`` for the outer quadrature."""
        return 1


def _chord_length(box: Box, point: np.ndarray, normal: np.ndarray) -> float:
    """Length of the line ``(x - point) . normal = 0`` inside a 2-D box."""
    t = np.array([-normal[1], normal[0]])
    lo, hi = -np.inf, np.inf
    for axis, (a, b) in enumerate(box):
        if abs(t[axis]) < 1e-15:
            if not a <= point[axis] <= b:
                return 0.0
            continue
        s0, s1 = (a - point[axis]) / t[axis], (b - point[axis]) / t[axis]
        lo, hi = max(lo, min(s0, s1)), min(hi, max(s0, s1))
    return float(max(0.0, hi - lo))


def _box_volume(box: Box) -> float:
    return float(np.prod([b - a for a, b in box]))


@dataclass(frozen=True)
class LinearField(AnalyticField):
    """``u = G x`` for a constant matrix ``G``."""

    gradient: tuple[tuple[float, ...], ...]
    kind: str = field(default="linear", init=False)

    @property
    def dimension(self) -> int:
        return len(self.gradient)

    @property
    def _G(self) -> np.ndarray:
        return np.asarray(self.gradient, dtype=float)

    def displacement(self, x):
        return np.asarray(x) @ self._G.T

    def strain(self, x):
        E = 0.5 * (self._G + self._G.T)
        return np.broadcast_to(E, np.shape(x)[:-1] + E.shape)

    def bulk_energy(self, box, mu, lam):
        E = 0.5 * (self._G + self._G.T)
        return _box_volume(box) * (2.0 * mu * float(np.sum(E * E)) + lam * float(np.trace(E)) ** 2)


def DilationField(scale: float, dimension: int = 2) -> LinearField:
    """``u = c x``."""
    field_ = LinearField(tuple(tuple(scale if i == j else 0.0 for j in range(dimension))
                               for i in range(dimension)))
    object.__setattr__(field_, "kind", "dilation")
    return field_


@dataclass(frozen=True)
class PureJumpField(AnalyticField):
    """``u = jump`` on the side ``(x - point) . normal >= 0``, zero on the other."""

    point: tuple[float, ...]
    normal: tuple[float, ...]
    jump: tuple[float, ...]
    kind: str = field(default="pure-jump", init=False)

    def __post_init__(self) -> None:
        n = np.asarray(self.normal, dtype=float)
        object.__setattr__(self, "normal", tuple(n / np.linalg.norm(n)))

    @property
    def dimension(self) -> int:
        return len(self.point)

    def _side(self, x):
        return (np.asarray(x) - np.asarray(self.point)) @ np.asarray(self.normal) >= 0.0

    def displacement(self, x):
        return np.where(self._side(x)[..., None], np.asarray(self.jump, dtype=float), 0.0)

    def strain(self, x):
        d = self.dimension
        return np.zeros(np.shape(x)[:-1] + (d, d))

    def jump_plane(self):
        return np.asarray(self.point, dtype=float), np.asarray(self.normal, dtype=float)

    def bulk_energy(self, box, mu, lam):
        return 0.0


@dataclass(frozen=True)
class ModeIOpeningField(PureJumpField):
    """Symmetric opening ``u = +-(amplitude/2) normal`` across a line."""

    amplitude: float = 0.0
    jump: tuple[float, ...] = ()
    kind: str = field(default="mode-I", init=False)

    def __post_init__(self) -> None:
        super().__post_init__()
        object.__setattr__(self, "jump", tuple(self.amplitude * np.asarray(self.normal)))

    def displacement(self, x):
        half = 0.5 * self.amplitude * np.asarray(self.normal)
        return np.where(self._side(x)[..., None], half, -half)


@dataclass(frozen=True)
class PlaneWaveField(AnalyticField):
    """``u = amplitude * polarization * sin(k . x + phase)``."""

    wave_vector: tuple[float, ...]
    polarization: tuple[float, ...]
    amplitude: float = 1.0
    phase: float = 0.0
    kind: str = field(default="plane-wave", init=False)

    def __post_init__(self) -> None:
        p = np.asarray(self.polarization, dtype=float)
        if abs(np.linalg.norm(p) - 1.0) > 1e-12:
            raise ValueError("polarization must be a unit vector")

    @property
    def dimension(self) -> int:
        return len(self.wave_vector)

    def _arg(self, x):
        return np.asarray(x) @ np.asarray(self.wave_vector) + self.phase

    def displacement(self, x):
        return self.amplitude * np.sin(self._arg(x))[..., None] * np.asarray(self.polarization)

    def strain(self, x):
        k, p = np.asarray(self.wave_vector), np.asarray(self.polarization)
        E = 0.5 * (np.outer(p, k) + np.outer(k, p))
        return self.amplitude * np.cos(self._arg(x))[..., None, None] * E

    def bulk_energy(self, box, mu, lam):
        k, p = np.asarray(self.wave_vector), np.asarray(self.polarization)
        E = 0.5 * (np.outer(p, k) + np.outer(k, p))
        density = 2.0 * mu * float(np.sum(E * E)) + lam * float(np.trace(E)) ** 2
        # int_box cos^2(k.x + phase) = |box|/2 + Re(e^{2i phase} prod_a int e^{2i k_a x_a}) / 2
        prod = complex(math.cos(2 * self.phase), math.sin(2 * self.phase))
        for ka, (a, b) in zip(k, box):
            if ka == 0.0:
                prod *= (b - a)
            else:
                prod *= (np.exp(2j * ka * b) - np.exp(2j * ka * a)) / (2j * ka)
        return self.amplitude**2 * density * 0.5 * (_box_volume(box) + prod.real)

    def x_panels(self, box, axis):
        a, b = box[axis]
        return 1 + int(math.ceil(abs(self.wave_vector[axis]) * (b - a) / math.pi))


@dataclass(frozen=True)
class ZeroField(AnalyticField):
    dim: int = 2
    kind: str = field(default="zero", init=False)

    @property
    def dimension(self) -> int:
        return self.dim

    def displacement(self, x):
        return np.zeros(np.shape(x))

    def strain(self, x):
        return np.zeros(np.shape(x)[:-1] + (self.dim, self.dim))

    def bulk_energy(self, box, mu, lam):
        return 0.0


def saturating_jump(material: MaterialModel, eps: float, level: float = 0.99) -> float:
    """Smallest jump ``delta`` with ``f(delta^2 / q) >= level * f_inf`` for all ``q <= eps``."""
    f = material.potential
    target = level * f.plateau
    lo, hi = 0.0, 1.0
    while float(f.value(hi * hi / eps)) < target:
        hi *= 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if float(f.value(mid * mid / eps)) < target:
            lo = mid
        else:
            hi = mid
    return hi


def field_catalog(material: MaterialModel, eps_max: float = 0.2) -> dict[str, AnalyticField]:
    """The standard 2-D verification fields on the unit square."""
    delta = saturating_jump(material, eps_max)
    return {
        "linear": LinearField(((0.02, 0.01), (-0.005, 0.015))),
        "dilation": DilationField(0.01),
        "pure-jump": PureJumpField((0.5, 0.5), (0.0, 1.0), (0.0, delta)),
        "mode-I": ModeIOpeningField((0.5, 0.5), (0.0, 1.0), amplitude=delta),
        "plane-wave": PlaneWaveField((2.0 * np.pi, 0.0), (0.0, 1.0), amplitude=0.002),
    }


# ---------------------------------------------------------------------------
# Elastic energy.
# ---------------------------------------------------------------------------

def lefm_energy(field_: AnalyticField, material: MaterialModel, box: Box | None = None) -> float:
    """Closed-form bulk energy plus ``G_c`` times the jump length."""
    box = unit_box(field_.dimension) if box is None else box
    _check_dims(field_, material, box)
    bulk = field_.bulk_energy(box, material.mu, material.lam)
    return bulk + material.Gc * field_.jump_length(box)


def _check_dims(field_, material, box):
    if field_.dimension != material.dimension or len(box) != material.dimension:
        raise ValueError("field, material and box dimensions differ")


# ---------------------------------------------------------------------------
# Dense nonlocal energy.
# ---------------------------------------------------------------------------

def _gauss(a: np.ndarray, b: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss nodes/weights on intervals ``[a, b]`` (broadcast); trailing axis = node."""
    t, w = leggauss(n)
    a, b = np.asarray(a, dtype=float)[..., None], np.asarray(b, dtype=float)[..., None]
    half = 0.5 * (b - a)
    return half * t + 0.5 * (a + b), half * w


def _axis_rule(lo: float, hi: float, cuts: Sequence[float], panels: int, n: int):
    edges = set(np.linspace(lo, hi, panels + 1).tolist())
    edges.update(c for c in cuts if lo < c < hi)
    edges = np.array(sorted(edges))
    x, w = _gauss(edges[:-1], edges[1:], n)
    return x.ravel(), w.ravel()


def _outer_rule(field_: AnalyticField, box: Box, eps: float, n: int):
    plane = field_.jump_plane()
    rules = []
    for axis, (lo, hi) in enumerate(box):
        cuts: list[float] = []
        if plane is not None:
            p, nrm = plane
            if abs(abs(nrm[axis]) - 1.0) < 1e-14:
                cuts = [p[axis] - eps, p[axis], p[axis] + eps]
        rules.append(_axis_rule(lo, hi, cuts, field_.x_panels(box, axis), n))
    grids = np.meshgrid(*[r[0] for r in rules], indexing="ij")
    weights = np.meshgrid(*[r[1] for r in rules], indexing="ij")
    x = np.stack([g.ravel() for g in grids], axis=1)
    w = np.prod(np.stack([g.ravel() for g in weights], axis=1), axis=1)
    return x, w


def _density_2d(field_, material, eps, x, n):
    """Energy density at points ``x`` (m, 2) with ``n``-point rules in theta and r."""
    J, f = material.influence, material.potential
    m = len(x)
    plane = field_.jump_plane()
    if plane is None:
        # Trapezoid in theta (periodic), two Gauss panels in r.
        theta = 2.0 * np.pi * np.arange(2 * n) / (2 * n)
        wt = np.full(2 * n, 2.0 * np.pi / (2 * n))
        r, wr = _gauss(np.array([0.0, 0.5]), np.array([0.5, 1.0]), n)
        r, wr = r.ravel(), wr.ravel()
        theta = np.broadcast_to(theta[None, :, None], (m, 2 * n, 2 * n))
        wt = np.broadcast_to(wt[None, :, None], theta.shape)
        rr = np.broadcast_to(r[None, None, :], theta.shape)
        wr = np.broadcast_to(wr[None, None, :], theta.shape)
    else:
        p, nrm = plane
        s = (x - p) @ nrm
        # Bonds cross when they point towards the line (angle centre tc) within
        # +-psi_c, and only beyond radius r* = |s| / (eps cos(theta - tc)).
        toward = np.where(s >= 0.0, -1.0, 1.0)[:, None] * nrm
        tc = np.arctan2(toward[:, 1], toward[:, 0])
        psi = np.arccos(np.clip(np.abs(s) / eps, 0.0, 1.0))
        th_c, wth_c = _gauss(tc - psi, tc + psi, n)                       # crossing arc
        th_n, wth_n = _gauss(tc + psi, tc - psi + 2.0 * np.pi, n)         # the rest
        rstar = np.abs(s)[:, None] / (eps * np.cos(th_c - tc[:, None]))
        rstar = np.clip(rstar, 0.0, 1.0)
        r_in, w_in = _gauss(np.zeros_like(rstar), rstar, n)
        r_out, w_out = _gauss(rstar, np.ones_like(rstar), n)
        r_c = np.concatenate([r_in, r_out], axis=2)
        wr_c = np.concatenate([w_in, w_out], axis=2)
        r_n, wr_n = _gauss(np.array([0.0, 0.5]), np.array([0.5, 1.0]), n)
        r_n = np.broadcast_to(r_n.ravel()[None, None, :], (m, n, 2 * n))
        wr_n = np.broadcast_to(wr_n.ravel()[None, None, :], (m, n, 2 * n))
        theta = np.concatenate([np.broadcast_to(th_c[:, :, None], r_c.shape),
                                np.broadcast_to(th_n[:, :, None], r_n.shape)], axis=1)
        wt = np.concatenate([np.broadcast_to(wth_c[:, :, None], r_c.shape),
                             np.broadcast_to(wth_n[:, :, None], r_n.shape)], axis=1)
        rr = np.concatenate([r_c, r_n], axis=1)
        wr = np.concatenate([wr_c, wr_n], axis=1)
    e = np.stack([np.cos(theta), np.sin(theta)], axis=-1)
    y = x[:, None, None, :] + eps * rr[..., None] * e
    du = field_.displacement(y) - field_.displacement(x)[:, None, None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        S = np.einsum("...k,...k->...", du, e) / (eps * rr)
    S = np.where(rr > 0.0, S, 0.0)
    integrand = J.closure(rr) * f.value(eps * rr * S * S) * rr
    return np.sum(integrand * wt * wr, axis=(1, 2)) / (eps * UNIT_BALL_VOLUME[2])


def _density_3d(field_, material, eps, x, n):
    if field_.jump_plane() is not None:
        raise NotImplementedError("dense 3-D quadrature supports smooth fields only")
    J, f = material.influence, material.potential
    cz, wz = leggauss(n)
    phi = 2.0 * np.pi * np.arange(2 * n) / (2 * n)
    wphi = np.full(2 * n, 2.0 * np.pi / (2 * n))
    r, wr = _gauss(np.array([0.0, 0.5]), np.array([0.5, 1.0]), n)
    r, wr = r.ravel(), wr.ravel()
    Z, P, R = np.meshgrid(cz, phi, r, indexing="ij")
    W = np.einsum("i,j,k->ijk", wz, wphi, wr)
    s = np.sqrt(1.0 - Z * Z)
    e = np.stack([s * np.cos(P), s * np.sin(P), Z], axis=-1)
    out = np.empty(len(x))
    for k0 in range(0, len(x), 64):
        xs = x[k0:k0 + 64]
        y = xs[:, None, None, None, :] + eps * R[None, ..., None] * e[None]
        du = field_.displacement(y) - field_.displacement(xs)[:, None, None, None, :]
        S = np.einsum("...k,...k->...", du, e[None]) / (eps * R[None])
        integrand = J.closure(R)[None] * f.value(eps * R[None] * S * S) * R[None] ** 2
        out[k0:k0 + 64] = np.sum(integrand * W[None], axis=(1, 2, 3))
    return out / (eps * UNIT_BALL_VOLUME[3])


def _pd_energy_at(field_, material, eps, box, n, chunk=512):
    x, w = _outer_rule(field_, box, eps, n)
    density = _density_2d if field_.dimension == 2 else _density_3d
    total = 0.0
    for k0 in range(0, len(x), chunk):
        total += float(np.dot(w[k0:k0 + chunk], density(field_, material, eps, x[k0:k0 + chunk], n)))
    return total


@dataclass(frozen=True)
class DenseEnergy:
    value: float
    resolution: int
    change: float


def pd_energy_dense(field_: AnalyticField, material: MaterialModel, eps: float | None = None,
                    quad_resolution: int = 8, box: Box | None = None,
                    max_resolution: int = 64, tol: float = CONVERGENCE_TOL) -> float:
    """Nonlocal energy of ``field_`` on ``box`` (unit box by default).

    Starts at ``quad_resolution`` Gauss points per panel and doubles until two
    successive values agree to relative ``tol``.
    """
    return pd_energy_dense_info(field_, material, eps, quad_resolution, box,
                                max_resolution, tol).value


def pd_energy_dense_info(field_, material, eps=None, quad_resolution=8, box=None,
                         max_resolution=64, tol=CONVERGENCE_TOL) -> DenseEnergy:
    eps = material.horizon if eps is None else float(eps)
    box = unit_box(field_.dimension) if box is None else box
    _check_dims(field_, material, box)
    if not 0.0 < eps < 1.0:
        raise ValueError("eps must lie in (0, 1)")
    n = max(2, int(quad_resolution))
    prev = _pd_energy_at(field_, material, eps, box, n)
    while True:
        n *= 2
        if n > max_resolution:
            raise NonConvergedError(
                f"dense quadrature for {field_.kind} at eps={eps} not converged by resolution {n // 2}")
        cur = _pd_energy_at(field_, material, eps, box, n)
        scale = max(abs(cur), abs(prev))
        change = abs(cur - prev) / scale if scale > 0.0 else 0.0
        if change <= tol:
            return DenseEnergy(cur, n, change)
        prev = cur


# ---------------------------------------------------------------------------
# Energy inequalities.
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class InequalityResult:
    pd: float
    lefm: float
    holds: bool

    def __bool__(self) -> bool:
        return self.holds

    @property
    def ratio(self) -> float:
        return self.pd / self.lefm if self.lefm else float("nan")


def check_inequality(field_: AnalyticField, material: MaterialModel, eps: float,
                     box: Box | None = None, **quad) -> InequalityResult:
    """``PD^eps(u) <= LEFM(u)`` up to a relative quadrature slack of 1e-3."""
    pd = pd_energy_dense(field_, material, eps, box=box, **quad)
    lefm = lefm_energy(field_, material, box)
    return InequalityResult(pd, lefm, bool(pd <= lefm * (1.0 + INEQUALITY_SLACK)))


@dataclass(frozen=True)
class MonotonicityResult:
    coarse: float     # PD at horizon M eta
    fine: float       # PD at horizon eta
    holds: bool

    def __bool__(self) -> bool:
        return self.holds


def check_monotonicity(field_: AnalyticField, material: MaterialModel, eta: float, M: int,
                       box: Box | None = None, **quad) -> MonotonicityResult:
    """``PD^{M eta}(u) <= PD^{eta}(u)`` up to a relative slack of 1e-3."""
    if not (isinstance(M, (int, np.integer)) and M >= 1):
        raise ValueError("M must be a positive integer")
    if not 0.0 < M * eta < 1.0:
        raise ValueError("need 0 < M * eta < 1")
    fine = pd_energy_dense(field_, material, eta, box=box, **quad)
    coarse = fine if M == 1 else pd_energy_dense(field_, material, M * eta, box=box, **quad)
    return MonotonicityResult(coarse, fine, bool(coarse <= fine * (1.0 + INEQUALITY_SLACK)))


# ---------------------------------------------------------------------------
# Plane-wave check of the elastic limit of the dynamics.
# ---------------------------------------------------------------------------

def wave_speed(material: MaterialModel, k: np.ndarray, p: np.ndarray,
               convention: str = "energy") -> float:
    """Phase speed of a plane wave with wave vector ``k`` and polarisation ``p``.

    ``energy``: speeds of the elastic energy ``2 mu |E|^2 + lambda (tr E)^2``
    (shear ``sqrt(2 mu / rho)``, longitudinal ``sqrt((4 mu + 2 lambda) / rho)``).
    ``textbook``: ``sqrt(mu / rho)`` and ``sqrt((2 mu + lambda) / rho)``,
    i.e. the speeds for the energy ``mu |E|^2 + (lambda / 2) (tr E)^2``.
    """
    khat = k / np.linalg.norm(k)
    along = float(abs(p @ khat))
    rho, mu, lam = material.density, material.mu, material.lam
    if convention == "energy":
        shear, longitudinal = 2.0 * mu, 4.0 * mu + 2.0 * lam
    elif convention == "textbook":
        shear, longitudinal = mu, 2.0 * mu + lam
    else:
        raise ValueError(f"unknown speed convention {convention!r}")
    if along < 1e-12:
        return math.sqrt(shear / rho)
    if abs(along - 1.0) < 1e-12:
        return math.sqrt(longitudinal / rho)
    raise ValueError("polarisation must be parallel or perpendicular to the wave vector")


@dataclass(frozen=True)
class PlaneWaveResult:
    error: float                  # max relative L2 error over the compared times
    times: tuple[float, ...]
    errors: tuple[float, ...]
    spacing: float
    speed: float

    def __float__(self) -> float:
        return self.error


def plane_wave_check(material: MaterialModel, k: Sequence[float], p: Sequence[float],
                     T: float | None = None, *, m_ratio: int = 4, amplitude: float = 1e-6,
                     safety: float = 0.5, samples: int = 4, speed_convention: str = "energy",
                     threads: int | None = None) -> PlaneWaveResult:
    """Evolve an elastic plane wave on a periodic lattice and compare.

    The box is one period of the wave along each axis with a non-zero wave
    component (and just over two horizons along the others), periodic in all
    directions, so there is no boundary and the whole lattice is the comparison
    window.  ``T`` defaults to one temporal period.  The error is the relative
    L2 error of the displacement at ``samples`` equally spaced times up to T;
    the maximum is returned.
    """
    k = np.asarray(k, dtype=float)
    p = np.asarray(p, dtype=float)
    d = material.dimension
    if k.shape != (d,) or p.shape != (d,):
        raise ValueError("k and p must have the material's dimension")
    if abs(np.linalg.norm(p) - 1.0) > 1e-12:
        raise ValueError("polarisation must be a unit vector")
    eps = material.horizon
    h = eps / m_ratio
    reach = eps + 0.5 * h
    bounds = []
    for ka in k:
        if ka != 0.0:
            period = 2.0 * math.pi / abs(ka)
            n = period / h
            if abs(n - round(n)) > 1e-6 * n:
                raise ValueError("wave period is not a multiple of the lattice spacing")
            bounds.append((0.0, period))
        else:
            bounds.append((0.0, (math.ceil(2.0 * reach / h) + 1) * h))
    grid = build_grid(DomainSpec(tuple(bounds), h, eps, 0.0, periodic=(True,) * d))
    c = wave_speed(material, k, p, speed_convention)
    omega = c * float(np.linalg.norm(k))
    T = 2.0 * math.pi / omega if T is None else float(T)

    x = grid.positions

    def exact(t: float) -> np.ndarray:
        return amplitude * np.sin(x @ k - omega * t)[:, None] * p

    v0 = -amplitude * omega * np.cos(x @ k)[:, None] * p
    dt_max = stable_dt(grid, material, safety)
    steps = max(samples, int(math.ceil(T / dt_max)))
    steps = samples * int(math.ceil(steps / samples))
    dt = T / steps
    state = initial_state(grid, material, exact(0.0), v0, threads=threads)
    times, errors = [], []
    for n, state in run(state, grid, material, None, dt, steps, steps // samples, threads):
        if n == 0:
            continue
        ref = exact(n * dt)
        norm = float(np.linalg.norm(ref))
        err = float(np.linalg.norm(state.u - ref)) / norm if norm > 0.0 else 0.0
        times.append(n * dt)
        errors.append(err)
    return PlaneWaveResult(max(errors), tuple(times), tuple(errors), h, c)
