"""Node lattice, constraint collar and horizon neighbour lists.

Nodes sit at the centres of a uniform lattice of cubic cells of side ``h``:
along an axis ``[lo, hi]`` there are ``n = round((hi - lo) / h)`` nodes at
``lo + (i + 1/2) h``.  A node is *constrained* when its distance to a
non-periodic face of the box is smaller than ``collar_thickness``; the rest are
*interior*.  Every node (interior or constrained) gets a neighbour list of all
nodes with ``0 < |x_j - x_i| < eps + h/2``, weighted by ``h^d`` times the
linear partial-volume ramp across the horizon sphere.  Bonds are stored as flat
arrays sorted by ``(i, j)`` with CSR row offsets.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numpy.typing import ArrayLike
from scipy.spatial import cKDTree

MIN_M_RATIO = 2.0


class InvalidSpecError(ValueError):
    """A :class:`DomainSpec` violates one of its invariants."""


def partial_volume(q: ArrayLike, h: float, eps: float) -> np.ndarray:
    """Fraction of a cell at centre distance ``q`` counted inside the horizon.

    1 for ``q <= eps - h/2``, 0 for ``q >= eps + h/2``, linear in between.
    """
    q = np.asarray(q, dtype=float)
    ramp = np.clip((eps + 0.5 * h - q) / h, 0.0, 1.0)
    return np.where(q <= eps - 0.5 * h, 1.0, np.where(q >= eps + 0.5 * h, 0.0, ramp))


@dataclass(frozen=True)
class DomainSpec:
    """Axis-aligned box, lattice spacing, horizon and collar.

    ``notch`` holds line segments ``((x0, y0), (x1, y1))`` in 2-D or convex
    planar polygons ``((x, y, z), ...)`` in 3-D; bonds crossing them are
    removed.  ``periodic`` marks axes that wrap around (no collar there).
    """

    bounds: tuple[tuple[float, float], ...]
    spacing: float
    horizon: float
    collar_thickness: float
    notch: tuple = ()
    periodic: tuple[bool, ...] | None = None

    def __post_init__(self) -> None:
        bounds = tuple((float(lo), float(hi)) for lo, hi in self.bounds)
        object.__setattr__(self, "bounds", bounds)
        periodic = self.periodic
        if periodic is None:
            periodic = (False,) * len(bounds)
        object.__setattr__(self, "periodic", tuple(bool(p) for p in periodic))
        object.__setattr__(self, "notch", tuple(
            tuple(tuple(float(c) for c in vertex) for vertex in piece) for piece in self.notch))
        problems = self.violations()
        if problems:
            raise InvalidSpecError("; ".join(problems))

    @property
    def dimension(self) -> int:
        return len(self.bounds)

    @property
    def m_ratio(self) -> float:
        return self.horizon / self.spacing

    def violations(self) -> list[str]:
        """Every broken invariant, as human-readable messages."""
        out = []
        d = len(self.bounds)
        if d not in (2, 3):
            out.append(f"bounds: dimension must be 2 or 3, got {d}")
        if len(self.periodic) != d:
            out.append("periodic: needs one flag per axis")
        for axis, (lo, hi) in enumerate(self.bounds):
            if not hi > lo:
                out.append(f"bounds: axis {axis} has hi <= lo")
        if not self.spacing > 0.0:
            out.append("spacing: must be positive")
        if not self.horizon > 0.0:
            out.append("horizon: must be positive")
        if self.spacing > 0.0 and self.horizon > 0.0:
            if self.horizon < self.spacing:
                out.append("horizon: smaller than the lattice spacing")
            elif self.m_ratio < MIN_M_RATIO * (1.0 - 1e-12):
                out.append(f"spacing: m_ratio = horizon/spacing = {self.m_ratio:.6g} < {MIN_M_RATIO}")
        if not all(self.periodic) and not self.collar_thickness > 2.0 * self.horizon:
            out.append(
                f"collar_thickness: {self.collar_thickness} must exceed 2*horizon = {2.0 * self.horizon}")
        if self.spacing > 0.0:
            for axis, ((lo, hi), wrap) in enumerate(zip(self.bounds, self.periodic)):
                n = (hi - lo) / self.spacing
                if wrap and abs(n - round(n)) > 1e-9 * max(n, 1.0):
                    out.append(f"bounds: periodic axis {axis} length is not a multiple of spacing")
        for k, piece in enumerate(self.notch):
            if d == 2 and (len(piece) != 2 or any(len(v) != 2 for v in piece)):
                out.append(f"notch[{k}]: 2-D notches are segments of two 2-D points")
            if d == 3 and (len(piece) < 3 or any(len(v) != 3 for v in piece)):
                out.append(f"notch[{k}]: 3-D notches are planar polygons of >= 3 points")
        return out


@dataclass(frozen=True, eq=False)
class DomainGrid:
    """Immutable lattice with bond arrays; see the module docstring."""

    spec: DomainSpec
    shape: tuple[int, ...]
    positions: np.ndarray          # (N, d)
    constrained: np.ndarray        # (N,) bool
    offsets: np.ndarray            # (N+1,) CSR row pointers into the bond arrays
    bond_i: np.ndarray             # (B,) owner node
    bond_j: np.ndarray             # (B,) neighbour node
    bond_xi: np.ndarray            # (B, d) x_j - x_i (minimum image on periodic axes)
    bond_q: np.ndarray             # (B,) |x_j - x_i|
    bond_w: np.ndarray             # (B,) h^d * partial volume
    interior: np.ndarray = field(init=False)
    interior_bonds: np.ndarray = field(init=False)

    def __post_init__(self) -> None:
        for name in ("positions", "constrained", "offsets", "bond_i", "bond_j",
                     "bond_xi", "bond_q", "bond_w"):
            getattr(self, name).setflags(write=False)
        interior = np.flatnonzero(~self.constrained)
        interior.setflags(write=False)
        object.__setattr__(self, "interior", interior)
        mask = ~self.constrained[self.bond_i]
        ib = np.flatnonzero(mask)
        ib.setflags(write=False)
        object.__setattr__(self, "interior_bonds", ib)

    @property
    def dimension(self) -> int:
        return self.positions.shape[1]

    @property
    def num_nodes(self) -> int:
        return self.positions.shape[0]

    @property
    def spacing(self) -> float:
        return self.spec.spacing

    @property
    def horizon(self) -> float:
        return self.spec.horizon

    @property
    def cell_volume(self) -> float:
        return self.spec.spacing ** self.dimension

    @property
    def bond_direction(self) -> np.ndarray:
        return self.bond_xi / self.bond_q[:, None]

    def neighbors(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        """Neighbour indices and quadrature weights of node ``i``."""
        sl = slice(self.offsets[i], self.offsets[i + 1])
        return self.bond_j[sl], self.bond_w[sl]

    def weight_sums(self) -> np.ndarray:
        """``sum_j w_ij`` per node."""
        return np.bincount(self.bond_i, weights=self.bond_w, minlength=self.num_nodes)


def build_grid(spec: DomainSpec) -> DomainGrid:
    h, eps, d = spec.spacing, spec.horizon, spec.dimension
    lows = np.array([lo for lo, _ in spec.bounds])
    lengths = np.array([hi - lo for lo, hi in spec.bounds])
    shape = tuple(max(int(round(L / h)), 1) for L in lengths)
    axes = [lo + (np.arange(n) + 0.5) * h for lo, n in zip(lows, shape)]
    mesh = np.meshgrid(*axes, indexing="ij")
    positions = np.stack([m.ravel() for m in mesh], axis=1)

    constrained = np.zeros(len(positions), dtype=bool)
    tol = 1e-9 * h
    for axis, ((lo, hi), wrap) in enumerate(zip(spec.bounds, spec.periodic)):
        if wrap:
            continue
        x = positions[:, axis]
        constrained |= np.minimum(x - lo, hi - x) < spec.collar_thickness - tol

    reach = eps + 0.5 * h
    periods = np.array([n * h for n in shape])
    local = positions - lows
    if any(spec.periodic):
        box = np.where(spec.periodic, periods, 4.0 * (periods + reach))
        tree = cKDTree(np.mod(local, box), boxsize=box)
    else:
        tree = cKDTree(local)
    pairs = tree.query_pairs(reach, output_type="ndarray")
    bi = np.concatenate([pairs[:, 0], pairs[:, 1]])
    bj = np.concatenate([pairs[:, 1], pairs[:, 0]])
    xi = positions[bj] - positions[bi]
    for axis, wrap in enumerate(spec.periodic):
        if wrap:
            xi[:, axis] -= periods[axis] * np.round(xi[:, axis] / periods[axis])
    q = np.sqrt(np.sum(xi * xi, axis=1))
    keep = (q > 0.0) & (q < reach - tol)
    if spec.notch:
        keep &= ~_crosses_notch(positions[bi], xi, spec.notch)
    bi, bj, xi, q = bi[keep], bj[keep], xi[keep], q[keep]

    order = np.lexsort((bj, bi))
    bi, bj, xi, q = bi[order], bj[order], xi[order], q[order]
    w = h**d * partial_volume(q, h, eps)
    offsets = np.zeros(len(positions) + 1, dtype=np.int64)
    np.cumsum(np.bincount(bi, minlength=len(positions)), out=offsets[1:])
    return DomainGrid(spec, shape, positions, constrained, offsets,
                      bi.astype(np.int64), bj.astype(np.int64), xi, q, w)


def _crosses_notch(start: np.ndarray, xi: np.ndarray, notch: Sequence) -> np.ndarray:
    hit = np.zeros(len(start), dtype=bool)
    for piece in notch:
        piece = np.asarray(piece, dtype=float)
        if start.shape[1] == 2:
            hit |= _segments_intersect(start, start + xi, piece[0], piece[1])
        else:
            hit |= _segment_hits_polygon(start, xi, piece)
    return hit


def _cross2(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


def _segments_intersect(p0, p1, a, b) -> np.ndarray:
    """Closed-segment intersection of each ``[p0_k, p1_k]`` with ``[a, b]``.

    Orientation tests within a relative ``1e-12`` of zero count as touching,
    so a bond through a segment end point is cut regardless of rounding.
    """
    scale = np.linalg.norm(b - a) * np.linalg.norm(p1 - p0, axis=-1)
    tol = 1e-12 * scale

    def snap(v):
        return np.where(np.abs(v) <= tol, 0.0, v)

    d1 = snap(_cross2(b - a, p0 - a))
    d2 = snap(_cross2(b - a, p1 - a))
    d3 = snap(_cross2(p1 - p0, a - p0))
    d4 = snap(_cross2(p1 - p0, b - p0))
    proper = (d1 * d2 <= 0.0) & (d3 * d4 <= 0.0)
    collinear = (d1 == 0.0) & (d2 == 0.0)
    if np.any(collinear):
        # Collinear pairs intersect only if their projections overlap.
        t = b - a
        s0 = (p0 - a) @ t
        s1 = (p1 - a) @ t
        lo, hi = np.minimum(s0, s1), np.maximum(s0, s1)
        overlap = (hi >= 0.0) & (lo <= t @ t)
        proper = np.where(collinear, overlap, proper)
    return proper


def _segment_hits_polygon(start, xi, poly) -> np.ndarray:
    normal = np.cross(poly[1] - poly[0], poly[2] - poly[0])
    denom = xi @ normal
    with np.errstate(divide="ignore", invalid="ignore"):
        t = ((poly[0] - start) @ normal) / denom
    ok = (denom != 0.0) & (t >= 0.0) & (t <= 1.0)
    point = start + np.where(ok, t, 0.0)[:, None] * xi
    sides = []
    for k in range(len(poly)):
        edge = poly[(k + 1) % len(poly)] - poly[k]
        sides.append(np.cross(edge, point - poly[k]) @ normal)
    sides = np.array(sides)
    # Points on an edge (to rounding) count as inside: the polygon is closed.
    tol = 1e-12 * float(normal @ normal)
    inside = np.all(sides >= -tol, axis=0) | np.all(sides <= tol, axis=0)
    return ok & inside
