"""Knot sets: lattices, jittered lattices and the polar frequency grid.

A knot set is a finite, ordered list of distinct points together with two
measured scalars standing in for the cell conditions of an admissible sampling
set: the fill distance ``lambda`` (twice the largest distance from a probe
point of the domain box to its nearest knot, i.e. a bound on cell diameter)
and the separation ``delta`` (smallest pairwise distance).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

from .special_functions import SplineParams

__all__ = [
    "KnotSet",
    "PolarGridSpec",
    "lattice_knots",
    "jittered_knots",
    "density_gate",
    "polar_grid",
    "nearest_neighbors",
    "measure_fill_distance",
    "measure_separation",
]

_MAX_PROBE_1D = 1 << 16
_MAX_PROBE_2D = 1 << 9


def _as_box(box, dim):
    box = np.asarray(box, dtype=float).reshape(dim, 2)
    if np.any(box[:, 1] <= box[:, 0]):
        raise ValueError(f"empty domain box {box.tolist()}")
    return box


def measure_separation(points: np.ndarray) -> float:
    if len(points) < 2:
        return math.inf
    d, _ = cKDTree(points).query(points, k=2)
    return float(d[:, 1].min())


def measure_fill_distance(points: np.ndarray, box: np.ndarray, step: float | None = None) -> float:
    """Twice the max distance from a probe grid over ``box`` to the nearest knot.

    The probe grid is anchored at the lower box corner with spacing ``step``
    (default: a quarter of the separation), so lattice cell centres are hit
    exactly when the box is lattice aligned.
    """
    dim = points.shape[1]
    if step is None:
        sep = measure_separation(points)
        step = sep / 4 if math.isfinite(sep) else float(np.max(box[:, 1] - box[:, 0]))
    cap = _MAX_PROBE_1D if dim == 1 else _MAX_PROBE_2D
    axes = []
    for lo, hi in box:
        n = int(math.floor((hi - lo) / step + 1e-9)) + 1
        n = min(max(n, 2), cap)
        ax = lo + np.arange(n) * ((hi - lo) / (n - 1) if n - 1 > (hi - lo) / step + 1e-9 else step)
        if ax[-1] < hi - 1e-12:
            ax = np.append(ax, hi)
        axes.append(ax)
    probe = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, dim)
    d, _ = cKDTree(points).query(probe)
    return float(2.0 * d.max())


@dataclass(frozen=True)
class KnotSet:
    """Immutable ordered knot set; ``points`` has shape ``(n, dim)``."""

    points: np.ndarray
    dim: int
    fill_distance: float
    separation: float
    domain_box: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float).reshape(-1, self.dim)
        pts.setflags(write=False)
        box = _as_box(self.domain_box, self.dim)
        box.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "domain_box", box)

    def __len__(self) -> int:
        return len(self.points)

    @classmethod
    def from_points(cls, points, domain_box=None, dim=None) -> "KnotSet":
        points = np.asarray(points, dtype=float)
        if dim is None:
            dim = 1 if points.ndim == 1 else points.shape[1]
        points = points.reshape(-1, dim)
        if domain_box is None:
            domain_box = np.stack([points.min(axis=0), points.max(axis=0)], axis=1)
        box = _as_box(domain_box, dim)
        sep = measure_separation(points)
        if not sep > 0:
            raise ValueError("knots must be pairwise distinct")
        return cls(points, dim, measure_fill_distance(points, box), sep, box)

    def validate(self, tol: float = 1e-12) -> None:
        """Recompute separation and fill distance; raise if they disagree."""
        sep = measure_separation(self.points)
        if not sep > 0:
            raise ValueError("knots must be pairwise distinct")
        fill = measure_fill_distance(self.points, self.domain_box)
        if abs(sep - self.separation) > tol * max(1.0, sep):
            raise ValueError(f"stored separation {self.separation} != measured {sep}")
        if abs(fill - self.fill_distance) > tol * max(1.0, fill):
            raise ValueError(f"stored fill distance {self.fill_distance} != measured {fill}")

    def to_csv(self, path) -> None:
        lines = [f"dim={self.dim}"]
        lines += [",".join(repr(float(c)) for c in p) for p in self.points]
        Path(path).write_text("\n".join(lines) + "\n")

    @classmethod
    def from_csv(cls, path, domain_box=None) -> "KnotSet":
        rows = Path(path).read_text().splitlines()
        if not rows or not rows[0].startswith("dim="):
            raise ValueError(f"{path}: line 1: expected header 'dim=<d>'")
        dim = int(rows[0][4:])
        pts = []
        for lineno, row in enumerate(rows[1:], start=2):
            if not row.strip():
                continue
            vals = row.split(",")
            if len(vals) != dim:
                raise ValueError(f"{path}: line {lineno}: expected {dim} coordinates")
            pts.append([float(v) for v in vals])
        return cls.from_points(np.array(pts), domain_box, dim)


def lattice_knots(domain_box, spacing: float, dim: int | None = None) -> KnotSet:
    """All points of ``spacing * Z^dim`` inside the box.

    The stored domain box is the bounding box of the knots, so the fill
    distance is exactly ``spacing * sqrt(dim)``.
    """
    if not spacing > 0:
        raise ValueError(f"spacing must be positive, got {spacing}")
    box = np.asarray(domain_box, dtype=float)
    dim = dim or (1 if box.size == 2 else 2)
    box = _as_box(box, dim)
    axes = []
    for lo, hi in box:
        ax = np.arange(math.ceil(lo / spacing - 1e-9), math.floor(hi / spacing + 1e-9) + 1) * spacing
        if len(ax) < 2:
            raise ValueError(f"box {box.tolist()} holds fewer than 2 knots per axis at spacing {spacing}")
        axes.append(ax)
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, dim)
    hull = np.array([[ax[0], ax[-1]] for ax in axes])
    return KnotSet(pts, dim, spacing * math.sqrt(dim), spacing, hull)


def jittered_knots(domain_box, spacing: float, jitter: float, seed: int, dim: int | None = None) -> KnotSet:
    """Lattice knots displaced by i.i.d. uniform offsets in ``[-jitter, jitter] * spacing``."""
    if not 0 <= jitter < 0.5:
        raise ValueError(f"jitter must lie in [0, 0.5), got {jitter}")
    base = lattice_knots(domain_box, spacing, dim)
    if jitter == 0:
        return base
    rng = np.random.default_rng(seed)
    pts = base.points + rng.uniform(-jitter * spacing, jitter * spacing, size=base.points.shape)
    box = base.domain_box
    sep = measure_separation(pts)
    return KnotSet(pts, base.dim, measure_fill_distance(pts, box), sep, box)


def density_gate(knots: KnotSet, sigma: float, params: SplineParams) -> bool:
    """``fill_distance < 1 / ((sigma + eps) * c_bound)``."""
    return knots.fill_distance < 1.0 / ((sigma + params.eps) * params.c_bound)


@dataclass(frozen=True)
class PolarGridSpec:
    """Polar grid ``{pi r theta_j}``; ``r = -q..q-1`` and ``theta_j`` at ``(j-1) pi / p``.

    ``scale`` multiplies every point (use ``1/pi`` for the scaled frequency
    variable in which the Cartesian targets are the integer lattice) and
    ``oversample`` refines the radial index to ``r / oversample``.
    """

    p: int
    q: int
    scale: float = 1.0
    oversample: int = 1

    def __post_init__(self):
        if self.p < 2 or self.q < 1:
            raise ValueError(f"need p >= 2 and q >= 1, got p={self.p}, q={self.q}")
        if self.oversample < 1:
            raise ValueError("oversample must be >= 1")

    @property
    def radii_index(self) -> np.ndarray:
        return np.arange(-self.q * self.oversample, self.q * self.oversample)

    def points(self) -> np.ndarray:
        """All ``p * 2q * oversample`` grid points in ``(j, r)`` order, shape ``(p, n_r, 2)``."""
        alpha = np.arange(self.p) * math.pi / self.p
        theta = np.stack([np.cos(alpha), np.sin(alpha)], axis=-1)
        tau = math.pi * self.scale * self.radii_index / self.oversample
        return tau[None, :, None] * theta[:, None, :]


def polar_grid(spec: PolarGridSpec) -> tuple[KnotSet, np.ndarray]:
    """Knot set of the polar grid with the ``p`` copies of the origin merged.

    Returns the knot set and ``flat_index``: for each knot, its position in the
    flattened ``(j, r)`` array (``index = (j-1) * n_r + (r + q * oversample)``).
    The origin is kept once, at its first occurrence.
    """
    pts = spec.points().reshape(-1, 2)
    n_r = len(spec.radii_index)
    rr = np.tile(spec.radii_index, spec.p)
    keep = rr != 0
    keep[int(np.argmax(rr == 0))] = True
    flat_index = np.flatnonzero(keep)
    pts = pts[keep]
    extent = math.pi * abs(spec.scale) * spec.q
    box = np.array([[-extent, extent], [-extent, extent]])
    # probe spacing tied to the coarsest ring spacing keeps the probe grid small
    radial = math.pi * abs(spec.scale) / spec.oversample
    sep = measure_separation(pts)
    fill = measure_fill_distance(pts, box, step=radial / 2)
    assert n_r * spec.p - (spec.p - 1) == len(pts)
    return KnotSet(pts, 2, fill, sep, box), flat_index


def nearest_neighbors(knots: KnotSet, x, count: int) -> np.ndarray:
    """Indices of the ``count`` knots nearest to ``x``; ties go to the lower index."""
    n = len(knots)
    if n == 0:
        raise ValueError("empty knot set")
    if not 1 <= count <= n:
        raise ValueError(f"count must be in [1, {n}], got {count}")
    x = np.asarray(x, dtype=float).reshape(knots.dim)
    d = np.sqrt(np.sum((knots.points - x) ** 2, axis=1))
    order = np.lexsort((np.arange(n), d))
    return order[:count]
