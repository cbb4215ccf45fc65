"""Three-step Fourier reconstruction from parallel-beam projections.

Step 1 takes the 1D DFT of every projection row, giving samples of the 2D
Fourier transform on a polar grid. Step 2 resamples those polar samples onto
the Cartesian frequency lattice with local Lagrangian splines. Step 3 is a 2D
inverse DFT.

Frequency bookkeeping
---------------------
Step 1 returns ``g_hat[j, r] = (2 pi)^{-1/2} h sum_l exp(-i pi l r / q) g_l``
for ``l = -q..q-1``, an approximation to ``g^(theta_j, pi r)``; by the
projection-slice relation ``phi^(pi r theta_j) = (2 pi)^{-1/2} g_hat[j, r]``.

Step 3 computes ``phi_N = (1/2 pi) sum_{|k|_inf < q} exp(i pi N k / q) c_k``.
It reproduces ``phi(hN)`` exactly when ``c_k = pi^2 phi^(pi k)``, i.e. when the
Cartesian values are the transform of ``psi(y) = phi(y / pi)`` at the integer
points ``k``. Step 2 therefore works in the scaled frequency ``eta = xi / pi``:
the polar knots are ``r theta_j`` (integer radii), the targets are the integer
lattice and the data are ``pi^2 (2 pi)^{-1/2} g_hat``. The spline shift ``eps``
is measured in ``eta`` units.

Step 1 may also be evaluated at fractional radii ``r / P`` (``oversample = P``);
this is the same trigonometric sum taken at intermediate frequencies, computed
by zero-padding the FFT to length ``2 q P``.
"""
from __future__ import annotations

import json
import math
import time
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from numba import njit
from scipy.spatial import cKDTree

from .knots import KnotSet, PolarGridSpec, measure_separation, polar_grid
from .radon import Sinogram
from .special_functions import SplineParams, fundamental_solution_radial
from .spline_interp import interpolate

__all__ = [
    "GriddingConfig",
    "PolarSpectrum",
    "CartesianSpectrum",
    "RunReport",
    "step1_projection_dft",
    "step1_naive",
    "step2_gridding",
    "nearest_gridding",
    "step3_inverse_dft",
    "step3_naive",
    "image_dft",
    "band_window",
    "reconstruct",
    "resample_projection_irregular",
]

FALLBACK_FLAG_FRACTION = 0.02


@dataclass(frozen=True)
class GriddingConfig:
    """Step 2 settings.

    Attributes
    ----------
    m, eps
        Spline order and shift (``eps`` in scaled-frequency units).
    neighbor_count
        Polar knots per target window; fixed for the whole run.
    oversample
        Radial refinement ``P`` of the Step 1 evaluation.
    min_separation
        Window knots are thinned so that no two are closer than this multiple
        of the radial knot spacing ``1 / P``. Near the origin the angular
        spacing collapses, and unthinned windows are nearly singular.
    taper
        Fraction of the band ``|k| <= q`` over which the Cartesian spectrum is
        rolled off by a raised cosine; ``0`` keeps a hard circular cutoff.
    max_condition
        Windows whose Gram condition number exceeds this fall back to
        inverse-distance weights.
    """

    m: int = 4
    eps: float = 1.0
    neighbor_count: int = 25
    oversample: int = 4
    min_separation: float = 0.8
    taper: float = 0.1
    max_condition: float = 1e12
    chunk: int = 2000

    def __post_init__(self):
        if self.neighbor_count < 3:
            raise ValueError("neighbor_count must be >= 3")
        if self.oversample < 1:
            raise ValueError("oversample must be >= 1")
        if not 0 <= self.taper < 1:
            raise ValueError("taper must lie in [0, 1)")
        if self.min_separation < 0:
            raise ValueError("min_separation must be >= 0")
        SplineParams(k=self.m, eps=self.eps, dim=2)

    @property
    def params(self) -> SplineParams:
        return SplineParams(k=self.m, eps=self.eps, dim=2)


@dataclass(frozen=True)
class PolarSpectrum:
    """Step 1 output ``values[j, i]`` at ``tau = pi * (i - q P) / P`` along ``theta_j``."""

    p: int
    q: int
    values: np.ndarray
    oversample: int = 1

    def __post_init__(self):
        shape = (self.p, 2 * self.q * self.oversample)
        if np.shape(self.values) != shape:
            raise ValueError(f"polar values shape {np.shape(self.values)} != {shape}")

    @property
    def geometry(self) -> PolarGridSpec:
        return PolarGridSpec(self.p, self.q, 1.0 / math.pi, self.oversample)

    @property
    def radii(self) -> np.ndarray:
        """Radial index ``r`` (possibly fractional) of each column."""
        return self.geometry.radii_index / self.oversample

    def at_integer_radii(self) -> np.ndarray:
        """The ``p x 2q`` block at ``r = -q..q-1``."""
        return self.values[:, :: self.oversample]

    def to_csv(self, path) -> None:
        _spectrum_csv(path, [(j, r) for j in range(self.p) for r in self.radii], self.values.ravel(), ("j", "r"))


@dataclass(frozen=True)
class CartesianSpectrum:
    """``values[k1 + q - 1, k2 + q - 1] = c_k`` for ``|k|_inf < q``."""

    q: int
    values: np.ndarray

    def __post_init__(self):
        n = 2 * self.q - 1
        if np.shape(self.values) != (n, n):
            raise ValueError(f"cartesian values shape {np.shape(self.values)} != {(n, n)}")

    def to_csv(self, path) -> None:
        k = np.arange(-(self.q - 1), self.q)
        idx = [(a, b) for a in k for b in k]
        _spectrum_csv(path, idx, self.values.ravel(), ("k1", "k2"))


def _spectrum_csv(path, index, values, names) -> None:
    lines = [",".join(names) + ",re,im"]
    for ix, v in zip(index, values):
        lines.append(",".join(repr(float(c)) if isinstance(c, float) else str(int(c)) for c in ix)
                     + f",{float(v.real)!r},{float(v.imag)!r}")
    Path(path).write_text("\n".join(lines) + "\n")


@dataclass
class RunReport:
    method: str
    p: int
    q: int
    config: dict
    timings: dict = field(default_factory=dict)
    counters: dict = field(default_factory=dict)
    fallback_fraction: float = 0.0
    flagged: bool = False
    density_gate: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self, path=None, include_timings: bool = True) -> str:
        d = self.to_dict()
        if not include_timings:
            d.pop("timings")
        text = json.dumps(d, indent=2, sort_keys=True) + "\n"
        if path is not None:
            Path(path).write_text(text)
        return text


# ---------------------------------------------------------------- Step 1


def step1_projection_dft(sino: Sinogram, oversample: int = 1) -> PolarSpectrum:
    """Row DFTs ``(2 pi)^{-1/2} h sum_{l=-q}^{q-1} exp(-i tau s_l q) g_l`` at ``tau = pi r / P``.

    The sample at ``l = q`` (offset ``s = 1``) is not part of the sum. Rows
    are real, so a zero-padded real FFT gives ``r >= 0``; shifting the sum
    index from ``l = -q`` to ``0`` is the phase ``exp(i pi r / P)`` and
    ``r < 0`` follows by conjugation.
    """
    p, q, P = sino.p, sino.q, oversample
    n, m = 2 * q * P, q * P
    pos = np.fft.rfft(sino.data[:, : 2 * q], n=n, axis=1)
    pos *= (2.0 * math.pi) ** -0.5 * sino.h * np.exp(1j * math.pi * np.arange(m + 1) / P)
    vals = np.empty((p, n), dtype=complex)
    vals[:, m:] = pos[:, :m]
    vals[:, :m] = np.conj(pos[:, m:0:-1])
    return PolarSpectrum(p, q, vals, P)


def step1_naive(sino: Sinogram, oversample: int = 1) -> np.ndarray:
    """Direct O(p q^2) evaluation of the Step 1 sum (reference implementation)."""
    q, P = sino.q, oversample
    l = np.arange(-q, q)
    r = np.arange(-q * P, q * P) / P
    phase = np.exp(-1j * math.pi * np.outer(r, l) / q)
    return (2.0 * math.pi) ** -0.5 * sino.h * sino.data[:, : 2 * q] @ phase.T


# ---------------------------------------------------------------- Step 2


def _cartesian_targets(q: int) -> tuple[np.ndarray, np.ndarray]:
    k = np.arange(-(q - 1), q)
    kk = np.stack(np.meshgrid(k, k, indexing="ij"), axis=-1).reshape(-1, 2).astype(float)
    inside = np.hypot(kk[:, 0], kk[:, 1]) <= q
    return kk, inside


def band_window(q: int, taper: float) -> np.ndarray:
    """Radial weights on the ``(2q-1)^2`` lattice: 1 inside, raised cosine over the top ``taper`` of ``|k| <= q``."""
    k = np.arange(-(q - 1), q)
    rad = np.hypot(*np.meshgrid(k, k, indexing="ij")) / q
    w = (rad <= 1).astype(float)
    if taper > 0:
        start = 1 - taper
        roll = (rad > start) & (rad <= 1)
        w[roll] = 0.5 * (1 + np.cos(math.pi * (rad[roll] - start) / taper))
    return w


@njit(cache=True)
def _thin(points, cand, count, dmin):
    n = cand.shape[0]
    out = np.empty((n, count), np.int64)
    got = np.zeros(n, np.int64)
    d2 = dmin * dmin
    for t in range(n):
        c = 0
        for a in range(cand.shape[1]):
            i = cand[t, a]
            if i >= points.shape[0]:
                break
            ok = True
            for b in range(c):
                j = out[t, b]
                dx = points[i, 0] - points[j, 0]
                dy = points[i, 1] - points[j, 1]
                if dx * dx + dy * dy < d2:
                    ok = False
                    break
            if ok:
                out[t, c] = i
                c += 1
                if c == count:
                    break
        got[t] = c
        for b in range(c, count):
            out[t, b] = out[t, 0]
    return out, got


def _order_candidates(points, targets, dist, cand):
    """Sort candidates by distance, breaking ties by the angle of the offset
    measured from the target direction.

    The tie-break is invariant under ``x -> -x``, so the windows of ``k`` and
    ``-k`` are mirror images on a centrally symmetric knot set.
    """
    u = points[cand] - targets[:, None, :]
    ref = np.arctan2(targets[:, 1], targets[:, 0])[:, None]
    c, s = np.cos(ref), np.sin(ref)
    ang = np.round(np.arctan2(u[..., 1] * c - u[..., 0] * s, u[..., 0] * c + u[..., 1] * s), 9)
    dq = np.round(dist, 9)
    order = np.lexsort((ang, dq), axis=-1)
    return np.take_along_axis(cand, order, axis=1)


def _select_windows(tree: cKDTree, points, targets, count, dmin):
    """Nearest knots to each target, greedily thinned to separation ``dmin``.

    Candidates are taken in order of distance (ties broken symmetrically), so
    the nearest knot is always the first window member.
    """
    n = len(points)
    ncand = min(n, 8 * count)
    dist, cand = tree.query(targets, ncand)
    cand = _order_candidates(points, targets, dist, cand)
    if dmin <= 0:
        return cand[:, :count], dist[:, 0]
    idx, got = _thin(points, cand, count, dmin)
    short = np.flatnonzero(got < count)
    if short.size:
        wide = min(n, 320 * count)
        d2, cand2 = tree.query(targets[short], wide)
        cand2 = _order_candidates(points, targets[short], d2, cand2)
        idx2, got2 = _thin(points, cand2, count, dmin)
        if got2.min() < count:
            raise ValueError("not enough separated polar knots for a Step 2 window; lower min_separation")
        idx[short] = idx2
    return idx, dist[:, 0]


def _polar_knots(polar: PolarSpectrum) -> tuple[KnotSet, np.ndarray]:
    """Polar knots with their data, plus the ring ``r = qP``.

    The Step 1 sum is ``2qP``-periodic in ``r``, so the ring at ``r = qP``
    carries the same values as ``r = -qP``; adding it makes the knot set
    centrally symmetric.
    """
    knots, flat = polar_grid(polar.geometry)
    vals = polar.values.reshape(-1)[flat]
    edge = -polar.geometry.points()[:, 0, :]
    pts = np.concatenate([knots.points, edge])
    vals = np.concatenate([vals, polar.values[:, 0]])
    knots = KnotSet(pts, 2, knots.fill_distance, measure_separation(pts), knots.domain_box)
    return knots, (math.pi**2) * (2.0 * math.pi) ** -0.5 * vals


def step2_gridding(polar: PolarSpectrum, cfg: GriddingConfig = GriddingConfig(),
                   counters: dict | None = None) -> CartesianSpectrum:
    """Resample polar spectrum samples onto the Cartesian lattice.

    Each target ``k`` with ``|k| <= q`` gets a window of ``neighbor_count``
    polar knots, the local Lagrangian weights ``w = M^{-1} e(k)`` with
    ``e(k)_mu = E(k - x_mu)``, and the value ``sum_mu w_mu c_mu``. Targets
    outside the polar disk are set to zero and the band window is applied.
    """
    counters = {} if counters is None else counters
    q = polar.q
    knots, data = _polar_knots(polar)
    pts = knots.points
    targets, inside = _cartesian_targets(q)
    tgt = targets[inside]
    tree = cKDTree(pts)
    nb = cfg.neighbor_count
    idx, d0 = _select_windows(tree, pts, tgt, nb, cfg.min_separation / polar.oversample)
    params = cfg.params
    out = np.zeros(len(tgt), dtype=complex)
    fallback = np.zeros(len(tgt), dtype=bool)
    max_cond = 0.0
    for s in range(0, len(tgt), cfg.chunk):
        sl = slice(s, s + cfg.chunk)
        win = pts[idx[sl]]
        diff = win[:, :, None, :] - win[:, None, :, :]
        gram = fundamental_solution_radial(params, np.sqrt(np.sum(diff * diff, axis=-1)))
        rt = np.sqrt(np.sum((win - tgt[sl, None, :]) ** 2, axis=-1))
        e = fundamental_solution_radial(params, rt)
        ev = np.linalg.eigvalsh(gram)
        cond = ev[:, -1] / np.where(ev[:, 0] > 0, ev[:, 0], np.nan)
        bad = ~(cond <= cfg.max_condition)
        w = np.empty_like(e)
        good = ~bad
        if good.any():
            w[good] = np.linalg.solve(gram[good], e[good][..., None])[..., 0]
            max_cond = max(max_cond, float(np.max(cond[good])))
        if bad.any():
            inv = 1.0 / np.maximum(rt[bad], 1e-300)
            w[bad] = inv / inv.sum(axis=1, keepdims=True)
        fallback[sl] = bad
        out[sl] = np.einsum("nk,nk->n", w, data[idx[sl]])
    hit = d0 < 1e-12
    out[hit] = data[idx[hit, 0]]
    n_t = len(tgt)
    counters["targets"] = counters.get("targets", 0) + n_t
    counters["kernel_evaluations"] = counters.get("kernel_evaluations", 0) + n_t * (nb * nb + nb)
    counters["local_solves"] = counters.get("local_solves", 0) + int(n_t - fallback.sum())
    counters["fallbacks"] = counters.get("fallbacks", 0) + int(fallback.sum())
    counters["max_condition"] = max(counters.get("max_condition", 0.0), max_cond)
    counters["polar_knots"] = len(pts)
    counters["fill_distance"] = float(2.0 * np.max(d0)) if n_t else 0.0
    full = np.zeros(len(targets), dtype=complex)
    full[inside] = out
    vals = full.reshape(2 * q - 1, 2 * q - 1) * band_window(q, cfg.taper)
    return CartesianSpectrum(q, vals)


def nearest_gridding(polar: PolarSpectrum, taper: float = 0.0,
                     counters: dict | None = None) -> CartesianSpectrum:
    """Baseline: each target inside the polar disk takes its nearest knot's value."""
    q = polar.q
    knots, data = _polar_knots(polar)
    targets, inside = _cartesian_targets(q)
    d, i = cKDTree(knots.points).query(targets[inside])
    full = np.zeros(len(targets), dtype=complex)
    full[inside] = data[i]
    if counters is not None:
        counters["targets"] = counters.get("targets", 0) + int(inside.sum())
        counters["polar_knots"] = len(knots)
        counters["fill_distance"] = float(2.0 * d.max())
    return CartesianSpectrum(q, full.reshape(2 * q - 1, 2 * q - 1) * band_window(q, taper))


# ---------------------------------------------------------------- Step 3


def _embed(values: np.ndarray, q: int) -> np.ndarray:
    buf = np.zeros((2 * q, 2 * q), dtype=complex)
    k = np.arange(-(q - 1), q) % (2 * q)
    buf[np.ix_(k, k)] = values
    return buf


def step3_inverse_dft(cart: CartesianSpectrum) -> np.ndarray:
    """``phi_N = (1/2 pi) sum_{|k|_inf < q} exp(i pi N k / q) c_k`` for ``|N|_inf < q`` (complex)."""
    q = cart.q
    img = np.fft.ifft2(_embed(cart.values, q)) * (2 * q) ** 2 / (2.0 * math.pi)
    n = np.arange(-(q - 1), q) % (2 * q)
    return img[np.ix_(n, n)]


def step3_naive(cart: CartesianSpectrum) -> np.ndarray:
    q = cart.q
    k = np.arange(-(q - 1), q)
    ph = np.exp(1j * math.pi * np.outer(k, k) / q)  # [N, k]
    return ph @ cart.values @ ph.T / (2.0 * math.pi)


def image_dft(img, q: int) -> CartesianSpectrum:
    """Cartesian coefficients ``c_k`` whose Step 3 output is ``img``.

    ``c_k = (2 pi / (2q)^2) sum_N exp(-i pi N k / q) img_N``, which is
    ``pi^2`` times the Riemann-sum approximation of ``phi^(pi k)``.
    """
    buf = _embed(np.asarray(img, dtype=complex), q)
    spec = np.fft.fft2(buf) * (2.0 * math.pi) / (2 * q) ** 2
    k = np.arange(-(q - 1), q) % (2 * q)
    return CartesianSpectrum(q, spec[np.ix_(k, k)])


# ---------------------------------------------------------------- pipeline


def reconstruct(sino: Sinogram, cfg: GriddingConfig = GriddingConfig(),
                method: str = "spline") -> tuple[np.ndarray, RunReport]:
    """Step 3 after Step 2 after Step 1; returns the real image and a run report.

    ``method`` is ``"spline"`` or ``"nearest"`` (the same Steps 1 and 3 with
    nearest-knot gridding).
    """
    if method not in ("spline", "nearest"):
        raise ValueError(f"unknown gridding method {method!r}")
    report = RunReport(method, sino.p, sino.q, asdict(cfg))
    counters: dict = {}
    t0 = time.perf_counter()
    polar = step1_projection_dft(sino, cfg.oversample)
    t1 = time.perf_counter()
    if method == "spline":
        cart = step2_gridding(polar, cfg, counters)
    else:
        cart = nearest_gridding(polar, cfg.taper, counters)
    t2 = time.perf_counter()
    img = step3_inverse_dft(cart)
    t3 = time.perf_counter()
    report.timings = {"step1": t1 - t0, "step2": t2 - t1, "step3": t3 - t2}
    report.counters = counters
    n = max(counters.get("targets", 0), 1)
    report.fallback_fraction = counters.get("fallbacks", 0) / n
    report.flagged = report.fallback_fraction >= FALLBACK_FLAG_FRACTION
    if report.flagged:
        warnings.warn(f"{report.fallback_fraction:.1%} of Step 2 targets used the fallback weights")
    # band limit of psi(y) = phi(y / pi) is pi times the support radius (1)
    limit = 1.0 / ((math.pi + cfg.eps) * cfg.params.c_bound)
    fill = counters.get("fill_distance", math.inf)
    report.density_gate = {"fill_distance": fill, "limit": limit, "passed": bool(fill < limit)}
    return img.real, report


def resample_projection_irregular(values, knots_1d: KnotSet, m: int, tau,
                                  eps: float = 1.0, window_radius: float | None = None):
    """Fourier transform of a projection sampled at irregular offsets.

    Builds the 1D Lagrangian splines ``U_gamma`` of order ``k = 2**m`` on
    ``knots_1d`` and returns ``sum_gamma g(s_gamma) V_gamma(tau)`` where
    ``V_gamma`` is the unitary Fourier transform of ``U_gamma``. The knots
    should extend past the projection's support, carrying zero samples there,
    so that the interpolant does not extrapolate.
    """
    if knots_1d.dim != 1:
        raise ValueError("knots_1d must be one-dimensional")
    values = np.asarray(values, dtype=float)
    if not np.any(values):
        return np.zeros(np.shape(tau), dtype=complex) if np.ndim(tau) else 0j
    interp = interpolate(knots_1d, values, SplineParams(k=2**m, eps=eps, dim=1), window_radius)
    return interp.spectrum(tau)
