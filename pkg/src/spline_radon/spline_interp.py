"""Lagrangian splines built from translates of the fundamental solution.

For a knot ``x_nu`` and a window ``W`` of nearby knots, the Lagrangian spline

    L_nu(x) = sum_{mu in W} a_mu E^k_eps(x - x_mu)

is fixed by the cardinal conditions ``L_nu(x_gamma) = delta_{gamma nu}`` for
``gamma in W``, i.e. by the Gram system ``M a = e_nu``. Its unitary Fourier
transform is ``(2 pi)^{-d/2} (|y|^2 + eps)^{-k} sum_mu a_mu exp(-i x_mu . y)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve
from scipy.linalg.lapack import dpocon
from scipy.spatial import cKDTree

from .knots import KnotSet
from .special_functions import (
    SplineParams,
    fundamental_solution_at_zero,
    fundamental_solution_radial,
)

__all__ = [
    "MAX_ORDER",
    "IllConditionedError",
    "LagrangianSpline",
    "Interpolant",
    "default_window_radius",
    "build_gram",
    "solve_gram",
    "solve_lagrangian",
    "evaluate_spline",
    "spline_spectrum",
    "interpolate",
    "kernel_energy",
    "spectral_energy",
]

MAX_ORDER = 16
COND_LIMIT = 1e12
REG_SCALE = 1e-12
# a residual this large means the shifted system no longer represents M
RESIDUAL_LIMIT = 1e-4


class IllConditionedError(ArithmeticError):
    """Gram system could not be solved; carries the condition estimate."""

    def __init__(self, msg: str, condition: float = math.inf, knot_index: int | None = None):
        super().__init__(msg)
        self.condition = condition
        self.knot_index = knot_index


def default_window_radius(params: SplineParams, spacing: float) -> float:
    """``max(6 / sqrt(eps), 6 * spacing)``: a few decay lengths of ``K``."""
    return max(6.0 / math.sqrt(params.eps), 6.0 * spacing)


def _check_order(params: SplineParams) -> None:
    if params.k > MAX_ORDER:
        raise ValueError(f"k={params.k} exceeds the supported maximum {MAX_ORDER}")


def _pairwise_radii(points: np.ndarray) -> np.ndarray:
    diff = points[:, None, :] - points[None, :, :]
    return np.sqrt(np.sum(diff * diff, axis=-1))


def build_gram(params: SplineParams, points) -> np.ndarray:
    """Gram matrix ``M[i, j] = E(x_i - x_j)`` of the points, shape ``(n, n)``."""
    _check_order(params)
    pts = np.asarray(points, dtype=float).reshape(-1, params.dim)
    r = _pairwise_radii(pts)
    iu = np.triu_indices(len(pts), 1)
    m = np.empty_like(r)
    m[iu] = fundamental_solution_radial(params, r[iu])
    m.T[iu] = m[iu]
    np.fill_diagonal(m, fundamental_solution_at_zero(params))
    return m


@dataclass(frozen=True)
class GramSolve:
    x: np.ndarray
    condition: float
    residual: float
    regularization: float


def solve_gram(m: np.ndarray, rhs: np.ndarray, refine: int = 2) -> GramSolve:
    """Solve the symmetric positive definite system ``m x = rhs``.

    A Cholesky factorization supplies a 1-norm condition estimate. Above
    ``1e12`` the diagonal is shifted by ``1e-12 * trace(m) / n``. Residuals
    are reduced by a few steps of iterative refinement against the original
    matrix and reported as the max-norm of ``m x - rhs``; a residual above
    ``1e-4`` (relative to ``rhs``) raises :class:`IllConditionedError`.
    """
    n = len(m)
    anorm = float(np.abs(m).sum(axis=0).max())
    shift = 0.0
    try:
        fac = cho_factor(m, lower=True, check_finite=False)
        rcond, info = dpocon(fac[0], anorm, uplo="L")
        cond = 1.0 / rcond if rcond > 0 else math.inf
    except LinAlgError:
        cond = math.inf
        fac = None
    if fac is None or cond > COND_LIMIT:
        shift = REG_SCALE * float(np.trace(m)) / n
        try:
            fac = cho_factor(m + shift * np.eye(n), lower=True, check_finite=False)
        except LinAlgError as exc:
            raise IllConditionedError(
                f"Gram matrix not positive definite even after shift {shift:.3g}", cond
            ) from exc
    x = cho_solve(fac, rhs, check_finite=False)
    for _ in range(refine):
        x = x + cho_solve(fac, rhs - m @ x, check_finite=False)
    res = float(np.max(np.abs(m @ x - rhs))) if n else 0.0
    if not np.all(np.isfinite(x)):
        raise IllConditionedError("non-finite Gram solution", cond)
    scale = float(np.max(np.abs(rhs))) if n else 0.0
    if res > RESIDUAL_LIMIT * max(scale, 1e-300):
        raise IllConditionedError(
            f"Gram solve residual {res:.3g} with condition estimate {cond:.3g}", cond)
    return GramSolve(x, cond, res, shift)


@dataclass(frozen=True, eq=False)
class LagrangianSpline:
    """Cardinal spline for knot ``center_index`` supported on a knot window."""

    center_index: int
    window: np.ndarray
    coeffs: np.ndarray
    params: SplineParams
    knots: KnotSet
    condition: float = 1.0
    residual: float = 0.0
    regularization: float = 0.0

    @property
    def centers(self) -> np.ndarray:
        return self.knots.points[self.window]

    def __call__(self, x):
        return evaluate_spline(self, x)

    def spectrum(self, y):
        return spline_spectrum(self, y)

    def to_csv(self, path) -> None:
        p = self.params
        lines = [
            f"center_index={self.center_index},k={p.k},eps={p.eps!r},dim={p.dim}",
            "window_index,coeff",
        ]
        lines += [f"{int(i)},{float(a)!r}" for i, a in zip(self.window, self.coeffs)]
        Path(path).write_text("\n".join(lines) + "\n")

    @classmethod
    def from_csv(cls, path, knots: KnotSet) -> "LagrangianSpline":
        rows = Path(path).read_text().splitlines()
        try:
            meta = dict(item.split("=") for item in rows[0].split(","))
            params = SplineParams(k=int(meta["k"]), eps=float(meta["eps"]), dim=int(meta["dim"]))
            center = int(meta["center_index"])
        except (IndexError, KeyError, ValueError) as exc:
            raise ValueError(f"{path}: line 1: bad spline header") from exc
        if rows[1:2] != ["window_index,coeff"]:
            raise ValueError(f"{path}: line 2: expected 'window_index,coeff'")
        idx, coef = [], []
        for lineno, row in enumerate(rows[2:], start=3):
            if not row.strip():
                continue
            try:
                i, a = row.split(",")
                idx.append(int(i))
                coef.append(float(a))
            except ValueError as exc:
                raise ValueError(f"{path}: line {lineno}: {exc}") from exc
        return cls(center, np.array(idx, dtype=np.int64), np.array(coef), params, knots)


def _points(params: SplineParams, x) -> tuple[np.ndarray, tuple]:
    x = np.asarray(x, dtype=float)
    if params.dim == 1:
        if x.ndim >= 1 and x.shape[-1] == 1 and x.ndim > 1:
            shape = x.shape[:-1]
        else:
            shape = x.shape
        return x.reshape(-1, 1), shape
    if x.shape[-1] != params.dim:
        raise ValueError(f"point dimension {x.shape[-1]} != {params.dim}")
    return x.reshape(-1, params.dim), x.shape[:-1]


def _kernel_sum(params: SplineParams, centers: np.ndarray, coeffs: np.ndarray, x, chunk: int = 4096):
    pts, shape = _points(params, x)
    out = np.empty(len(pts), dtype=np.result_type(coeffs, float))
    for s in range(0, len(pts), chunk):
        blk = pts[s : s + chunk]
        r = np.sqrt(np.sum((blk[:, None, :] - centers[None, :, :]) ** 2, axis=-1))
        out[s : s + chunk] = fundamental_solution_radial(params, r) @ coeffs
    return out.reshape(shape) if shape else out[0]


def evaluate_spline(spline: LagrangianSpline, x):
    """``sum_mu a_mu E(x - x_mu)`` over the spline's window."""
    return _kernel_sum(spline.params, spline.centers, spline.coeffs, x)


def _kernel_spectrum_sum(params: SplineParams, centers: np.ndarray, coeffs: np.ndarray, y):
    pts, shape = _points(params, y)
    d = params.dim
    phase = np.exp(-1j * (pts @ centers.T))
    sq = np.sum(pts * pts, axis=-1)
    out = (2.0 * math.pi) ** (-d / 2) * (sq + params.eps) ** (-params.k) * (phase @ coeffs)
    return out.reshape(shape) if shape else out[0]


def spline_spectrum(spline: LagrangianSpline, y):
    """Unitary Fourier transform of the spline at frequencies ``y``.

    ``(2 pi)^{-d/2} (|y|^2 + eps)^{-k} sum_mu a_mu exp(-i x_mu . y)``
    """
    return _kernel_spectrum_sum(spline.params, spline.centers, spline.coeffs, y)


def _window_indices(knots: KnotSet, tree: cKDTree, nu: int, radius: float) -> np.ndarray:
    win = np.array(sorted(tree.query_ball_point(knots.points[nu], radius)), dtype=np.int64)
    if nu not in win:
        win = np.sort(np.append(win, nu))
    return win


def solve_lagrangian(
    knots: KnotSet,
    nu: int,
    params: SplineParams,
    window_radius: float | None = None,
    _tree: cKDTree | None = None,
) -> LagrangianSpline:
    """Lagrangian spline of knot ``nu`` on all knots within ``window_radius``."""
    if params.dim != knots.dim:
        raise ValueError(f"params.dim={params.dim} but knots have dim={knots.dim}")
    if not 0 <= nu < len(knots):
        raise IndexError(f"knot index {nu} out of range")
    if window_radius is None:
        window_radius = default_window_radius(params, knots.separation)
    if not window_radius > 0:
        raise ValueError("window_radius must be positive")
    tree = _tree if _tree is not None else cKDTree(knots.points)
    win = _window_indices(knots, tree, nu, window_radius)
    m = build_gram(params, knots.points[win])
    rhs = (win == nu).astype(float)
    try:
        sol = solve_gram(m, rhs)
    except IllConditionedError as exc:
        raise IllConditionedError(f"knot {nu}: {exc}", exc.condition, nu) from exc
    return LagrangianSpline(nu, win, sol.x, params, knots, sol.condition, sol.residual, sol.regularization)


@dataclass(frozen=True, eq=False)
class Interpolant:
    """``s(x) = sum_nu f(x_nu) L_nu(x)``.

    Each ``L_nu`` is used only within ``window_radius`` of its knot, which is
    exactly the region where its cardinal conditions were imposed, so the
    interpolant reproduces the samples. When the windows are the whole knot set
    the sum collapses to one kernel expansion ``sum_mu c_mu E(x - x_mu)`` with
    ``c = M^{-1} f``.
    """

    splines: tuple[LagrangianSpline, ...]
    sample_values: np.ndarray
    params: SplineParams
    knots: KnotSet
    kernel_coeffs: np.ndarray = field(repr=False)
    window_radius: float = math.inf

    def __call__(self, x):
        return self.evaluate(x)

    def evaluate(self, x):
        if math.isinf(self.window_radius):
            return _kernel_sum(self.params, self.knots.points, self.kernel_coeffs, x)
        pts, shape = _points(self.params, x)
        out = np.zeros(len(pts), dtype=np.result_type(self.sample_values, float))
        near = cKDTree(pts).query_ball_point(self.knots.points, self.window_radius)
        for s, f, idx in zip(self.splines, self.sample_values, near):
            if idx and f != 0:
                out[idx] += f * _kernel_sum(self.params, s.centers, s.coeffs, pts[idx])
        return out.reshape(shape) if shape else out[0]

    def spectrum(self, y):
        """``sum_nu f_nu Lambda_nu(y)`` with the untruncated spline transforms."""
        return _kernel_spectrum_sum(self.params, self.knots.points, self.kernel_coeffs, y)

    @property
    def max_condition(self) -> float:
        return max(s.condition for s in self.splines)

    @property
    def max_residual(self) -> float:
        return max(s.residual for s in self.splines)


def interpolate(
    knots: KnotSet,
    values,
    params: SplineParams,
    window_radius: float | None = None,
) -> Interpolant:
    """Assemble the Lagrangian interpolant of ``values`` sampled at ``knots``.

    When every window is the whole knot set (e.g. ``window_radius=math.inf``)
    the collapsed coefficients ``c = sum_nu f_nu M^{-1} e_nu`` are computed
    as the single solve ``M c = f``. The two are equal in exact arithmetic,
    but for large ``k`` each Lagrangian column carries a rounding residual of
    order ``cond(M) * machine eps`` while the smooth right-hand side does not.
    """
    values = np.asarray(values)
    if values.shape != (len(knots),):
        raise ValueError(f"expected {len(knots)} values, got shape {values.shape}")
    if params.dim != knots.dim:
        raise ValueError(f"params.dim={params.dim} but knots have dim={knots.dim}")
    n = len(knots)
    if window_radius is None:
        window_radius = default_window_radius(params, knots.separation)
    lo, hi = knots.points.min(axis=0), knots.points.max(axis=0)
    if window_radius >= float(np.linalg.norm(hi - lo)):
        return _interpolate_global(knots, values, params)
    tree = cKDTree(knots.points)
    splines = tuple(solve_lagrangian(knots, nu, params, window_radius, tree) for nu in range(n))
    coeffs = np.zeros(n, dtype=np.result_type(values, float))
    for s, f in zip(splines, values):
        coeffs[s.window] += f * s.coeffs
    return Interpolant(splines, values, params, knots, coeffs, float(window_radius))


def _interpolate_global(knots: KnotSet, values: np.ndarray, params: SplineParams) -> Interpolant:
    n = len(knots)
    m = build_gram(params, knots.points)
    try:
        cols = solve_gram(m, np.eye(n))
        sol = solve_gram(m, values.astype(np.result_type(values, float)))
    except IllConditionedError as exc:
        raise IllConditionedError(f"global window: {exc}", exc.condition) from exc
    win = np.arange(n)
    splines = tuple(
        LagrangianSpline(nu, win, cols.x[:, nu], params, knots, cols.condition,
                         float(np.max(np.abs(m @ cols.x[:, nu] - (win == nu)))), cols.regularization)
        for nu in range(n)
    )
    return Interpolant(splines, values, params, knots, sol.x)


def kernel_energy(params: SplineParams, centers, coeffs) -> float:
    """``int (|xi|^2 + eps)^k |u^(xi)|^2 dxi`` for ``u = sum c_mu E(. - x_mu)``.

    Equals ``c^T M c``; this is the squared norm of ``(-Delta + eps)^{k/2} u``.
    """
    c = np.asarray(coeffs)
    m = build_gram(params, centers)
    return float(np.real(np.conj(c) @ m @ c))


def spectral_energy(values, dx: float, order: float, eps: float) -> float:
    """Discrete ``||(-Delta + eps)^{order/2} u||^2`` of 1D grid samples via FFT.

    ``values`` are samples of a function that has decayed to zero at both
    ends of the grid; the result approximates ``int (xi^2 + eps)^order |u^|^2``.
    """
    u = np.asarray(values)
    n = len(u)
    xi = 2.0 * math.pi * np.fft.fftfreq(n, d=dx)
    uh = np.fft.fft(u) * dx / math.sqrt(2.0 * math.pi)
    dxi = 2.0 * math.pi / (n * dx)
    return float(np.sum((xi * xi + eps) ** order * np.abs(uh) ** 2) * dxi)
