"""Experiment drivers shared by the CLI and the scripts.

Each driver returns a list of flat dict rows (one per trial) so callers can
write tidy CSV. Wall-clock columns are only added on request, which keeps the
default output byte-identical between runs.
"""
from __future__ import annotations

import csv
import io
import math
import time

import numpy as np
from scipy.special import j1

from .fourier_algorithm import GriddingConfig, reconstruct, resample_projection_irregular
from .knots import density_gate, jittered_knots
from .radon import disk_phantom, sinogram_analytic
from .special_functions import SplineParams, lattice_cardinal_function_1d
from .spline_interp import interpolate

EXPERIMENTS = ("convergence_l", "sinc_limit", "jitter_sweep", "complexity")


def convergence_l(levels=(0, 1, 2), r: int = 1, spacing: float = 0.1, jitter: float = 0.3,
                  eps: float = 1.0, sigma: float = 2.0, half_width: float = 6.0,
                  eval_half_width: float = 2.0, seed: int = 0) -> list[dict]:
    """Interpolation error of ``sin(sigma x)`` for ``k = 2**l * r`` on jittered knots."""
    knots = jittered_knots([-half_width, half_width], spacing, jitter, seed)
    f = knots.points[:, 0]
    x = np.linspace(-eval_half_width, eval_half_width, 2001)
    rows = []
    for level in levels:
        k = 2**level * r
        params = SplineParams(k=k, eps=eps, dim=1)
        interp = interpolate(knots, np.sin(sigma * f), params, math.inf)
        err = float(np.max(np.abs(interp(x) - np.sin(sigma * x))))
        rows.append({
            "l": level, "r": r, "k": k, "spacing": spacing, "jitter": jitter, "eps": eps,
            "sigma": sigma, "fill_distance": knots.fill_distance,
            "density_gate": density_gate(knots, sigma, params),
            "max_condition": interp.max_condition, "error": err,
        })
    return rows


def sinc_limit(orders=(2, 4, 8), half_width: float = 3.0, points: int = 601) -> list[dict]:
    """Sup distance between the lattice cardinal function of order ``k`` and ``sinc``."""
    x = np.linspace(-half_width, half_width, points)
    rows = []
    for k in orders:
        err = float(np.max(np.abs(lattice_cardinal_function_1d(k, x) - np.sinc(x))))
        rows.append({"k": k, "half_width": half_width, "points": points, "sup_error": err})
    return rows


def disk_projection_ft(tau):
    """Unitary Fourier transform of ``2 sqrt(1 - s^2)`` on ``[-1, 1]``."""
    tau = np.asarray(tau, dtype=float)
    safe = np.where(tau == 0, 1.0, tau)
    return np.where(tau == 0, math.sqrt(2 * math.pi) / 2, math.sqrt(2 * math.pi) * j1(safe) / safe)


def jitter_sweep(jitters=(0.0, 0.1, 0.2, 0.3, 0.4), q: int = 32, m: int = 1, eps: float = 1.0,
                 taus=(math.pi, 2 * math.pi, 4 * math.pi), noise: float = 0.0, seed: int = 0,
                 margin: float = 0.5) -> list[dict]:
    """Irregular-offset Fourier transform of the unit-disk projection versus its exact transform."""
    rng = np.random.default_rng(seed)
    rows = []
    for jit in jitters:
        knots = jittered_knots([-1 - margin, 1 + margin], 1.0 / q, jit, seed)
        s = knots.points[:, 0]
        g = 2.0 * np.sqrt(np.clip(1.0 - s * s, 0.0, None))
        if noise > 0:
            g = g + rng.normal(0.0, noise, size=g.shape) * (np.abs(s) < 1)
        est = resample_projection_irregular(g, knots, m, np.asarray(taus), eps)
        exact = disk_projection_ft(np.asarray(taus))
        for tau, e, x in zip(taus, est, exact):
            rows.append({"jitter": jit, "q": q, "m": m, "noise": noise, "tau": tau,
                         "error": float(abs(e - x))})
    return rows


def complexity(qs=(16, 32, 64), cfg: GriddingConfig = GriddingConfig(), timings: bool = False) -> list[dict]:
    """Step 2 counters (and optionally step timings) for growing ``q`` with ``p = round(pi q)``."""
    rows = []
    prev = None
    phantom = disk_phantom()
    for q in qs:
        p = round(math.pi * q)
        _, rep = reconstruct(sinogram_analytic(phantom, p, q), cfg)
        evals = rep.counters["kernel_evaluations"]
        row = {"q": q, "p": p, "targets": rep.counters["targets"], "kernel_evaluations": evals,
               "ratio": evals / prev if prev else float("nan"), "fallbacks": rep.counters["fallbacks"]}
        if timings:
            row.update({f"{k}_seconds": v for k, v in rep.timings.items()})
        rows.append(row)
        prev = evals
    return rows


def rows_to_csv(rows: list[dict]) -> str:
    if not rows:
        return ""
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})
    return buf.getvalue()


def timed(fn, *args, **kwargs):
    t0 = time.perf_counter()
    out = fn(*args, **kwargs)
    return out, time.perf_counter() - t0
