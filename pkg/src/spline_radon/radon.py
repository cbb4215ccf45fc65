"""Ellipse phantoms, exact parallel-beam sinograms and the FBP reference.

Geometry follows the parallel-beam layout used throughout the package:
directions ``theta_j = (cos a_j, sin a_j)`` with ``a_j = (j - 1) pi / p`` and
offsets ``s_l = l / q`` for ``l = -q..q``. Images hold samples at ``x = h N``
for integer ``N`` with ``|N|_inf < q``; ``image[i, j]`` is the pixel at
``N = (i - (q - 1), j - (q - 1))``, so axis 0 runs along ``x_1``.
"""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "Ellipse",
    "Phantom",
    "Sinogram",
    "angles",
    "offsets",
    "pixel_coords",
    "sinogram_analytic",
    "backproject",
    "ramp_filter_rows",
    "fbp_reconstruct",
    "rasterize",
    "disk_phantom",
    "shepp_logan_phantom",
    "interior_mask",
    "rmse",
    "line_integrals",
    "write_image",
    "read_image",
]


@dataclass(frozen=True)
class Ellipse:
    center: tuple[float, float]
    axes: tuple[float, float]
    rot: float = 0.0
    density: float = 1.0

    def __post_init__(self):
        a, b = self.axes
        if not (a > 0 and b > 0):
            raise ValueError(f"ellipse semi-axes must be positive, got {self.axes}")


@dataclass(frozen=True)
class Phantom:
    ellipses: tuple[Ellipse, ...] = field(default_factory=tuple)

    def support_radius(self) -> float:
        r = 0.0
        for e in self.ellipses:
            r = max(r, math.hypot(*e.center) + max(e.axes))
        return r

    def to_dict(self) -> dict:
        return {
            "ellipses": [
                {
                    "center": list(e.center),
                    "axes": list(e.axes),
                    "rot": e.rot,
                    "density": e.density,
                }
                for e in self.ellipses
            ]
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Phantom":
        try:
            items = data["ellipses"]
            ells = tuple(
                Ellipse(
                    center=(float(it["center"][0]), float(it["center"][1])),
                    axes=(float(it["axes"][0]), float(it["axes"][1])),
                    rot=float(it.get("rot", 0.0)),
                    density=float(it.get("density", 1.0)),
                )
                for it in items
            )
        except (KeyError, TypeError, IndexError) as exc:
            raise ValueError(f"bad phantom schema: {exc!r}") from exc
        return cls(ells)

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path) -> "Phantom":
        text = Path(path).read_text()
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from exc
        return cls.from_dict(data)


@dataclass(frozen=True)
class Sinogram:
    """Radon samples ``data[j - 1, l + q] = g(theta_j, s_l)``, shape ``(p, 2q + 1)``."""

    p: int
    q: int
    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data, dtype=float)
        if data.shape != (self.p, 2 * self.q + 1):
            raise ValueError(f"sinogram shape {data.shape} != {(self.p, 2 * self.q + 1)}")
        if not np.all(np.isfinite(data)):
            raise ValueError("sinogram contains non-finite values")
        object.__setattr__(self, "data", data)

    @property
    def h(self) -> float:
        return 1.0 / self.q

    def scaled(self, a: float) -> "Sinogram":
        return Sinogram(self.p, self.q, a * self.data)

    def to_csv(self, path) -> None:
        lines = [f"p,q,h", f"{self.p},{self.q},{self.h!r}"]
        lines += [",".join(repr(float(v)) for v in row) for row in self.data]
        Path(path).write_text("\n".join(lines) + "\n")

    @classmethod
    def from_csv(cls, path) -> "Sinogram":
        rows = Path(path).read_text().splitlines()
        if not rows or rows[0].strip() != "p,q,h":
            raise ValueError(f"{path}: line 1: expected header 'p,q,h'")
        try:
            p_str, q_str, _ = rows[1].split(",")
            p, q = int(p_str), int(q_str)
        except (IndexError, ValueError) as exc:
            raise ValueError(f"{path}: line 2: bad p,q,h record") from exc
        data = []
        for lineno, row in enumerate(rows[2:], start=3):
            if not row.strip():
                continue
            try:
                data.append([float(v) for v in row.split(",")])
            except ValueError as exc:
                raise ValueError(f"{path}: line {lineno}: {exc}") from exc
        return cls(p, q, np.array(data))


def angles(p: int) -> np.ndarray:
    return np.arange(p) * math.pi / p


def offsets(q: int) -> np.ndarray:
    return np.arange(-q, q + 1) / q


def pixel_coords(q: int) -> np.ndarray:
    """Pixel centres ``h N`` as an array of shape ``(2q - 1, 2q - 1, 2)``."""
    n = np.arange(-(q - 1), q) / q
    return np.stack(np.meshgrid(n, n, indexing="ij"), axis=-1)


def _chords(phantom: Phantom, theta: np.ndarray, s: np.ndarray) -> np.ndarray:
    # theta: (p,) angles, s: (..., ) offsets broadcast against (p, 1)
    out = np.zeros(np.broadcast_shapes(theta[:, None].shape, s.shape))
    for e in phantom.ellipses:
        a, b = e.axes
        cx, cy = e.center
        ang = theta[:, None] - e.rot
        w2 = (a * np.cos(ang)) ** 2 + (b * np.sin(ang)) ** 2
        t = s - (np.cos(theta)[:, None] * cx + np.sin(theta)[:, None] * cy)
        inside = np.clip(w2 - t * t, 0.0, None)
        out += 2.0 * e.density * a * b / w2 * np.sqrt(inside)
    return out


def sinogram_analytic(phantom: Phantom, p: int, q: int) -> Sinogram:
    """Exact line integrals of an ellipse phantom on the ``p x (2q + 1)`` grid."""
    if phantom.support_radius() > 1.0 + 1e-12:
        warnings.warn("phantom extends beyond the unit disk; offsets |s| <= 1 truncate it")
    return Sinogram(p, q, _chords(phantom, angles(p), offsets(q)[None, :]))


def line_integrals(phantom: Phantom, alpha, s) -> np.ndarray:
    """Line integrals at arbitrary ``(alpha, s)`` pairs (arrays broadcast)."""
    alpha = np.atleast_1d(np.asarray(alpha, dtype=float))
    s = np.asarray(s, dtype=float)
    return _chords(phantom, alpha, s.reshape(1, -1) if s.ndim <= 1 else s)


def backproject(data, q: int | None = None) -> np.ndarray:
    """Discrete backprojection ``(pi / p) sum_j g(theta_j, x . theta_j)``.

    ``data`` has shape ``(p, 2q + 1)`` on the standard offsets; values between
    offsets are linearly interpolated and zero outside ``[-1, 1]``.
    """
    data = np.asarray(data, dtype=float)
    p, m = data.shape
    if q is None:
        q = (m - 1) // 2
    xy = pixel_coords(q)
    img = np.zeros(xy.shape[:2])
    for j, a in enumerate(angles(p)):
        s = xy[..., 0] * math.cos(a) + xy[..., 1] * math.sin(a)
        u = (s + 1.0) * q  # fractional index into the row
        i0 = np.floor(u).astype(int)
        frac = u - i0
        i0c = np.clip(i0, 0, m - 1)
        i1c = np.clip(i0 + 1, 0, m - 1)
        v = (1 - frac) * data[j, i0c] + frac * data[j, i1c]
        v[(u < 0) | (u > m - 1)] = 0.0
        img += v
    return img * (math.pi / p)


def ramp_filter_rows(data, q: int, taper: float = 0.1) -> np.ndarray:
    """Convolve each row with the band-limited ramp (Ram-Lak) kernel.

    The spatial kernel is ``1/(4h^2)`` at 0 and ``-1/(pi^2 n^2 h^2)`` at odd
    ``n``; its response is cosine-tapered over the top ``taper`` fraction of
    the band up to the offset Nyquist frequency.
    """
    data = np.asarray(data, dtype=float)
    p, m = data.shape
    h = 1.0 / q
    size = 1 << int(math.ceil(math.log2(2 * m)))
    n = np.fft.fftfreq(size, d=1.0 / size)  # integer lags in FFT order
    kern = np.zeros(size)
    kern[n == 0] = 1.0 / (4 * h * h)
    odd = (np.abs(n) % 2) == 1
    kern[odd] = -1.0 / (math.pi**2 * n[odd] ** 2 * h * h)
    resp = np.real(np.fft.fft(kern))
    f = np.abs(np.fft.fftfreq(size))  # cycles/sample, Nyquist = 0.5
    if taper > 0:
        start = 0.5 * (1 - taper)
        w = np.where(f <= start, 1.0, 0.5 * (1 + np.cos(math.pi * (f - start) / (0.5 - start))))
        resp = resp * w
    padded = np.zeros((p, size))
    padded[:, :m] = data
    out = np.fft.ifft(np.fft.fft(padded, axis=1) * resp, axis=1).real
    return h * out[:, :m]


def fbp_reconstruct(sino: Sinogram, taper: float = 0.1) -> np.ndarray:
    """Filtered backprojection on the ``(2q - 1)^2`` pixel grid."""
    if sino.p < 8:
        warnings.warn(f"only {sino.p} directions: expect severe streaking")
    return backproject(ramp_filter_rows(sino.data, sino.q, taper), sino.q)


def rasterize(phantom: Phantom, q: int) -> np.ndarray:
    """Sum of densities of the ellipses containing each pixel centre."""
    xy = pixel_coords(q)
    img = np.zeros(xy.shape[:2])
    for e in phantom.ellipses:
        dx = xy[..., 0] - e.center[0]
        dy = xy[..., 1] - e.center[1]
        c, s = math.cos(e.rot), math.sin(e.rot)
        u = (c * dx + s * dy) / e.axes[0]
        v = (-s * dx + c * dy) / e.axes[1]
        img += e.density * (u * u + v * v <= 1.0)
    return img


def disk_phantom(radius: float = 1.0, density: float = 1.0, center=(0.0, 0.0)) -> Phantom:
    return Phantom((Ellipse(tuple(center), (radius, radius), 0.0, density),))


def shepp_logan_phantom() -> Phantom:
    """Modified Shepp-Logan parameters (Toft's contrast values)."""
    table = [
        (1.0, 0.69, 0.92, 0.0, 0.0, 0.0),
        (-0.8, 0.6624, 0.874, 0.0, -0.0184, 0.0),
        (-0.2, 0.11, 0.31, 0.22, 0.0, -18.0),
        (-0.2, 0.16, 0.41, -0.22, 0.0, 18.0),
        (0.1, 0.21, 0.25, 0.0, 0.35, 0.0),
        (0.1, 0.046, 0.046, 0.0, 0.1, 0.0),
        (0.1, 0.046, 0.046, 0.0, -0.1, 0.0),
        (0.1, 0.046, 0.023, -0.08, -0.605, 0.0),
        (0.1, 0.023, 0.023, 0.0, -0.606, 0.0),
        (0.1, 0.023, 0.046, 0.06, -0.605, 0.0),
    ]
    # the classic table lists (x, y) with y pointing up the head
    return Phantom(
        tuple(
            Ellipse((x, y), (a, b), math.radians(deg), rho)
            for rho, a, b, x, y, deg in table
        )
    )


def interior_mask(q: int, radius: float) -> np.ndarray:
    xy = pixel_coords(q)
    return np.hypot(xy[..., 0], xy[..., 1]) <= radius


def rmse(a, b, mask=None) -> float:
    d = np.asarray(a) - np.asarray(b)
    if mask is not None:
        d = d[mask]
    return float(np.sqrt(np.mean(d * d)))


def write_image(path, img) -> dict:
    """Write a 16-bit binary PGM plus ``<path>.json`` holding ``scale`` and ``offset``.

    Pixel levels are ``round((img - offset) / scale)``; reading back gives
    ``offset + scale * level`` exactly, so a second write/read cycle is the
    identity and the first loses at most ``scale / 2`` per pixel.
    """
    img = np.asarray(img, dtype=float)
    if img.ndim != 2 or not np.all(np.isfinite(img)):
        raise ValueError("image must be a finite 2D array")
    lo, hi = float(img.min()), float(img.max())
    scale = (hi - lo) / 65535.0 if hi > lo else 1.0
    levels = np.rint((img - lo) / scale).astype(">u2")
    rows, cols = img.shape
    # PGM rows run top to bottom; store x_2 decreasing downwards, x_1 to the right
    raster = levels.T[::-1]
    header = f"P5\n{rows} {cols}\n65535\n".encode()
    Path(path).write_bytes(header + raster.tobytes())
    meta = {"scale": scale, "offset": lo, "shape": [rows, cols], "layout": "x1 right, x2 up"}
    Path(str(path) + ".json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return meta


def read_image(path) -> np.ndarray:
    """Inverse of :func:`write_image`."""
    blob = Path(path).read_bytes()
    parts = blob.split(maxsplit=4)
    if len(parts) < 5 or parts[0] != b"P5" or parts[3] != b"65535":
        raise ValueError(f"{path}: not a 16-bit P5 PGM")
    w, h = int(parts[1]), int(parts[2])
    raster = np.frombuffer(parts[4][: 2 * w * h], dtype=">u2").reshape(h, w)
    meta = json.loads(Path(str(path) + ".json").read_text())
    levels = raster[::-1].T.astype(float)
    return meta["offset"] + meta["scale"] * levels
