import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import j1

from spline_radon.fourier_algorithm import (
    CartesianSpectrum,
    GriddingConfig,
    PolarSpectrum,
    band_window,
    image_dft,
    nearest_gridding,
    reconstruct,
    resample_projection_irregular,
    step1_naive,
    step1_projection_dft,
    step2_gridding,
    step3_inverse_dft,
    step3_naive,
)
from spline_radon.knots import KnotSet, jittered_knots, lattice_knots
from spline_radon.radon import (
    Ellipse,
    Phantom,
    Sinogram,
    disk_phantom,
    rasterize,
    rmse,
    shepp_logan_phantom,
    sinogram_analytic,
)


def _lattice(q):
    k = np.arange(-(q - 1), q)
    return np.stack(np.meshgrid(k, k, indexing="ij"), axis=-1).astype(float)


def disk_coefficients(kk):
    """``pi^2`` times the unitary 2D transform of the unit-disk indicator at ``pi k``."""
    rho = math.pi * np.hypot(kk[..., 0], kk[..., 1])
    safe = np.where(rho == 0, 1.0, rho)
    return math.pi**2 * np.where(rho == 0, 0.5, j1(safe) / safe)


# ---------------------------------------------------------------- Step 1


@pytest.mark.parametrize("P", [1, 3])
def test_step1_matches_naive(P):
    s = sinogram_analytic(shepp_logan_phantom(), 11, 16)
    fast = step1_projection_dft(s, P).values
    slow = step1_naive(s, P)
    assert np.max(np.abs(fast - slow)) <= 1e-10 * np.max(np.abs(slow))


def test_step1_zero_and_delta():
    q = 8
    assert np.all(step1_projection_dft(Sinogram(3, q, np.zeros((3, 2 * q + 1)))).values == 0)
    data = np.zeros((2, 2 * q + 1))
    data[:, q] = 1.0  # offset s = 0
    vals = step1_projection_dft(Sinogram(2, q, data)).values
    assert np.allclose(vals, (2 * math.pi) ** -0.5 / q, atol=1e-15)


def test_step1_disk_is_direction_independent():
    vals = step1_projection_dft(sinogram_analytic(disk_phantom(), 13, 32), 2).values
    assert np.max(np.abs(vals - vals[0])) <= 1e-9


def test_step1_conjugate_symmetry():
    q = 16
    vals = step1_projection_dft(sinogram_analytic(shepp_logan_phantom(), 7, q)).values
    r = np.arange(-q + 1, q)  # r = -q has no partner inside the block
    assert np.allclose(vals[:, r + q], np.conj(vals[:, -r + q]), atol=1e-9)


def test_step1_roundtrip():
    q = 16
    s = sinogram_analytic(shepp_logan_phantom(), 5, q)
    vals = step1_projection_dft(s).values
    n = 2 * q
    r = np.arange(-q, q)
    buf = np.zeros_like(vals)
    buf[:, r % n] = vals
    back = np.fft.ifft(buf, axis=1) * math.sqrt(2 * math.pi) / s.h
    l = np.arange(-q, q)
    assert np.max(np.abs(back[:, l % n] - s.data[:, : 2 * q])) <= 1e-10


def test_polar_spectrum_shape_check():
    with pytest.raises(ValueError):
        PolarSpectrum(3, 4, np.zeros((3, 7)))
    assert np.array_equal(PolarSpectrum(2, 3, np.zeros((2, 12)), 2).radii[:3], [-3, -2.5, -2])


# ---------------------------------------------------------------- Step 3


def test_step3_matches_naive():
    rng = np.random.default_rng(2)
    q = 9
    c = CartesianSpectrum(q, rng.normal(size=(17, 17)) + 1j * rng.normal(size=(17, 17)))
    a, b = step3_inverse_dft(c), step3_naive(c)
    assert np.max(np.abs(a - b)) <= 1e-10 * np.max(np.abs(b))


def test_step3_zero_and_delta():
    q = 6
    assert np.all(step3_inverse_dft(CartesianSpectrum(q, np.zeros((11, 11)))) == 0)
    v = np.zeros((11, 11), dtype=complex)
    v[5, 5] = 3.0
    img = step3_inverse_dft(CartesianSpectrum(q, v))
    assert np.allclose(img, 3.0 / (2 * math.pi), atol=1e-14)


@given(st.integers(2, 12), st.integers(0, 2**31))
@settings(max_examples=15)
def test_image_dft_real_images_are_conjugate_symmetric(q, seed):
    img = np.random.default_rng(seed).normal(size=(2 * q - 1, 2 * q - 1))
    v = image_dft(img, q).values
    assert np.allclose(v, np.conj(v[::-1, ::-1]), atol=1e-12)
    assert v[q - 1, q - 1] == pytest.approx(2 * math.pi * img.sum() / (2 * q) ** 2)


def test_image_dft_exact_on_band_limited_images():
    q = 8
    rng = np.random.default_rng(4)
    v = rng.normal(size=(15, 15)) + 1j * rng.normal(size=(15, 15))
    img = step3_inverse_dft(CartesianSpectrum(q, v))
    # Step 3 maps 15x15 coefficients into a 16-periodic image; sampling 15 of 16 points loses one
    buf = np.zeros((16, 16), dtype=complex)
    k = np.arange(-7, 8) % 16
    buf[np.ix_(k, k)] = v
    full = np.fft.ifft2(buf) * 256 / (2 * math.pi)
    assert np.allclose(full[np.ix_(k, k)], img, atol=1e-12)


# ---------------------------------------------------------------- Step 2


def test_band_window():
    w = band_window(8, 0.0)
    assert w[7, 7] == 1 and w[0, 0] == 0
    t = band_window(8, 0.25)
    assert t[7, 7] == 1 and 0 < t[7, 7 + 7] < 1
    assert np.all((t >= 0) & (t <= w))


def test_config_validation():
    with pytest.raises(ValueError):
        GriddingConfig(neighbor_count=2)
    with pytest.raises(ValueError):
        GriddingConfig(taper=1.0)
    assert GriddingConfig().params.k == 4


def test_step2_zero_spectrum():
    pol = PolarSpectrum(13, 8, np.zeros((13, 64)), 4)
    assert np.all(step2_gridding(pol).values == 0)


def test_step2_passthrough_at_polar_knots():
    # direction 0 is the k1 axis, so every (r, 0) target coincides with a polar knot
    rng = np.random.default_rng(5)
    q, p, P = 8, 25, 2
    vals = rng.normal(size=(p, 2 * q * P)) + 1j * rng.normal(size=(p, 2 * q * P))
    c = step2_gridding(PolarSpectrum(p, q, vals, P), GriddingConfig(taper=0.0))
    scale = math.pi**2 * (2 * math.pi) ** -0.5
    for r in range(-(q - 1), q):
        assert c.values[r + q - 1, q - 1] == pytest.approx(scale * vals[0, r * P + q * P], abs=1e-8)


def test_step2_disk_against_exact_transform():
    q, p = 32, 101
    cfg = GriddingConfig(taper=0.0)
    pol = step1_projection_dft(sinogram_analytic(disk_phantom(), p, q), cfg.oversample)
    exact = disk_coefficients(_lattice(q))
    kk = _lattice(q)
    band = np.max(np.abs(kk), axis=-1) <= q // 2

    def rel(c):
        return np.linalg.norm((c.values - exact)[band]) / np.linalg.norm(exact[band])

    spline = rel(step2_gridding(pol, cfg))
    nearest = rel(nearest_gridding(pol))
    assert spline <= 0.05
    assert spline < nearest


def test_step2_conjugate_symmetry():
    q, p = 16, 51
    pol = step1_projection_dft(sinogram_analytic(shepp_logan_phantom(), p, q), 4)
    v = step2_gridding(pol).values
    assert np.max(np.abs(v - np.conj(v[::-1, ::-1]))) <= 1e-6 * np.max(np.abs(v))


def test_step2_error_decreases_with_density():
    def spectrum(eta):
        return np.exp(-np.sum(eta**2, axis=-1) / 32.0) * np.cos(0.7 * eta[..., 0])

    errs = []
    for q in (16, 32, 64):
        p = round(math.pi * q)
        geom = PolarSpectrum(p, q, np.zeros((p, 8 * q)), 4).geometry
        pol = PolarSpectrum(p, q, spectrum(geom.points()) * math.sqrt(2 * math.pi) / math.pi**2, 4)
        c = step2_gridding(pol, GriddingConfig(taper=0.0))
        kk = _lattice(q)
        band = np.max(np.abs(kk), axis=-1) <= 12
        errs.append(np.max(np.abs(c.values - spectrum(kk))[band]))
    assert errs[0] > errs[1] > errs[2]


def test_step2_counters():
    counters: dict = {}
    pol = step1_projection_dft(sinogram_analytic(disk_phantom(), 25, 8), 4)
    step2_gridding(pol, GriddingConfig(neighbor_count=10), counters)
    n = counters["targets"]
    assert n == int(np.sum(np.hypot(*np.meshgrid(np.arange(-7, 8), np.arange(-7, 8))) <= 8))
    assert counters["kernel_evaluations"] == n * 110
    assert counters["local_solves"] + counters["fallbacks"] == n


# ---------------------------------------------------------------- pipeline


def test_reconstruct_linear():
    s = sinogram_analytic(shepp_logan_phantom(), 51, 16)
    a, _ = reconstruct(s)
    b, _ = reconstruct(s.scaled(2.5))
    assert np.max(np.abs(b - 2.5 * a)) <= 1e-9
    z, rep = reconstruct(s.scaled(0.0))
    assert np.all(z == 0) and not rep.flagged


def test_reconstruct_shift():
    q = 40
    p = round(math.pi * q)
    centred = Phantom((Ellipse((0.0, 0.0), (0.6, 0.6)),))
    moved = Phantom((Ellipse((0.2, 0.0), (0.6, 0.6)),))
    a, _ = reconstruct(sinogram_analytic(centred, p, q))
    b, _ = reconstruct(sinogram_analytic(moved, p, q))
    shift = round(0.2 * q)
    floor = rmse(a, rasterize(centred, q))
    assert rmse(b[shift:], a[:-shift]) <= 2 * floor


def test_reconstruct_report(tmp_path):
    img, rep = reconstruct(sinogram_analytic(disk_phantom(), 51, 16))
    assert img.shape == (31, 31)
    assert set(rep.timings) == {"step1", "step2", "step3"}
    assert rep.fallback_fraction == 0 and not rep.flagged
    assert set(rep.density_gate) == {"fill_distance", "limit", "passed"}
    text = rep.to_json(tmp_path / "r.json", include_timings=False)
    d = json.loads((tmp_path / "r.json").read_text())
    assert "timings" not in d and d["config"]["neighbor_count"] == 25
    assert text == rep.to_json(include_timings=False)
    with pytest.raises(ValueError):
        reconstruct(sinogram_analytic(disk_phantom(), 5, 4), method="bogus")


def test_nearest_method_runs():
    img, rep = reconstruct(sinogram_analytic(disk_phantom(), 51, 16), method="nearest")
    assert np.all(np.isfinite(img)) and rep.method == "nearest"


def test_spectra_csv(tmp_path):
    pol = step1_projection_dft(sinogram_analytic(disk_phantom(), 3, 2), 2)
    pol.to_csv(tmp_path / "p.csv")
    lines = (tmp_path / "p.csv").read_text().splitlines()
    assert lines[0] == "j,r,re,im" and len(lines) == 1 + 3 * 8
    assert lines[1].startswith("0,-2.0,")
    cart = CartesianSpectrum(2, np.arange(9, dtype=complex).reshape(3, 3))
    cart.to_csv(tmp_path / "c.csv")
    rows = (tmp_path / "c.csv").read_text().splitlines()
    assert rows[0] == "k1,k2,re,im" and rows[-1] == "1,1,8.0,0.0"


# ---------------------------------------------------------------- irregular offsets


def test_resample_zero():
    knots = lattice_knots([-1, 1], 0.1)
    assert resample_projection_irregular(np.zeros(len(knots)), knots, 1, math.pi) == 0


def test_resample_rejects_2d_knots():
    knots = lattice_knots([[-1, 1], [-1, 1]], 0.5)
    with pytest.raises(ValueError):
        resample_projection_irregular(np.ones(len(knots)), knots, 1, 1.0)


def test_resample_matches_step1_on_regular_offsets():
    q = 32
    # unit-disk projection sampled past its support, where it vanishes
    s_full = np.arange(-48, 49) / q
    knots = KnotSet.from_points(s_full)
    chord = Sinogram(1, q, sinogram_analytic(disk_phantom(), 1, q).data)
    ref = step1_projection_dft(chord).values[0]
    g_full = 2 * np.sqrt(np.clip(1 - s_full**2, 0, None))
    for r in (1, 3, 5, 8):
        got = resample_projection_irregular(g_full, knots, 1, math.pi * r)
        assert abs(got - ref[r + q]) <= 0.01 * abs(ref[r + q])


def test_resample_jittered_disk_projection():
    from spline_radon.experiments import disk_projection_ft

    knots = jittered_knots([-1.5, 1.5], 1 / 32, 0.3, 11)
    s = knots.points[:, 0]
    g = 2 * np.sqrt(np.clip(1 - s * s, 0, None))
    taus = np.array([math.pi, 2 * math.pi])
    got = resample_projection_irregular(g, knots, 1, taus)
    assert np.max(np.abs(got - disk_projection_ft(taus))) <= 5e-3
