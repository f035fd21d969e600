import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays
from skimage.metrics import structural_similarity

from hyperplap.geometry import EmptyInputError, ParseError
from hyperplap.inpaint import (PatchConfig, extract_patches, gradient_edge_image, inpaint,
                               load_mask_csv, mean_fill, mirror_extend, pixel_of_vertex, psnr,
                               random_mask, read_pgm, save_mask_csv, ssim, table_psnr,
                               vertex_of_pixel, write_pgm)
from hyperplap.solver import SolverConfig

pytestmark = pytest.mark.filterwarnings("ignore::UserWarning")

images = arrays(np.float64, st.tuples(st.integers(1, 9), st.integers(1, 9)),
                elements=st.floats(0, 1))


def test_mirror_examples():
    np.testing.assert_array_equal(mirror_extend([[1.0, 2.0, 3.0]], 0, 1), [[2, 1, 2, 3, 2]])
    img = np.arange(12.0).reshape(3, 4)
    np.testing.assert_array_equal(mirror_extend(img, 0, 0), img)
    np.testing.assert_array_equal(mirror_extend(img, 2, 3)[2:5, 3:7], img)
    with pytest.raises(ValueError):
        mirror_extend(img, 3, 0)
    with pytest.raises(ValueError):
        mirror_extend(img, 0, -1)


def test_patch_examples():
    cloud = extract_patches([[0.4]], PatchConfig(s1=1, s2=1, lam=0))
    np.testing.assert_array_equal(cloud.points, [[0.4]])
    cloud = extract_patches(np.zeros((2, 2)), PatchConfig(s1=1, s2=1, lam=10))
    np.testing.assert_allclose(cloud.points[:, -2:], [[0, 0], [0, 5], [5, 0], [5, 5]])
    cloud = extract_patches(np.full((4, 5), 0.3), PatchConfig(s1=3, s2=3, lam=0))
    assert cloud.points.shape == (20, 9) and np.all(cloud.points == 0.3)
    with pytest.raises(ValueError):
        PatchConfig(s1=4)


@pytest.mark.invariant
@given(images, st.sampled_from([1, 3, 5]), st.sampled_from([1, 3]), st.sampled_from([0.0, 10.0]))
def test_center_readback(img, s1, s2, lam):
    if s1 // 2 >= img.shape[0] or s2 // 2 >= img.shape[1]:
        return
    pts = extract_patches(img, PatchConfig(s1=s1, s2=s2, lam=lam)).points
    center = (s1 // 2) * s2 + s2 // 2
    np.testing.assert_array_equal(pts[:, center], img.ravel())
    assert pts.shape == (img.size, s1 * s2 + (2 if lam > 0 else 0))


@pytest.mark.invariant
@given(st.integers(1, 30), st.integers(1, 30))
def test_vertex_pixel_bijection(n1, n2):
    seen = set()
    for v in range(n1 * n2):
        i, j = pixel_of_vertex(v, (n1, n2))
        assert 0 <= i < n1 and 0 <= j < n2
        assert vertex_of_pixel(i, j, (n1, n2)) == v
        seen.add((i, j))
    assert len(seen) == n1 * n2


def test_full_mask_returns_input():
    img = gradient_edge_image(16)
    out = inpaint(img, np.ones_like(img, bool), PatchConfig(method="hpl", K=2))
    np.testing.assert_array_equal(out, img)


def test_constant_image_recovered():
    img = np.full((16, 16), 0.37)
    mask = random_mask(img.shape, 0.2, 1)
    out = inpaint(np.where(mask, img, 0), mask, PatchConfig(method="gpl", K=2, s1=3, s2=3))
    np.testing.assert_allclose(out, img, atol=1e-9)


def test_empty_mask_rejected():
    with pytest.raises(EmptyInputError):
        inpaint(np.zeros((4, 4)), np.zeros((4, 4), bool))
    with pytest.raises(ValueError):
        inpaint(np.zeros((4, 4)), np.ones((3, 4), bool))


@pytest.mark.invariant
def test_observed_exact_every_iteration_and_beats_fill():
    img = gradient_edge_image(24)
    mask = random_mask(img.shape, 0.2, 3)
    obs = np.where(mask, img, 0.0)
    seen = []

    def check(it, cur):
        seen.append(it)
        assert np.array_equal(cur[mask], img[mask])
        assert cur.min() >= 0 and cur.max() <= 1

    out = inpaint(obs, mask, PatchConfig(method="gpl", K=3, s1=3, s2=3),
                  SolverConfig(epochs=100), callback=check)
    assert seen == [0, 1, 2]
    assert np.array_equal(out[mask], img[mask])
    assert psnr(out, img) >= psnr(mean_fill(obs, mask), img)


@pytest.mark.slow
def test_hpl_not_worse_than_gpl_on_gradient():
    n = 64
    img = np.tile(np.linspace(0, 1, n), (n, 1))
    mask = random_mask(img.shape, 0.2, 0)
    obs = np.where(mask, img, 0.0)
    solver = SolverConfig(epochs=200)
    gpl = inpaint(obs, mask, PatchConfig(method="gpl", K=2), solver)
    hpl = inpaint(obs, mask, PatchConfig(method="hpl", K=2), solver, initial=gpl)
    assert psnr(hpl, img) >= psnr(gpl, img) - 0.1


def test_psnr_examples():
    a = np.random.default_rng(0).random((8, 8)) * 0.8
    assert psnr(a, a) == math.inf and table_psnr(psnr(a, a)) == 99.0
    assert psnr(a, a + 0.1) == pytest.approx(20.0)
    b = np.random.default_rng(1).random((8, 8))
    assert psnr(a, b) == psnr(b, a)
    with pytest.raises(ValueError):
        psnr(a, a[:4])


def test_ssim_examples():
    rng = np.random.default_rng(0)
    a = gradient_edge_image(32)
    assert ssim(a, a) == pytest.approx(1.0)
    assert ssim(a, 1 - a) < 1
    noisy = np.clip(a + 0.01 * rng.standard_normal(a.shape), 0, 1)
    assert 0.9 < ssim(a, noisy) < 1
    with pytest.raises(ValueError):
        ssim(np.zeros((10, 20)), np.zeros((10, 20)))


@pytest.mark.parametrize("seed", range(4))
def test_ssim_matches_skimage(seed):
    rng = np.random.default_rng(seed)
    a = gradient_edge_image(40)
    b = np.clip(a + 0.1 * rng.standard_normal(a.shape), 0, 1)
    ref = structural_similarity(a, b, gaussian_weights=True, sigma=1.5,
                                use_sample_covariance=False, data_range=1.0)
    assert ssim(a, b) == pytest.approx(ref, abs=1e-10)


@pytest.mark.parametrize("binary", [True, False])
def test_pgm_round_trip(tmp_path, binary):
    img = np.random.default_rng(2).integers(0, 256, (7, 5)) / 255
    path = tmp_path / "a.pgm"
    write_pgm(path, img, binary=binary)
    np.testing.assert_allclose(read_pgm(path), img, atol=1e-15)
    assert path.read_bytes()[:2] == (b"P5" if binary else b"P2")


def test_pgm_errors(tmp_path):
    path = tmp_path / "bad.pgm"
    path.write_bytes(b"P3\n1 1\n255\n0\n")
    with pytest.raises(ParseError):
        read_pgm(path)
    path.write_bytes(b"P2\n2 2\n255\n0 1 2\n")
    with pytest.raises(ParseError):
        read_pgm(path)
    path.write_bytes(b"P2\n# comment\n1 1\n15\n15\n")
    assert read_pgm(path)[0, 0] == 1.0


def test_mask_csv_round_trip(tmp_path):
    mask = random_mask((6, 7), 0.3, 5)
    path = tmp_path / "m.csv"
    save_mask_csv(path, mask)
    np.testing.assert_array_equal(load_mask_csv(path, (6, 7)), mask)
    with pytest.raises(ParseError):
        load_mask_csv(path, (2, 2))
    path.write_text("")
    with pytest.raises(EmptyInputError):
        load_mask_csv(path, (6, 7))


def test_random_mask_count():
    mask = random_mask((64, 64), 0.2, 0)
    assert mask.sum() == round(0.2 * 4096)
    np.testing.assert_array_equal(mask, random_mask((64, 64), 0.2, 0))
    with pytest.raises(ValueError):
        random_mask((4, 4), 0, 0)
