"""Patch-based grayscale inpainting from sparse pixels.

Images are 2-d float arrays with intensities in ``[0, 1]``; masks are boolean
arrays of the same shape, ``True`` where the pixel is observed.  Pixel
``(i, j)`` is vertex ``i * N2 + j`` of the patch cloud.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.ndimage import gaussian_filter

from .geometry import EmptyInputError, LabelConstraints, ParseError, PointCloud
from .hypergraph import WeightScheme, build_structure
from .solver import SaddleProblem, SolverConfig, run

PSNR_TABLE_CAP = 99.0


@dataclass(frozen=True)
class PatchConfig:
    """Patch geometry and outer-loop settings.

    ``K=None`` means 15 outer iterations for ``gpl`` and 3 for ``hpl``.
    ``weights=None`` uses self-tuning weights with ``K0 = k``.
    """

    s1: int = 5
    s2: int = 5
    lam: float = 10.0
    k: int = 10
    K: int | None = None
    method: str = "hpl"
    p: float = 2.0
    weights: str | None = None

    def __post_init__(self):
        if self.s1 < 1 or self.s2 < 1 or self.s1 % 2 == 0 or self.s2 % 2 == 0:
            raise ValueError("patch sizes must be odd and positive")
        if self.lam < 0:
            raise ValueError("lambda must be non-negative")
        if self.k < 1:
            raise ValueError("k must be positive")
        if self.K is not None and self.K < 0:
            raise ValueError("K must be non-negative")
        if self.method not in ("gpl", "hpl"):
            raise ValueError(f"method must be 'gpl' or 'hpl', got {self.method!r}")

    @property
    def iterations(self):
        if self.K is not None:
            return self.K
        return 15 if self.method == "gpl" else 3

    @property
    def scheme(self):
        if self.weights is None:
            return WeightScheme("self_tuning", self.k)
        return WeightScheme.parse(self.weights)


def _check_image(img):
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 2 or img.size == 0:
        raise ValueError("image must be a non-empty 2-d array")
    if not np.all(np.isfinite(img)):
        raise ValueError("image intensities must be finite")
    return img


def mirror_extend(img, pad_i, pad_j):
    """Reflect-pad both axes without repeating the boundary pixel."""
    img = _check_image(img)
    if pad_i < 0 or pad_j < 0:
        raise ValueError("pads must be non-negative")
    if pad_i >= img.shape[0] or pad_j >= img.shape[1]:
        raise ValueError(f"pads ({pad_i}, {pad_j}) must be smaller than the image {img.shape}")
    return np.pad(img, ((pad_i, pad_i), (pad_j, pad_j)), mode="reflect")


def extract_patches(img, cfg):
    """One semilocal patch per pixel, row-major; returns a :class:`PointCloud`.

    Coordinates are the ``s1 x s2`` patch values followed, when
    ``cfg.lam > 0``, by ``lam * i / N1`` and ``lam * j / N2``.
    """
    img = _check_image(img)
    n1, n2 = img.shape
    ext = mirror_extend(img, cfg.s1 // 2, cfg.s2 // 2)
    win = sliding_window_view(ext, (cfg.s1, cfg.s2)).reshape(n1 * n2, cfg.s1 * cfg.s2)
    if cfg.lam > 0:
        ii, jj = np.meshgrid(np.arange(n1) / n1, np.arange(n2) / n2, indexing="ij")
        coords = cfg.lam * np.column_stack((ii.ravel(), jj.ravel()))
        win = np.hstack((win, coords))
    return PointCloud(win)


def pixel_of_vertex(v, shape):
    return divmod(int(v), shape[1])


def vertex_of_pixel(i, j, shape):
    return int(i) * shape[1] + int(j)


def mean_fill(observed, mask):
    out = np.array(observed, dtype=np.float64)
    out[~mask] = float(np.mean(out[mask]))
    return out


def _check_mask(mask, shape):
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != shape:
        raise ValueError(f"mask shape {mask.shape} differs from image shape {shape}")
    if not mask.any():
        raise EmptyInputError("the mask observes no pixel")
    return mask


def inpaint(observed, mask, cfg=None, solver_config=None, initial=None, callback=None):
    """Fill unobserved pixels by alternating patch-graph construction and solves.

    Parameters
    ----------
    observed : (N1, N2) array
        Only values where ``mask`` is true are read.
    mask : (N1, N2) bool array
    cfg : PatchConfig
    solver_config : SolverConfig, optional
    initial : (N1, N2) array, optional
        Starting estimate.  Without it, ``gpl`` starts from the mean fill and
        ``hpl`` from a full ``gpl`` run (15 iterations).
    callback : callable, optional
        ``callback(k, image)`` after each outer iteration.

    Returns
    -------
    ndarray
        Restored image clamped to ``[0, 1]``; observed pixels are copied
        through unchanged.
    """
    cfg = cfg or PatchConfig()
    solver_config = solver_config or SolverConfig(epochs=200, tol=1e-6)
    observed = _check_image(observed)
    mask = _check_mask(mask, observed.shape)
    obs_idx = np.flatnonzero(mask.ravel())
    obs_val = observed.ravel()[obs_idx]
    constraints = LabelConstraints(obs_idx, obs_val)

    if initial is not None:
        u = _check_image(initial).copy()
        if u.shape != observed.shape:
            raise ValueError("initial guess has the wrong shape")
    elif cfg.method == "hpl":
        u = inpaint(observed, mask, replace(cfg, method="gpl", K=None), solver_config)
    else:
        u = mean_fill(observed, mask)
    u.ravel()[obs_idx] = obs_val

    for it in range(cfg.iterations):
        if mask.all():
            break
        cloud = extract_patches(u, cfg)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            hg = build_structure(cloud, cfg.method, ("knn", cfg.k), cfg.scheme)
        problem = SaddleProblem(hg, constraints, cfg.p)
        sol, _ = run(problem, solver_config, u0=u.ravel())
        u = sol.reshape(observed.shape)
        u.ravel()[obs_idx] = obs_val
        if callback is not None:
            callback(it, np.clip(u, 0.0, 1.0))
    out = np.clip(u, 0.0, 1.0)
    out.ravel()[obs_idx] = obs_val
    return out


def psnr(a, b):
    """Peak signal-to-noise ratio in dB for intensities in ``[0, 1]``; ``inf`` if equal."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    mse = float(np.mean((a - b) ** 2))
    if mse == 0:
        return math.inf
    return 10.0 * math.log10(1.0 / mse)


def table_psnr(value):
    return min(value, PSNR_TABLE_CAP)


def ssim(a, b, sigma=1.5, data_range=1.0):
    """Mean structural similarity with an 11x11 Gaussian window.

    Local statistics use population (co)variances; the mean is taken over
    pixels whose window lies inside the image.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    if a.ndim != 2 or min(a.shape) < 11:
        raise ValueError("ssim needs 2-d images of at least 11x11 pixels")
    c1 = (0.01 * data_range) ** 2
    c2 = (0.03 * data_range) ** 2

    def blur(x):
        # truncate 3.5 at sigma 1.5 gives radius 5, an 11x11 window
        return gaussian_filter(x, sigma=sigma, truncate=3.5, mode="reflect")

    mu_a, mu_b = blur(a), blur(b)
    var_a = blur(a * a) - mu_a ** 2
    var_b = blur(b * b) - mu_b ** 2
    cov = blur(a * b) - mu_a * mu_b
    num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
    den = (mu_a ** 2 + mu_b ** 2 + c1) * (var_a + var_b + c2)
    s = num / den
    r = 5
    return float(np.mean(s[r:-r, r:-r]))


# ---- files -----------------------------------------------------------------


def _pgm_tokens(data, count, pos):
    tokens = []
    n = len(data)
    while len(tokens) < count:
        while pos < n and data[pos:pos + 1].isspace():
            pos += 1
        if pos < n and data[pos:pos + 1] == b"#":
            while pos < n and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < n and not data[pos:pos + 1].isspace() and data[pos:pos + 1] != b"#":
            pos += 1
        if start == pos:
            raise ParseError("truncated PGM header")
        tokens.append(data[start:pos])
    return tokens, pos


def read_pgm(path):
    """Read a P2 or P5 PGM and scale intensities to ``[0, 1]`` by the max value."""
    data = Path(path).read_bytes()
    magic = data[:2]
    if magic not in (b"P2", b"P5"):
        raise ParseError(f"{path}: not a P2/P5 PGM file")
    (w, h, maxval), pos = _pgm_tokens(data, 3, 2)
    try:
        w, h, maxval = int(w), int(h), int(maxval)
    except ValueError:
        raise ParseError(f"{path}: bad PGM header") from None
    if w < 1 or h < 1 or not 0 < maxval < 65536:
        raise ParseError(f"{path}: bad PGM dimensions or max value")
    if magic == b"P5":
        raw = data[pos + 1:]
        dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
        need = w * h * dtype.itemsize
        if len(raw) < need:
            raise ParseError(f"{path}: expected {w * h} pixels")
        vals = np.frombuffer(raw[:need], dtype=dtype).astype(np.float64)
    else:
        toks = data[pos:].split()
        if len(toks) < w * h:
            raise ParseError(f"{path}: expected {w * h} pixels, found {len(toks)}")
        try:
            vals = np.array([int(t) for t in toks[:w * h]], dtype=np.float64)
        except ValueError:
            raise ParseError(f"{path}: non-integer pixel value") from None
    if np.any(vals > maxval):
        raise ParseError(f"{path}: pixel above max value {maxval}")
    return vals.reshape(h, w) / maxval


def write_pgm(path, img, binary=True):
    """Write an 8-bit PGM; intensities are clamped to ``[0, 1]`` and rounded."""
    img = _check_image(img)
    q = np.rint(np.clip(img, 0.0, 1.0) * 255).astype(np.uint8)
    h, w = q.shape
    with open(Path(path), "wb") as fh:
        if binary:
            fh.write(f"P5\n{w} {h}\n255\n".encode())
            fh.write(q.tobytes())
        else:
            fh.write(f"P2\n{w} {h}\n255\n".encode())
            for row in q:
                fh.write((" ".join(str(v) for v in row) + "\n").encode())


def load_mask_csv(path, shape):
    """Mask from ``i,j`` rows of observed pixel coordinates."""
    mask = np.zeros(shape, dtype=bool)
    with open(Path(path), newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 2:
                raise ParseError("expected 'i,j'", lineno)
            try:
                i, j = int(row[0]), int(row[1])
            except ValueError as exc:
                raise ParseError(str(exc), lineno) from None
            if not (0 <= i < shape[0] and 0 <= j < shape[1]):
                raise ParseError(f"pixel ({i}, {j}) outside a {shape} image", lineno)
            mask[i, j] = True
    if not mask.any():
        raise EmptyInputError(f"{path}: no observed pixels")
    return mask


def save_mask_csv(path, mask):
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        for i, j in np.argwhere(mask):
            w.writerow([int(i), int(j)])


def random_mask(shape, rate, seed):
    """Observe ``round(rate * N1 * N2)`` pixels (at least one) chosen uniformly."""
    if not 0 < rate <= 1:
        raise ValueError("sample rate must lie in (0, 1]")
    n = shape[0] * shape[1]
    m = max(1, int(round(rate * n)))
    rng = np.random.default_rng(seed)
    mask = np.zeros(n, dtype=bool)
    mask[rng.choice(n, size=m, replace=False)] = True
    return mask.reshape(shape)


def gradient_edge_image(size=64):
    """Synthetic test image: a horizontal ramp with a brighter disc-shaped step."""
    n = int(size)
    ii, jj = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    img = 0.15 + 0.5 * jj / max(n - 1, 1)
    c = (n - 1) / 2
    inside = (ii - c) ** 2 + (jj - c) ** 2 <= (0.3 * n) ** 2
    img[inside] += 0.3
    return np.clip(img, 0.0, 1.0)
