"""Image pipelines on top of the mixture transport machinery.

Color transfer fits mixtures to the 3D color clouds of two images and
pushes every pixel of the first through an assignment map of the
optimal plan. Texture synthesis draws a stationary Gaussian field with
the exemplar's spot-noise statistics, then transports its patch
distribution onto the exemplar's patch distribution and recomposes by
averaging overlapping patches.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from PIL import Image as PILImage

from .assignment import transport_points
from .gmm import PointCloud, fit_em
from .mw2 import mw2

MAX_FIT_POINTS = 300_000
# absolute floor for the EM covariance ridge so that constant clouds
# still produce invertible component covariances
_COV_REG_FLOOR = 1e-12


def _check_image(img) -> np.ndarray:
    arr = np.asarray(img, dtype=float)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ValueError(f"expected an (H, W, 3) image array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("image values must be finite")
    return arr


def load_image(path) -> np.ndarray:
    """8-bit RGB PNG (or compatible) to an (H, W, 3) float array in [0, 1].

    Images with an alpha channel are rejected.
    """
    with PILImage.open(path) as pil:
        if pil.mode in ("RGBA", "LA", "PA") or (
            pil.mode == "P" and "transparency" in pil.info
        ):
            raise ValueError(f"alpha channel not supported (mode {pil.mode})")
        rgb = pil.convert("RGB")
        arr = np.asarray(rgb, dtype=float) / 255.0
    return np.clip(arr, 0.0, 1.0)


def save_image(path, img) -> None:
    """Clamp to [0, 1] and write an 8-bit RGB image."""
    arr = np.clip(_check_image(img), 0.0, 1.0)
    data = np.round(arr * 255.0).astype(np.uint8)
    PILImage.fromarray(data, mode="RGB").save(path)


@dataclass(frozen=True)
class PatchSet:
    """Dense square patches of an image, one row per patch.

    Rows are laid out in raster order over (dy, dx) with the channel
    fastest, i.e. plain ``patch.reshape(-1)`` of a (p, p, 3) window.
    grid_shape is the (rows, cols) arrangement of the patch origins.
    """

    patch_size: int
    patches: np.ndarray
    grid_shape: tuple[int, int]

    def __post_init__(self):
        rows, cols = self.grid_shape
        if self.patches.shape != (rows * cols, 3 * self.patch_size**2):
            raise ValueError("patch matrix does not match grid shape and patch size")


def extract_patches(img, patch_size: int) -> PatchSet:
    """All (p, p) patches of an RGB image, extracted densely."""
    arr = _check_image(img)
    p = int(patch_size)
    h, w = arr.shape[:2]
    if p < 1 or h < p or w < p:
        raise ValueError(f"image {h}x{w} too small for {p}x{p} patches")
    windows = np.lib.stride_tricks.sliding_window_view(arr, (p, p), axis=(0, 1))
    # (rows, cols, 3, p, p) -> (rows, cols, p, p, 3) -> flat rows
    windows = windows.transpose(0, 1, 3, 4, 2)
    rows, cols = windows.shape[:2]
    patches = windows.reshape(rows * cols, p * p * 3).copy()
    return PatchSet(p, patches, (rows, cols))


def recompose_patches(patch_set: PatchSet, image_shape: tuple[int, int]) -> np.ndarray:
    """Average overlapping patches back into an (H, W, 3) image.

    With unmodified patches this reproduces the source image exactly.
    """
    p = patch_set.patch_size
    rows, cols = patch_set.grid_shape
    h, w = image_shape
    if rows != h - p + 1 or cols != w - p + 1:
        raise ValueError("grid shape does not match the target image shape")
    grid = patch_set.patches.reshape(rows, cols, p, p, 3)
    acc = np.zeros((h, w, 3))
    count = np.zeros((h, w, 1))
    for dy in range(p):
        for dx in range(p):
            acc[dy:dy + rows, dx:dx + cols] += grid[:, :, dy, dx, :]
            count[dy:dy + rows, dx:dx + cols] += 1.0
    return acc / count


def adsn(img, seed: int) -> np.ndarray:
    """Asymptotic discrete spot noise field of an image.

    One standard normal white-noise field is convolved (circularly, via
    the frequency domain) with the normalized centered image and shared
    across the three channels; the channel means are added back. The
    output is intentionally not clamped.
    """
    arr = _check_image(img)
    h, w = arr.shape[:2]
    mean = arr.mean(axis=(0, 1))
    spot = (arr - mean) / np.sqrt(h * w)
    noise = np.random.default_rng(seed).standard_normal((h, w))
    noise_f = np.fft.rfft2(noise)
    out = np.empty_like(arr)
    for c in range(3):
        conv = np.fft.irfft2(np.fft.rfft2(spot[:, :, c]) * noise_f, s=(h, w))
        out[:, :, c] = mean[c] + conv
    return out


def _child_seeds(seed: int, count: int) -> list[int]:
    state = np.random.SeedSequence(seed).generate_state(count)
    return [int(s) for s in state]


def _fit_cloud(points: np.ndarray, k: int, fit_seed: int, sub_seed: int):
    """Subsample a cloud to the fit-time guard and run EM with a floored ridge."""
    if points.shape[0] > MAX_FIT_POINTS:
        rng = np.random.default_rng(sub_seed)
        idx = np.sort(rng.choice(points.shape[0], MAX_FIT_POINTS, replace=False))
        points = points[idx]
    reg = max(1e-6 * float(points.var(axis=0).mean()), _COV_REG_FLOOR)
    return fit_em(PointCloud(points), k, fit_seed, cov_reg=reg)


def color_transfer(u0, u1, k: int = 10, map_kind: str = "mean",
                   seed: int = 0) -> np.ndarray:
    """Recolor u0 with the palette of u1.

    Fits k-component mixtures to both color clouds, solves the mixture
    transport plan between them and applies the chosen assignment map to
    every pixel of u0. map_kind="mean" is deterministic; "rand" is
    deterministic given the seed.

    The mixture fits are deterministic models of the two inputs (fixed
    internal seeds), so the "mean" output has no seed dependence at all
    and the seed only drives the per-pixel draws of "rand". Both clouds
    share the fitting seeds, so transferring an image onto itself
    returns it unchanged (identical mixtures give the diagonal plan,
    whose maps are identities).
    """
    src = _check_image(u0)
    dst = _check_image(u1)

    gmm_src = _fit_cloud(src.reshape(-1, 3), k, fit_seed=0, sub_seed=0)
    gmm_dst = _fit_cloud(dst.reshape(-1, 3), k, fit_seed=0, sub_seed=0)
    _, plan = mw2(gmm_src, gmm_dst)
    moved = transport_points(plan, src.reshape(-1, 3), kind=map_kind, seed=seed)
    return np.clip(moved.reshape(src.shape), 0.0, 1.0)


def texture_synthesize(u, k: int = 10, patch_size: int = 3,
                       seed: int = 0) -> np.ndarray:
    """Synthesize a texture with the exemplar's patch statistics.

    Draws the spot-noise field of the exemplar, fits mixtures to the
    patch clouds of the field (source) and of the exemplar (target),
    transports every field patch through the conditional-expectation map
    and averages the overlapping transported patches per pixel.
    """
    arr = _check_image(u)
    adsn_seed, sub_seed, fit_seed = _child_seeds(seed, 3)

    field = adsn(arr, adsn_seed)
    target_patches = extract_patches(arr, patch_size)
    source_patches = extract_patches(field, patch_size)

    gmm_src = _fit_cloud(source_patches.patches, k, fit_seed, sub_seed)
    gmm_dst = _fit_cloud(target_patches.patches, k, fit_seed, sub_seed)
    _, plan = mw2(gmm_src, gmm_dst)

    moved = transport_points(plan, source_patches.patches, kind="mean")
    moved_set = PatchSet(source_patches.patch_size, moved, source_patches.grid_shape)
    out = recompose_patches(moved_set, arr.shape[:2])
    return np.clip(out, 0.0, 1.0)
