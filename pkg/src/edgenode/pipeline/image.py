"""Camera pre-processing: bilinear demosaic, gray-world white balance, bilinear downscale."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import convolve


class ImageError(ValueError):
    pass


# (row, col) of the R, B samples inside the 2x2 tile; G fills the other two
BAYER_PATTERNS = {
    "RGGB": ((0, 0), (1, 1)),
    "BGGR": ((1, 1), (0, 0)),
    "GRBG": ((0, 1), (1, 0)),
    "GBRG": ((1, 0), (0, 1)),
}

AWB_GAIN_MIN = 0.25
AWB_GAIN_MAX = 4.0


@dataclass(frozen=True)
class RawBayerImage:
    mosaic: np.ndarray
    pattern: str = "RGGB"

    def __post_init__(self):
        m = np.asarray(self.mosaic)
        if m.ndim != 2:
            raise ImageError(f"mosaic must be a single plane, got shape {m.shape}")
        h, w = m.shape
        if h < 2 or w < 2 or h % 2 or w % 2:
            raise ImageError(f"Bayer mosaic dimensions must be even and >= 2, got {w}x{h}")
        if self.pattern not in BAYER_PATTERNS:
            raise ImageError(f"unknown Bayer pattern {self.pattern!r}")
        if m.dtype != np.uint8:
            if m.size and (m.min() < 0 or m.max() > 255):
                raise ImageError("mosaic samples must be 8-bit")
            m = m.astype(np.uint8)
        object.__setattr__(self, "mosaic", m)

    @property
    def height(self) -> int:
        return self.mosaic.shape[0]

    @property
    def width(self) -> int:
        return self.mosaic.shape[1]

    def masks(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return bayer_masks(self.height, self.width, self.pattern)


@dataclass(frozen=True)
class RgbImage:
    """Planar 8-bit RGB, shape (3, height, width)."""

    planes: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.planes)
        if p.ndim != 3 or p.shape[0] != 3:
            raise ImageError(f"expected 3 planes, got shape {p.shape}")
        if p.shape[1] == 0 or p.shape[2] == 0:
            raise ImageError("empty image")
        if p.dtype != np.uint8:
            if p.min() < 0 or p.max() > 255:
                raise ImageError("samples must lie in [0, 255]")
            p = p.astype(np.uint8)
        object.__setattr__(self, "planes", p)

    @property
    def height(self) -> int:
        return self.planes.shape[1]

    @property
    def width(self) -> int:
        return self.planes.shape[2]

    def channel_means(self) -> np.ndarray:
        return self.planes.reshape(3, -1).mean(axis=1)


def bayer_masks(h: int, w: int, pattern: str) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    if pattern not in BAYER_PATTERNS:
        raise ImageError(f"unknown Bayer pattern {pattern!r}")
    (ry, rx), (by, bx) = BAYER_PATTERNS[pattern]
    yy, xx = np.mgrid[0:h, 0:w]
    r = ((yy % 2) == ry) & ((xx % 2) == rx)
    b = ((yy % 2) == by) & ((xx % 2) == bx)
    return r, ~(r | b), b


_K_RB = np.array([[1, 2, 1], [2, 4, 2], [1, 2, 1]], dtype=np.float64)
_K_G = np.array([[0, 1, 0], [1, 4, 1], [0, 1, 0]], dtype=np.float64)


def debayer(raw: RawBayerImage) -> RgbImage:
    """Bilinear demosaic; borders use mirror reflection, which keeps CFA parity."""
    mosaic = raw.mosaic.astype(np.float64)
    r_mask, g_mask, b_mask = raw.masks()
    planes = []
    for mask, kernel in ((r_mask, _K_RB), (g_mask, _K_G), (b_mask, _K_RB)):
        # integer kernel sums / 4 are exact in float64, so rint sees true ties
        plane = convolve(mosaic * mask, kernel, mode="mirror") / 4.0
        planes.append(plane)
    out = np.clip(np.rint(np.stack(planes)), 0, 255).astype(np.uint8)
    return RgbImage(out)


def white_balance_gains(img: RgbImage) -> np.ndarray:
    """Gray-world gains: mean of all channel means over each channel mean."""
    means = img.channel_means()
    ref = means.mean()
    if ref == 0:
        return np.ones(3)
    with np.errstate(divide="ignore"):
        gains = np.where(means > 0, ref / np.where(means > 0, means, 1.0), AWB_GAIN_MAX)
    return np.clip(gains, AWB_GAIN_MIN, AWB_GAIN_MAX)


def auto_white_balance(img: RgbImage) -> RgbImage:
    gains = white_balance_gains(img)
    out = np.rint(img.planes.astype(np.float64) * gains[:, None, None])
    return RgbImage(np.clip(out, 0, 255).astype(np.uint8))


def _resample_axis(n_src: int, n_dst: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    # half-pixel centres: dst i samples src (i + 0.5) * n_src / n_dst - 0.5
    pos = (np.arange(n_dst) + 0.5) * (n_src / n_dst) - 0.5
    pos = np.clip(pos, 0, n_src - 1)
    i0 = np.floor(pos).astype(np.intp)
    i1 = np.minimum(i0 + 1, n_src - 1)
    return i0, i1, pos - i0


def resize_bilinear(planes: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Bilinear resample of (C, H, W) float planes; no rounding."""
    _, h, w = planes.shape
    y0, y1, fy = _resample_axis(h, out_h)
    x0, x1, fx = _resample_axis(w, out_w)
    rows = planes[:, y0, :] * (1 - fy)[None, :, None] + planes[:, y1, :] * fy[None, :, None]
    return rows[:, :, x0] * (1 - fx) + rows[:, :, x1] * fx


def downscale(img: RgbImage, side: int) -> RgbImage:
    """Bilinear resample to a square ``side`` x ``side`` image (aspect ratio not kept)."""
    if side <= 0 or side > min(img.width, img.height):
        raise ImageError(f"side {side} must be in [1, {min(img.width, img.height)}]")
    out = resize_bilinear(img.planes.astype(np.float64), side, side)
    return RgbImage(np.clip(np.rint(out), 0, 255).astype(np.uint8))


def preprocess(raw: RawBayerImage, side: int) -> RgbImage:
    return downscale(auto_white_balance(debayer(raw)), side)
