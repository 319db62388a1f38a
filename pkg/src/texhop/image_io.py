"""PNG image I/O and training-patch extraction.

Images are 8-bit, one or three channels. Patches flow through the rest of
the package as float64 arrays of shape (H, W, C) in raw 0-255 range; the
DC/bias machinery of the block transforms absorbs any offset, so no
normalization is applied here.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np
from PIL import Image as PILImage, UnidentifiedImageError

from .errors import FormatError

__all__ = ["Image", "load_image", "save_image", "extract_patches"]


@dataclass(frozen=True)
class Image:
    """An 8-bit image with row-major (H, W, C) sample layout."""

    data: np.ndarray  # uint8, shape (H, W, C)

    def __post_init__(self):
        d = self.data
        if d.ndim != 3 or d.shape[2] not in (1, 3):
            raise ValueError(f"image data must be (H, W, C) with C in {{1, 3}}, got {d.shape}")
        if d.dtype != np.uint8:
            raise ValueError(f"image data must be uint8, got {d.dtype}")

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]


def load_image(path) -> Image:
    """Load an 8-bit RGB or grayscale PNG.

    Raises OSError for unreadable files and FormatError for anything that
    is not a decodable 8-bit RGB/grayscale PNG.
    """
    if not os.path.exists(path):
        raise FileNotFoundError(f"no such file: {path}")
    try:
        with PILImage.open(path) as im:
            if im.format != "PNG":
                raise FormatError(f"{path}: expected a PNG file, got {im.format or 'unknown format'}")
            if im.mode not in ("RGB", "L"):
                raise FormatError(f"{path}: unsupported PNG mode {im.mode!r} (need 8-bit RGB or L)")
            arr = np.asarray(im, dtype=np.uint8)
    except UnidentifiedImageError as exc:
        raise FormatError(f"{path}: not a decodable image") from exc
    except OSError as exc:
        # PIL raises OSError for truncated/corrupt streams
        raise FormatError(f"{path}: corrupt or truncated PNG ({exc})") from exc
    if arr.ndim == 2:
        arr = arr[:, :, None]
    return Image(np.ascontiguousarray(arr))


def save_image(img: Image, path) -> None:
    """Write ``img`` as a PNG; the file round-trips bit-exactly through load_image."""
    data = img.data[:, :, 0] if img.channels == 1 else img.data
    mode = "L" if img.channels == 1 else "RGB"
    PILImage.fromarray(data, mode=mode).save(path, format="PNG")


def extract_patches(
    img: Image,
    patch_size: int,
    mode: str = "strided",
    *,
    stride: int = 2,
    count: int | None = None,
    seed: int | None = None,
) -> np.ndarray:
    """Extract square training patches as a float64 array of shape (n, P, P, C).

    ``mode="strided"`` enumerates top-left corners at multiples of ``stride``
    in scan order; ``mode="random"`` draws ``count`` corners uniformly (with
    replacement) from the given ``seed``. Pixel values are cast to float64
    without rescaling.
    """
    P = int(patch_size)
    H, W = img.height, img.width
    if P <= 0:
        raise ValueError(f"patch_size must be positive, got {patch_size}")
    if P > min(H, W):
        raise ValueError(f"patch_size {P} exceeds image extent {H}x{W}")

    data = img.data.astype(np.float64)
    if mode == "strided":
        if stride <= 0:
            raise ValueError(f"stride must be positive, got {stride}")
        ys = range(0, H - P + 1, stride)
        xs = range(0, W - P + 1, stride)
        out = np.empty((len(ys) * len(xs), P, P, img.channels))
        i = 0
        for y in ys:
            for x in xs:
                out[i] = data[y : y + P, x : x + P]
                i += 1
        return out
    if mode == "random":
        if count is None or count < 0:
            raise ValueError("random mode needs count >= 0")
        rng = np.random.default_rng(seed)
        ys = rng.integers(0, H - P + 1, size=count)
        xs = rng.integers(0, W - P + 1, size=count)
        out = np.empty((count, P, P, img.channels))
        for i, (y, x) in enumerate(zip(ys, xs)):
            out[i] = data[y : y + P, x : x + P]
        return out
    raise ValueError(f"unknown extraction mode {mode!r}")
