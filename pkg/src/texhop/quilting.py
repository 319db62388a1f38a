"""Patch quilting: raster placement with overlap matching and seam cuts.

Patches are placed left-to-right, top-to-bottom. Each placement scores the
whole candidate pool against the already-placed L-shaped overlap, draws
uniformly among candidates within (1 + tolerance) of the best score, and
merges the overlap along minimum-error seams. No blending: every output
pixel is copied verbatim from exactly one patch.

The scoring and seam inner loops live in a compiled extension when it built
successfully; set TEXHOP_NO_EXT=1 to force the numpy fallback.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from .image_io import Image

if os.environ.get("TEXHOP_NO_EXT"):
    from . import _quilt_kernels_py as _kernels
else:
    try:
        from . import _quilt_kernels as _kernels
    except ImportError:
        from . import _quilt_kernels_py as _kernels

BACKEND = _kernels.BACKEND

__all__ = ["QuiltConfig", "SeamCut", "PlacementRecord", "quilt", "min_error_cut", "BACKEND"]


@dataclass(frozen=True)
class QuiltConfig:
    """Parameters of one quilting run."""

    out_height: int
    out_width: int
    patch_size: int
    overlap: int | None = None  # None -> patch_size/6, rounded
    tolerance: float = 0.1
    seed: int = 0

    def resolved_overlap(self) -> int:
        ov = self.overlap if self.overlap is not None else round(self.patch_size / 6)
        return int(ov)

    def validate(self) -> None:
        ov = self.resolved_overlap()
        if not 0 < ov < self.patch_size:
            raise ValueError(f"overlap {ov} must satisfy 0 < overlap < patch size {self.patch_size}")
        if self.tolerance < 0:
            raise ValueError(f"tolerance must be >= 0, got {self.tolerance}")
        if self.out_height < self.patch_size or self.out_width < self.patch_size:
            raise ValueError(
                f"output {self.out_height}x{self.out_width} smaller than patch {self.patch_size}"
            )


@dataclass
class SeamCut:
    """A monotone minimum-error path through an overlap error surface.

    For a vertical cut, indices[r] is the column where row r switches from
    the existing pixels to the new patch; horizontal cuts store one row index
    per column. Adjacent indices differ by at most 1.
    """

    orientation: str  # "vertical" | "horizontal"
    indices: np.ndarray
    cost: float


@dataclass
class PlacementRecord:
    """Debug trace of one placement, enough to audit seam decisions."""

    y: int
    x: int
    patch_index: int
    left_surface: np.ndarray | None = None
    top_surface: np.ndarray | None = None
    left_cut: np.ndarray | None = None
    top_cut: np.ndarray | None = None
    candidates: np.ndarray = field(default_factory=lambda: np.empty(0, np.int64))


def min_error_cut(errors: np.ndarray, orientation: str = "vertical") -> SeamCut:
    """Minimum cumulative-error monotone path via dynamic programming.

    Ties break toward the smaller index at every step, so among all minimal
    paths the lexicographically smallest one is returned.
    """
    E = np.ascontiguousarray(errors, dtype=np.float64)
    if E.ndim != 2 or E.size == 0:
        raise ValueError(f"expected a nonempty 2-d error surface, got shape {E.shape}")
    if np.any(E < 0):
        raise ValueError("error surface must be nonnegative")
    if orientation == "vertical":
        idx = _kernels.seam_path(E)
        cost = float(E[np.arange(E.shape[0]), idx].sum())
    elif orientation == "horizontal":
        idx = _kernels.seam_path(np.ascontiguousarray(E.T))
        cost = float(E[idx, np.arange(E.shape[1])].sum())
    else:
        raise ValueError(f"orientation must be 'vertical' or 'horizontal', got {orientation!r}")
    return SeamCut(orientation=orientation, indices=idx, cost=cost)


def _positions(total: int, patch: int, step: int) -> list[int]:
    pos = list(range(0, total - patch + 1, step))
    if pos[-1] != total - patch:
        pos.append(total - patch)  # clamp the last placement inside the canvas
    return pos


def quilt(
    patches,
    cfg: QuiltConfig,
    trace: list[PlacementRecord] | None = None,
) -> Image:
    """Assemble an output image from a patch pool.

    ``patches`` is a list or array of (P, P, C) tensors; values are rounded
    and clipped to uint8 before any scoring, so the output pixels are an
    exact subset of the (quantized) input pixels. Pass ``trace`` to collect
    per-placement records for auditing.
    """
    cfg.validate()
    arr = np.asarray(patches, dtype=np.float64)
    if arr.ndim == 3:
        arr = arr[None]
    if arr.ndim != 4 or arr.shape[0] == 0:
        raise ValueError("need at least one patch of shape (P, P, C)")
    n, ph, pw, C = arr.shape
    P = cfg.patch_size
    if ph != P or pw != P:
        raise ValueError(f"patches are {ph}x{pw} but config says {P}x{P}")

    q = np.clip(np.rint(arr), 0, 255).astype(np.uint8)
    pool = np.ascontiguousarray(q, dtype=np.float64)
    ov = cfg.resolved_overlap()
    tol = cfg.tolerance
    rng = np.random.default_rng(cfg.seed)
    canvas = np.zeros((cfg.out_height, cfg.out_width, C), dtype=np.uint8)
    step = P - ov

    for y in _positions(cfg.out_height, P, step):
        for x in _positions(cfg.out_width, P, step):
            use_left = x > 0
            use_top = y > 0
            left = np.ascontiguousarray(canvas[y : y + P, x : x + ov], dtype=np.float64)
            top = np.ascontiguousarray(canvas[y : y + ov, x : x + P], dtype=np.float64)
            if use_left or use_top:
                scores = _kernels.overlap_ssd(pool, left, top, use_left, use_top, ov)
                cands = np.flatnonzero(scores <= (1.0 + tol) * scores.min())
            else:
                cands = np.arange(n)
            pick = int(cands[rng.integers(len(cands))])
            patch = q[pick]
            rec = PlacementRecord(y=y, x=x, patch_index=pick, candidates=cands)

            mask = np.ones((P, P), dtype=bool)
            if use_left:
                surface = ((pool[pick, :, :ov] - left) ** 2).sum(axis=2)
                cut = _kernels.seam_path(surface)
                mask[:, :ov] &= np.arange(ov)[None, :] >= cut[:, None]
                rec.left_surface, rec.left_cut = surface, cut
            if use_top:
                surface = ((pool[pick, :ov, :] - top) ** 2).sum(axis=2)
                cut = _kernels.seam_path(np.ascontiguousarray(surface.T))
                mask[:ov, :] &= np.arange(ov)[:, None] >= cut[None, :]
                rec.top_surface, rec.top_cut = surface, cut

            region = canvas[y : y + P, x : x + P]
            canvas[y : y + P, x : x + P] = np.where(mask[:, :, None], patch, region)
            if trace is not None:
                trace.append(rec)

    return Image(canvas)
