"""Binary PPM heatmap of a reordered matrix (small values dark)."""
from pathlib import Path

import numpy as np

from seriation.core import Dissimilarity, TotalOrder, as_order


def heatmap_pixels(d: Dissimilarity, order: TotalOrder) -> np.ndarray:
    """Grey levels 0..255 of the permuted matrix, min-max normalised."""
    perm = np.asarray(as_order(order).perm, dtype=int)
    block = d.square[np.ix_(perm, perm)]
    lo, hi = float(block.min()), float(block.max())
    if hi == lo:
        return np.zeros(block.shape, dtype=np.uint8)
    return np.rint((block - lo) / (hi - lo) * 255).astype(np.uint8)


def render_heatmap(d: Dissimilarity, order: TotalOrder) -> bytes:
    grey = heatmap_pixels(d, order)
    header = f"P6\n{d.n} {d.n}\n255\n".encode("ascii")
    return header + np.repeat(grey[:, :, None], 3, axis=2).tobytes()


def emit_heatmap(d: Dissimilarity, order: TotalOrder, path: str | Path) -> Path:
    path = Path(path)
    path.write_bytes(render_heatmap(d, order))
    return path
