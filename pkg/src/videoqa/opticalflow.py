"""Integer block-matching optical flow.

For every pixel the displacement ``(dx, dy)`` with ``|dx|, |dy| <= radius``
minimising the sum of absolute luminance differences over a square window
is selected. Luminance is quantised to integers (``round(4096 * Y)``) so the
sums are exact and ties are genuine. Candidates are visited in order of
``(dx^2 + dy^2, dy, dx)`` and only a strictly smaller cost replaces the
current best, which implements the tie-break towards the smallest and then
lexicographically first displacement. Window sums near the border use only
the in-image part of the window; displaced samples are edge-clamped.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ContractError
from .scenesim import FLOW_MAGIC, Clip, _pack_frames, _read, _unpack_frames

RADIUS = 3
WINDOW = 7
LUMA = np.array([0.299, 0.587, 0.114])
LUMA_LEVELS = 4096


@dataclass
class FlowField:
    H: int
    W: int
    vectors: np.ndarray  # H x W x 2, (dx, dy)

    def __eq__(self, other):
        return isinstance(other, FlowField) and np.array_equal(self.vectors, other.vectors)


def quantized_luminance(frame: np.ndarray) -> np.ndarray:
    return np.rint(np.asarray(frame, dtype=np.float64) @ LUMA * LUMA_LEVELS).astype(np.int64)


def _box_sum(img: np.ndarray, half: int) -> np.ndarray:
    H, W = img.shape
    c = np.zeros((H + 1, W + 1), dtype=np.int64)
    c[1:, 1:] = img.cumsum(0).cumsum(1)
    r0 = np.clip(np.arange(H) - half, 0, H)
    r1 = np.clip(np.arange(H) + half + 1, 0, H)
    c0 = np.clip(np.arange(W) - half, 0, W)
    c1 = np.clip(np.arange(W) + half + 1, 0, W)
    return c[r1][:, c1] - c[r0][:, c1] - c[r1][:, c0] + c[r0][:, c0]


def candidate_order(radius: int = RADIUS) -> list[tuple[int, int]]:
    cands = [(dy, dx) for dy in range(-radius, radius + 1) for dx in range(-radius, radius + 1)]
    return sorted(cands, key=lambda d: (d[0] ** 2 + d[1] ** 2, d[0], d[1]))


def estimate_flow(frame_a: np.ndarray, frame_b: np.ndarray, radius: int = RADIUS,
                  window: int = WINDOW) -> FlowField:
    a, b = np.asarray(frame_a), np.asarray(frame_b)
    if a.shape != b.shape or a.ndim != 3 or a.shape[2] != 3:
        raise ContractError(f"frame shapes {a.shape} and {b.shape} must match and be HxWx3")
    if a.size and (min(a.min(), b.min()) < 0 or max(a.max(), b.max()) > 1):
        raise ContractError("frame values outside [0, 1]")
    H, W = a.shape[:2]
    la, lb = quantized_luminance(a), quantized_luminance(b)
    padded = np.pad(lb, radius, mode="edge")
    best = np.full((H, W), np.iinfo(np.int64).max, dtype=np.int64)
    flow = np.zeros((H, W, 2), dtype=np.float32)
    for dy, dx in candidate_order(radius):
        shifted = padded[radius + dy:radius + dy + H, radius + dx:radius + dx + W]
        sad = _box_sum(np.abs(la - shifted), window // 2)
        better = sad < best
        best[better] = sad[better]
        flow[better] = (dx, dy)
    return FlowField(H, W, flow)


def flow_clip(clip: Clip, radius: int = RADIUS) -> list[FlowField]:
    if clip.F < 2:
        raise ContractError(f"flow needs at least 2 frames, got {clip.F}")
    return [estimate_flow(clip.pixels[f], clip.pixels[f + 1], radius) for f in range(clip.F - 1)]


def flow_stream(fields: list[FlowField], radius: int = RADIUS) -> np.ndarray:
    """Stack fields into the network's 2 x (F-1) x H x W input, scaled to [-1, 1]."""
    v = np.stack([f.vectors for f in fields])
    return np.ascontiguousarray(v.transpose(3, 0, 1, 2) / radius, dtype=np.float32)


def save_flow(fields: list[FlowField], path) -> None:
    Path(path).write_bytes(_pack_frames(FLOW_MAGIC, np.stack([f.vectors for f in fields])))


def load_flow(path) -> list[FlowField]:
    v = _unpack_frames(_read(path), FLOW_MAGIC, 2, str(path))
    return [FlowField(v.shape[1], v.shape[2], v[i]) for i in range(v.shape[0])]
