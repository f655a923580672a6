"""Stride-S heatmaps, peak decoding, and a template-matching detector that emits them."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, NamedTuple

import numpy as np
from scipy.ndimage import maximum_filter
from scipy.signal import fftconvolve

from vsrl.core import ContractError, Observation

STRIDE = 4
TAU = 0.5
# 3x3 neighbours that precede a cell in row-major order
_EARLIER = ((-1, -1), (-1, 0), (-1, 1), (0, -1))


class Detection(NamedTuple):
    """A decoded object centre in original-image pixels: (class, row, col)."""

    class_id: int
    row: float
    col: float

    @property
    def x(self) -> float:
        return self.col

    @property
    def y(self) -> float:
        return self.row


@dataclass(frozen=True)
class Heatmap:
    """``values`` has shape (H//S, W//S, N+2): N class-probability channels,
    then the row and column offsets of each cell's centre inside its S x S block."""

    values: np.ndarray
    stride: int = STRIDE

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 3 or v.shape[2] < 3:
            raise ContractError("heatmap must be (h, w, N+2) with N >= 1")
        if np.any(v[..., :-2] < 0) or np.any(v[..., :-2] > 1):
            raise ContractError("class probabilities must lie in [0, 1]")
        if np.any(v[..., -2:] < 0) or np.any(v[..., -2:] >= self.stride):
            raise ContractError(f"offsets must lie in [0, {self.stride})")
        object.__setattr__(self, "values", v)

    @property
    def n_classes(self) -> int:
        return self.values.shape[2] - 2

    @classmethod
    def from_parts(cls, probs: np.ndarray, offsets: np.ndarray | None = None, stride: int = STRIDE) -> "Heatmap":
        probs = np.asarray(probs, dtype=np.float64)
        if probs.ndim == 2:
            probs = probs[..., None]
        if offsets is None:
            offsets = np.zeros(probs.shape[:2] + (2,))
        return cls(np.concatenate([probs, offsets], axis=2), stride)


def decode_peaks(z: Heatmap, tau: float = TAU) -> list[Detection]:
    """Detections at 3x3 local maxima (zero padding) scoring at least ``tau``.

    Equal-valued neighbours on a plateau would all pass the max-pool test; only
    the first in row-major order is kept. Output is ordered by class, then
    row-major cell order.
    """
    v = z.values
    n = z.n_classes
    off_r, off_c = v[..., n], v[..., n + 1]
    out: list[Detection] = []
    for k in range(n):
        p = v[..., k]
        pooled = maximum_filter(p, size=3, mode="constant", cval=0.0)
        cand = (p >= tau) & (p == pooled)
        kept: set[tuple[int, int]] = set()
        for i, j in zip(*np.nonzero(cand)):
            i, j = int(i), int(j)
            if any((i + di, j + dj) in kept and p[i + di, j + dj] == p[i, j] for di, dj in _EARLIER):
                continue
            kept.add((i, j))
            out.append(Detection(k, i * z.stride + off_r[i, j], j * z.stride + off_c[i, j]))
    return out


def _window_sums(a: np.ndarray, h: int, w: int) -> np.ndarray:
    c = np.pad(a, ((1, 0), (1, 0))).cumsum(0).cumsum(1)
    return c[h:, w:] - c[:-h, w:] - c[h:, :-w] + c[:-h, :-w]


def ncc_map(frame: np.ndarray, template: np.ndarray) -> np.ndarray:
    """Normalized cross-correlation at every full-overlap position, indexed by
    the template's centre pixel; cells without full overlap score 0."""
    th, tw = template.shape
    H, W = frame.shape
    t0 = template - template.mean()
    t_norm = np.sqrt((t0 ** 2).sum())
    out = np.zeros((H, W))
    if th > H or tw > W or t_norm == 0:
        return out
    num = fftconvolve(frame, t0[::-1, ::-1], mode="valid")
    n = th * tw
    s1 = _window_sums(frame, th, tw)
    s2 = _window_sums(frame * frame, th, tw)
    var = np.maximum(s2 - s1 * s1 / n, 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        score = np.where(var > 1e-9, num / (np.sqrt(var) * t_norm), 0.0)
    out[th // 2:th // 2 + score.shape[0], tw // 2:tw // 2 + score.shape[1]] = score
    return out


def template_detect(frame: Observation | np.ndarray, templates: Mapping[int, np.ndarray],
                    stride: int = STRIDE) -> Heatmap:
    """Correlation scores per class, block-maxed to stride S.

    The probability of cell (i, j) is the best clipped NCC score in its block;
    the offsets point at that score's pixel. When several classes peak in the
    same block the offsets follow the strongest one.
    """
    img = frame.frame if isinstance(frame, Observation) else np.asarray(frame, dtype=np.float64)
    if not templates:
        raise ContractError("need at least one template")
    n = max(templates) + 1
    H, W = img.shape
    h, w = H // stride, W // stride
    probs = np.zeros((h, w, n))
    best = np.full((h, w), -1.0)
    off = np.zeros((h, w, 2))
    for k, t in templates.items():
        if t.shape[0] > H or t.shape[1] > W:
            raise ContractError("template larger than frame")
        s = np.clip(ncc_map(img, np.asarray(t, dtype=np.float64)), 0.0, 1.0)[:h * stride, :w * stride]
        blocks = s.reshape(h, stride, w, stride).transpose(0, 2, 1, 3).reshape(h, w, stride * stride)
        arg = blocks.argmax(axis=2)
        val = np.take_along_axis(blocks, arg[..., None], axis=2)[..., 0]
        probs[..., k] = val
        better = val > best
        best = np.where(better, val, best)
        off[..., 0] = np.where(better, arg // stride, off[..., 0])
        off[..., 1] = np.where(better, arg % stride, off[..., 1])
    return Heatmap(np.concatenate([probs, off], axis=2), stride)
