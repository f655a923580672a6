"""Sprite bitmaps and frame compositing.

Every sprite has odd side lengths so it has a well-defined centre pixel.
Pixel (row, col) integer indices address pixel centres; an object at
fractional pixel position is pasted at the nearest integer centre, so the
rendered centre is within half a pixel of the exact mapping.
"""

from __future__ import annotations

import numpy as np

BACKGROUND = 0.15


def _disc(size: int) -> np.ndarray:
    c = size // 2
    r, q = np.mgrid[:size, :size]
    return (r - c) ** 2 + (q - c) ** 2 <= c * c + 0.5


def plus(size: int = 5, value: float = 1.0) -> np.ndarray:
    s = np.full((size, size), np.nan)
    s[size // 2, :] = value
    s[:, size // 2] = value
    return s


def cross(size: int = 7, value: float = 0.9) -> np.ndarray:
    s = np.full((size, size), np.nan)
    idx = np.arange(size)
    s[idx, idx] = value
    s[idx, size - 1 - idx] = value
    return s


def ring(size: int = 7, value: float = 0.8, width: float = 1.5) -> np.ndarray:
    c = size // 2
    r, q = np.mgrid[:size, :size]
    d = np.sqrt((r - c) ** 2 + (q - c) ** 2)
    s = np.full((size, size), np.nan)
    s[(d <= c + 0.25) & (d > c - width)] = value
    s[c, c] = 0.0
    return s


def disc(size: int = 9, value: float = 0.5) -> np.ndarray:
    s = np.full((size, size), np.nan)
    s[_disc(size)] = value
    return s


def striped_car(size: int = 5, value: float = 0.95, vertical: bool = False) -> np.ndarray:
    """Square body with alternating stripes; the two orientations are uncorrelated."""
    s = np.full((size, size), 0.4)
    if vertical:
        s[:, ::2] = value
    else:
        s[::2, :] = value
    return s


def template(sprite: np.ndarray, background: float = BACKGROUND) -> np.ndarray:
    """Sprite as it appears on the background (transparent pixels filled)."""
    return np.where(np.isnan(sprite), background, sprite)


def blank(shape: tuple[int, int], background: float = BACKGROUND) -> np.ndarray:
    return np.full(shape, background, dtype=np.float64)


def paste(frame: np.ndarray, sprite: np.ndarray, row: float, col: float) -> None:
    """Overwrite the opaque pixels of ``sprite`` centred at (row, col), clipped to the frame."""
    h, w = sprite.shape
    r0 = int(np.floor(row + 0.5)) - h // 2
    c0 = int(np.floor(col + 0.5)) - w // 2
    fr0, fc0 = max(r0, 0), max(c0, 0)
    fr1, fc1 = min(r0 + h, frame.shape[0]), min(c0 + w, frame.shape[1])
    if fr0 >= fr1 or fc0 >= fc1:
        return
    patch = sprite[fr0 - r0:fr1 - r0, fc0 - c0:fc1 - c0]
    target = frame[fr0:fr1, fc0:fc1]
    mask = ~np.isnan(patch)
    target[mask] = patch[mask]
