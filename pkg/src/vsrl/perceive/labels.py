"""Heatmap training targets and the CenterNet-style losses (pure functions)."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from vsrl.core import ContractError

ALPHA, BETA = 2.0, 4.0
CLAMP = 1e-7


def create_labels(centers: Sequence[tuple[float, float]], h: int, w: int,
                  sigma: tuple[float, float] | None = None) -> np.ndarray:
    """Per-class label map: pointwise max of Gaussian bumps, one per centre.

    ``centers`` are (row, col) positions in label-image pixels. The covariance
    defaults to diag(h/2, w/2) (row variance, column variance). Each bump is
    scaled so it equals exactly 1 at its own centre, which the focal loss needs
    to recognise positives.
    """
    var_r, var_c = sigma if sigma is not None else (h / 2.0, w / 2.0)
    if var_r <= 0 or var_c <= 0:
        raise ContractError("label variances must be positive")
    rows = np.arange(h, dtype=np.float64)[:, None]
    cols = np.arange(w, dtype=np.float64)[None, :]
    y = np.zeros((h, w))
    for r, c in centers:
        if not (0 <= r < h and 0 <= c < w):
            raise ContractError(f"centre {(r, c)} outside the {h}x{w} label map")
        bump = np.exp(-0.5 * ((rows - r) ** 2 / var_r + (cols - c) ** 2 / var_c))
        np.maximum(y, bump, out=y)
    return y


def _check(pred: np.ndarray, target: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ContractError(f"prediction shape {pred.shape} != target shape {target.shape}")
    return pred, target


def focal_loss(pred, target, n_objects: int, alpha: float = ALPHA, beta: float = BETA) -> float:
    """Penalty-reduced pixelwise focal loss; positives are the cells where target == 1."""
    pred, target = _check(pred, target)
    if n_objects < 0:
        raise ContractError("n_objects must be nonnegative")
    p = np.clip(pred, CLAMP, 1.0 - CLAMP)
    pos = target == 1.0
    pos_term = (1.0 - p) ** alpha * np.log(p)
    neg_term = (1.0 - target) ** beta * p ** alpha * np.log(1.0 - p)
    total = np.where(pos, pos_term, neg_term).sum()
    return float(-total / n_objects if n_objects > 0 else -total)


def focal_loss_grad(pred, target, n_objects: int, alpha: float = ALPHA, beta: float = BETA) -> np.ndarray:
    """d focal_loss / d pred (zero where the clamp is active)."""
    pred, target = _check(pred, target)
    p = np.clip(pred, CLAMP, 1.0 - CLAMP)
    pos = target == 1.0
    d_pos = -alpha * (1.0 - p) ** (alpha - 1) * np.log(p) + (1.0 - p) ** alpha / p
    d_neg = (1.0 - target) ** beta * (alpha * p ** (alpha - 1) * np.log(1.0 - p) - p ** alpha / (1.0 - p))
    grad = -np.where(pos, d_pos, d_neg)
    grad[(pred < CLAMP) | (pred > 1.0 - CLAMP)] = 0.0
    return grad / n_objects if n_objects > 0 else grad


def offset_loss(pred, target, mask) -> float:
    """Mean squared offset error over the cells flagged in ``mask`` (object centres)."""
    pred, target = _check(pred, target)
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != pred.shape[:mask.ndim]:
        raise ContractError("mask must index the leading axes of the offsets")
    if not mask.any():
        return 0.0
    return float(np.mean((pred[mask] - target[mask]) ** 2))
