"""Per-instance class weights, normalized separately inside and outside the set.

Each training instance i with candidate mask S_i carries a weight vector
w[i] that sums to 1 over S_i and to 1 over its complement (the complement
side is all zeros when S_i covers every class). Weights start uniform within
each side and are refreshed from the current scores by a softmax restricted
to each side, so better-scoring labels accumulate weight without any
gradient flowing through w.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class WeightState:
    """Weights w (n, K) paired with the candidate masks (n, K) they refer to."""

    w: np.ndarray
    masks: np.ndarray

    def __post_init__(self):
        if self.w.shape != self.masks.shape or self.w.ndim != 2:
            raise ValueError(
                f"shape mismatch: w {self.w.shape}, masks {self.masks.shape}"
            )
        if (self.w < 0.0).any():
            raise ValueError("weights must be nonnegative")


def init_weights(masks) -> WeightState:
    """Uniform weights per side: 1/|S_i| on candidates, 1/(K - |S_i|) off.

    An instance whose candidate set covers all K classes gets zeros on the
    (empty) complement side.
    """
    masks = np.asarray(masks, dtype=bool)
    if masks.ndim != 2:
        raise ValueError("masks must be a 2-D boolean array")
    if not masks.any(axis=1).all():
        raise ValueError("every candidate set must be nonempty")
    n, num_classes = masks.shape
    in_count = masks.sum(axis=1, keepdims=True)
    out_count = num_classes - in_count
    w = np.where(
        masks,
        1.0 / in_count,
        np.divide(1.0, out_count, out=np.zeros((n, 1)), where=out_count > 0),
    )
    return WeightState(w=w, masks=masks)


def _side_softmax(scores: np.ndarray, side: np.ndarray) -> np.ndarray:
    """Softmax of scores restricted to `side`; zeros where side is empty."""
    peak = np.where(side, scores, -np.inf).max(axis=1, keepdims=True)
    peak = np.where(np.isfinite(peak), peak, 0.0)
    e = np.where(side, np.exp(np.where(side, scores, peak) - peak), 0.0)
    tot = e.sum(axis=1, keepdims=True)
    return np.divide(e, tot, out=np.zeros_like(e), where=tot > 0)


def update_weights(state: WeightState, scores) -> WeightState:
    """Refresh weights from scores: softmax within each side of the mask."""
    g = np.asarray(scores, dtype=float)
    if g.shape != state.masks.shape:
        raise ValueError(
            f"scores shape {g.shape} does not match masks {state.masks.shape}"
        )
    if not np.isfinite(g).all():
        raise ValueError("scores must be finite")
    w = _side_softmax(g, state.masks) + _side_softmax(g, ~state.masks)
    return WeightState(w=w, masks=state.masks)


def partition_sums(state: WeightState) -> tuple[np.ndarray, np.ndarray]:
    """Per-instance weight totals (candidate side, complement side)."""
    inside = np.where(state.masks, state.w, 0.0).sum(axis=1)
    outside = np.where(state.masks, 0.0, state.w).sum(axis=1)
    return inside, outside
