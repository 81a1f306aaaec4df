"""Binary losses and the leveraged weighted loss family for candidate-set labels.

The multi-class loss on an instance with candidate set ``S`` combines a
non-increasing binary loss ``psi`` applied per class:

    alpha * sum_{z in S} w_z psi(g_z)  +  beta * sum_{z not in S} w_z psi(-g_z)

where ``g`` is the score vector, ``w`` a nonnegative per-class weight vector,
``alpha`` scales the candidate side and ``beta`` leverages the non-candidate
side. Sigmoid and ramp losses are symmetric (psi(z) + psi(-z) = 1); the step
loss is symmetric too but has no usable derivative and is meant for
enumeration-style checks only. A cross-entropy instantiation replaces the
per-class binary losses with -log softmax terms and is handled separately
because softmax couples the coordinates.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit, logsumexp

# Floor applied to probabilities before taking logs in cross-entropy mode.
_LOG_FLOOR = 1e-12


class UnsupportedLossError(ValueError):
    """Raised when an operation needs a derivative or form the loss lacks."""


class SigmoidLoss:
    """psi(z) = 1 / (1 + e^z), smooth and symmetric."""

    name = "sigmoid"
    symmetric = True
    differentiable = True

    @staticmethod
    def value(z):
        return expit(np.negative(z))

    @staticmethod
    def derivative(z):
        # psi'(z) = -sigma(z) sigma(-z), bounded in [-1/4, 0)
        return -expit(z) * expit(np.negative(z))


class RampLoss:
    """psi(z) = clip((1 - z) / 2, 0, 1), piecewise linear and symmetric."""

    name = "ramp"
    symmetric = True
    differentiable = True

    @staticmethod
    def value(z):
        return np.clip((1.0 - np.asarray(z, dtype=float)) / 2.0, 0.0, 1.0)

    @staticmethod
    def derivative(z):
        # Subgradient 0 at the kinks z = +-1.
        z = np.asarray(z, dtype=float)
        return np.where(np.abs(z) < 1.0, -0.5, 0.0)


class ZeroOneStepLoss:
    """psi(z) = 1 for z < 0, 1/2 at z = 0, 0 for z > 0.

    Non-differentiable; valid in value-level enumeration checks, rejected by
    every gradient path.
    """

    name = "zero_one_step"
    symmetric = True
    differentiable = False

    @staticmethod
    def value(z):
        z = np.asarray(z, dtype=float)
        return np.where(z < 0.0, 1.0, np.where(z > 0.0, 0.0, 0.5))

    @staticmethod
    def derivative(z):
        raise UnsupportedLossError("the step loss has no derivative")


class CrossEntropyMode:
    """Marker selecting -log softmax terms instead of a per-class binary loss."""

    name = "cross_entropy"
    symmetric = False
    differentiable = True


SIGMOID = SigmoidLoss()
RAMP = RampLoss()
ZERO_ONE_STEP = ZeroOneStepLoss()
CROSS_ENTROPY = CrossEntropyMode()

BINARY_LOSSES = {loss.name: loss for loss in (SIGMOID, RAMP, ZERO_ONE_STEP)}

BinaryLoss = SigmoidLoss | RampLoss | ZeroOneStepLoss


def get_loss(name: str) -> BinaryLoss | CrossEntropyMode:
    """Look up a loss by name ('sigmoid', 'ramp', 'zero_one_step', 'cross_entropy')."""
    if name == CROSS_ENTROPY.name:
        return CROSS_ENTROPY
    try:
        return BINARY_LOSSES[name]
    except KeyError:
        raise UnsupportedLossError(f"unknown loss {name!r}") from None


@dataclass(frozen=True)
class LWConfig:
    """Selects one member of the leveraged weighted loss family.

    beta leverages losses on non-candidate labels, alpha scales losses on
    candidate labels (1 except in ablations), psi is the per-class binary
    loss or the cross-entropy marker.
    """

    beta: float
    alpha: float = 1.0
    psi: BinaryLoss | CrossEntropyMode = field(default_factory=lambda: SIGMOID)

    def __post_init__(self):
        if not (self.beta >= 0.0):
            raise ValueError(f"beta must be >= 0, got {self.beta}")
        if not (self.alpha >= 0.0):
            raise ValueError(f"alpha must be >= 0, got {self.alpha}")


def _as_batch(scores, candidates, weights):
    """Validate and broadcast inputs to 2-D (n, K) arrays; return (g, m, w, squeeze)."""
    g = np.asarray(scores, dtype=float)
    m = np.asarray(candidates, dtype=bool)
    w = np.asarray(weights, dtype=float)
    squeeze = g.ndim == 1
    if squeeze:
        g, m, w = g[None, :], m[None, :], w[None, :]
    if not (g.shape == m.shape == w.shape) or g.ndim != 2:
        raise ValueError(
            f"shape mismatch: scores {g.shape}, candidates {m.shape}, weights {w.shape}"
        )
    if not np.isfinite(g).all():
        raise ValueError("scores must be finite")
    if not m.any(axis=1).all():
        raise ValueError("candidate set must be nonempty")
    if (w < 0.0).any():
        raise ValueError("weights must be nonnegative")
    return g, m, w, squeeze


def _log_softmax(g):
    return g - logsumexp(g, axis=1, keepdims=True)


def lw_loss_batch(scores, candidates, weights, cfg: LWConfig) -> np.ndarray:
    """Leveraged weighted loss of each row; arrays are (n, K). Returns (n,)."""
    g, m, w, squeeze = _as_batch(scores, candidates, weights)
    if isinstance(cfg.psi, CrossEntropyMode):
        log_p = _log_softmax(g)
        pos = -log_p
        p = np.exp(log_p)
        neg = -np.log(np.maximum(1.0 - p, _LOG_FLOOR))
    else:
        pos = cfg.psi.value(g)
        neg = cfg.psi.value(-g)
    per_class = np.where(m, cfg.alpha * pos, cfg.beta * neg) * w
    out = per_class.sum(axis=1)
    return out[0] if squeeze else out


def lw_loss(scores, candidates, weights, cfg: LWConfig) -> float:
    """Leveraged weighted loss of one instance.

    scores, weights: length-K vectors; candidates: length-K boolean mask.
    """
    return float(lw_loss_batch(scores, candidates, weights, cfg))


def lw_loss_gradient_batch(scores, candidates, weights, cfg: LWConfig) -> np.ndarray:
    """d loss / d scores for each row; arrays are (n, K). Returns (n, K)."""
    g, m, w, squeeze = _as_batch(scores, candidates, weights)
    if isinstance(cfg.psi, CrossEntropyMode):
        p = np.exp(_log_softmax(g))
        a = np.where(m, cfg.alpha * w, 0.0)
        b = np.where(m, 0.0, cfg.beta * w * p / np.maximum(1.0 - p, _LOG_FLOOR))
        tot = (a - b).sum(axis=1, keepdims=True)
        grad = -a + b + p * tot
    else:
        if not cfg.psi.differentiable:
            raise UnsupportedLossError(f"{cfg.psi.name} loss cannot be differentiated")
        grad = np.where(
            m,
            cfg.alpha * w * cfg.psi.derivative(g),
            -cfg.beta * w * cfg.psi.derivative(-g),
        )
    return grad[0] if squeeze else grad


def lw_loss_gradient(scores, candidates, weights, cfg: LWConfig) -> np.ndarray:
    """Gradient of `lw_loss` in the scores; length-K vector."""
    return lw_loss_gradient_batch(scores, candidates, weights, cfg)


MIN_OVER_CANDIDATES = "min_over_candidates"
AVERAGE_OVER_CANDIDATES = "average_over_candidates"
MAX_CANDIDATE_PLUS_NEGATIVES = "max_candidate_plus_negatives"

SPECIAL_CASE_KINDS = (
    MIN_OVER_CANDIDATES,
    AVERAGE_OVER_CANDIDATES,
    MAX_CANDIDATE_PLUS_NEGATIVES,
)


def special_case_loss(kind: str, scores, candidates, psi: BinaryLoss) -> float:
    """Historical candidate-set losses recovered as settings of the family.

    - average_over_candidates: mean of psi over the candidate scores
      (beta = 0 with uniform weights on the candidate set).
    - min_over_candidates: min of psi over the candidate scores, equivalently
      psi at the maximal candidate score (beta = 0, weight 1 on the argmax
      candidate).
    - max_candidate_plus_negatives: psi at the maximal candidate score plus
      the sum of psi(-g_z) over non-candidates (beta = 1, weight 1 on the
      argmax candidate and on every non-candidate).
    """
    g = np.asarray(scores, dtype=float)
    m = np.asarray(candidates, dtype=bool)
    if g.shape != m.shape or g.ndim != 1:
        raise ValueError(f"shape mismatch: scores {g.shape}, candidates {m.shape}")
    if not m.any():
        raise ValueError("candidate set must be nonempty")
    if kind == AVERAGE_OVER_CANDIDATES:
        return float(psi.value(g[m]).mean())
    if kind == MIN_OVER_CANDIDATES:
        return float(psi.value(g[m]).min())
    if kind == MAX_CANDIDATE_PLUS_NEGATIVES:
        return float(psi.value(g[m].max()) + psi.value(-g[~m]).sum())
    raise ValueError(f"unknown special-case kind {kind!r}")


def derived_supervised_loss(
    true_label: int, scores, weights, q_row, cfg: LWConfig
) -> float:
    """Supervised loss whose risk the candidate-set loss matches.

    This is the conditional expectation of `lw_loss` over candidate sets
    drawn for true label y, where wrong class z joins the set independently
    with probability q_z (and q[y] = 1, q[z] < 1 otherwise). Each z != y
    lands on the candidate side with probability q_z and on the complement
    side with probability 1 - q_z, giving the closed form

        alpha * w_y psi(g_y)
          + sum_{z != y} w_z [alpha * q_z psi(g_z)
                              + beta * (1 - q_z) psi(-g_z)].

    Cross-entropy mode is rejected: its coordinates are softmax-coupled and
    no closed per-class form applies.
    """
    if isinstance(cfg.psi, CrossEntropyMode):
        raise UnsupportedLossError(
            "cross-entropy mode has no per-class supervised counterpart"
        )
    g = np.asarray(scores, dtype=float)
    w = np.asarray(weights, dtype=float)
    q = np.asarray(q_row, dtype=float)
    if not (g.shape == w.shape == q.shape) or g.ndim != 1:
        raise ValueError(
            f"shape mismatch: scores {g.shape}, weights {w.shape}, q_row {q.shape}"
        )
    y = int(true_label)
    if not 0 <= y < g.shape[0]:
        raise ValueError(f"true_label {y} out of range for {g.shape[0]} classes")
    if q[y] != 1.0:
        raise ValueError(f"q_row[true_label] must be exactly 1, got {q[y]}")
    others = np.arange(g.shape[0]) != y
    if ((q[others] < 0.0) | (q[others] >= 1.0)).any():
        raise ValueError("off-label inclusion probabilities must lie in [0, 1)")
    if not np.isfinite(g).all():
        raise ValueError("scores must be finite")
    pos = cfg.psi.value(g)
    neg = cfg.psi.value(-g)
    cross = w * (cfg.alpha * q * pos + cfg.beta * (1.0 - q) * neg)
    return float(cfg.alpha * w[y] * pos[y] + cross[others].sum())
