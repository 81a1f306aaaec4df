"""Numerical certification of the risk identities behind the loss family.

The headline check enumerates every candidate set (2^K terms, K capped at
16) to compute the partial risk of a score vector exactly, and compares it
against the closed-form supervised risk it must equal under the generation
model. The two sides share no code: the enumerator works from `lw_loss` and
set probabilities, the closed form from `derived_supervised_loss`, so
agreement to 1e-10 over randomized instances is evidence rather than
tautology. Companion checks certify the set-probability normalization, the
uniform-rejection special value 1/(2^(K-1) - 1), the coefficient-ordering
property behind classifier consistency, and the collapse of the beta = 1
loss to a function of the true-label score alone.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .labelgen import GenerationModel, make_uniform
from .losses import (
    BINARY_LOSSES,
    LWConfig,
    derived_supervised_loss,
    lw_loss_batch,
)
from .rng import make_rng

MAX_ENUMERATION_CLASSES = 16


class CheckNotApplicable(ValueError):
    """A check's preconditions do not hold; the instance proves nothing."""


@dataclass(frozen=True)
class ConsistencyReport:
    """Outcome of a certification sweep.

    max_discrepancy: largest absolute deviation seen (0 when all exact).
    instances: how many independent instances were checked.
    worst_case: human-readable descriptor of the worst instance.
    """

    max_discrepancy: float
    instances: int
    worst_case: str

    def __post_init__(self):
        if self.max_discrepancy < 0.0:
            raise ValueError("discrepancy must be nonnegative")

    def within(self, tolerance: float) -> bool:
        return self.max_discrepancy < tolerance


def validate_posterior(p) -> np.ndarray:
    """Check a class-posterior vector: nonnegative, sums to 1 within 1e-12."""
    p = np.asarray(p, dtype=float)
    if p.ndim != 1:
        raise ValueError("posterior must be a vector")
    if (p < 0.0).any() or abs(p.sum() - 1.0) > 1e-12:
        raise ValueError("posterior entries must be >= 0 and sum to 1")
    return p


@lru_cache(maxsize=None)
def _all_subsets(num_classes: int) -> np.ndarray:
    """(2^K, K) boolean matrix of all subsets of {0..K-1}; rows immutable."""
    codes = np.arange(2**num_classes, dtype=np.uint32)
    masks = (codes[:, None] >> np.arange(num_classes)) & 1
    out = masks.astype(bool)
    out.setflags(write=False)
    return out


def enumerate_subsets(num_classes: int, containing: int | None = None) -> np.ndarray:
    """All subsets as boolean rows, optionally only those containing a label."""
    if num_classes > MAX_ENUMERATION_CLASSES:
        raise ValueError(
            f"enumeration capped at {MAX_ENUMERATION_CLASSES} classes, "
            f"got {num_classes}"
        )
    subsets = _all_subsets(num_classes)
    if containing is None:
        return subsets
    return subsets[subsets[:, int(containing)]]


def partial_risk_bruteforce(
    scores, posterior, model: GenerationModel, weights, cfg: LWConfig
) -> float:
    """Exact partial risk by enumerating every candidate set per true label.

    Computes sum_y p_y sum_{S with y in S} P(S | y) * lw_loss(g, S, w, cfg),
    accumulating the 2^(K-1) terms per label with exact float summation.
    """
    p = validate_posterior(posterior)
    k = model.num_classes
    if p.shape != (k,):
        raise ValueError(f"posterior length {p.shape[0]} does not match K={k}")
    g = np.asarray(scores, dtype=float)
    w = np.asarray(weights, dtype=float)
    terms: list[float] = []
    for y in range(k):
        if p[y] == 0.0:
            continue
        subsets = enumerate_subsets(k, containing=y)
        probs = model.subset_probabilities(y, subsets)
        losses = lw_loss_batch(
            np.broadcast_to(g, subsets.shape),
            subsets,
            np.broadcast_to(w, subsets.shape),
            cfg,
        )
        terms.extend((p[y] * probs * losses).tolist())
    return math.fsum(terms)


def supervised_risk_direct(
    scores, posterior, model: GenerationModel, weights, cfg: LWConfig
) -> float:
    """Closed-form supervised risk: sum_y p_y * derived_supervised_loss(y).

    Rejection models are refused: dropping the full set rescales every set
    probability by 1/(1 - M_y) and the per-class closed form no longer
    describes the partial risk.
    """
    if model.reject_full:
        raise CheckNotApplicable(
            "the closed-form supervised risk assumes no full-set rejection"
        )
    p = validate_posterior(posterior)
    k = model.num_classes
    if p.shape != (k,):
        raise ValueError(f"posterior length {p.shape[0]} does not match K={k}")
    total = 0.0
    for y in range(k):
        if p[y] == 0.0:
            continue
        total += p[y] * derived_supervised_loss(y, scores, weights, model.q[y], cfg)
    return total


def lemma1_check(model: GenerationModel, true_label: int) -> ConsistencyReport:
    """How far the set probabilities for one true label are from summing to 1."""
    k = model.num_classes
    if k > MAX_ENUMERATION_CLASSES:
        raise ValueError(f"enumeration capped at {MAX_ENUMERATION_CLASSES} classes")
    y = int(true_label)
    subsets = enumerate_subsets(k, containing=y)
    total = math.fsum(model.subset_probabilities(y, subsets).tolist())
    return ConsistencyReport(
        max_discrepancy=abs(total - 1.0),
        instances=subsets.shape[0],
        worst_case=f"K={k}, y={y}, sum={total!r}",
    )


def theorem2_coefficient_check(posterior, weights, q_row, beta: float) -> bool:
    """Does the inner-risk coefficient c_y = w_y q_y (beta p_y - (beta - 1))
    peak at the certain true label?

    Applies only to the deterministic scenario: posterior one-hot at some
    y* with w maximal and positive there, q[y*] = 1, every other inclusion
    probability below 1, and beta > 0. Anything else raises
    CheckNotApplicable rather than passing judgement.
    """
    p = validate_posterior(posterior)
    w = np.asarray(weights, dtype=float)
    q = np.asarray(q_row, dtype=float)
    if not (p.shape == w.shape == q.shape) or p.ndim != 1:
        raise ValueError("posterior, weights, q_row must share one length")
    one_hot = p == 1.0
    if one_hot.sum() != 1:
        raise CheckNotApplicable("posterior must be one-hot")
    y_star = int(np.flatnonzero(one_hot)[0])
    if (w < 0.0).any() or w[y_star] <= 0.0 or np.argmax(w) != y_star:
        raise CheckNotApplicable("weights must be maximal and positive at y*")
    others = np.arange(p.shape[0]) != y_star
    if q[y_star] != 1.0 or ((q[others] < 0.0) | (q[others] >= 1.0)).any():
        raise CheckNotApplicable("need q[y*] = 1 and q_z in [0, 1) elsewhere")
    if not beta > 0.0:
        raise CheckNotApplicable("beta must be positive")
    c = w * q * (beta * p - (beta - 1.0))
    return int(np.argmax(c)) == y_star


def beta1_collapse_check(
    scores_a,
    scores_b,
    true_label: int,
    model: GenerationModel,
    weights,
    psi,
    tolerance: float = 1e-12,
) -> bool:
    """Is the beta = 1 supervised loss blind to non-true-label scores?

    For a symmetric psi the beta = 1 closed form is
    w_y psi(g_y) + sum_{z != y} w_z [(1 - q_z) + (2 q_z - 1) psi(g_z)],
    so the dependence on a wrong class's score vanishes exactly when that
    class is as likely inside the candidate set as outside (q_z = 1/2).
    With every off-label inclusion probability at 1/2 the loss collapses to
    w_y psi(g_y) plus a constant, and two score vectors agreeing at the
    true label give equal losses; this function reports that comparison.
    The pair must differ only away from the true label; asymmetric psi is
    not covered.
    """
    if not getattr(psi, "symmetric", False):
        raise CheckNotApplicable("the collapse holds for symmetric psi only")
    a = np.asarray(scores_a, dtype=float)
    b = np.asarray(scores_b, dtype=float)
    y = int(true_label)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("score vectors must share one length")
    if a[y] != b[y]:
        raise CheckNotApplicable("score vectors must agree at the true label")
    cfg = LWConfig(beta=1.0, alpha=1.0, psi=psi)
    la = derived_supervised_loss(y, a, weights, model.q[y], cfg)
    lb = derived_supervised_loss(y, b, weights, model.q[y], cfg)
    return abs(la - lb) <= tolerance


def _random_model(k: int, rng: np.random.Generator) -> GenerationModel:
    q = rng.random((k, k)) * 0.98
    np.fill_diagonal(q, 1.0)
    return GenerationModel(q)


def certify_risk_equivalence(
    instances: int = 1000,
    seed: int = 0,
    k_values: tuple[int, ...] = (2, 3, 4, 5, 6, 7, 8),
    betas: tuple[float, ...] = (0.0, 0.5, 1.0, 2.0, 7.3),
    alphas: tuple[float, ...] = (0.5, 1.0),
    derived_loss=None,
) -> ConsistencyReport:
    """Randomized equality check: enumerated partial risk vs closed form.

    Instance i draws random scores, posterior, model, and weights, and walks
    the (K, psi, beta, alpha) grid round-robin; the cycle lengths 7, 3, 5, 2
    are pairwise coprime, so 210 instances already cover the full grid.
    `derived_loss` substitutes the closed-form half (used to prove the check
    can fail); the default is the production form.
    """
    rng = make_rng(seed)
    psis = tuple(BINARY_LOSSES.values())
    worst = (0.0, "no instances checked")
    for i in range(instances):
        k = k_values[i % len(k_values)]
        psi = psis[i % len(psis)]
        cfg = LWConfig(
            beta=betas[i % len(betas)], alpha=alphas[i % len(alphas)], psi=psi
        )
        g = rng.normal(0.0, 2.0, size=k)
        p = rng.dirichlet(np.ones(k))
        w = rng.random(k)
        model = _random_model(k, rng)
        lhs = partial_risk_bruteforce(g, p, model, w, cfg)
        if derived_loss is None:
            rhs = supervised_risk_direct(g, p, model, w, cfg)
        else:
            rhs = math.fsum(
                p[y] * derived_loss(y, g, w, model.q[y], cfg)
                for y in range(k)
                if p[y] > 0.0
            )
        gap = abs(lhs - rhs)
        if gap > worst[0]:
            worst = (
                gap,
                f"instance {i}: K={k}, psi={psi.name}, beta={cfg.beta}, "
                f"alpha={cfg.alpha}, |lhs-rhs|={gap:.3e}",
            )
    return ConsistencyReport(
        max_discrepancy=worst[0], instances=instances, worst_case=worst[1]
    )


def certify_subset_normalization(
    models: int = 100,
    seed: int = 0,
    k_values: tuple[int, ...] = (2, 3, 4, 5, 6, 7, 8, 9, 10),
) -> ConsistencyReport:
    """Set probabilities sum to 1 for each true label, over random models."""
    rng = make_rng(seed)
    worst = (0.0, "no models checked")
    for i in range(models):
        k = k_values[i % len(k_values)]
        model = _random_model(k, rng)
        y = int(rng.integers(k))
        report = lemma1_check(model, y)
        if report.max_discrepancy > worst[0]:
            worst = (report.max_discrepancy, f"model {i}: {report.worst_case}")
    return ConsistencyReport(
        max_discrepancy=worst[0], instances=models, worst_case=worst[1]
    )


def certify_uniform_recovery(
    k_values: tuple[int, ...] = (3, 4, 5, 6, 7, 8),
) -> ConsistencyReport:
    """Uniform q = 1/2 with rejection: every proper set has probability
    1/(2^(K-1) - 1)."""
    worst = (0.0, "no subsets checked")
    checked = 0
    for k in k_values:
        model = make_uniform(k, 0.5, reject_full=True)
        expected = 1.0 / (2 ** (k - 1) - 1)
        for y in range(k):
            subsets = enumerate_subsets(k, containing=y)
            proper = subsets[~subsets.all(axis=1)]
            probs = model.subset_probabilities(y, proper)
            checked += proper.shape[0]
            gap = float(np.abs(probs - expected).max())
            if gap > worst[0]:
                worst = (gap, f"K={k}, y={y}, target={expected!r}")
    return ConsistencyReport(
        max_discrepancy=worst[0], instances=checked, worst_case=worst[1]
    )


def certify_coefficient_ordering(
    instances: int = 10**4,
    seed: int = 0,
    k_values: tuple[int, ...] = (2, 3, 4, 5, 6, 7, 8, 9, 10),
) -> ConsistencyReport:
    """Randomized coefficient-ordering property under its preconditions.

    Failures count as discrepancy 1; a clean run reports 0.
    """
    rng = make_rng(seed)
    failures = 0
    worst = (0.0, "all instances ordered correctly")
    for i in range(instances):
        k = k_values[i % len(k_values)]
        y_star = int(rng.integers(k))
        w = rng.random(k) + 1e-9
        top = int(np.argmax(w))
        w[y_star], w[top] = w[top], w[y_star]
        q = rng.random(k) * 0.98
        q[y_star] = 1.0
        p = np.zeros(k)
        p[y_star] = 1.0
        beta = 10.0 * (1.0 - rng.random())
        if not theorem2_coefficient_check(p, w, q, beta):
            failures += 1
            if worst[0] == 0.0:
                worst = (
                    1.0,
                    f"instance {i}: K={k}, y*={y_star}, beta={beta!r}",
                )
    return ConsistencyReport(
        max_discrepancy=float(failures > 0),
        instances=instances,
        worst_case=worst[1],
    )
