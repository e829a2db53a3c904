"""Generalized score test with a sandwich covariance.

The merged-sequence intensity is linear in the parameter vector
theta = (mu, phi1, phi2): at event e it equals a_e . theta where a_e
holds a leading 1 and the per-(stream, bin) parent counts. That makes
the per-sequence score

    S_i = sum_e a_e / (a_e . theta) - c_i,

with c_i the exact compensator coefficients (horizon, then truncated
bin exposures per stream), and the negative Hessian

    B_i = sum_e a_e a_e^T / (a_e . theta)^2,

which is PSD; the compensator is linear in theta and contributes
nothing to second derivatives.

Model misspecification is expected here (the histogram kernel never
matches the generator exactly), so the covariance of the score is
estimated by the sandwich form: A = sum of per-sequence score outer
products, B = summed negative Hessians, and the constrained quadratic
form uses Sigma^{-1} = B^{-1} H^T (H B^{-1} A B^{-1} H^T)^{-1} H B^{-1}
with H = [0 | I | -I] picking the kernel difference. Everything is
computed through factorized solves with explicit condition checks;
there is no silent pseudo-inverse.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import (
    DimensionMismatch,
    DomainError,
    NonFiniteDerivative,
    SingularCovariance,
)
from .asymptotics import chi2_cdf, chi2_quantile
from .likelihood import (
    FullParams,
    NullParams,
    PerProcessParams,
    trigger_sums,
)
from .sequences import LabeledSequence

__all__ = [
    "ScoreBundle",
    "GSResult",
    "score_and_hessian",
    "aggregate_bundles",
    "constraint_matrix",
    "gs_statistic",
    "gw_statistic",
]

_COND_LIMIT = 1e12


@dataclass(frozen=True)
class ScoreBundle:
    """Summed score, score outer products, and negative Hessian."""

    score: np.ndarray
    outer: np.ndarray
    neg_hessian: np.ndarray
    n_seqs: int

    @property
    def dim(self) -> int:
        return int(self.score.size)


@dataclass(frozen=True)
class GSResult:
    """Statistic value with its reference distribution and decision."""

    statistic: float
    dof: int
    p_value: float
    reject: bool
    condition_number: float
    kind: str


def score_and_hessian(
    params: FullParams, seq: LabeledSequence
) -> tuple[np.ndarray, np.ndarray]:
    """Score vector and negative Hessian of one merged sequence.

    Uses the exact truncated-bin compensator. Raises NonFiniteDerivative
    if any event intensity is nonpositive or any entry fails to be
    finite.
    """
    ts = trigger_sums(params, seq)
    delta = ts.event_intensity
    if delta.size and (not np.all(np.isfinite(delta)) or np.any(delta <= 0)):
        raise NonFiniteDerivative(
            "event intensity must be positive and finite at every event"
        )
    n = delta.size
    design = np.hstack([np.ones((n, 1)), ts.design])
    comp_grad = np.concatenate([[seq.horizon], ts.bin_exposure.ravel()])
    inv = 1.0 / delta
    score = design.T @ inv - comp_grad
    weighted = design * inv[:, None]
    neg_hessian = weighted.T @ weighted
    if not (np.all(np.isfinite(score)) and np.all(np.isfinite(neg_hessian))):
        raise NonFiniteDerivative("score or Hessian has non-finite entries")
    return score, neg_hessian


def aggregate_bundles(
    per_seq: list[tuple[np.ndarray, np.ndarray]]
) -> ScoreBundle:
    """Sum per-sequence (score, negative Hessian) pairs in input order.

    The outer-product matrix A sums S_i S_i^T over sequences, which is
    what makes the covariance full-rank once n_seqs reaches the number
    of constraints.
    """
    if not per_seq:
        raise DimensionMismatch("need at least one (score, hessian) pair")
    d = np.asarray(per_seq[0][0]).size
    score = np.zeros(d)
    outer = np.zeros((d, d))
    neg_hessian = np.zeros((d, d))
    for i, (s, b) in enumerate(per_seq):
        s = np.asarray(s, dtype=np.float64).reshape(-1)
        b = np.asarray(b, dtype=np.float64)
        if s.size != d or b.shape != (d, d):
            raise DimensionMismatch(
                f"item {i} has score size {s.size} and hessian shape "
                f"{b.shape}; expected {d} and {(d, d)}"
            )
        score += s
        outer += np.outer(s, s)
        neg_hessian += b
    return ScoreBundle(
        score=score, outer=outer, neg_hessian=neg_hessian, n_seqs=len(per_seq),
    )


def constraint_matrix(n_bins: int) -> np.ndarray:
    """H = [0 | I | -I]: rows read off phi1_k - phi2_k."""
    h = np.zeros((n_bins, 1 + 2 * n_bins))
    h[:, 1 : n_bins + 1] = np.eye(n_bins)
    h[:, n_bins + 1 :] = -np.eye(n_bins)
    return h


def _constrained_quadratic(
    bundle: ScoreBundle, target: np.ndarray, ridge: float
) -> tuple[float, float]:
    """Quadratic form target^T (H B^-1 A B^-1 H^T)^-1 target.

    For the score statistic ``target`` is H B^{-1} S, computed from the
    same solve. Returns (value, condition number of the inner matrix).
    """
    d = bundle.dim
    n_bins = (d - 1) // 2
    big_h = constraint_matrix(n_bins)
    b = bundle.neg_hessian
    if not np.all(np.isfinite(b)):
        raise SingularCovariance("summed negative Hessian", float("inf"),
                                 "non-finite entries")
    cond_b = float(np.linalg.cond(b))
    if not np.isfinite(cond_b) or cond_b > _COND_LIMIT:
        raise SingularCovariance("summed negative Hessian", cond_b)
    w = np.linalg.solve(b, big_h.T)
    inner = w.T @ bundle.outer @ w
    inner = 0.5 * (inner + inner.T)
    if ridge > 0.0:
        inner = inner + ridge * np.eye(n_bins)
    cond_inner = float(np.linalg.cond(inner))
    if not np.isfinite(cond_inner) or cond_inner > _COND_LIMIT:
        raise SingularCovariance("inner constraint covariance", cond_inner)
    y = w.T @ bundle.score if target is None else np.asarray(target, dtype=np.float64)
    value = float(y @ scipy.linalg.solve(inner, y, assume_a="sym"))
    if value < -1e-8:
        raise SingularCovariance(
            "inner constraint covariance", cond_inner,
            f"quadratic form evaluated to {value:.3e} < 0",
        )
    return max(value, 0.0), cond_inner


def _decide(value: float, cond: float, dof: int, level: float,
            kind: str) -> GSResult:
    if not (0.0 < level < 1.0):
        raise DomainError(f"level must lie in (0, 1), got {level}")
    p_value = 1.0 - chi2_cdf(value, dof)
    reject = value > chi2_quantile(1.0 - level, dof)
    return GSResult(
        statistic=value, dof=dof, p_value=p_value, reject=reject,
        condition_number=cond, kind=kind,
    )


def _prepared_bundle(params: FullParams, seqs: list[LabeledSequence],
                     r: int) -> ScoreBundle:
    if len(seqs) < r:
        raise SingularCovariance(
            "inner constraint covariance", float("inf"),
            f"{len(seqs)} sequences for {r} constraints; the outer-product "
            "matrix cannot reach full rank",
        )
    return aggregate_bundles([score_and_hessian(params, s) for s in seqs])


def gs_statistic(
    theta_hat_null: NullParams,
    seqs: list[LabeledSequence],
    level: float = 0.05,
    dof: int | None = None,
    ridge: float = 0.0,
) -> GSResult:
    """Score statistic at the embedded null fit.

    The null fit is embedded into the unconstrained space (duplicate
    kernel blocks), the score machinery is evaluated there, and the
    statistic is the constrained quadratic form of the summed score.
    Under the null it is asymptotically chi-square with dof = n_bins;
    ``dof`` overrides the reference distribution only, never the
    statistic. ``ridge`` (off by default) adds a diagonal to the inner
    matrix instead of raising SingularCovariance.
    """
    full = theta_hat_null.embed()
    r = full.n_bins
    bundle = _prepared_bundle(full, seqs, r)
    value, cond = _constrained_quadratic(bundle, None, ridge)
    return _decide(value, cond, dof if dof is not None else r, level, "GS")


def gw_statistic(
    theta_tilde_full: PerProcessParams | FullParams,
    seqs: list[LabeledSequence],
    level: float = 0.05,
    dof: int | None = None,
    ridge: float = 0.0,
) -> GSResult:
    """Wald-type statistic at the unconstrained fit.

    Plugs the fitted kernel difference into the same inner covariance.
    Asymptotically equivalent to the score statistic under the null;
    kept for that comparison.
    """
    if isinstance(theta_tilde_full, PerProcessParams):
        theta_tilde_full = theta_tilde_full.embed()
    r = theta_tilde_full.n_bins
    bundle = _prepared_bundle(theta_tilde_full, seqs, r)
    target = theta_tilde_full.height_difference()
    value, cond = _constrained_quadratic(bundle, target, ridge)
    return _decide(value, cond, dof if dof is not None else r, level, "GW")
