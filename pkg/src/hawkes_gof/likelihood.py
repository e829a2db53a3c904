"""Parameter containers and exact log-likelihoods for merged sequences.

The alternative ("full") model gives each source stream its own histogram
triggering kernel on a shared bin grid; the null model constrains the two
kernels to be equal. Parameters are:

* FullParams: background rate mu plus per-bin kernel heights phi1, phi2,
  one vector per source stream (the stream an event came from decides
  which kernel it excites future events with);
* NullParams: mu plus a single kernel written alpha * g with g a density
  on the bins, the shape the EM estimator produces;
* PerProcessParams: mu plus (alpha, g) separately per stream, the shape
  the unconstrained EM estimator produces.

The log-likelihood uses the exact compensator: each event contributes its
kernel mass on the part of each bin that fits before the horizon. No
boundary approximation is made here (the EM module's M-step is the only
place a full-mass approximation appears).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, DomainError, NonFiniteLogArgument
from .kernels import BinGrid, HawkesModel, PiecewiseKernel
from .sequences import EventSequence, LabeledSequence

__all__ = [
    "FullParams",
    "NullParams",
    "PerProcessParams",
    "LagPairs",
    "lag_pairs",
    "TriggerSums",
    "trigger_sums",
    "loglik_full",
    "loglik_null",
    "merged_intensity",
]


def _check_heights(name: str, arr, n_bins: int) -> np.ndarray:
    out = np.array(arr, dtype=np.float64, copy=True).reshape(-1)
    if out.size != n_bins:
        raise DimensionMismatch(f"{name} has {out.size} entries for {n_bins} bins")
    if not np.all(np.isfinite(out)) or np.any(out < 0):
        raise DomainError(f"{name} must be finite and nonnegative")
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class FullParams:
    """Unconstrained model: mu plus one height vector per source stream.

    Each height vector must have branching ratio sum_k phi_k * width_k
    strictly below 1 (stationarity).
    """

    mu: float
    phi1: np.ndarray
    phi2: np.ndarray
    grid: BinGrid

    def __post_init__(self):
        if not np.isfinite(self.mu) or self.mu <= 0:
            raise DomainError(f"mu must be finite and > 0, got {self.mu}")
        n = self.grid.n_bins
        object.__setattr__(self, "mu", float(self.mu))
        object.__setattr__(self, "phi1", _check_heights("phi1", self.phi1, n))
        object.__setattr__(self, "phi2", _check_heights("phi2", self.phi2, n))
        w = self.grid.widths
        for name, phi in (("phi1", self.phi1), ("phi2", self.phi2)):
            ratio = float(phi @ w)
            if ratio >= 1.0:
                raise DomainError(
                    f"{name} has branching ratio {ratio} >= 1 (nonstationary)"
                )

    @property
    def n_bins(self) -> int:
        return self.grid.n_bins

    @property
    def dim(self) -> int:
        return 1 + 2 * self.grid.n_bins

    @property
    def theta(self) -> np.ndarray:
        """Flat parameter vector (mu, phi1, phi2)."""
        return np.concatenate([[self.mu], self.phi1, self.phi2])

    def height_difference(self) -> np.ndarray:
        """phi1 - phi2, the quantity the constraint sets to zero."""
        return self.phi1 - self.phi2


@dataclass(frozen=True)
class NullParams:
    """Constrained model: both streams share the kernel alpha * g."""

    mu: float
    alpha: float
    g: np.ndarray
    grid: BinGrid

    def __post_init__(self):
        if not np.isfinite(self.mu) or self.mu <= 0:
            raise DomainError(f"mu must be finite and > 0, got {self.mu}")
        if not np.isfinite(self.alpha) or not (0.0 <= self.alpha < 1.0):
            raise DomainError(f"alpha must lie in [0, 1), got {self.alpha}")
        g = _check_heights("g", self.g, self.grid.n_bins)
        mass = float(g @ self.grid.widths)
        if abs(mass - 1.0) > 1e-6:
            raise DomainError(f"g must integrate to 1, got {mass}")
        object.__setattr__(self, "mu", float(self.mu))
        object.__setattr__(self, "alpha", float(self.alpha))
        object.__setattr__(self, "g", g)

    @property
    def heights(self) -> np.ndarray:
        """Per-bin kernel heights alpha * g_k."""
        return self.alpha * self.g

    def embed(self) -> FullParams:
        """The same point on the unconstrained parameter space."""
        h = self.heights
        return FullParams(mu=self.mu, phi1=h, phi2=h, grid=self.grid)

    def as_model(self) -> HawkesModel:
        """Simulation/intensity view of the fitted null model."""
        kern = PiecewiseKernel(alpha=self.alpha, g=self.g, grid=self.grid)
        return HawkesModel(mu=self.mu, kernel=kern)


@dataclass(frozen=True)
class PerProcessParams:
    """Unconstrained model in EM form: (alpha, g) separately per stream.

    ``alpha1``/``alpha2`` are branching-mass estimates and are only
    required to be nonnegative here; ``embed`` additionally needs them
    below 1 (stationarity of the resulting model point).
    """

    mu: float
    alpha1: float
    g1: np.ndarray
    alpha2: float
    g2: np.ndarray
    grid: BinGrid

    def __post_init__(self):
        if not np.isfinite(self.mu) or self.mu <= 0:
            raise DomainError(f"mu must be finite and > 0, got {self.mu}")
        for name, a in (("alpha1", self.alpha1), ("alpha2", self.alpha2)):
            if not np.isfinite(a) or a < 0.0:
                raise DomainError(f"{name} must be finite and >= 0, got {a}")
        g1 = _check_heights("g1", self.g1, self.grid.n_bins)
        g2 = _check_heights("g2", self.g2, self.grid.n_bins)
        w = self.grid.widths
        for name, g in (("g1", g1), ("g2", g2)):
            mass = float(g @ w)
            if abs(mass - 1.0) > 1e-6:
                raise DomainError(f"{name} must integrate to 1, got {mass}")
        object.__setattr__(self, "mu", float(self.mu))
        object.__setattr__(self, "alpha1", float(self.alpha1))
        object.__setattr__(self, "alpha2", float(self.alpha2))
        object.__setattr__(self, "g1", g1)
        object.__setattr__(self, "g2", g2)

    def embed(self) -> FullParams:
        return FullParams(
            mu=self.mu,
            phi1=self.alpha1 * self.g1,
            phi2=self.alpha2 * self.g2,
            grid=self.grid,
        )


# ---------------------------------------------------------------------------
# lag pairs and sufficient statistics


@dataclass(frozen=True)
class LagPairs:
    """Admissible (child, parent) pairs of one sequence.

    A pair is admissible when the parent is strictly earlier and the lag
    falls inside the grid support. ``bin`` is the 0-based lag bin and
    ``parent_label`` the parent's source stream (all 1 for unlabeled
    sequences). Arrays are ordered child-ascending then parent-ascending.
    """

    child: np.ndarray
    parent: np.ndarray
    bin: np.ndarray
    parent_label: np.ndarray
    n_events: int

    @property
    def n_pairs(self) -> int:
        return int(self.child.size)


def lag_pairs(seq: EventSequence | LabeledSequence, grid: BinGrid) -> LagPairs:
    """Enumerate admissible (child, parent) pairs under a grid support."""
    t = seq.times
    n = t.size
    if n == 0:
        idx = np.empty(0, dtype=np.int64)
        return LagPairs(
            child=idx, parent=idx, bin=idx,
            parent_label=np.empty(0, dtype=np.int8), n_events=0,
        )
    starts = np.searchsorted(t, t - grid.t_max, side="left")
    counts = np.arange(n) - starts
    total = int(counts.sum())
    child = np.repeat(np.arange(n, dtype=np.int64), counts)
    offsets = np.concatenate([[0], np.cumsum(counts)[:-1]]).astype(np.int64)
    parent = (
        np.arange(total, dtype=np.int64)
        - np.repeat(offsets, counts)
        + np.repeat(starts.astype(np.int64), counts)
    )
    bins = grid.bin_index(t[child] - t[parent])
    keep = bins >= 0  # drops zero lags (ties) and anything past the support
    child = child[keep].astype(np.int64)
    parent = parent[keep].astype(np.int64)
    bins = bins[keep].astype(np.int64)
    if isinstance(seq, LabeledSequence):
        parent_label = seq.labels[parent].astype(np.int8)
    else:
        parent_label = np.ones(child.size, dtype=np.int8)
    return LagPairs(
        child=child, parent=parent, bin=bins,
        parent_label=parent_label, n_events=n,
    )


@dataclass(frozen=True)
class TriggerSums:
    """Per-event sufficient statistics of a merged sequence.

    ``event_intensity``: model intensity at each event (mu plus triggered
    mass), the argument of the log terms. ``lag_counts[i, w, k]``: number
    of stream-(w+1) parents of event i with lag in bin k; the intensity is
    linear in the parameters with these counts as coefficients.
    ``bin_exposure[w, k]``: total truncated bin measure sum_i |B_k
    intersect [0, horizon - t_i]| over events of stream w+1, the exact
    compensator coefficient of each kernel height.
    """

    event_intensity: np.ndarray
    lag_counts: np.ndarray
    bin_exposure: np.ndarray

    @property
    def design(self) -> np.ndarray:
        """lag_counts flattened to (n_events, 2 * n_bins)."""
        n, _, n0 = self.lag_counts.shape
        return self.lag_counts.reshape(n, 2 * n0)


def trigger_sums(params: FullParams, seq: LabeledSequence) -> TriggerSums:
    """Sufficient statistics of ``seq`` under ``params``."""
    n0 = params.n_bins
    t = seq.times
    n = t.size
    lp = lag_pairs(seq, params.grid)
    src = lp.parent_label.astype(np.int64) - 1
    flat = (lp.child * 2 + src) * n0 + lp.bin
    counts = np.bincount(flat, minlength=n * 2 * n0).astype(np.float64)
    counts = counts.reshape(n, 2, n0)
    heights = np.concatenate([params.phi1, params.phi2])
    delta = params.mu + counts.reshape(n, 2 * n0) @ heights
    ov = params.grid.overlap(seq.horizon - t)
    exposure = np.vstack([
        ov[seq.labels == 1].sum(axis=0),
        ov[seq.labels == 2].sum(axis=0),
    ]) if n else np.zeros((2, n0))
    return TriggerSums(
        event_intensity=delta, lag_counts=counts, bin_exposure=exposure,
    )


def loglik_full(params: FullParams, seq: LabeledSequence) -> float:
    """Exact log-likelihood of a merged sequence, both kernels free."""
    ts = trigger_sums(params, seq)
    delta = ts.event_intensity
    if delta.size and (not np.all(np.isfinite(delta)) or np.any(delta <= 0)):
        raise NonFiniteLogArgument(
            "event intensity must be positive and finite at every event"
        )
    comp = params.mu * seq.horizon
    comp += float(params.phi1 @ ts.bin_exposure[0])
    comp += float(params.phi2 @ ts.bin_exposure[1])
    return float(np.log(delta).sum() - comp)


def loglik_null(params: NullParams, seq: EventSequence | LabeledSequence) -> float:
    """Exact log-likelihood under the shared-kernel model.

    Labels are ignored: under the null the merged sequence is a single
    self-exciting process with kernel alpha * g. Computed directly from
    unlabeled lag counts, not via ``embed``, so the embedding identity
    can be checked across two independent code paths.
    """
    n0 = params.grid.n_bins
    t = seq.times
    lp = lag_pairs(seq, params.grid)
    counts = np.bincount(
        lp.child * n0 + lp.bin, minlength=t.size * n0
    ).astype(np.float64).reshape(t.size, n0)
    heights = params.heights
    delta = params.mu + counts @ heights
    if delta.size and (not np.all(np.isfinite(delta)) or np.any(delta <= 0)):
        raise NonFiniteLogArgument(
            "event intensity must be positive and finite at every event"
        )
    total_exposure = params.grid.overlap(seq.horizon - t).sum(axis=0) \
        if t.size else np.zeros(n0)
    comp = params.mu * seq.horizon + float(heights @ total_exposure)
    return float(np.log(delta).sum() - comp)


def merged_intensity(params: FullParams, seq: LabeledSequence, at) -> np.ndarray:
    """Merged-model intensity at query times given the labeled history.

    Each past event excites through the kernel of its own stream. Equals
    the sum of the two component intensities when the components are
    histogram models on the same grid.
    """
    at_arr = np.atleast_1d(np.asarray(at, dtype=np.float64))
    lags = at_arr[:, None] - seq.times[None, :]
    bins = params.grid.bin_index(lags)
    heights = np.vstack([params.phi1, params.phi2])
    src = seq.labels.astype(np.int64) - 1
    contrib = np.where(bins >= 0, heights[src[None, :], bins], 0.0)
    vals = params.mu + contrib.sum(axis=1)
    if np.ndim(at) == 0:
        return float(vals[0])
    return vals
