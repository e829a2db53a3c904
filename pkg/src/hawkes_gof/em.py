"""EM estimation of histogram triggering kernels.

The latent structure is the ancestry: each event was produced either by
the background (its own "parent") or by one earlier event within the grid
support. The E-step computes the posterior parent probabilities; the
M-step re-estimates (mu, alpha, g) from the soft counts in closed form.
The M-step attributes each event's full kernel mass (alpha, not the
truncated integral) to its source; that boundary approximation lives
only here, never in the exact likelihood or the score.

Two fitters share one engine:

* ``em_fit_null``: a single kernel for the merged sequence, labels
  ignored. Guarantees alpha in [0, 1] by construction.
* ``em_fit_full``: one kernel per source stream with a shared background
  rate; the parent's stream decides which kernel a pair contributes to.

Both iterate until the largest absolute change over all branching
entries (background included) drops below ``tol``, and both record the
complete-data lower bound after every M-step; that trace is
non-decreasing, which is the cheap invariant to watch.

All accumulation runs in a fixed order (sequences in input order, events
ascending, parents ascending), so repeated fits are bit-for-bit
identical.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import xlogy

from .errors import AllEmpty, DegenerateProcess, DomainError, NoConvergence
from .kernels import BinGrid
from .likelihood import NullParams, PerProcessParams, lag_pairs
from .sequences import EventSequence, LabeledSequence

__all__ = [
    "EmReport",
    "em_fit_null",
    "em_fit_full",
    "complete_data_lower_bound",
]


@dataclass(frozen=True)
class EmReport:
    """Outcome of one EM run.

    ``lower_bound_trace[v]`` is the complete-data bound at the
    parameters produced by M-step v, evaluated with the branching those
    parameters were computed from. ``branching`` (optional) holds one
    dense matrix per sequence: entry [i, j] is the posterior probability
    that event j triggered event i, diagonal = background.
    """

    params: NullParams | PerProcessParams
    n_iter: int
    final_change: float
    converged: bool
    lower_bound_trace: np.ndarray
    branching: list[np.ndarray] | None = None


class _FlatPairs:
    """Admissible pairs of a whole dataset in flat arrays.

    ``cell`` combines (parent stream, lag bin) into one index so both
    the E-step lookup and the M-step bincount are single gathers. For
    the shared-kernel fit the stream component is forced to zero.
    """

    def __init__(self, seqs, grid: BinGrid, use_labels: bool, keep_parents: bool):
        self.grid = grid
        self.n_streams = 2 if use_labels else 1
        child_chunks, cell_chunks, parent_chunks = [], [], []
        label_chunks = []
        event_bounds = [0]
        pair_bounds = [0]
        total_time = 0.0
        offset = 0
        for seq in seqs:
            total_time += seq.horizon
            lp = lag_pairs(seq, grid)
            child_chunks.append(lp.child + offset)
            if use_labels:
                src = lp.parent_label.astype(np.int64) - 1
                cell_chunks.append(src * grid.n_bins + lp.bin)
                if not isinstance(seq, LabeledSequence):
                    raise TypeError(
                        "per-stream estimation needs labeled sequences"
                    )
                label_chunks.append(seq.labels.astype(np.int64) - 1)
            else:
                cell_chunks.append(lp.bin)
                label_chunks.append(np.zeros(lp.n_events, dtype=np.int64))
            if keep_parents:
                parent_chunks.append(lp.parent.astype(np.int32))
            offset += lp.n_events
            event_bounds.append(offset)
            pair_bounds.append(pair_bounds[-1] + lp.n_pairs)
        self.n_events = offset
        self.total_time = total_time
        self.child = (np.concatenate(child_chunks) if child_chunks
                      else np.empty(0, dtype=np.int64))
        self.cell = (np.concatenate(cell_chunks) if cell_chunks
                     else np.empty(0, dtype=np.int64))
        self.event_label = (np.concatenate(label_chunks) if label_chunks
                            else np.empty(0, dtype=np.int64))
        self.parent = (np.concatenate(parent_chunks) if parent_chunks else None)
        self.event_bounds = np.asarray(event_bounds, dtype=np.int64)
        self.pair_bounds = np.asarray(pair_bounds, dtype=np.int64)
        self.n_pairs = int(self.cell.size)
        # events per stream, for the per-stream branching-mass updates
        self.stream_sizes = np.bincount(
            self.event_label, minlength=self.n_streams
        ).astype(np.float64)

    def uniform_init(self):
        """p uniform over each event's admissible parent set plus itself."""
        fanout = np.bincount(self.child, minlength=self.n_events)
        p_diag = 1.0 / (1.0 + fanout)
        p = p_diag[self.child]
        return p, p_diag

    def expectation(self, mu: float, heights_flat: np.ndarray):
        """Posterior parent probabilities under (mu, heights)."""
        phi_pair = heights_flat[self.cell]
        lam = mu + np.bincount(
            self.child, weights=phi_pair, minlength=self.n_events
        )
        p = phi_pair / lam[self.child]
        p_diag = mu / lam
        return p, p_diag


def _null_mstep(flat: _FlatPairs, p, p_diag):
    grid = flat.grid
    s_diag = float(p_diag.sum())
    mu = s_diag / flat.total_time
    alpha = min(max(1.0 - s_diag / flat.n_events, 0.0), 1.0)
    bin_mass = np.bincount(flat.cell, weights=p, minlength=grid.n_bins)
    total = float(bin_mass.sum())
    if total > 0.0:
        g = bin_mass / (grid.widths * total)
    else:
        g = np.full(grid.n_bins, 1.0 / grid.t_max)
    return NullParams(mu=mu, alpha=alpha, g=g, grid=grid)


def _full_mstep(flat: _FlatPairs, p, p_diag, warned: list):
    grid = flat.grid
    n0 = grid.n_bins
    s_diag = float(p_diag.sum())
    mu = s_diag / flat.total_time
    cell_mass = np.bincount(flat.cell, weights=p, minlength=2 * n0)
    cell_mass = cell_mass.reshape(2, n0)
    alphas = []
    gs = []
    for w in range(2):
        n_w = flat.stream_sizes[w]
        mass_w = float(cell_mass[w].sum())
        if n_w == 0:
            if not warned[w]:
                warnings.warn(
                    f"stream {w + 1} has no events; its kernel is a convention",
                    DegenerateProcess,
                )
                warned[w] = True
            alphas.append(0.0)
            gs.append(np.full(n0, 1.0 / grid.t_max))
            continue
        alphas.append(mass_w / n_w)
        if mass_w > 0.0:
            gs.append(cell_mass[w] / (grid.widths * mass_w))
        else:
            gs.append(np.full(n0, 1.0 / grid.t_max))
    return PerProcessParams(
        mu=mu, alpha1=alphas[0], g1=gs[0], alpha2=alphas[1], g2=gs[1], grid=grid,
    )


def _heights_flat(params: NullParams | PerProcessParams) -> np.ndarray:
    if isinstance(params, NullParams):
        return params.alpha * params.g
    return np.concatenate([params.alpha1 * params.g1, params.alpha2 * params.g2])


def _log_g_flat(params: NullParams | PerProcessParams) -> np.ndarray:
    """Per-cell log(alpha * g); -inf where the kernel has no mass."""
    with np.errstate(divide="ignore"):
        return np.log(_heights_flat(params))


def _flat_lower_bound(params, flat: _FlatPairs, p, p_diag) -> float:
    """Complete-data bound: expected complete log-likelihood + entropy.

    The pair term p * log(alpha_w * g_w(bin)) is split nowhere; cells
    with zero kernel mass but positive posterior mass give -inf, which
    is the honest value of the bound there.
    """
    if isinstance(params, NullParams):
        branching_mass = -params.alpha * flat.n_events
    else:
        branching_mass = -(params.alpha1 * flat.stream_sizes[0]
                           + params.alpha2 * flat.stream_sizes[1])
    s_diag = float(p_diag.sum())
    value = branching_mass - params.mu * flat.total_time
    value += s_diag * np.log(params.mu)
    log_h = _log_g_flat(params)[flat.cell]
    mask = p > 0
    if np.any(np.isneginf(log_h[mask])):
        return float("-inf")
    value += float(p[mask] @ log_h[mask])
    value -= float(xlogy(p, p).sum() + xlogy(p_diag, p_diag).sum())
    return value


def _run_em(flat: _FlatPairs, mstep, tol: float, max_iter: int):
    if flat.n_events == 0:
        raise AllEmpty("no events in any sequence; nothing to estimate")
    if tol <= 0 or max_iter < 1:
        raise DomainError("tol must be > 0 and max_iter >= 1")
    p, p_diag = flat.uniform_init()
    trace = []
    change = np.inf
    converged = False
    n_iter = 0
    for _ in range(max_iter):
        params = mstep(flat, p, p_diag)
        n_iter += 1
        trace.append(_flat_lower_bound(params, flat, p, p_diag))
        p_new, pd_new = flat.expectation(params.mu, _heights_flat(params))
        change = max(
            float(np.max(np.abs(p_new - p))) if p.size else 0.0,
            float(np.max(np.abs(pd_new - p_diag))),
        )
        p, p_diag = p_new, pd_new
        if change < tol:
            converged = True
            break
    if not converged:
        warnings.warn(
            f"EM stopped at max_iter={max_iter} with change {change:.3e} "
            f">= tol {tol:.3e}",
            NoConvergence,
        )
    return params, p, p_diag, n_iter, change, converged, np.asarray(trace)


def _dense_branching(flat: _FlatPairs, p, p_diag) -> list[np.ndarray]:
    out = []
    n_seqs = flat.event_bounds.size - 1
    for l in range(n_seqs):
        e0, e1 = flat.event_bounds[l], flat.event_bounds[l + 1]
        q0, q1 = flat.pair_bounds[l], flat.pair_bounds[l + 1]
        n = int(e1 - e0)
        mat = np.zeros((n, n))
        rows = (flat.child[q0:q1] - e0).astype(np.int64)
        cols = flat.parent[q0:q1].astype(np.int64)
        mat[rows, cols] = p[q0:q1]
        idx = np.arange(n)
        mat[idx, idx] = p_diag[e0:e1]
        out.append(mat)
    return out


def em_fit_null(
    seqs: list[EventSequence | LabeledSequence],
    grid: BinGrid,
    tol: float = 1e-3,
    max_iter: int = 500,
    return_branching: bool = False,
) -> EmReport:
    """Fit the shared-kernel model to a dataset of sequences.

    Labels, if present, are ignored; the result is identical for any
    relabeling of the same event times. Raises AllEmpty when the dataset
    has no events at all. Warns NoConvergence when max_iter is reached.
    """
    flat = _FlatPairs(seqs, grid, use_labels=False, keep_parents=return_branching)
    params, p, p_diag, n_iter, change, converged, trace = _run_em(
        flat, _null_mstep, tol, max_iter
    )
    branching = _dense_branching(flat, p, p_diag) if return_branching else None
    return EmReport(
        params=params, n_iter=n_iter, final_change=change,
        converged=converged, lower_bound_trace=trace, branching=branching,
    )


def em_fit_full(
    seqs: list[LabeledSequence],
    grid: BinGrid,
    tol: float = 1e-3,
    max_iter: int = 500,
    return_branching: bool = False,
) -> EmReport:
    """Fit per-stream kernels with a shared background rate.

    A stream with no events gets alpha = 0 and a uniform g, with a
    DegenerateProcess warning.
    """
    flat = _FlatPairs(seqs, grid, use_labels=True, keep_parents=return_branching)
    warned = [False, False]

    def mstep(fl, p, pd):
        return _full_mstep(fl, p, pd, warned)

    params, p, p_diag, n_iter, change, converged, trace = _run_em(
        flat, mstep, tol, max_iter
    )
    branching = _dense_branching(flat, p, p_diag) if return_branching else None
    return EmReport(
        params=params, n_iter=n_iter, final_change=change,
        converged=converged, lower_bound_trace=trace, branching=branching,
    )


def _flat_from_dense(seqs, grid, branching, use_labels):
    """Validate dense branching matrices and read them into flat form."""
    if len(branching) != len(seqs):
        raise DomainError(
            f"{len(branching)} branching matrices for {len(seqs)} sequences"
        )
    flat = _FlatPairs(seqs, grid, use_labels=use_labels, keep_parents=True)
    p = np.empty(flat.n_pairs)
    p_diag = np.empty(flat.n_events)
    for l, (seq, mat) in enumerate(zip(seqs, branching)):
        mat = np.asarray(mat, dtype=np.float64)
        n = seq.n_events
        if mat.shape != (n, n):
            raise DomainError(
                f"branching matrix {l} has shape {mat.shape}, expected {(n, n)}"
            )
        if np.any(mat < -1e-12):
            raise DomainError(f"branching matrix {l} has negative entries")
        if n and np.max(np.abs(mat.sum(axis=1) - 1.0)) > 1e-10:
            raise DomainError(f"branching matrix {l} rows must sum to 1")
        e0, e1 = flat.event_bounds[l], flat.event_bounds[l + 1]
        q0, q1 = flat.pair_bounds[l], flat.pair_bounds[l + 1]
        rows = (flat.child[q0:q1] - e0).astype(np.int64)
        cols = flat.parent[q0:q1].astype(np.int64)
        admissible = np.zeros((n, n), dtype=bool)
        admissible[rows, cols] = True
        np.fill_diagonal(admissible, True)
        if np.any(np.abs(mat[~admissible]) > 1e-12):
            raise DomainError(
                f"branching matrix {l} puts mass on inadmissible pairs"
            )
        p[q0:q1] = mat[rows, cols]
        p_diag[e0:e1] = np.diag(mat)
    return flat, p, p_diag


def complete_data_lower_bound(
    params: NullParams | PerProcessParams,
    seqs: list[EventSequence | LabeledSequence],
    branching: list[np.ndarray],
) -> float:
    """Evaluate the EM objective for given parameters and branching.

    ``branching`` holds one row-stochastic matrix per sequence, entries
    only on the diagonal and on admissible (child, parent) pairs. For
    any fixed branching this lower-bounds the boundary-approximated
    log-likelihood, with equality at the posterior; maximizing over
    parameters is exactly the M-step. Useful as an external check that a
    fit's trace is consistent.
    """
    use_labels = isinstance(params, PerProcessParams)
    flat, p, p_diag = _flat_from_dense(seqs, params.grid, branching, use_labels)
    if flat.n_events == 0:
        raise AllEmpty("no events in any sequence")
    return _flat_lower_bound(params, flat, p, p_diag)
