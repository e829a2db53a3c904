"""End-to-end test harness: pair, merge, fit once, score many.

One run takes two equal-length datasets, merges them pairwise, fits the
shared-kernel null once on all merged sequences, then repeats K times:
shuffle the first dataset's order (so the pairing is fresh), merge the
selected pairs, draw N of them without replacement, and compute one
score statistic at the common null fit. Under the null the K statistics
are (approximately) i.i.d. chi-square draws, which is what the
calibration checks consume.

Each trial owns a private PRNG stream keyed by (seed, 2**32 + trial);
the offset keeps trial streams disjoint from simulation streams under a
reused master seed. Trials may run on a thread pool; results are
reported in trial order, so output bytes do not depend on the thread
count.
"""

from __future__ import annotations

import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np
from scipy.stats import rankdata

from .asymptotics import PowerQuery, asymptotic_power, chi2_quantile
from .em import em_fit_null, EmReport
from .errors import (
    DimensionMismatch,
    DomainError,
    InsufficientSequences,
    SingularCovariance,
)
from .gs import gs_statistic
from .kernels import BinGrid, grid_from_spec
from .likelihood import NullParams
from .sequences import EventSequence, merge_sequences
from .simulate import sequence_rng

__all__ = [
    "TestConfig",
    "TrialResult",
    "RunReport",
    "run_gof",
    "emit_report",
    "fisher_yates",
    "qq_table",
    "roc_points",
    "auc",
    "power_curve",
    "write_csv",
]

_TRIAL_STREAM_OFFSET = 2**32


@dataclass(frozen=True)
class TestConfig:
    """Configuration of one run; echoed verbatim into every report."""

    bins: tuple[float, ...]
    n: int
    k: int
    level: float = 0.05
    seed: int = 0
    em_tol: float = 1e-3
    em_max_iter: int = 500
    dof_override: int | None = None
    threads: int = 1
    d1: str | None = None
    d2: str | None = None
    out_dir: str = "."

    def __post_init__(self):
        if isinstance(self.bins, str):
            grid = grid_from_spec(self.bins)
        else:
            grid = BinGrid(tuple(float(b) for b in self.bins))
        object.__setattr__(self, "bins", grid.endpoints)
        if self.n < grid.n_bins:
            raise InsufficientSequences(
                f"n = {self.n} sequences per statistic < {grid.n_bins} bins"
            )
        if self.k < 1:
            raise DomainError(f"k must be >= 1, got {self.k}")
        if not (0.0 < self.level < 1.0):
            raise DomainError(f"level must lie in (0, 1), got {self.level}")
        if self.em_tol <= 0 or self.em_max_iter < 1:
            raise DomainError("em_tol must be > 0 and em_max_iter >= 1")
        if self.threads < 1:
            raise DomainError(f"threads must be >= 1, got {self.threads}")
        if self.dof_override is not None and self.dof_override < 1:
            raise DomainError("dof_override must be >= 1 when set")

    @property
    def grid(self) -> BinGrid:
        return BinGrid(self.bins)

    @classmethod
    def from_mapping(cls, raw: dict[str, str], **overrides) -> "TestConfig":
        """Build from flat config text plus keyword overrides.

        String values are parsed per field; unknown keys fail loudly.
        """
        parsers = {
            "bins": lambda s: grid_from_spec(s).endpoints,
            "n": int, "k": int, "level": float, "seed": int,
            "em_tol": float, "em_max_iter": int,
            "dof_override": lambda s: None if s.lower() == "none" else int(s),
            "threads": int, "d1": str, "d2": str, "out_dir": str,
        }
        kwargs = {}
        for key, value in raw.items():
            if key not in parsers:
                raise DomainError(f"unknown config key {key!r}")
            kwargs[key] = parsers[key](value)
        for key, value in overrides.items():
            if value is not None:
                kwargs[key] = value
        if "bins" not in kwargs:
            raise DomainError("config must set bins")
        if "n" not in kwargs or "k" not in kwargs:
            raise DomainError("config must set n and k")
        return cls(**kwargs)


@dataclass(frozen=True)
class TrialResult:
    trial: int
    gs: float
    p_value: float
    reject: bool
    failed: bool = False
    error: str | None = None


@dataclass(frozen=True)
class RunReport:
    """K trial rows plus the shared fit and the config that made them."""

    trials: list[TrialResult]
    null_fit: NullParams
    em_iterations: int
    em_final_change: float
    em_converged: bool
    config: TestConfig
    wall_time: float

    def gs_values(self, finite_only: bool = True) -> np.ndarray:
        vals = np.array([t.gs for t in self.trials])
        return vals[np.isfinite(vals)] if finite_only else vals

    def rejection_rate(self) -> float:
        ok = [t for t in self.trials if not t.failed]
        if not ok:
            return float("nan")
        return float(np.mean([t.reject for t in ok]))


def fisher_yates(n: int, rng: np.random.Generator) -> np.ndarray:
    """Explicit downward Fisher-Yates permutation of range(n)."""
    idx = np.arange(n)
    if n < 2:
        return idx
    draws = rng.integers(np.arange(n, 1, -1))
    for m, j in enumerate(draws):
        i = n - 1 - m
        idx[i], idx[j] = idx[j], idx[i]
    return idx


def run_gof(
    d1: list[EventSequence],
    d2: list[EventSequence],
    cfg: TestConfig,
    prefit: EmReport | None = None,
) -> RunReport:
    """Run the full pairing / fitting / scoring loop.

    ``prefit`` lets callers reuse a null fit from a previous run over
    the same merged dataset (the default refits). A SingularCovariance
    in one trial marks that row failed and continues; every other error
    propagates.
    """
    start = time.perf_counter()
    big_l = len(d1)
    if len(d2) != big_l:
        raise DimensionMismatch(
            f"datasets must pair up: {big_l} vs {len(d2)} sequences"
        )
    if big_l < cfg.n:
        raise InsufficientSequences(
            f"need at least n = {cfg.n} pairs, got {big_l}"
        )
    grid = cfg.grid
    if prefit is None:
        merged_all = [merge_sequences(a, b) for a, b in zip(d1, d2)]
        prefit = em_fit_null(
            merged_all, grid, tol=cfg.em_tol, max_iter=cfg.em_max_iter
        )
    theta_hat = prefit.params

    def one_trial(trial: int) -> TrialResult:
        rng = sequence_rng(cfg.seed, _TRIAL_STREAM_OFFSET + trial)
        perm = fisher_yates(big_l, rng)
        chosen = fisher_yates(big_l, rng)[: cfg.n]
        seqs = [merge_sequences(d1[perm[i]], d2[i]) for i in chosen]
        try:
            res = gs_statistic(
                theta_hat, seqs, level=cfg.level, dof=cfg.dof_override
            )
        except SingularCovariance as exc:
            return TrialResult(
                trial=trial, gs=float("nan"), p_value=float("nan"),
                reject=False, failed=True, error=str(exc),
            )
        return TrialResult(
            trial=trial, gs=res.statistic, p_value=res.p_value,
            reject=res.reject,
        )

    if cfg.threads > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            trials = list(pool.map(one_trial, range(cfg.k)))
    else:
        trials = [one_trial(i) for i in range(cfg.k)]
    return RunReport(
        trials=trials,
        null_fit=theta_hat,
        em_iterations=prefit.n_iter,
        em_final_change=prefit.final_change,
        em_converged=prefit.converged,
        config=cfg,
        wall_time=time.perf_counter() - start,
    )


# ---------------------------------------------------------------------------
# report files


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def write_csv(path: str, header: list[str], rows) -> None:
    """Write rows of scalars with deterministic shortest-float text."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def emit_report(
    report: RunReport, out_dir: str | None = None, format: str = "csv"
) -> list[str]:
    """Write gs.csv (or gs.jsonl) and fit.jsonl; return the paths.

    Output bytes depend only on the report contents, never on wall
    time, so identical runs produce identical files.
    """
    if format not in ("csv", "jsonl"):
        raise DomainError(f"format must be csv or jsonl, got {format!r}")
    out_dir = out_dir if out_dir is not None else report.config.out_dir
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    if format == "csv":
        gs_path = os.path.join(out_dir, "gs.csv")
        write_csv(
            gs_path,
            ["trial", "gs", "pvalue", "reject"],
            ((t.trial, t.gs, t.p_value, t.reject) for t in report.trials),
        )
    else:
        gs_path = os.path.join(out_dir, "gs.jsonl")
        with open(gs_path, "w", encoding="utf-8") as fh:
            for t in report.trials:
                fh.write(json.dumps(
                    {"trial": t.trial, "gs": t.gs, "pvalue": t.p_value,
                     "reject": bool(t.reject), "failed": t.failed},
                    separators=(",", ":"), allow_nan=True,
                ) + "\n")
    paths.append(gs_path)
    fit_path = os.path.join(out_dir, "fit.jsonl")
    with open(fit_path, "w", encoding="utf-8") as fh:
        cfg = asdict(report.config)
        cfg["bins"] = list(cfg["bins"])
        fh.write(json.dumps({"record": "config", **cfg},
                            separators=(",", ":")) + "\n")
        fh.write(json.dumps(
            {"record": "null_fit", "mu": report.null_fit.mu,
             "alpha": report.null_fit.alpha,
             "g": [float(v) for v in report.null_fit.g],
             "endpoints": list(report.null_fit.grid.endpoints)},
            separators=(",", ":")) + "\n")
        fh.write(json.dumps(
            {"record": "em", "iterations": report.em_iterations,
             "final_change": report.em_final_change,
             "converged": report.em_converged},
            separators=(",", ":")) + "\n")
    paths.append(fit_path)
    return paths


# ---------------------------------------------------------------------------
# derived tables


def qq_table(values, dof: int) -> np.ndarray:
    """Sorted sample values against central chi-square plotting points.

    Column 0: chi2 quantiles at (i + 0.5) / n; column 1: order
    statistics of the sample.
    """
    vals = np.sort(np.asarray(values, dtype=np.float64))
    if vals.size == 0 or not np.all(np.isfinite(vals)):
        raise DomainError("qq_table needs finite values")
    n = vals.size
    theo = np.array(
        [chi2_quantile((i + 0.5) / n, dof) for i in range(n)]
    )
    return np.column_stack([theo, vals])


def auc(pos, neg) -> float:
    """Probability a positive score outranks a negative one (ties 0.5)."""
    pos = np.asarray(pos, dtype=np.float64)
    neg = np.asarray(neg, dtype=np.float64)
    if pos.size == 0 or neg.size == 0:
        raise DomainError("auc needs nonempty score sets")
    if not (np.all(np.isfinite(pos)) and np.all(np.isfinite(neg))):
        raise DomainError("auc needs finite scores")
    ranks = rankdata(np.concatenate([pos, neg]))
    pos_ranks = ranks[: pos.size].sum()
    return float(
        (pos_ranks - pos.size * (pos.size + 1) / 2.0) / (pos.size * neg.size)
    )


def roc_points(pos, neg) -> np.ndarray:
    """(fpr, tpr, threshold) rows swept across all observed scores."""
    pos = np.sort(np.asarray(pos, dtype=np.float64))
    neg = np.sort(np.asarray(neg, dtype=np.float64))
    if pos.size == 0 or neg.size == 0:
        raise DomainError("roc needs nonempty score sets")
    thresholds = np.unique(np.concatenate([pos, neg]))[::-1]
    tpr = 1.0 - np.searchsorted(pos, thresholds, side="left") / pos.size
    fpr = 1.0 - np.searchsorted(neg, thresholds, side="left") / neg.size
    rows = np.column_stack([fpr, tpr, thresholds])
    lead = np.array([[0.0, 0.0, np.inf]])
    return np.vstack([lead, rows])


def power_curve(
    r: int, delta_grid, scale: float, level: float = 0.05,
    critical: float | None = None,
) -> np.ndarray:
    """(delta_norm, asymptotic power) rows over a grid of separations."""
    if critical is None:
        critical = chi2_quantile(1.0 - level, r)
    rows = []
    for delta in np.asarray(delta_grid, dtype=np.float64):
        q = PowerQuery(r=r, delta_norm=float(delta), scale=scale,
                       critical=critical)
        rows.append((float(delta), asymptotic_power(q)))
    return np.asarray(rows)
