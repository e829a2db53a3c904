"""Triggering kernels and the lag-bin grid.

A self-exciting model here is: background rate mu plus, for every past
event, a nonnegative triggering kernel phi evaluated at the elapsed lag.
phi integrates to the branching ratio, which must stay below 1 for the
process to be stable.

The estimator is nonparametric: phi is a histogram on a fixed grid of lag
bins (0 = d_0 < d_1 < ... < d_n], written phi(u) = alpha * g(u) with g a
piecewise-constant density on the bins. Exponential and power-law kernels
are provided as ground-truth generators and for the parametric baseline.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError

__all__ = [
    "BinGrid",
    "PiecewiseKernel",
    "ExponentialKernel",
    "PowerKernel",
    "HawkesModel",
    "GRID_PRESETS",
    "grid_from_spec",
]


@dataclass(frozen=True)
class BinGrid:
    """Lag bins B_k = (d_{k-1}, d_k] given by endpoints (0, d_1, ..., d_n).

    Endpoints must start at exactly 0 and strictly increase. The last
    endpoint t_max is the support bound: lags beyond it are outside every
    bin.
    """

    endpoints: tuple[float, ...]

    def __post_init__(self):
        pts = np.asarray(self.endpoints, dtype=np.float64).reshape(-1)
        if pts.size < 2:
            raise DomainError("grid needs at least one bin (two endpoints)")
        if not np.all(np.isfinite(pts)):
            raise DomainError("grid endpoints must be finite")
        if pts[0] != 0.0:
            raise DomainError(f"first grid endpoint must be 0, got {pts[0]}")
        if not np.all(np.diff(pts) > 0):
            raise DomainError("grid endpoints must strictly increase")
        object.__setattr__(self, "endpoints", tuple(float(p) for p in pts))

    @property
    def n_bins(self) -> int:
        return len(self.endpoints) - 1

    @property
    def t_max(self) -> float:
        return self.endpoints[-1]

    @property
    def widths(self) -> np.ndarray:
        return np.diff(np.asarray(self.endpoints))

    def bin_index(self, lags):
        """0-based bin index per lag; -1 for lags outside (0, t_max].

        A lag equal to an endpoint d_k falls in bin k-1 (bins are closed
        on the right).
        """
        arr = np.asarray(lags, dtype=np.float64)
        pts = np.asarray(self.endpoints)
        idx = np.searchsorted(pts, arr, side="left").astype(np.int64) - 1
        idx = np.where(arr > self.t_max, -1, idx)
        if np.ndim(lags) == 0:
            return int(idx)
        return idx

    def overlap(self, upper):
        """Lebesgue measure of B_k intersected with [0, upper], per bin.

        ``upper`` may be a scalar or an array; the result gains a trailing
        axis of length n_bins. Negative uppers give all zeros.
        """
        u = np.asarray(upper, dtype=np.float64)[..., None]
        lo = np.asarray(self.endpoints[:-1])
        hi = np.asarray(self.endpoints[1:])
        out = np.clip(np.minimum(u, hi) - lo, 0.0, None)
        if np.ndim(upper) == 0:
            return out.reshape(-1)
        return out


@dataclass(frozen=True)
class PiecewiseKernel:
    """Histogram kernel phi(u) = alpha * g_k on bin B_k, zero elsewhere.

    ``g`` is normalized at construction so that sum_k g_k * width_k = 1;
    alpha is then the branching ratio and must lie in [0, 1) so the
    process stays stable. Entries of g must be nonnegative with positive
    total mass.
    """

    alpha: float
    g: np.ndarray
    grid: BinGrid

    def __post_init__(self):
        alpha = float(self.alpha)
        if not np.isfinite(alpha) or not (0.0 <= alpha < 1.0):
            raise DomainError(f"alpha must lie in [0, 1), got {alpha}")
        g = np.array(self.g, dtype=np.float64, copy=True).reshape(-1)
        if g.size != self.grid.n_bins:
            raise DomainError(
                f"g has {g.size} entries for {self.grid.n_bins} bins"
            )
        if not np.all(np.isfinite(g)) or np.any(g < 0):
            raise DomainError("g must be finite and nonnegative")
        mass = float(g @ self.grid.widths)
        if mass <= 0.0:
            raise DomainError("g must have positive total mass")
        g = g / mass
        g.setflags(write=False)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "g", g)

    @property
    def branching_ratio(self) -> float:
        return self.alpha

    @property
    def support(self) -> float:
        return self.grid.t_max

    def phi(self, lags):
        """Kernel value per lag; zero outside (0, t_max]."""
        idx = self.grid.bin_index(lags)
        idx_arr = np.atleast_1d(np.asarray(idx))
        vals = np.where(idx_arr >= 0, self.alpha * self.g[idx_arr], 0.0)
        if np.ndim(lags) == 0:
            return float(vals[0])
        return vals

    def integral(self, upper):
        """Integral of phi over [0, upper]."""
        ov = self.grid.overlap(np.maximum(upper, 0.0))
        return ov @ (self.alpha * self.g)

    @property
    def values(self) -> np.ndarray:
        """Per-bin kernel heights alpha * g_k."""
        return self.alpha * self.g


@dataclass(frozen=True)
class ExponentialKernel:
    """phi(u) = amplitude * exp(-decay * u) for u > 0.

    Branching ratio is amplitude / decay.
    """

    amplitude: float
    decay: float

    def __post_init__(self):
        if not np.isfinite(self.amplitude) or self.amplitude < 0:
            raise DomainError("amplitude must be finite and >= 0")
        if not np.isfinite(self.decay) or self.decay <= 0:
            raise DomainError("decay must be finite and > 0")

    @property
    def branching_ratio(self) -> float:
        return self.amplitude / self.decay

    @property
    def support(self) -> float:
        return np.inf

    def phi(self, lags):
        lags = np.asarray(lags, dtype=np.float64)
        vals = np.where(lags > 0, self.amplitude * np.exp(-self.decay * np.maximum(lags, 0.0)), 0.0)
        if vals.ndim == 0:
            return float(vals)
        return vals

    def integral(self, upper):
        u = np.maximum(np.asarray(upper, dtype=np.float64), 0.0)
        out = (self.amplitude / self.decay) * (1.0 - np.exp(-self.decay * u))
        if out.ndim == 0:
            return float(out)
        return out


@dataclass(frozen=True)
class PowerKernel:
    """phi(u) = alpha * (p - 1) * c**(p-1) * (c + u)**(-p) for u > 0.

    Requires p > 1 and c > 0; alpha is the branching ratio (phi integrates
    to alpha over (0, inf)). Monotone decreasing in the lag.
    """

    alpha: float
    cutoff: float
    exponent: float

    def __post_init__(self):
        if not np.isfinite(self.alpha) or self.alpha < 0:
            raise DomainError("alpha must be finite and >= 0")
        if not np.isfinite(self.cutoff) or self.cutoff <= 0:
            raise DomainError("cutoff must be finite and > 0")
        if not np.isfinite(self.exponent) or self.exponent <= 1:
            raise DomainError("exponent must be finite and > 1")

    @property
    def branching_ratio(self) -> float:
        return self.alpha

    @property
    def support(self) -> float:
        return np.inf

    def phi(self, lags):
        lags = np.asarray(lags, dtype=np.float64)
        c, p = self.cutoff, self.exponent
        base = self.alpha * (p - 1.0) * c ** (p - 1.0)
        vals = np.where(lags > 0, base * (c + np.maximum(lags, 0.0)) ** (-p), 0.0)
        if vals.ndim == 0:
            return float(vals)
        return vals

    def integral(self, upper):
        u = np.maximum(np.asarray(upper, dtype=np.float64), 0.0)
        c, p = self.cutoff, self.exponent
        out = self.alpha * (1.0 - (c / (c + u)) ** (p - 1.0))
        if out.ndim == 0:
            return float(out)
        return out


Kernel = PiecewiseKernel | ExponentialKernel | PowerKernel


@dataclass(frozen=True)
class HawkesModel:
    """Background rate plus triggering kernel; the simulation unit."""

    mu: float
    kernel: Kernel

    def __post_init__(self):
        if not np.isfinite(self.mu) or self.mu <= 0:
            raise DomainError("mu must be finite and > 0")

    @property
    def branching_ratio(self) -> float:
        return self.kernel.branching_ratio


# Named bin-grid presets accepted by the CLI --bins flag. Identified by
# their bin count; all span (0, 2].
GRID_PRESETS: dict[str, BinGrid] = {
    "paper14": BinGrid((0.0, 0.04, 0.08, 0.12, 0.16, 0.2, 0.26, 0.32, 0.38,
                        0.45, 0.55, 0.65, 0.75, 1.0, 2.0)),
    "paper3": BinGrid((0.0, 0.2, 0.6, 2.0)),
    "paper12": BinGrid((0.0, 0.04, 0.08, 0.12, 0.16, 0.2, 0.24, 0.28, 0.32,
                        0.36, 0.4, 0.7, 2.0)),
}


def grid_from_spec(spec: str) -> BinGrid:
    """Parse a --bins value: a preset name or comma-separated endpoints."""
    name = spec.strip()
    if name in GRID_PRESETS:
        return GRID_PRESETS[name]
    try:
        pts = tuple(float(tok) for tok in name.split(",") if tok.strip())
    except ValueError as exc:
        raise DomainError(f"cannot parse bin endpoints {spec!r}: {exc}") from None
    return BinGrid(pts)
