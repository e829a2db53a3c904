"""Exact simulation of self-exciting sequences by thinning.

Candidate points are proposed from a piecewise-constant upper bound on the
conditional intensity and accepted with probability intensity / bound.
Between events the intensity never exceeds the bound used:

* exponential kernel: excitation only decays between events, so the
  current excitation is the bound (tracked in O(1) per candidate);
* power kernel: the kernel is monotone decreasing, so the intensity at
  the current time, with just-accepted events counted at their supremum
  value phi(0+), bounds the future;
* histogram kernel: each of the m events within the support window
  contributes at most alpha * max(g), and m cannot grow on rejections.

Randomness comes from a counter-based generator; each sequence gets its
own stream derived from (master_seed, stream_index), so datasets are
reproducible and order-independent. Stream indices below 2**32 are
reserved for simulation; the test pipeline derives its shuffling streams
above that, so a reused master seed cannot collide across stages.
"""

from __future__ import annotations

import numpy as np

from .errors import NonPositiveHorizon, UnstableKernel
from .kernels import (
    ExponentialKernel,
    HawkesModel,
    PiecewiseKernel,
    PowerKernel,
)
from .sequences import EventSequence

__all__ = [
    "sequence_rng",
    "simulate_hawkes",
    "simulate_dataset",
    "intensity",
]


def sequence_rng(master_seed: int, stream: int) -> np.random.Generator:
    """Independent generator for one (master_seed, stream) pair.

    The two indices are packed into the 128-bit key of a Philox counter
    generator, so distinct pairs give distinct, independent streams.
    """
    key = (int(master_seed) % 2**64) * 2**64 + (int(stream) % 2**64)
    return np.random.Generator(np.random.Philox(key=key))


def _grow(buf: np.ndarray) -> np.ndarray:
    out = np.empty(2 * buf.size, dtype=np.float64)
    out[: buf.size] = buf
    return out


def _simulate_exponential(mu, kern: ExponentialKernel, horizon, rng):
    amp, dec = kern.amplitude, kern.decay
    out = []
    t = 0.0
    excitation = 0.0  # sum of amp * exp(-dec * (t - t_i)) over accepted events
    while True:
        bound = mu + excitation
        t_new = t + rng.exponential(1.0 / bound)
        if t_new > horizon:
            break
        excitation *= np.exp(-dec * (t_new - t))
        t = t_new
        if rng.uniform() * bound <= mu + excitation:
            out.append(t)
            excitation += amp
    return np.asarray(out)


def _simulate_power(mu, kern: PowerKernel, horizon, rng):
    c, p = kern.cutoff, kern.exponent
    base = kern.alpha * (p - 1.0) * c ** (p - 1.0)
    buf = np.empty(256, dtype=np.float64)
    n = 0
    t = 0.0
    while True:
        # lag 0 (a just-accepted event) contributes its supremum phi(0+)
        bound = mu + float((base * (c + (t - buf[:n])) ** (-p)).sum())
        t_new = t + rng.exponential(1.0 / bound)
        if t_new > horizon:
            break
        t = t_new
        lam = mu + float((base * (c + (t - buf[:n])) ** (-p)).sum())
        if rng.uniform() * bound <= lam:
            if n == buf.size:
                buf = _grow(buf)
            buf[n] = t
            n += 1
    return buf[:n].copy()


def _simulate_piecewise(mu, kern: PiecewiseKernel, horizon, rng):
    t_max = kern.grid.t_max
    peak = float(kern.values.max())
    buf = np.empty(256, dtype=np.float64)
    n = 0
    t = 0.0
    while True:
        in_window = n - int(np.searchsorted(buf[:n], t - t_max, side="right"))
        bound = mu + in_window * peak
        t_new = t + rng.exponential(1.0 / bound)
        if t_new > horizon:
            break
        t = t_new
        lo = int(np.searchsorted(buf[:n], t - t_max, side="left"))
        lam = mu + float(kern.phi(t - buf[lo:n]).sum())
        if rng.uniform() * bound <= lam:
            if n == buf.size:
                buf = _grow(buf)
            buf[n] = t
            n += 1
    return buf[:n].copy()


def simulate_hawkes(
    model: HawkesModel,
    horizon: float,
    master_seed: int,
    stream: int = 0,
    id: str | None = None,
) -> EventSequence:
    """Simulate one sequence on (0, horizon].

    Raises UnstableKernel if the branching ratio is >= 1 and
    NonPositiveHorizon for an invalid horizon. Bit-for-bit reproducible
    for a given (master_seed, stream).
    """
    horizon = float(horizon)
    if not np.isfinite(horizon) or horizon <= 0:
        raise NonPositiveHorizon(f"horizon must be finite and > 0, got {horizon}")
    ratio = model.branching_ratio
    if ratio >= 1.0:
        raise UnstableKernel(
            f"branching ratio {ratio} >= 1; the cluster sizes have no finite mean"
        )
    rng = sequence_rng(master_seed, stream)
    kern = model.kernel
    if isinstance(kern, ExponentialKernel):
        times = _simulate_exponential(model.mu, kern, horizon, rng)
    elif isinstance(kern, PowerKernel):
        times = _simulate_power(model.mu, kern, horizon, rng)
    elif isinstance(kern, PiecewiseKernel):
        times = _simulate_piecewise(model.mu, kern, horizon, rng)
    else:  # pragma: no cover - the Kernel union is closed
        raise TypeError(f"unsupported kernel type {type(kern).__name__}")
    if id is None:
        id = f"sim-{master_seed}-{stream}"
    return EventSequence(id=id, horizon=horizon, times=times)


def simulate_dataset(
    model: HawkesModel,
    horizon: float,
    n_seqs: int,
    master_seed: int,
    id_prefix: str = "seq",
    stream_offset: int = 0,
) -> list[EventSequence]:
    """Simulate n_seqs independent sequences on a common horizon.

    Sequence i uses stream ``stream_offset + i``; pass distinct offsets
    (or seeds) to make several mutually independent datasets.
    """
    return [
        simulate_hawkes(
            model,
            horizon,
            master_seed,
            stream=stream_offset + i,
            id=f"{id_prefix}-{i}",
        )
        for i in range(int(n_seqs))
    ]


def intensity(model: HawkesModel, times: np.ndarray, at) -> np.ndarray:
    """Conditional intensity of ``model`` given past events, at query times.

    Only events strictly before each query time contribute.
    """
    times = np.asarray(times, dtype=np.float64)
    at_arr = np.atleast_1d(np.asarray(at, dtype=np.float64))
    lags = at_arr[:, None] - times[None, :]
    vals = model.mu + np.asarray(model.kernel.phi(lags)).sum(axis=1)
    if np.ndim(at) == 0:
        return float(vals[0])
    return vals
