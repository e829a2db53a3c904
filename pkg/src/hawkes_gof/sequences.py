"""Event-sequence containers and merging.

An event sequence is a finite, ordered set of event times on (0, horizon].
Two sequences observed on a common horizon can be merged into a single
labeled sequence; the merged point process of two independent streams is
again of the same family, with intensities adding, which is what makes the
two-sample construction work.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    HorizonMismatch,
    NonPositiveHorizon,
    TimeOutOfRange,
)

__all__ = [
    "EventSequence",
    "LabeledSequence",
    "validate_sequence",
    "merge_sequences",
]


def _check_horizon(horizon: float) -> float:
    horizon = float(horizon)
    if not np.isfinite(horizon) or horizon <= 0.0:
        raise NonPositiveHorizon(f"horizon must be finite and > 0, got {horizon!r}")
    return horizon


def _check_times(times: np.ndarray, horizon: float) -> np.ndarray:
    times = np.array(times, dtype=np.float64, copy=True).reshape(-1)
    if times.size and not np.all(np.isfinite(times)):
        bad = times[~np.isfinite(times)][0]
        raise TimeOutOfRange(f"non-finite event time {bad!r}")
    if times.size:
        # stable sort: equal and noise-perturbed times keep their input order
        times = times[np.argsort(times, kind="stable")]
        if times[0] <= 0.0 or times[-1] > horizon:
            raise TimeOutOfRange(
                f"event times must lie in (0, {horizon}]; "
                f"range is [{times[0]}, {times[-1]}]"
            )
    times.setflags(write=False)
    return times


@dataclass(frozen=True)
class EventSequence:
    """A single realization: ordered event times on (0, horizon].

    Times are stored sorted (stable) as an immutable float64 array.
    """

    id: str
    horizon: float
    times: np.ndarray = field(default_factory=lambda: np.empty(0))

    def __post_init__(self):
        object.__setattr__(self, "horizon", _check_horizon(self.horizon))
        object.__setattr__(self, "times", _check_times(self.times, self.horizon))

    @property
    def n_events(self) -> int:
        return int(self.times.size)

    def __len__(self) -> int:
        return self.n_events


def validate_sequence(id: str, horizon: float, times) -> EventSequence:
    """Build a validated sequence from raw inputs.

    Sorts times stably, so values perturbed by numerical noise keep a
    deterministic order. Raises NonPositiveHorizon or TimeOutOfRange on
    invalid input (non-finite values included).
    """
    return EventSequence(id=str(id), horizon=horizon, times=times)


@dataclass(frozen=True)
class LabeledSequence:
    """A merged realization of two streams on a common horizon.

    ``labels[i]`` is 1 or 2, naming the source stream of ``times[i]``.
    At tied times, label-1 events come first.
    """

    id: str
    horizon: float
    times: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "horizon", _check_horizon(self.horizon))
        times = np.array(self.times, dtype=np.float64, copy=True).reshape(-1)
        labels = np.array(self.labels, dtype=np.int8, copy=True).reshape(-1)
        if times.size != labels.size:
            raise TimeOutOfRange(
                f"times ({times.size}) and labels ({labels.size}) differ in length"
            )
        if labels.size and not np.isin(labels, (1, 2)).all():
            raise TimeOutOfRange("labels must be 1 or 2")
        if times.size:
            if not np.all(np.isfinite(times)):
                raise TimeOutOfRange("non-finite event time")
            order = np.argsort(times, kind="stable")
            times = times[order]
            labels = labels[order]
            if times[0] <= 0.0 or times[-1] > self.horizon:
                raise TimeOutOfRange(
                    f"event times must lie in (0, {self.horizon}]"
                )
        times.setflags(write=False)
        labels.setflags(write=False)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "labels", labels)

    @property
    def n_events(self) -> int:
        return int(self.times.size)

    @property
    def n1(self) -> int:
        return int(np.count_nonzero(self.labels == 1))

    @property
    def n2(self) -> int:
        return int(np.count_nonzero(self.labels == 2))

    def times_of(self, label: int) -> np.ndarray:
        """Event times of one source stream, in order."""
        return self.times[self.labels == label]

    def __len__(self) -> int:
        return self.n_events


def merge_sequences(s1: EventSequence, s2: EventSequence) -> LabeledSequence:
    """Merge two sequences on a common horizon into one labeled sequence.

    The merge is stable and label-1 events precede label-2 events at tied
    times. Raises HorizonMismatch if the horizons differ.
    """
    if s1.horizon != s2.horizon:
        raise HorizonMismatch(
            f"horizons differ: {s1.horizon} vs {s2.horizon}"
        )
    times = np.concatenate([s1.times, s2.times])
    labels = np.concatenate(
        [np.ones(s1.n_events, dtype=np.int8), np.full(s2.n_events, 2, dtype=np.int8)]
    )
    # LabeledSequence's stable sort sees all label-1 entries first, which
    # implements the tie rule.
    return LabeledSequence(
        id=f"{s1.id}+{s2.id}",
        horizon=s1.horizon,
        times=times,
        labels=labels,
    )
