"""Laws, samples and distances between them.

``FiniteLaw`` is an exactly normalised table over hashable outcomes.
``EmpiricalSample`` holds real values with optional importance weights.
Real-valued laws and samples can be compared with ``ks_distance`` and
``wasserstein1``; keyed laws with ``total_variation``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Hashable, Iterable, Sequence

import numpy as np

from .errors import DomainError

NORMALIZATION_TOL = 1e-12


@dataclass(frozen=True)
class FiniteLaw:
    """A probability table. ``outcomes[i]`` has probability ``probs[i]``."""

    outcomes: tuple
    probs: np.ndarray = field(repr=False)

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=float)
        object.__setattr__(self, "outcomes", tuple(self.outcomes))
        object.__setattr__(self, "probs", probs)
        if probs.ndim != 1 or len(probs) != len(self.outcomes):
            raise DomainError("outcomes and probs must have equal length")
        if len(set(self.outcomes)) != len(self.outcomes):
            raise DomainError("duplicate outcomes in FiniteLaw")
        if np.any(probs < 0.0):
            raise DomainError("negative probability in FiniteLaw")
        if abs(probs.sum() - 1.0) > NORMALIZATION_TOL:
            raise DomainError(f"FiniteLaw probabilities sum to {probs.sum():.15g}, not 1")

    @classmethod
    def from_weights(cls, outcomes: Sequence[Hashable], weights) -> "FiniteLaw":
        """Normalise nonnegative weights into a law."""
        w = np.asarray(weights, dtype=float)
        total = w.sum()
        if not total > 0.0:
            raise DomainError("weights must have positive total")
        return cls(tuple(outcomes), w / total)

    @classmethod
    def from_dict(cls, table: dict) -> "FiniteLaw":
        return cls.from_weights(list(table.keys()), list(table.values()))

    def as_dict(self) -> dict:
        return dict(zip(self.outcomes, self.probs.tolist()))

    def __len__(self):
        return len(self.outcomes)

    def prob(self, outcome) -> float:
        try:
            return float(self.probs[self.outcomes.index(outcome)])
        except ValueError:
            return 0.0

    def pushforward(self, fn) -> "FiniteLaw":
        """Law of ``fn(outcome)``; equal images are merged."""
        merged: dict = {}
        for o, p in zip(self.outcomes, self.probs):
            key = fn(o)
            merged[key] = merged.get(key, 0.0) + p
        return FiniteLaw.from_dict(merged)

    def is_real_valued(self) -> bool:
        return all(isinstance(o, (int, float, np.integer, np.floating)) for o in self.outcomes)

    def sorted_real(self) -> tuple[np.ndarray, np.ndarray]:
        values = np.asarray(self.outcomes, dtype=float)
        order = np.argsort(values, kind="stable")
        return values[order], self.probs[order]

    def mean(self) -> float:
        values, probs = self.sorted_real()
        return float(values @ probs)

    def variance(self) -> float:
        values, probs = self.sorted_real()
        m = values @ probs
        return float(((values - m) ** 2) @ probs)


@dataclass(frozen=True)
class EmpiricalSample:
    """Real-valued sample, optionally importance weighted (self-normalised)."""

    values: np.ndarray
    weights: np.ndarray | None = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float).ravel()
        if values.size == 0:
            raise DomainError("empty sample")
        object.__setattr__(self, "values", values)
        if self.weights is not None:
            w = np.asarray(self.weights, dtype=float).ravel()
            if w.shape != values.shape:
                raise DomainError("weights and values must have equal length")
            if np.any(w < 0.0) or not w.sum() > 0.0:
                raise DomainError("weights must be nonnegative with positive total")
            object.__setattr__(self, "weights", w / w.sum())

    def normalized_weights(self) -> np.ndarray:
        if self.weights is None:
            return np.full(self.values.size, 1.0 / self.values.size)
        return self.weights

    def ess(self) -> float:
        return ess(self.normalized_weights())


def total_variation(p: FiniteLaw, q: FiniteLaw, strict_keys: bool = False) -> float:
    """``(1/2) sum |p - q|`` over the union of outcomes.

    With ``strict_keys`` the two laws must list the same outcomes.
    """
    pd, qd = p.as_dict(), q.as_dict()
    if strict_keys and set(pd) != set(qd):
        raise DomainError("total_variation: outcome sets differ")
    keys = set(pd) | set(qd)
    return 0.5 * sum(abs(pd.get(k, 0.0) - qd.get(k, 0.0)) for k in keys)


def _as_weighted(x) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(x, FiniteLaw):
        if not x.is_real_valued():
            raise DomainError("distance on the line needs a real-valued FiniteLaw")
        return x.sorted_real()
    if not isinstance(x, EmpiricalSample):
        x = EmpiricalSample(np.asarray(x, dtype=float))
    order = np.argsort(x.values, kind="stable")
    return x.values[order], x.normalized_weights()[order]


def _cdfs_on_merged_grid(a, b):
    va, wa = _as_weighted(a)
    vb, wb = _as_weighted(b)
    grid = np.union1d(va, vb)
    ca = np.concatenate([[0.0], np.cumsum(wa)])
    cb = np.concatenate([[0.0], np.cumsum(wb)])
    fa = ca[np.searchsorted(va, grid, side="right")]
    fb = cb[np.searchsorted(vb, grid, side="right")]
    return grid, fa, fb


def ks_distance(a, b) -> float:
    """Sup-norm distance between the (right-continuous) CDFs of ``a`` and ``b``.

    Both CDFs are step functions jumping only at the merged support, so the
    supremum is attained at one of those points.
    """
    _, fa, fb = _cdfs_on_merged_grid(a, b)
    return float(np.max(np.abs(fa - fb)))


def wasserstein1(a, b) -> float:
    """``integral |F_a - F_b|`` on the line."""
    grid, fa, fb = _cdfs_on_merged_grid(a, b)
    return float(np.sum(np.abs(fa - fb)[:-1] * np.diff(grid)))


def ess(weights) -> float:
    """Effective sample size ``(sum w)^2 / sum w^2``."""
    w = np.asarray(weights, dtype=float)
    if w.size == 0:
        raise DomainError("ess of empty weights")
    s2 = np.sum(w * w)
    if s2 == 0.0:
        return 0.0
    return float(w.sum() ** 2 / s2)


def ess_from_log_weights(log_weights) -> float:
    lw = np.asarray(log_weights, dtype=float)
    if lw.size == 0:
        raise DomainError("ess of empty weights")
    finite = np.isfinite(lw)
    if not finite.any():
        return 0.0
    return ess(np.exp(lw - lw[finite].max()))


def normalize_log_weights(log_weights) -> np.ndarray:
    lw = np.asarray(log_weights, dtype=float)
    w = np.exp(lw - np.max(lw))
    return w / w.sum()


@dataclass(frozen=True)
class TrendReport:
    decreasing: bool
    rungs: int
    violations: tuple[int, ...]
    slack: float

    def summary(self) -> str:
        verdict = "decreasing" if self.decreasing else "not decreasing"
        return f"{verdict} over {self.rungs} rungs (slack {self.slack:.0%}, violations at {list(self.violations)})"


def trend_report(series: Iterable[float], slack: float = 0.10, min_rungs: int = 3) -> TrendReport:
    """Is the sequence decreasing, allowing each step to rise by ``slack``?

    ``slack = 0`` asks for strict decrease. Fewer than ``min_rungs``
    values never count as a decreasing trend.
    """
    xs = [float(x) for x in series]
    if not xs:
        raise DomainError("trend_report of an empty series")
    violations = []
    for i in range(1, len(xs)):
        limit = xs[i - 1] * (1.0 + slack) if slack > 0 else xs[i - 1]
        ok = xs[i] <= limit if slack > 0 else xs[i] < limit
        if not ok or not np.isfinite(xs[i]):
            violations.append(i)
    decreasing = len(xs) >= min_rungs and not violations and xs[-1] < xs[0]
    return TrendReport(decreasing, len(xs), tuple(violations), slack)
