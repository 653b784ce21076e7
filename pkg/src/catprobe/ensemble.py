"""Estimators over weighted ensembles of occupation probabilities.

An ensemble is a list of ``(w, p)`` pairs: ``p`` is the probability
``P_{L->L}`` obtained for one reservoir initial state or one noise
realization, ``w`` its statistical weight.  The central quantities are the
moments ``<p^k>`` and the localization correlator ``<p (1 - p)>``, which
vanishes when every member is localized (p in {0, 1}) and is finite when
members stay delocalized.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from .errors import DataError, EstimationError
from .qstate import DensityMatrix2, TwoLevelState

N_BINS = 50
P_TOL = 1e-12
MIN_KS_SAMPLES = 100


def _check_p(p: np.ndarray) -> np.ndarray:
    if not np.all(np.isfinite(p)):
        raise DataError("probabilities must be finite")
    if p.size and (p.min() < -P_TOL or p.max() > 1.0 + P_TOL):
        raise DataError(
            f"probabilities outside [0, 1]: min {p.min()!r}, max {p.max()!r}"
        )
    return np.clip(p, 0.0, 1.0)


def _check_w(w: np.ndarray) -> np.ndarray:
    if not np.all(np.isfinite(w)) or (w.size and w.min() < 0):
        raise DataError("weights must be finite and non-negative")
    return w


def _two_sum(a: float, b: float) -> tuple[float, float]:
    s = a + b
    bb = s - a
    return s, (a - (s - bb)) + (b - bb)


class _CompensatedSum:
    """Double-double running sum; adding or merging is order-insensitive
    to ~1e-30 relative, far below the 1e-12 merge tolerance."""

    __slots__ = ("hi", "lo")

    def __init__(self, hi: float = 0.0, lo: float = 0.0):
        self.hi = hi
        self.lo = lo

    def add(self, x: float) -> None:
        self.hi, err = _two_sum(self.hi, x)
        self.lo += err

    def merge(self, other: "_CompensatedSum") -> None:
        self.add(other.hi)
        self.lo += other.lo

    @property
    def value(self) -> float:
        return self.hi + self.lo

    def copy(self) -> "_CompensatedSum":
        return _CompensatedSum(self.hi, self.lo)


@dataclass(frozen=True, eq=False)
class WeightedEnsemble:
    """Normalized weights and probabilities, stored as parallel arrays."""

    weights: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        w = _check_w(np.array(self.weights, dtype=float).reshape(-1))
        p = _check_p(np.array(self.p, dtype=float).reshape(-1))
        if w.shape != p.shape:
            raise DataError(f"{w.size} weights for {p.size} probabilities")
        if w.size and abs(math.fsum(w) - 1.0) > 1e-10:
            raise DataError(f"weights sum to {math.fsum(w)!r}, expected 1")
        w.setflags(write=False)
        p.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "p", p)

    @classmethod
    def from_samples(cls, p, weights=None) -> "WeightedEnsemble":
        """Build an ensemble, normalizing the weights (equal if omitted)."""
        p = np.asarray(p, dtype=float).reshape(-1)
        if weights is None:
            w = np.full(p.size, 1.0 / p.size) if p.size else np.zeros(0)
        else:
            w = _check_w(np.asarray(weights, dtype=float).reshape(-1))
            total = math.fsum(w)
            if total <= 0:
                raise EstimationError("total weight must be positive")
            w = w / total
        return cls(w, p)

    def __len__(self) -> int:
        return self.p.size

    def __iter__(self):
        return iter(zip(self.weights.tolist(), self.p.tolist()))

    def concat(self, other: "WeightedEnsemble", weight_self: float = 0.5) -> "WeightedEnsemble":
        """Mixture ``weight_self * self + (1 - weight_self) * other``."""
        return WeightedEnsemble(
            np.concatenate([weight_self * self.weights, (1 - weight_self) * other.weights]),
            np.concatenate([self.p, other.p]),
        )

    def mean(self) -> float:
        return math.fsum(self.weights * self.p)


@dataclass
class MomentAccumulator:
    """Mergeable running estimator of ``<p^k>``, their errors and a histogram.

    Power sums are kept up to ``2 * k_max`` so the variance of ``p^k`` is
    available for every reported ``k``.  With ``keep_samples`` the raw pairs
    are retained as well, which the Kolmogorov-Smirnov statistic needs.
    """

    k_max: int = 4
    n_bins: int = N_BINS
    keep_samples: bool = True
    count: int = 0
    _power: list = field(default_factory=list, repr=False)
    _sum_w: _CompensatedSum = field(default_factory=_CompensatedSum, repr=False)
    _sum_w2: _CompensatedSum = field(default_factory=_CompensatedSum, repr=False)
    _hist: np.ndarray = field(default=None, repr=False)
    _samples_w: list = field(default_factory=list, repr=False)
    _samples_p: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        if self.k_max < 1:
            raise DataError(f"k_max must be >= 1, got {self.k_max}")
        if not self._power:
            self._power = [_CompensatedSum() for _ in range(2 * self.k_max)]
        if self._hist is None:
            self._hist = [_CompensatedSum() for _ in range(self.n_bins)]

    def add(self, p, w=None) -> "MomentAccumulator":
        """Add one sample or an array of samples (equal unit weights if ``w`` is None)."""
        p = _check_p(np.atleast_1d(np.asarray(p, dtype=float)).reshape(-1))
        if w is None:
            w = np.ones_like(p)
        else:
            w = _check_w(np.broadcast_to(np.asarray(w, dtype=float), p.shape).copy())
        if p.size == 0:
            return self
        self.count += p.size
        self._sum_w.add(math.fsum(w))
        self._sum_w2.add(math.fsum(w * w))
        pk = np.ones_like(p)
        for acc in self._power:
            pk = pk * p
            acc.add(math.fsum(w * pk))
        idx = np.minimum((p * self.n_bins).astype(int), self.n_bins - 1)
        per_bin = np.bincount(idx, weights=w, minlength=self.n_bins)
        for acc, v in zip(self._hist, per_bin):
            acc.add(float(v))
        if self.keep_samples:
            self._samples_w.append(w)
            self._samples_p.append(p)
        return self

    def merge(self, other: "MomentAccumulator") -> "MomentAccumulator":
        """Return a new accumulator equal to accumulating both streams."""
        if (other.k_max, other.n_bins) != (self.k_max, self.n_bins):
            raise DataError("cannot merge accumulators with different k_max or bins")
        out = MomentAccumulator(
            k_max=self.k_max,
            n_bins=self.n_bins,
            keep_samples=self.keep_samples and other.keep_samples,
            count=self.count + other.count,
            _power=[a.copy() for a in self._power],
            _sum_w=self._sum_w.copy(),
            _sum_w2=self._sum_w2.copy(),
            _hist=[a.copy() for a in self._hist],
        )
        for a, b in zip(out._power, other._power):
            a.merge(b)
        for a, b in zip(out._hist, other._hist):
            a.merge(b)
        out._sum_w.merge(other._sum_w)
        out._sum_w2.merge(other._sum_w2)
        if out.keep_samples:
            out._samples_w = self._samples_w + other._samples_w
            out._samples_p = self._samples_p + other._samples_p
        return out

    @property
    def sum_w(self) -> float:
        return self._sum_w.value

    @property
    def n_eff(self) -> float:
        s2 = self._sum_w2.value
        return self.sum_w ** 2 / s2 if s2 > 0 else 0.0

    def power_sum(self, k: int) -> float:
        """Weighted power sum ``sum w p^k`` for ``1 <= k <= 2 k_max``."""
        return self._power[k - 1].value

    def samples(self) -> tuple[np.ndarray, np.ndarray]:
        if not self.keep_samples:
            raise EstimationError("accumulator was built without keep_samples")
        if not self._samples_p:
            return np.zeros(0), np.zeros(0)
        return np.concatenate(self._samples_w), np.concatenate(self._samples_p)

    def report(self, time: Optional[float] = None) -> "MomentReport":
        if self.count < 1 or not self.sum_w > 0:
            raise EstimationError("no samples with positive weight")
        sw = self.sum_w
        n_eff = self.n_eff
        ks = np.arange(1, self.k_max + 1)
        est = np.array([self.power_sum(k) / sw for k in ks])
        second = np.array([self.power_sum(2 * k) / sw for k in ks])
        var = np.maximum(second - est ** 2, 0.0)
        if n_eff > 1:
            stderr = np.sqrt(var / (n_eff - 1.0))
        else:
            stderr = np.full(self.k_max, np.inf)
        hist_w = np.array([a.value for a in self._hist])
        edges = np.linspace(0.0, 1.0, self.n_bins + 1)
        density = hist_w / sw * self.n_bins
        ks_stat = None
        if self.keep_samples:
            w, p = self.samples()
            ks_stat = ks_uniform_statistic(p, w)
        return MomentReport(
            k=ks,
            estimate=np.clip(est, 0.0, 1.0),
            stderr=stderr,
            bin_edges=edges,
            density=density,
            ks_statistic=ks_stat,
            n_samples=self.count,
            n_eff=n_eff,
            time=time,
        )


@dataclass(frozen=True, eq=False)
class MomentReport:
    """Moments ``<p^k>`` with standard errors, histogram and KS statistic."""

    k: np.ndarray
    estimate: np.ndarray
    stderr: np.ndarray
    bin_edges: np.ndarray
    density: np.ndarray
    ks_statistic: Optional[float]
    n_samples: int
    n_eff: float
    time: Optional[float] = None

    def moment(self, k: int) -> float:
        return float(self.estimate[k - 1])

    def error(self, k: int) -> float:
        return float(self.stderr[k - 1])

    @property
    def correlator(self) -> float:
        """``<p (1 - p)> = <p> - <p^2>``; needs ``k_max >= 2``."""
        return self.moment(1) - self.moment(2)

    @property
    def correlator_stderr(self) -> float:
        # conservative: errors of the two moments added linearly
        return self.error(1) + self.error(2)

    def to_dict(self) -> dict:
        return {
            "time": self.time,
            "n_samples": int(self.n_samples),
            "n_eff": float(self.n_eff),
            "moments": [
                {"k": int(k), "estimate": float(e), "stderr": float(s), "exact_uniform": 1.0 / (1.0 + k)}
                for k, e, s in zip(self.k, self.estimate, self.stderr)
            ],
            "correlator": float(self.correlator) if len(self.k) >= 2 else None,
            "ks_statistic": self.ks_statistic,
            "ks_critical_1pct": 1.63 / math.sqrt(self.n_eff) if self.n_eff > 0 else None,
        }

    def histogram_rows(self):
        for a, b, d in zip(self.bin_edges[:-1], self.bin_edges[1:], self.density):
            yield float(a), float(b), float(d)


def _as_arrays(samples) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(samples, WeightedEnsemble):
        return samples.weights, samples.p
    pairs = list(samples)
    if not pairs:
        return np.zeros(0), np.zeros(0)
    w, p = zip(*pairs)
    return np.asarray(w, dtype=float), np.asarray(p, dtype=float)


def estimate_moments(samples, k_max: int = 4, time: Optional[float] = None) -> MomentReport:
    """Moments ``<p^k> = sum w p^k / sum w`` for ``k = 1..k_max``.

    ``samples`` is a :class:`WeightedEnsemble` or an iterable of ``(w, p)``.
    Standard errors use the weighted effective sample size
    ``(sum w)^2 / sum w^2``.
    """
    w, p = _as_arrays(samples)
    if p.size == 0:
        raise EstimationError("empty sample stream")
    if p.size < 2:
        raise EstimationError("at least 2 samples are needed")
    acc = MomentAccumulator(k_max=k_max)
    acc.add(p, w)
    return acc.report(time=time)


def localization_correlator(ens: WeightedEnsemble) -> float:
    """``sum_n w_n p_n (1 - p_n)``, between 0 (all localized) and 1/4."""
    if len(ens) == 0:
        raise EstimationError("empty ensemble")
    return math.fsum(ens.weights * ens.p * (1.0 - ens.p))


def averaged_density_matrix(states: Iterable) -> DensityMatrix2:
    """``rho = sum w |psi><psi| / sum w`` over ``(w, TwoLevelState)`` pairs."""
    acc = np.zeros((2, 2), dtype=complex)
    total = 0.0
    n = 0
    for w, psi in states:
        if w < 0:
            raise DataError("negative weight")
        v = psi.vector
        acc += w * np.outer(v, v.conj())
        total += w
        n += 1
    if n == 0:
        raise EstimationError("empty state stream")
    if not total > 0:
        raise EstimationError("total weight must be positive")
    rho = acc / total
    return DensityMatrix2(0.5 * (rho + rho.conj().T))


def ks_uniform_statistic(p, w=None) -> float:
    """Kolmogorov-Smirnov distance between the (weighted) ECDF of ``p`` and U(0, 1)."""
    p = np.asarray(p, dtype=float).reshape(-1)
    if w is None:
        w = np.ones_like(p)
    w = np.asarray(w, dtype=float).reshape(-1)
    order = np.argsort(p, kind="stable")
    ps = p[order]
    cw = np.cumsum(w[order])
    cw /= cw[-1]
    before = np.concatenate([[0.0], cw[:-1]])
    return float(max(np.max(cw - ps), np.max(ps - before)))


def uniformity_test(report: MomentReport) -> float:
    """KS statistic of the report's samples against the uniform law on [0, 1]."""
    if report.n_samples < MIN_KS_SAMPLES:
        raise EstimationError(
            f"uniformity test needs >= {MIN_KS_SAMPLES} samples, got {report.n_samples}"
        )
    if report.ks_statistic is None:
        raise EstimationError("report carries no KS statistic (samples were not kept)")
    return report.ks_statistic


SCENARIOS = ("collapsed", "delocalized", "uniform")


def synthetic_scenario(kind: str, n: int, seed: int = 0) -> WeightedEnsemble:
    """Equal-weight ensembles for the two ways a zero asymmetry can arise.

    ``collapsed``: every member localized, half with p = 1 and half with
    p = 0 (exactly balanced for even ``n``; the odd member is a seeded coin).
    ``delocalized``: every member has p = 1/2.  ``uniform``: i.i.d. U(0, 1).
    """
    if n < 1:
        raise DataError(f"n must be >= 1, got {n}")
    rng = np.random.default_rng(seed)
    if kind == "collapsed":
        p = np.zeros(n)
        p[: n // 2] = 1.0
        if n % 2:
            p[-1] = float(rng.integers(0, 2))
        p = rng.permutation(p)
    elif kind == "delocalized":
        p = np.full(n, 0.5)
    elif kind == "uniform":
        p = rng.random(n)
    else:
        raise DataError(f"unknown scenario {kind!r}; expected one of {SCENARIOS}")
    return WeightedEnsemble(np.full(n, 1.0 / n), p)


def lift_to_states(ens: WeightedEnsemble):
    """Map each ``(w, p)`` to ``(w, sqrt(p)|L> + (-1)^n sqrt(1-p)|R>)``.

    Alternating the relative sign is the simplest choice of phases that
    makes the ensemble-averaged coherence vanish for the delocalized
    scenario, as it does for the collapsed one.
    """
    out = []
    for n, (w, p) in enumerate(ens):
        sign = -1.0 if n % 2 else 1.0
        out.append((w, TwoLevelState(math.sqrt(p), sign * math.sqrt(1.0 - p))))
    return out
