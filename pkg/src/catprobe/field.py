"""Double well driven by a classical Gaussian white-noise bias.

Each realization evolves unitarily under

    H(t) = (delta / 2) sigma_x + (eta(t) / 2) sigma_z,
    <eta(t) eta(t')> = gamma * delta_dirac(t - t'),

with eta held constant over steps of length ``dt`` and drawn with variance
``gamma / dt``.  The random variable of interest is the occupation
probability ``P_{L->L}(t) = |amp_L(t)|^2`` of one realization.

Random numbers: trajectory ``i`` of a process with master seed ``s`` reads
its noise from ``numpy.random.Generator(Philox(key=s + (i << 64)))``; the
value used at step ``j`` is the ``j``-th standard normal of that stream times
``sqrt(gamma / dt)``.  Trajectories therefore depend only on
``(master_seed, trajectory_id)`` and never on batching or worker count.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .ensemble import MomentReport, WeightedEnsemble, estimate_moments
from .errors import ConfigurationError, DataError
from .qstate import TwoLevelState, step_coefficients

BLOCK_SIZE = 1024
NOISE_CHUNK = 512
STATIONARITY_KMAX = 4
STATIONARITY_ABS_TOL = 0.005

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class NoiseProcess:
    """White-noise strength ``gamma``, time step ``dt`` and master seed."""

    gamma: float
    dt: float
    master_seed: int = 0

    def __post_init__(self):
        if not (math.isfinite(self.gamma) and self.gamma >= 0):
            raise ConfigurationError(f"gamma must be >= 0, got {self.gamma}")
        if not (math.isfinite(self.dt) and self.dt > 0):
            raise ConfigurationError(f"dt must be > 0, got {self.dt}")
        if not 0 <= int(self.master_seed) <= _MASK64:
            raise ConfigurationError("master_seed must be an unsigned 64-bit integer")

    @property
    def sigma(self) -> float:
        """Per-step standard deviation ``sqrt(gamma / dt)``."""
        return math.sqrt(self.gamma / self.dt)

    def generator(self, trajectory_id: int) -> np.random.Generator:
        if not 0 <= int(trajectory_id) <= _MASK64:
            raise ConfigurationError("trajectory_id must be an unsigned 64-bit integer")
        key = int(self.master_seed) | (int(trajectory_id) << 64)
        return np.random.Generator(np.random.Philox(key=key))


@dataclass(frozen=True, eq=False)
class Trajectory:
    trajectory_id: int
    times: np.ndarray
    p_LL: np.ndarray
    final_state: TwoLevelState

    @property
    def p_LR(self) -> np.ndarray:
        return 1.0 - self.p_LL


def default_dt(delta: float, gamma: float) -> float:
    """Largest step allowed by ``dt <= 0.02 min(1/delta, 1/gamma)``."""
    rate = max(abs(delta), gamma)
    return 0.02 / rate if rate > 0 else 0.01


def default_t_max(delta: float, gamma: float) -> float:
    """Hard cap ``500 / min(delta, gamma)`` on the stationarity search."""
    rates = [r for r in (abs(delta), gamma) if r > 0]
    return 500.0 / min(rates) if rates else 500.0


def sample_noise_path(proc: NoiseProcess, n_steps: int, trajectory_id: int) -> np.ndarray:
    """Bias values ``eta_j`` for steps ``j = 0..n_steps-1`` of one trajectory."""
    if n_steps < 1:
        raise ConfigurationError(f"n_steps must be >= 1, got {n_steps}")
    if proc.gamma == 0:
        return np.zeros(n_steps)
    return proc.sigma * proc.generator(trajectory_id).standard_normal(n_steps)


def _step(aL, aR, delta, eta, dt):
    c, ax, az = step_coefficients(delta, eta, dt)
    new_L = (c - 1j * az) * aL - 1j * ax * aR
    new_R = (c + 1j * az) * aR - 1j * ax * aL
    return new_L, new_R


def evolve_path(
    delta: float,
    eta: Sequence[float],
    dt: float,
    psi0: TwoLevelState,
    record_stride: int = 1,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Evolve one state through an explicit piecewise-constant bias path.

    Returns ``(times, p_LL, (amp_L, amp_R))`` with ``p_LL`` recorded at
    ``t = 0`` and after every ``record_stride`` steps.
    """
    if not dt > 0:
        raise ConfigurationError(f"dt must be > 0, got {dt}")
    if record_stride < 1:
        raise ConfigurationError(f"record_stride must be >= 1, got {record_stride}")
    eta = np.asarray(eta, dtype=float).reshape(-1)
    aL = np.array([psi0.amp_L])
    aR = np.array([psi0.amp_R])
    times = [0.0]
    p = [abs(psi0.amp_L) ** 2]
    for j in range(eta.size):
        aL, aR = _step(aL, aR, delta, eta[j:j + 1], dt)
        if (j + 1) % record_stride == 0:
            times.append((j + 1) * dt)
            p.append(float(np.abs(aL[0]) ** 2))
    return np.array(times), np.clip(np.array(p), 0.0, 1.0), np.array([aL[0], aR[0]])


def evolve_trajectory(
    delta: float,
    proc: NoiseProcess,
    psi0: TwoLevelState,
    n_steps: int,
    record_stride: int = 1,
    trajectory_id: int = 0,
) -> Trajectory:
    """One noise realization: ``psi_{j+1} = U(delta, eta_j, dt) psi_j``."""
    eta = sample_noise_path(proc, n_steps, trajectory_id)
    times, p, amps = evolve_path(delta, eta, proc.dt, psi0, record_stride)
    return Trajectory(int(trajectory_id), times, p, TwoLevelState(amps[0], amps[1]))


def dephasing_envelope(gamma: float, times) -> np.ndarray:
    """Exact noise-averaged coherence decay ``exp(-gamma t / 2)`` for delta = 0."""
    if gamma < 0:
        raise ConfigurationError(f"gamma must be >= 0, got {gamma}")
    return np.exp(-0.5 * gamma * np.asarray(times, dtype=float))


class _Block:
    """State of a contiguous range of trajectory ids, advanced in lockstep."""

    def __init__(self, ids: np.ndarray, delta: float, proc: NoiseProcess, psi0: TwoLevelState):
        self.ids = ids
        self.delta = delta
        self.proc = proc
        n = ids.size
        self.aL = np.full(n, psi0.amp_L, dtype=complex)
        self.aR = np.full(n, psi0.amp_R, dtype=complex)
        self.gens = [proc.generator(int(i)) for i in ids] if proc.gamma > 0 else None
        self.max_norm_dev = np.abs(np.abs(self.aL) ** 2 + np.abs(self.aR) ** 2 - 1.0)
        self.p_records: list[np.ndarray] = []
        self.coherence_sums: list[complex] = []

    def _noise(self, n_steps: int) -> np.ndarray:
        if self.gens is None:
            return np.zeros((n_steps, self.ids.size))
        draws = np.stack([g.standard_normal(n_steps) for g in self.gens], axis=1)
        return self.proc.sigma * draws

    def record(self) -> None:
        norm2 = np.abs(self.aL) ** 2 + np.abs(self.aR) ** 2
        np.maximum(self.max_norm_dev, np.abs(norm2 - 1.0), out=self.max_norm_dev)
        self.p_records.append(np.clip(np.abs(self.aL) ** 2, 0.0, 1.0))
        self.coherence_sums.append(complex(np.sum(self.aL * self.aR.conj())))

    def advance(self, n_steps: int, start_step: int, record_stride: int) -> None:
        dt = self.proc.dt
        done = 0
        while done < n_steps:
            chunk = min(NOISE_CHUNK, n_steps - done)
            eta = self._noise(chunk)
            for j in range(chunk):
                self.aL, self.aR = _step(self.aL, self.aR, self.delta, eta[j], dt)
                if (start_step + done + j + 1) % record_stride == 0:
                    self.record()
            done += chunk


class FieldEnsemble:
    """Many noise realizations evolved together, resumable in segments.

    Trajectory ids ``first_id .. first_id + n_trajectories - 1`` are split
    into fixed blocks of ``block_size``; blocks are advanced concurrently by
    ``threads`` workers.  Because the block partition does not depend on
    the worker count, every recorded number is bit-identical for any
    ``threads``.
    """

    def __init__(
        self,
        delta: float,
        proc: NoiseProcess,
        psi0: TwoLevelState,
        n_trajectories: int,
        record_stride: int = 1,
        threads: int = 1,
        first_id: int = 0,
        block_size: int = BLOCK_SIZE,
    ):
        if n_trajectories < 1:
            raise ConfigurationError(f"n_trajectories must be >= 1, got {n_trajectories}")
        if record_stride < 1:
            raise ConfigurationError(f"record_stride must be >= 1, got {record_stride}")
        if threads < 1:
            raise ConfigurationError(f"threads must be >= 1, got {threads}")
        self.delta = float(delta)
        self.proc = proc
        self.psi0 = psi0
        self.record_stride = int(record_stride)
        self.threads = int(threads)
        ids = np.arange(first_id, first_id + n_trajectories, dtype=np.uint64)
        self._blocks = [
            _Block(ids[i:i + block_size], self.delta, proc, psi0)
            for i in range(0, n_trajectories, block_size)
        ]
        for b in self._blocks:
            b.record()
        self.step = 0

    @property
    def n_trajectories(self) -> int:
        return sum(b.ids.size for b in self._blocks)

    @property
    def time(self) -> float:
        return self.step * self.proc.dt

    @property
    def times(self) -> np.ndarray:
        n = len(self._blocks[0].p_records)
        return np.arange(n) * self.record_stride * self.proc.dt

    def advance(self, n_steps: int) -> "FieldEnsemble":
        if n_steps < 0:
            raise ConfigurationError("cannot advance by a negative number of steps")
        if n_steps == 0:
            return self
        work = lambda b: b.advance(n_steps, self.step, self.record_stride)
        if self.threads == 1 or len(self._blocks) == 1:
            for b in self._blocks:
                work(b)
        else:
            with ThreadPoolExecutor(max_workers=self.threads) as pool:
                list(pool.map(work, self._blocks))
        self.step += n_steps
        return self

    def p_at(self, record_index: int) -> np.ndarray:
        """``P_{L->L}`` of every trajectory at one recorded time, in id order."""
        return np.concatenate([b.p_records[record_index] for b in self._blocks])

    def p_records(self, start: int = 0) -> np.ndarray:
        """Array ``(n_records - start, n_trajectories)`` of recorded ``P_{L->L}``."""
        return np.stack([np.concatenate(rs) for rs in
                         zip(*(b.p_records[start:] for b in self._blocks))])

    def final_amplitudes(self) -> tuple[np.ndarray, np.ndarray]:
        return (np.concatenate([b.aL for b in self._blocks]),
                np.concatenate([b.aR for b in self._blocks]))

    def max_norm_deviation(self) -> np.ndarray:
        """Per trajectory, ``max | ||psi||^2 - 1 |`` over all recorded times."""
        return np.concatenate([b.max_norm_dev for b in self._blocks])

    def mean_density(self) -> tuple[np.ndarray, np.ndarray]:
        """Ensemble-averaged ``(rho_LL(t), rho_LR(t))`` at the recorded times."""
        n = self.n_trajectories
        rho_LR = np.array([sum(cs) for cs in zip(*(b.coherence_sums for b in self._blocks))]) / n
        rho_LL = np.array([math.fsum(np.concatenate(rs)) for rs in
                           zip(*(b.p_records for b in self._blocks))]) / n
        return rho_LL, rho_LR

    def report_at(self, record_index: int = -1, k_max: int = 4) -> MomentReport:
        p = self.p_at(record_index)
        t = float(self.times[record_index])
        return estimate_moments(WeightedEnsemble.from_samples(p), k_max=k_max, time=t)


def moment_series(p_records: np.ndarray, k_max: int = STATIONARITY_KMAX):
    """Per recorded time, equal-weight ``<p^k>`` and standard errors, shape ``(n_rec, k_max)``."""
    n = p_records.shape[1]
    if n < 2:
        raise DataError("need at least two trajectories for standard errors")
    ks = np.arange(1, k_max + 1)
    powers = p_records[:, :, None] ** ks
    est = powers.mean(axis=1)
    err = powers.std(axis=1, ddof=1) / math.sqrt(n)
    return est, err


@dataclass(frozen=True)
class StationarityResult:
    reached: bool
    time: float
    report: MomentReport
    drift: np.ndarray
    tolerance: np.ndarray


def window_drift(times, est, err, horizon: float):
    """Drift of time-averaged moments between ``[T, 1.5T]`` and ``[1.5T, 2T]``, ``T = horizon/2``.

    Returns ``(drift, tolerance)`` per moment, or ``None`` when either
    window holds fewer than two recorded times.
    """
    T = 0.5 * horizon
    eps = 1e-9 * max(horizon, 1.0)
    w1 = (times >= T - eps) & (times <= 1.5 * T + eps)
    w2 = (times > 1.5 * T + eps) & (times <= 2 * T + eps)
    if w1.sum() < 2 or w2.sum() < 2:
        return None
    drift = np.abs(est[w1].mean(axis=0) - est[w2].mean(axis=0))
    se = 0.5 * (err[w1].mean(axis=0) + err[w2].mean(axis=0))
    tol = np.maximum(STATIONARITY_ABS_TOL, se)
    return drift, tol


def run_to_stationarity(
    ens: FieldEnsemble,
    t_max: float,
    check_every: int = 4,
    k_max: int = 4,
    t_min: float = 0.0,
    confirmations: int = 3,
) -> StationarityResult:
    """Advance ``ens`` until the k <= 4 moments are window-stationary.

    Every ``check_every`` recorded times the horizon ``H`` is tested with
    :func:`window_drift`; the first passing ``H >= t_min`` is the
    stationarity time and the moments are reported from the single-time
    samples there.  The criterion must hold at ``confirmations``
    consecutive checks, which keeps a slowly damped oscillation from
    passing by accident when both windows straddle it symmetrically.
    Stops at ``t_max`` with ``reached=False`` otherwise.
    """
    seg = check_every * ens.record_stride
    max_step = int(math.floor(t_max / ens.proc.dt + 1e-9))
    n_checked = 0
    est = err = None
    last = None
    streak = 0
    while True:
        records = ens.p_records(n_checked)
        new_est, new_err = moment_series(records, STATIONARITY_KMAX)
        est = new_est if est is None else np.vstack([est, new_est])
        err = new_err if err is None else np.vstack([err, new_err])
        n_checked += records.shape[0]
        times = ens.times
        if ens.time >= t_min:
            res = window_drift(times, est, err, ens.time)
            if res is not None:
                last = res
                streak = streak + 1 if np.all(res[0] < res[1]) else 0
                if streak >= confirmations:
                    return StationarityResult(True, ens.time, ens.report_at(-1, k_max), *res)
        if ens.step + seg > max_step:
            break
        ens.advance(seg)
    drift, tol = last if last is not None else (np.full(STATIONARITY_KMAX, np.nan),) * 2
    return StationarityResult(False, ens.time, ens.report_at(-1, k_max), drift, tol)
