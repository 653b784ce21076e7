"""Two-level system coupled to a finite, truncated bosonic bath.

Hamiltonian (hbar = 1, composite index ``s * dim_env + e``)::

    H = (delta/2) sigma_x + (epsilon/2) sigma_z
        + sum_i omega_i a_i^dag a_i
        + (sigma_z / 2) sum_i c_i (a_i + a_i^dag)

Ohmic discretization with N modes: ``omega_i = i * d_omega`` for
``i = 1..N``, ``d_omega = 2 omega_c / N``, and

    c_i^2 = (2 alpha / pi) * omega_i * exp(-omega_i / omega_c) * d_omega,

i.e. ``sum_i c_i^2 delta(w - omega_i)`` samples the continuous density
``(2 alpha / pi) w exp(-w / omega_c)`` on the grid.  This normalization is
fixed; ``alpha`` should be read relative to it, not to the
thermodynamic-limit phase diagram.

Environment basis: Fock product states ``|n_1 ... n_N>``, ``n_i <= n_max``,
mixed-radix index with mode 1 most significant (``numpy.kron`` order).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .ensemble import WeightedEnsemble, localization_correlator
from .errors import ConfigurationError, ContractViolation, DataError, NumericalError, PreconditionError
from .qstate import NORM_TOL, CompositeState, TwoLevelState, tensor_embed

DIM_CAP = 16384
GIBBS_TAIL = 1e-6


@dataclass(frozen=True)
class OhmicBathSpec:
    alpha: float = 0.0
    omega_c: float = 5.0
    n_modes: int = 4
    fock_cutoff: int = 2
    beta: float = 1.0
    dim_cap: int = DIM_CAP

    def __post_init__(self):
        if not self.alpha >= 0:
            raise ConfigurationError(f"alpha must be >= 0, got {self.alpha}")
        if not self.omega_c > 0:
            raise ConfigurationError(f"omega_c must be > 0, got {self.omega_c}")
        if self.n_modes < 1:
            raise ConfigurationError(f"n_modes must be >= 1, got {self.n_modes}")
        if self.fock_cutoff < 1:
            raise ConfigurationError(f"fock_cutoff must be >= 1, got {self.fock_cutoff}")
        if not self.beta > 0:
            raise ConfigurationError(f"beta must be > 0, got {self.beta}")
        if self.dimension > self.dim_cap:
            raise ConfigurationError(
                f"Hilbert dimension 2*({self.fock_cutoff}+1)^{self.n_modes} = "
                f"{self.dimension} exceeds the cap {self.dim_cap}"
            )

    @property
    def dim_env(self) -> int:
        return (self.fock_cutoff + 1) ** self.n_modes

    @property
    def dimension(self) -> int:
        return 2 * self.dim_env

    def mode_frequencies(self) -> np.ndarray:
        d_omega = 2.0 * self.omega_c / self.n_modes
        return d_omega * np.arange(1, self.n_modes + 1)

    def couplings(self) -> np.ndarray:
        w = self.mode_frequencies()
        d_omega = 2.0 * self.omega_c / self.n_modes
        return np.sqrt(2.0 * self.alpha / math.pi * w * np.exp(-w / self.omega_c) * d_omega)


@dataclass(frozen=True, eq=False)
class SpinBosonSystem:
    spec: OhmicBathSpec
    delta: float
    epsilon: float
    hamiltonian: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    mode_frequencies: np.ndarray
    couplings: np.ndarray

    @property
    def dim_env(self) -> int:
        return self.spec.dim_env

    @property
    def dimension(self) -> int:
        return self.hamiltonian.shape[0]

    def propagate(self, vectors: np.ndarray, t: float) -> np.ndarray:
        """``V exp(-i E t) V^dag`` applied to a vector or to the columns of a matrix."""
        if t == 0:
            return np.array(vectors, dtype=complex)
        V = self.eigenvectors
        phases = np.exp(-1j * self.eigenvalues * t)
        coeffs = V.conj().T @ vectors
        if coeffs.ndim == 1:
            return V @ (phases * coeffs)
        return V @ (phases[:, None] * coeffs)

    def energy(self, psi: CompositeState) -> float:
        v = psi.amplitudes
        return float(np.vdot(v, self.hamiltonian @ v).real)


def _ladder(n_max: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, n_max + 1, dtype=float)), k=1)


def _mode_operator(op: np.ndarray, mode: int, n_modes: int, local_dim: int) -> np.ndarray:
    factors = [np.eye(local_dim)] * n_modes
    factors[mode] = op
    out = factors[0]
    for f in factors[1:]:
        out = np.kron(out, f)
    return out


def build_hamiltonian(spec: OhmicBathSpec, delta: float, epsilon: float = 0.0) -> SpinBosonSystem:
    """Dense spin-boson Hamiltonian and its eigendecomposition."""
    d = spec.fock_cutoff + 1
    omega = spec.mode_frequencies()
    c = spec.couplings()
    a = _ladder(spec.fock_cutoff)
    number = np.diag(np.arange(d, dtype=float))
    h_env = np.zeros((spec.dim_env, spec.dim_env))
    x_env = np.zeros((spec.dim_env, spec.dim_env))
    for i in range(spec.n_modes):
        h_env += omega[i] * _mode_operator(number, i, spec.n_modes, d)
        if c[i] != 0:
            x_env += c[i] * _mode_operator(a + a.T, i, spec.n_modes, d)
    sx = np.array([[0.0, 1.0], [1.0, 0.0]])
    sz = np.array([[1.0, 0.0], [0.0, -1.0]])
    h = (np.kron(0.5 * delta * sx + 0.5 * epsilon * sz, np.eye(spec.dim_env))
         + np.kron(np.eye(2), h_env))
    if spec.alpha > 0:
        h += np.kron(0.5 * sz, x_env)
    try:
        evals, evecs = np.linalg.eigh(h)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigendecomposition failed: {exc}") from exc
    return SpinBosonSystem(spec, float(delta), float(epsilon), h, evals, evecs, omega, c)


@dataclass(frozen=True, eq=False)
class GibbsEnsembleStates:
    """Thermal mixture of bare-bath Fock states, largest weight first.

    ``indices[n]`` is the environment basis index of ``|E_n>``;
    ``retained_weight`` is the Boltzmann weight kept before renormalization.
    """

    weights: np.ndarray
    indices: np.ndarray
    energies: np.ndarray
    dim_env: int
    retained_weight: float

    def __len__(self) -> int:
        return self.weights.size

    def env_state(self, n: int) -> np.ndarray:
        v = np.zeros(self.dim_env)
        v[self.indices[n]] = 1.0
        return v

    def env_states(self) -> np.ndarray:
        """Columns are the environment vectors ``|E_n>``."""
        m = np.zeros((self.dim_env, len(self)))
        m[self.indices, np.arange(len(self))] = 1.0
        return m


def fock_energies(spec: OhmicBathSpec) -> np.ndarray:
    """Bare-bath energies ``sum_i omega_i n_i`` in environment index order."""
    omega = spec.mode_frequencies()
    e = np.zeros(1)
    for w in omega:
        e = (e[:, None] + w * np.arange(spec.fock_cutoff + 1)[None, :]).reshape(-1)
    return e


def gibbs_ensemble_states(spec: OhmicBathSpec, tail: float = GIBBS_TAIL) -> GibbsEnsembleStates:
    """Gibbs weights ``exp(-beta E_n) / Z`` over the truncated Fock basis.

    States are kept in order of decreasing weight until the cumulative
    weight reaches ``1 - tail``; the kept weights are then renormalized.
    """
    if not spec.beta > 0:
        raise PreconditionError("beta must be > 0")
    energies = fock_energies(spec)
    boltz = np.exp(-spec.beta * (energies - energies.min()))
    w = boltz / math.fsum(boltz)
    order = np.argsort(-w, kind="stable")
    cum = np.cumsum(w[order])
    n_keep = int(np.searchsorted(cum, 1.0 - tail, side="left")) + 1
    n_keep = min(n_keep, w.size)
    keep = order[:n_keep]
    retained = math.fsum(w[keep])
    return GibbsEnsembleStates(
        weights=w[keep] / retained,
        indices=keep,
        energies=energies[keep],
        dim_env=spec.dim_env,
        retained_weight=retained,
    )


def evolve_exact(sys: SpinBosonSystem, psi0: CompositeState, t: float) -> CompositeState:
    """``psi(t) = V exp(-i E t) V^dag psi0``."""
    if psi0.amplitudes.size != sys.dimension:
        raise DataError(
            f"state has dimension {psi0.amplitudes.size}, system has {sys.dimension}"
        )
    out = sys.propagate(psi0.amplitudes, t)
    # rounding can push the norm just past the CompositeState tolerance
    return CompositeState(sys.dim_env, out / np.linalg.norm(out))


def _evolved_gibbs_columns(sys: SpinBosonSystem, ens: GibbsEnsembleStates, t: float) -> np.ndarray:
    # initial states |L> (x) |E_n> are unit vectors at flat indices 0 * dim_env + idx_n
    psi0 = np.zeros((sys.dimension, len(ens)))
    psi0[ens.indices, np.arange(len(ens))] = 1.0
    return sys.propagate(psi0, t)


def _left_populations(sys: SpinBosonSystem, ens: GibbsEnsembleStates, t: float) -> np.ndarray:
    evolved = _evolved_gibbs_columns(sys, ens, t)[: sys.dim_env]
    return np.clip(np.sum(np.abs(evolved) ** 2, axis=0), 0.0, 1.0)


def thermal_correlator(
    sys: SpinBosonSystem, ens: GibbsEnsembleStates, t: float
) -> tuple[float, WeightedEnsemble]:
    """``sum_n w_n P_n (1 - P_n)`` with ``P_n`` the left population at ``t``
    starting from ``|L> (x) |E_n>``; also returns the ``(w_n, P_n)`` ensemble."""
    if ens.dim_env != sys.dim_env:
        raise DataError("Gibbs ensemble and system have different environments")
    p = _left_populations(sys, ens, t)
    wens = WeightedEnsemble(ens.weights, p)
    return localization_correlator(wens), wens


@dataclass(frozen=True, eq=False)
class SuperposedState:
    """Entangled state ``nu_L |L> (x) |P_LL> + nu_R |R> (x) |P_LR>``."""

    state: CompositeState
    nu_L: float
    nu_R: float
    env_LL: Optional[np.ndarray]
    env_LR: Optional[np.ndarray]
    t_p: float

    def env_overlap(self) -> complex:
        """``<P_LL | P_LR>``; zero if either branch is empty."""
        if self.env_LL is None or self.env_LR is None:
            return 0j
        return complex(np.vdot(self.env_LL, self.env_LR))


def prepare_superposed(sys: SpinBosonSystem, env0, t_p: float) -> SuperposedState:
    """Evolve ``|L> (x) env0`` for ``t_p`` under the symmetric Hamiltonian."""
    if sys.epsilon != 0:
        raise ContractViolation(
            f"preparation requires a symmetric double well (epsilon = 0), got {sys.epsilon}"
        )
    psi = evolve_exact(sys, tensor_embed(TwoLevelState.left(), env0), t_p)
    blocks = []
    nus = []
    for s in (0, 1):
        b = np.array(psi.block(s))
        nu = float(np.linalg.norm(b))
        nus.append(nu)
        blocks.append(b / nu if nu > NORM_TOL else None)
    return SuperposedState(psi, nus[0], nus[1], blocks[0], blocks[1], float(t_p))


def occupational_asymmetry(
    sys: SpinBosonSystem,
    psi_S: CompositeState,
    t_window: tuple[float, float],
    n_samples: int = 64,
) -> float:
    """Average of ``P_L(t) - P_R(t)`` over ``n_samples`` times in ``[t_a, t_b)``.

    Sample times are ``t_a + j (t_b - t_a) / n_samples``, so a window holding
    an integer number of periods averages a pure oscillation to zero.
    """
    t_a, t_b = map(float, t_window)
    if not (t_b > t_a >= 0):
        raise ConfigurationError(f"need t_b > t_a >= 0, got ({t_a}, {t_b})")
    if n_samples < 1:
        raise ConfigurationError(f"n_samples must be >= 1, got {n_samples}")
    if psi_S.amplitudes.size != sys.dimension:
        raise DataError("state and system dimensions differ")
    times = t_a + (t_b - t_a) * np.arange(n_samples) / n_samples
    V = sys.eigenvectors
    coeffs = V.conj().T @ psi_S.amplitudes
    phases = np.exp(-1j * np.outer(sys.eigenvalues, times))
    evolved = V @ (phases * coeffs[:, None])
    pops = np.abs(evolved) ** 2
    diff = pops[: sys.dim_env].sum(axis=0) - pops[sys.dim_env:].sum(axis=0)
    return float(np.clip(math.fsum(diff) / n_samples, -1.0, 1.0))


def populations_and_density(sys: SpinBosonSystem, ens: GibbsEnsembleStates, t: float):
    """Gibbs-averaged reduced density ``(rho_LL, rho_LR)`` at ``t`` from ``|L> (x) |E_n>``."""
    evolved = _evolved_gibbs_columns(sys, ens, t)
    left, right = evolved[: sys.dim_env], evolved[sys.dim_env:]
    rho_LL = float(np.sum(ens.weights * np.sum(np.abs(left) ** 2, axis=0)))
    rho_LR = complex(np.sum(ens.weights * np.sum(left * right.conj(), axis=0)))
    return rho_LL, rho_LR
