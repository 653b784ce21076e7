"""Two-level and composite states, single-step propagators, partial trace.

Conventions used everywhere in catprobe:

* basis ``|L> = (1, 0)``, ``|R> = (0, 1)``; in spin language ``|up> == |L>``,
  so ``sigma_z |L> = +|L>``;
* hbar = 1, energies and rates share units, times are inverse energies;
* a composite (two-level x environment) vector is stored flat with
  ``index = s * dim_env + e`` where ``s = 0`` for L and ``s = 1`` for R.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DataError, PreconditionError

NORM_TOL = 1e-12

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class TwoLevelState:
    """Normalized pure state ``amp_L |L> + amp_R |R>``."""

    amp_L: complex
    amp_R: complex

    def __post_init__(self):
        object.__setattr__(self, "amp_L", complex(self.amp_L))
        object.__setattr__(self, "amp_R", complex(self.amp_R))
        norm2 = abs(self.amp_L) ** 2 + abs(self.amp_R) ** 2
        if not abs(norm2 - 1.0) <= NORM_TOL:
            raise PreconditionError(
                f"two-level state not normalized: |a_L|^2 + |a_R|^2 = {norm2!r}"
            )

    @classmethod
    def from_vector(cls, v, normalize: bool = False) -> "TwoLevelState":
        v = np.asarray(v, dtype=complex).reshape(-1)
        if v.shape != (2,):
            raise DataError(f"expected 2 amplitudes, got shape {v.shape}")
        if normalize:
            n = np.linalg.norm(v)
            if n == 0:
                raise PreconditionError("cannot normalize the zero vector")
            v = v / n
        return cls(v[0], v[1])

    @classmethod
    def left(cls) -> "TwoLevelState":
        return cls(1.0, 0.0)

    @classmethod
    def right(cls) -> "TwoLevelState":
        return cls(0.0, 1.0)

    @classmethod
    def symmetric(cls, relative_phase: complex = 1.0) -> "TwoLevelState":
        """``(|L> + relative_phase |R>) / sqrt(2)`` for a unit-modulus phase."""
        return cls.from_vector([1.0, relative_phase], normalize=True)

    @property
    def vector(self) -> np.ndarray:
        return np.array([self.amp_L, self.amp_R], dtype=complex)

    @property
    def p_left(self) -> float:
        return abs(self.amp_L) ** 2

    @property
    def p_right(self) -> float:
        return abs(self.amp_R) ** 2


@dataclass(frozen=True, eq=False)
class CompositeState:
    """Normalized vector on the (two-level x environment) space.

    ``amplitudes[s * dim_env + e]`` is the amplitude of ``|s> (x) |e>``.
    """

    dim_env: int
    amplitudes: np.ndarray

    def __post_init__(self):
        if int(self.dim_env) < 1:
            raise ConfigurationError(f"dim_env must be >= 1, got {self.dim_env}")
        object.__setattr__(self, "dim_env", int(self.dim_env))
        amps = _frozen(np.asarray(self.amplitudes).reshape(-1))
        if amps.shape != (2 * self.dim_env,):
            raise DataError(
                f"expected {2 * self.dim_env} amplitudes, got {amps.shape[0]}"
            )
        norm = np.linalg.norm(amps)
        if not abs(norm - 1.0) <= NORM_TOL:
            raise PreconditionError(f"composite state not normalized: norm = {norm!r}")
        object.__setattr__(self, "amplitudes", amps)

    def block(self, s: int) -> np.ndarray:
        """Environment slice at fixed two-level index (0 = L, 1 = R)."""
        return self.amplitudes[s * self.dim_env:(s + 1) * self.dim_env]

    @property
    def matrix(self) -> np.ndarray:
        """Amplitudes reshaped to ``(2, dim_env)``."""
        return self.amplitudes.reshape(2, self.dim_env)

    @property
    def p_left(self) -> float:
        return float(np.vdot(self.block(0), self.block(0)).real)

    @property
    def p_right(self) -> float:
        return float(np.vdot(self.block(1), self.block(1)).real)


@dataclass(frozen=True, eq=False)
class DensityMatrix2:
    """2x2 density matrix in the {|L>, |R>} basis."""

    rho: np.ndarray

    def __post_init__(self):
        rho = _frozen(self.rho)
        if rho.shape != (2, 2):
            raise DataError(f"expected a 2x2 matrix, got {rho.shape}")
        if np.max(np.abs(rho - rho.conj().T)) > 1e-12:
            raise DataError("density matrix is not Hermitian")
        if abs(np.trace(rho) - 1.0) > 1e-12:
            raise DataError(f"density matrix trace {np.trace(rho)!r} != 1")
        if np.min(np.linalg.eigvalsh(rho)) < -1e-10:
            raise DataError("density matrix has a negative eigenvalue")
        object.__setattr__(self, "rho", rho)

    @property
    def rho_LL(self) -> float:
        return float(self.rho[0, 0].real)

    @property
    def rho_RR(self) -> float:
        return float(self.rho[1, 1].real)

    @property
    def rho_LR(self) -> complex:
        return complex(self.rho[0, 1])

    def purity(self) -> float:
        return float(np.trace(self.rho @ self.rho).real)


@dataclass(frozen=True, eq=False)
class StepUnitary:
    u: np.ndarray

    def __post_init__(self):
        u = _frozen(self.u)
        if u.shape != (2, 2):
            raise DataError(f"expected a 2x2 matrix, got {u.shape}")
        object.__setattr__(self, "u", u)

    def apply(self, psi: TwoLevelState) -> TwoLevelState:
        return TwoLevelState.from_vector(self.u @ psi.vector)


def bloch_vector(psi: TwoLevelState) -> tuple[float, float, float]:
    """Bloch vector of a pure state; ``z = 2 P_L - 1``."""
    if not isinstance(psi, TwoLevelState):
        psi = TwoLevelState.from_vector(psi)
    c = psi.amp_L.conjugate() * psi.amp_R
    return 2.0 * c.real, 2.0 * c.imag, 2.0 * abs(psi.amp_L) ** 2 - 1.0


def step_coefficients(delta, eta, dt):
    """Coefficients ``(c, ax, az)`` of ``U = c I - i (ax sigma_x + az sigma_z)``.

    Closed form of ``exp(-i dt [(delta/2) sigma_x + (eta/2) sigma_z])``;
    broadcasts over array ``eta``.  ``c**2 + ax**2 + az**2 == 1`` up to
    rounding, so the step is unitary by construction.
    """
    half = 0.5 * dt
    r = np.hypot(delta, eta)
    theta = half * r
    with np.errstate(invalid="ignore", divide="ignore"):
        s_over_r = np.where(r > 0, np.sin(theta) / r, half)
    return np.cos(theta), delta * s_over_r, eta * s_over_r


def step_propagator(delta: float, eta: float, dt: float) -> StepUnitary:
    """One-step propagator for ``H = (delta/2) sigma_x + (eta/2) sigma_z``."""
    if not dt > 0:
        raise ConfigurationError(f"dt must be > 0, got {dt}")
    c, ax, az = (float(v) for v in step_coefficients(float(delta), float(eta), float(dt)))
    u = np.array([[c - 1j * az, -1j * ax], [-1j * ax, c + 1j * az]], dtype=complex)
    return StepUnitary(u)


def tensor_embed(psi: TwoLevelState, phi) -> CompositeState:
    """Product state ``psi (x) phi``."""
    phi = np.asarray(phi, dtype=complex).reshape(-1)
    if phi.size == 0:
        raise ConfigurationError("environment dimension must be >= 1")
    if not abs(np.linalg.norm(phi) - 1.0) <= NORM_TOL:
        raise PreconditionError("environment vector not normalized")
    return CompositeState(phi.size, np.kron(psi.vector, phi))


def reduced_density(psi: CompositeState) -> DensityMatrix2:
    """Trace out the environment: ``rho[s, s'] = sum_e psi(s, e) conj(psi(s', e))``."""
    m = psi.matrix
    rho = m @ m.conj().T
    # exact Hermitian symmetry; the product is Hermitian only up to rounding
    rho = 0.5 * (rho + rho.conj().T)
    return DensityMatrix2(rho)


def pure_density(psi: TwoLevelState) -> DensityMatrix2:
    v = psi.vector
    return DensityMatrix2(np.outer(v, v.conj()))
