"""Brute-force reference implementations, written independently of catprobe.

Nothing here imports catprobe; the checks compare two separate code paths.
"""

import itertools
import math

import numpy as np


def series_expm(a, terms=15):
    """Truncated Taylor series ``sum_{k < terms} a^k / k!``."""
    a = np.asarray(a, dtype=complex)
    out = np.eye(a.shape[0], dtype=complex)
    term = np.eye(a.shape[0], dtype=complex)
    for k in range(1, terms):
        term = term @ a / k
        out = out + term
    return out


def expm_scaling_squaring(a, terms=30):
    """``exp(a)`` by scaling to norm < 1/2, a long Taylor series, then squaring."""
    a = np.asarray(a, dtype=complex)
    norm = np.max(np.sum(np.abs(a), axis=1))
    s = max(0, int(math.ceil(math.log2(norm / 0.5)))) if norm > 0 else 0
    e = series_expm(a / 2 ** s, terms)
    for _ in range(s):
        e = e @ e
    return e


def spin_boson_matrix(alpha, omega_c, n_modes, n_max, delta, eps):
    """Spin-boson Hamiltonian assembled element by element on the basis
    ``(s, n_1, ..., n_N)``, s = 0 for L (sigma_z = +1), mode 1 most significant."""
    d_omega = 2.0 * omega_c / n_modes
    omegas = [d_omega * (i + 1) for i in range(n_modes)]
    coup = [math.sqrt(2 * alpha / math.pi * w * math.exp(-w / omega_c) * d_omega) for w in omegas]
    basis = [(s,) + ns for s in (0, 1) for ns in itertools.product(range(n_max + 1), repeat=n_modes)]
    index = {b: k for k, b in enumerate(basis)}
    h = np.zeros((len(basis), len(basis)))
    for k, (s, *ns) in enumerate(basis):
        sz = 1.0 if s == 0 else -1.0
        h[k, k] += 0.5 * eps * sz + sum(w * n for w, n in zip(omegas, ns))
        flipped = index[(1 - s, *ns)]
        h[flipped, k] += 0.5 * delta
        for i in range(n_modes):
            for dn in (-1, 1):
                m = ns[i] + dn
                if 0 <= m <= n_max:
                    amp = math.sqrt(max(ns[i], m))  # <m| a + a^dag |n>
                    target = list(ns)
                    target[i] = m
                    h[index[(s, *target)], k] += 0.5 * sz * coup[i] * amp
    return h, omegas


def thermal_correlator_bruteforce(alpha, omega_c, n_modes, n_max, delta, beta, t):
    """Correlator and left populations with every bath Fock state kept."""
    h, omegas = spin_boson_matrix(alpha, omega_c, n_modes, n_max, delta, 0.0)
    u = expm_scaling_squaring(-1j * t * h)
    dim_env = (n_max + 1) ** n_modes
    envs = list(itertools.product(range(n_max + 1), repeat=n_modes))
    boltz = np.array([math.exp(-beta * sum(w * n for w, n in zip(omegas, ns))) for ns in envs])
    weights = boltz / boltz.sum()
    pops = []
    for e in range(dim_env):
        col = u[:, e]
        pops.append(float(np.sum(np.abs(col[:dim_env]) ** 2)))
    pops = np.array(pops)
    return float(np.sum(weights * pops * (1 - pops))), weights, pops, u


def left_state_evolution(alpha, omega_c, n_modes, n_max, delta, env0, t):
    h, _ = spin_boson_matrix(alpha, omega_c, n_modes, n_max, delta, 0.0)
    psi0 = np.concatenate([np.asarray(env0, dtype=complex), np.zeros(len(env0))])
    return expm_scaling_squaring(-1j * t * h) @ psi0, h
