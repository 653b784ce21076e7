# %% [markdown]
# # Exact dynamics with a small ohmic bath
#
# Three oscillator modes with two quanta each: dimension 2 * 3^3 = 54, small
# enough for dense diagonalization.  Each thermal bath eigenstate gives a
# trajectory `P_L(t)`; the correlator averages `P_L (1 - P_L)` over them.

# %%
import numpy as np

from catprobe import OhmicBathSpec, build_hamiltonian, gibbs_ensemble_states, thermal_correlator
from catprobe.bath import populations_and_density

spec = OhmicBathSpec(alpha=0.3, omega_c=5.0, n_modes=3, fock_cutoff=2, beta=1.0)
system = build_hamiltonian(spec, delta=1.0)
gibbs = gibbs_ensemble_states(spec)
print("dimension:", spec.dimension, " Gibbs states kept:", len(gibbs))

# %%
for t in np.linspace(0.0, 12.0, 7):
    c, _ = thermal_correlator(system, gibbs, t)
    rho_LL, rho_LR = populations_and_density(system, gibbs, t)
    print(f"t={t:5.1f}  C={c:.4f}  rho_LL={rho_LL:.4f}  |rho_LR|={abs(rho_LR):.4f}")

# %% [markdown]
# Turning the coupling off recovers coherent tunneling, `C = cos^2 sin^2`.

# %%
free = build_hamiltonian(OhmicBathSpec(alpha=0.0, n_modes=3, fock_cutoff=2), delta=1.0)
t = 1.3
print(thermal_correlator(free, gibbs, t)[0], np.cos(t / 2) ** 2 * np.sin(t / 2) ** 2)
