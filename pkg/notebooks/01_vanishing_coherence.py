# %% [markdown]
# # A vanishing off-diagonal element does not mean the particle is "somewhere"
#
# Take a two-level system entangled with a two-dimensional environment,
# `nu_L |L>|phi_L> + nu_R |R>|phi_R>`, and watch how the reduced coherence
# depends only on the overlap of the two environment states.

# %%
import numpy as np

from catprobe import CompositeState, reduced_density

nu_L = 0.6
nu_R = 0.8

# %%
for overlap in np.linspace(0.0, 1.0, 6):
    phi_L = np.array([1.0, 0.0])
    phi_R = np.array([overlap, np.sqrt(1.0 - overlap ** 2)])
    psi = CompositeState(2, np.concatenate([nu_L * phi_L, nu_R * phi_R]))
    rho = reduced_density(psi)
    print(f"overlap={overlap:.1f}  rho_LL={rho.rho_LL:.3f}  |rho_LR|={abs(rho.rho_LR):.4f}  "
          f"purity={rho.purity():.4f}")

# %% [markdown]
# At zero overlap the reduced matrix is diagonal, yet the global state is
# still one pure superposition with P_L = 0.36, not a mixture of "L" and "R".
# A diagonal reduced density matrix cannot tell the two situations apart.
