"""
Physical realizability
======================

A linear model only describes a quantum device when its matrices satisfy
algebraic identities that keep the canonical commutation relations intact.
Models generated from a Hamiltonian and coupling operators satisfy them
automatically; hand-written matrices may not.
"""

import numpy as np

from coherentfb.algebra import symplectic
from coherentfb.model import GeneralModel, build
from coherentfb.realizability import check_annihilation, check_quadrature_controller, complete_controller

######################################################################
# A model built from physical parameters
# --------------------------------------
#
# A degenerate parametric amplifier: a cavity with squeezing strength eps.

kappa, eps = 2.0, 1.0
G = GeneralModel(0.0, 1j * eps / 2, np.sqrt(kappa))
S = build(G)
rep = check_annihilation(S.A, S.B_f, S.C_f)
print("DPA realizable:", rep.verdict, rep.relative())

######################################################################
# Breaking the identities
# -----------------------
#
# Adding a small multiple of the identity to A adds gain that no noise
# channel accounts for. The commutation residual grows linearly with it.

for e in (1e-9, 1e-6, 1e-3):
    rep = check_annihilation(S.A + e * np.eye(2), S.B_f, S.C_f)
    print(f"A + {e:g} I: verdict {rep.verdict}, ccr residual {rep.ccr_residual:.3g}")

######################################################################
# Completing a controller
# -----------------------
#
# A controller designed as a classical state-space system can be made
# physical by adding quantum noise channels. ``complete_controller`` picks
# them so that all identities hold.

A_K = np.array([[-1.0, 0.3], [-0.3, -1.0]])
B_K = 0.5 * np.eye(2)
C_K = 0.2 * np.eye(2)
B1, B2, B0 = complete_controller(A_K, B_K, C_K)
rep = check_quadrature_controller(A_K, B_K, B1, B2, C_K, B0, tol=1e-10)
print("completed controller realizable:", rep.verdict)
print("extra noise channel B_K2:\n", B2)
print("B_K2 Theta B_K2^T:\n", B2 @ symplectic(B2.shape[1] // 2) @ B2.T)
