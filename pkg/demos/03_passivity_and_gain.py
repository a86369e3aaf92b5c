"""
Passivity and gain of simple optical devices
============================================

Dissipation theory ties stability, passivity and H-infinity gain to LMIs.
Here the three tools are compared on a parametric amplifier as its pump
strength crosses the oscillation threshold.
"""

import numpy as np

from coherentfb.analysis import classify_stability, hinf_norm, passivity_check, strict_brl
from coherentfb.model import GeneralModel, build

kappa = 2.0
print(f"{'eps':>6} {'stability':>22} {'passive':>8} {'gain':>10} {'formula':>10}")
for eps in (0.5, 1.0, 1.5, 1.999, 2.001, 3.0):
    S = build(GeneralModel(0.0, 1j * eps / 2, np.sqrt(kappa)))
    stab = classify_stability(S.A)
    passive = passivity_check(S.A, S.B_f, S.B_f.conj().T).passive
    g = hinf_norm(S.A, S.B_f, S.C_f, np.eye(2))
    formula = (kappa + eps) / (kappa - eps) if eps < kappa else np.inf
    print(f"{eps:6.3f} {str(stab):>22} {str(passive):>8} {g:10.4f} {formula:10.4f}")

######################################################################
# The bounded-real lemma
# ----------------------
#
# Below threshold the gain is finite, and the strict bounded-real lemma holds
# for any bound above it. Its LMI and Riccati tests agree.

S = build(GeneralModel(0.0, 0.5j, np.sqrt(kappa)))
for g in (2.99, 3.01):
    r = strict_brl(S.A, S.B_f, S.C_f, np.eye(2), g)
    print(f"bound {g}: LMI {r.lmi_feasible}, Riccati {r.riccati_ok}, holds {r.holds}")
