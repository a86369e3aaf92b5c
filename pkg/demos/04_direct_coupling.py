"""
Stabilizing by direct coupling
==============================

Two systems can interact through a shared Hamiltonian instead of a light
field. Here an unstable plant is stabilized purely by such an interaction,
with no measurement and no feedback field.
"""

import numpy as np

from coherentfb.analysis import spectral_abscissa
from coherentfb.interconnect import close_loop, direct_couple
from coherentfb.io import load_scenario
from coherentfb.model import GeneralModel

sc = load_scenario("builtin:stabilization")
for km, kp in ((0.0, 0.0), (-0.6, -0.42)):
    cl = close_loop(*sc.build(km=km, kp=kp))
    print(f"K- = {km:5.2f}, K+ = {kp:5.2f}: spectral abscissa {spectral_abscissa(cl.A):+.4f}")

######################################################################
# Beam-splitter and squeezing interactions
# ----------------------------------------
#
# The K- part of a direct coupling exchanges excitations and conserves
# energy. The K+ part creates pairs and can destabilize two lossless modes.

a, b = GeneralModel(1.0), GeneralModel(1.5)
for km, kp in ((0.5, 0.0), (0.0, 0.5), (0.0, 1.5)):
    S = direct_couple(a, b, km, kp)
    print(f"K- = {km}, K+ = {kp}: max Re(eig) = {np.linalg.eigvals(S.A).real.max():+.4f}")
