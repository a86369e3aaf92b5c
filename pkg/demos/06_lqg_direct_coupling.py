"""
LQG cost with a direct coupling
===============================

The steady-state LQG cost of a closed loop driven by vacuum noise follows
from one Lyapunov equation. Adding a direct coupling to a fixed
field-mediated controller can lower it, and the coupling is found by a grid
search followed by Nelder-Mead.
"""

import numpy as np

from coherentfb.analysis import lqg_cost
from coherentfb.interconnect import close_loop
from coherentfb.io import load_scenario
from coherentfb.synthesis import lqg_synthesize

sc = load_scenario("builtin:lqg_atom")
P, K = sc.build(c=1.0)
w = sc.synthesis["noise_weight"]
for label, ctrl in (("field only", K.without_coupling()), ("reference coupling", K)):
    cl = close_loop(P, ctrl)
    print(f"{label:>18}: J = {lqg_cost(cl.A, cl.G, cl.C, w):.6f}")

res = lqg_synthesize(P, K.without_coupling(), [(-0.01, 0.01)], 0.0025, w, refine=True)
print(f"grid best J = {res.grid_cost:.6f}, refined J = {res.cost:.6f}")
print("coupling entries:", np.round(res.x, 5))
