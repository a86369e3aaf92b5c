"""
Doubled-up matrices and the quadrature picture
==============================================

Linear quantum dynamics act on the pair (a, a#) of annihilation and creation
operators. Matrices acting on that pair have the block structure
Delta(U, V) = [[U, V], [V#, U#]], and this script shows how to build them,
multiply them and move them to the real (q, p) quadrature representation.
"""

import numpy as np

from coherentfb.algebra import DoubledMatrix, delta, flat, structure_constants, to_quadrature

######################################################################
# Building blocks
# ---------------
#
# ``delta`` returns a structured object that knows its two blocks. Products
# and sums stay structured, so there is no need to expand until the end.

X = delta(np.array([[1.0 + 1j]]), np.array([[0.5j]]))
Y = delta(np.array([[2.0]]), np.array([[-1.0]]))
print("X Y as a 2x2 matrix:\n", (X @ Y).expand())

######################################################################
# The flat adjoint
# ----------------
#
# ``flat(X) = J X^dagger J`` plays the role of the adjoint for doubled-up
# matrices. It is an involution and reverses products.

Xe, Ye = X.expand(), Y.expand()
print("flat(flat(X)) == X:", np.allclose(flat(flat(Xe)), Xe))
print("flat(XY) == flat(Y) flat(X):", np.allclose(flat(Xe @ Ye), flat(Ye) @ flat(Xe)))

######################################################################
# Quadratures
# -----------
#
# The unitary Lambda turns a doubled-up matrix into a real one. A cavity
# with decay rate kappa and detuning omega becomes a damped rotation.

kappa, omega = 2.0, 1.0
A = delta(-kappa / 2 - 1j * omega).expand()
print("cavity A in quadratures:\n", to_quadrature(A))
c = structure_constants(1)
print("Lambda is unitary:", np.allclose(c.Lambda @ c.Lambda.conj().T, np.eye(2)))

######################################################################
# Recognizing structure
# ---------------------
#
# ``DoubledMatrix.from_matrix`` recovers the blocks and refuses matrices that
# lack the doubled-up pattern.

print("recovered blocks:", DoubledMatrix.from_matrix(A).minus, DoubledMatrix.from_matrix(A).plus)
try:
    DoubledMatrix.from_matrix(np.array([[1.0, 2.0], [3.0, 4.0]]))
except ValueError as exc:
    print("rejected:", exc)
