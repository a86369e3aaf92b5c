"""Doubled-up matrix algebra and the quadrature change of basis.

Every linear quantum system in this package is written either in the
annihilation-creation form, where state vectors are doubled up as
``[a; a#]`` and system matrices carry the block structure ``[[U, V], [V#, U#]]``,
or in the real quadrature form obtained through the unitary ``Lambda``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "DoubledMatrix",
    "StructureConstants",
    "delta",
    "flat",
    "signature",
    "symplectic",
    "quadrature_basis",
    "ito_matrix",
    "structure_constants",
    "to_quadrature",
    "from_quadrature",
    "QUADRATURE_TOL",
]

QUADRATURE_TOL = 1e-10


def _as_complex(M) -> np.ndarray:
    M = np.asarray(M, dtype=complex)
    if M.ndim == 0:
        M = M.reshape(1, 1)
    if M.ndim != 2:
        raise ValueError(f"expected a matrix, got array of shape {M.shape}")
    return M


@dataclass(frozen=True, eq=False)
class DoubledMatrix:
    """The doubled-up matrix ``Delta(U, V) = [[U, V], [V#, U#]]``.

    ``minus`` holds ``U`` and ``plus`` holds ``V``; both are ``r x k``.
    """

    minus: np.ndarray
    plus: np.ndarray

    def __post_init__(self):
        U = _as_complex(self.minus)
        V = _as_complex(self.plus)
        if U.shape != V.shape:
            raise ValueError(f"delta blocks differ in shape: {U.shape} vs {V.shape}")
        U.setflags(write=False)
        V.setflags(write=False)
        object.__setattr__(self, "minus", U)
        object.__setattr__(self, "plus", V)

    @property
    def shape(self) -> tuple[int, int]:
        r, k = self.minus.shape
        return 2 * r, 2 * k

    def expand(self) -> np.ndarray:
        U, V = self.minus, self.plus
        return np.block([[U, V], [V.conj(), U.conj()]])

    def __array__(self, dtype=None, copy=None):
        out = self.expand()
        return out if dtype is None else out.astype(dtype)

    def __matmul__(self, other: "DoubledMatrix") -> "DoubledMatrix":
        if not isinstance(other, DoubledMatrix):
            return NotImplemented
        U1, V1 = self.minus, self.plus
        U2, V2 = other.minus, other.plus
        return DoubledMatrix(U1 @ U2 + V1 @ V2.conj(), U1 @ V2 + V1 @ U2.conj())

    def __add__(self, other: "DoubledMatrix") -> "DoubledMatrix":
        if not isinstance(other, DoubledMatrix):
            return NotImplemented
        return DoubledMatrix(self.minus + other.minus, self.plus + other.plus)

    def __sub__(self, other: "DoubledMatrix") -> "DoubledMatrix":
        if not isinstance(other, DoubledMatrix):
            return NotImplemented
        return DoubledMatrix(self.minus - other.minus, self.plus - other.plus)

    def __neg__(self) -> "DoubledMatrix":
        return DoubledMatrix(-self.minus, -self.plus)

    def __mul__(self, c) -> "DoubledMatrix":
        # real scalars only; a complex scalar breaks the block structure
        c = float(c)
        return DoubledMatrix(c * self.minus, c * self.plus)

    __rmul__ = __mul__

    def flat(self) -> "DoubledMatrix":
        """Return ``Delta(U, V)^flat = Delta(U^dagger, -V^T)``."""
        return DoubledMatrix(self.minus.conj().T, -self.plus.T)

    @classmethod
    def from_matrix(cls, X, tol: float = 1e-12) -> "DoubledMatrix":
        """Split an even-dimensioned matrix into its ``(U, V)`` blocks.

        Raises ``ValueError`` if ``X`` lacks the doubled-up structure.
        """
        X = _as_complex(X)
        r2, k2 = X.shape
        if r2 % 2 or k2 % 2:
            raise ValueError(f"doubled-up matrices have even dimensions, got {X.shape}")
        r, k = r2 // 2, k2 // 2
        U, V = X[:r, :k], X[:r, k:]
        err = max(
            np.abs(X[r:, :k] - V.conj()).max(initial=0.0),
            np.abs(X[r:, k:] - U.conj()).max(initial=0.0),
        )
        if err > tol * max(1.0, np.abs(X).max(initial=0.0)):
            raise ValueError(f"matrix is not doubled-up (structure residual {err:.3g})")
        return cls(U, V)


def delta(U, V=None) -> DoubledMatrix:
    """Build ``Delta(U, V)``; ``V`` defaults to zeros of ``U``'s shape."""
    U = _as_complex(U)
    V = np.zeros_like(U) if V is None else _as_complex(V)
    return DoubledMatrix(U, V)


def signature(n: int) -> np.ndarray:
    """``J_n = diag(I_n, -I_n)``."""
    return np.diag(np.concatenate([np.ones(n), -np.ones(n)]))


def symplectic(n: int) -> np.ndarray:
    """``Theta_n = [[0, I_n], [-I_n, 0]]``."""
    I = np.eye(n)
    Z = np.zeros((n, n))
    return np.block([[Z, I], [-I, Z]])


def quadrature_basis(n: int) -> np.ndarray:
    """Unitary ``Lambda`` mapping ``[a; a#]`` to the quadratures ``[q; p]``."""
    I = np.eye(n)
    return np.block([[I, I], [-1j * I, 1j * I]]) / np.sqrt(2.0)


def ito_matrix(m: int) -> np.ndarray:
    """Ito matrix ``F = diag(0_m, I_m)`` of an ``m``-channel vacuum field."""
    return np.diag(np.concatenate([np.zeros(m), np.ones(m)]))


@dataclass(frozen=True, eq=False)
class StructureConstants:
    J: np.ndarray
    Theta: np.ndarray
    Lambda: np.ndarray
    F: np.ndarray


def structure_constants(n: int, m: int | None = None) -> StructureConstants:
    """Bundle ``J_n``, ``Theta_n``, ``Lambda_n`` and the ``m``-channel Ito matrix."""
    m = n if m is None else m
    consts = StructureConstants(signature(n), symplectic(n), quadrature_basis(n), ito_matrix(m))
    for arr in (consts.J, consts.Theta, consts.Lambda, consts.F):
        arr.setflags(write=False)
    return consts


def _half(dim: int, what: str) -> int:
    if dim % 2:
        raise ValueError(f"{what} dimension {dim} is odd; doubled-up matrices have even dimensions")
    return dim // 2


def flat(X) -> np.ndarray:
    """``X^flat = J_m X^dagger J_n`` for ``X`` of shape ``2n x 2m``."""
    if isinstance(X, DoubledMatrix):
        return X.flat().expand()
    X = _as_complex(X)
    n = _half(X.shape[0], "row")
    m = _half(X.shape[1], "column")
    # J X^dagger J only flips signs of the off-diagonal blocks
    return signature(m) @ X.conj().T @ signature(n)


def to_quadrature(M, rows: int | None = None, cols: int | None = None,
                  tol: float = QUADRATURE_TOL) -> np.ndarray:
    """Real quadrature form ``Lambda_rows M Lambda_cols^dagger``.

    ``rows`` and ``cols`` are channel (mode) counts; by default half of each
    dimension of ``M``. A residual imaginary part above ``tol`` (relative to
    the size of ``M``) means ``M`` was not doubled-up and raises ``ValueError``.
    """
    if isinstance(M, DoubledMatrix):
        M = M.expand()
    M = _as_complex(M)
    rows = _half(M.shape[0], "row") if rows is None else rows
    cols = _half(M.shape[1], "column") if cols is None else cols
    if M.shape != (2 * rows, 2 * cols):
        raise ValueError(f"shape {M.shape} does not match {rows} x {cols} channels")
    out = quadrature_basis(rows) @ M @ quadrature_basis(cols).conj().T
    scale = max(1.0, np.abs(M).max(initial=0.0))
    resid = np.abs(out.imag).max(initial=0.0)
    if resid > tol * scale:
        raise ValueError(
            f"quadrature form has imaginary residual {resid:.3g}; input is not doubled-up")
    return np.ascontiguousarray(out.real)


def from_quadrature(M, rows: int | None = None, cols: int | None = None) -> np.ndarray:
    """Inverse of :func:`to_quadrature`: ``Lambda^dagger M Lambda``."""
    M = np.asarray(M)
    if M.ndim != 2:
        raise ValueError(f"expected a matrix, got array of shape {M.shape}")
    rows = _half(M.shape[0], "row") if rows is None else rows
    cols = _half(M.shape[1], "column") if cols is None else cols
    if M.shape != (2 * rows, 2 * cols):
        raise ValueError(f"shape {M.shape} does not match {rows} x {cols} channels")
    return quadrature_basis(rows).conj().T @ M @ quadrature_basis(cols)
