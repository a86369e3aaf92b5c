"""Composite systems: direct coupling, series product and the feedback loop.

Composite states are ordered subsystem by subsystem, ``[a1_doubled; a2_doubled]``,
matching the block layout used for the closed-loop matrices.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .algebra import QUADRATURE_TOL, quadrature_basis
from .model import (Controller, GeneralModel, PlantModel, Representation, SystemMatrices,
                    build, coupling_blocks)

__all__ = ["ClosedLoop", "direct_couple", "series", "close_loop"]


def _system(G) -> SystemMatrices:
    return build(G) if isinstance(G, GeneralModel) else G


def direct_couple(G1, G2, k_minus, k_plus=None) -> SystemMatrices:
    """Direct (Hamiltonian) coupling ``G1 ⋈ G2`` with ``K_-+`` of shape ``n2 x n1``.

    Field and direct-input matrices of the two subsystems are kept side by side
    (block diagonal), so each subsystem keeps its own channels.
    """
    S1, S2 = _system(G1), _system(G2)
    n1, n2 = S1.A.shape[0] // 2, S2.A.shape[0] // 2
    k_minus = np.atleast_2d(np.asarray(k_minus, dtype=complex))
    k_plus = np.zeros_like(k_minus) if k_plus is None else np.atleast_2d(np.asarray(k_plus, dtype=complex))
    if k_minus.shape != (n2, n1) or k_plus.shape != (n2, n1):
        raise ValueError(f"coupling matrices must be {n2}x{n1}, got {k_minus.shape} and {k_plus.shape}")
    B12, B21 = coupling_blocks(k_minus, k_plus)
    A = np.block([[S1.A, B12], [B21, S2.A]])
    return SystemMatrices(A, sla.block_diag(S1.B_d, S2.B_d), sla.block_diag(S1.B_f, S2.B_f),
                          sla.block_diag(S1.C_f, S2.C_f))


def series(G1, G2) -> SystemMatrices:
    """Series product ``G2 ◁ G1``: the output field of ``G1`` drives ``G2``.

    ``G2`` sees ``C_f1 a1 + b_in``; the composite output is ``C_f1 a1 + C_f2 a2 + b_in``.
    """
    S1, S2 = _system(G1), _system(G2)
    if S1.C_f.shape[0] != S2.C_f.shape[0]:
        raise ValueError(
            f"field channel counts differ: {S1.C_f.shape[0] // 2} vs {S2.C_f.shape[0] // 2}")
    n1 = S1.A.shape[0]
    A = np.block([[S1.A, np.zeros((n1, S2.A.shape[0]))], [S2.B_f @ S1.C_f, S2.A]])
    B_f = np.vstack([S1.B_f, S2.B_f])
    C_f = np.hstack([S1.C_f, S2.C_f])
    return SystemMatrices(A, sla.block_diag(S1.B_d, S2.B_d), B_f, C_f)


@dataclass(frozen=True, eq=False)
class ClosedLoop:
    """State space of the plant-controller loop.

    ``a_cl' = A a_cl + B w + G [b_in; b_v; b_vK1; b_vK2]`` and ``z = C a_cl + D w``.
    ``state_sizes`` gives the plant and controller state dimensions and
    ``noise_widths`` the column count of each noise group in ``G``.
    """

    A: np.ndarray
    B: np.ndarray
    G: np.ndarray
    C: np.ndarray
    D: np.ndarray
    representation: Representation = "annihilation"
    state_sizes: tuple = ()
    noise_widths: tuple = ()

    def __post_init__(self):
        n = self.A.shape[0]
        if self.A.shape != (n, n) or self.B.shape[0] != n or self.G.shape[0] != n:
            raise ValueError("closed-loop blocks have inconsistent row counts")
        if self.C.shape[1] != n or self.D.shape != (self.C.shape[0], self.B.shape[1]):
            raise ValueError("closed-loop output blocks have inconsistent shapes")
        if not self.state_sizes:
            object.__setattr__(self, "state_sizes", (n,))
        if not self.noise_widths:
            object.__setattr__(self, "noise_widths", (self.G.shape[1],))
        if sum(self.state_sizes) != n or sum(self.noise_widths) != self.G.shape[1]:
            raise ValueError("state_sizes/noise_widths do not add up to the block sizes")
        for name in ("A", "B", "G", "C", "D"):
            getattr(self, name).setflags(write=False)

    @property
    def spectral_abscissa(self) -> float:
        return float(np.linalg.eigvals(self.A).real.max()) if self.A.size else -np.inf

    def is_hurwitz(self) -> bool:
        return self.spectral_abscissa < 0

    def to(self, target: Representation) -> "ClosedLoop":
        """Change representation group by group, keeping the block layout."""
        if target == self.representation:
            return self

        def basis(sizes):
            blocks = [quadrature_basis(k // 2) for k in sizes if k]
            return sla.block_diag(*blocks) if blocks else np.zeros((0, 0))

        T = basis(self.state_sizes)
        Tg = basis(self.noise_widths)
        Tw = quadrature_basis(self.B.shape[1] // 2)
        Tz = quadrature_basis(self.C.shape[0] // 2)
        if target == "annihilation":
            T, Tg, Tw, Tz = (M.conj().T for M in (T, Tg, Tw, Tz))
        conj = lambda L, M, R: L @ M @ R.conj().T
        out = [conj(T, self.A, T), conj(T, self.B, Tw), conj(T, self.G, Tg),
               conj(Tz, self.C, T), conj(Tz, self.D, Tw)]
        if target == "quadrature":
            scale = max(1.0, max(np.abs(M).max(initial=0.0) for M in out))
            resid = max(np.abs(M.imag).max(initial=0.0) for M in out)
            if resid > QUADRATURE_TOL * scale:
                raise ValueError(f"closed loop is not doubled-up (imaginary residual {resid:.3g})")
            out = [np.ascontiguousarray(M.real) for M in out]
        return ClosedLoop(*out, representation=target, state_sizes=self.state_sizes,
                          noise_widths=self.noise_widths)


def close_loop(P: PlantModel, K: Controller) -> ClosedLoop:
    """Assemble the plant-controller loop.

    The controller is converted to the plant's representation. Its coupling
    block ``B_12`` enters the plant row and ``B_21`` the controller row.
    """
    K = K.to(P.representation)
    n, nk = P.A.shape[0], K.A_K.shape[0]
    if K.n_plant not in (0, n) and K.B_12.size:
        raise ValueError(f"controller coupling expects a plant of size {K.n_plant}, got {n}")
    B_12 = K.B_12 if K.B_12.size else np.zeros((n, nk))
    B_21 = K.B_21 if K.B_21.size else np.zeros((nk, n))
    if K.B_K.shape[1] != P.C.shape[0]:
        raise ValueError(f"controller input width {K.B_K.shape[1]} != measurement size {P.C.shape[0]}")
    if K.C_K.shape[0] != P.B_u.shape[1]:
        raise ValueError(f"controller output size {K.C_K.shape[0]} != plant control width {P.B_u.shape[1]}")
    dtype = float if P.representation == "quadrature" else complex
    A = np.block([[P.A, P.B_u @ K.C_K + B_12], [K.B_K @ P.C + B_21, K.A_K]]).astype(dtype)
    B = np.vstack([P.B_f, K.B_K @ P.D_f]).astype(dtype)
    m1, m2 = K.B_K1.shape[1], K.B_K2.shape[1]
    G = np.block([
        [P.B_f, P.B_v, P.B_u @ K.B_K0, np.zeros((n, m2))],
        [K.B_K @ P.D_f, K.B_K @ P.D_v, K.B_K1, K.B_K2],
    ]).astype(dtype)
    C = np.hstack([P.C_p, P.D_u @ K.C_K]).astype(dtype)
    D = np.asarray(P.D_pf, dtype=dtype)
    return ClosedLoop(A, B, G, C, D, P.representation, (n, nk),
                      (P.B_f.shape[1], P.B_v.shape[1], m1, m2))
