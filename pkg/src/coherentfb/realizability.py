"""Physical realizability checks and controller completion.

A verdict compares each residual with ``tol * scale`` where ``scale`` is
``max(1, largest Frobenius norm among the terms that should cancel)``. This
keeps the test meaningful for matrices rounded to a few decimals with large
entries, where absolute residuals grow with the entry size.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .algebra import delta, flat, signature, symplectic
from .errors import RealizabilityError

__all__ = [
    "RealizabilityReport",
    "check_annihilation",
    "check_quadrature_controller",
    "check_controller",
    "check_quadrature_plant",
    "check_plant",
    "skew_factor",
    "complete_controller",
]


@dataclass(frozen=True)
class RealizabilityReport:
    """Residual norms of the realizability identities and the resulting verdict.

    ``residuals`` maps identity names to Frobenius norms; ``scales`` holds the
    matching term scales. ``ccr_residual`` and ``bf_residual`` are shortcuts to
    the commutation-relation and input/output-consistency residuals.
    """

    residuals: dict
    scales: dict
    tolerance: float
    verdict: bool = field(init=False)

    def __post_init__(self):
        ok = all(self.residuals[k] <= self.tolerance * self.scales[k] for k in self.residuals)
        object.__setattr__(self, "verdict", bool(ok))

    @property
    def ccr_residual(self) -> float:
        return self.residuals.get("ccr", 0.0)

    @property
    def bf_residual(self) -> float:
        return self.residuals.get("bf", 0.0)

    def relative(self) -> dict:
        return {k: self.residuals[k] / self.scales[k] for k in self.residuals}

    def as_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "tolerance": self.tolerance,
            "residuals": {k: float(v) for k, v in self.residuals.items()},
            "scales": {k: float(v) for k, v in self.scales.items()},
        }


def _fro(M) -> float:
    return float(np.linalg.norm(M)) if np.size(M) else 0.0


def _scale(*terms) -> float:
    return max([1.0] + [_fro(t) for t in terms])


def check_annihilation(A, B_f, C_f, B_d=None, k_minus=None, k_plus=None,
                       tol: float = 1e-8) -> RealizabilityReport:
    """Check ``J A + A^dag J + C_f^dag J C_f = 0``, ``B_f = -C_f^flat`` and ``B_d = -Delta(K_-, K_+)^flat``."""
    A = np.asarray(A, dtype=complex)
    n = A.shape[0] // 2
    C_f = np.asarray(C_f, dtype=complex).reshape(-1, 2 * n)
    m = C_f.shape[0] // 2
    Jn, Jm = signature(n), signature(m)
    t1, t2, t3 = Jn @ A, A.conj().T @ Jn, C_f.conj().T @ Jm @ C_f
    res = {"ccr": _fro(t1 + t2 + t3)}
    scales = {"ccr": _scale(t1, t2, t3)}
    if B_f is not None:
        B_f = np.asarray(B_f, dtype=complex).reshape(2 * n, -1)
        fc = flat(C_f) if C_f.size else np.zeros((2 * n, 0))
        res["bf"] = _fro(B_f + fc)
        scales["bf"] = _scale(B_f, fc)
    if B_d is not None and k_minus is not None:
        B_d = np.asarray(B_d, dtype=complex)
        fk = flat(delta(k_minus, k_plus))
        res["bd"] = _fro(B_d + fk)
        scales["bd"] = _scale(B_d, fk)
    return RealizabilityReport(res, scales, tol)


def _theta_term(B) -> np.ndarray:
    B = np.asarray(B, dtype=float)
    if B.shape[1] == 0:
        return np.zeros((B.shape[0], B.shape[0]))
    return B @ symplectic(B.shape[1] // 2) @ B.T


def check_quadrature_controller(A_K, B_K=None, B_K1=None, B_K2=None, C_K=None, B_K0=None,
                                B_12=None, B_21=None, tol: float = 1e-8) -> RealizabilityReport:
    """Quadrature-form realizability of a controller with direct coupling.

    Residuals: ``ccr`` for ``A_K Th + Th A_K^T + sum_j B_j Th B_j^T`` over
    ``B_K1, B_K2, B_K``; ``ck`` for ``C_K - Th B_K1^T Th``; ``bk0`` for
    ``B_K0 - I``; ``b21`` for ``B_21 - Th B_12^T Th``. Absent blocks are skipped.
    """
    A_K = np.asarray(A_K, dtype=float)
    nk = A_K.shape[0] // 2
    Tk = symplectic(nk)
    terms = [A_K @ Tk, Tk @ A_K.T]
    for B in (B_K1, B_K2, B_K):
        if B is not None and np.size(B):
            terms.append(_theta_term(B))
    res = {"ccr": _fro(sum(terms))}
    scales = {"ccr": _scale(*terms)}
    if C_K is not None and np.size(C_K):
        C_K = np.asarray(C_K, dtype=float)
        B1 = np.zeros((2 * nk, C_K.shape[0])) if B_K1 is None else np.asarray(B_K1, dtype=float)
        target = symplectic(C_K.shape[0] // 2) @ B1.T @ Tk
        res["ck"] = _fro(C_K - target)
        scales["ck"] = _scale(C_K, target)
    if B_K0 is not None and np.size(B_K0):
        B_K0 = np.asarray(B_K0, dtype=float)
        res["bk0"] = _fro(B_K0 - np.eye(*B_K0.shape))
        scales["bk0"] = _scale(np.eye(*B_K0.shape))
    if B_12 is not None and B_21 is not None and np.size(B_12):
        B_12 = np.asarray(B_12, dtype=float)
        target = Tk @ B_12.T @ symplectic(B_12.shape[0] // 2)
        res["b21"] = _fro(np.asarray(B_21, dtype=float) - target)
        scales["b21"] = _scale(B_21, target)
    return RealizabilityReport(res, scales, tol)


def check_controller(K, tol: float = 1e-8) -> RealizabilityReport:
    """Realizability report for a :class:`~coherentfb.model.Controller` in either representation."""
    Kq = K.to("quadrature")
    return check_quadrature_controller(Kq.A_K, Kq.B_K, Kq.B_K1, Kq.B_K2, Kq.C_K, Kq.B_K0,
                                       Kq.B_12, Kq.B_21, tol)


def check_quadrature_plant(A, B_f=None, B_v=None, B_u=None, C=None, D_f=None, D_v=None,
                           tol: float = 1e-8) -> RealizabilityReport:
    """Quadrature-form realizability of a plant.

    Residuals: ``ccr`` for ``A Th + Th A^T + sum_j B_j Th B_j^T`` over all
    field inputs ``B_f, B_v, B_u``; ``meas`` for
    ``C - D_f Th B_f^T Th - D_v Th B_v^T Th``, i.e. the measured quadratures
    are the output fields of the channels they select.
    """
    A = np.asarray(A, dtype=float)
    n2 = A.shape[0]
    Tn = symplectic(n2 // 2)
    terms = [A @ Tn, Tn @ A.T]
    for B in (B_f, B_v, B_u):
        if B is not None and np.size(B):
            terms.append(_theta_term(B))
    res = {"ccr": _fro(sum(terms))}
    scales = {"ccr": _scale(*terms)}
    if C is not None and np.size(C):
        C = np.asarray(C, dtype=float)
        target = np.zeros_like(C)
        for B, D in ((B_f, D_f), (B_v, D_v)):
            if B is not None and np.size(B) and D is not None and np.size(D):
                B = np.asarray(B, dtype=float)
                target = target + np.asarray(D, dtype=float) @ symplectic(B.shape[1] // 2) @ B.T @ Tn
        res["meas"] = _fro(C - target)
        scales["meas"] = _scale(C, target)
    return RealizabilityReport(res, scales, tol)


def check_plant(P, tol: float = 1e-8) -> RealizabilityReport:
    """Realizability report for a :class:`~coherentfb.model.PlantModel` in either representation."""
    Pq = P.to("quadrature")
    return check_quadrature_plant(Pq.A, Pq.B_f, Pq.B_v, Pq.B_u, Pq.C, Pq.D_f, Pq.D_v, tol)


def skew_factor(Z, tol: float = 1e-10) -> np.ndarray:
    """Square real ``B`` with ``B Theta B^T = Z`` for a real skew-symmetric ``Z``.

    Uses the real Schur form, which for a skew-symmetric matrix is an
    orthogonal congruence to ``diag(z_j Theta_1, 0, ...)``. Each block is
    scaled by ``sqrt|z_j|`` (with a swap when ``z_j < 0``) and its two columns
    are placed at positions ``(j, k + j)``, which ``Theta_k`` pairs up.
    """
    Z = np.asarray(Z, dtype=float)
    if Z.ndim != 2 or Z.shape[0] != Z.shape[1] or Z.shape[0] % 2:
        raise ValueError(f"expected an even-dimensioned square matrix, got {Z.shape}")
    scale = max(1.0, np.abs(Z).max(initial=0.0))
    if np.abs(Z + Z.T).max(initial=0.0) > tol * scale:
        raise RealizabilityError("matrix is not skew-symmetric; inputs are inconsistent")
    Z = 0.5 * (Z - Z.T)
    d = Z.shape[0]
    if d == 0 or not Z.any():
        return np.zeros_like(Z)
    T, Q = sla.schur(Z, output="real")
    k = d // 2
    B = np.zeros((d, d))
    swap = np.array([[0.0, 1.0], [1.0, 0.0]])
    j = 0
    i = 0
    while i < d:
        if i + 1 < d and abs(T[i + 1, i]) > 1e-14 * scale:
            z = 0.5 * (T[i, i + 1] - T[i + 1, i])
            F = np.sqrt(abs(z)) * (np.eye(2) if z >= 0 else swap)
            cols = Q[:, i:i + 2] @ F
            # pair j occupies columns (j, k + j), where Theta_k pairs them
            B[:, j], B[:, k + j] = cols[:, 0], cols[:, 1]
            j += 1
            i += 2
        else:
            i += 1  # zero eigenvalue: leaves zero columns
    err = np.abs(B @ symplectic(d // 2) @ B.T - Z).max()
    if err > 1e-8 * scale:
        raise RealizabilityError(f"skew factorization failed (residual {err:.3g})")
    return B


def complete_controller(A_K, B_K, C_K, tol: float = 1e-10):
    """Noise-channel matrices ``(B_K1, B_K2, B_K0)`` making a quadrature controller realizable.

    ``B_K1 = Th C_K^T Th`` is forced by the output equation, ``B_K0 = I`` and
    ``B_K2`` absorbs what remains of the commutation-relation identity.
    """
    A_K = np.asarray(A_K, dtype=float)
    nk2 = A_K.shape[0]
    B_K = np.zeros((nk2, 0)) if B_K is None else np.asarray(B_K, dtype=float)
    C_K = np.zeros((0, nk2)) if C_K is None else np.asarray(C_K, dtype=float)
    if nk2 % 2 or B_K.shape[1] % 2 or C_K.shape[0] % 2:
        raise ValueError("quadrature matrices have even dimensions")
    Tk = symplectic(nk2 // 2)
    B_K1 = Tk @ C_K.T @ symplectic(C_K.shape[0] // 2)
    Z = -(A_K @ Tk + Tk @ A_K.T + _theta_term(B_K1) + _theta_term(B_K))
    B_K2 = skew_factor(Z, tol)
    B_K0 = np.eye(C_K.shape[0])
    return B_K1, B_K2, B_K0
