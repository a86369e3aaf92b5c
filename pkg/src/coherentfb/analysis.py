"""Stability, dissipation, passivity, gain and LQG analysis of linear quantum systems.

Functions accept annihilation-form (complex) or quadrature-form (real)
matrices unless stated otherwise; all formulas use conjugate transposes, which
reduce to transposes for real input.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .algebra import ito_matrix
from .errors import NotHurwitzError, SolverError
from .lmi import Affine, LMIProblem, bmat, feasibility
from .model import stack_inputs

__all__ = [
    "StabilityClass",
    "classify_stability",
    "spectral_abscissa",
    "is_hurwitz",
    "lyapunov_solve",
    "DecayCertificate",
    "decay_bound",
    "SupplyRate",
    "stack_inputs",
    "DissipationResult",
    "dissipation_feasible",
    "PassivityResult",
    "passivity_check",
    "transfer",
    "hinf_norm",
    "BRLResult",
    "strict_brl",
    "riccati_stabilizing",
    "lqg_cost",
    "lqg_cost_batch",
    "STABILITY_TOL",
]

STABILITY_TOL = 1e-8


def _mat(M) -> np.ndarray:
    M = np.asarray(M)
    if M.ndim == 0:
        M = M.reshape(1, 1)
    return M


def _H(M):
    return M.conj().T


class StabilityClass(enum.Enum):
    EXPONENTIALLY_STABLE = "ExponentiallyStable"
    MARGINALLY_STABLE = "MarginallyStable"
    UNSTABLE = "Unstable"

    def __str__(self):
        return self.value


def spectral_abscissa(A) -> float:
    A = _mat(A)
    return float(np.linalg.eigvals(A).real.max()) if A.size else -np.inf


def is_hurwitz(A) -> bool:
    return spectral_abscissa(A) < 0


def classify_stability(A, tol: float = STABILITY_TOL) -> StabilityClass:
    """Spectral classification of ``a' = A a``.

    Eigenvalues with ``|Re| <= tol`` count as imaginary-axis eigenvalues; a
    defective one (geometric multiplicity below algebraic) means polynomial
    growth and is classed as unstable.
    """
    A = _mat(A).astype(complex)
    if A.size == 0:
        return StabilityClass.EXPONENTIALLY_STABLE
    try:
        lam = np.linalg.eigvals(A)
    except np.linalg.LinAlgError as exc:
        raise SolverError(f"eigenvalue computation failed: {exc}") from exc
    if np.any(lam.real > tol):
        return StabilityClass.UNSTABLE
    axis = lam[np.abs(lam.real) <= tol]
    if axis.size == 0:
        return StabilityClass.EXPONENTIALLY_STABLE
    n = A.shape[0]
    scale = max(1.0, np.abs(A).max())
    seen = []
    for mu in axis:
        if any(abs(mu - s) <= 1e-6 * scale for s in seen):
            continue
        seen.append(mu)
        alg = int(np.sum(np.abs(lam - mu) <= 1e-6 * scale))
        sv = np.linalg.svd(A - mu * np.eye(n), compute_uv=False)
        geo = int(np.sum(sv <= 1e-7 * scale))
        if geo < alg:
            return StabilityClass.UNSTABLE
    return StabilityClass.MARGINALLY_STABLE


def lyapunov_solve(A, W) -> np.ndarray:
    """Solve ``A P + P A^dag + W = 0`` by Kronecker vectorization.

    Raises :class:`NotHurwitzError` when ``A`` is not Hurwitz (the integral
    solution does not exist).
    """
    A = _mat(A)
    W = _mat(W)
    n = A.shape[0]
    if not is_hurwitz(A):
        raise NotHurwitzError("Lyapunov equation needs a Hurwitz matrix")
    real = not (np.iscomplexobj(A) or np.iscomplexobj(W))
    I = np.eye(n)
    # vec(A P) = (I kron A) vec P, vec(P A^dag) = (conj(A) kron I) vec P  (column-major vec)
    K = np.kron(I, A) + np.kron(A.conj(), I)
    p = np.linalg.solve(K, -W.reshape(-1, order="F"))
    P = p.reshape(n, n, order="F")
    P = 0.5 * (P + _H(P))
    return P.real if real else P


@dataclass(frozen=True)
class DecayCertificate:
    """Outcome of the energy-decay certificate check.

    ``holds`` says whether ``A^dag P + P A + Q ⪯ 0``; ``lam`` is the noise
    contribution ``tr[B_f^dag P B_f F]`` and ``issues`` lists failed
    preconditions (``P ⪰ 0``, ``Q ⪰ cP``, ``c > 0``).
    """

    holds: bool
    lam: float
    max_eig: float
    issues: tuple = ()


def decay_bound(A, B_f, P, Q, c: float, tol: float = 1e-9) -> DecayCertificate:
    A, B_f, P, Q = (_mat(M).astype(complex) for M in (A, B_f, P, Q))
    issues = []
    scale = max(1.0, np.abs(P).max(initial=0), np.abs(Q).max(initial=0), np.abs(A).max(initial=0))
    if c <= 0:
        issues.append("c must be positive")
    if np.linalg.eigvalsh(0.5 * (P + _H(P))).min(initial=0) < -tol * scale:
        issues.append("P is not positive semidefinite")
    if np.linalg.eigvalsh(0.5 * (Q - c * P + _H(Q - c * P))).min(initial=0) < -tol * scale:
        issues.append("Q - cP is not positive semidefinite")
    L = _H(A) @ P + P @ A + Q
    top = float(np.linalg.eigvalsh(0.5 * (L + _H(L))).max(initial=-np.inf))
    F = ito_matrix(B_f.shape[1] // 2)
    lam = float(np.trace(_H(B_f) @ P @ B_f @ F).real)
    return DecayCertificate(top <= tol * scale and not issues, lam, top, tuple(issues))


@dataclass(frozen=True)
class SupplyRate:
    """Quadratic supply rate ``r = 1/2 [a; u]^dag R [a; u]`` with ``R = [[R11, R12], [R12^dag, R22]]``."""

    R11: np.ndarray
    R12: np.ndarray
    R22: np.ndarray

    def __post_init__(self):
        for name in ("R11", "R12", "R22"):
            object.__setattr__(self, name, _mat(getattr(self, name)))
        R = self.matrix
        if np.abs(R - _H(R)).max(initial=0) > 1e-10 * max(1.0, np.abs(R).max(initial=0)):
            raise ValueError("supply rate matrix is not Hermitian")

    @property
    def matrix(self) -> np.ndarray:
        return np.block([[self.R11, self.R12], [_H(self.R12), self.R22]])

    @classmethod
    def passivity(cls, Q, C_p) -> "SupplyRate":
        C_p = _mat(C_p)
        return cls(-_mat(Q), _H(C_p), np.zeros((C_p.shape[0], C_p.shape[0])))

    @classmethod
    def gain(cls, C_p, D_p, g: float) -> "SupplyRate":
        C_p, D_p = _mat(C_p), _mat(D_p)
        return cls(-_H(C_p) @ C_p, -_H(C_p) @ D_p, g ** 2 * np.eye(D_p.shape[1]) - _H(D_p) @ D_p)


@dataclass
class DissipationResult:
    feasible: bool
    P: np.ndarray | None
    lam: float | None
    status: str
    note: str = ""


def _hermitian_var(prob: LMIProblem, name: str, n: int, complex_: bool):
    return prob.hermitian(name, n) if complex_ else prob.symmetric(name, n)


def dissipation_feasible(A, B, B_f, R: SupplyRate, margin: float = 0.0) -> DissipationResult:
    """Search for ``P ⪰ 0`` with ``[[PA + A^dag P - R11, PB - R12], [B^dag P - R12^dag, -R22]] ⪯ 0``.

    ``B`` must already carry the ``(v, w)`` input ordering (see
    :func:`stack_inputs`). Solver breakdown raises :class:`SolverError`.
    """
    A, B, B_f = _mat(A), _mat(B), _mat(B_f)
    n = A.shape[0]
    cplx = any(np.iscomplexobj(M) for M in (A, B, R.R11, R.R12, R.R22))
    prob = LMIProblem()
    P = _hermitian_var(prob, "P", n, cplx)
    prob.add(-P, name="P>=0")
    L = bmat([[P @ A + _H(A) @ P - R.R11, P @ B - R.R12],
              [_H(B) @ P - _H(R.R12), -R.R22]])
    prob.add(L, strict=margin > 0, name="dissipation")
    res = feasibility(prob, margin)
    if res.status == "stalled":
        raise SolverError(f"dissipation LMI stalled: {res.note}")
    if not res.feasible:
        return DissipationResult(False, None, None, res.status, res.note)
    Pv = res.value(P)
    lam = float(np.trace(_H(B_f) @ Pv @ B_f @ ito_matrix(B_f.shape[1] // 2)).real) if B_f.size else 0.0
    return DissipationResult(True, Pv, lam, res.status, res.note)


@dataclass
class PassivityResult:
    """Passivity verdict with certificate ``(P, Q)`` and the natural candidate.

    ``natural_Q`` is ``-(A + A^dag)``, the dissipation matrix for ``P = I``,
    which certifies passivity when ``C_p = B^dag`` and ``natural_Q ⪰ 0``.
    """

    passive: bool
    P: np.ndarray | None
    Q: np.ndarray | None
    natural_Q: np.ndarray
    natural_applies: bool
    note: str = ""


def _hermitian_basis(n: int, cplx: bool):
    basis = []
    for i in range(n):
        for j in range(i, n):
            E = np.zeros((n, n), dtype=complex if cplx else float)
            E[i, j] = E[j, i] = 1.0
            basis.append(E)
            if cplx and i != j:
                E = np.zeros((n, n), dtype=complex)
                E[i, j], E[j, i] = 1j, -1j
                basis.append(E)
    return basis


def passivity_check(A, B, C_p, tol: float = 1e-9) -> PassivityResult:
    """Positive real lemma test for ``z = C_p a``.

    The LMI with a zero lower-right block forces ``P B = C_p^dag``; passivity
    then reduces to finding ``P ⪰ 0`` on that affine set with
    ``P A + A^dag P ⪯ 0``, and ``Q = -(P A + A^dag P)``. The affine set is
    computed exactly, so a uniquely determined ``P`` is checked by eigenvalues
    alone and only a genuine family of candidates goes to the SDP solver.
    """
    A, B, C_p = _mat(A), _mat(B), _mat(C_p)
    n = A.shape[0]
    cplx = any(np.iscomplexobj(M) for M in (A, B, C_p))
    nat_Q = -(A + _H(A))
    nat_applies = C_p.shape == _H(B).shape and np.allclose(C_p, _H(B), atol=tol)
    basis = _hermitian_basis(n, cplx)
    # P B = C_p^dag as a real linear system in the basis coefficients
    cols = [(E @ B).ravel() for E in basis]
    M = np.array(cols).T
    rhs = _H(C_p).ravel()
    if cplx:
        M = np.vstack([M.real, M.imag])
        rhs = np.concatenate([rhs.real, rhs.imag])
    else:
        M, rhs = M.real, rhs.real
    t0, *_ = np.linalg.lstsq(M, rhs, rcond=None)
    scale = max(1.0, np.abs(A).max(initial=0), np.abs(B).max(initial=0), np.abs(C_p).max(initial=0))
    if np.abs(M @ t0 - rhs).max(initial=0) > 1e-9 * scale:
        return PassivityResult(False, None, None, nat_Q, nat_applies,
                               "no Hermitian P satisfies P B = C_p^dag")
    null = sla.null_space(M) if M.size else np.eye(len(basis))
    P0 = sum(t * E for t, E in zip(t0, basis)) if basis else np.zeros((n, n))

    def finish(P, note):
        L = P @ A + _H(A) @ P
        Q = -0.5 * (L + _H(L))
        pos = np.linalg.eigvalsh(0.5 * (P + _H(P))).min(initial=0) >= -tol * scale
        qpos = np.linalg.eigvalsh(Q).min(initial=0) >= -tol * scale * max(1.0, np.abs(P).max())
        return PassivityResult(bool(pos and qpos), P, Q, nat_Q, nat_applies, note)

    if null.shape[1] == 0:
        return finish(P0, "P fixed by P B = C_p^dag")
    prob = LMIProblem()
    s = [prob.scalar(f"s{k}") for k in range(null.shape[1])]
    dirs = [sum(null[i, k] * basis[i] for i in range(len(basis))) for k in range(null.shape[1])]
    P = Affine.lift(np.asarray(P0))
    for sk, D in zip(s, dirs):
        P = P + sk * D
    prob.add(-P, name="P>=0")
    prob.add(P @ A + _H(A) @ P, name="PA+A^dag P<=0")
    res = feasibility(prob, 0.0)
    if res.status == "stalled":
        raise SolverError(f"passivity LMI stalled: {res.note}")
    if not res.feasible:
        return PassivityResult(False, None, None, nat_Q, nat_applies, res.note)
    return finish(res.value(P), res.note)


def transfer(A, B, C, D, s) -> np.ndarray:
    """``C (sI - A)^{-1} B + D`` at the complex frequency ``s``."""
    A = _mat(A)
    return _mat(C) @ np.linalg.solve(s * np.eye(A.shape[0]) - A, _mat(B)) + _mat(D)


def _smax(M) -> float:
    return float(np.linalg.norm(M, 2)) if M.size else 0.0


def hinf_norm(A, B, C, D=None, rtol: float = 1e-9, max_iter: int = 200) -> float:
    """H-infinity norm of ``(A, B, C, D)``; ``inf`` when ``A`` is not Hurwitz.

    Bisection on ``g`` with the Hamiltonian imaginary-axis test. Candidate
    imaginary eigenvalues are confirmed by evaluating the transfer matrix at
    the corresponding frequency, which also raises the lower bound.
    """
    A, B, C = _mat(A), _mat(B), _mat(C)
    D = np.zeros((C.shape[0], B.shape[1])) if D is None else _mat(D)
    if A.size and not is_hurwitz(A):
        return float("inf")
    if B.size == 0 or C.size == 0:
        return _smax(D)
    if A.size == 0:
        return _smax(D)
    n = A.shape[0]
    lo = max(_smax(D), _smax(transfer(A, B, C, D, 0.0)))
    # extra lower-bound probes at the resonances
    for w in np.unique(np.abs(np.linalg.eigvals(A).imag)):
        lo = max(lo, _smax(transfer(A, B, C, D, 1j * w)))
    DD = _H(D) @ D
    I_in, I_out = np.eye(B.shape[1]), np.eye(C.shape[0])

    def crossing(g):
        """Frequencies where ``sigma_max(G(i w)) = g``; empty when ``g`` exceeds the norm."""
        R = g * g * I_in - DD
        Ri = np.linalg.inv(R)
        Abar = A + B @ Ri @ _H(D) @ C
        H = np.block([[Abar, B @ Ri @ _H(B)],
                      [-_H(C) @ (I_out + D @ Ri @ _H(D)) @ C, -_H(Abar)]])
        lam = np.linalg.eigvals(H)
        hs = max(1.0, np.abs(H).max())
        cand = lam[np.abs(lam.real) <= 1e-6 * hs]
        return np.unique(np.round(cand.imag, 12))

    if lo == 0.0:
        lo = 1e-300
    hi = max(2 * lo, 1e-12)
    for _ in range(200):
        if not _confirmed(crossing(hi), hi, A, B, C, D)[0]:
            break
        hi *= 2
    for _ in range(max_iter):
        if hi - lo <= 2 * rtol * lo:
            break
        g = 0.5 * (lo + hi)
        found, best = _confirmed(crossing(g), g, A, B, C, D)
        if found:
            lo = max(lo, best)
        else:
            hi = g
    return 0.5 * (lo + hi)


def _confirmed(ws, g, A, B, C, D):
    best = 0.0
    for w in ws:
        s = _smax(transfer(A, B, C, D, 1j * w))
        best = max(best, s)
    # midpoints between crossings also bound the peak from below
    if len(ws) > 1:
        for a, b in zip(ws[:-1], ws[1:]):
            best = max(best, _smax(transfer(A, B, C, D, 0.5j * (a + b))))
    return best >= g * (1 - 1e-9), best


def riccati_stabilizing(A, B, C, D, g: float):
    """Stabilizing solution of the bounded-real Riccati equation.

    Solves ``A^dag P + P A + (P B + C^dag D) R^{-1} (B^dag P + D^dag C) + C^dag C = 0``
    with ``R = g^2 I - D^dag D`` through the ordered Schur form of the
    Hamiltonian matrix. Returns ``(P, closed_loop_matrix, condition)``;
    ``P`` is ``None`` when no stabilizing solution exists.
    """
    A, B, C, D = (_mat(M).astype(complex) for M in (A, B, C, D))
    n = A.shape[0]
    R = g * g * np.eye(B.shape[1]) - _H(D) @ D
    Ri = np.linalg.inv(R)
    Abar = A + B @ Ri @ _H(D) @ C
    Qm = _H(C) @ (np.eye(C.shape[0]) + D @ Ri @ _H(D)) @ C
    H = np.block([[Abar, B @ Ri @ _H(B)], [-Qm, -_H(Abar)]])
    T, Z, sdim = sla.schur(H, output="complex", sort="lhp")
    if sdim != n:
        return None, None, np.inf
    X1, X2 = Z[:n, :n], Z[n:, :n]
    cond = np.linalg.cond(X1)
    if not np.isfinite(cond) or cond > 1e12:
        return None, None, cond
    # stable invariant subspace is span [I; P]
    P = X2 @ np.linalg.inv(X1)
    P = 0.5 * (P + _H(P))
    K = A + B @ Ri @ (_H(B) @ P + _H(D) @ C)
    return P, K, cond


@dataclass
class BRLResult:
    """Equivalent strict bounded-real checks at attenuation ``g``.

    ``lmi_feasible`` (with certificate ``P1``) and ``riccati_ok`` (stabilizing
    ``P2 >= 0`` with Hurwitz closed-loop matrix) should agree with
    ``norm_below_g``. ``ordering`` is the smallest eigenvalue of ``P1 - P2``.
    """

    g: float
    stable: bool
    norm: float
    norm_below_g: bool
    lmi_feasible: bool | None
    P1: np.ndarray | None
    riccati_ok: bool
    P2: np.ndarray | None
    ordering: float | None
    notes: list = field(default_factory=list)

    @property
    def holds(self) -> bool:
        return self.stable and self.norm_below_g and bool(self.lmi_feasible) and self.riccati_ok


def strict_brl(A, B, C_p, D_p, g: float, margin: float = 1e-7) -> BRLResult:
    A, B, C_p = _mat(A), _mat(B), _mat(C_p)
    D_p = np.zeros((C_p.shape[0], B.shape[1])) if D_p is None else _mat(D_p)
    notes = []
    stable = is_hurwitz(A)
    norm = hinf_norm(A, B, C_p, D_p)
    R = g * g * np.eye(B.shape[1]) - _H(D_p) @ D_p
    rpos = np.linalg.eigvalsh(0.5 * (R + _H(R))).min() > 0
    if not rpos:
        notes.append("g^2 I - D^dag D is not positive definite")
    cplx = any(np.iscomplexobj(M) for M in (A, B, C_p, D_p))
    n = A.shape[0]
    lmi_ok, P1 = None, None
    if rpos:
        prob = LMIProblem()
        P = _hermitian_var(prob, "P1", n, cplx)
        prob.add(-P, strict=True, name="P1>0")
        prob.add(bmat([[_H(A) @ P + P @ A + _H(C_p) @ C_p, P @ B + _H(C_p) @ D_p],
                       [_H(B) @ P + _H(D_p) @ C_p, _H(D_p) @ D_p - g * g * np.eye(B.shape[1])]]),
                 strict=True, name="BRL")
        try:
            res = feasibility(prob, margin)
            lmi_ok = res.feasible
            P1 = res.value(P) if res.feasible else None
            if res.status == "stalled":
                notes.append(f"LMI stalled: {res.note}")
        except SolverError as exc:
            notes.append(f"LMI solver failure: {exc}")
    ric_ok, P2 = False, None
    if rpos and stable:
        P2, K, cond = riccati_stabilizing(A, B, C_p, D_p, g)
        if P2 is None:
            notes.append(f"no stabilizing Riccati solution (condition {cond:.3g})")
        else:
            # unobservable modes make the stabilizing solution singular, so P2 >= 0 suffices
            psd = np.linalg.eigvalsh(P2).min() >= -1e-9 * max(1.0, np.abs(P2).max())
            ric_ok = bool(psd and is_hurwitz(K))
            if cond > 1e8:
                notes.append(f"Riccati solution ill-conditioned (condition {cond:.3g})")
            if not np.iscomplexobj(A) and not np.iscomplexobj(B):
                P2 = P2.real
    ordering = None
    if P1 is not None and P2 is not None:
        ordering = float(np.linalg.eigvalsh(0.5 * ((P1 - P2) + _H(P1 - P2))).min())
    return BRLResult(g, stable, norm, stable and norm < g, lmi_ok, P1, ric_ok, P2, ordering, notes)


def lqg_cost(A, G, C, noise_weight: float = 0.5) -> float:
    """Infinite-horizon cost ``Tr(C P C^dag)`` with ``A P + P A^dag + w G G^dag = 0``.

    ``w = 1/2`` is the vacuum intensity in annihilation form and in the
    unitary quadrature basis. Returns ``inf`` when ``A`` is not Hurwitz.
    """
    A, G, C = _mat(A), _mat(G), _mat(C)
    if not is_hurwitz(A):
        return float("inf")
    P = lyapunov_solve(A, noise_weight * G @ _H(G))
    return float(np.trace(C @ P @ _H(C)).real)


def lqg_cost_batch(A, G, C, noise_weight: float = 0.5, penalty: float = 1e6,
                   chunk: int = 4096) -> np.ndarray:
    """:func:`lqg_cost` for a stack of closed-loop matrices ``A[k]`` sharing ``G`` and ``C``.

    Non-Hurwitz entries get ``penalty + spectral abscissa`` so that grid and
    simplex searches stay inside the stabilizing region.
    """
    A = np.asarray(A)
    G, C = _mat(G), _mat(C)
    N, n = A.shape[0], A.shape[1]
    W = noise_weight * G @ _H(G)
    w = -W.reshape(-1, order="F")
    I = np.eye(n)
    out = np.empty(N)
    for s in range(0, N, chunk):
        Ab = A[s:s + chunk]
        absc = np.linalg.eigvals(Ab).real.max(axis=1)
        ok = absc < 0
        res = penalty + absc
        if ok.any():
            As = Ab[ok]
            # column-major vec: (I kron A) + (conj(A) kron I)
            K = (np.einsum("ij,pkl->pikjl", I, As).reshape(-1, n * n, n * n)
                 + np.einsum("pij,kl->pikjl", As.conj(), I).reshape(-1, n * n, n * n))
            p = np.linalg.solve(K, np.broadcast_to(w, (K.shape[0], n * n))[..., None])[..., 0]
            P = p.reshape(-1, n, n).transpose(0, 2, 1)
            res[ok] = np.einsum("ij,pjk,ik->p", C, P, C.conj()).real
        out[s:s + chunk] = res
    return out
