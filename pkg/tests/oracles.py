"""Independent numerical oracles used to cross-check the library.

None of these helpers call into ``coherentfb``; they work from the raw
matrices with plain numpy/scipy so that agreement is meaningful.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg as sla
from scipy.integrate import quad_vec
from scipy.optimize import minimize_scalar


def sigma_max(A, B, C, D, w) -> float:
    """Largest singular value of ``C (iwI - A)^-1 B + D``."""
    n = A.shape[0]
    G = C @ np.linalg.solve(1j * w * np.eye(n) - A, B) + D
    return float(np.linalg.svd(G, compute_uv=False)[0]) if G.size else 0.0


def hinf_grid(A, B, C, D=None, points: int = 10_000, refine: bool = True) -> float:
    """H-infinity norm by a dense frequency sweep with local refinement.

    Frequencies are log-spaced over ``[1e-4, 1e4]`` scaled by the spectral
    radius of ``A``; negative frequencies are included for complex systems,
    whose frequency response is not conjugate-symmetric. The best few grid
    points are polished with a bounded scalar search between neighbours.
    """
    A, B, C = (np.asarray(M) for M in (A, B, C))
    D = np.zeros((C.shape[0], B.shape[1])) if D is None else np.asarray(D)
    if np.linalg.eigvals(A).real.max() >= 0:
        return np.inf
    rho = max(1.0, np.abs(np.linalg.eigvals(A)).max())
    pos = rho * np.logspace(-4, 4, points)
    cplx = any(np.iscomplexobj(M) for M in (A, B, C, D))
    w = np.concatenate([-pos[::-1], [0.0], pos]) if cplx else np.concatenate([[0.0], pos])
    vals = np.array([sigma_max(A, B, C, D, x) for x in w])
    best = float(max(vals.max(), np.linalg.svd(D, compute_uv=False).max(initial=0.0)))
    if refine:
        for k in np.argsort(vals)[-5:]:
            lo, hi = w[max(k - 1, 0)], w[min(k + 1, len(w) - 1)]
            if hi <= lo:
                continue
            r = minimize_scalar(lambda x: -sigma_max(A, B, C, D, x), bounds=(lo, hi),
                                method="bounded", options={"xatol": 1e-12 * max(1.0, abs(hi))})
            best = max(best, -float(r.fun))
    return best


def lyapunov_integral(A, W) -> np.ndarray:
    """``int_0^inf exp(At) W exp(A^dag t) dt`` by adaptive vector quadrature."""
    A, W = np.asarray(A, dtype=complex), np.asarray(W, dtype=complex)

    def f(t):
        E = sla.expm(A * t)
        return E @ W @ E.conj().T

    P, err = quad_vec(f, 0, np.inf, epsabs=1e-12, epsrel=1e-11)
    return P


def lyapunov_scipy(A, W) -> np.ndarray:
    """Bartels-Stewart solution of ``A P + P A^dag + W = 0`` (scipy)."""
    return sla.solve_continuous_lyapunov(np.asarray(A), -np.asarray(W))


def lqg_cost(A, G, C, weight: float) -> float:
    """``Tr(C P C^dag)`` with ``P`` from the integral oracle."""
    P = lyapunov_integral(A, weight * G @ np.asarray(G).conj().T)
    return float(np.trace(C @ P @ np.asarray(C).conj().T).real)


def quadrature_unitary(n: int) -> np.ndarray:
    """``Lambda_n = [[I, I], [-iI, iI]] / sqrt(2)`` built from scratch."""
    I = np.eye(n)
    return np.block([[I, I], [-1j * I, 1j * I]]) / np.sqrt(2)


def doubled(U, V) -> np.ndarray:
    """``[[U, V], [conj(V), conj(U)]]``."""
    U, V = np.atleast_2d(U), np.atleast_2d(V)
    return np.block([[U, V], [V.conj(), U.conj()]])


def random_doubled(rng, r: int, k: int) -> np.ndarray:
    U = rng.normal(size=(r, k)) + 1j * rng.normal(size=(r, k))
    V = rng.normal(size=(r, k)) + 1j * rng.normal(size=(r, k))
    return doubled(U, V)


def random_stable(rng, n: int, cplx: bool = False, margin: float = 0.1) -> np.ndarray:
    A = rng.normal(size=(n, n)) + (1j * rng.normal(size=(n, n)) if cplx else 0)
    shift = np.linalg.eigvals(A).real.max() + margin + rng.uniform(0, 1)
    return A - shift * np.eye(n)
