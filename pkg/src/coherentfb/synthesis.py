"""Coherent H-infinity and LQG controller synthesis with direct coupling.

The H-infinity procedure works on quadrature-form plants and full-order
controllers. Step 1 solves the change-of-variables LMIs for the controller with
no direct coupling; step 2 freezes the controller and the Lyapunov certificate
and solves for the coupling block ``B_12``; step 3 freezes the coupling and
re-solves for the controller. Steps 2 and 3 alternate until the closed-loop
norm stops improving. Every accepted step is validated by an independent
closed-loop norm computation.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .algebra import symplectic
from .analysis import hinf_norm, is_hurwitz, lqg_cost, lqg_cost_batch
from .errors import InfeasibleError, RealizabilityError, SolverError
from .interconnect import close_loop, direct_couple
from .lmi import LMIProblem, bmat, feasibility, matrix_vars, minimize_gain
from .model import Controller, GeneralModel, PlantModel
from .optimize import UNSTABLE_PENALTY, grid_search, nelder_mead
from .realizability import check_controller, complete_controller

__all__ = [
    "SynthesisState",
    "closed_loop_norm",
    "hinf_lmi",
    "recover_controller",
    "recover_coupling",
    "state_from_controller",
    "hinf_step1",
    "hinf_step2",
    "hinf_step3",
    "synthesize_hinf",
    "finalize",
    "LQGResult",
    "lqg_synthesize",
    "direct_coupling_search",
    "ILL_CONDITIONED",
]

log = logging.getLogger(__name__)

ILL_CONDITIONED = 1e6
BACKOFF = 1e-2
RECERTIFY_SLACK = 1e-3


@dataclass
class SynthesisState:
    """Variables of the multi-step H-infinity procedure.

    ``g`` is the attenuation certified by the last LMI solve and ``norm`` the
    closed-loop H-infinity norm recomputed from the recovered controller.
    ``B_21`` always equals ``Theta B_12^T Theta``.
    """

    plant: PlantModel
    step: int
    X: np.ndarray
    Y: np.ndarray
    A_hat: np.ndarray
    B_hat: np.ndarray
    C_hat: np.ndarray
    M: np.ndarray
    N: np.ndarray
    B_12: np.ndarray
    g: float
    controller: Controller
    norm: float
    ill_conditioned: bool = False
    history: list = field(default_factory=list)
    notes: list = field(default_factory=list)

    @property
    def B_21(self) -> np.ndarray:
        return self.controller.B_21

    def log(self, label: str) -> None:
        self.history.append((self.step, label, self.g, self.norm))


def _theta(k: int) -> np.ndarray:
    return symplectic(k // 2)


def _check_plant(plant: PlantModel) -> PlantModel:
    if plant.representation != "quadrature":
        plant = plant.to("quadrature")
    if plant.B_u.shape[1] == 0 or plant.C.shape[0] == 0:
        raise ValueError("plant needs control inputs and measurements for synthesis")
    return plant


def closed_loop_norm(plant: PlantModel, K: Controller) -> float:
    """H-infinity norm of ``w -> z`` for the plant-controller loop (``inf`` if unstable)."""
    cl = close_loop(plant, K)
    return hinf_norm(cl.A, cl.B, cl.C, cl.D)


def hinf_lmi(plant: PlantModel, X, Y, A_hat, B_hat, C_hat, B_12, M, N, g):
    """Transformed bounded-real LMI blocks for the loop with direct coupling.

    Arguments may be constant arrays or LMI expressions as long as every
    product has at most one non-constant factor. Returns ``(L, L2)`` where
    ``L ≺ 0`` is the attenuation condition and ``-L2 ≺ 0`` with
    ``L2 = [[X, I], [I, Y]]`` keeps the Lyapunov matrix positive.
    """
    A, B_u, B_f, C, D_f = plant.A, plant.B_u, plant.B_f, plant.C, plant.D_f
    C_p, D_u, D = plant.C_p, plant.D_u, plant.D_pf
    n = A.shape[0]
    nw, nz = B_f.shape[1], C_p.shape[0]
    B_21 = _theta(n) @ B_12.T @ _theta(n)
    B12M = B_12 @ M.T
    NB21 = N @ B_21
    L11 = A @ X + X @ A.T + B_u @ C_hat + (B_u @ C_hat).T + B12M + B12M.T
    L21 = A_hat + A.T + NB21 @ X + Y @ B12M
    L22 = A.T @ Y + Y @ A + B_hat @ C + (B_hat @ C).T + NB21 + NB21.T
    L32 = (Y @ B_f + B_hat @ D_f).T
    L41 = C_p @ X + D_u @ C_hat
    gw = g * np.eye(nw)
    gz = g * np.eye(nz)
    L = bmat([
        [L11, L21.T, B_f, L41.T],
        [L21, L22, L32.T, C_p.T],
        [B_f.T, L32, -gw, D.T],
        [L41, C_p, D, -gz],
    ])
    L2 = bmat([[X, np.eye(n)], [np.eye(n), Y]])
    return L, L2


def recover_controller(X, Y, A_hat, B_hat, C_hat, M, N, plant: PlantModel):
    """Controller matrices from the transformed variables.

    ``B_K = N^-1 B_hat``, ``C_K = C_hat M^-T`` and
    ``A_K = N^-1 (A_hat - N B_K C X - Y (B_u C_K M^T + A X)) M^-T``.
    """
    A, B_u, C = plant.A, plant.B_u, plant.C
    try:
        Ni = np.linalg.inv(N)
        MiT = np.linalg.inv(M).T
    except np.linalg.LinAlgError as exc:
        raise ValueError("M and N must be invertible") from exc
    B_K = Ni @ B_hat
    C_K = C_hat @ MiT
    A_K = Ni @ (A_hat - N @ B_K @ C @ X - Y @ (B_u @ C_K @ M.T + A @ X)) @ MiT
    return A_K, B_K, C_K


def lyapunov_from_variables(X, Y, M, N) -> tuple[np.ndarray, np.ndarray]:
    """``(P, Pi_1)`` with ``P Pi_1 = Pi_2`` for ``Pi_1 = [[X, I], [M^T, 0]]``, ``Pi_2 = [[I, Y], [0, N^T]]``."""
    n = X.shape[0]
    Z = np.zeros((n, n))
    Pi1 = np.block([[X, np.eye(n)], [M.T, Z]])
    Pi2 = np.block([[np.eye(n), Y], [Z, N.T]])
    return Pi2 @ np.linalg.inv(Pi1), Pi1


def recover_coupling(Omega, Pi1, P) -> np.ndarray:
    """Closed-loop-coordinate matrix ``P^-1 Pi_1^-T Omega Pi_1^-1`` from its transformed form."""
    Pi1i = np.linalg.inv(Pi1)
    return np.linalg.solve(P, Pi1i.T @ Omega @ Pi1i)


def state_from_controller(plant: PlantModel, K: Controller, margin: float = 1e-7,
                          slack: float = 1e-2) -> SynthesisState:
    """Synthesis state equivalent to a given controller, for starting at step 2.

    Solves the bounded-real LMI of the closed loop at ``(1 + slack)`` times its
    norm for ``P``, takes ``Y, N`` from ``P`` and ``X, M`` from ``P^-1`` (so
    that ``X Y + M N^T = I``), and forms the transformed variables.
    """
    plant = _check_plant(plant)
    K = K.to("quadrature")
    cl = close_loop(plant, K)
    norm = hinf_norm(cl.A, cl.B, cl.C, cl.D)
    if not np.isfinite(norm):
        raise InfeasibleError("controller does not stabilize the plant")
    g = norm * (1 + slack)
    n2 = cl.A.shape[0]
    prob = LMIProblem()
    P = prob.symmetric("P", n2)
    nw, nz = cl.B.shape[1], cl.C.shape[0]
    prob.add(-P, strict=True, name="P>0")
    prob.add(bmat([[cl.A.T @ P + P @ cl.A, P @ cl.B, cl.C.T],
                   [cl.B.T @ P, -g * np.eye(nw), cl.D.T],
                   [cl.C, cl.D, -g * np.eye(nz)]]), strict=True, name="BRL")
    res = feasibility(prob, margin)
    if not res.feasible:
        raise SolverError(f"bounded-real certificate not found: {res.note}")
    Pv = res.value(P)
    n = plant.A.shape[0]
    Pi = np.linalg.inv(Pv)
    Y, N, X, M = Pv[:n, :n], Pv[:n, n:], Pi[:n, :n], Pi[:n, n:]
    A, B_u, C = plant.A, plant.B_u, plant.C
    A_hat = N @ (K.A_K @ M.T + K.B_K @ C @ X) + Y @ (B_u @ K.C_K @ M.T + A @ X)
    st = SynthesisState(plant, 1, X, Y, A_hat, N @ K.B_K, K.C_K @ M.T, M, N,
                        np.array(K.B_12, dtype=float), g, K, norm, _max_entry(K) > ILL_CONDITIONED)
    st.log("given")
    return st


def _recertify(st: SynthesisState, margin: float) -> SynthesisState:
    for slack in (RECERTIFY_SLACK, 10 * RECERTIFY_SLACK):
        try:
            fresh = state_from_controller(st.plant, st.controller, margin, slack)
        except SolverError:
            continue
        note = f"step {st.step}: LMI bound {st.g:.6g} re-certified as {fresh.g:.6g}"
        return replace(fresh, step=st.step, history=list(st.history), notes=list(st.notes) + [note])
    raise SolverError(f"no bounded-real certificate for the step-{st.step} controller")


def _max_entry(K: Controller) -> float:
    return max(np.abs(M).max(initial=0.0) for M in (K.A_K, K.B_K, K.C_K))


def _solve_controller_lmi(plant, B_12, M, N, g=None, margin=1e-7, backoff=BACKOFF):
    """Solve for ``(X, Y, A_hat, B_hat, C_hat)``; ``g=None`` minimizes the attenuation.

    Returns a list of candidate solutions ``(g, values)``: the tightest one and,
    when minimizing, one backed off by ``backoff`` which is usually better
    conditioned for recovery.
    """
    n = plant.A.shape[0]
    nu, ny = plant.B_u.shape[1], plant.C.shape[0]
    prob = LMIProblem()
    v = matrix_vars(prob, {"X": ("symmetric", n), "Y": ("symmetric", n),
                           "A_hat": ("general", n, n), "B_hat": ("general", n, ny),
                           "C_hat": ("general", nu, n)})
    gv = prob.scalar("g")
    L, L2 = hinf_lmi(plant, v["X"], v["Y"], v["A_hat"], v["B_hat"], v["C_hat"], B_12, M, N, gv)
    prob.add(L, strict=True, name="attenuation")
    prob.add(-L2, strict=True, name="coupling")
    names = ("X", "Y", "A_hat", "B_hat", "C_hat")
    out = []
    if g is not None:
        res = feasibility(prob.fixed(gv, g), margin)
        if res.status == "stalled":
            raise SolverError(f"controller LMI stalled at g={g}: {res.note}")
        if not res.feasible:
            raise InfeasibleError(f"controller LMI infeasible at g={g}")
        return [(float(g), {k: res.value(v[k]) for k in names})]
    g_star, res = minimize_gain(prob, gv, margin)
    out.append((g_star, {k: res.value(v[k]) for k in names}))
    if backoff:
        g_b = g_star * (1 + backoff)
        r2 = feasibility(prob.fixed(gv, g_b), margin)
        if r2.feasible:
            out.append((g_b, {k: r2.value(v[k]) for k in names}))
    return out


def _build_state(plant, step, g, vals, M, N, B_12, history=(), notes=()):
    A_K, B_K, C_K = recover_controller(vals["X"], vals["Y"], vals["A_hat"], vals["B_hat"],
                                       vals["C_hat"], M, N, plant)
    K = Controller(A_K, B_K, C_K, representation="quadrature",
                   n_plant=plant.A.shape[0]).with_coupling(B_12)
    norm = closed_loop_norm(plant, K)
    st = SynthesisState(plant, step, vals["X"], vals["Y"], vals["A_hat"], vals["B_hat"],
                        vals["C_hat"], M, N, np.asarray(B_12, dtype=float), float(g), K, norm,
                        _max_entry(K) > ILL_CONDITIONED, list(history), list(notes))
    return st


def _pick(states):
    """Best candidate: well-conditioned first, then the smallest verified norm."""
    return min(states, key=lambda s: (s.ill_conditioned, s.norm))


def hinf_step1(plant: PlantModel, g: float | None = None, margin: float = 1e-7,
               backoff: float = BACKOFF) -> SynthesisState:
    """Indirect controller by the change-of-variables LMIs with ``B_12 = 0``.

    With ``g`` given, solves the feasibility problem at that attenuation;
    otherwise minimizes it. ``M = I - XY``, ``N = I`` so that ``M N^T = I - XY``.
    """
    plant = _check_plant(plant)
    n = plant.A.shape[0]
    Z, I = np.zeros((n, n)), np.eye(n)
    cands = []
    for gg, vals in _solve_controller_lmi(plant, Z, I, I, g, margin, backoff):
        M = I - vals["X"] @ vals["Y"]
        try:
            cands.append(_build_state(plant, 1, gg, vals, M, I, Z))
        except ValueError as exc:
            log.debug("step-1 recovery failed: %s", exc)
    if not cands:
        raise SolverError("step 1: controller recovery failed (I - XY singular)")
    st = _pick(cands)
    if st.ill_conditioned:
        st.notes.append(f"step 1: recovered controller has entries up to {_max_entry(st.controller):.3g}")
    st.log("step1")
    return st


def hinf_step2(state: SynthesisState, margin: float = 1e-7) -> SynthesisState:
    """Coupling block ``B_12`` with every other variable frozen.

    The LMI is affine in ``(B_12, g)``. The new coupling is kept only if the
    independently computed closed-loop norm does not get worse.
    """
    plant = state.plant
    n = plant.A.shape[0]
    nk = state.controller.A_K.shape[0]
    if nk == 0:
        return state
    prob = LMIProblem()
    B12 = prob.general("B_12", n, nk)
    gv = prob.scalar("g")
    L, L2 = hinf_lmi(plant, state.X, state.Y, state.A_hat, state.B_hat, state.C_hat,
                     B12, state.M, state.N, gv)
    prob.add(L, strict=True, name="attenuation")
    try:
        g_star, res = minimize_gain(prob, gv, margin)
    except (InfeasibleError, SolverError) as exc:
        out = replace(state, step=2, history=list(state.history), notes=state.notes + [f"step 2: {exc}"])
        out.log("step2-failed")
        return out
    B_12 = res.value(B12)
    K = state.controller.with_coupling(B_12)
    norm = closed_loop_norm(plant, K)
    if norm <= state.norm * (1 + 1e-9):
        out = replace(state, step=2, B_12=B_12, g=g_star, controller=K, norm=norm,
                      history=list(state.history), notes=list(state.notes))
        out.log("step2")
    else:
        out = replace(state, step=2, history=list(state.history),
                      notes=state.notes + [f"step 2: coupling rejected (norm {norm:.6g} > {state.norm:.6g})"])
        out.log("step2-kept")
    return out


def hinf_step3(state: SynthesisState, mn_choices=("current", "identity"), margin: float = 1e-7,
               backoff: float = BACKOFF) -> SynthesisState:
    """Re-solve for the controller with ``B_12`` and ``(M, N)`` fixed.

    ``mn_choices`` lists the ``(M, N)`` pairs to try: ``"current"`` keeps the
    pair from the previous step, ``"identity"`` uses ``M = N = I``. The best
    well-conditioned candidate is accepted if its verified norm improves.
    """
    plant = state.plant
    n = plant.A.shape[0]
    I = np.eye(n)
    cands, notes = [], []
    for choice in mn_choices:
        M, N = (state.M, state.N) if choice == "current" else (I, I)
        try:
            sols = _solve_controller_lmi(plant, state.B_12, M, N, None, margin, backoff)
        except (InfeasibleError, SolverError) as exc:
            notes.append(f"step 3 ({choice}): {exc}")
            continue
        for gg, vals in sols:
            try:
                st = _build_state(plant, 3, gg, vals, M, N, state.B_12, state.history, state.notes)
            except ValueError as exc:
                notes.append(f"step 3 ({choice}): {exc}")
                continue
            if st.ill_conditioned:
                notes.append(f"step 3 ({choice}): ill-conditioned controller "
                             f"(entries up to {_max_entry(st.controller):.3g}, norm {st.norm:.6g})")
            cands.append(st)
    if cands:
        best = _pick(cands)
        if not best.ill_conditioned and best.norm < state.norm * (1 - 1e-12):
            # With (M, N) frozen, M N^T = I - X Y no longer holds for the new
            # X, Y, so the LMI bound does not certify the recovered controller.
            # Re-derive consistent variables and a bound from the closed loop.
            out = _recertify(best, margin)
            out.notes.extend(notes)
            out.log("step3")
            return out
        notes.append("step 3: no candidate improved the verified norm")
    out = replace(state, step=3, history=list(state.history), notes=state.notes + notes)
    out.log("step3-kept")
    return out


def synthesize_hinf(plant: PlantModel, g: float | None = None, max_rounds: int = 10,
                    tol: float = 1e-4, mn_choices=("current", "identity"),
                    margin: float = 1e-7) -> SynthesisState:
    """Run step 1 and then alternate steps 2 and 3.

    Stops when the relative improvement of the verified norm in a round is
    below ``tol`` or after ``max_rounds`` rounds.
    """
    st = hinf_step1(plant, g, margin)
    for _ in range(max_rounds):
        before = st.norm
        st = hinf_step2(st, margin)
        st = hinf_step3(st, mn_choices, margin)
        if not np.isfinite(before) or before - st.norm < tol * before:
            break
    return st


def finalize(K: Controller, tol: float = 1e-8) -> Controller:
    """Add realizable noise channels to a quadrature controller.

    ``A_K``, ``B_K``, ``C_K`` and the coupling are kept; ``B_K1``, ``B_K2`` and
    ``B_K0`` come from :func:`~coherentfb.realizability.complete_controller`.
    """
    Kq = K.to("quadrature")
    B_K1, B_K2, B_K0 = complete_controller(Kq.A_K, Kq.B_K, Kq.C_K)
    out = replace(Kq, B_K1=B_K1, B_K2=B_K2, B_K0=B_K0)
    rep = check_controller(out, tol)
    if not rep.verdict:
        raise RealizabilityError(f"completion failed the realizability check: {rep.relative()}")
    return out


@dataclass
class LQGResult:
    """Outcome of an LQG coupling search.

    ``x`` holds the coupling parameters, ``cost`` the verified LQG cost and
    ``grid_cost`` the best value found on the grid before refinement.
    """

    x: np.ndarray
    cost: float
    grid_cost: float
    controller: Controller | None = None
    completed: bool = False
    notes: list = field(default_factory=list)


def _coupling_basis(n: int, nk: int) -> list:
    basis = []
    for i in range(n):
        for j in range(nk):
            E = np.zeros((n, nk))
            E[i, j] = 1.0
            basis.append(E)
    return basis


def _search(batch_cost, point_cost, box, steps, refine: bool):
    grid = grid_search(batch_cost, box, steps, vectorized=True)
    x, cost = grid.x, grid.fun
    if cost >= UNSTABLE_PENALTY:
        raise InfeasibleError("no stabilizing coupling found in the search box")
    # a box of single points pins the coupling, so there is nothing to refine
    if refine and any(float(hi) > float(lo) for lo, hi in box):
        r = nelder_mead(point_cost, x)
        if r.fun < cost:
            x, cost = r.x, r.fun
    return x, cost, grid.fun


def lqg_synthesize(plant: PlantModel, indirect: Controller, box, steps, noise_weight: float = 0.5,
                   refine: bool = True, realizability_tol: float = 1e-3) -> LQGResult:
    """Direct-coupling block ``B_12`` minimizing the closed-loop LQG cost.

    The entries of ``B_12`` (row-major) are searched on the grid given by
    ``box`` (one interval per entry, or a single interval shared by all) and
    ``steps`` and then refined by Nelder-Mead; unstable points are
    penalized. The indirect controller's noise channels are kept when they pass
    the realizability check at ``realizability_tol`` (relative); otherwise the
    controller is completed, which can change the cost.
    """
    plant = plant.to("quadrature")
    K0 = indirect.to("quadrature")
    n, nk = plant.A.shape[0], K0.A_K.shape[0]
    notes = []
    rep = check_controller(K0.with_coupling(np.zeros((n, nk))), realizability_tol)
    completed = False
    if not rep.verdict:
        K0 = finalize(K0)
        completed = True
        notes.append(f"indirect controller completed (residuals {rep.relative()})")
    basis = _coupling_basis(n, nk)
    box = list(box)
    if len(box) == 2 and np.isscalar(box[0]):
        box = [tuple(box)]
    if len(box) == 1:
        box = box * len(basis)
    if len(box) != len(basis):
        raise ValueError(f"box needs {len(basis)} intervals, one per entry of B_12")
    base = close_loop(plant, K0.with_coupling(np.zeros((n, nk))))
    Th_n, Th_k = _theta(n), _theta(nk)
    dirs = []
    for E in basis:
        D = np.zeros_like(base.A)
        D[:n, n:] = E
        D[n:, :n] = Th_k @ E.T @ Th_n
        dirs.append(D)
    dirs = np.array(dirs)

    def batch(X):
        A = base.A[None] + np.einsum("pk,kij->pij", X, dirs)
        return lqg_cost_batch(A, base.G, base.C, noise_weight)

    def point(x):
        return float(batch(np.atleast_2d(x))[0])

    x, cost, grid_cost = _search(batch, point, box, steps, refine)
    B_12 = sum(xi * E for xi, E in zip(x, basis))
    K = K0.with_coupling(B_12)
    cl = close_loop(plant, K)
    verified = lqg_cost(cl.A, cl.G, cl.C, noise_weight)
    return LQGResult(np.asarray(x), verified, grid_cost, K, completed, notes)


def direct_coupling_search(G1: GeneralModel, G2: GeneralModel, C_p, box, steps,
                           noise_weight: float = 0.5, refine: bool = False) -> LQGResult:
    """LQG cost of ``G1 ⋈ G2`` minimized over real scalar couplings ``(K_-, K_+)``.

    Both systems are single-mode; ``C_p`` picks the performance variable from
    the composite doubled-up state and the noise enters through ``G1``'s field.
    """
    n1, n2 = G1.n, G2.n
    if n1 != 1 or n2 != 1:
        raise ValueError("direct_coupling_search handles single-mode systems")
    C_p = np.atleast_2d(np.asarray(C_p, dtype=complex))
    S0 = direct_couple(G1, G2, 0.0, 0.0)
    Sm = direct_couple(G1, G2, 1.0, 0.0)
    Sp = direct_couple(G1, G2, 0.0, 1.0)
    Dm, Dp = Sm.A - S0.A, Sp.A - S0.A
    noise = S0.B_f

    def batch(X):
        A = S0.A[None] + X[:, 0, None, None] * Dm[None] + X[:, 1, None, None] * Dp[None]
        return lqg_cost_batch(A, noise, C_p, noise_weight)

    def point(x):
        return float(batch(np.atleast_2d(x))[0])

    x, cost, grid_cost = _search(batch, point, box, steps, refine)
    S = direct_couple(G1, G2, x[0], x[1])
    verified = lqg_cost(S.A, noise, C_p, noise_weight) if is_hurwitz(S.A) else float("inf")
    return LQGResult(np.asarray(x), verified, grid_cost)
