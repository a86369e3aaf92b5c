"""Dense linear matrix inequality programs in scalar decision variables.

Problems are stated with :class:`Affine` matrix expressions
``F(x) = F_0 + sum_i x_i F_i`` and handed to an interior-point SDP solver
(Clarabel through cvxpy). Solver output is never trusted on its own: every
returned assignment is re-evaluated and each constraint block is checked by a
direct eigenvalue computation.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .errors import InfeasibleError, SolverError

__all__ = [
    "Affine",
    "bmat",
    "LMIProblem",
    "LMIResult",
    "feasibility",
    "minimize_gain",
    "matrix_vars",
    "RECHECK_TOL",
]

log = logging.getLogger(__name__)

RECHECK_TOL = 1e-8
DEFAULT_MARGIN = 1e-7


class Affine:
    """Matrix-valued affine function of the problem's scalar variables.

    ``const`` is the constant block and ``coef`` maps a variable index to its
    coefficient block; all blocks share one shape.
    """

    __array_priority__ = 100
    __array_ufunc__ = None

    def __init__(self, const, coef: dict | None = None):
        const = np.asarray(const)
        if const.ndim == 0:
            const = const.reshape(1, 1)
        self.const = const
        self.coef = {} if coef is None else coef

    @property
    def shape(self):
        return self.const.shape

    @property
    def is_complex(self) -> bool:
        return np.iscomplexobj(self.const) or any(np.iscomplexobj(c) for c in self.coef.values())

    @staticmethod
    def lift(x) -> "Affine":
        return x if isinstance(x, Affine) else Affine(np.asarray(x))

    def _map(self, fn) -> "Affine":
        return Affine(fn(self.const), {k: fn(v) for k, v in self.coef.items()})

    def __add__(self, other):
        other = Affine.lift(other)
        if other.shape != self.shape:
            raise ValueError(f"shape mismatch in sum: {self.shape} vs {other.shape}")
        coef = dict(self.coef)
        for k, v in other.coef.items():
            coef[k] = coef[k] + v if k in coef else v
        return Affine(self.const + other.const, coef)

    __radd__ = __add__

    def __neg__(self):
        return self._map(lambda M: -M)

    def __sub__(self, other):
        return self + (-Affine.lift(other))

    def __rsub__(self, other):
        return Affine.lift(other) - self

    def __mul__(self, c):
        if isinstance(c, Affine):
            raise TypeError("product of two affine expressions is not affine")
        return self._map(lambda M: c * M)

    __rmul__ = __mul__

    def __matmul__(self, M):
        if isinstance(M, Affine):
            raise TypeError("product of two affine expressions is not affine")
        M = np.asarray(M)
        return self._map(lambda X: X @ M)

    def __rmatmul__(self, M):
        M = np.asarray(M)
        return self._map(lambda X: M @ X)

    @property
    def T(self):
        return self._map(lambda M: M.T)

    @property
    def H(self):
        return self._map(lambda M: M.conj().T)

    def sym(self) -> "Affine":
        """``X + X^H``."""
        return self + self.H

    def evaluate(self, x) -> np.ndarray:
        out = np.array(self.const, dtype=complex if self.is_complex else float)
        for k, v in self.coef.items():
            out = out + x[k] * v
        return out

    def __getitem__(self, idx):
        return self._map(lambda M: np.atleast_2d(M[idx]))


def bmat(blocks) -> Affine:
    """Block matrix of :class:`Affine` or constant blocks; ``None`` means a zero block."""
    rows = [[b for b in row] for row in blocks]
    heights = [next(np.shape(Affine.lift(b).const)[0] for b in row if b is not None) for row in rows]
    widths = [next(np.shape(Affine.lift(rows[i][j]).const)[1] for i in range(len(rows))
                   if rows[i][j] is not None) for j in range(len(rows[0]))]
    lifted = [[Affine.lift(b) if b is not None else Affine(np.zeros((h, w)))
               for b, w in zip(row, widths)] for row, h in zip(rows, heights)]
    keys = set()
    for row in lifted:
        for b in row:
            keys |= set(b.coef)
    is_complex = any(b.is_complex for row in lifted for b in row)
    dtype = complex if is_complex else float

    def assemble(get):
        return np.block([[np.asarray(get(b), dtype=dtype) for b in row] for row in lifted])

    const = assemble(lambda b: b.const)
    coef = {k: assemble(lambda b, k=k: b.coef.get(k, np.zeros(b.shape))) for k in sorted(keys)}
    return Affine(const, coef)


@dataclass
class _Constraint:
    expr: Affine
    strict: bool
    name: str


@dataclass
class LMIProblem:
    """Affine Hermitian matrix inequalities ``F(x) ⪯ 0`` (or ``≺ 0``) in scalar variables."""

    names: list = field(default_factory=list)
    constraints: list = field(default_factory=list)
    objective: dict = field(default_factory=dict)
    equalities: list = field(default_factory=list)
    bound: float | None = None

    @property
    def n_vars(self) -> int:
        return len(self.names)

    def scalar(self, name: str) -> Affine:
        """New real scalar variable as a 1x1 expression."""
        idx = len(self.names)
        self.names.append(name)
        return Affine(np.zeros((1, 1)), {idx: np.ones((1, 1))})

    def symmetric(self, name: str, n: int) -> Affine:
        """Real symmetric ``n x n`` variable, upper triangle parameterized."""
        coef = {}
        for i in range(n):
            for j in range(i, n):
                E = np.zeros((n, n))
                E[i, j] = E[j, i] = 1.0
                coef[len(self.names)] = E
                self.names.append(f"{name}[{i},{j}]")
        return Affine(np.zeros((n, n)), coef)

    def general(self, name: str, r: int, c: int) -> Affine:
        """Real unconstrained ``r x c`` variable."""
        coef = {}
        for i in range(r):
            for j in range(c):
                E = np.zeros((r, c))
                E[i, j] = 1.0
                coef[len(self.names)] = E
                self.names.append(f"{name}[{i},{j}]")
        return Affine(np.zeros((r, c)), coef)

    def hermitian(self, name: str, n: int) -> Affine:
        """Complex Hermitian ``n x n`` variable (real diagonal, complex upper triangle)."""
        coef = {}
        for i in range(n):
            for j in range(i, n):
                E = np.zeros((n, n), dtype=complex)
                E[i, j] = E[j, i] = 1.0
                coef[len(self.names)] = E
                self.names.append(f"{name}.re[{i},{j}]")
                if i != j:
                    E = np.zeros((n, n), dtype=complex)
                    E[i, j], E[j, i] = 1j, -1j
                    coef[len(self.names)] = E
                    self.names.append(f"{name}.im[{i},{j}]")
        return Affine(np.zeros((n, n), dtype=complex), coef)

    def add(self, expr: Affine, strict: bool = False, name: str = "") -> None:
        """Require ``expr ⪯ 0`` (``≺ 0`` if ``strict``)."""
        expr = Affine.lift(expr)
        if expr.shape[0] != expr.shape[1]:
            raise ValueError(f"constraint {name!r} is not square: {expr.shape}")
        for M in [expr.const, *expr.coef.values()]:
            if np.abs(M - M.conj().T).max(initial=0.0) > 1e-9 * max(1.0, np.abs(M).max(initial=0.0)):
                raise ValueError(f"constraint {name!r} has a non-Hermitian block")
        self.constraints.append(_Constraint(expr, strict, name or f"c{len(self.constraints)}"))

    def add_equality(self, expr: Affine, name: str = "") -> None:
        """Require ``expr = 0`` entrywise."""
        self.equalities.append(_Constraint(Affine.lift(expr), False, name or f"eq{len(self.equalities)}"))

    def minimize(self, expr: Affine) -> None:
        """Set a linear objective from a 1x1 real expression."""
        expr = Affine.lift(expr)
        self.objective = {k: float(np.real(v).ravel()[0]) for k, v in expr.coef.items()}

    def fixed(self, var: Affine, value: float) -> "LMIProblem":
        """Copy of the problem with a scalar variable pinned to ``value``."""
        out = LMIProblem(list(self.names), list(self.constraints), dict(self.objective),
                         list(self.equalities), self.bound)
        out.add_equality(var - value, name="fixed")
        return out


def matrix_vars(problem: LMIProblem, shapes: dict) -> dict:
    """Create matrix variables from ``{name: (kind, rows[, cols])}``.

    ``kind`` is ``"symmetric"``, ``"general"`` or ``"hermitian"``.
    """
    out = {}
    for name, spec in shapes.items():
        kind, dims = spec[0], spec[1:]
        if name in out:
            raise ValueError(f"duplicate variable {name!r}")
        if kind == "symmetric":
            out[name] = problem.symmetric(name, *dims)
        elif kind == "general":
            out[name] = problem.general(name, *dims)
        elif kind == "hermitian":
            out[name] = problem.hermitian(name, *dims)
        else:
            raise ValueError(f"unknown variable kind {kind!r}")
    return out


@dataclass
class LMIResult:
    """Outcome of an LMI solve.

    ``status`` is ``"feasible"``, ``"infeasible"`` or ``"stalled"`` (solver
    gave up, or its point failed the independent recheck). ``slack`` holds the
    largest eigenvalue of each constraint block at ``x``.
    """

    status: str
    x: np.ndarray | None
    names: list
    slack: dict = field(default_factory=dict)
    objective: float | None = None
    note: str = ""

    @property
    def feasible(self) -> bool:
        return self.status == "feasible"

    def value(self, expr: Affine) -> np.ndarray:
        if self.x is None:
            raise InfeasibleError("no assignment available")
        out = expr.evaluate(self.x)
        return out.real if not np.iscomplexobj(expr.const) and not expr.is_complex else out


def _real_embed(M: np.ndarray) -> np.ndarray:
    if not np.iscomplexobj(M):
        return np.asarray(M, dtype=float)
    return np.block([[M.real, -M.imag], [M.imag, M.real]])


def _scale(expr: Affine) -> float:
    return max([1.0, np.abs(expr.const).max(initial=0.0)]
               + [np.abs(v).max(initial=0.0) for v in expr.coef.values()])


def recheck(problem: LMIProblem, x, margin: float = 0.0, tol: float = RECHECK_TOL):
    """Largest eigenvalue of every constraint at ``x`` and whether all are acceptable."""
    slack, ok = {}, True
    for c in problem.constraints:
        F = c.expr.evaluate(x)
        F = 0.5 * (F + F.conj().T)
        lam = float(np.linalg.eigvalsh(F).max()) if F.size else -np.inf
        slack[c.name] = lam
        scale = _scale(c.expr) * max(1.0, np.abs(x).max(initial=0.0))
        if lam > tol * scale:
            ok = False
    for e in problem.equalities:
        r = np.abs(e.expr.evaluate(x)).max(initial=0.0)
        slack[e.name] = float(r)
        if r > tol * _scale(e.expr) * max(1.0, np.abs(x).max(initial=0.0)):
            ok = False
    return slack, ok


def _solve(problem: LMIProblem, margin: float):
    import cvxpy as cp

    n = problem.n_vars
    x = cp.Variable(n) if n else None
    cons = []
    for c in problem.constraints:
        F0 = _real_embed(c.expr.const)
        d = F0.shape[0]
        if d == 0:
            continue
        if n == 0 or not c.expr.coef:
            continue  # constant block, handled by the recheck
        cols = np.zeros((d * d, n))
        for k, v in c.expr.coef.items():
            cols[:, k] = _real_embed(v).ravel(order="F")
        E = cp.reshape(F0.ravel(order="F") + cols @ x, (d, d), order="F")
        E = 0.5 * (E + E.T)
        shift = margin if c.strict else 0.0
        cons.append(E << -shift * np.eye(d))
    for e in problem.equalities:
        F0 = e.expr.const
        rows = []
        for part in (np.real, np.imag) if e.expr.is_complex else (np.real,):
            cols = np.zeros((F0.size, n))
            for k, v in e.expr.coef.items():
                cols[:, k] = part(v).ravel()
            rows.append((cols, part(F0).ravel()))
        for cols, b in rows:
            cons.append(cols @ x + b == 0)
    if problem.bound is not None and n:
        cons.append(cp.norm(x, "inf") <= problem.bound)
    if problem.objective and n:
        c = np.zeros(n)
        for k, v in problem.objective.items():
            c[k] = v
        obj = cp.Minimize(c @ x)
    else:
        obj = cp.Minimize(0)
    prob = cp.Problem(obj, cons)
    with warnings.catch_warnings():
        # inaccurate solutions are caught by the eigenvalue recheck
        warnings.simplefilter("ignore", UserWarning)
        try:
            prob.solve(solver=cp.CLARABEL)
        except cp.error.SolverError as exc:  # numerical breakdown inside the solver
            log.debug("Clarabel failed (%s); retrying with SCS", exc)
            try:
                prob.solve(solver=cp.SCS, eps=1e-9, max_iters=200000)
            except cp.error.SolverError as exc2:
                raise SolverError(str(exc2)) from exc2
    return prob.status, (None if x is None or x.value is None else np.asarray(x.value, dtype=float))


def feasibility(problem: LMIProblem, margin: float = DEFAULT_MARGIN) -> LMIResult:
    """Solve the program; strict constraints are imposed as ``F(x) ⪯ -margin I``.

    An objective set on ``problem`` is minimized over the feasible set.
    """
    n = problem.n_vars
    if n == 0:
        x = np.zeros(0)
        slack, ok = recheck(problem, x, margin)
        return LMIResult("feasible" if ok else "infeasible", x if ok else None, problem.names, slack)
    status, x = _solve(problem, margin)
    if status in ("infeasible", "infeasible_inaccurate"):
        return LMIResult("infeasible", None, problem.names, note=f"solver status {status}")
    if x is None:
        return LMIResult("stalled", None, problem.names, note=f"solver status {status}")
    slack, ok = recheck(problem, x, margin)
    obj = sum(v * x[k] for k, v in problem.objective.items()) if problem.objective else None
    if not ok:
        return LMIResult("stalled", x, problem.names, slack, obj,
                         note=f"solver status {status}; point failed eigenvalue recheck")
    return LMIResult("feasible", x, problem.names, slack, obj, note=f"solver status {status}")


def minimize_gain(problem: LMIProblem, gain: Affine, margin: float = DEFAULT_MARGIN,
                  tol: float = 1e-4, bracket: float = 2e-3) -> tuple[float, LMIResult]:
    """Smallest certifiable ``gain`` and a feasible assignment attaining it.

    A direct SDP minimization gives a starting estimate; bisection on pinned
    values of ``gain`` then locates, to ``tol``, the smallest value whose
    solution passes the eigenvalue recheck.
    """
    if len(gain.coef) != 1:
        raise ValueError("gain must be a single scalar variable")
    direct = LMIProblem(list(problem.names), list(problem.constraints), {},
                        list(problem.equalities), problem.bound)
    direct.minimize(gain)
    res = feasibility(direct, margin)
    if res.status == "infeasible":
        raise InfeasibleError("no feasible gain")
    if res.x is None:
        raise SolverError(f"gain minimization stalled: {res.note}")
    g0 = float(res.value(gain).ravel()[0])

    def attempt(g):
        return feasibility(problem.fixed(gain, g), margin)

    hi, best = None, None
    step = max(bracket, 1e-3 * abs(g0))
    g = g0
    for _ in range(40):
        r = attempt(g)
        if r.feasible:
            hi, best = g, r
            break
        g = g + step
        step *= 2
    if hi is None:
        raise SolverError("could not certify any gain above the solver minimum")
    lo = hi - max(bracket, 1e-3 * abs(hi))
    r = attempt(lo)
    for _ in range(40):
        if not r.feasible:
            break
        hi, best = lo, r
        lo = lo - max(bracket, 1e-3 * abs(lo))
        r = attempt(lo)
    else:
        raise SolverError("gain appears unbounded below")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        r = attempt(mid)
        if r.feasible:
            hi, best = mid, r
        else:
            lo = mid
    return hi, best
