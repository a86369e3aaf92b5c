"""System matrices from physical parameters, plant and controller containers.

A general open oscillator system is specified by its Hamiltonian parameters
``Omega_-`` (Hermitian) and ``Omega_+`` (symmetric), field couplings ``C_-, C_+``
and direct couplings ``K_-, K_+``. Its annihilation-form system matrices are

    A   = -Delta(i Omega_-, i Omega_+) - Delta(Gamma_-, Gamma_+)
    B_d = -Delta(K_-, K_+)^flat
    B_f = -Delta(C_-, C_+)^flat,   C_f = Delta(C_-, C_+)
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace
from typing import Literal

import numpy as np

from .algebra import delta, flat, from_quadrature, symplectic, to_quadrature

__all__ = [
    "Representation",
    "GeneralModel",
    "SystemMatrices",
    "FieldChannel",
    "PlantModel",
    "Controller",
    "gamma",
    "build",
    "natural_Q",
    "parameters_from_matrices",
    "coupling_blocks",
    "convert_matrix",
]

Representation = Literal["annihilation", "quadrature"]
_SYM_TOL = 1e-10


def _mat(M, rows=None, cols=None, dtype=complex) -> np.ndarray:
    if M is None:
        if rows is None or cols is None:
            raise ValueError("missing matrix with unknown shape")
        return np.zeros((rows, cols), dtype=dtype)
    M = np.asarray(M, dtype=dtype)
    if M.ndim == 0:
        M = M.reshape(1, 1)
    if M.ndim == 1:
        M = M.reshape(1, -1) if cols is None or M.size == cols else M.reshape(-1, 1)
    return M


def _frozen(*arrays):
    for a in arrays:
        a.setflags(write=False)


def gamma(c_minus, c_plus) -> tuple[np.ndarray, np.ndarray]:
    """Field-induced damping blocks ``Gamma_-`` and ``Gamma_+``.

    ``Gamma_-+ = (C_-^dagger C_-+ - C_+^T C_+-^#) / 2``.
    """
    Cm = _mat(c_minus)
    Cp = _mat(c_plus)
    if Cm.shape != Cp.shape:
        raise ValueError(f"c_minus {Cm.shape} and c_plus {Cp.shape} differ in shape")
    g_minus = 0.5 * (Cm.conj().T @ Cm - Cp.T @ Cp.conj())
    g_plus = 0.5 * (Cm.conj().T @ Cp - Cp.T @ Cm.conj())
    return g_minus, g_plus


@dataclass(frozen=True, eq=False)
class GeneralModel:
    """Physical parameters of an open oscillator system with external couplings.

    ``c_p``, ``d_pd`` and ``d_pf`` define the performance variable
    ``z = C_p a + D_pd v + D_pf w`` directly in doubled-up coordinates; they are
    free matrices and only checked for shape.
    """

    omega_minus: np.ndarray
    omega_plus: np.ndarray | None = None
    c_minus: np.ndarray | None = None
    c_plus: np.ndarray | None = None
    k_minus: np.ndarray | None = None
    k_plus: np.ndarray | None = None
    c_p: np.ndarray | None = None
    d_pd: np.ndarray | None = None
    d_pf: np.ndarray | None = None

    def __post_init__(self):
        Om = _mat(self.omega_minus)
        n = Om.shape[0]
        if Om.shape != (n, n):
            raise ValueError(f"omega_minus must be square, got {Om.shape}")
        Op = _mat(self.omega_plus, n, n)
        Cm = _mat(self.c_minus, 0, n) if self.c_minus is not None or self.c_plus is None \
            else np.zeros_like(_mat(self.c_plus))
        Cp = _mat(self.c_plus, *Cm.shape)
        Km = _mat(self.k_minus, 0, n) if self.k_minus is not None or self.k_plus is None \
            else np.zeros_like(_mat(self.k_plus))
        Kp = _mat(self.k_plus, *Km.shape)
        for name, M in (("c_minus", Cm), ("c_plus", Cp), ("k_minus", Km), ("k_plus", Kp)):
            if M.shape[1] != n:
                raise ValueError(f"{name} needs {n} columns, got shape {M.shape}")
        if Cm.shape != Cp.shape or Km.shape != Kp.shape:
            raise ValueError("minus/plus coupling matrices differ in shape")
        if Op.shape != (n, n):
            raise ValueError(f"omega_plus must be {n}x{n}, got {Op.shape}")
        scale = max(1.0, np.abs(Om).max(initial=0), np.abs(Op).max(initial=0))
        if np.abs(Om - Om.conj().T).max(initial=0) > _SYM_TOL * scale:
            raise ValueError("omega_minus must be Hermitian")
        if np.abs(Op - Op.T).max(initial=0) > _SYM_TOL * scale:
            raise ValueError("omega_plus must be symmetric")
        m, nd = Cm.shape[0], Km.shape[0]
        Cperf = _mat(self.c_p, 0, 2 * n)
        p2 = Cperf.shape[0]
        Dpd = _mat(self.d_pd, p2, 2 * nd)
        Dpf = _mat(self.d_pf, p2, 2 * m)
        if Cperf.shape[1] != 2 * n or Dpd.shape != (p2, 2 * nd) or Dpf.shape != (p2, 2 * m):
            raise ValueError("performance matrices have inconsistent shapes")
        for name, M in (("omega_minus", Om), ("omega_plus", Op), ("c_minus", Cm),
                        ("c_plus", Cp), ("k_minus", Km), ("k_plus", Kp),
                        ("c_p", Cperf), ("d_pd", Dpd), ("d_pf", Dpf)):
            object.__setattr__(self, name, M)
            M.setflags(write=False)

    @property
    def n(self) -> int:
        return self.omega_minus.shape[0]

    @property
    def m(self) -> int:
        """Number of field channels."""
        return self.c_minus.shape[0]

    @property
    def n_d(self) -> int:
        """Number of directly coupled external modes."""
        return self.k_minus.shape[0]

    def with_performance(self, c_p, d_pd=None, d_pf=None) -> "GeneralModel":
        return replace(self, c_p=c_p, d_pd=d_pd, d_pf=d_pf)


@dataclass(frozen=True, eq=False)
class SystemMatrices:
    """Matrices ``(A, B_d, B_f, C_f)`` of a general model, annihilation form by default."""

    A: np.ndarray
    B_d: np.ndarray
    B_f: np.ndarray
    C_f: np.ndarray
    representation: Representation = "annihilation"

    def __post_init__(self):
        _frozen(self.A, self.B_d, self.B_f, self.C_f)

    def to(self, target: Representation) -> "SystemMatrices":
        if target == self.representation:
            return self
        conv = lambda M: convert_matrix(M, target, self.representation)
        return SystemMatrices(conv(self.A), conv(self.B_d), conv(self.B_f), conv(self.C_f), target)

    @property
    def input_matrix(self) -> np.ndarray:
        """``B = [B_d B_f]`` with columns permuted to the doubled order ``[v; w; v#; w#]``."""
        return stack_inputs(self.B_d, self.B_f)


def stack_inputs(B_d, B_f) -> np.ndarray:
    """Stack direct and field input matrices into the doubled ordering ``(v, w)``."""
    B_d = np.asarray(B_d)
    B_f = np.asarray(B_f)
    nd, m = B_d.shape[1] // 2, B_f.shape[1] // 2
    return np.hstack([B_d[:, :nd], B_f[:, :m], B_d[:, nd:], B_f[:, m:]])


def build(G: GeneralModel) -> SystemMatrices:
    """System matrices of the general model ``G``."""
    g_minus, g_plus = gamma(G.c_minus, G.c_plus)
    A = -delta(1j * G.omega_minus, 1j * G.omega_plus).expand() - delta(g_minus, g_plus).expand()
    B_d = -flat(delta(G.k_minus, G.k_plus))
    C_f = delta(G.c_minus, G.c_plus).expand()
    B_f = -flat(C_f)
    return SystemMatrices(A, B_d, B_f, C_f)


def natural_Q(G: GeneralModel) -> np.ndarray:
    """``Q = -(A + A^dagger)``, the dissipation matrix of the energy storage ``V = a^dagger a / 2``."""
    A = build(G).A
    Q = -(A + A.conj().T)
    return 0.5 * (Q + Q.conj().T)


def parameters_from_matrices(A, B_f=None, C_f=None, B_d=None, tol: float = 1e-8) -> GeneralModel:
    """Recover physical parameters from annihilation-form system matrices.

    Raises ``ValueError`` when the matrices are not doubled-up or do not come
    from a Hamiltonian plus field couplings (non-Hermitian ``Omega_-`` etc.).
    """
    from .algebra import DoubledMatrix

    A = np.asarray(A, dtype=complex)
    n = A.shape[0] // 2
    C_f = np.zeros((0, 2 * n)) if C_f is None else np.asarray(C_f, dtype=complex)
    Cd = DoubledMatrix.from_matrix(C_f, tol) if C_f.size else None
    c_minus = Cd.minus if Cd is not None else np.zeros((0, n))
    c_plus = Cd.plus if Cd is not None else np.zeros((0, n))
    if B_f is not None and np.asarray(B_f).size:
        resid = np.abs(np.asarray(B_f) + flat(C_f)).max()
        if resid > tol * max(1.0, np.abs(C_f).max()):
            raise ValueError(f"B_f != -C_f^flat (residual {resid:.3g})")
    Ad = DoubledMatrix.from_matrix(A, tol)
    g_minus, g_plus = gamma(c_minus, c_plus)
    omega_minus = 1j * (Ad.minus + g_minus)
    omega_plus = 1j * (Ad.plus + g_plus)
    if B_d is not None and np.asarray(B_d).size:
        Kd = DoubledMatrix.from_matrix(-flat(B_d), tol)
        k_minus, k_plus = Kd.minus, Kd.plus
    else:
        k_minus = k_plus = None
    omega_minus = _clean(omega_minus)
    omega_plus = _clean(omega_plus)
    return GeneralModel(omega_minus, omega_plus, c_minus, c_plus, k_minus, k_plus)


def _clean(M, tol=1e-14):
    M = np.array(M, dtype=complex)
    M.real[np.abs(M.real) < tol] = 0.0
    M.imag[np.abs(M.imag) < tol] = 0.0
    return M


def coupling_blocks(k_minus, k_plus=None) -> tuple[np.ndarray, np.ndarray]:
    """Annihilation-form direct coupling blocks for ``H = (a1^dag S^dag a2 + a2^dag S a1)/2``.

    With ``S = Delta(i K_-, i K_+)`` and ``K_-+`` of shape ``n2 x n1``, returns
    ``(B_12, B_21) = (-Delta(K_-, K_+)^flat, Delta(K_-, K_+))``.
    """
    K = delta(k_minus, k_plus)
    return -flat(K), K.expand()


def convert_matrix(M, target: Representation, source: Representation) -> np.ndarray:
    if source == target:
        return np.asarray(M)
    if target == "quadrature":
        return to_quadrature(M)
    return from_quadrature(M)


@dataclass(frozen=True)
class FieldChannel:
    """One plant field channel and its role in the feedback arrangement.

    ``role`` says what drives the channel input: ``"disturbance"`` (``w + b_in``),
    ``"noise"`` (vacuum ``b_v`` only) or ``"control"`` (controller output ``u``).
    ``output`` says where the channel output goes: ``"measurement"`` (fed to the
    controller as ``y``), ``"performance"`` (``z``) or ``None``.
    """

    c_minus: np.ndarray
    c_plus: np.ndarray | None = None
    role: Literal["disturbance", "noise", "control"] = "disturbance"
    output: Literal["measurement", "performance", None] = None


@dataclass(frozen=True, eq=False)
class PlantModel:
    """Plant of the coherent feedback loop.

    Dynamics ``a' = A a + B_f (w + b_in) + B_v b_v + B_u u`` with measured output
    ``y = C a + D_f (w + b_in) + D_v b_v`` and performance ``z = C_p a + D_u u + D_pf w``.
    Absent signal groups are zero-width matrices.
    """

    A: np.ndarray
    B_f: np.ndarray | None = None
    B_v: np.ndarray | None = None
    B_u: np.ndarray | None = None
    C: np.ndarray | None = None
    D_f: np.ndarray | None = None
    D_v: np.ndarray | None = None
    C_p: np.ndarray | None = None
    D_u: np.ndarray | None = None
    D_pf: np.ndarray | None = None
    representation: Representation = "annihilation"

    def __post_init__(self):
        dtype = float if self.representation == "quadrature" else complex
        A = _mat(self.A, dtype=dtype)
        n = A.shape[0]
        if A.shape != (n, n):
            raise ValueError(f"A must be square, got {A.shape}")
        B_f = _mat(self.B_f, n, 0, dtype)
        B_v = _mat(self.B_v, n, 0, dtype)
        B_u = _mat(self.B_u, n, 0, dtype)
        C = _mat(self.C, 0, n, dtype)
        ny = C.shape[0]
        D_f = _mat(self.D_f, ny, B_f.shape[1], dtype)
        D_v = _mat(self.D_v, ny, B_v.shape[1], dtype)
        C_p = _mat(self.C_p, 0, n, dtype)
        nz = C_p.shape[0]
        D_u = _mat(self.D_u, nz, B_u.shape[1], dtype)
        D_pf = _mat(self.D_pf, nz, B_f.shape[1], dtype)
        checks = {
            "B_f": (B_f.shape[0], n), "B_v": (B_v.shape[0], n), "B_u": (B_u.shape[0], n),
            "C": (C.shape[1], n), "D_f": (D_f.shape, (ny, B_f.shape[1])),
            "D_v": (D_v.shape, (ny, B_v.shape[1])), "C_p": (C_p.shape[1], n),
            "D_u": (D_u.shape, (nz, B_u.shape[1])), "D_pf": (D_pf.shape, (nz, B_f.shape[1])),
        }
        for name, (got, want) in checks.items():
            if got != want:
                raise ValueError(f"plant matrix {name} has inconsistent shape ({got} vs {want})")
        for f in fields(self):
            if f.name != "representation":
                M = locals()[f.name]
                M.setflags(write=False)
                object.__setattr__(self, f.name, M)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    def to(self, target: Representation) -> "PlantModel":
        if target == self.representation:
            return self
        kw = {f.name: convert_matrix(getattr(self, f.name), target, self.representation)
              for f in fields(self) if f.name != "representation"}
        return PlantModel(representation=target, **kw)

    @classmethod
    def from_channels(cls, omega_minus, channels: list[FieldChannel], omega_plus=None,
                      C_p=None, D_u=None, D_pf=None,
                      representation: Representation = "annihilation") -> "PlantModel":
        """Assemble a plant from its Hamiltonian and labeled field channels.

        Channels are grouped by role, keeping their relative order inside each
        group. Explicit ``C_p``/``D_u``/``D_pf`` (annihilation form) override the
        performance derived from channels labeled ``output="performance"``.
        """
        Om = _mat(omega_minus)
        n = Om.shape[0]
        rows = {"disturbance": [], "noise": [], "control": []}
        for ch in channels:
            if ch.role not in rows:
                raise ValueError(f"unknown channel role {ch.role!r}")
            cm = _mat(ch.c_minus, cols=n).reshape(-1, n)
            cp = _mat(ch.c_plus, *cm.shape) if ch.c_plus is not None else np.zeros_like(cm)
            rows[ch.role].append((cm, cp.reshape(cm.shape), ch.output))

        def stacked(role):
            items = rows[role]
            if not items:
                return np.zeros((0, n), complex), np.zeros((0, n), complex)
            return np.vstack([i[0] for i in items]), np.vstack([i[1] for i in items])

        Cm_all = np.vstack([stacked(r)[0] for r in rows])
        Cp_all = np.vstack([stacked(r)[1] for r in rows])
        A = build(GeneralModel(Om, omega_plus, Cm_all, Cp_all)).A

        def group(role):
            cm, cp = stacked(role)
            Cf = delta(cm, cp).expand()
            return Cf, -flat(Cf) if cm.size else np.zeros((2 * n, 0), complex)

        Cf_w, B_f = group("disturbance")
        Cf_v, B_v = group("noise")
        Cf_u, B_u = group("control")

        def select(role, wanted):
            """Output rows of channels in ``role`` labeled ``wanted`` and their selector."""
            items = rows[role]
            idx = [k for k, it in enumerate(items) if it[2] == wanted]
            cm = np.vstack([items[k][0] for k in idx]) if idx else np.zeros((0, n))
            cp = np.vstack([items[k][1] for k in idx]) if idx else np.zeros((0, n))
            S = np.zeros((len(idx), len(items)))
            S[np.arange(len(idx)), idx] = 1.0
            return cm, cp, S

        def dbl(S):
            return delta(S).expand()

        # measurement: y = C a + D_f (w + b_in) + D_v b_v, ordered disturbance then noise
        ym_w, yp_w, Sw = select("disturbance", "measurement")
        ym_v, yp_v, Sv = select("noise", "measurement")
        ym_u, _, _ = select("control", "measurement")
        if ym_u.shape[0]:
            raise ValueError("a control channel cannot also be the measured output")
        y_minus = np.vstack([ym_w, ym_v])
        y_plus = np.vstack([yp_w, yp_v])
        C = delta(y_minus, y_plus).expand()
        kw, kv = Sw.shape[0], Sv.shape[0]
        D_f = dbl(np.vstack([Sw, np.zeros((kv, Sw.shape[1]))]))
        D_v = dbl(np.vstack([np.zeros((kw, Sv.shape[1])), Sv]))

        if C_p is None:
            zm_w, zp_w, Tw = select("disturbance", "performance")
            zm_v, zp_v, _ = select("noise", "performance")
            zm_u, zp_u, Tu = select("control", "performance")
            z_minus = np.vstack([zm_w, zm_v, zm_u])
            z_plus = np.vstack([zp_w, zp_v, zp_u])
            C_p = delta(z_minus, z_plus).expand()
            a, b, c = Tw.shape[0], zm_v.shape[0], Tu.shape[0]
            D_pf = dbl(np.vstack([Tw, np.zeros((b + c, Tw.shape[1]))]))
            D_u = dbl(np.vstack([np.zeros((a + b, Tu.shape[1])), Tu]))
        plant = cls(A, B_f, B_v, B_u, C, D_f, D_v, C_p, D_u, D_pf, "annihilation")
        return plant.to(representation)


@dataclass(frozen=True, eq=False)
class Controller:
    """Coherent controller with field and direct couplings to the plant.

    ``a_K' = A_K a_K + B_21 a + B_K y + B_K1 b_vK1 + B_K2 b_vK2`` and
    ``u = C_K a_K + B_K0 b_vK1``. The plant sees the controller through
    ``B_12 a_K``. When only ``B_12`` is given, ``B_21`` is completed from the
    Hamiltonian coupling structure of the chosen representation.
    """

    A_K: np.ndarray
    B_K: np.ndarray | None = None
    C_K: np.ndarray | None = None
    B_K1: np.ndarray | None = None
    B_K2: np.ndarray | None = None
    B_K0: np.ndarray | None = None
    B_12: np.ndarray | None = None
    B_21: np.ndarray | None = None
    representation: Representation = "annihilation"
    n_plant: int | None = None

    def __post_init__(self):
        dtype = float if self.representation == "quadrature" else complex
        A_K = _mat(self.A_K, dtype=dtype)
        nk = A_K.shape[0]
        B_K = _mat(self.B_K, nk, 0, dtype)
        C_K = _mat(self.C_K, 0, nk, dtype)
        B_K1 = _mat(self.B_K1, nk, C_K.shape[0], dtype)
        B_K2 = _mat(self.B_K2, nk, 0, dtype)
        B_K0 = np.eye(C_K.shape[0], B_K1.shape[1], dtype=dtype) if self.B_K0 is None \
            else _mat(self.B_K0, dtype=dtype)
        if self.B_12 is None:
            n = self.n_plant if self.n_plant is not None else (
                _mat(self.B_21, dtype=dtype).shape[1] if self.B_21 is not None else 0)
            B_12 = np.zeros((n, nk), dtype)
        else:
            B_12 = _mat(self.B_12, dtype=dtype)
        if self.B_21 is None:
            B_21 = self.partner(B_12, self.representation) if B_12.size else \
                np.zeros((nk, B_12.shape[0]), dtype)
        else:
            B_21 = _mat(self.B_21, dtype=dtype)
        if B_21.dtype != dtype:
            B_21 = np.real_if_close(B_21).astype(dtype)
        for name, got, want in (
            ("C_K", C_K.shape[1], nk), ("B_K", B_K.shape[0], nk),
            ("B_K1", B_K1.shape[0], nk), ("B_K2", B_K2.shape[0], nk),
            ("B_12", B_12.shape[1], nk), ("B_21", B_21.shape, (nk, B_12.shape[0])),
            ("B_K0", B_K0.shape, (C_K.shape[0], B_K1.shape[1])),
        ):
            if got != want:
                raise ValueError(f"controller matrix {name} has inconsistent shape ({got} vs {want})")
        for name in ("A_K", "B_K", "C_K", "B_K1", "B_K2", "B_K0", "B_12", "B_21"):
            M = locals()[name]
            M.setflags(write=False)
            object.__setattr__(self, name, M)
        object.__setattr__(self, "n_plant", B_12.shape[0])

    @staticmethod
    def partner(B_12, representation: Representation) -> np.ndarray:
        """Coupling block ``B_21`` implied by ``B_12`` for a Hamiltonian interaction."""
        B_12 = np.asarray(B_12)
        if representation == "quadrature":
            n, nk = B_12.shape[0] // 2, B_12.shape[1] // 2
            return symplectic(nk) @ B_12.T @ symplectic(n)
        return -flat(B_12)

    @property
    def n(self) -> int:
        return self.A_K.shape[0]

    def with_coupling(self, B_12) -> "Controller":
        B_12 = np.asarray(B_12)
        return replace(self, B_12=B_12, B_21=self.partner(B_12, self.representation),
                       n_plant=B_12.shape[0])

    def without_coupling(self) -> "Controller":
        return replace(self, B_12=None, B_21=None)

    def to(self, target: Representation) -> "Controller":
        if target == self.representation:
            return self
        kw = {name: convert_matrix(getattr(self, name), target, self.representation)
              for name in ("A_K", "B_K", "C_K", "B_K1", "B_K2", "B_K0", "B_12", "B_21")}
        return Controller(representation=target, n_plant=self.n_plant, **kw)
