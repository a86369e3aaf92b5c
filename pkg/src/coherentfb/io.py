"""JSON model and scenario files.

Matrices are lists of rows. An entry is a number, a ``[re, im]`` pair, or a
string expression in the scenario parameters (``"-sqrt(kappa)"``). A matrix
may also be written as ``{"eye": n, "times": expr}``, ``{"diag": [...]}`` or
``{"zeros": [rows, cols]}``.

A model file holds one object with a ``"type"`` key:

``general`` (the default when ``type`` is absent)
    Annihilation-form parameters ``omega_minus``, ``omega_plus``, ``c_minus``,
    ``c_plus``, ``k_minus``, ``k_plus``, an optional mode count ``modes`` and
    an optional ``performance`` object with ``c_p``, ``d_pd``, ``d_pf``. The
    parameters are always in annihilation form; ``representation`` names the
    form used when the model is turned into system matrices.
``linear``
    System matrices ``A``, ``B_f``, ``C_f`` and optional ``B_d``.
``plant`` / ``controller``
    Fields of :class:`~coherentfb.model.PlantModel` / :class:`~coherentfb.model.Controller`.
``plant_controller``
    ``plant`` and ``controller`` sub-objects closed in feedback.
``network``
    ``systems`` (two ``general`` models), ``coupling`` (``k_minus``, ``k_plus``)
    and the performance ``C`` with the index lists ``inputs``/``outputs`` of
    the subsystems whose fields carry ``w`` and ``z``.
``closed_loop``
    Closed-loop matrices ``A``, ``B``, ``C``, ``D`` and optional ``G``.

Non-``general`` types carry a ``representation``. A scenario file wraps a
model as ``{"name", "description", "parameters", "system", "analysis",
"sweep", "synthesis"}``.
"""

from __future__ import annotations

import ast
import json
import math
import operator
from dataclasses import dataclass, field, fields
from importlib import resources
from pathlib import Path

import numpy as np

from .model import Controller, GeneralModel, PlantModel, SystemMatrices

__all__ = [
    "FileFormatError",
    "evaluate",
    "decode_matrix",
    "encode_matrix",
    "Scenario",
    "load_scenario",
    "scenario_from_dict",
    "builtin_scenarios",
    "decode_system",
    "encode_system",
    "save_json",
]

FORMAT_VERSION = 1


class FileFormatError(ValueError):
    """Malformed model or scenario file."""


_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
           ast.Div: operator.truediv, ast.Pow: operator.pow}
_UNARY = {ast.UAdd: operator.pos, ast.USub: operator.neg}
_FUNCS = {"sqrt": np.sqrt, "exp": np.exp, "sin": np.sin, "cos": np.cos, "tan": np.tan,
          "abs": abs, "log": np.log, "conj": np.conj, "real": np.real, "imag": np.imag}
_CONSTS = {"pi": math.pi, "e": math.e, "j": 1j}


def evaluate(expr: str, params: dict | None = None):
    """Evaluate an arithmetic expression over numbers, parameters and a few functions.

    Only literals, names, ``+ - * / **``, unary signs and calls of ``sqrt``,
    ``exp``, ``sin``, ``cos``, ``tan``, ``log``, ``abs``, ``conj``, ``real``,
    ``imag`` are accepted; anything else raises :class:`FileFormatError`.
    """
    params = {} if params is None else params
    try:
        tree = ast.parse(str(expr), mode="eval")
    except SyntaxError as exc:
        raise FileFormatError(f"cannot parse expression {expr!r}") from exc

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float, complex)) \
                and not isinstance(node.value, bool):
            return node.value
        if isinstance(node, ast.Name):
            if node.id in params:
                return params[node.id]
            if node.id in _CONSTS:
                return _CONSTS[node.id]
            raise FileFormatError(f"unknown name {node.id!r} in {expr!r}")
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return _BINOPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.UnaryOp) and type(node.op) in _UNARY:
            return _UNARY[type(node.op)](ev(node.operand))
        if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) \
                and node.func.id in _FUNCS and not node.keywords and len(node.args) == 1:
            return _FUNCS[node.func.id](ev(node.args[0]))
        raise FileFormatError(f"unsupported construct in expression {expr!r}")

    try:
        val = ev(tree)
    except (ZeroDivisionError, OverflowError, TypeError) as exc:
        raise FileFormatError(f"cannot evaluate {expr!r}: {exc}") from exc
    return complex(val) if isinstance(val, complex) else float(val)


def _entry(x, params):
    if isinstance(x, bool):
        raise FileFormatError("booleans are not matrix entries")
    if isinstance(x, (int, float)):
        return float(x)
    if isinstance(x, str):
        return evaluate(x, params)
    if isinstance(x, list) and len(x) == 2 and all(not isinstance(v, list) for v in x):
        re, im = (_entry(v, params) for v in x)
        return complex(re) + 1j * complex(im)
    raise FileFormatError(f"bad matrix entry {x!r}")


def decode_matrix(obj, params: dict | None = None) -> np.ndarray:
    """Matrix from its JSON form (see the module docstring)."""
    if obj is None:
        return None
    if isinstance(obj, dict):
        if "eye" in obj:
            k = int(obj["eye"])
            return _entry(obj.get("times", 1.0), params) * np.eye(k)
        if "diag" in obj:
            return np.diag([_entry(v, params) for v in obj["diag"]])
        if "zeros" in obj:
            r, c = obj["zeros"]
            return np.zeros((int(r), int(c)))
        raise FileFormatError(f"unknown matrix shorthand {sorted(obj)}")
    if isinstance(obj, (int, float, str)):
        return np.array([[_entry(obj, params)]])
    if not isinstance(obj, list) or not all(isinstance(r, list) for r in obj):
        raise FileFormatError("a matrix must be a list of rows")
    rows = [[_entry(v, params) for v in r] for r in obj]
    if len({len(r) for r in rows}) > 1:
        raise FileFormatError("matrix rows have different lengths")
    M = np.array(rows)
    if M.size == 0:
        return np.zeros((len(rows), 0))
    if np.iscomplexobj(M) and not np.abs(M.imag).any():
        M = M.real
    return M


def encode_matrix(M) -> list:
    """JSON form of a matrix; complex entries become ``[re, im]`` pairs."""
    M = np.atleast_2d(np.asarray(M))
    if np.iscomplexobj(M) and np.abs(M.imag).any():
        return [[[float(v.real), float(v.imag)] for v in row] for row in M]
    return [[float(np.real(v)) for v in row] for row in M]


_GENERAL = ("omega_minus", "omega_plus", "c_minus", "c_plus", "k_minus", "k_plus", "c_p", "d_pd", "d_pf")
_PLANT = tuple(f.name for f in fields(PlantModel) if f.name != "representation")
_CONTROLLER = ("A_K", "B_K", "C_K", "B_K1", "B_K2", "B_K0", "B_12", "B_21")
_CLOSED = ("A", "B", "C", "D", "G")
_LINEAR = ("A", "B_f", "C_f", "B_d")
_META = ("type", "representation", "state_sizes", "noise_widths", "modes")


@dataclass
class Network:
    """Two directly coupled ``general`` systems with a chosen performance output."""

    systems: list
    k_minus: float
    k_plus: float
    C: np.ndarray | None = None
    inputs: tuple = (0,)
    outputs: tuple = (0,)


@dataclass
class ClosedLoopMatrices:
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    G: np.ndarray | None = None
    representation: str = "annihilation"
    state_sizes: tuple = ()
    noise_widths: tuple = ()


def _matrices(obj, names, params, required=()):
    out = {}
    for k in names:
        if k in obj and obj[k] is not None:
            out[k] = decode_matrix(obj[k], params)
    missing = [k for k in required if k not in out]
    if missing:
        raise FileFormatError(f"missing matrices {missing}")
    unknown = [k for k in obj if k not in names and k not in _META]
    if unknown:
        raise FileFormatError(f"unknown keys {unknown}")
    return out


def _rep(obj, default="annihilation"):
    rep = obj.get("representation", default)
    if rep not in ("annihilation", "quadrature"):
        raise FileFormatError(f"unknown representation {rep!r}")
    return rep


def _decode_general(obj, params):
    obj = dict(obj)
    perf = obj.pop("performance", None) or {}
    if not isinstance(perf, dict):
        raise FileFormatError("'performance' must be an object")
    bad = [k for k in perf if k not in ("c_p", "d_pd", "d_pf")]
    if bad:
        raise FileFormatError(f"unknown performance keys {bad}")
    clash = [k for k in perf if k in obj]
    if clash:
        raise FileFormatError(f"{clash} given both inside and outside 'performance'")
    _rep(obj)
    G = GeneralModel(**_matrices({**obj, **perf}, _GENERAL, params, ("omega_minus",)))
    if "modes" in obj and int(obj["modes"]) != G.n:
        raise FileFormatError(f"'modes' is {obj['modes']} but omega_minus has {G.n} rows")
    return G


def decode_system(obj: dict, params: dict | None = None):
    """Model object from its JSON form."""
    if not isinstance(obj, dict):
        raise FileFormatError("a model must be a JSON object")
    if "type" not in obj:
        if "omega_minus" not in obj:
            raise FileFormatError("a model needs a 'type' key or general-model parameters")
        obj = {"type": "general", **obj}
    kind = obj["type"]
    try:
        if kind == "general":
            return _decode_general(obj, params)
        if kind == "linear":
            m = _matrices(obj, _LINEAR, params, ("A",))
            n = m["A"].shape[0]
            return SystemMatrices(m["A"], m.get("B_d", np.zeros((n, 0))), m.get("B_f", np.zeros((n, 0))),
                                  m.get("C_f", np.zeros((0, n))), _rep(obj))
        if kind == "plant":
            return PlantModel(**_matrices(obj, _PLANT, params, ("A",)), representation=_rep(obj))
        if kind == "controller":
            return Controller(**_matrices(obj, _CONTROLLER, params, ("A_K",)), representation=_rep(obj))
        if kind == "plant_controller":
            for key in ("plant", "controller"):
                if key not in obj:
                    raise FileFormatError(f"plant_controller needs {key!r}")
            plant = decode_system({"type": "plant", **obj["plant"]}, params)
            K = decode_system({"type": "controller", **obj["controller"]}, params)
            return plant, K
        if kind == "network":
            systems = [decode_system({"type": "general", **s}, params) for s in obj["systems"]]
            if len(systems) != 2:
                raise FileFormatError("a network couples exactly two systems")
            cpl = obj.get("coupling", {})
            km = _entry(cpl.get("k_minus", 0.0), params)
            kp = _entry(cpl.get("k_plus", 0.0), params)
            C = decode_matrix(obj["C"], params) if "C" in obj else None
            return Network(systems, km, kp, C, tuple(obj.get("inputs", (0,))),
                           tuple(obj.get("outputs", (0,))))
        if kind == "closed_loop":
            m = _matrices(obj, _CLOSED, params, ("A", "B", "C"))
            D = m.get("D", np.zeros((m["C"].shape[0], m["B"].shape[1])))
            return ClosedLoopMatrices(m["A"], m["B"], m["C"], D, m.get("G"), _rep(obj),
                                      tuple(obj.get("state_sizes", ())), tuple(obj.get("noise_widths", ())))
    except (TypeError, KeyError) as exc:
        raise FileFormatError(f"malformed {kind!r} model: {exc}") from exc
    raise FileFormatError(f"unknown model type {kind!r}")


def encode_system(obj) -> dict:
    """JSON form of a model object (inverse of :func:`decode_system`)."""
    if isinstance(obj, GeneralModel):
        out = {"type": "general", "modes": int(obj.n), "representation": "annihilation"}
        for k in _GENERAL[:6]:
            v = getattr(obj, k)
            if v is not None and np.size(v):
                out[k] = encode_matrix(v)
        perf = {k: encode_matrix(getattr(obj, k)) for k in _GENERAL[6:] if np.size(getattr(obj, k))}
        if perf:
            out["performance"] = perf
        return out
    if isinstance(obj, SystemMatrices):
        return {"type": "linear", "representation": obj.representation, "A": encode_matrix(obj.A),
                **{k: encode_matrix(getattr(obj, k)) for k in _LINEAR[1:] if np.size(getattr(obj, k))}}
    if isinstance(obj, PlantModel):
        return {"type": "plant", "representation": obj.representation,
                **{k: encode_matrix(getattr(obj, k)) for k in _PLANT if np.size(getattr(obj, k))}}
    if isinstance(obj, Controller):
        return {"type": "controller", "representation": obj.representation,
                **{k: encode_matrix(getattr(obj, k)) for k in _CONTROLLER if np.size(getattr(obj, k))}}
    if isinstance(obj, tuple) and len(obj) == 2:
        p, k = (encode_system(o) for o in obj)
        for d in (p, k):
            d.pop("type")
        return {"type": "plant_controller", "plant": p, "controller": k}
    if isinstance(obj, ClosedLoopMatrices):
        out = {"type": "closed_loop", "representation": obj.representation}
        if obj.state_sizes:
            out["state_sizes"] = [int(k) for k in obj.state_sizes]
        if obj.noise_widths:
            out["noise_widths"] = [int(k) for k in obj.noise_widths]
        for k in _CLOSED:
            v = getattr(obj, k)
            if v is not None:
                out[k] = encode_matrix(v)
        return out
    if isinstance(obj, Network):
        out = {"type": "network", "systems": [], "inputs": list(obj.inputs),
               "outputs": list(obj.outputs),
               "coupling": {"k_minus": obj.k_minus, "k_plus": obj.k_plus}}
        for s in obj.systems:
            d = encode_system(s)
            d.pop("type")
            out["systems"].append(d)
        if obj.C is not None:
            out["C"] = encode_matrix(obj.C)
        return out
    raise TypeError(f"cannot encode {type(obj).__name__}")


@dataclass
class Scenario:
    """A named model with parameters and per-command options."""

    name: str
    system: dict
    parameters: dict = field(default_factory=dict)
    description: str = ""
    analysis: dict = field(default_factory=dict)
    sweep: dict = field(default_factory=dict)
    synthesis: dict = field(default_factory=dict)
    expected: dict = field(default_factory=dict)

    def build(self, **overrides):
        """Decode the model with parameters updated by ``overrides``."""
        unknown = [k for k in overrides if k not in self.parameters]
        if unknown:
            raise FileFormatError(f"unknown parameters {unknown}; known: {sorted(self.parameters)}")
        params = {**self.parameters, **overrides}
        return decode_system(self.system, params)

    def to_dict(self) -> dict:
        out = {"format": "coherentfb-scenario", "version": FORMAT_VERSION, "name": self.name,
               "description": self.description, "parameters": self.parameters, "system": self.system}
        for k in ("analysis", "sweep", "synthesis", "expected"):
            if getattr(self, k):
                out[k] = getattr(self, k)
        return out


def scenario_from_dict(d: dict, default_name: str = "") -> Scenario:
    if not isinstance(d, dict):
        raise FileFormatError("file must contain a JSON object")
    if "system" not in d:
        # a bare model file is a scenario without parameters
        return Scenario(default_name or d.get("type", "model"), d)
    params = d.get("parameters", {})
    if not isinstance(params, dict):
        raise FileFormatError("'parameters' must be an object")
    params = {k: _entry(v, {}) for k, v in params.items()}
    return Scenario(d.get("name", default_name), d["system"], params, d.get("description", ""),
                    d.get("analysis", {}), d.get("sweep", {}), d.get("synthesis", {}),
                    d.get("expected", {}))


def load_scenario(path) -> Scenario:
    """Read a scenario or model file; ``builtin:NAME`` loads a bundled scenario."""
    path = str(path)
    if path.startswith("builtin:"):
        name = path.split(":", 1)[1]
        ref = resources.files("coherentfb") / "scenarios" / f"{name}.json"
        if not ref.is_file():
            raise FileFormatError(f"no bundled scenario {name!r}; available: {builtin_scenarios()}")
        text, stem = ref.read_text(), name
    else:
        p = Path(path)
        try:
            text = p.read_text()
        except OSError as exc:
            raise FileFormatError(f"cannot read {path}: {exc}") from exc
        stem = p.stem
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FileFormatError(f"{path}: invalid JSON ({exc})") from exc
    return scenario_from_dict(d, stem)


def builtin_scenarios() -> list:
    root = resources.files("coherentfb") / "scenarios"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def save_json(obj: dict, path) -> None:
    Path(path).write_text(json.dumps(obj, indent=2) + "\n")
