"""Command-line front end.

Subcommands: ``convert``, ``check``, ``analyze``, ``sweep``,
``synthesize-hinf`` and ``synthesize-lqg``. Inputs are model or scenario JSON
files (see :mod:`coherentfb.io`); ``builtin:NAME`` selects a bundled scenario.

Exit codes: 0 success, 1 negative verdict (unstable, not passive, not
realizable), 2 input error, 3 solver failure.
"""

from __future__ import annotations

import argparse
import csv
import io as _stdio
import json
import logging
import sys

import numpy as np

from . import __version__
from .analysis import (StabilityClass, classify_stability, hinf_norm, lqg_cost, passivity_check,
                       spectral_abscissa)
from .errors import InfeasibleError, NotHurwitzError, RealizabilityError, SolverError
from .interconnect import ClosedLoop, close_loop, direct_couple
from .io import (ClosedLoopMatrices, FileFormatError, Network, Scenario, builtin_scenarios,
                 encode_system, load_scenario, save_json)
from .model import Controller, GeneralModel, PlantModel, SystemMatrices, build
from .realizability import check_annihilation, check_controller, check_plant
from .synthesis import (direct_coupling_search, finalize, hinf_step1, hinf_step2, hinf_step3,
                        lqg_synthesize, state_from_controller, synthesize_hinf)

__all__ = ["main", "system_metric", "analyze_system", "sweep_rows", "format_number"]

EXIT_OK, EXIT_NEGATIVE, EXIT_INPUT, EXIT_SOLVER = 0, 1, 2, 3
METRICS = ("hinf", "lqg", "abscissa")
DEFAULT_TOLERANCE = 1e-8

log = logging.getLogger(__name__)


def format_number(x) -> str:
    """12 significant digits, locale independent; infinities as ``inf``."""
    x = float(x)
    if np.isnan(x):
        return "nan"
    if np.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x + 0.0, ".12g")  # + 0.0 folds -0.0 into 0


# --- evaluation of decoded systems -------------------------------------------------


def _network_parts(net: Network):
    S = direct_couple(net.systems[0], net.systems[1], net.k_minus, net.k_plus)
    widths = [build(G).B_f.shape[1] for G in net.systems]
    offsets = np.concatenate([[0], np.cumsum(widths)])
    cols = np.concatenate([np.arange(offsets[i], offsets[i + 1]) for i in net.inputs]) \
        if net.inputs else np.zeros(0, int)
    B = S.B_f[:, cols]
    if net.C is not None:
        C = np.asarray(net.C, dtype=complex)
        D = np.zeros((C.shape[0], B.shape[1]), complex)
    else:
        rows = np.concatenate([np.arange(offsets[i], offsets[i + 1]) for i in net.outputs])
        C = S.C_f[rows]
        D = (rows[:, None] == cols[None, :]).astype(complex)
    return S, B, C, D


def _channels(system):
    """Labeled ``(A, B, C, D)`` transfers, LQG data ``(A, G, C)`` and the state matrix."""
    if isinstance(system, GeneralModel):
        S = build(system)
        A = S.A
        chans = {}
        if S.B_f.size:
            chans["w->b_out"] = (A, S.B_f, S.C_f, np.eye(S.C_f.shape[0]))
            if system.c_p.shape[0]:
                chans["w->z"] = (A, S.B_f, system.c_p, system.d_pf)
        C_lqg = system.c_p if system.c_p.shape[0] else np.eye(A.shape[0])
        return A, chans, (A, S.input_matrix, C_lqg)
    if isinstance(system, SystemMatrices):
        chans = {"w->b_out": (system.A, system.B_f, system.C_f, np.eye(system.C_f.shape[0]))} \
            if system.B_f.size else {}
        return system.A, chans, (system.A, system.B_f, system.C_f)
    if isinstance(system, tuple):
        cl = close_loop(*system)
        return cl.A, {"w->z": (cl.A, cl.B, cl.C, cl.D)}, (cl.A, cl.G, cl.C)
    if isinstance(system, ClosedLoopMatrices):
        G = system.G if system.G is not None else system.B
        return system.A, {"w->z": (system.A, system.B, system.C, system.D)}, (system.A, G, system.C)
    if isinstance(system, Network):
        S, B, C, D = _network_parts(system)
        return S.A, {"w->z": (S.A, B, C, D)}, (S.A, S.B_f, C)
    if isinstance(system, PlantModel):
        return system.A, {"w->z": (system.A, system.B_f, system.C_p, system.D_pf)}, \
            (system.A, np.hstack([system.B_f, system.B_v, system.B_u]), system.C_p)
    raise TypeError(f"no metrics for {type(system).__name__}")


def system_metric(system, metric: str, noise_weight: float = 0.5, channel: str | None = None) -> float:
    """``hinf`` (first or named channel), ``lqg`` or ``abscissa`` of a decoded system."""
    A, chans, lq = _channels(system)
    if metric == "abscissa":
        return spectral_abscissa(A)
    if metric == "hinf":
        if not chans:
            raise ValueError("system has no disturbance channel")
        key = channel or ("w->z" if "w->z" in chans else next(iter(chans)))
        return hinf_norm(*chans[key])
    if metric == "lqg":
        return lqg_cost(*lq, noise_weight=noise_weight)
    raise ValueError(f"unknown metric {metric!r}; choose from {METRICS}")


def _realizability(system, tol):
    if isinstance(system, GeneralModel):
        S = build(system)
        return {"system": check_annihilation(S.A, S.B_f, S.C_f, S.B_d, system.k_minus,
                                             system.k_plus, tol)}
    if isinstance(system, SystemMatrices):
        S = system.to("annihilation")
        return {"system": check_annihilation(S.A, S.B_f, S.C_f, tol=tol)}
    if isinstance(system, tuple):
        return {"plant": check_plant(system[0], tol), "controller": check_controller(system[1], tol)}
    if isinstance(system, PlantModel):
        return {"plant": check_plant(system, tol)}
    if isinstance(system, Controller):
        return {"controller": check_controller(system, tol)}
    if isinstance(system, Network):
        return {f"system{i + 1}": _realizability(G, tol)["system"] for i, G in enumerate(system.systems)}
    return {}


def analyze_system(system, noise_weight: float = 0.5, tol: float = 1e-8) -> dict:
    """Stability, passivity (general models), gains per channel, LQG cost and realizability."""
    A, chans, lq = _channels(system)
    out = {"stability": str(classify_stability(A)), "spectral_abscissa": spectral_abscissa(A)}
    if isinstance(system, GeneralModel):
        B = build(system).input_matrix
        direct_free = not np.abs(system.d_pd).any() and not np.abs(system.d_pf).any()
        C_p = system.c_p if system.c_p.shape[0] and direct_free else B.conj().T
        res = passivity_check(A, B, C_p)
        out["passive"] = res.passive
        out["natural_Q_min_eig"] = float(np.linalg.eigvalsh(res.natural_Q).min())
    out["hinf"] = {k: hinf_norm(*v) for k, v in chans.items() if v[2].shape[0]}
    if lq[2].shape[0]:
        out["lqg"] = lqg_cost(*lq, noise_weight=noise_weight)
    out["realizable"] = {k: r.verdict for k, r in _realizability(system, tol).items()}
    return out


def _negative(report: dict) -> bool:
    return (report["stability"] == str(StabilityClass.UNSTABLE)
            or report.get("passive") is False
            or not all(report.get("realizable", {}).values()))


def sweep_rows(scenario: Scenario, param: str, values, metric: str, noise_weight=None,
               channel=None):
    """``(value, metric)`` pairs with the scenario rebuilt at each parameter value."""
    if param not in scenario.parameters:
        raise FileFormatError(f"unknown parameter {param!r}; known: {sorted(scenario.parameters)}")
    w = scenario.analysis.get("noise_weight", 0.5) if noise_weight is None else noise_weight
    rows = []
    for v in sorted(float(x) for x in values):
        try:
            m = system_metric(scenario.build(**{param: v}), metric, w, channel)
        except NotHurwitzError:
            m = float("inf")
        rows.append((v, m))
    return rows


# --- conversion ----------------------------------------------------------------------


def _convert(system, target):
    if isinstance(system, GeneralModel):
        return build(system).to(target)
    if isinstance(system, (SystemMatrices, PlantModel, Controller)):
        return system.to(target)
    if isinstance(system, tuple):
        return system[0].to(target), system[1].to(target)
    if isinstance(system, ClosedLoopMatrices):
        G = system.G if system.G is not None else np.zeros((system.A.shape[0], 0))
        cl = ClosedLoop(system.A, system.B, G, system.C, system.D, system.representation,
                        system.state_sizes, system.noise_widths)
        out = cl.to(target)
        return ClosedLoopMatrices(out.A, out.B, out.C, out.D, out.G if system.G is not None else None,
                                  target, out.state_sizes, out.noise_widths)
    if isinstance(system, Network):
        S, B, C, D = _network_parts(system)
        sizes = tuple(2 * G.n for G in system.systems)
        widths = tuple(2 * G.m for G in system.systems)
        return _convert(ClosedLoopMatrices(S.A, B, C, D, S.B_f, "annihilation", sizes, widths), target)
    raise TypeError(f"cannot convert {type(system).__name__}")


# --- output helpers ------------------------------------------------------------------


def _emit_report(d: dict, stream, prefix: str = "") -> None:
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            _emit_report(v, stream, f"{key}.")
        elif isinstance(v, (bool, np.bool_)):
            print(f"{key}: {'true' if v else 'false'}", file=stream)
        elif isinstance(v, (int, float, np.floating)):
            print(f"{key}: {format_number(v)}", file=stream)
        elif isinstance(v, (list, tuple)):
            print(f"{key}: {json.dumps(v, default=float)}", file=stream)
        else:
            print(f"{key}: {v}", file=stream)


def _write_model(obj: dict, path) -> None:
    if path:
        save_json(obj, path)
    else:
        json.dump(obj, sys.stdout, indent=2)
        sys.stdout.write("\n")


def _tolerance(args, sc: Scenario) -> float:
    if args.tolerance is not None:
        return args.tolerance
    return float(sc.analysis.get("tolerance", DEFAULT_TOLERANCE))


def _params(args):
    out = {}
    for item in args.set or []:
        if "=" not in item:
            raise FileFormatError(f"--set expects NAME=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        try:
            out[k.strip()] = float(v)
        except ValueError as exc:
            raise FileFormatError(f"--set value for {k!r} is not a number") from exc
    return out


# --- subcommands ---------------------------------------------------------------------


def cmd_convert(args) -> int:
    sc = load_scenario(args.input)
    system = sc.build(**_params(args))
    out = _convert(system, args.representation)
    _write_model(encode_system(out), args.output)
    return EXIT_OK


def cmd_check(args) -> int:
    sc = load_scenario(args.input)
    system = sc.build(**_params(args))
    reports = _realizability(system, _tolerance(args, sc))
    if not reports:
        raise FileFormatError("no realizability conditions apply to this model type")
    ok = True
    for name, rep in reports.items():
        d = rep.as_dict()
        d["relative"] = rep.relative()
        _emit_report({name: d}, sys.stdout)
        ok = ok and rep.verdict
    print(f"verdict: {'realizable' if ok else 'not realizable'}")
    return EXIT_OK if ok else EXIT_NEGATIVE


def cmd_analyze(args) -> int:
    sc = load_scenario(args.input)
    system = sc.build(**_params(args))
    w = sc.analysis.get("noise_weight", 0.5)
    rep = analyze_system(system, w, _tolerance(args, sc))
    _emit_report({"scenario": sc.name, **rep}, sys.stdout)
    return EXIT_NEGATIVE if _negative(rep) else EXIT_OK


def cmd_sweep(args) -> int:
    sc = load_scenario(args.input)
    param = args.param or sc.sweep.get("parameter")
    if not param:
        raise FileFormatError("no --param given and the scenario names no sweep parameter")
    metric = args.metric or sc.sweep.get("metric", "hinf")
    if metric not in METRICS:
        raise FileFormatError(f"unknown metric {metric!r}")
    lo = args.from_ if args.from_ is not None else sc.sweep.get("from", 0.0)
    hi = args.to if args.to is not None else sc.sweep.get("to", 1.0)
    steps = args.steps if args.steps is not None else sc.sweep.get("steps", 31)
    if steps < 0:
        raise FileFormatError("--steps must be non-negative")
    overrides = _params(args)
    if overrides:
        sc = Scenario(sc.name, sc.system, {**sc.parameters, **overrides}, sc.description,
                      sc.analysis, sc.sweep, sc.synthesis)
    rows = sweep_rows(sc, param, np.linspace(lo, hi, steps), metric)
    buf = _stdio.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow([param, metric])
    for v, m in rows:
        wr.writerow([format_number(v), format_number(m)])
    if args.output:
        with open(args.output, "w", newline="") as fh:
            fh.write(buf.getvalue())
    else:
        sys.stdout.write(buf.getvalue())
    return EXIT_OK


def cmd_synthesize_hinf(args) -> int:
    sc = load_scenario(args.input)
    system = sc.build(**_params(args))
    opts = sc.synthesis
    rounds = args.max_rounds if args.max_rounds is not None else opts.get("max_rounds", 10)
    g = opts.get("g")
    if isinstance(system, tuple):
        plant, K = system
        st = state_from_controller(plant, K)
        for _ in range(rounds):
            before = st.norm
            st = hinf_step3(hinf_step2(st))
            if before - st.norm < 1e-4 * before:
                break
    elif isinstance(system, PlantModel):
        st = synthesize_hinf(system, g, rounds) if rounds > 0 else hinf_step1(system, g)
    else:
        raise FileFormatError("synthesize-hinf needs a plant or plant_controller model")
    K = finalize(st.controller)
    norm = hinf_norm(*_channels((st.plant, K))[1]["w->z"])
    rep = {"scenario": sc.name, "certified_g": st.g, "verified_norm": norm,
           "ill_conditioned": st.ill_conditioned, "realizable": check_controller(K).verdict,
           "steps": [[s, lab, float(a), float(b)] for s, lab, a, b in st.history]}
    _emit_report(rep, sys.stdout)
    for note in st.notes:
        print(f"note: {note}")
    if args.output:
        save_json(encode_system(K), args.output)
    return EXIT_OK


def cmd_synthesize_lqg(args) -> int:
    sc = load_scenario(args.input)
    system = sc.build(**_params(args))
    opts = sc.synthesis
    w = opts.get("noise_weight", sc.analysis.get("noise_weight", 0.5))
    refine = opts.get("refine", True)
    if isinstance(system, tuple):
        dim = system[0].A.shape[0] * system[1].A_K.shape[0]
    elif isinstance(system, Network):
        dim = 2
    else:
        raise FileFormatError("synthesize-lqg needs a plant_controller or network model")
    if args.from_ is not None or args.to is not None or args.steps is not None:
        lo = args.from_ if args.from_ is not None else -1.0
        hi = args.to if args.to is not None else 1.0
        n = args.steps if args.steps is not None else 11
        box = [(lo, hi)] * dim
        step = (hi - lo) / (n - 1) if n > 1 else 1.0
        if n == 1:
            box = [(lo, lo)] * dim
    else:
        box = [tuple(b) for b in opts.get("box", [[-1.0, 1.0]] * dim)]
        if len(box) == 1:
            box = box * dim
        step = opts.get("step", 0.1)
    if isinstance(system, tuple):
        res = lqg_synthesize(system[0], system[1], box, step, w, refine)
        rep = {"scenario": sc.name, "cost": res.cost, "grid_cost": res.grid_cost,
               "coupling": [float(x) for x in res.x], "completed": res.completed,
               "realizable": check_controller(res.controller, 1e-3).verdict}
    else:
        res = direct_coupling_search(system.systems[0], system.systems[1], system.C, box, step, w,
                                     refine=opts.get("refine", False))
        rep = {"scenario": sc.name, "cost": res.cost, "grid_cost": res.grid_cost,
               "k_minus": float(res.x[0]), "k_plus": float(res.x[1])}
    _emit_report(rep, sys.stdout)
    for note in res.notes:
        print(f"note: {note}")
    if args.output and res.controller is not None:
        save_json(encode_system(res.controller), args.output)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="coherentfb", description=__doc__.split("\n\n")[0])
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, tolerance=DEFAULT_TOLERANCE):
        sp.add_argument("--input", required=True, help="model/scenario JSON or builtin:NAME")
        sp.add_argument("--output", help="output file (default stdout)")
        sp.add_argument("--set", action="append", metavar="NAME=VALUE",
                        help="override a scenario parameter (repeatable)")
        sp.add_argument("--tolerance", type=float,
                        help="relative tolerance for realizability verdicts "
                             f"(default: scenario setting or {tolerance:g})")

    sp = sub.add_parser("convert", help="change between annihilation and quadrature form")
    common(sp)
    sp.add_argument("--representation", required=True, choices=("annihilation", "quadrature"))
    sp.set_defaults(func=cmd_convert)

    sp = sub.add_parser("check", help="physical realizability residuals and verdict")
    common(sp)
    sp.set_defaults(func=cmd_check)

    sp = sub.add_parser("analyze", help="stability, passivity, gains and LQG cost")
    common(sp)
    sp.set_defaults(func=cmd_analyze)

    def grid(sp):
        sp.add_argument("--from", dest="from_", type=float)
        sp.add_argument("--to", type=float)
        sp.add_argument("--steps", type=int, help="number of grid points")

    sp = sub.add_parser("sweep", help="metric versus one scenario parameter, as CSV")
    common(sp)
    sp.add_argument("--param", help="parameter to sweep")
    sp.add_argument("--metric", choices=METRICS)
    grid(sp)
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("synthesize-hinf", help="H-infinity controller and coupling synthesis")
    common(sp)
    sp.add_argument("--max-rounds", type=int)
    sp.set_defaults(func=cmd_synthesize_hinf)

    sp = sub.add_parser("synthesize-lqg", help="direct-coupling search for LQG cost")
    common(sp)
    grid(sp)
    sp.set_defaults(func=cmd_synthesize_lqg)

    sub.add_parser("list", help="list bundled scenarios").set_defaults(
        func=lambda a: print("\n".join(builtin_scenarios())) or EXIT_OK)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code not in (0, None) else EXIT_OK
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except (FileFormatError, RealizabilityError, NotHurwitzError, ValueError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (SolverError, InfeasibleError, np.linalg.LinAlgError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
