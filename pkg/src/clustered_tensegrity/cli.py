"""Command-line interface (``cts``).

Every command reads a structure file (see :mod:`clustered_tensegrity.io`)
and writes CSV/SVG/matrix artifacts into ``--out``.  Exit codes::

    0 ok    1 file not found    2 parse error    3 validation failure
    4 solver failure    5 numeric divergence
"""
from __future__ import annotations

import argparse
import os
import sys
import warnings
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import io
from .assembly import assemble
from .control import ControlProblem, NNLSError, closed_loop_sim
from .dynamics import DivergenceError, integrate
from .linear import linearize, modal
from .model import validate
from .scenarios import KINDS, generate, levy_at, levy_design_areas
from .schedule import ActuationSchedule
from .statics import SolverError, design_prestress, prestress_modes, quasi_static_path

EXIT_OK, EXIT_NOT_FOUND, EXIT_PARSE, EXIT_INVALID, EXIT_SOLVER, EXIT_DIVERGED = range(6)


class ValidationFailed(Exception):
    pass


# -- helpers -------------------------------------------------------------------

def _load(path):
    model, doc = io.read_structure(path)
    report = validate(model)
    if not report.ok:
        raise ValidationFailed(str(report))
    return model, doc


def _schedule(args, model, doc):
    if getattr(args, "schedule", None):
        sched = io.read_schedule(args.schedule, model.n_ec)
    elif "schedule" in doc:
        sched = io.schedule_from_dict(doc["schedule"], model.n_ec)
    else:
        sched = ActuationSchedule.constant(model.rest_length)
    if getattr(args, "actuation_time", None):
        sched = sched.rescaled(args.actuation_time)
    return sched


def _run_defaults(doc):
    return doc.get("run", {})


def _threads():
    try:
        return max(1, int(os.environ.get("CTS_THREADS", "1")))
    except ValueError:
        return 1


def _parse_track(spec, n_n):
    """``"3:y"`` (1-based node) -> full coordinate index."""
    node, _, axis = spec.partition(":")
    node = int(node) - 1
    if not 0 <= node < n_n or axis not in io.AXES:
        raise io.FormatError(f"bad --track value {spec!r} (use NODE:AXIS, e.g. 3:y)")
    return 3 * node + io.AXES.index(axis)


def _dump(assembly, outdir):
    d = io.ensure_dir(Path(outdir) / "matrices")
    for name in ("M", "K", "D", "g", "A_2c", "A_1c", "B_lc", "K_T", "K_G", "K_E", "K_l0c",
                 "M_aa", "K_Taa", "D_aa"):
        io.dump_matrix(d / f"{name}.txt", np.atleast_2d(getattr(assembly, name)))
    return d


# -- commands ------------------------------------------------------------------

def cmd_validate(args):
    model, _ = io.read_structure(args.structure)
    report = validate(model)
    print(report)
    if not report.ok:
        return EXIT_INVALID
    print(f"nodes {model.n_n}, members {model.n_e}, clustered elements {model.n_ec}, "
          f"free coordinates {model.n_a}")
    return EXIT_OK


def cmd_prestress(args):
    model, doc = _load(args.structure)
    basis = prestress_modes(model)
    print(f"prestress modes: {basis.k}")
    anchors = [(int(a) - 1, float(f)) for a, f in doc.get("prestress", {}).get("anchors", [])]
    for spec in args.anchor or []:
        a, _, f = spec.partition("=")
        anchors.append((int(a) - 1, float(f)))
    out = io.ensure_dir(args.out)
    if not anchors:
        header = ["element"] + [f"mode{j + 1}" for j in range(basis.k)]
        rows = [[i + 1, *basis.basis[i]] for i in range(model.n_ec)]
        io.write_csv(out / "prestress_modes.csv", header, rows)
        return EXIT_OK
    t_c = design_prestress(basis, anchors, strings=model.is_string)
    labels = model.labels or ("",) * model.n_ec
    print(f"{'elem':>4} {'kind':>6} {'label':>10} {'t_c [N]':>14}")
    for i in range(model.n_ec):
        print(f"{i + 1:>4} {model.kinds[i]:>6} {labels[i]:>10} {t_c[i]:>14.6g}")
    io.write_csv(out / "prestress.csv", ["element", "t_c_N"],
                 [[i + 1, t_c[i]] for i in range(model.n_ec)])
    return EXIT_OK


def cmd_static(args):
    model, doc = _load(args.structure)
    run = _run_defaults(doc)
    sched = _schedule(args, model, doc)
    substeps = args.substeps or int(run.get("substeps", 20))
    path = quasi_static_path(model, sched, substeps, tol=args.tol)
    out = io.ensure_dir(args.out)
    header, rows = io.path_rows(model, path)
    io.write_csv(out / "static.csv", header, rows)
    last = path[-1]
    print(f"{substeps} substeps, iterations {sum(s.iterations for s in path)}, "
          f"final residual {last.residual:.3e} N")
    if args.plot:
        k = np.arange(len(path))
        coords = [_parse_track(s, model.n_n) for s in args.track] if args.track else []
        series = {h: [s.n[c] for s in path] for c, h in zip(coords, io.coordinate_headers(model.n_n, coords))}
        if series:
            io.svg_line_plot(out / "static_coords.svg", k, series, "substep", "m")
        io.svg_line_plot(out / "static_forces.svg", k,
                         {f"t_c{i + 1}": [s.t_c[i] for s in path] for i in range(model.n_ec)},
                         "substep", "N")
    if args.dump_matrices:
        _dump(last.assembly, out)
    return EXIT_OK


def _dynamic_run(model, sched, t_end, dt, stride, zeta):
    if zeta is not None:
        model = model.with_(zeta=zeta)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        hist = integrate(model, model.initial_state(), sched, t_end, dt, stride=stride)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    return model, hist


def cmd_dynamic(args):
    model, doc = _load(args.structure)
    run = _run_defaults(doc)
    sched = _schedule(args, model, doc)
    dt = args.dt or float(run.get("dt", 1e-4))
    t_end = args.t_end or float(run.get("t_end", sched.t_final))
    model, hist = _dynamic_run(model, sched, t_end, dt, args.stride, args.zeta)
    out = io.ensure_dir(args.out)
    header, rows = io.history_rows(model, hist)
    io.write_csv(out / "dynamic.csv", header, rows)
    print(f"{len(hist)} samples to t = {hist.t[-1]:.6g} s")
    if args.plot:
        coords = [_parse_track(s, model.n_n) for s in args.track] if args.track else []
        for c, h in zip(coords, io.coordinate_headers(model.n_n, coords)):
            io.svg_line_plot(out / f"dynamic_{h}.svg", hist.t, {h: hist.n[:, c]}, "t [s]", "m")
        io.svg_line_plot(out / "dynamic_forces.svg", hist.t,
                         {f"t_c{i + 1}": hist.t_c[:, i] for i in range(model.n_ec)}, "t [s]", "N")
    if args.dump_matrices:
        _dump(assemble(model, hist.final_state), out)
    return EXIT_OK


def cmd_modal(args):
    model, _ = _load(args.structure)
    res = modal(model, rigid_tol=args.rigid_tol, tangent=args.tangent)
    print(f"{'mode':>4} {'f [Hz]':>14} {'omega [rad/s]':>14}  note")
    for i, (w, rig) in enumerate(zip(res.omega, res.rigid)):
        note = "rigid" if rig else ("unstable" if w < 0 else "")
        print(f"{i + 1:>4} {w / (2 * np.pi):>14.6g} {w:>14.6g}  {note}")
    out = io.ensure_dir(args.out)
    io.write_csv(out / "frequencies.csv", ["mode", "f_Hz", "omega_rad_s", "rigid"],
                 [[i + 1, w / (2 * np.pi), w, int(r)] for i, (w, r) in enumerate(zip(res.omega, res.rigid))])
    # rows are free coordinates (1-based ids), columns mass-normalized shapes
    header = ["coordinate"] + [f"mode{j + 1}" for j in range(res.shapes.shape[1])]
    io.write_csv(out / "modes.csv", header,
                 [[int(c) + 1, *row] for c, row in zip(model.free, res.shapes)])
    if args.dump_matrices:
        _dump(assemble(model, model.initial_state(), tangent=args.tangent), out)
    return EXIT_OK


def cmd_linearize(args):
    model, _ = _load(args.structure)
    lin = linearize(model, tangent=args.tangent)
    out = io.ensure_dir(args.out)
    for name in ("A", "B", "B_b", "M_aa", "D_aa", "K_Taa"):
        io.dump_matrix(out / f"{name}.txt", getattr(lin, name))
    print(f"state dimension {lin.A.shape[0]}, inputs {lin.B.shape[1]}")
    return EXIT_OK


def cmd_control(args):
    model, doc = _load(args.structure)
    run = _run_defaults(doc)
    if args.target:
        spec = io.read_control(args.target, model)
    elif "control" in doc:
        spec = io.control_from_dict(doc["control"], model)
    else:
        raise io.FormatError("no control targets: pass --target or add a 'control' section")
    prob = ControlProblem(spec["coords"], spec["target"], args.psi or spec["psi"],
                          args.phi or spec["phi"], spec["active"])
    dt = args.dt or float(run.get("dt", 1e-4))
    t_end = args.t_end or spec.get("t_end", 2.0)
    hist = closed_loop_sim(model, model.initial_state(), prob, t_end, dt, stride=args.stride)
    out = io.ensure_dir(args.out)
    ex = hist.extra
    k = len(ex["t"])
    ncoord = io.coordinate_headers(model.n_n, prob.coords)
    header = (["t_s"] + [f"e{j + 1}_m" for j in range(len(prob.coords))] + ncoord
              + [f"t_c{i + 1}_N" for i in prob.active] + [f"l_0c{i + 1}_m" for i in prob.active]
              + ["residual_m_s2"])
    rows = np.hstack([hist.t[:k, None], ex["e"], hist.n[:k][:, prob.coords], ex["t_c_act"],
                      ex["l_0c_act"], ex["residual"][:, None]])
    io.write_csv(out / "control.csv", header, rows)
    print(f"final error {np.abs(hist.n[-1, prob.coords] - spec['target']).max():.3e} m, "
          f"max allocation residual {np.max(ex['residual']):.3e}")
    if args.plot:
        io.svg_line_plot(out / "control_targets.svg", hist.t,
                         {h: hist.n[:, c] for c, h in zip(prob.coords, ncoord)}, "t [s]", "m")
        io.svg_line_plot(out / "control_forces.svg", ex["t"],
                         {f"t_c{i + 1}": ex["t_c_act"][:, j] for j, i in enumerate(prob.active)},
                         "t [s]", "N")
    return EXIT_OK


def _scenario_doc(kind, params):
    model, sched, fx = generate(kind, **params)
    doc = io.model_to_dict(model)
    doc["schedule"] = io.schedule_to_dict(sched)
    doc["prestress"] = {"anchors": [[int(a) + 1, float(f)] for a, f in fx["anchors"]]}
    doc["run"] = {"t_end": float(fx["t_end"]), "dt": float(fx["dt"]), "substeps": int(fx["substeps"])}
    c = fx.get("control")
    if c:
        coords = [3 * n + io.AXES.index(c["axis"]) for n in c["nodes"]]
        doc["control"] = io.control_to_dict(coords, [c["target"]] * len(coords), c["psi"], c["phi"],
                                            c["active"], c.get("t_end"))
    return doc


def _param(s):
    """``NAME=VALUE`` with VALUE an int, a float or a comma-separated tuple."""
    k, sep, v = s.partition("=")
    if not sep:
        raise io.FormatError(f"bad --param {s!r} (use NAME=VALUE)")
    try:
        if "," in v:
            return k, tuple(float(x) for x in v.split(","))
        return k, int(v) if v.lstrip("-").isdigit() else float(v)
    except ValueError:
        if v in ("true", "false"):
            return k, v == "true"
        raise io.FormatError(f"bad --param {s!r}") from None


def cmd_scenario(args):
    params = dict(_param(p) for p in args.param or [])
    doc = _scenario_doc(args.kind, params)
    doc.pop("format_version")
    io.write_json(args.out, doc)
    print(f"wrote {args.out}")
    return EXIT_OK


def cmd_sweep(args):
    """Independent runs in parallel (thread count from CTS_THREADS)."""
    out = io.ensure_dir(args.out)
    nthreads = _threads()
    if args.what == "levy":
        cs = np.linspace(args.c_start, args.c_end, args.count)
        areas = levy_design_areas()

        def one(c):
            m, t_c, _ = levy_at(float(c), areas=areas)
            return t_c, m.rest_length

        with ThreadPoolExecutor(nthreads) as ex:
            res = list(ex.map(one, cs))
        n_ec = len(res[0][0])
        header = ["c"] + [f"t_c{i + 1}_N" for i in range(n_ec)] + [f"l_0c{i + 1}_m" for i in range(n_ec)]
        io.write_csv(out / "levy_sweep.csv", header, [[c, *t, *l] for c, (t, l) in zip(cs, res)])
        print(f"{len(cs)} deployment ratios, {nthreads} thread(s)")
        return EXIT_OK
    model, doc = _load(args.structure)
    run = _run_defaults(doc)
    base = _schedule(args, model, doc)
    dt = args.dt or float(run.get("dt", 1e-4))
    times = [float(x) for x in args.times.split(",")]
    track = _parse_track(args.track[0], model.n_n) if args.track else 0

    def one(T):
        sched = base.rescaled(0.5 * T)
        _, hist = _dynamic_run(model, sched, T, dt, args.stride, None)
        return hist.n[-1, track]

    with ThreadPoolExecutor(nthreads) as ex:
        finals = list(ex.map(one, times))
    io.write_csv(out / "speed_sweep.csv", ["T_s", io.coordinate_headers(model.n_n, [track])[0]],
                 [[T, v] for T, v in zip(times, finals)])
    for T, v in zip(times, finals):
        print(f"T = {T:g} s: {v:.6g}")
    return EXIT_OK


# -- parser --------------------------------------------------------------------

def build_parser():
    p = argparse.ArgumentParser(prog="cts", description="Clustered tensegrity statics, dynamics and control")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, out="."):
        sp.add_argument("structure", help="structure file (JSON)")
        sp.add_argument("--out", default=out, help="output directory")

    sp = sub.add_parser("validate", help="check a structure file")
    sp.add_argument("structure")
    sp.set_defaults(func=cmd_validate)

    sp = sub.add_parser("prestress", help="prestress modes and anchored design")
    common(sp)
    sp.add_argument("--anchor", action="append", metavar="ELEM=FORCE",
                    help="anchor a clustered element force (1-based id; repeatable)")
    sp.set_defaults(func=cmd_prestress)

    sp = sub.add_parser("static", help="quasi-static actuation path")
    common(sp)
    sp.add_argument("--schedule", help="schedule file (default: embedded or constant)")
    sp.add_argument("--substeps", type=int)
    sp.add_argument("--tol", type=float)
    sp.add_argument("--track", action="append", metavar="NODE:AXIS")
    sp.add_argument("--plot", action="store_true", help="write SVG line plots")
    sp.add_argument("--dump-matrices", action="store_true")
    sp.set_defaults(func=cmd_static)

    sp = sub.add_parser("dynamic", help="nonlinear time integration")
    common(sp)
    sp.add_argument("--schedule")
    sp.add_argument("--actuation-time", type=float, help="stretch the schedule to this duration (s)")
    sp.add_argument("--dt", type=float)
    sp.add_argument("--t-end", type=float)
    sp.add_argument("--stride", type=int, default=1)
    sp.add_argument("--zeta", type=float, help="global damping scale (default: file value)")
    sp.add_argument("--track", action="append", metavar="NODE:AXIS")
    sp.add_argument("--plot", action="store_true")
    sp.add_argument("--dump-matrices", action="store_true")
    sp.set_defaults(func=cmd_dynamic)

    sp = sub.add_parser("modal", help="natural frequencies and mode shapes")
    common(sp)
    sp.add_argument("--rigid-tol", type=float, default=1e-5)
    sp.add_argument("--tangent", choices=("standard", "consistent"), default="standard")
    sp.add_argument("--dump-matrices", action="store_true")
    sp.set_defaults(func=cmd_modal)

    sp = sub.add_parser("linearize", help="state-space matrices A, B")
    common(sp)
    sp.add_argument("--tangent", choices=("standard", "consistent"), default="standard")
    sp.set_defaults(func=cmd_linearize)

    sp = sub.add_parser("control", help="closed-loop shape control")
    common(sp)
    sp.add_argument("--target", help="target file (default: embedded 'control' section)")
    sp.add_argument("--dt", type=float)
    sp.add_argument("--t-end", type=float)
    sp.add_argument("--stride", type=int, default=100)
    sp.add_argument("--psi", type=float)
    sp.add_argument("--phi", type=float)
    sp.add_argument("--plot", action="store_true")
    sp.set_defaults(func=cmd_control)

    sp = sub.add_parser("scenario", help="generate benchmark structures")
    ssub = sp.add_subparsers(dest="action", required=True)
    g = ssub.add_parser("gen", help="write a scenario structure file")
    g.add_argument("kind", choices=KINDS)
    g.add_argument("--out", required=True)
    g.add_argument("--param", action="append", metavar="NAME=VALUE")
    g.set_defaults(func=cmd_scenario)

    sp = sub.add_parser("sweep", help="parallel parameter sweeps (threads: CTS_THREADS)")
    sp.add_argument("what", choices=("levy", "speed"))
    sp.add_argument("structure", nargs="?", help="structure file (speed sweep)")
    sp.add_argument("--out", default=".")
    sp.add_argument("--c-start", type=float, default=0.2)
    sp.add_argument("--c-end", type=float, default=0.8)
    sp.add_argument("--count", type=int, default=13)
    sp.add_argument("--times", default="0.5,1,2,4", help="actuation periods T (s)")
    sp.add_argument("--schedule")
    sp.add_argument("--dt", type=float)
    sp.add_argument("--stride", type=int, default=1000)
    sp.add_argument("--track", action="append", metavar="NODE:AXIS")
    sp.set_defaults(func=cmd_sweep)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)  # usage errors exit with status 2
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"error: file not found: {exc.filename or exc}", file=sys.stderr)
        return EXIT_NOT_FOUND
    except io.FormatError as exc:
        print(f"error: parse: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except ValidationFailed as exc:
        print(f"error: validation failed\n{exc}", file=sys.stderr)
        return EXIT_INVALID
    except DivergenceError as exc:
        print(f"error: divergence: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (SolverError, NNLSError, np.linalg.LinAlgError) as exc:
        print(f"error: solver: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
