"""Structure, schedule and target files; CSV, SVG and matrix output.

Files are JSON documents carrying a ``format_version`` field.  Node, member,
cluster and coordinate ids are 1-based on disk and 0-based in memory; the
conversion happens only here.

Structure file layout::

    {
      "format_version": 1,
      "nodes": [[x, y, z], ...],
      "members": [[tail, head, "bar" | "string"], ...],
      "clusters": [[member ids], ...],          # optional, default one per member
      "boundary": {"fixed": [coordinate ids],
                   "motion": {"coords": [...], "times": [...], "values": [[...]]}},
      "materials": {"name": {"preset": "steel-Q235", "kind": "linear"}, ...},
      "props": {"area": [...], "density": [...], "material": [...],
                "rest_length": [...], "damping": [...], "zeta": 0.01},
      "gravity": [ax, ay, az],
      "labels": [...],                           # optional
      "schedule": {...}, "control": {...}, "prestress": {...}   # optional
    }

Coordinate id of node i (1-based) along axis x, y, z is 3 (i - 1) + 1, 2, 3.
Props are per clustered element; scalars broadcast.  A material entry is
either a preset reference or ``{"kind": "linear", "E": ...}`` or
``{"kind": "multilinear-elastic" | "plastic", "breakpoints": [[strain, stress], ...]}``.
"""
from __future__ import annotations

import csv
import json
import os
from pathlib import Path

import numpy as np

from .materials import LINEAR, PRESETS, MaterialLaw, preset
from .model import BoundaryMotion, StructureModel, build_model
from .schedule import ActuationSchedule

FORMAT_VERSION = 1
AXES = "xyz"


class FormatError(ValueError):
    """A file does not follow the documented schema."""


# -- reading ---------------------------------------------------------------

def _load_json(path):
    path = Path(path)
    with open(path) as fh:  # FileNotFoundError propagates
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(doc, dict):
        raise FormatError(f"{path}: top level must be an object")
    v = doc.get("format_version")
    if v != FORMAT_VERSION:
        raise FormatError(f"{path}: unsupported format_version {v!r} (expected {FORMAT_VERSION})")
    return doc


def _need(doc, key, where="structure"):
    if key not in doc:
        raise FormatError(f"{where}: missing section {key!r}")
    return doc[key]


def material_from_dict(d: dict, name: str = "") -> MaterialLaw:
    if "preset" in d:
        if d["preset"] not in PRESETS:
            raise FormatError(f"material {name!r}: unknown preset {d['preset']!r}")
        return preset(d["preset"], d.get("kind", LINEAR))
    kind = d.get("kind", LINEAR)
    if kind == LINEAR:
        return MaterialLaw.linear(float(d["E"]), name)
    return MaterialLaw(kind, 0.0, np.asarray(d["breakpoints"], dtype=float), name)


def material_to_dict(law: MaterialLaw) -> dict:
    if law.name in PRESETS:
        ref = preset(law.name, law.kind)
        if ref.E == law.E and (law.breakpoints is None
                               or np.array_equal(ref.breakpoints, law.breakpoints)):
            return {"preset": law.name, "kind": law.kind}
    if law.kind == LINEAR:
        return {"kind": LINEAR, "E": law.E}
    return {"kind": law.kind, "breakpoints": np.asarray(law.breakpoints).tolist()}


def model_from_dict(doc: dict) -> StructureModel:
    """Build a model from a parsed structure document (ids 1-based)."""
    try:
        nodes = np.asarray(_need(doc, "nodes"), dtype=float).reshape(-1, 3)
        rows = _need(doc, "members")
        members = np.array([[int(r[0]) - 1, int(r[1]) - 1] for r in rows], dtype=int).reshape(-1, 2)
        member_kind = [str(r[2]) if len(r) > 2 else "string" for r in rows]
        clusters = doc.get("clusters")
        if clusters is None:
            clusters = [[m + 1] for m in range(len(rows))]
        clusters = [tuple(int(m) - 1 for m in c) for c in clusters]
        kinds = []
        for c in clusters:
            ks = {member_kind[m] for m in c if 0 <= m < len(member_kind)}
            if len(ks) > 1:
                raise FormatError(f"cluster {[m + 1 for m in c]} mixes member kinds")
            kinds.append(ks.pop() if ks else "string")
        bnd = doc.get("boundary", {})
        fixed = np.asarray(bnd.get("fixed", []), dtype=int) - 1
        motion = None
        if bnd.get("motion"):
            mo = bnd["motion"]
            motion = BoundaryMotion(np.asarray(mo["coords"], dtype=int) - 1, mo["times"], mo["values"])
        mats = {k: material_from_dict(v, k) for k, v in _need(doc, "materials").items()}
        props = _need(doc, "props")
        n_ec = len(clusters)
        mat_names = props["material"]
        if isinstance(mat_names, str):
            mat_names = [mat_names] * n_ec
        if len(mat_names) != n_ec:
            raise FormatError("props.material needs one entry per clustered element")
        try:
            materials = [mats[k] for k in mat_names]
        except KeyError as exc:
            raise FormatError(f"props.material refers to undefined material {exc}") from None
        model = build_model(nodes, members, kinds, clusters=clusters, fixed=fixed,
                            area=props["area"], density=props["density"],
                            rest_length=props.get("rest_length"), materials=materials,
                            damping=props.get("damping"), gravity=doc.get("gravity", (0, 0, 0)),
                            zeta=float(props.get("zeta", 0.0)), labels=doc.get("labels"),
                            motion=motion)
    except FormatError:
        raise
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise FormatError(f"structure: {type(exc).__name__}: {exc}") from exc
    for name in ("area", "density", "rest_length"):
        if len(getattr(model, name)) != model.n_ec:
            raise FormatError(f"props.{name} needs one entry per clustered element")
    return model


def model_to_dict(model: StructureModel) -> dict:
    kind_of = {}
    for c, k in zip(model.clusters, model.kinds):
        for m in c:
            kind_of[m] = k
    table, names = {}, []
    for law in model.materials:
        d = material_to_dict(law)
        key = next((k for k, v in table.items() if v == d), None)
        if key is None:
            key = law.name or f"material-{len(table) + 1}"
            if key in table:
                key = f"{key}-{len(table) + 1}"
            table[key] = d
        names.append(key)
    bnd = {"fixed": (model.fixed + 1).tolist()}
    if model.motion is not None:
        mo = model.motion
        bnd["motion"] = {"coords": (mo.coords + 1).tolist(), "times": mo.times.tolist(),
                         "values": mo.values.tolist()}
    props = {"area": model.area.tolist(), "density": model.density.tolist(), "material": names,
             "rest_length": model.rest_length.tolist(), "zeta": model.zeta}
    if model.damping is not None:
        props["damping"] = model.damping.tolist()
    doc = {
        "format_version": FORMAT_VERSION,
        "nodes": model.nodes.tolist(),
        "members": [[int(a) + 1, int(b) + 1, kind_of.get(i, "string")]
                    for i, (a, b) in enumerate(model.members)],
        "clusters": [[m + 1 for m in c] for c in model.clusters],
        "boundary": bnd,
        "materials": table,
        "props": props,
        "gravity": model.gravity.tolist(),
    }
    if model.labels is not None:
        doc["labels"] = list(model.labels)
    return doc


def schedule_from_dict(d: dict, n_ec: int | None = None) -> ActuationSchedule:
    try:
        sched = ActuationSchedule(d["times"], d["rest_lengths"], d.get("forces"))
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"schedule: {type(exc).__name__}: {exc}") from exc
    if n_ec is not None and sched.rest_lengths.shape[1] != n_ec:
        raise FormatError(f"schedule: rest_lengths rows need {n_ec} entries")
    return sched


def schedule_to_dict(s: ActuationSchedule) -> dict:
    d = {"times": s.times.tolist(), "rest_lengths": s.rest_lengths.tolist()}
    if s.forces is not None:
        d["forces"] = s.forces.tolist()
    return d


def control_from_dict(d: dict, model: StructureModel) -> dict:
    """Targets and gains as 0-based coordinate ids and arrays.

    ``{"targets": [{"node": 3, "axis": "y", "value": 0.4}, ...], "psi": ..., "phi": ...,
    "active": [cluster ids] (default: all strings), "t_end": ...}``
    """
    try:
        coords = [3 * (int(t["node"]) - 1) + AXES.index(t["axis"]) for t in d["targets"]]
        values = [float(t["value"]) for t in d["targets"]]
        active = d.get("active")
        if active is None:
            active = np.flatnonzero(model.is_string)
        else:
            active = np.asarray(active, dtype=int) - 1
        out = dict(coords=np.array(coords), target=np.array(values), psi=d["psi"], phi=d["phi"],
                   active=active)
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"control: {type(exc).__name__}: {exc}") from exc
    if "t_end" in d:
        out["t_end"] = float(d["t_end"])
    return out


def control_to_dict(coords, values, psi, phi, active, t_end=None) -> dict:
    targets = [{"node": int(c) // 3 + 1, "axis": AXES[int(c) % 3], "value": float(v)}
               for c, v in zip(coords, values)]
    d = {"targets": targets, "psi": float(psi), "phi": float(phi),
         "active": [int(a) + 1 for a in active]}
    if t_end is not None:
        d["t_end"] = float(t_end)
    return d


def read_structure(path):
    """Return ``(model, doc)``; `doc` keeps optional sections for the caller."""
    doc = _load_json(path)
    return model_from_dict(doc), doc


def read_schedule(path, n_ec=None):
    doc = _load_json(path)
    return schedule_from_dict(doc.get("schedule", doc), n_ec)


def read_control(path, model):
    doc = _load_json(path)
    return control_from_dict(doc.get("control", doc), model)


def write_json(path, doc):
    doc = {"format_version": FORMAT_VERSION, **doc}
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


# -- CSV ---------------------------------------------------------------------

def fmt(x) -> str:
    return repr(float(x))


def coordinate_headers(n_n, coords=None):
    coords = range(3 * n_n) if coords is None else coords
    return [f"n{c // 3 + 1}_{AXES[c % 3]}_m" for c in coords]


def write_csv(path, header, rows):
    """Write rows of numbers with a header; floats use their shortest repr."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([v if isinstance(v, (int, np.integer)) else fmt(v) for v in r])


def read_csv(path):
    """Return ``(header, data)`` with data as a float array."""
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        data = [[float(v) for v in row] for row in r]
    return header, np.array(data, dtype=float).reshape(-1, len(header))


def history_rows(model: StructureModel, hist):
    header = (["t_s"] + coordinate_headers(model.n_n)
              + [f"t_c{i + 1}_N" for i in range(model.n_ec)]
              + [f"l_0c{i + 1}_m" for i in range(model.n_ec)]
              + ["E_kin_J", "E_strain_J", "E_grav_J"])
    rows = np.hstack([hist.t[:, None], hist.n, hist.t_c, hist.l_0c, hist.energy])
    return header, rows


def path_rows(model: StructureModel, path):
    header = (["substep"] + coordinate_headers(model.n_n)
              + [f"t_c{i + 1}_N" for i in range(model.n_ec)]
              + [f"l_0c{i + 1}_m" for i in range(model.n_ec)]
              + ["residual_N", "iterations"])
    rows = [[k, *sol.n, *sol.t_c, *sol.state.l_0c, sol.residual, int(sol.iterations)]
            for k, sol in enumerate(path)]
    return header, rows


# -- matrices and plots --------------------------------------------------------

def dump_matrix(path, X):
    """Plain-text dense matrix: one row per line, space separated."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    np.savetxt(path, X, fmt="%.17g")


def load_matrix(path):
    return np.atleast_2d(np.loadtxt(path, dtype=float))


def svg_line_plot(path, x, series: dict, xlabel="", ylabel="", title="",
                  width=640, height=400):
    """Minimal SVG line plot of one or more series against `x`."""
    palette = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"]
    x = np.asarray(x, dtype=float)
    ys = {k: np.asarray(v, dtype=float) for k, v in series.items()}
    pad_l, pad_r, pad_t, pad_b = 70, 20, 30, 50
    x0, x1 = float(x.min()), float(x.max())
    allv = np.concatenate([v for v in ys.values()]) if ys else np.zeros(1)
    y0, y1 = float(np.min(allv)), float(np.max(allv))
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5
    W, H = width - pad_l - pad_r, height - pad_t - pad_b

    def px(v):
        return pad_l + (v - x0) / (x1 - x0) * W

    def py(v):
        return pad_t + (y1 - v) / (y1 - y0) * H

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'font-family="sans-serif" font-size="12">',
           f'<rect x="{pad_l}" y="{pad_t}" width="{W}" height="{H}" fill="none" stroke="#444"/>']
    for v in np.linspace(x0, x1, 5):
        out.append(f'<text x="{px(v):.1f}" y="{pad_t + H + 16}" text-anchor="middle">{v:.3g}</text>')
    for v in np.linspace(y0, y1, 5):
        out.append(f'<text x="{pad_l - 6}" y="{py(v) + 4:.1f}" text-anchor="end">{v:.4g}</text>')
    for i, (name, y) in enumerate(ys.items()):
        pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(x, y))
        col = palette[i % len(palette)]
        out.append(f'<polyline fill="none" stroke="{col}" stroke-width="1.5" points="{pts}"/>')
        out.append(f'<text x="{pad_l + W - 4}" y="{pad_t + 14 + 14 * i}" text-anchor="end" '
                   f'fill="{col}">{name}</text>')
    if title:
        out.append(f'<text x="{width / 2}" y="18" text-anchor="middle">{title}</text>')
    if xlabel:
        out.append(f'<text x="{pad_l + W / 2}" y="{height - 10}" text-anchor="middle">{xlabel}</text>')
    if ylabel:
        out.append(f'<text x="16" y="{pad_t + H / 2}" text-anchor="middle" '
                   f'transform="rotate(-90 16 {pad_t + H / 2})">{ylabel}</text>')
    out.append("</svg>")
    Path(path).write_text("\n".join(out) + "\n")


def ensure_dir(path):
    os.makedirs(path, exist_ok=True)
    return Path(path)
