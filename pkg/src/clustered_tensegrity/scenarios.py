"""Generators for the benchmark structures.

``tbar``
    Planar T-bar: two crossed bars and four strings, the two upper strings
    joined over a pulley at the top node into one clustered string.
``tower2``
    Two-stage prism tower with the eight vertical strings clustered into four
    (pulleys at the middle level), bottom nodes pinned.
``levy``
    Levy cable dome whose string groups are each split into three clustered
    strings.

Every generator returns the prestressed model, a default actuation schedule
and a dict of fixture values used by the tests and the CLI.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .materials import preset
from .model import BAR, STRING, StructureModel, build_model, node_coordinates, validate
from .schedule import ActuationSchedule
from .statics import design_prestress, prestress_modes, prestressed_model

KINDS = ("tbar", "tower2", "levy")

BAR_STEEL = "steel-Q235"
CABLE_STEEL = "steel-cable"


@dataclass
class ScenarioSpec:
    kind: str
    params: dict = field(default_factory=dict)


@dataclass
class Scenario:
    model: StructureModel
    schedule: ActuationSchedule
    fixtures: dict

    def __iter__(self):
        return iter((self.model, self.schedule, self.fixtures))


def generate(spec: ScenarioSpec | str, **params) -> Scenario:
    if isinstance(spec, str):
        spec = ScenarioSpec(spec, params)
    else:
        spec = ScenarioSpec(spec.kind, {**spec.params, **params})
    try:
        gen = {"tbar": tbar, "tower2": tower2, "levy": levy}[spec.kind]
    except KeyError:
        raise ValueError(f"unknown scenario kind {spec.kind!r}; choose from {', '.join(KINDS)}") from None
    sc = gen(**spec.params)
    report = validate(sc.model)
    if not report.ok:  # pragma: no cover - generators are tested
        raise ValueError(f"generated model invalid:\n{report}")
    return sc


def _materials(kinds):
    bar, cable = preset(BAR_STEEL), preset(CABLE_STEEL)
    return tuple(bar if k == BAR else cable for k in kinds)


def _density(kinds):
    return np.array([7870.0 for _ in kinds])


def _prestress(model, anchors):
    basis = prestress_modes(model)
    t_c = design_prestress(basis, anchors, strings=model.is_string)
    return prestressed_model(model, t_c), t_c, basis


# -- T-bar -----------------------------------------------------------------

def tbar(scale: float = 2.0, T: float = 1.0, bar1_force: float = -100.0,
         zeta: float = 0.01, cluster: bool = True) -> Scenario:
    """Planar clustered T-bar.

    Node 1 and 3 are the ends of the horizontal bar (bar-1), 2 and 4 the
    bottom and top of the vertical bar (bar-2).  Strings 3 (1-4) and 4 (4-3)
    form the clustered string over a pulley at node 4; strings 5 (1-2) and
    6 (2-3) are individual.  `scale` multiplies a layout with bar lengths 1 m
    and 2 m.  All Z coordinates are constrained, so the model has three rigid
    in-plane modes.
    """
    h = 0.5 * scale
    nodes = [(-h, 0, 0), (0, -scale, 0), (h, 0, 0), (0, scale, 0)]
    members = [(0, 2), (1, 3), (0, 3), (3, 2), (0, 1), (1, 2)]
    if cluster:
        clusters = [(0,), (1,), (2, 3), (4,), (5,)]
        kinds = (BAR, BAR, STRING, STRING, STRING)
        labels = ("bar-1", "bar-2", "string-34", "string-5", "string-6")
    else:
        clusters = [(m,) for m in range(6)]
        kinds = (BAR, BAR, STRING, STRING, STRING, STRING)
        labels = ("bar-1", "bar-2", "string-3", "string-4", "string-5", "string-6")
    area = np.array([1.57e-4 if lab == "bar-1" else 4.447e-4 if lab == "bar-2" else 9.138e-7
                     for lab in labels])
    fixed = node_coordinates(range(4), "z")
    model = build_model(nodes, members, kinds, clusters=clusters, fixed=fixed, area=area,
                        density=_density(kinds), materials=_materials(kinds), zeta=zeta,
                        labels=labels)
    model, t_c, basis = _prestress(model, [(0, bar1_force)])

    delta = np.zeros(model.n_ec)
    if cluster:
        delta[2], delta[3], delta[4] = -2.0, 0.5, 0.5
    else:
        # shortening split between the two upper segments
        l3, l4 = model.rest_length[2], model.rest_length[3]
        delta[2], delta[3] = -2.0 * l3 / (l3 + l4), -2.0 * l4 / (l3 + l4)
        delta[4], delta[5] = 0.5, 0.5
    l0 = model.rest_length
    sched = ActuationSchedule.ramp(l0, l0 + delta, 0.5 * T)
    fixtures = dict(
        prestress=t_c,
        anchors=[(0, bar1_force)],
        ref_string_force=200.0,
        ref_bar2_force=-111.8,
        freq4_hz=1.4781,
        rigid_modes=3,
        substeps=20,
        t_end=T,
        dt=1e-4,
        track_node=2,
        control=dict(nodes=[0, 2], axis="y", target=0.4, phi=50.0, psi=2 * np.sqrt(50.0),
                     active=[i for i, k in enumerate(kinds) if k == STRING], t_end=2.5),
    )
    return Scenario(model, sched, fixtures)


# -- two-stage tower -------------------------------------------------------

def tower2(radius: float = 0.5, height: float = 1.0, twist_deg: float = 45.0,
           anchor_force: float = 100.0, shorten: float = 0.7, T: float = 1.0,
           zeta: float = 0.01) -> Scenario:
    """Two-stage square prism tower.

    Level L (0, 1, 2) holds four nodes at angles ``90 i + L * twist``; bars
    run from node i of one level to node i + 1 of the next, vertical strings
    from node i of one level to node i of the next and every pair stacked
    through the middle level is clustered.  Bottom nodes are pinned.
    """
    tw = np.radians(twist_deg)
    nodes = [(radius * np.cos(0.5 * np.pi * i + L * tw), radius * np.sin(0.5 * np.pi * i + L * tw),
              L * height) for L in range(3) for i in range(4)]
    members, groups = [], {}

    def add(g, a, b):
        groups.setdefault(g, []).append(len(members))
        members.append((a, b))

    for s in range(2):
        for i in range(4):
            add("bar", 4 * s + i, 4 * (s + 1) + (i + 1) % 4)
    for s in range(2):
        for i in range(4):
            add("vertical", 4 * s + i, 4 * (s + 1) + i)
    for g, base in (("bottom", 0), ("middle", 4), ("top", 8)):
        for i in range(4):
            add(g, base + i, base + (i + 1) % 4)
    clusters, labels = [], []
    clusters += [(m,) for m in groups["bar"]]
    labels += ["bar"] * 8
    v = groups["vertical"]
    clusters += [(v[i], v[4 + i]) for i in range(4)]
    labels += ["vertical"] * 4
    for g in ("bottom", "middle", "top"):
        clusters += [(m,) for m in groups[g]]
        labels += [g] * 4
    kinds = tuple(BAR if g == "bar" else STRING for g in labels)
    areas = {"bar": 2.53e-4, "vertical": 8.17e-7, "bottom": 8.17e-7, "middle": 1e-8, "top": 5.78e-7}
    area = np.array([areas[g] for g in labels])
    model = build_model(nodes, members, kinds, clusters=clusters, fixed=node_coordinates(range(4)),
                        area=area, density=_density(kinds), materials=_materials(kinds), zeta=zeta,
                        labels=tuple(labels))
    bottom = [i for i, g in enumerate(labels) if g == "bottom"]
    vert = labels.index("vertical")
    anchors = [(i, anchor_force) for i in bottom] + [(vert, anchor_force)]
    model, t_c, basis = _prestress(model, anchors)
    delta = np.array([-shorten if g == "vertical" else 0.0 for g in labels])
    sched = ActuationSchedule.ramp(model.rest_length, model.rest_length + delta, 0.5 * T)
    fixtures = dict(
        prestress=t_c,
        anchors=anchors,
        prestress_modes=5,
        substeps=20,
        t_end=T,
        dt=1e-4,
        track_node=8,
        control=dict(nodes=[8, 9, 10, 11], axis="z", target=height, phi=100.0,
                     psi=2 * np.sqrt(100.0),
                     active=[i for i, g in enumerate(labels) if g == "vertical"], t_end=3.0),
    )
    return Scenario(model, sched, fixtures)


# -- Levy dome -------------------------------------------------------------

LEVY_GROUPS = ("OB", "IB", "ORS", "ODS", "IRS", "IDS", "OHS", "IHS", "THS")


def levy_geometry(R=30.0, c=0.5, p=12, z=(3.0, -3.0, 5.0, -1.0)):
    """Nodes, members and per-group member lists of a Levy dome.

    Pinned nodes sit on the outer ring of radius R; outer top/bottom nodes at
    radius ``(R + cR) / 2`` rotated half a sector; inner top/bottom nodes at
    radius ``cR``.  z gives the heights of outer top, outer bottom, inner top
    and inner bottom nodes.
    """
    z1, z2, z3, z4 = z
    r2 = c * R
    r1 = 0.5 * (R + r2)
    th = 2 * np.pi * np.arange(p) / p
    half = np.pi / p
    ring = lambda r, a, h: np.column_stack([r * np.cos(a), r * np.sin(a), np.full(p, h)])  # noqa: E731
    nodes = np.vstack([ring(R, th, 0.0), ring(r1, th + half, z1), ring(r1, th + half, z2),
                       ring(r2, th, z3), ring(r2, th, z4)])
    PN, OTN, OBN, ITN, IBN = (np.arange(p) + k * p for k in range(5))
    nxt = lambda i: (i + 1) % p  # noqa: E731
    prv = lambda i: (i - 1) % p  # noqa: E731
    members, groups = [], {g: [] for g in LEVY_GROUPS}

    def add(g, a, b):
        groups[g].append(len(members))
        members.append((int(a), int(b)))

    for i in range(p):
        add("OB", OBN[i], OTN[i])
    for i in range(p):
        add("IB", IBN[i], ITN[i])
    for i in range(p):
        add("ORS", PN[i], OTN[i]); add("ORS", OTN[i], PN[nxt(i)])  # noqa: E702
    for i in range(p):
        add("ODS", PN[i], OBN[i]); add("ODS", OBN[i], PN[nxt(i)])  # noqa: E702
    for i in range(p):
        add("IRS", OTN[prv(i)], ITN[i]); add("IRS", ITN[i], OTN[i])  # noqa: E702
    for i in range(p):
        add("IDS", OTN[prv(i)], IBN[i]); add("IDS", IBN[i], OTN[i])  # noqa: E702
    for i in range(p):
        add("OHS", OBN[i], OBN[nxt(i)])
    for i in range(p):
        add("IHS", IBN[i], IBN[nxt(i)])
    for i in range(p):
        add("THS", ITN[i], ITN[nxt(i)])
    return nodes, np.array(members), groups, PN


def _levy_model(R, c, p, z, area_of):
    nodes, members, groups, PN = levy_geometry(R, c, p, z)
    clusters, labels = [], []
    for g in LEVY_GROUPS:
        ms = groups[g]
        if g in ("OB", "IB"):
            clusters += [(m,) for m in ms]
            labels += [g] * len(ms)
        else:
            k = len(ms) // 3
            chunks = [ms[j * k:(j + 1) * k] for j in range(2)] + [ms[2 * k:]]
            clusters += [tuple(ch) for ch in chunks]
            labels += [g] * 3
    kinds = tuple(BAR if g in ("OB", "IB") else STRING for g in labels)
    area = np.array([area_of[g] for g in labels])
    return build_model(nodes, members, kinds, clusters=clusters, fixed=node_coordinates(PN),
                       area=area, density=_density(kinds), materials=_materials(kinds),
                       labels=tuple(labels))


def levy_design_areas(R=30.0, c=0.5, p=12, z=(3.0, -3.0, 5.0, -1.0), ib_force=-5000.0):
    """Group areas sized so the prestress at `c` is 10 % of the yield stress."""
    unit = {g: 1.0 for g in LEVY_GROUPS}
    m = _levy_model(R, c, p, z, unit)
    t_c = design_prestress(prestress_modes(m), [(m.labels.index("IB"), ib_force)],
                           strings=m.is_string)
    out = {}
    for g in LEVY_GROUPS:
        sy = (435e6 if g in ("OB", "IB") else 1223.5e6)
        f = max(abs(t_c[i]) for i, lab in enumerate(m.labels) if lab == g)
        out[g] = f / (0.1 * sy)
    return out


def levy_at(c, R=30.0, p=12, z=(3.0, -3.0, 5.0, -1.0), ib_force=-5000.0, areas=None):
    """Prestressed Levy dome at deployment ratio `c` with fixed group areas."""
    areas = levy_design_areas(R, 0.5, p, z, ib_force) if areas is None else areas
    m = _levy_model(R, c, p, z, areas)
    ib = m.labels.index("IB")
    return _prestress(m, [(ib, ib_force)])


def levy(R: float = 30.0, c: float = 0.2, p: int = 12, z=(3.0, -3.0, 5.0, -1.0),
         ib_force: float = -5000.0, c_end: float = 0.8, T: float = 10.0,
         zeta: float = 0.01, knots: int = 21) -> Scenario:
    """Clustered Levy dome at deployment ratio `c`.

    The default schedule passes through the rest lengths of the prestressed
    dome at `knots` evenly spaced ratios from `c` to `c_end`, reaching `c_end`
    at ``T / 2``.
    """
    if not 0.0 < c < 1.0 or not 0.0 < c_end < 1.0:
        raise ValueError("deployment ratio must lie in (0, 1)")
    if p < 3:
        raise ValueError("complexity p must be at least 3")
    areas = levy_design_areas(R, 0.5, p, tuple(z), ib_force)
    model, t_c, basis = levy_at(c, R, p, tuple(z), ib_force, areas)
    model = model.with_(zeta=zeta)
    # knots on the designed rest lengths: straight interpolation between the
    # two end designs slackens most hoop and diagonal strings on the way
    cs = np.linspace(c, c_end, knots)
    l0 = [levy_at(ci, R, p, tuple(z), ib_force, areas)[0].rest_length for ci in cs]
    l0[0] = model.rest_length
    sched = ActuationSchedule(np.linspace(0.0, 0.5 * T, knots), np.array(l0))
    fixtures = dict(prestress=t_c, anchors=[(model.labels.index("IB"), ib_force)],
                    prestress_modes=1, areas=areas, c=c, c_end=c_end, substeps=20,
                    t_end=T, dt=1e-4, track_node=3 * p)
    return Scenario(model, sched, fixtures)
