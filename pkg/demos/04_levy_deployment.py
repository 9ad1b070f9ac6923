"""
Levy dome: deploying by shortening clustered cables
===================================================

The dome has twelve sectors.  Each hoop, ridge and diagonal ring is split
into three long cables, so 45 clustered elements drive 156 members.  The
inner ring radius ``c R`` opens from ``c = 0.2`` to ``c = 0.8``.
"""
from pathlib import Path

import numpy as np

from clustered_tensegrity import io
from clustered_tensegrity.scenarios import generate, levy_at, levy_design_areas
from clustered_tensegrity.statics import quasi_static_path

out = io.ensure_dir(Path(__file__).with_name("out"))

# member areas are sized once, at c = 0.5, and kept for every ratio
areas = levy_design_areas()
cs = np.linspace(0.2, 0.8, 13)
forces = {}
for c in cs:
    model, t_c, basis = levy_at(c, areas=areas)
    labels = np.array(model.labels)
    for g in ("IB", "OB", "IHS", "OHS", "THS"):
        forces.setdefault(g, []).append(t_c[labels == g][0] / 1e3)
print("group force (kN) against deployment ratio")
print("   c  " + "".join(f"{g:>9}" for g in forces))
for i, c in enumerate(cs):
    print(f"{c:5.2f} " + "".join(f"{forces[g][i]:9.2f}" for g in forces))
io.svg_line_plot(out / "levy_forces.svg", cs, forces, "c", "kN", "Prestress over deployment")

# %%
# Follow the deployment quasi-statically.  The schedule passes through the
# designed rest lengths, so every cable stays taut on the way.
model, schedule, fixtures = generate("levy")
path = quasi_static_path(model, schedule, fixtures["substeps"])
strings = model.is_string
low = min(s.t_c[strings].min() for s in path)
print(f"{len(path) - 1} substeps, max residual {max(s.residual for s in path):.1e} N, "
      f"smallest string force {low / 1e3:.2f} kN")
ib = model.labels.index("IB")
print(f"inner bar force: {path[0].t_c[ib] / 1e3:.2f} -> {path[-1].t_c[ib] / 1e3:.2f} kN")
