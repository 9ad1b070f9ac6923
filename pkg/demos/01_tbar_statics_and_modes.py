"""
T-bar: prestress, equilibrium and natural frequencies
=====================================================

The T-bar is the smallest clustered structure in the package: two crossed
bars, four strings, and the two lower strings joined into one cable that
runs over a frictionless pulley at the bottom node.
"""
import numpy as np

from clustered_tensegrity.linear import modal
from clustered_tensegrity.scenarios import generate
from clustered_tensegrity.statics import prestress_modes, quasi_static_path

model, schedule, fixtures = generate("tbar")
print(f"{model.n_n} nodes, {model.n_e} members, {model.n_ec} clustered elements")

# one self-stress state; anchoring bar 1 at -100 N fixes the rest
basis = prestress_modes(model)
print("prestress modes:", basis.k)
for label, t in zip(model.labels, fixtures["prestress"]):
    print(f"  {label:>10}  {t:9.3f} N")

# %%
# Small vibrations about the prestressed state.  Three rigid-body modes
# remain because only the out-of-plane coordinates are restrained.
res = modal(model)
for i, (f, rigid) in enumerate(zip(res.frequencies_hz, res.rigid)):
    print(f"  mode {i + 1}: {f:10.4f} Hz {'(rigid)' if rigid else ''}")

# the exact derivative of the internal force gives a softer pulley mode
res_c = modal(model, tangent="consistent")
print("first flexible mode, consistent tangent: "
      f"{res_c.frequencies_hz[~res_c.rigid][0]:.4f} Hz")

# %%
# Shorten the clustered cable and follow the equilibrium path.
path = quasi_static_path(model, schedule, fixtures["substeps"])
node = fixtures["track_node"]
y = np.array([s.n[3 * node + 1] for s in path])
print(f"node {node + 1} y: {y[0]:.4f} m -> {y[-1]:.4f} m over {len(path) - 1} substeps")
print(f"largest equilibrium residual along the path: {max(s.residual for s in path):.2e} N")
