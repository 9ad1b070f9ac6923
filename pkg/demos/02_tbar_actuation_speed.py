"""
T-bar: how fast can the cable be pulled?
========================================

The same rest-length change is applied over different durations and the
dynamic response is compared with the quasi-static path.  Slow actuation
stays close to equilibrium; fast actuation leaves the pulley mode ringing.
"""
import warnings
from pathlib import Path

import numpy as np

from clustered_tensegrity import io
from clustered_tensegrity.dynamics import StepSizeWarning, integrate
from clustered_tensegrity.scenarios import generate
from clustered_tensegrity.statics import quasi_static_path

out = io.ensure_dir(Path(__file__).with_name("out"))
model, schedule, fixtures = generate("tbar")
node = fixtures["track_node"]
k = 3 * node + 1

y_qs = quasi_static_path(model, schedule, fixtures["substeps"])[-1].n[k]
print(f"quasi-static end position: {y_qs:.6f} m")

# the bar axial modes are far above what matters here
warnings.simplefilter("ignore", StepSizeWarning)
series = {}
for T in (0.5, 1.0, 2.0, 4.0):
    hist = integrate(model, model.initial_state(), schedule.rescaled(0.5 * T), T, 1e-4, stride=50)
    y = hist.coordinate(node, "y")
    after = hist.t >= 0.5 * T
    ring = np.max(np.abs(y[after] - y_qs))
    print(f"T = {T:3.1f} s: y(T) = {y[-1]:.6f} m, "
          f"error {abs(y[-1] - y_qs) / abs(y_qs):6.2%}, ringing {ring * 1e3:5.2f} mm")
    series[f"T={T:g}"] = (hist.t / T, y)

# %%
# Plot on normalized time so the four runs overlay.
t_ref = np.linspace(0, 1, 400)
io.svg_line_plot(out / "tbar_speed.svg", t_ref,
                 {name: np.interp(t_ref, tt, yy) for name, (tt, yy) in series.items()},
                 "t / T", "node y [m]", "Actuation speed")
print("wrote", out / "tbar_speed.svg")
