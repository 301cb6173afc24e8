"""Emergency braking behind a lead vehicle.

The lead brakes from 15 m/s to a stop at -8 m/s^2 while the follower
suffers a bounded acceleration error (|d| <= 1 m/s^2).  The nominal
cruise controller runs into the unsafe region; the constant-gain ISSf filter
and the tunable filter both keep the headway, but the constant gain keeps
intervening even while cruising.  Writes fig2.svg next to this script.
"""

from pathlib import Path

import numpy as np

from tissf.scenario import build, parse_config, run
from tissf.svg import figure2
from tissf.systems import truck_issf_controller, truck_nominal, truck_tissf_controller
from tissf import ExponentialEpsilon

configs = Path(__file__).resolve().parent.parent / "configs"
runs = {}
for name in ("nominal", "issf", "tissf"):
    cfg = parse_config(configs / f"fig2_truck_{name}.json")
    tr = run(build(cfg))[0]
    runs[name] = tr
    print(f"{name:8s} min h = {tr.h.min():7.3f}   min D = {tr.x[:, 0].min():6.2f} m   saturated steps = {int(tr.saturated.sum())}")

out = Path(__file__).with_name("fig2.svg")
out.write_text(figure2(runs, {"nominal": "#000000", "issf": "#1f77b4", "tissf": "#d62728"}))
print("wrote", out)

# How hard does each filter push while cruising at 15 m/s with spare headway?
sched = ExponentialEpsilon(1.0, 0.5, -5.0)
print("\nintervention |u - k| at v = v_L = 15 m/s")
for h in (0.0, 10.0, 16.87, 20.0):
    x = np.array([20.75 + h, 15.0, 15.0])
    k = truck_nominal(x)[0]
    print(f"  h = {h:5.2f}  ISSf(1.5): {abs(truck_issf_controller(x, 1.5)[0] - k):8.4f}"
          f"   TISSf(1, 0.5, -5): {abs(truck_tissf_controller(x, sched)[0] - k):10.4f}")
