"""
Surface line versus dam column
==============================

Run the fixed-sensor experiment on the default synthetic source: ten
sensors along the surface or ten down the dam face, six intake depths.
Results land in ``fixed_demo/`` as CSV and JSON.
"""

from resrecon.config import parse_config
from resrecon.experiments import export, run_fixed_sensors

cfg = parse_config({"methods": ["gappy_pod", "sparse_raw"], "k_list": [2], "p_list": [10], "trials": 3})
report = run_fixed_sensors(cfg)
export(report, "fixed_demo", config=cfg)

# %%
print(f"{'method':12s} {'intake':>6s} {'surface':>8s} {'dam':>8s} {'spread':>8s}")
for s in report.spread:
    cond = s["condition"] if s["condition"] == "all" else f"{s['condition']:g} m"
    print(f"{s['method']:12s} {cond:>6s} {s['error1_surface']:8.4f} {s['error1_vertical']:8.4f} {s['spread_pct']:7.0f}%")

# %%
# Mean absolute error per depth band for the surface line, intake at 25 m.
for b in report.band_stats:
    if b["placement"] == "surface_line" and b["condition"] == 25.0:
        bands = ", ".join(f"{name} m: {st['mean']:.3f}" for name, st in b["bands"].items())
        print(f"{b['method']}: {bands}")
