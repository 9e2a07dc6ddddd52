"""How the discretization error shrinks.

Space is second order: halving h divides the curvature error, the volume
quadrature error and the telescoped W-identity residual by four.  Time is
first order with forward Euler: halving dt at a fixed mesh halves the change
of the final metric.
"""

# %%
from logentropy import ExperimentConfig, ManifoldSpec
from logentropy.experiments import refinement_study, time_order_study

cfg = ExperimentConfig(ManifoldSpec.axisym_sphere(32), a=0.1, t1=0.0, t2=0.05,
                       initial={"preset": "perturbed", "amplitude": 0.05})
study = refinement_study(cfg, levels=3)

print(f"{'N':>5} {'dt':>10} {'curvature':>10} {'volume':>10} {'W residual':>11}")
for lvl, c, v, w in zip(study["levels"], study["curvature_error"], study["volume_error"],
                        study["telescoped_residual"]):
    print(f"{lvl['resolution'][0]:5d} {lvl['dt']:10.2e} {c:10.2e} {v:10.2e} {w:11.2e}")
for k, r in study["ratios"].items():
    print(f"{k:22s} ratios {[round(x, 2) for x in r]}")

# %%
timing = time_order_study(cfg, levels=2)
print("Euler time ratios:", [round(r, 3) for r in timing["ratios"]])
