"""Generalization gap against M1 and error against width, with log-log fits."""
from deepkolmogorov import ExactSolution, RngKey, SpaceTimeBox, TrainConfig, generalization_gap
from deepkolmogorov.analysis import width_sweep

sol = ExactSolution("quadratic", 1)
box = SpaceTimeBox((0.0, 1.0), ((0.0, 1.0),))

gap = generalization_gap((2, 8, 8, 1), box, sol, 20, [2**8, 2**10, 2**12], 8, RngKey(0), reps=8)
for m1, g, s in zip(gap.m1_values, gap.mean_sup_gap, gap.stderr):
    print(f"M1 = {m1:5d}  sup gap {g:.4f} ± {s:.4f}")
print(f"slope {gap.fit.slope:.3f} ± {gap.fit.halfwidth:.3f}")

base = TrainConfig(lr=5e-3, steps=400, M1=1024, M2=16, fresh_batch=False)
ws = width_sweep(base, sol, box, [2, 4, 8, 16], [0, 1], n_points=2**14)
print("width errors:", [f"{e:.2e}" for e in ws.mean_error], "Spearman", round(ws.spearman_mean, 2))
