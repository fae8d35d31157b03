"""Exact heat solutions, Monte Carlo estimates and the Monte Carlo error rate."""
import numpy as np

from deepkolmogorov import ExactSolution, RngKey, exact_eval, fk_estimate, mc_rate_check
from deepkolmogorov.heat_oracle import pde_residual

sols = [
    ExactSolution("quadratic", 2),
    ExactSolution("exponential", 2, kappa=0.5, direction=(0.6, -0.5)),
    ExactSolution("gaussian_kernel", 2, variance=0.5),
]
x = np.array([0.3, -0.2])
for i, sol in enumerate(sols):
    mean, se = fk_estimate(sol, 0.25, x, 100_000, RngKey(7, i * 100_001))
    exact = float(exact_eval(sol, 0.25, x))
    res = np.max(np.abs(pde_residual(sol, np.full(100, 0.5), np.random.default_rng(i).uniform(-1, 1, (100, 2)))))
    print(f"{sol.kind:16s} estimate {mean:.5f} ± {se:.5f}  exact {exact:.5f}  residual {res:.1e}")

rep = mc_rate_check(2.0, [100, 1000, 10000], 200, RngKey(3))
print(f"L2 error slope {rep.fit.slope:.3f} ± {rep.fit.halfwidth:.3f}; ratios", np.round(rep.ratios, 3))
