"""Train a network on the deep Kolmogorov loss and report its error terms."""
from deepkolmogorov import ExactSolution, SpaceTimeBox, TrainConfig, decomposition_report, opt_error_proxy, train
from deepkolmogorov.rng import RngKey

sol = ExactSolution("quadratic", 1)
box = SpaceTimeBox((0.0, 1.0), ((0.0, 1.0),))
cfg = TrainConfig(widths=(2, 16, 16, 1), lr=5e-3, steps=1500, M1=512, M2=16, seed=1)

res = train(cfg, sol, box)
print("loss: first", round(res.loss[0], 4), "last 100 mean", round(res.smoothed_loss(100), 5))

proxy = opt_error_proxy(cfg.replace(steps=300), sol, box, 3, budget_factor=1)
rep = decomposition_report(res, sol, box, proxy, n_points=2**14, key=RngKey(1))
print(rep.to_json())
