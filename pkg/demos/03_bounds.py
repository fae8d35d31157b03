"""A priori bounds against sampled realizations."""
import numpy as np

from deepkolmogorov.apriori_bounds import BoundContext, check_bounds, grad_bound, growth_bound, lipschitz_bound

a = (1, 1, 1)
theta = np.ones(4)
print("growth bound, layer 1:", growth_bound(a, theta, BoundContext(-1, 1, 1, 1, 1)))
print("growth bound, layer 2, q = 2:", growth_bound(a, theta, BoundContext(-1, 1, 1, 2, 2)))
print("Lipschitz bound:", lipschitz_bound(a, theta, theta + 1e-3, -1, 1))
print("gradient bound:", grad_bound(a, theta, -1, 1))

rep = check_bounds(100, seed=1, points=2000)
print(rep.to_json())
