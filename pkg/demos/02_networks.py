"""Flat-parameter networks, smoothed activations and exact constructions."""
import numpy as np

from deepkolmogorov import Architecture, Network, forward, grad_theta, param_count, smooth_activation
from deepkolmogorov.constructions import ShallowNet, affine_rescale, embed_shallow_to_deep, identity_net

arch = Architecture((2, 4, 4, 1))
print("parameters of", arch.widths, "=", param_count(arch))

rng = np.random.default_rng(0)
theta = rng.normal(size=param_count(arch))
x = rng.uniform(-1, 1, (3, 2))
print("outputs:", forward(arch, theta, x)[0].ravel().round(4))
print("|grad_theta| at x[0]:", np.linalg.norm(grad_theta(arch, theta, x[0], act=2)).round(4))

for n in (1, 4, 16):
    v, _ = smooth_activation(n, np.array([-0.5, 0.01, 0.5]))
    print(f"activation {n:2d}:", v.round(4))

ida, idt = identity_net()
print("identity on [-3, 3]:", forward(ida, idt, np.linspace(-3, 3, 5))[0].ravel())

shallow = ShallowNet.random(2, 3, rng)
deep = (2, 5, 2, 2, 1)
emb = embed_shallow_to_deep(shallow, deep)
pts = rng.uniform(-5, 5, (1000, 2))
print("embedding discrepancy:", np.max(np.abs(Network(deep, emb)(pts) - shallow(pts))))

resc = affine_rescale(ShallowNet(ida, idt), 1.0, 2.0)
print("identity moved to [1, 2], evaluated at 1, 1.5, 2:", [float(resc(v)) for v in (1.0, 1.5, 2.0)])
