import math

import numpy as np
import pytest
from scipy import integrate, stats

from deepkolmogorov.heat_oracle import (
    ExactSolution,
    brownian_increment,
    exact_eval,
    fk_estimate,
    mc_rate_check,
    pde_residual,
)
from deepkolmogorov.rng import RngKey

CATALOGUE = [
    ExactSolution("quadratic", 1),
    ExactSolution("quadratic", 3, T=2.0, kappa=0.5),
    ExactSolution("exponential", 1, direction=(0.7,)),
    ExactSolution("exponential", 2, kappa=0.5, direction=(0.3, -0.4)),
    ExactSolution("gaussian_kernel", 1, variance=0.5),
    ExactSolution("gaussian_kernel", 3, kappa=2.0, variance=1.5),
]


def test_quadratic_closed_form():
    sol = ExactSolution("quadratic", 2, T=1.0, kappa=1.0)
    # |x|^2 + kappa^2 d (T - t)
    assert exact_eval(sol, 0.0, [1.0, 2.0]) == pytest.approx(7.0)
    assert exact_eval(sol, 1.0, [1.0, 2.0]) == pytest.approx(5.0)


def test_gaussian_kernel_matches_convolution():
    sol = ExactSolution("gaussian_kernel", 1, T=1.0, kappa=0.8, variance=0.7)
    t, x = 0.25, 0.3
    s = sol.kappa**2 * (sol.T - t)
    val = integrate.quad(lambda w: sol.terminal(np.array([x + w])) * stats.norm.pdf(w, scale=math.sqrt(s)), -10, 10)[0]
    assert exact_eval(sol, t, [x]) == pytest.approx(val, rel=1e-10)


@pytest.mark.parametrize("sol", CATALOGUE, ids=lambda s: f"{s.kind}-d{s.d}")
def test_residual_vanishes(sol):
    rng = np.random.default_rng(1)
    t = rng.uniform(0.05, sol.T - 0.05, 1000)
    x = rng.uniform(-1, 1, (1000, sol.d))
    assert np.max(np.abs(pde_residual(sol, t, x))) <= 1e-5


@pytest.mark.parametrize("sol", CATALOGUE, ids=lambda s: f"{s.kind}-d{s.d}")
def test_conditional_variance(sol):
    rng = np.random.default_rng(2)
    t, x = 0.3, rng.uniform(-0.5, 0.5, sol.d)
    z = rng.standard_normal((400_000, sol.d))
    vals = sol.terminal(x + sol.kappa * math.sqrt(sol.T - t) * z)
    assert float(sol.conditional_variance(np.array([t]), x[None])[0]) == pytest.approx(vals.var(), rel=0.05)


def test_fk_terminal_time_is_exact():
    sol = ExactSolution("exponential", 2, direction=(1.0, 0.5))
    mean, se = fk_estimate(sol, sol.T, [0.2, 0.1], 500, RngKey(3))
    assert mean - float(exact_eval(sol, sol.T, [0.2, 0.1])) == 0.0
    assert se == 0.0


@pytest.mark.parametrize("sol", CATALOGUE[:4], ids=lambda s: f"{s.kind}-d{s.d}")
def test_fk_estimate_within_error(sol):
    x = np.full(sol.d, 0.25)
    mean, se = fk_estimate(sol, 0.1, x, 20000, RngKey(4))
    assert abs(mean - float(exact_eval(sol, 0.1, x))) <= 5 * se


def test_brownian_increment_scaling():
    w1 = brownian_increment(RngKey(9, 17), 3, 1.0)
    w4 = brownian_increment(RngKey(9, 17), 3, 4.0)
    np.testing.assert_allclose(w4, 2 * w1)


def test_solution_validation():
    with pytest.raises(ValueError):
        ExactSolution("cubic", 1)
    with pytest.raises(ValueError):
        ExactSolution("quadratic", 1, kappa=0.0)
    with pytest.raises(ValueError):
        ExactSolution("exponential", 2, direction=(1.0,))
    with pytest.raises(ValueError):
        exact_eval(ExactSolution("quadratic", 1), 2.0, [0.0])
    sol = ExactSolution.from_dict({"kind": "exponential", "d": 2, "direction": [1, 2]})
    assert ExactSolution.from_dict(sol.to_dict()) == sol
    with pytest.raises(ValueError):
        ExactSolution.from_dict({"kind": "quadratic", "d": 1, "sigma": 1})


def test_mc_rate_square_functional():
    rep = mc_rate_check(2.0, [100, 1000, 10000], 100, RngKey(5))
    assert -0.65 <= rep.fit.slope <= -0.35
    assert rep.exact_ratio == 0.5
    assert all(r <= 1.0 for r in rep.ratios)


def test_mc_rate_rejects_bad_input():
    with pytest.raises(ValueError):
        mc_rate_check(1.5, [100, 1000, 10000], 100, RngKey(0))
    with pytest.raises(ValueError):
        mc_rate_check(2.0, [100, 1000], 100, RngKey(0))
