import csv

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from deepkolmogorov.dkm import (
    SpaceTimeBox,
    brownian_streams,
    build_batch,
    loss_and_grad,
    loss_eval,
    next_batch_key,
    sample_points,
)
from deepkolmogorov.heat_oracle import ExactSolution
from deepkolmogorov.net_core import param_count
from deepkolmogorov.rng import RngKey

SOL = ExactSolution("quadratic", 1)
BOX = SpaceTimeBox((0.0, 1.0), ((0.0, 1.0),))


def test_box_validation():
    with pytest.raises(ValueError):
        SpaceTimeBox((1.0, 0.0), ((0, 1),))
    with pytest.raises(ValueError):
        SpaceTimeBox((0.0, 1.0), ((1, 1),))
    assert SpaceTimeBox.cube((0, 1), -2, 2, 3).volume == 64.0
    assert SpaceTimeBox.from_dict(BOX.to_dict()) == BOX


@given(st.integers(1, 50), st.integers(1, 20), st.integers(0, 10**6))
def test_brownian_stream_layout(M1, M2, base):
    s = brownian_streams(M1, M2, base).reshape(M1, M2)
    m, n = np.meshgrid(np.arange(1, M1 + 1), np.arange(1, M2 + 1), indexing="ij")
    assert np.array_equal(s, base + m * M2 + n)
    nxt = next_batch_key(RngKey(0, base), M1, M2).stream
    assert nxt > s.max() and nxt > base + M1


def test_points_inside_box():
    box = SpaceTimeBox((0.2, 0.9), ((-1, 2), (3, 4)))
    t, x = sample_points(box, 5000, RngKey(1))
    assert np.all(box.contains(np.column_stack([t, x])))


def test_batch_reproducible_and_unbiased():
    b1 = build_batch(SOL, BOX, 2000, 64, RngKey(2))
    b2 = build_batch(SOL, BOX, 2000, 64, RngKey(2))
    assert np.array_equal(b1.y, b2.y)
    u = SOL(b1.t, b1.x)
    noise = np.sqrt(SOL.conditional_variance(b1.t, b1.x) / 64)
    z = (b1.y - u) / noise
    assert abs(z.mean()) < 5 / np.sqrt(2000)
    assert abs(z.var() - 1) < 0.15


def test_consecutive_batches_differ():
    k0 = RngKey(3)
    b0 = build_batch(SOL, BOX, 10, 4, k0)
    b1 = build_batch(SOL, BOX, 10, 4, next_batch_key(k0, 10, 4))
    assert not np.any(b0.y == b1.y)


def test_batch_rejects_mismatch():
    with pytest.raises(ValueError):
        build_batch(ExactSolution("quadratic", 2), BOX, 10, 4, RngKey(0))
    with pytest.raises(ValueError):
        build_batch(SOL, SpaceTimeBox((0, 2), ((0, 1),)), 10, 4, RngKey(0))


def test_batch_csv(tmp_path):
    b = build_batch(SOL, BOX, 5, 3, RngKey(4))
    path = tmp_path / "batch.csv"
    b.to_csv(path)
    rows = list(csv.reader(path.open(newline="")))
    assert rows[0] == ["m", "t", "x1", "y"]
    assert float(rows[3][3]) == b.y[2]


@pytest.mark.parametrize("act", [1, 3])
@pytest.mark.parametrize("widths", [(2, 5, 1), (2, 4, 4, 1)])
def test_loss_grad_finite_differences(widths, act, rng):
    b = build_batch(SOL, BOX, 40, 4, RngKey(5))
    theta = rng.normal(size=param_count(widths))
    loss, g = loss_and_grad(widths, theta, b, act)
    assert loss == loss_eval(widths, theta, b, act)
    h = 1e-5
    fd = np.array(
        [
            (loss_eval(widths, theta + h * e, b, act) - loss_eval(widths, theta - h * e, b, act)) / (2 * h)
            for e in np.eye(theta.size)
        ]
    )
    assert np.max(np.abs(g - fd)) <= 1e-6 * max(1.0, np.max(np.abs(fd)))


def test_loss_zero_on_exact_targets():
    b = build_batch(SOL, BOX, 10, 4, RngKey(6))
    # realization identically c fits targets c exactly
    b.y[:] = 0.5
    theta = np.zeros(param_count((2, 3, 1)))
    theta[-1] = 0.5
    assert loss_eval((2, 3, 1), theta, b) == 0.0
