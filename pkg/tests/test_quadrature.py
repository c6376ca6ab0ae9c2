"""Gauss-Legendre rules: exactness, composites, streaming, 2D helper."""

import numpy as np
import pytest

from wignermc.quadrature import gl_rule, integrate, integrate_2d, tensor_rule


def test_gl_exact_on_polynomials():
    # an n-point rule integrates degree 2n-1 exactly
    for order in (2, 4, 7):
        nodes, weights = gl_rule(-1.5, 2.0, order)
        for deg in range(2 * order):
            exact = (2.0 ** (deg + 1) - (-1.5) ** (deg + 1)) / (deg + 1)
            assert weights @ nodes ** deg == pytest.approx(exact, rel=1e-13)


def test_gl_weights_sum_to_length():
    nodes, weights = gl_rule(0.25, 3.75, 9, panels=4)
    assert np.sum(weights) == pytest.approx(3.5)
    assert nodes.shape == weights.shape == (36,)
    assert np.all(np.diff(nodes) > 0)


def test_composite_resolves_kink():
    # |x| has a kink at 0; an even panel count puts an edge exactly there
    # and the rule becomes exact, while one global panel converges slowly
    def f(x):
        return np.abs(x)

    nodes, weights = gl_rule(-1.0, 1.0, 8, panels=2)
    assert weights @ f(nodes) == pytest.approx(1.0, abs=1e-14)
    nodes, weights = gl_rule(-1.0, 1.0, 16, panels=1)
    assert abs(weights @ f(nodes) - 1.0) > 1e-5


def test_composite_converges_on_oscillation():
    k = 40.0
    exact = 2.0 * np.sin(k) / k
    coarse = gl_rule(-1.0, 1.0, 8, panels=1)
    fine = gl_rule(-1.0, 1.0, 8, panels=16)
    assert abs(coarse[1] @ np.cos(k * coarse[0]) - exact) > 1e-2
    assert fine[1] @ np.cos(k * fine[0]) == pytest.approx(exact, abs=1e-12)


def test_tensor_rule_volume_and_shape():
    box = np.array([[0.0, 1.0], [-1.0, 1.0], [2.0, 5.0]])
    nodes, weights = tensor_rule(box, 4)
    assert nodes.shape == (64, 3)
    assert np.sum(weights) == pytest.approx(1.0 * 2.0 * 3.0)


def test_tensor_rule_per_axis_specs():
    box = np.array([[0.0, 1.0], [0.0, 1.0]])
    nodes, weights = tensor_rule(box, [3, (2, 5)])
    assert nodes.shape == (30, 2)
    with pytest.raises(ValueError):
        tensor_rule(box, [3, 4, 5])


def test_integrate_matches_materialised_rule():
    # spec chosen to exceed the streaming chunk so several slabs are summed
    box = np.array([[-1.0, 1.0]] * 4)

    def f(states):
        return np.exp(-np.sum(states ** 2, axis=1)) * (1 + states[:, 0])

    nodes, weights = tensor_rule(box, 22)
    assert nodes.shape[0] > 200_000
    direct = float(weights @ f(nodes))
    assert integrate(f, box, 22) == pytest.approx(direct, rel=1e-13)


def test_integrate_separable_gaussian():
    box = np.array([[-9.0, 9.0]] * 2)

    def f(states):
        return np.exp(-0.5 * np.sum(states ** 2, axis=1))

    assert integrate(f, box, 40) == pytest.approx(2.0 * np.pi, rel=1e-12)


def test_integrate_2d_matches_tensor():
    def f(a, b):
        return np.cos(a) * np.exp(-b * b) + a * b

    def f_rows(states):
        return f(states[:, 0], states[:, 1])

    box = np.array([[0.0, 2.0], [-1.0, 1.5]])
    want = integrate(f_rows, box, [(2, 10), (3, 8)])
    got = integrate_2d(f, (0.0, 2.0), (-1.0, 1.5), (2, 10), (3, 8))
    assert got == pytest.approx(want, rel=1e-12)


def test_integrate_2d_default_spec():
    got = integrate_2d(lambda a, b: a * 0 + b * 0 + 1.0,
                       (0.0, 1.0), (0.0, 2.0), 6)
    assert got == pytest.approx(2.0)


def test_rule_argument_validation():
    with pytest.raises(ValueError):
        gl_rule(0.0, 1.0, 0)
    with pytest.raises(ValueError):
        gl_rule(0.0, 1.0, 4, panels=0)
