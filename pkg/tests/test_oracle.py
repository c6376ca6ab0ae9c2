"""Deterministic expansion-term quadratures and the dense operator checks."""

import math

import numpy as np
import pytest

from wignermc.ensemble import WignerGrid
from wignermc.errors import ConfigError
from wignermc.model import (FieldConfig, GaussianPacket, InitialWigner,
                            Observable, PhaseSpacePoint, PhysicalConstants,
                            TwoPacketSurrogate)
from wignermc.oracle import (TermQuadrature, adjoint_gap, expansion_term_backward,
                             expansion_term_forward, expansion_terms,
                             fredholm_check, initial_state_nodes,
                             neumann_terms, transport_kernel_matrix,
                             _interp_matrix)
from wignermc.stencil import Discretization, build_stencil

T = 0.4
ONE = Observable("constant_one")
QUAD = TermQuadrature(nodes_per_dim=6, time_nodes=5, steps_per_unit_time=64,
                      backward_nodes_per_dim=10)


def surrogate():
    return TwoPacketSurrogate(sigma_p=0.4, sigma_x=0.5, separation=1.5,
                              phase=math.pi / 2)


class TestInitialStateNodes:
    def test_gaussian_rule_integrates_polynomials(self, gauss_f0):
        # Hermite rule against f0: sum w * g(nodes) = integral f0 * g
        nodes, weights = initial_state_nodes(gauss_f0, 6)
        assert weights.sum() == pytest.approx(1.0, rel=1e-14)
        c = gauss_f0.center.as_array()
        got = weights @ nodes[:, 2]
        assert got == pytest.approx(c[2], rel=1e-12)
        got2 = weights @ (nodes[:, 0] ** 2)
        assert got2 == pytest.approx(c[0] ** 2 + gauss_f0.sigma_p ** 2,
                                     rel=1e-12)

    def test_surrogate_rule_total_mass(self):
        nodes, weights = initial_state_nodes(surrogate(), 10)
        assert nodes.shape[0] == 3 * 10 ** 4
        assert weights.sum() == pytest.approx(1.0, rel=1e-10)

    def test_unsupported_state(self):
        class Odd(InitialWigner):
            pass

        with pytest.raises(ConfigError):
            initial_state_nodes(Odd(), 4)


class TestAnalyticAnchors:
    # with A = 1 every stencil shift and flow step conserves mass, so the
    # order-n term collapses to (gamma T)^n / n! * exp(-gamma T) for any
    # node counts; failures here are algebra bugs, not resolution

    @pytest.mark.parametrize("order", [0, 1, 2])
    def test_forward_form(self, consts, fields, stencil, gauss_f0, order):
        got = expansion_term_forward(order, gauss_f0, ONE, fields, consts,
                                     stencil, T, QUAD)
        g = stencil.gamma
        want = (g * T) ** order / math.factorial(order) * math.exp(-g * T)
        assert got == pytest.approx(want, rel=1e-12)

    def test_backward_form_order0(self, consts, fields, stencil, gauss_f0):
        got = expansion_term_backward(0, gauss_f0, ONE, fields, consts,
                                      stencil, T, QUAD)
        assert got == pytest.approx(math.exp(-stencil.gamma * T), rel=1e-9)


class TestCrossFormAgreement:
    # the two forms chain opposite shift directions through opposite time
    # orderings and share no node construction; agreement pins both

    @pytest.mark.parametrize("kind", ["constant_one", "mean_x"])
    def test_gaussian_order0(self, consts, fields, stencil, gauss_f0, kind):
        obs = Observable(kind)
        fw = expansion_term_forward(0, gauss_f0, obs, fields, consts,
                                    stencil, T, QUAD)
        bw = expansion_term_backward(0, gauss_f0, obs, fields, consts,
                                     stencil, T, QUAD)
        assert bw == pytest.approx(fw, rel=1e-9)

    @pytest.mark.parametrize("kind", ["constant_one", "mean_x"])
    def test_gaussian_order1(self, consts, fields, stencil, gauss_f0, kind):
        obs = Observable(kind)
        fw = expansion_term_forward(1, gauss_f0, obs, fields, consts,
                                    stencil, T, QUAD)
        bw = expansion_term_backward(1, gauss_f0, obs, fields, consts,
                                     stencil, T, QUAD)
        assert bw == pytest.approx(fw, rel=2e-5)

    @pytest.mark.parametrize("order,tol", [(0, 5e-4), (1, 5e-4)])
    def test_surrogate(self, consts, fields, stencil, order, tol):
        f0 = surrogate()
        obs = Observable("mean_x")
        fw = expansion_term_forward(order, f0, obs, fields, consts,
                                    stencil, T, QUAD)
        bw = expansion_term_backward(order, f0, obs, fields, consts,
                                     stencil, T, QUAD)
        assert bw == pytest.approx(fw, rel=tol)


class TestQuadratureBehaviour:
    def test_node_doubling_stability(self, consts, fields, stencil,
                                     gauss_f0):
        obs = Observable("mean_x")
        coarse = expansion_term_forward(
            1, gauss_f0, obs, fields, consts, stencil, T,
            TermQuadrature(nodes_per_dim=5, time_nodes=4,
                           steps_per_unit_time=64))
        fine = expansion_term_forward(
            1, gauss_f0, obs, fields, consts, stencil, T,
            TermQuadrature(nodes_per_dim=7, time_nodes=6,
                           steps_per_unit_time=96))
        assert coarse == pytest.approx(fine, rel=1e-6)

    def test_expansion_terms_vector(self, consts, fields, stencil,
                                    gauss_f0):
        terms = expansion_terms(2, gauss_f0, ONE, fields, consts, stencil,
                                T, QUAD)
        assert terms.shape == (3,)
        for n in range(3):
            single = expansion_term_forward(n, gauss_f0, ONE, fields,
                                            consts, stencil, T, QUAD)
            assert terms[n] == single

    def test_untabulated_order_rejected(self, consts, fields, stencil,
                                        gauss_f0):
        with pytest.raises(ConfigError, match="orders 0..2"):
            expansion_term_forward(3, gauss_f0, ONE, fields, consts,
                                   stencil, T, QUAD)
        with pytest.raises(ConfigError):
            expansion_term_backward(-1, gauss_f0, ONE, fields, consts,
                                    stencil, T, QUAD)

    def test_classical_higher_orders_vanish(self, consts, gauss_f0):
        fields = FieldConfig(b0=0.4, b1=0.0, ex=0.3, ey=-0.2)
        stencil = build_stencil(Discretization(0.5, 0.5), fields, consts)
        assert expansion_term_forward(1, gauss_f0, ONE, fields, consts,
                                      stencil, T, QUAD) == 0.0
        assert expansion_term_backward(2, gauss_f0, ONE, fields, consts,
                                       stencil, T, QUAD) == 0.0


@pytest.fixture(scope="module")
def dense_operator():
    consts = PhysicalConstants()
    fields = FieldConfig(b0=0.4, b1=1.0, ex=0.3, ey=-0.2)
    stencil = build_stencil(Discretization(0.5, 0.5), fields, consts)
    f0 = GaussianPacket(center=PhaseSpacePoint(0.7, -0.3, 0.2, 0.1),
                        sigma_p=0.35, sigma_x=0.45)
    bounds = f0.support_box(4.0)
    K, weights, centers, t_nodes = transport_kernel_matrix(
        fields, consts, stencil, T, bounds, (4, 4, 4, 4), time_nodes=4,
        steps_per_unit_time=32)
    b = np.tile(f0.values(centers), 4)
    return K, weights, centers, t_nodes, b


class TestDenseOperator:
    def test_block_triangular_in_time(self, dense_operator):
        K, _, centers, t_nodes, _ = dense_operator
        n_cells = centers.shape[0]
        for j in range(len(t_nodes)):
            for k in range(len(t_nodes)):
                block = K[j * n_cells:(j + 1) * n_cells,
                          k * n_cells:(k + 1) * n_cells]
                if k >= j:
                    assert not block.any()

    def test_nilpotent(self, dense_operator):
        # causality: four time nodes mean K^4 = 0 exactly, so the Neumann
        # series for the true operator always terminates
        K = dense_operator[0]
        K2 = K @ K
        assert np.abs(K2 @ K2).max() == 0.0
        assert np.abs(K2).max() > 0.0

    def test_adjoint_identity(self, dense_operator):
        K, weights = dense_operator[0], dense_operator[1]
        assert adjoint_gap(K, weights) < 1e-12

    def test_neumann_terms_terminate(self, dense_operator):
        K, weights, _, t_nodes, b = dense_operator
        norms = neumann_terms(K, b, 6, weights)
        assert norms[0] > 0.0
        np.testing.assert_array_equal(norms[len(t_nodes):], 0.0)

    def test_fredholm_report_converges(self, dense_operator):
        K, weights, _, _, b = dense_operator
        report = fredholm_check(K, b, weights, orders=8)
        assert not report.diverging
        assert report.neumann_residual < 1e-10
        assert report.converged
        assert report.dimension == K.shape[0]
        assert report.term_norms.size == 9

    def test_interp_matrix_matches_grid_gather(self, rng, dense_operator):
        # the dense build scatters exactly the weights the grid gathers
        _, _, centers, _, _ = dense_operator
        bounds = np.stack([centers.min(axis=0) - 0.3,
                           centers.max(axis=0) + 0.3], axis=1)
        values = rng.standard_normal((4, 4, 4, 4))
        grid = WignerGrid(bounds, values)
        points = rng.uniform(bounds[:, 0] - 0.1, bounds[:, 1] + 0.1,
                             size=(200, 4))
        mat = _interp_matrix(grid, points)
        np.testing.assert_allclose(mat @ values.reshape(-1),
                                   grid.interpolate(points),
                                   rtol=1e-12, atol=1e-14)


class TestSyntheticDivergence:
    # the real operator cannot diverge, so the reporting path is exercised
    # on scaled random matrices with known spectral radius

    def make(self, rho, seed=5):
        rng = np.random.default_rng(seed)
        M = rng.standard_normal((60, 60)) / math.sqrt(60)
        M *= rho / max(abs(np.linalg.eigvals(M)))
        b = rng.standard_normal(60)
        return M, b, np.ones(60)

    def test_expanding_operator_is_flagged(self):
        M, b, w = self.make(1.3)
        report = fredholm_check(M, b, w, orders=60)
        assert report.diverging
        assert math.isinf(report.neumann_residual)
        assert not report.converged

    def test_contractive_operator_sums(self):
        M, b, w = self.make(0.45)
        report = fredholm_check(M, b, w, orders=60)
        assert not report.diverging
        assert report.neumann_residual < 1e-10
        assert report.adjoint_gap < 1e-12
