"""Deterministic quadrature for the scattering expansion, and a dense
matrix build of the underlying integral equation.

The order-n term of <A, f(T)> is a smooth integral over the initial state,
an n-dimensional time simplex and 15^n stencil branches; for n <= 2 this is
small enough to evaluate by nested Gauss rules, giving reference values
that share no code path (and no randomness) with the walk estimators.

Two parametrisations are implemented.  The forward form integrates over
the t = 0 state with Gauss-Hermite nodes matched to the initial density,
chains forward through ascending event times with ``-offset`` shifts and
reads the observable at T.  The backward form starts at time T, walks
descending event times with ``+offset`` shifts and reads f0 at the end,
exactly like the backward walker; its nodes are the forward images of a
widened Hermite proposal, reweighted pointwise.  Agreement between forms
checks the time ordering, shift directions and weight factors against each
other, since neither is derived from the other's code.

``transport_kernel_matrix`` discretises the integral operator itself on a
coarse phase-time grid.  The point is structure, not accuracy: the
weighted-transpose adjoint identity is exact in exact arithmetic, Neumann
iteration must converge when the operator is a contraction, and a growing
term norm must be reported as divergence rather than failed on.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .model import (FieldConfig, GaussianPacket, InitialWigner, Observable,
                    PhysicalConstants, TwoPacketSurrogate, _gauss_product)
from .stencil import Stencil
from .trajectory import IntegratorSettings, propagate_states

MAX_ORDER = 2


@dataclass(frozen=True)
class TermQuadrature:
    """Node counts for the expansion-term quadratures."""

    nodes_per_dim: int = 8
    time_nodes: int = 6
    steps_per_unit_time: int = 128
    backward_nodes_per_dim: int = 12

    def settings(self) -> IntegratorSettings:
        return IntegratorSettings(
            step_count_per_unit_time=self.steps_per_unit_time)


def _hermite_axis(n: int):
    # probabilists' rule: weight exp(-t^2/2), total mass sqrt(2*pi)
    nodes, weights = np.polynomial.hermite_e.hermegauss(n)
    return nodes, weights / math.sqrt(2.0 * math.pi)


def _hermite_nodes_4d(center, widths, n: int):
    t, w = _hermite_axis(n)
    grids = np.meshgrid(*(center[i] + widths[i] * t for i in range(4)),
                        indexing="ij")
    nodes = np.stack([g.reshape(-1) for g in grids], axis=1)
    wg = np.meshgrid(w, w, w, w, indexing="ij")
    weights = wg[0] * wg[1] * wg[2] * wg[3]
    return nodes, weights.reshape(-1)


def initial_state_nodes(f0: InitialWigner, nodes_per_dim: int):
    """Nodes and weights such that sum(w * g(nodes)) ~ integral f0 * g.

    Hermite rules against each Gaussian factor; the two-packet state is
    three such rules, with the oscillation folded into the third set's
    weights.  The initial states supported here are entire functions, so
    convergence in ``nodes_per_dim`` is spectral.
    """
    if isinstance(f0, GaussianPacket):
        return _hermite_nodes_4d(f0.center.as_array(), f0._widths(),
                                 nodes_per_dim)
    if isinstance(f0, TwoPacketSurrogate):
        _, conj, widths, kappa, c, offset = f0._geometry()
        znorm = f0._norm_constant()
        n1, w1 = _hermite_nodes_4d(c - offset, widths, nodes_per_dim)
        n2, w2 = _hermite_nodes_4d(c + offset, widths, nodes_per_dim)
        nm, wm = _hermite_nodes_4d(c, widths, nodes_per_dim)
        osc = np.cos(kappa * (nm[:, conj] - c[conj]) + f0.phase)
        nodes = np.concatenate([n1, n2, nm])
        weights = np.concatenate([w1, w2, 2.0 * wm * osc]) / znorm
        return nodes, weights
    raise ConfigError(
        f"no quadrature rule for initial state {type(f0).__name__}"
    )


def _descending_gl(lo: float, hi: float, n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    nodes = 0.5 * (hi + lo) + 0.5 * (hi - lo) * x
    weights = 0.5 * (hi - lo) * w
    return nodes[::-1], weights[::-1]


def _ascending_gl(lo: float, hi: float, n: int):
    nodes, weights = _descending_gl(lo, hi, n)
    return nodes[::-1], weights[::-1]


def _advance(states, duration, fields, consts, settings):
    propagate_states(states, np.full(states.shape[0], duration),
                     fields, consts, settings)


def _branches(states, offs, direction):
    """All 15 shifted copies, stacked block by block in table order."""
    shifted = states[None, :, :] + direction * offs[:, None, :]
    return shifted.reshape(-1, 4)


def expansion_term_forward(order: int, f0: InitialWigner, obs: Observable,
                           fields: FieldConfig, consts: PhysicalConstants,
                           stencil: Stencil, final_time: float,
                           quad: TermQuadrature | None = None) -> float:
    """Order-n expansion term, integrated from the t = 0 side."""
    _check_order(order)
    quad = quad or TermQuadrature()
    if order > 0 and stencil.classical:
        return 0.0
    settings = quad.settings()
    nodes, weights = initial_state_nodes(f0, quad.nodes_per_dim)
    prefactor = (stencil.gamma ** order
                 * math.exp(-stencil.gamma * final_time))
    offs = stencil.offsets()
    alphas = stencil.alphas()

    if order == 0:
        ends = nodes.copy()
        _advance(ends, final_time, fields, consts, settings)
        return prefactor * float(weights @ obs.values(ends, consts))

    n_nodes = nodes.shape[0]
    t1_nodes, t1_weights = _ascending_gl(0.0, final_time, quad.time_nodes)
    base = nodes.copy()
    clock = 0.0
    total = 0.0
    w1_branch = np.repeat(alphas, n_nodes) * np.tile(weights, 15)
    for s1, wt1 in zip(t1_nodes, t1_weights):
        _advance(base, s1 - clock, fields, consts, settings)
        clock = s1
        shifted1 = _branches(base, offs, -1.0)
        if order == 1:
            _advance(shifted1, final_time - s1, fields, consts, settings)
            total += wt1 * float(w1_branch @ obs.values(shifted1, consts))
            continue
        inner_clock = s1
        t2_nodes, t2_weights = _ascending_gl(s1, final_time, quad.time_nodes)
        for s2, wt2 in zip(t2_nodes, t2_weights):
            _advance(shifted1, s2 - inner_clock, fields, consts, settings)
            inner_clock = s2
            shifted2 = _branches(shifted1, offs, -1.0)
            _advance(shifted2, final_time - s2, fields, consts, settings)
            w2_branch = (np.repeat(alphas, shifted1.shape[0])
                         * np.tile(w1_branch, 15))
            total += wt1 * wt2 * float(
                w2_branch @ obs.values(shifted2, consts))
    return prefactor * total


def expansion_term_backward(order: int, f0: InitialWigner, obs: Observable,
                            fields: FieldConfig, consts: PhysicalConstants,
                            stencil: Stencil, final_time: float,
                            quad: TermQuadrature | None = None) -> float:
    """Order-n expansion term, integrated from the time-T side.

    Nodes are forward images of Hermite rules matched to the initial
    state's positive mixture envelope; the flow conserves phase-space
    volume, so each node keeps its weight divided by the envelope density
    at the preimage.  f0 appears only where the backward walker reads it,
    at the chained endpoint.
    """
    _check_order(order)
    quad = quad or TermQuadrature()
    if order > 0 and stencil.classical:
        return 0.0
    settings = quad.settings()
    nodes, weights, density = _envelope_nodes(
        f0, quad.backward_nodes_per_dim)
    ratio = weights / density(nodes)

    starts = nodes.copy()
    _advance(starts, final_time, fields, consts, settings)
    a_vals = obs.values(starts, consts)
    prefactor = (stencil.gamma ** order
                 * math.exp(-stencil.gamma * final_time))
    offs = stencil.offsets()
    alphas = stencil.alphas()

    if order == 0:
        ends = starts.copy()
        _advance(ends, -final_time, fields, consts, settings)
        return prefactor * float((ratio * a_vals) @ f0.values(ends))

    n_nodes = starts.shape[0]
    head = ratio * a_vals
    t1_nodes, t1_weights = _descending_gl(0.0, final_time, quad.time_nodes)
    base = starts.copy()
    clock = final_time
    total = 0.0
    w1_branch = np.repeat(alphas, n_nodes) * np.tile(head, 15)
    for t1, wt1 in zip(t1_nodes, t1_weights):
        _advance(base, t1 - clock, fields, consts, settings)
        clock = t1
        shifted1 = _branches(base, offs, +1.0)
        if order == 1:
            _advance(shifted1, -t1, fields, consts, settings)
            total += wt1 * float(w1_branch @ f0.values(shifted1))
            continue
        inner_clock = t1
        t2_nodes, t2_weights = _descending_gl(0.0, t1, quad.time_nodes)
        for t2, wt2 in zip(t2_nodes, t2_weights):
            _advance(shifted1, t2 - inner_clock, fields, consts, settings)
            inner_clock = t2
            shifted2 = _branches(shifted1, offs, +1.0)
            _advance(shifted2, -t2, fields, consts, settings)
            w2_branch = (np.repeat(alphas, shifted1.shape[0])
                         * np.tile(w1_branch, 15))
            total += wt1 * wt2 * float(w2_branch @ f0.values(shifted2))
    return prefactor * total


def expansion_terms(max_order: int, f0: InitialWigner, obs: Observable,
                    fields: FieldConfig, consts: PhysicalConstants,
                    stencil: Stencil, final_time: float,
                    quad: TermQuadrature | None = None) -> np.ndarray:
    """Forward-form terms for orders 0..max_order."""
    return np.array([
        expansion_term_forward(n, f0, obs, fields, consts, stencil,
                               final_time, quad)
        for n in range(max_order + 1)
    ])


def _check_order(order: int) -> None:
    if not (0 <= order <= MAX_ORDER):
        raise ConfigError(
            f"expansion-term quadrature covers orders 0..{MAX_ORDER}; "
            f"order {order} has 15^{order} branches and is not tabulated"
        )


def _envelope_nodes(f0: InitialWigner, nodes_per_dim: int):
    """Hermite nodes for the positive mixture envelope bounding |f0|.

    Returns nodes, weights and the envelope density, with
    sum(w * g(nodes)) ~ integral envelope(z) * g(z) dz; dividing the
    weights by the density turns the rule into a plain volume integral
    whose resolution follows f0's own packets.
    """
    if isinstance(f0, GaussianPacket):
        means = f0.center.as_array()[None, :]
        widths = f0._widths()
        comp_weights = np.array([1.0])
    elif isinstance(f0, TwoPacketSurrogate):
        means, widths, comp_weights = f0.mixture_components()
    else:
        raise ConfigError(
            f"no quadrature rule for initial state {type(f0).__name__}"
        )
    node_sets = []
    weight_sets = []
    for mu, cw in zip(means, comp_weights):
        n, w = _hermite_nodes_4d(mu, widths, nodes_per_dim)
        node_sets.append(n)
        weight_sets.append(cw * w)

    def density(states):
        out = np.zeros(states.shape[0])
        for mu, cw in zip(means, comp_weights):
            out += cw * _gauss_product(states, mu, widths)
        return out

    return np.concatenate(node_sets), np.concatenate(weight_sets), density


# ---------------------------------------------------------------------------
# Dense build of the transport integral operator
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FredholmReport:
    """Outcome of the dense-operator structure check."""

    dimension: int
    adjoint_gap: float
    term_norms: np.ndarray
    growth_ratios: np.ndarray
    diverging: bool
    neumann_residual: float

    @property
    def converged(self) -> bool:
        return not self.diverging and self.neumann_residual < 1e-8


def transport_kernel_matrix(fields: FieldConfig, consts: PhysicalConstants,
                            stencil: Stencil, final_time: float,
                            bounds: np.ndarray, shape,
                            time_nodes: int = 5,
                            steps_per_unit_time: int = 64):
    """Dense matrix of the scattering integral operator on a grid.

    Unknowns live at cell centers x Gauss time nodes on [0, T].  The time
    integral from 0 to t is cut down from the shared node set with an
    indicator, which is crude as quadrature but preserves the operator
    algebra the checks care about.  Returns (K, W, centers, times) with W
    the diagonal of the inner-product weights.
    """
    from .ensemble import WignerGrid

    bounds = np.asarray(bounds, dtype=np.float64)
    shape = tuple(int(s) for s in shape)
    n_cells = int(np.prod(shape))
    settings = IntegratorSettings(step_count_per_unit_time=steps_per_unit_time)
    t_nodes, t_weights = _ascending_gl(0.0, final_time, time_nodes)

    probe = WignerGrid(bounds, np.zeros(shape))
    centers = probe.cell_lower(np.arange(n_cells)) + 0.5 * probe.cell_widths()
    volume = probe.cell_volume()

    offs = stencil.offsets()
    alphas = stencil.alphas()
    gamma = stencil.gamma
    dim = n_cells * time_nodes
    K = np.zeros((dim, dim))

    # column j*(cells)+c holds the response to the (c, t_j) basis function;
    # build row blocks instead: for a target time t_j, pull each source
    # slice s_k < t_j back along the flow, shift by every stencil offset and
    # scatter the interpolation weights.
    for j, tj in enumerate(t_nodes):
        rows = slice(j * n_cells, (j + 1) * n_cells)
        for k, sk in enumerate(t_nodes):
            if sk >= tj:
                continue
            pulled = centers.copy()
            _advance(pulled, -(tj - sk), fields, consts, settings)
            factor = gamma * t_weights[k] * math.exp(-gamma * (tj - sk))
            cols = k * n_cells
            for m in range(15):
                pts = pulled + offs[m]
                block = _interp_matrix(probe, pts)
                K[rows, cols:cols + n_cells] += (factor * alphas[m]) * block
    weights = np.tile(t_weights, (n_cells, 1)).T.reshape(-1) * volume
    return K, weights, centers, t_nodes


def _interp_matrix(grid, points):
    """Rows are multilinear interpolation weights over grid cells."""
    n = points.shape[0]
    out = np.zeros((n, int(np.prod(grid.shape))))
    lo = grid.bounds[:, 0]
    w = grid.cell_widths()
    inside = np.ones(n, dtype=bool)
    for axis in range(4):
        inside &= ((points[:, axis] >= grid.bounds[axis, 0])
                   & (points[:, axis] <= grid.bounds[axis, 1]))
    t = (points - lo) / w - 0.5
    base = np.floor(t).astype(np.int64)
    frac = t - base
    for axis, nax in enumerate(grid.shape):
        low = base[:, axis] < 0
        base[low, axis] = 0
        frac[low, axis] = 0.0
        high = base[:, axis] > nax - 2
        base[high, axis] = max(nax - 2, 0)
        frac[high, axis] = 1.0 if nax > 1 else 0.0
    rows = np.arange(n)
    for corner in itertools.product((0, 1), repeat=4):
        weight = inside.astype(np.float64)
        idx = []
        for axis, bit in enumerate(corner):
            weight = weight * (frac[:, axis] if bit else 1.0 - frac[:, axis])
            idx.append(np.minimum(base[:, axis] + bit, grid.shape[axis] - 1))
        flat = np.ravel_multi_index(tuple(idx), grid.shape)
        np.add.at(out, (rows, flat), weight)
    return out


def adjoint_gap(K: np.ndarray, weights: np.ndarray, seed: int = 0,
                trials: int = 8) -> float:
    """max |<Kf, g>_W - <f, K*g>_W| over random pairs, K* = W^-1 K^T W.

    Zero in exact arithmetic for any K; the identity is what ties the
    forward operator to its backward adjoint on the same grid.
    """
    rng = np.random.default_rng(seed)
    K_adj = (K.T * weights[None, :]) / weights[:, None]
    worst = 0.0
    for _ in range(trials):
        f = rng.standard_normal(K.shape[0])
        g = rng.standard_normal(K.shape[0])
        lhs = float(np.sum((K @ f) * g * weights))
        rhs = float(np.sum(f * (K_adj @ g) * weights))
        scale = max(abs(lhs), abs(rhs), 1.0)
        worst = max(worst, abs(lhs - rhs) / scale)
    return worst


def neumann_terms(K: np.ndarray, b: np.ndarray, orders: int,
                  weights: np.ndarray | None = None):
    """Norms of K^n b for n = 0..orders, in the weighted 2-norm."""
    if weights is None:
        weights = np.ones(K.shape[0])
    term = b.copy()
    norms = [float(np.sqrt(np.sum(weights * term * term)))]
    for _ in range(orders):
        term = K @ term
        norms.append(float(np.sqrt(np.sum(weights * term * term))))
    return np.array(norms)


def fredholm_check(K: np.ndarray, b: np.ndarray, weights: np.ndarray,
                   orders: int = 30, growth_window: int = 5) -> FredholmReport:
    """Classify the Neumann iteration for f = b + K f.

    Divergence (term norms growing across the trailing window) is a finding
    to report, not an error: the caller decides what to do with a
    non-contractive operator.  The transport matrix itself is block
    strictly lower triangular in time, so its iteration always terminates;
    the divergent branch exists for operators without that structure.
    """
    gap = adjoint_gap(K, weights)
    norms = neumann_terms(K, b, orders, weights)
    tiny = 1e-300
    ratios = norms[1:] / np.maximum(norms[:-1], tiny)
    window = ratios[-growth_window:]
    diverging = bool(np.all(window > 1.0))
    if diverging:
        residual = float("inf")
    else:
        partial = b.copy()
        term = b.copy()
        for _ in range(orders):
            term = K @ term
            partial = partial + term
        direct = np.linalg.solve(np.eye(K.shape[0]) - K, b)
        num = float(np.sqrt(np.sum(weights * (partial - direct) ** 2)))
        den = float(np.sqrt(np.sum(weights * direct * direct)))
        residual = num / max(den, tiny)
    return FredholmReport(
        dimension=K.shape[0],
        adjoint_gap=gap,
        term_norms=norms,
        growth_ratios=ratios,
        diverging=diverging,
        neumann_residual=residual,
    )
