"""Start-point samplers for the Monte Carlo walks.

Each sampler draws phase-space points through the addressed RNG (particle i
uses stream ``stream0 + stride*i``, positions advancing by a fixed number of
draws per rejection round, so any backend and any batch split produces the
same points) and reports the exact density it sampled from, plus the f0
value to use in estimator weights.

Densities:

* ``abs_f0``: normalised |f0|.  Gaussian packets are drawn directly by
  Box-Muller; two-packet states by rejection from the three-Gaussian
  envelope g1 + g2 + 2*g_mid, which dominates |f0| pointwise; tabulated
  grids by cell choice proportional to |value| * volume with uniform
  in-cell jitter (the grid is treated as piecewise constant, and the same
  cell value is reported as the f0 weight so density and weight agree).
* ``abs_f0_times_abs_A``: normalised |f0 * A| restricted to a bounding box,
  built by a further rejection on |A| / sup_box |A|; the normalisation
  constant is computed once by Gauss-Legendre quadrature on the box.
* ``fixed_point``: a point mass; density is reported as 1 so weight ratios
  reduce to raw f0 values.

Per-round draw layout is fixed per sampler: the proposal columns first,
then one acceptance uniform for samplers that can reject.
"""

from __future__ import annotations

import functools
import math

import numpy as np

from . import backend
from ._philox import STREAM_STRIDE
from .errors import ConfigError
from .model import (PX, PY, X, Y, GaussianPacket, InitialWigner, Observable,
                    PhaseSpacePoint, PhysicalConstants, TabulatedState,
                    TwoPacketSurrogate, _COORD_KINDS, _gauss_product)
from .quadrature import integrate, integrate_2d

SAMPLING_DENSITIES = ("abs_f0", "abs_f0_times_abs_A", "fixed_point")

MAX_REJECTION_ROUNDS = 1_000_000


def _box_muller(u1, u2):
    # u in [0,1): 1-u in (0,1] keeps the log finite
    r = np.sqrt(-2.0 * np.log1p(-u1))
    ang = (2.0 * math.pi) * u2
    return r * np.cos(ang), r * np.sin(ang)


def abs_mass(f0: InitialWigner) -> float:
    """integral of |f0| over phase space."""
    if isinstance(f0, GaussianPacket):
        return 1.0
    if isinstance(f0, TabulatedState):
        return f0.abs_mass
    if isinstance(f0, TwoPacketSurrogate):
        return _surrogate_abs_mass(f0)
    raise ConfigError(f"no sampler for initial state {type(f0).__name__}")


@functools.lru_cache(maxsize=32)
def _surrogate_abs_mass(f0: TwoPacketSurrogate) -> float:
    # |f0| factorises into the two bystander Gaussians (integral 1) times a
    # 2D profile in the separation and conjugate coordinates, so a plane
    # quadrature suffices even though |.| has kinks.
    axis, conj, widths, kappa, c, offset = f0._geometry()
    sa, su = widths[axis], widths[conj]
    ca, cu = c[axis], c[conj]
    d2 = offset[axis]

    def profile(a, u):
        na = 1.0 / (sa * math.sqrt(2.0 * math.pi))
        nu = 1.0 / (su * math.sqrt(2.0 * math.pi))
        g1 = na * np.exp(-0.5 * ((a - (ca - d2)) / sa) ** 2)
        g2 = na * np.exp(-0.5 * ((a - (ca + d2)) / sa) ** 2)
        gm = na * np.exp(-0.5 * ((a - ca) / sa) ** 2)
        gu = nu * np.exp(-0.5 * ((u - cu) / su) ** 2)
        inner = g1 + g2 + 2.0 * gm * np.cos(kappa * (u - cu) + f0.phase)
        return gu * np.abs(inner)

    # composite rule: |inner| has kinks along the zero curves of the bracket
    box_a = (ca - d2 - 10.0 * sa, ca + d2 + 10.0 * sa)
    box_u = (cu - 10.0 * su, cu + 10.0 * su)
    return integrate_2d(profile, box_a, box_u, (192, 10)) / f0._norm_constant()


class StartSampler:
    """Common rejection-loop driver; subclasses implement one proposal."""

    proposal_draws = 0
    needs_accept = False

    def __init__(self, f0: InitialWigner):
        self.f0 = f0

    @property
    def draws_per_round(self) -> int:
        return self.proposal_draws + (1 if self.needs_accept else 0)

    def _propose(self, u_cols):
        """Map proposal columns to (states, accept_prob, dens, f0_vals)."""
        raise NotImplementedError

    def draw(self, n: int, seed: int, stream0: int,
             stride: int = STREAM_STRIDE):
        """Draw ``n`` start states; returns (states, densities, f0_values)."""
        states = np.empty((n, 4))
        dens = np.empty(n)
        f0v = np.empty(n)
        if self.draws_per_round == 0:
            self._fill_fixed(states, dens, f0v)
            return states, dens, f0v

        kern = backend.active()
        streams = np.uint64(stream0) + np.uint64(stride) * np.arange(n, dtype=np.uint64)
        per_round = np.uint64(self.draws_per_round)
        round_no = 0
        need = np.arange(n)
        while need.size:
            if round_no >= MAX_REJECTION_ROUNDS:
                raise ConfigError(
                    "start sampling rejected 1e6 proposals; the sampling "
                    "density is too far from its envelope"
                )
            base = np.uint64(round_no) * per_round
            cols = [kern.uniforms(seed, streams[need],
                                  np.full(need.size, base + np.uint64(j), dtype=np.uint64))
                    for j in range(self.proposal_draws)]
            z, accept, d_vals, f_vals = self._propose(cols)
            if self.needs_accept:
                u_acc = kern.uniforms(
                    seed, streams[need],
                    np.full(need.size, base + np.uint64(self.proposal_draws),
                            dtype=np.uint64))
                ok = u_acc < accept
            else:
                ok = np.ones(need.size, dtype=bool)
            taken = need[ok]
            states[taken] = z[ok]
            dens[taken] = d_vals[ok]
            f0v[taken] = f_vals[ok]
            need = need[~ok]
            round_no += 1
        return states, dens, f0v

    def _fill_fixed(self, states, dens, f0v):
        raise NotImplementedError


class GaussianDirectSampler(StartSampler):
    """Exact draw from a Gaussian packet: density is f0 itself."""

    proposal_draws = 4
    needs_accept = False

    def __init__(self, f0: GaussianPacket):
        super().__init__(f0)
        self._center = f0.center.as_array()
        self._widths = f0._widths()

    def _propose(self, u_cols):
        zp, zq = _box_muller(u_cols[0], u_cols[1])
        zx, zy = _box_muller(u_cols[2], u_cols[3])
        z = self._center + self._widths * np.stack([zp, zq, zx, zy], axis=1)
        vals = self.f0.values(z)
        return z, np.ones(len(zp)), vals, vals


class MixtureRejectionSampler(StartSampler):
    """|f0| sampling for the two-packet state via its mixture envelope."""

    proposal_draws = 5  # component, four normals
    needs_accept = True

    def __init__(self, f0: TwoPacketSurrogate):
        super().__init__(f0)
        means, widths, weights = f0.mixture_components()
        self._means = means
        self._widths = widths
        self._cum = np.cumsum(weights)
        self._cum[-1] = 1.0
        self._zabs = abs_mass(f0)
        self._znorm = f0._norm_constant()

    def _propose(self, u_cols):
        comp = np.searchsorted(self._cum, u_cols[0], side="right")
        zp, zq = _box_muller(u_cols[1], u_cols[2])
        zx, zy = _box_muller(u_cols[3], u_cols[4])
        z = self._means[comp] + self._widths * np.stack([zp, zq, zx, zy], axis=1)
        envelope = (_gauss_product(z, self._means[0], self._widths)
                    + _gauss_product(z, self._means[1], self._widths)
                    + 2.0 * _gauss_product(z, self._means[2], self._widths))
        vals = self.f0.values(z)
        accept = np.abs(vals) * self._znorm / envelope
        return z, accept, np.abs(vals) / self._zabs, vals


class TabulatedSampler(StartSampler):
    """Cell-weighted sampling from a stored grid, piecewise constant."""

    proposal_draws = 5  # cell, four jitter coordinates
    needs_accept = False

    def __init__(self, f0: TabulatedState):
        super().__init__(f0)
        grid = f0.grid
        flat = np.abs(grid.values.reshape(-1)) * grid.cell_volume()
        total = flat.sum()
        if total <= 0.0:
            raise ConfigError("tabulated initial state has no mass to sample")
        self._cum = np.cumsum(flat) / total
        self._cum[-1] = 1.0
        self._zabs = float(total)
        self._grid = grid

    def _propose(self, u_cols):
        cells = np.searchsorted(self._cum, u_cols[0], side="right")
        jitter = np.stack(u_cols[1:5], axis=1)
        z = self._grid.cell_lower(cells) + jitter * self._grid.cell_widths()
        vals = self._grid.values.reshape(-1)[cells]
        ones = np.ones(len(cells))
        return z, ones, np.abs(vals) / self._zabs, vals


class FixedPointSampler(StartSampler):
    proposal_draws = 0
    needs_accept = False

    def __init__(self, f0: InitialWigner, point: PhaseSpacePoint):
        super().__init__(f0)
        self.point = point

    def _fill_fixed(self, states, dens, f0v):
        states[:] = self.point.as_array()
        dens[:] = 1.0
        f0v[:] = self.f0.evaluate(self.point)


def _intersect_box(box: np.ndarray, cell) -> np.ndarray:
    out = box.copy()
    for axis, (lo, hi) in enumerate(cell):
        out[axis, 0] = max(out[axis, 0], lo)
        out[axis, 1] = min(out[axis, 1], hi)
        if not (out[axis, 0] < out[axis, 1]):
            raise ConfigError(
                "indicator cell does not overlap the sampling box"
            )
    return out


# 1D moments of an unnormalised Gaussian N(mu, s^2) over [a, b]; the norm
# integrals below assemble from these so only the kinked 2D factor of a
# two-packet state ever needs numerical quadrature.


def _std_pdf(t: float) -> float:
    return math.exp(-0.5 * t * t) / math.sqrt(2.0 * math.pi)


def _std_cdf(t: float) -> float:
    return 0.5 * (1.0 + math.erf(t / math.sqrt(2.0)))


def _gm0(mu, s, a, b):
    al, be = (a - mu) / s, (b - mu) / s
    return _std_cdf(be) - _std_cdf(al)


def _gm1(mu, s, a, b):
    al, be = (a - mu) / s, (b - mu) / s
    return mu * _gm0(mu, s, a, b) + s * (_std_pdf(al) - _std_pdf(be))


def _gm2(mu, s, a, b):
    al, be = (a - mu) / s, (b - mu) / s
    m0 = _std_cdf(be) - _std_cdf(al)
    m1 = _std_pdf(al) - _std_pdf(be)
    m2 = m0 + al * _std_pdf(al) - be * _std_pdf(be)
    return mu * mu * m0 + 2.0 * mu * s * m1 + s * s * m2


def _gm_abs(mu, s, a, b):
    if a < 0.0 < b:
        return _gm1(mu, s, 0.0, b) - _gm1(mu, s, a, 0.0)
    return abs(_gm1(mu, s, a, b))


_PAIR_SPEC = (256, 10)


def _abs_norm(f0: InitialWigner, obs: Observable,
              consts: PhysicalConstants, box: np.ndarray) -> float:
    """integral of |f0 * A| over the box, accurate despite the kinks.

    Factorises along axes: bystander Gaussians contribute closed-form
    interval moments, and only the sign-changing 2D factor of a two-packet
    state is integrated numerically, with composite panels against its
    kinks.  The indicator observable restricts the box to its cell first.
    """
    if obs.kind == "indicator_cell":
        box = _intersect_box(box, obs.cell)
    if isinstance(f0, TabulatedState):
        return _tabulated_abs_norm(f0, obs, consts, box)
    if isinstance(f0, GaussianPacket):
        return _gaussian_abs_norm(f0, obs, consts, box)
    if isinstance(f0, TwoPacketSurrogate):
        return _surrogate_abs_norm(f0, obs, consts, box)
    raise ConfigError(f"no |f0*A| norm for initial state {type(f0).__name__}")


def _gaussian_abs_norm(f0: GaussianPacket, obs: Observable,
                       consts: PhysicalConstants, box: np.ndarray) -> float:
    c = f0.center.as_array()
    w = f0._widths()
    m0 = [_gm0(c[i], w[i], *box[i]) for i in range(4)]
    if obs.kind in _COORD_KINDS:
        axis = _COORD_KINDS[obs.kind]
        out = _gm_abs(c[axis], w[axis], *box[axis])
        for i in range(4):
            if i != axis:
                out *= m0[i]
        return out
    if obs.kind == "kinetic_energy":
        m2p = _gm2(c[PX], w[PX], *box[PX])
        m2q = _gm2(c[PY], w[PY], *box[PY])
        return (m2p * m0[PY] + m0[PX] * m2q) * m0[X] * m0[Y] \
            / (2.0 * consts.mass)
    return m0[0] * m0[1] * m0[2] * m0[3]


def _surrogate_abs_norm(f0: TwoPacketSurrogate, obs: Observable,
                        consts: PhysicalConstants, box: np.ndarray) -> float:
    axis, conj, widths, kappa, c, offset = f0._geometry()
    sa, su = widths[axis], widths[conj]
    ca, cu = c[axis], c[conj]
    d2 = offset[axis]
    znorm = f0._norm_constant()
    bystanders = [i for i in range(4) if i not in (axis, conj)]

    def g1d(t, mu, s):
        return np.exp(-0.5 * ((t - mu) / s) ** 2) / (s * math.sqrt(2.0 * math.pi))

    def pair_integral(weight_axis=None, weight=None, split=False):
        """2D integral of the |bracket| factor times a per-axis weight.

        The weight rides on whichever pair axis is named; with ``split``
        the weighted range is cut at zero so an |u| weight stays smooth up
        to the bracket's own kinks.
        """
        def f(a, u):
            bracket = (g1d(a, ca - d2, sa) + g1d(a, ca + d2, sa)
                       + 2.0 * g1d(a, ca, sa)
                       * np.cos(kappa * (u - cu) + f0.phase))
            out = g1d(u, cu, su) * np.abs(bracket) / znorm
            if weight_axis == axis:
                out = out * weight(a)
            elif weight_axis == conj:
                out = out * weight(u)
            return out

        def ranges(idx):
            lo, hi = box[idx]
            if split and weight_axis == idx and lo < 0.0 < hi:
                return [(lo, 0.0), (0.0, hi)]
            return [(lo, hi)]

        return sum(integrate_2d(f, ra, ru, _PAIR_SPEC)
                   for ra in ranges(axis) for ru in ranges(conj))

    m0 = {i: _gm0(c[i], widths[i], *box[i]) for i in bystanders}

    if obs.kind in _COORD_KINDS:
        target = _COORD_KINDS[obs.kind]
        if target in bystanders:
            other = next(i for i in bystanders if i != target)
            return pair_integral() * _gm_abs(c[target], widths[target],
                                             *box[target]) * m0[other]
        return (pair_integral(target, np.abs, split=True)
                * m0[bystanders[0]] * m0[bystanders[1]])

    if obs.kind == "kinetic_energy":
        pair_mom = axis if axis in (PX, PY) else conj
        bys_mom = PX if pair_mom == PY else PY
        bys_pos = next(i for i in bystanders if i != bys_mom)
        term_pair = pair_integral(pair_mom, np.square) * m0[bys_mom] * m0[bys_pos]
        term_bys = (pair_integral()
                    * _gm2(c[bys_mom], widths[bys_mom], *box[bys_mom])
                    * m0[bys_pos])
        return (term_pair + term_bys) / (2.0 * consts.mass)

    return pair_integral() * m0[bystanders[0]] * m0[bystanders[1]]


def _tabulated_abs_norm(f0: TabulatedState, obs: Observable,
                        consts: PhysicalConstants, box: np.ndarray) -> float:
    # the sampler treats the grid as piecewise constant, so the norm is
    # sum_cells |value| * integral of |A| over cell-box overlap, and those
    # integrals are closed form for every observable kind
    grid = f0.grid
    vals = np.abs(grid.values.reshape(-1))
    corners = grid.cell_lower(np.arange(vals.size))
    lo = np.maximum(corners, box[:, 0])
    hi = np.minimum(corners + grid.cell_widths(), box[:, 1])
    w = hi - lo
    live = (w > 0.0).all(axis=1)
    if not live.any():
        return 0.0
    lo, hi, w, vals = lo[live], hi[live], w[live], vals[live]
    if obs.kind in _COORD_KINDS:
        axis = _COORD_KINDS[obs.kind]
        # integral of |u| du = u|u|/2 evaluated at the ends
        mom = 0.5 * (hi[:, axis] * np.abs(hi[:, axis])
                     - lo[:, axis] * np.abs(lo[:, axis]))
        rest = np.prod(np.delete(w, axis, axis=1), axis=1)
        k = mom * rest
    elif obs.kind == "kinetic_energy":
        m2p = (hi[:, PX] ** 3 - lo[:, PX] ** 3) / 3.0
        m2q = (hi[:, PY] ** 3 - lo[:, PY] ** 3) / 3.0
        k = (m2p * w[:, PY] + m2q * w[:, PX]) * w[:, X] * w[:, Y] \
            / (2.0 * consts.mass)
    else:
        # constant_one, or indicator after the box was cut to its cell
        k = np.prod(w, axis=1)
    return float(np.dot(vals, k))


class AbsObservableRejectionSampler(StartSampler):
    """Restrict a base sampler to density |f0 * A| on a bounding box.

    One uniform decides the joint acceptance (base envelope ratio times
    |A| / sup|A|), which has the same marginal as two chained rejections.
    """

    needs_accept = True

    def __init__(self, base: StartSampler, obs: Observable,
                 consts: PhysicalConstants, box: np.ndarray):
        super().__init__(base.f0)
        if base.draws_per_round == 0:
            raise ConfigError("cannot weight a fixed start point by |A|")
        box = np.asarray(box, dtype=np.float64)
        if obs.kind == "indicator_cell":
            # |A| is 1 on the cell and 0 outside; shrinking the box to the
            # overlap keeps the density identical and skips dead proposals
            box = _intersect_box(box, obs.cell)
        self.base = base
        self.obs = obs
        self.consts = consts
        self.box = box
        self.proposal_draws = base.proposal_draws
        self._bound = obs.bound(self.box, consts)
        if not (self._bound > 0.0):
            raise ConfigError("|A| vanishes on the sampling box")
        norm = _abs_norm(base.f0, obs, consts, self.box)
        if not (norm > 0.0):
            raise ConfigError("|f0 * A| integrates to zero on the sampling box")
        self._norm = norm

    def _propose(self, u_cols):
        z, base_accept, _, f_vals = self.base._propose(u_cols)
        a_vals = self.obs.values(z, self.consts)
        inside = np.ones(len(a_vals), dtype=bool)
        for axis in range(4):
            inside &= (z[:, axis] >= self.box[axis, 0]) & (z[:, axis] <= self.box[axis, 1])
        accept = base_accept * (np.abs(a_vals) / self._bound) * inside
        dens = np.abs(f_vals * a_vals) / self._norm
        return z, accept, dens, f_vals


def make_sampler(density: str, f0: InitialWigner,
                 obs: Observable | None = None,
                 consts: PhysicalConstants | None = None,
                 box: np.ndarray | None = None,
                 point: PhaseSpacePoint | None = None) -> StartSampler:
    """Build the sampler for one of the named densities."""
    if density not in SAMPLING_DENSITIES:
        raise ConfigError(
            f"unknown sampling density {density!r}; valid choices are "
            f"{', '.join(SAMPLING_DENSITIES)}"
        )
    if density == "fixed_point":
        if point is None:
            raise ConfigError("fixed_point sampling needs a start point")
        return FixedPointSampler(f0, point)

    if isinstance(f0, GaussianPacket):
        base = GaussianDirectSampler(f0)
    elif isinstance(f0, TwoPacketSurrogate):
        base = MixtureRejectionSampler(f0)
    elif isinstance(f0, TabulatedState):
        base = TabulatedSampler(f0)
    else:
        raise ConfigError(f"no sampler for initial state {type(f0).__name__}")

    if density == "abs_f0":
        return base
    if obs is None or consts is None:
        raise ConfigError("abs_f0_times_abs_A sampling needs an observable")
    if box is None:
        box = f0.support_box(8.0)
    return AbsObservableRejectionSampler(base, obs, consts, box)


def default_density(obs: Observable) -> str:
    """|f0 * A| when the observable cannot change sign, |f0| otherwise."""
    return "abs_f0_times_abs_A" if obs.fixed_sign else "abs_f0"
