"""Backward walks: one estimator per term of the time-ordered expansion.

The observable average splits into orders by scattering count,

    <A, f(T)> = sum_n  gamma^n exp(-gamma T) * I_n,

and order n is estimated by walks that start at time T, step backwards
through n event times T > t_1 > ... > t_n > 0 and end at t = 0 where f0 is
read off.  Event times come from t_i = u * t_{i-1}, so the weight carries
the simplex factor T * t_1 * ... * t_{n-1} alongside 41 * sign(alpha) per
event; the estimator is exact per order, which is what makes these walks
the reference against deterministic resolvent sums.

Start points for the ``abs_f0`` density are drawn at t = 0 and carried to
T along the flow.  Phase-space volume is conserved, so the density of the
carried point equals the drawn one and no Jacobian enters.  Order 0 then
reuses the drawn point directly instead of integrating back, which removes
round-trip error: with a nonnegative f0 and the unit observable every
order-0 contribution is exactly exp(-gamma T) * abs_mass.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import backend
from ._philox import CHANNEL_START, CHANNEL_WALK, STREAM_STRIDE, stream_base
from ._stats import mean_and_stderr
from .errors import ConfigError
from .model import (FieldConfig, InitialWigner, Observable, PhysicalConstants,
                    field_params)
from .sampling import make_sampler
from .stencil import Stencil
from .trajectory import IntegratorSettings, check_states_finite, propagate_states


@dataclass(frozen=True)
class TermEstimate:
    order: int
    estimate: float
    stderr: float
    n_traj: int


@dataclass(frozen=True)
class BackwardResult:
    """Per-order estimates and their sum; orders are independent runs."""

    terms: tuple[TermEstimate, ...]
    total: float
    total_stderr: float

    def term(self, order: int) -> TermEstimate:
        return self.terms[order]


def run_backward_term(order: int, f0: InitialWigner, obs: Observable,
                      fields: FieldConfig, consts: PhysicalConstants,
                      stencil: Stencil, final_time: float, n_traj: int,
                      seed: int, settings: IntegratorSettings | None = None,
                      density: str = "abs_f0", task_id: int = 0,
                      point=None, box=None) -> TermEstimate:
    """Estimate the order-n term of <A, f(T)> with backward walks."""
    if order < 0:
        raise ConfigError("expansion order must be nonnegative")
    if n_traj < 1:
        raise ConfigError("need at least one trajectory")
    if final_time < 0.0:
        raise ConfigError("final_time must be nonnegative")
    settings = settings or IntegratorSettings()
    if order > 0 and settings.method != "rk4_fixed":
        raise ConfigError("scattering walks require the fixed-step integrator")
    if order > 0 and stencil.classical:
        # gamma = 0 kills every order above zero identically
        return TermEstimate(order, 0.0, 0.0, n_traj)

    sampler = make_sampler(density, f0, obs=obs, consts=consts,
                           box=box, point=point)
    drawn, dens, f0v_drawn = sampler.draw(
        n_traj, seed, stream_base(task_id, CHANNEL_START))

    if density == "abs_f0":
        # points drawn at t = 0, carried forward to T; density rides along
        starts = drawn.copy()
        propagate_states(starts, np.full(n_traj, final_time),
                         fields, consts, settings)
    else:
        starts = drawn

    a_vals = obs.values(starts, consts)
    prefactor = math.exp(-final_time * stencil.gamma)

    if order == 0:
        if density == "abs_f0":
            f0_end = f0v_drawn
        else:
            ends = starts.copy()
            propagate_states(ends, np.full(n_traj, -final_time),
                             fields, consts, settings)
            check_states_finite(ends, 0.0)
            f0_end = f0.values(ends)
        weights = np.ones(n_traj)
    else:
        ends = starts.copy()
        kern = backend.active()
        weights = kern.backward_walk(
            ends, order, final_time, stencil.gamma, settings.step_size(),
            field_params(fields, consts), stencil.offsets(), stencil.signs(),
            stencil.cumulative(), stencil.abs_total, seed,
            stream_base(task_id, CHANNEL_WALK), STREAM_STRIDE)
        check_states_finite(ends, 0.0)
        f0_end = f0.values(ends)

    # ratio first: when dens is |f0| of a nonnegative state the quotient is
    # exactly 1 and order 0 with the unit observable has zero spread
    contrib = prefactor * weights * a_vals * (f0_end / dens)
    estimate, stderr = mean_and_stderr(contrib)
    return TermEstimate(order, estimate, stderr, n_traj)


def run_backward(max_order: int, f0: InitialWigner, obs: Observable,
                 fields: FieldConfig, consts: PhysicalConstants,
                 stencil: Stencil, final_time: float, n_traj: int,
                 seed: int, settings: IntegratorSettings | None = None,
                 density: str = "abs_f0", task_id: int = 0,
                 workers: int | None = None,
                 point=None, box=None) -> BackwardResult:
    """Sum the expansion through ``max_order``, one run per order.

    Order k runs under task id ``task_id + k`` so its streams never overlap
    another order's; the combined stderr adds the orders in quadrature.
    """
    if max_order < 0:
        raise ConfigError("expansion order must be nonnegative")
    if workers is not None:
        backend.set_workers(workers)
    terms = []
    for order in range(max_order + 1):
        terms.append(run_backward_term(
            order, f0, obs, fields, consts, stencil, final_time, n_traj,
            seed, settings=settings, density=density,
            task_id=task_id + order, point=point, box=box))
    total = sum(t.estimate for t in terms)
    var = sum(t.stderr ** 2 for t in terms)
    return BackwardResult(tuple(terms), total, math.sqrt(var))


def estimate_wigner_point(point, final_time: float, f0: InitialWigner,
                          fields: FieldConfig, consts: PhysicalConstants,
                          stencil: Stencil, max_order: int, n_traj: int,
                          seed: int, settings: IntegratorSettings | None = None,
                          task_id: int = 0) -> BackwardResult:
    """Pointwise f(z, T) via backward walks pinned to one start state."""
    return run_backward(max_order, f0, Observable("constant_one"), fields,
                        consts, stencil, final_time, n_traj, seed,
                        settings=settings, density="fixed_point",
                        task_id=task_id, point=point)
