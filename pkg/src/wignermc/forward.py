"""Forward signed-particle estimator for time-T observables.

A trajectory starts at a sampled phase-space point, alternates exponential
free flights with stencil scatterings up to the final time, and contributes

    weight * A(z_T) * f0(z_0) / density(z_0)

where the weight collects one factor 41 * sign(alpha) per event.  The
per-trajectory weight grows like 41^events, so the event cap exists to stop
runaway walks: capped trajectories are dropped from the estimate and
reported, since their contribution is unknown rather than zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import backend
from ._philox import CHANNEL_START, CHANNEL_WALK, STREAM_STRIDE, stream_base
from ._stats import mean_and_stderr
from .errors import ConfigError, EstimationError
from .model import (InitialWigner, Observable, PhysicalConstants, FieldConfig,
                    field_params)
from .sampling import make_sampler
from .stencil import Stencil
from .trajectory import IntegratorSettings, check_states_finite, propagate_states

DEFAULT_EVENT_CAP = 64


@dataclass(frozen=True)
class ForwardResult:
    """Outcome of one forward ensemble.

    ``cancellation`` is sum|c| / |sum c| over the kept contributions: 1 for
    a single-signed estimand, large when signs nearly cancel.  The event
    histogram counts kept trajectories by their number of scatterings.
    """

    estimate: float
    stderr: float
    n_requested: int
    n_used: int
    capped_fraction: float
    cancellation: float
    event_histogram: np.ndarray

    @property
    def mean_events(self) -> float:
        counts = np.arange(self.event_histogram.size)
        total = self.event_histogram.sum()
        return float(counts @ self.event_histogram / total) if total else 0.0


def forward_ensemble(f0: InitialWigner, fields: FieldConfig,
                     consts: PhysicalConstants, stencil: Stencil,
                     final_time: float, n_traj: int, seed: int,
                     settings: IntegratorSettings | None = None,
                     density: str = "abs_f0",
                     event_cap: int = DEFAULT_EVENT_CAP, task_id: int = 0,
                     start_channel: int = CHANNEL_START,
                     obs: Observable | None = None, point=None, box=None):
    """Run the walks and return per-trajectory material.

    Returns ``(states, carried, counts, capped)``: time-T states, the
    carried weight ``walk_weight * f0(z_0) / density(z_0)`` (so that
    mean(carried * A(states)) estimates <A, f(T)>), event counts, and the
    cap flags.  ``obs`` only matters for the |f0 * A| start density.
    """
    if n_traj < 1:
        raise ConfigError("need at least one trajectory")
    if final_time < 0.0:
        raise ConfigError("final_time must be nonnegative")
    if event_cap < 1:
        raise ConfigError("event cap must be at least 1")
    settings = settings or IntegratorSettings()

    sampler = make_sampler(density, f0, obs=obs, consts=consts,
                           box=box, point=point)
    states, dens, f0v = sampler.draw(
        n_traj, seed, stream_base(task_id, start_channel))

    if stencil.classical:
        propagate_states(states, np.full(n_traj, final_time),
                         fields, consts, settings)
        weights = np.ones(n_traj)
        counts = np.zeros(n_traj, dtype=np.int64)
        capped = np.zeros(n_traj, dtype=bool)
    else:
        if settings.method != "rk4_fixed":
            raise ConfigError(
                "scattering walks require the fixed-step integrator"
            )
        kern = backend.active()
        weights, counts, capped = kern.forward_walk(
            states, final_time, stencil.gamma, settings.step_size(),
            field_params(fields, consts), stencil.offsets(), stencil.signs(),
            stencil.cumulative(), stencil.abs_total, seed,
            stream_base(task_id, CHANNEL_WALK), STREAM_STRIDE, event_cap)

    if not (~capped).any():
        raise EstimationError(
            f"every trajectory hit the {event_cap}-event cap; raise the cap "
            "or shorten the final time"
        )
    check_states_finite(states[~capped], final_time)
    carried = weights * (f0v / dens)
    return states, carried, counts, capped


def run_forward(f0: InitialWigner, obs: Observable, fields: FieldConfig,
                consts: PhysicalConstants, stencil: Stencil,
                final_time: float, n_traj: int, seed: int,
                settings: IntegratorSettings | None = None,
                density: str = "abs_f0", event_cap: int = DEFAULT_EVENT_CAP,
                task_id: int = 0, workers: int | None = None,
                point=None, box=None) -> ForwardResult:
    """Estimate <A, f(T)> with ``n_traj`` forward trajectories."""
    if workers is not None:
        backend.set_workers(workers)
    states, carried, counts, capped = forward_ensemble(
        f0, fields, consts, stencil, final_time, n_traj, seed,
        settings=settings, density=density, event_cap=event_cap,
        task_id=task_id, obs=obs, point=point, box=box)

    keep = ~capped
    contrib = carried[keep] * obs.values(states[keep], consts)
    n_used = int(keep.sum())
    estimate, stderr = mean_and_stderr(contrib)
    total = estimate * n_used
    abs_total = float(np.sum(np.abs(contrib)))
    cancellation = abs_total / abs(total) if total != 0.0 else float("inf")
    histogram = np.bincount(counts[keep], minlength=event_cap + 1)
    return ForwardResult(
        estimate=estimate,
        stderr=stderr,
        n_requested=n_traj,
        n_used=n_used,
        capped_fraction=1.0 - n_used / n_traj,
        cancellation=cancellation,
        event_histogram=histogram,
    )
