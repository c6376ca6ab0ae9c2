"""Phase-space trajectory integration.

Two routes: fixed-step RK4 (the workhorse, valid for any field profile) and
a closed-form propagator for the linear-force case b1 = 0, where the
equations of motion are a constant-coefficient linear system and the flow is
a matrix exponential.  The closed form exists to validate the integrator,
not to replace it.

Backward propagation is the same ODE integrated with a negative step; both
routes accept t_to < t_from.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from . import backend
from .errors import ConfigError, NumericalError
from .model import FieldConfig, PhaseSpacePoint, PhysicalConstants, field_params

INTEGRATOR_METHODS = ("rk4_fixed", "closed_form_linear")


@dataclass(frozen=True)
class IntegratorSettings:
    method: str = "rk4_fixed"
    step_count_per_unit_time: int = 256
    max_step: float | None = None

    def __post_init__(self):
        if self.method not in INTEGRATOR_METHODS:
            raise ConfigError(
                f"unknown integrator {self.method!r}; valid methods are "
                f"{', '.join(INTEGRATOR_METHODS)}"
            )
        if not (1 <= self.step_count_per_unit_time <= 1_000_000):
            raise ConfigError("step_count_per_unit_time must be in [1, 1e6]")
        if self.max_step is not None and not (self.max_step > 0.0):
            raise ConfigError("max_step must be positive when given")

    def step_size(self) -> float:
        h = 1.0 / self.step_count_per_unit_time
        if self.max_step is not None:
            h = min(h, self.max_step)
        return h


def drift_matrix(fields: FieldConfig, consts: PhysicalConstants) -> np.ndarray:
    """Generator M of the linear system z' = M z, z = (px, py, x, y).

    Only valid for b1 = 0; with a field gradient the force has p*y cross
    terms and the system is no longer linear.
    """
    if fields.b1 != 0.0:
        raise ConfigError("closed-form propagation requires b1 = 0")
    e, m = consts.charge, consts.mass
    return np.array([
        [0.0, e * fields.b0 / m, e * fields.ex, 0.0],
        [-e * fields.b0 / m, 0.0, 0.0, e * fields.ey],
        [1.0 / m, 0.0, 0.0, 0.0],
        [0.0, 1.0 / m, 0.0, 0.0],
    ])


def closed_form_propagate(pt: PhaseSpacePoint, t_from: float, t_to: float,
                          fields: FieldConfig,
                          consts: PhysicalConstants) -> PhaseSpacePoint:
    """Exact flow for b1 = 0 via scaling-and-squaring matrix exponential."""
    flow = expm(drift_matrix(fields, consts) * (t_to - t_from))
    out = flow @ pt.as_array()
    _check_finite(out, t_to)
    return PhaseSpacePoint.from_array(out)


def propagate(pt: PhaseSpacePoint, t_from: float, t_to: float,
              fields: FieldConfig, consts: PhysicalConstants,
              settings: IntegratorSettings = IntegratorSettings()) -> PhaseSpacePoint:
    """Propagate one phase-space point from t_from to t_to."""
    if settings.method == "closed_form_linear":
        return closed_form_propagate(pt, t_from, t_to, fields, consts)
    states = pt.as_array()[None, :].copy()
    backend.active().propagate_batch(
        states, np.array([t_to - t_from]), settings.step_size(),
        field_params(fields, consts))
    _check_finite(states[0], t_to)
    return PhaseSpacePoint.from_array(states[0])


def propagate_states(states: np.ndarray, durations, fields: FieldConfig,
                     consts: PhysicalConstants,
                     settings: IntegratorSettings = IntegratorSettings()) -> None:
    """In-place batch propagation; ``durations`` broadcasts over rows.

    The closed-form route groups rows by duration and applies one matrix
    exponential per distinct value, which suits validation workloads; the
    RK4 route hands the whole batch to the active kernel backend.
    """
    durations = np.broadcast_to(np.asarray(durations, dtype=np.float64),
                                (states.shape[0],)).copy()
    if settings.method == "closed_form_linear":
        gen = drift_matrix(fields, consts)
        for dur in np.unique(durations):
            rows = durations == dur
            flow = expm(gen * dur)
            states[rows] = states[rows] @ flow.T
        return
    backend.active().propagate_batch(states, durations, settings.step_size(),
                                     field_params(fields, consts))


def flow_jacobian_det(pt: PhaseSpacePoint, t_from: float, t_to: float,
                      fields: FieldConfig, consts: PhysicalConstants,
                      settings: IntegratorSettings = IntegratorSettings()) -> float:
    """Jacobian determinant of the flow map by central differences.

    The exact flow is volume preserving (Liouville), so values near 1 are a
    consistency check on the integrator.  Step per coordinate is
    1e-6 * (1 + |coordinate|).
    """
    z0 = pt.as_array()
    eps = 1e-6 * (1.0 + np.abs(z0))
    probes = np.repeat(z0[None, :], 8, axis=0)
    for i in range(4):
        probes[2 * i, i] += eps[i]
        probes[2 * i + 1, i] -= eps[i]
    propagate_states(probes, t_to - t_from, fields, consts, settings)
    _check_finite(probes, t_to)
    jac = np.empty((4, 4))
    for i in range(4):
        jac[:, i] = (probes[2 * i] - probes[2 * i + 1]) / (2.0 * eps[i])
    return float(np.linalg.det(jac))


def _check_finite(arr: np.ndarray, t_to: float) -> None:
    if not np.all(np.isfinite(arr)):
        raise NumericalError(
            f"non-finite state while integrating towards t = {t_to!r}"
        )


def check_states_finite(states: np.ndarray, t_to: float) -> None:
    """Public finite check used by the Monte Carlo drivers."""
    _check_finite(states, t_to)


def estimate_displacement(states: np.ndarray, duration: float,
                          fields: FieldConfig, consts: PhysicalConstants,
                          settings: IntegratorSettings) -> np.ndarray:
    """Per-axis max |shift| of a probe batch over ``duration``.

    Used to pad quadrature and sampling boxes so they cover transported
    supports.
    """
    probes = states.copy()
    propagate_states(probes, duration, fields, consts, settings)
    return np.max(np.abs(probes - states), axis=0)
