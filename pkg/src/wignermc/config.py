"""Run configuration: strict JSON on disk, built model objects in memory.

Parsing is deliberately unforgiving.  Every key is checked against the
schema and reported with its dotted path, because a silently ignored typo
("trajectoires") costs a cluster allocation before anyone notices.  Type
coercion accepts ints where floats are expected and nothing else.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .model import (FieldConfig, GaussianPacket, InitialWigner, Observable,
                    PhaseSpacePoint, PhysicalConstants, TwoPacketSurrogate)
from .stencil import Discretization
from .trajectory import IntegratorSettings

DENSITIES = ("abs_f0", "abs_f0_times_abs_A")


@dataclass(frozen=True)
class RunConfig:
    constants: PhysicalConstants
    fields: FieldConfig
    discretization: Discretization
    initial_state: InitialWigner
    integrator: IntegratorSettings
    observables: tuple[Observable, ...]
    final_time: float
    trajectories: int
    seed: int
    event_cap: int
    density: str | None
    max_order: int
    slices: int
    grid_bounds: np.ndarray | None
    grid_shape: tuple[int, int, int, int] | None
    point: PhaseSpacePoint | None
    raw: dict = field(repr=False, default_factory=dict)

    @property
    def observable(self) -> Observable:
        return self.observables[0]


def load_config(path: str) -> RunConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    return parse_config(data)


def parse_config(data: dict) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("config root must be a JSON object")
    top = _Section("", data, (
        "constants", "fields", "discretization", "initial_state",
        "observable", "observables", "integrator", "run",
    ))

    consts_sec = top.section("constants", optional=True)
    consts = PhysicalConstants(
        hbar=consts_sec.number("hbar", default=1.0),
        mass=consts_sec.number("mass", default=1.0),
        charge=consts_sec.number("charge", default=1.0),
    )
    consts_sec.close()

    fields_sec = top.section("fields", optional=True)
    fields = FieldConfig(
        b0=fields_sec.number("b0", default=0.0),
        b1=fields_sec.number("b1", default=0.0),
        ex=fields_sec.number("ex", default=0.0),
        ey=fields_sec.number("ey", default=0.0),
    )
    fields_sec.close()

    disc_sec = top.section("discretization", optional=True)
    disc = Discretization(
        delta_p=disc_sec.number("delta_p", default=0.5),
        delta_x=disc_sec.number("delta_x", default=0.5),
    )
    disc_sec.close()

    f0 = _parse_initial_state(top.section("initial_state"))
    observables = _parse_observables(top)

    integ_sec = top.section("integrator", optional=True)
    integrator = IntegratorSettings(
        method=integ_sec.string("method", default="rk4_fixed"),
        step_count_per_unit_time=integ_sec.integer(
            "step_count_per_unit_time", default=256),
    )
    integ_sec.close()
    if integrator.method == "closed_form_linear" and fields.b1 != 0.0:
        raise ConfigError(
            "integrator.method closed_form_linear requires fields.b1 = 0; "
            "the flow is only linear without the field gradient"
        )

    run = top.section("run")
    final_time = run.number("final_time")
    if not (final_time > 0.0):
        raise ConfigError("run.final_time must be positive")
    trajectories = run.integer("trajectories", default=100_000)
    if trajectories < 1:
        raise ConfigError("run.trajectories must be at least 1")
    seed = run.integer("seed", default=0)
    if not (0 <= seed < 2 ** 63):
        raise ConfigError("run.seed must fit in an unsigned 63-bit integer")
    event_cap = run.integer("event_cap", default=64)
    if not (1 <= event_cap <= 100_000):
        raise ConfigError("run.event_cap must be in [1, 100000]")
    density = run.string("density", default=None)
    if density is not None and density not in DENSITIES:
        raise ConfigError(
            f"run.density must be one of {', '.join(DENSITIES)}"
        )
    max_order = run.integer("max_order", default=3)
    if not (0 <= max_order <= 64):
        raise ConfigError("run.max_order must be in [0, 64]")
    slices = run.integer("slices", default=1)
    if slices < 1:
        raise ConfigError("run.slices must be at least 1")
    grid_bounds = run.box("grid_bounds", default=None)
    grid_shape = run.shape4("grid_shape", default=None)
    point_arr = run.vector4("point", default=None)
    point = None if point_arr is None else PhaseSpacePoint.from_array(point_arr)
    run.close()
    top.close()

    return RunConfig(
        constants=consts, fields=fields, discretization=disc,
        initial_state=f0, integrator=integrator, observables=observables,
        final_time=final_time, trajectories=trajectories, seed=seed,
        event_cap=event_cap, density=density, max_order=max_order,
        slices=slices, grid_bounds=grid_bounds, grid_shape=grid_shape,
        point=point, raw=data,
    )


def _parse_initial_state(sec: "_Section") -> InitialWigner:
    kind = sec.string("kind")
    if kind == "gaussian":
        state = GaussianPacket(
            center=PhaseSpacePoint.from_array(sec.vector4("center")),
            sigma_p=sec.number("sigma_p"),
            sigma_x=sec.number("sigma_x"),
        )
    elif kind == "two_packet":
        kwargs = {}
        kappa = sec.number("kappa", default=None)
        if kappa is not None:
            kwargs["kappa"] = kappa
        state = TwoPacketSurrogate(
            center=PhaseSpacePoint.from_array(sec.vector4("center")),
            sigma_p=sec.number("sigma_p"),
            sigma_x=sec.number("sigma_x"),
            separation=sec.number("separation"),
            sep_axis=sec.string("sep_axis", default="x"),
            phase=sec.number("phase", default=0.0),
            hbar=sec.number("hbar", default=1.0),
            **kwargs,
        )
    else:
        raise ConfigError(
            f"{sec.path}.kind must be 'gaussian' or 'two_packet', "
            f"got {kind!r}"
        )
    sec.close()
    return state


def _parse_observable(sec: "_Section") -> Observable:
    kind = sec.string("kind")
    cell = sec.box("cell", default=None)
    sec.close()
    if cell is None:
        return Observable(kind=kind)
    return Observable(kind=kind, cell=tuple(map(tuple, cell.tolist())))


def _parse_observables(top: "_Section") -> tuple[Observable, ...]:
    single = "observable" in top.data
    many = "observables" in top.data
    if single and many:
        raise ConfigError("give either 'observable' or 'observables', not both")
    if many:
        raw = top.data["observables"]
        if not isinstance(raw, list) or not raw:
            raise ConfigError("observables must be a non-empty list")
        return tuple(
            _parse_observable(_Section(f"observables[{i}]", entry,
                                       ("kind", "cell")))
            for i, entry in enumerate(raw)
        )
    if single:
        return (_parse_observable(top.section("observable")),)
    return (Observable(kind="constant_one"),)


_SECTION_KEYS = {
    "constants": ("hbar", "mass", "charge"),
    "fields": ("b0", "b1", "ex", "ey"),
    "discretization": ("delta_p", "delta_x"),
    "initial_state": ("kind", "center", "sigma_p", "sigma_x", "separation",
                      "sep_axis", "phase", "kappa", "hbar"),
    "observable": ("kind", "cell"),
    "integrator": ("method", "step_count_per_unit_time"),
    "run": ("final_time", "trajectories", "seed", "event_cap", "density",
            "max_order", "slices", "grid_bounds", "grid_shape", "point"),
}

_MISSING = object()


class _Section:
    """One JSON object with a fixed key set and dotted-path errors."""

    def __init__(self, path: str, data: dict, allowed):
        if not isinstance(data, dict):
            raise ConfigError(f"{path or 'config'} must be a JSON object")
        self.path = path
        self.data = data
        self.allowed = set(allowed)

    def _label(self, key: str) -> str:
        return f"{self.path}.{key}" if self.path else key

    def _fetch(self, key: str, default):
        """(value, present); absent without default is an error."""
        if key in self.data:
            return self.data[key], True
        if default is _MISSING:
            raise ConfigError(f"missing required key {self._label(key)}")
        return default, False

    def section(self, key: str, optional: bool = False) -> "_Section":
        raw, _ = self._fetch(key, {} if optional else _MISSING)
        return _Section(self._label(key), raw, _SECTION_KEYS[key])

    def number(self, key: str, default=_MISSING):
        value, present = self._fetch(key, default)
        if not present:
            return value
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{self._label(key)} must be a number")
        return float(value)

    def integer(self, key: str, default=_MISSING):
        value, present = self._fetch(key, default)
        if not present:
            return value
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{self._label(key)} must be an integer")
        return int(value)

    def string(self, key: str, default=_MISSING):
        value, present = self._fetch(key, default)
        if not present:
            return value
        if not isinstance(value, str):
            raise ConfigError(f"{self._label(key)} must be a string")
        return value

    def vector4(self, key: str, default=_MISSING):
        value, present = self._fetch(key, default)
        if not present:
            return value
        if (not isinstance(value, list) or len(value) != 4
                or any(isinstance(v, bool) or not isinstance(v, (int, float))
                       for v in value)):
            raise ConfigError(
                f"{self._label(key)} must be four numbers (px, py, x, y)"
            )
        return np.array(value, dtype=np.float64)

    def box(self, key: str, default=_MISSING):
        value, present = self._fetch(key, default)
        if not present:
            return value
        ok = (isinstance(value, list) and len(value) == 4
              and all(isinstance(r, list) and len(r) == 2
                      and all(not isinstance(v, bool)
                              and isinstance(v, (int, float)) for v in r)
                      for r in value))
        if not ok:
            raise ConfigError(
                f"{self._label(key)} must be four [low, high] pairs "
                "in (px, py, x, y) order"
            )
        arr = np.array(value, dtype=np.float64)
        if not np.all(arr[:, 0] < arr[:, 1]):
            raise ConfigError(f"{self._label(key)} intervals need low < high")
        return arr

    def shape4(self, key: str, default=_MISSING):
        value, present = self._fetch(key, default)
        if not present:
            return value
        if (not isinstance(value, list) or len(value) != 4
                or any(isinstance(v, bool) or not isinstance(v, int)
                       or v < 1 for v in value)):
            raise ConfigError(
                f"{self._label(key)} must be four positive integers"
            )
        return tuple(int(v) for v in value)

    def close(self) -> None:
        unknown = set(self.data) - self.allowed
        if unknown:
            key = sorted(unknown)[0]
            raise ConfigError(f"unknown config key {self._label(key)}")
