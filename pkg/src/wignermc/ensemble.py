"""Phase-space grids and the sliced evolution engine.

A :class:`WignerGrid` stores a signed density on a regular 4D grid in
absolute scale: cell values are density estimates, so integrals against the
grid are plain value * cell-volume sums.  The slice engine alternates a
forward walk over one time slice with a deposit onto such a grid, then
restarts the next slice from the grid.  Restarting costs a binning error
that shrinks with the grid resolution; everything else in the chain is
unbiased, which is why grid refinement is the knob to turn when sliced and
single-shot answers drift apart.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from . import backend
from ._philox import CHANNEL_JITTER, CHANNEL_START
from ._stats import mean_and_stderr
from .errors import ConfigError, EstimationError
from .forward import DEFAULT_EVENT_CAP, forward_ensemble
from .model import (FieldConfig, InitialWigner, Observable,
                    PhysicalConstants, TabulatedState)
from .stencil import Stencil
from .trajectory import IntegratorSettings


@dataclass(frozen=True, eq=False)
class WignerGrid:
    """Signed density tabulated on a regular box grid.

    ``values[i, j, k, l]`` is the density in the cell with index (i, j, k, l)
    along (px, py, x, y); bounds are the outer box edges.
    """

    bounds: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        bounds = np.asarray(self.bounds, dtype=np.float64)
        values = np.asarray(self.values, dtype=np.float64)
        if bounds.shape != (4, 2):
            raise ConfigError("grid bounds must be four (low, high) pairs")
        if np.any(bounds[:, 0] >= bounds[:, 1]):
            raise ConfigError("grid bounds must have low < high")
        if values.ndim != 4 or min(values.shape) < 1:
            raise ConfigError("grid values must be a 4D array")
        if not np.all(np.isfinite(values)):
            raise ConfigError("grid values must be finite")
        object.__setattr__(self, "bounds", bounds)
        object.__setattr__(self, "values", values)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.values.shape

    def cell_widths(self) -> np.ndarray:
        return (self.bounds[:, 1] - self.bounds[:, 0]) / np.array(self.shape)

    def cell_volume(self) -> float:
        return float(np.prod(self.cell_widths()))

    def cell_lower(self, cells: np.ndarray) -> np.ndarray:
        """Lower corners of cells given by flat index, shape (n, 4)."""
        idx = np.stack(np.unravel_index(np.asarray(cells), self.shape), axis=1)
        return self.bounds[:, 0] + idx * self.cell_widths()

    def axis_centers(self, axis: int) -> np.ndarray:
        lo, hi = self.bounds[axis]
        n = self.shape[axis]
        w = (hi - lo) / n
        return lo + w * (np.arange(n) + 0.5)

    def total_mass(self) -> float:
        return float(self.values.sum()) * self.cell_volume()

    def abs_mass(self) -> float:
        return float(np.abs(self.values).sum()) * self.cell_volume()

    def interpolate(self, states: np.ndarray) -> np.ndarray:
        """Multilinear interpolation of cell-center values, zero outside.

        Within half a cell of the boundary there is no opposite neighbour,
        so the edge value extends flat to the box edge.
        """
        states = np.asarray(states, dtype=np.float64)
        lo = self.bounds[:, 0]
        w = self.cell_widths()
        inside = np.ones(states.shape[0], dtype=bool)
        for axis in range(4):
            inside &= ((states[:, axis] >= self.bounds[axis, 0])
                       & (states[:, axis] <= self.bounds[axis, 1]))
        t = (states - lo) / w - 0.5
        base = np.floor(t).astype(np.int64)
        frac = t - base
        for axis, n in enumerate(self.shape):
            low = base[:, axis] < 0
            base[low, axis] = 0
            frac[low, axis] = 0.0
            high = base[:, axis] > n - 2
            base[high, axis] = max(n - 2, 0)
            frac[high, axis] = 1.0 if n > 1 else 0.0
        out = np.zeros(states.shape[0])
        for corner in itertools.product((0, 1), repeat=4):
            weight = np.ones(states.shape[0])
            idx = []
            for axis, bit in enumerate(corner):
                weight *= frac[:, axis] if bit else 1.0 - frac[:, axis]
                idx.append(np.minimum(base[:, axis] + bit,
                                      self.shape[axis] - 1))
            out += weight * self.values[tuple(idx)]
        out[~inside] = 0.0
        return out


def accumulate_grid(states: np.ndarray, weights: np.ndarray,
                    bounds: np.ndarray, shape) -> tuple[WignerGrid, float]:
    """Deposit weighted samples as a density grid.

    ``weights`` must already include the 1/N normalisation, so the returned
    grid is in absolute density scale.  The second return value is the
    total |weight| that fell outside the bounds and was lost.
    """
    bounds = np.asarray(bounds, dtype=np.float64)
    shape = tuple(int(s) for s in shape)
    if len(shape) != 4 or min(shape) < 1:
        raise ConfigError("grid shape must be four positive extents")
    widths = (bounds[:, 1] - bounds[:, 0]) / np.array(shape)
    idx = np.floor((states - bounds[:, 0]) / widths).astype(np.int64)
    inside = np.ones(states.shape[0], dtype=bool)
    for axis in range(4):
        inside &= (idx[:, axis] >= 0) & (idx[:, axis] < shape[axis])
    flat = np.ravel_multi_index(
        tuple(idx[inside, axis] for axis in range(4)), shape)
    acc = np.zeros(int(np.prod(shape)))
    np.add.at(acc, flat, weights[inside])
    volume = float(np.prod(widths))
    grid = WignerGrid(bounds, (acc / volume).reshape(shape))
    lost = float(np.sum(np.abs(weights[~inside])))
    return grid, lost


@dataclass(frozen=True)
class SliceStats:
    """Per-slice diagnostics and observable estimates."""

    end_time: float
    estimates: np.ndarray
    stderrs: np.ndarray
    capped_fraction: float
    lost_fraction: float
    grid_total_mass: float
    grid_abs_mass: float


@dataclass(frozen=True)
class SliceResult:
    boundaries: np.ndarray
    stats: tuple[SliceStats, ...]
    final_grid: WignerGrid

    def series(self, obs_index: int) -> np.ndarray:
        return np.array([s.estimates[obs_index] for s in self.stats])


def run_slices(f0: InitialWigner, fields: FieldConfig,
               consts: PhysicalConstants, stencil: Stencil,
               final_time: float, n_slices: int, n_traj: int,
               bounds: np.ndarray, shape, seed: int,
               settings: IntegratorSettings | None = None,
               observables: tuple[Observable, ...] = (),
               event_cap: int = DEFAULT_EVENT_CAP, task_id: int = 0,
               workers: int | None = None) -> SliceResult:
    """Evolve through equal time slices, restarting from a grid each time.

    Slice k runs under task id ``task_id + k``.  Observable estimates are
    taken from the particles before they are binned, so only later slices
    feel a given slice's binning error.
    """
    if n_slices < 1:
        raise ConfigError("need at least one slice")
    if final_time <= 0.0:
        raise ConfigError("final_time must be positive for sliced evolution")
    if workers is not None:
        backend.set_workers(workers)
    settings = settings or IntegratorSettings()
    boundaries = np.linspace(0.0, final_time, n_slices + 1)
    dt = final_time / n_slices

    stats = []
    current: InitialWigner = f0
    for k in range(n_slices):
        channel = CHANNEL_START if k == 0 else CHANNEL_JITTER
        states, carried, counts, capped = forward_ensemble(
            current, fields, consts, stencil, dt, n_traj, seed,
            settings=settings, event_cap=event_cap, task_id=task_id + k,
            start_channel=channel)
        keep = ~capped
        n_used = int(keep.sum())
        states, carried = states[keep], carried[keep]

        ests = np.empty(len(observables))
        errs = np.empty(len(observables))
        for j, obs in enumerate(observables):
            ests[j], errs[j] = mean_and_stderr(carried * obs.values(states, consts))

        grid, lost = accumulate_grid(states, carried / n_used, bounds, shape)
        if not np.any(grid.values):
            raise EstimationError(
                f"slice {k} deposited no mass inside the grid bounds"
            )
        carried_abs = float(np.sum(np.abs(carried))) / n_used
        stats.append(SliceStats(
            end_time=float(boundaries[k + 1]),
            estimates=ests,
            stderrs=errs,
            capped_fraction=1.0 - n_used / n_traj,
            lost_fraction=lost / carried_abs if carried_abs else 0.0,
            grid_total_mass=grid.total_mass(),
            grid_abs_mass=grid.abs_mass(),
        ))
        current = TabulatedState(grid)

    return SliceResult(boundaries, tuple(stats), grid)
