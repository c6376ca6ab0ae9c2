"""Physical model: constants, linear fields, initial states, observables.

Units are reduced: hbar, mass and charge default to 1.  Phase space is the
four-dimensional (px, py, x, y); arrays of states use that column order
throughout the package.

The magnetic field is out of plane with a linear gradient, B(y) = B0 + B1*y,
and the electric field is E = (Ex*x, Ey*y, 0).  Both are time independent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError

# Column order for (n, 4) state arrays.
PX, PY, X, Y = 0, 1, 2, 3
AXIS_NAMES = ("px", "py", "x", "y")

# Conjugate pairing used by the two-packet cross term: a separation along a
# position axis oscillates in the matching momentum axis and vice versa.
CONJUGATE_AXIS = {PX: X, PY: Y, X: PX, Y: PY}


@dataclass(frozen=True)
class PhysicalConstants:
    hbar: float = 1.0
    mass: float = 1.0
    charge: float = 1.0

    def __post_init__(self):
        if not (self.hbar > 0.0):
            raise ConfigError("hbar must be positive")
        if not (self.mass > 0.0):
            raise ConfigError("mass must be positive")
        if self.charge == 0.0:
            raise ConfigError("charge must be nonzero")


@dataclass(frozen=True)
class FieldConfig:
    """Linear field profile: B_z(y) = b0 + b1*y, E = (ex*x, ey*y, 0)."""

    b0: float = 0.0
    b1: float = 0.0
    ex: float = 0.0
    ey: float = 0.0

    def __post_init__(self):
        for name in ("b0", "b1", "ex", "ey"):
            if not math.isfinite(getattr(self, name)):
                raise ConfigError(f"field coefficient {name} must be finite")


@dataclass(frozen=True)
class PhaseSpacePoint:
    px: float
    py: float
    x: float
    y: float

    def as_array(self) -> np.ndarray:
        return np.array([self.px, self.py, self.x, self.y], dtype=np.float64)

    @staticmethod
    def from_array(arr) -> "PhaseSpacePoint":
        px, py, x, y = (float(v) for v in arr)
        return PhaseSpacePoint(px, py, x, y)


def lorentz_force(pt: PhaseSpacePoint, fields: FieldConfig,
                  consts: PhysicalConstants) -> tuple[float, float]:
    """In-plane force e*(E + v x B) at a phase-space point.

    With B = (0, 0, b0 + b1*y) and v = p/m this is

        Fx = e * (ex*x + py*(b0 + b1*y)/m)
        Fy = e * (ey*y - px*(b0 + b1*y)/m)
    """
    bz = fields.b0 + fields.b1 * pt.y
    e, m = consts.charge, consts.mass
    fx = e * (fields.ex * pt.x + pt.py * bz / m)
    fy = e * (fields.ey * pt.y - pt.px * bz / m)
    return fx, fy


def field_params(fields: FieldConfig, consts: PhysicalConstants) -> np.ndarray:
    """Pack (b0, b1, ex, ey, charge, mass) for the kernel modules."""
    return np.array(
        [fields.b0, fields.b1, fields.ex, fields.ey, consts.charge, consts.mass],
        dtype=np.float64,
    )


# ---------------------------------------------------------------------------
# Initial Wigner states
# ---------------------------------------------------------------------------


class InitialWigner:
    """Base for initial quasi-distributions.

    Subclasses implement ``values(states)`` on (n, 4) arrays; ``evaluate``
    is the scalar convenience wrapper.  ``support_box(nsigma)`` returns a
    (4, 2) array of per-axis bounds that contains all but a negligible tail
    of the state's mass; quadratures and samplers build their boxes from it.
    """

    def values(self, states: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def evaluate(self, pt: PhaseSpacePoint) -> float:
        return float(self.values(pt.as_array()[None, :])[0])

    def support_box(self, nsigma: float = 8.0) -> np.ndarray:
        raise NotImplementedError


def _axis_index(name: str) -> int:
    try:
        return AXIS_NAMES.index(name)
    except ValueError:
        raise ConfigError(
            f"unknown axis {name!r}, expected one of {AXIS_NAMES}"
        ) from None


def _gauss_product(states, center, widths):
    # product of four normal densities, vectorised over rows
    z = (states - center) / widths
    norm = 1.0 / ((2.0 * math.pi) ** 2 * np.prod(widths))
    return norm * np.exp(-0.5 * np.sum(z * z, axis=1))


@dataclass(frozen=True)
class GaussianPacket(InitialWigner):
    """Normalised product of four Gaussians; nonnegative everywhere.

    ``sigma_p`` applies to both momentum axes and ``sigma_x`` to both
    position axes.  Peak value is (2*pi*sigma_p*sigma_x)**-2.
    """

    center: PhaseSpacePoint = field(default_factory=lambda: PhaseSpacePoint(0, 0, 0, 0))
    sigma_p: float = 1.0
    sigma_x: float = 1.0

    def __post_init__(self):
        if not (self.sigma_p > 0.0 and self.sigma_x > 0.0):
            raise ConfigError("packet spreads must be positive")

    def _widths(self):
        return np.array([self.sigma_p, self.sigma_p, self.sigma_x, self.sigma_x])

    def values(self, states: np.ndarray) -> np.ndarray:
        return _gauss_product(states, self.center.as_array(), self._widths())

    def support_box(self, nsigma: float = 8.0) -> np.ndarray:
        c = self.center.as_array()
        w = self._widths() * nsigma
        return np.stack([c - w, c + w], axis=1)

    @property
    def total_mass(self) -> float:
        return 1.0

    @property
    def abs_mass(self) -> float:
        return 1.0


@dataclass(frozen=True)
class TwoPacketSurrogate(InitialWigner):
    """Two displaced Gaussians plus an oscillatory cross term.

    Stand-in for the Wigner function of a superposition of two packets:
    packets of common spread sit at ``center +- separation/2`` along
    ``sep_axis``, and the cross term oscillates along the conjugate axis,

        f = [g1 + g2 + 2*g_mid*cos(kappa*(u - u_c) + phase)] / Z

    where g_mid is the same-shape Gaussian at the midpoint, u is the
    conjugate coordinate and Z normalises the integral to one exactly.
    ``kappa`` defaults to separation/hbar.  For any separation > 0 the value
    at the midpoint is negative when phase = pi.
    """

    center: PhaseSpacePoint = field(default_factory=lambda: PhaseSpacePoint(0, 0, 0, 0))
    sigma_p: float = 1.0
    sigma_x: float = 1.0
    separation: float = 2.0
    sep_axis: str = "x"
    phase: float = 0.0
    kappa: float | None = None
    hbar: float = 1.0

    def __post_init__(self):
        if not (self.sigma_p > 0.0 and self.sigma_x > 0.0):
            raise ConfigError("packet spreads must be positive")
        if not (self.separation > 0.0):
            raise ConfigError("packet separation must be positive")
        _axis_index(self.sep_axis)

    def _widths(self):
        return np.array([self.sigma_p, self.sigma_p, self.sigma_x, self.sigma_x])

    def _geometry(self):
        axis = _axis_index(self.sep_axis)
        conj = CONJUGATE_AXIS[axis]
        widths = self._widths()
        kappa = self.separation / self.hbar if self.kappa is None else self.kappa
        c = self.center.as_array()
        offset = np.zeros(4)
        offset[axis] = 0.5 * self.separation
        return axis, conj, widths, kappa, c, offset

    def _norm_constant(self) -> float:
        # integral of the bracket: 1 + 1 + 2*cos(phase)*exp(-kappa^2 s_u^2/2)
        _, conj, widths, kappa, _, _ = self._geometry()
        damp = math.exp(-0.5 * (kappa * widths[conj]) ** 2)
        return 2.0 + 2.0 * math.cos(self.phase) * damp

    def values(self, states: np.ndarray) -> np.ndarray:
        _, conj, widths, kappa, c, offset = self._geometry()
        g1 = _gauss_product(states, c - offset, widths)
        g2 = _gauss_product(states, c + offset, widths)
        gm = _gauss_product(states, c, widths)
        osc = np.cos(kappa * (states[:, conj] - c[conj]) + self.phase)
        return (g1 + g2 + 2.0 * gm * osc) / self._norm_constant()

    def support_box(self, nsigma: float = 8.0) -> np.ndarray:
        axis, _, widths, _, c, offset = self._geometry()
        pad = widths * nsigma
        pad[axis] += 0.5 * self.separation
        return np.stack([c - pad, c + pad], axis=1)

    @property
    def total_mass(self) -> float:
        return 1.0

    def mixture_components(self):
        """Means and weights of the three-Gaussian envelope g1 + g2 + 2*g_mid.

        |f| <= (g1 + g2 + 2*g_mid)/Z pointwise, so rejection sampling from
        this mixture with acceptance |bracket|/(g1+g2+2*g_mid) draws exactly
        from |f| / integral(|f|).
        """
        _, _, widths, _, c, offset = self._geometry()
        means = np.stack([c - offset, c + offset, c])
        weights = np.array([0.25, 0.25, 0.5])
        return means, widths, weights


@dataclass(frozen=True)
class TabulatedState(InitialWigner):
    """Initial state read off a stored phase-space grid.

    ``values`` interpolates multilinearly between cell centres and is zero
    outside the grid bounds.  Sampling treats the grid as piecewise constant
    so that sampling density and stored density agree cell by cell.
    """

    grid: "object"  # WignerGrid; untyped here to avoid a circular import

    def __post_init__(self):
        if self.grid.values.size == 0 or not np.any(self.grid.values):
            raise ConfigError("tabulated initial state is empty")

    def values(self, states: np.ndarray) -> np.ndarray:
        return self.grid.interpolate(states)

    def support_box(self, nsigma: float = 8.0) -> np.ndarray:
        return np.array(self.grid.bounds, dtype=np.float64)

    @property
    def total_mass(self) -> float:
        return float(self.grid.total_mass())

    @property
    def abs_mass(self) -> float:
        return float(self.grid.abs_mass())


def eval_initial_wigner(state: InitialWigner, pt: PhaseSpacePoint) -> float:
    return state.evaluate(pt)


# ---------------------------------------------------------------------------
# Observables
# ---------------------------------------------------------------------------

OBSERVABLE_KINDS = (
    "constant_one",
    "mean_x",
    "mean_y",
    "mean_px",
    "mean_py",
    "kinetic_energy",
    "indicator_cell",
)

# Kinds whose sign cannot flip anywhere in phase space; used when choosing
# the default start-sampling density.
_FIXED_SIGN = {"constant_one", "kinetic_energy", "indicator_cell"}

_COORD_KINDS = {"mean_px": PX, "mean_py": PY, "mean_x": X, "mean_y": Y}


@dataclass(frozen=True)
class Observable:
    kind: str
    cell: tuple[tuple[float, float], ...] | None = None

    def __post_init__(self):
        if self.kind not in OBSERVABLE_KINDS:
            raise ConfigError(
                f"unknown observable {self.kind!r}; valid kinds are "
                f"{', '.join(OBSERVABLE_KINDS)}"
            )
        if self.kind == "indicator_cell":
            if self.cell is None or len(self.cell) != 4:
                raise ConfigError(
                    "indicator_cell needs a cell: four (low, high) intervals "
                    "in (px, py, x, y) order"
                )
            for lo, hi in self.cell:
                if not (lo < hi):
                    raise ConfigError("indicator_cell intervals must have low < high")
        elif self.cell is not None:
            raise ConfigError(f"observable {self.kind!r} takes no cell")

    @property
    def fixed_sign(self) -> bool:
        return self.kind in _FIXED_SIGN

    def values(self, states: np.ndarray, consts: PhysicalConstants) -> np.ndarray:
        if self.kind == "constant_one":
            return np.ones(states.shape[0])
        if self.kind in _COORD_KINDS:
            return states[:, _COORD_KINDS[self.kind]].copy()
        if self.kind == "kinetic_energy":
            return (states[:, PX] ** 2 + states[:, PY] ** 2) / (2.0 * consts.mass)
        inside = np.ones(states.shape[0], dtype=bool)
        for axis, (lo, hi) in enumerate(self.cell):
            inside &= (states[:, axis] >= lo) & (states[:, axis] < hi)
        return inside.astype(np.float64)

    def bound(self, box: np.ndarray, consts: PhysicalConstants) -> float:
        """sup |A| over an axis-aligned box; exact for this closed set."""
        if self.kind == "constant_one" or self.kind == "indicator_cell":
            return 1.0
        if self.kind in _COORD_KINDS:
            lo, hi = box[_COORD_KINDS[self.kind]]
            return max(abs(lo), abs(hi))
        pmax2 = np.max(np.abs(box[PX])) ** 2 + np.max(np.abs(box[PY])) ** 2
        return pmax2 / (2.0 * consts.mass)


def eval_observable(obs: Observable, pt: PhaseSpacePoint,
                    consts: PhysicalConstants) -> float:
    return float(obs.values(pt.as_array()[None, :], consts)[0])
