"""Finite-difference scattering stencil for the field-gradient term.

The gradient part of the transport equation,

    (b1 * hbar^2 * e / 12 m) * (d^3 f / dpy^2 dx  -  d^3 f / dpx dpy dy),

is discretised on phase-space shifts (delta_p, delta_x) as a 15-point
stencil: the first third-derivative uses a second central difference in py
composed with a first central difference in x, the second uses first central
differences in px, py and y.  Folding the difference denominators into a
single rate

    gamma = b1 * hbar^2 * e / (96 * m * delta_p^2 * delta_x)

leaves integer coefficients alpha with sum(alpha) = 1 (the identity term
rides along) and sum(|alpha|) = 41.  The signed-particle walks draw terms
with probability |alpha| / 41 and carry 41 * sign(alpha) in the weight.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .model import FieldConfig, PhaseSpacePoint, PhysicalConstants

# (di_px, di_py), (dj_x, dj_y), alpha.  Order is fixed: it defines the
# cumulative table used when sampling transitions, so changing it changes
# every seeded run.
STENCIL_TABLE = (
    ((0, 1), (1, 0), 4.0),
    ((0, 0), (1, 0), -8.0),
    ((0, -1), (1, 0), 4.0),
    ((0, 1), (-1, 0), -4.0),
    ((0, 0), (-1, 0), 8.0),
    ((0, -1), (-1, 0), -4.0),
    ((1, 1), (0, 1), -1.0),
    ((1, -1), (0, 1), 1.0),
    ((-1, 1), (0, 1), 1.0),
    ((-1, -1), (0, 1), -1.0),
    ((1, 1), (0, -1), 1.0),
    ((1, -1), (0, -1), -1.0),
    ((-1, 1), (0, -1), -1.0),
    ((-1, -1), (0, -1), 1.0),
    ((0, 0), (0, 0), 1.0),
)

ABS_TOTAL = 41.0


@dataclass(frozen=True)
class Discretization:
    delta_p: float
    delta_x: float

    def __post_init__(self):
        if not (self.delta_p > 0.0 and self.delta_x > 0.0):
            raise ConfigError("delta_p and delta_x must be positive")


@dataclass(frozen=True)
class StencilTerm:
    di: tuple[int, int]  # momentum shift in units of delta_p (px, py)
    dj: tuple[int, int]  # position shift in units of delta_x (x, y)
    alpha: float


def scattering_rate(disc: Discretization, fields: FieldConfig,
                    consts: PhysicalConstants) -> float:
    gamma = (fields.b1 * consts.hbar ** 2 * consts.charge
             / (96.0 * consts.mass * disc.delta_p ** 2 * disc.delta_x))
    if gamma < 0.0:
        raise ConfigError(
            "scattering rate is negative (b1 and charge must not have "
            "opposite signs); flip the sign of b1 or run with b1 = 0"
        )
    return gamma


@dataclass(frozen=True)
class Stencil:
    terms: tuple[StencilTerm, ...]
    gamma: float
    disc: Discretization

    @property
    def classical(self) -> bool:
        """True when gamma vanishes and walks never scatter."""
        return self.gamma == 0.0

    @property
    def abs_total(self) -> float:
        return ABS_TOTAL

    def offsets(self) -> np.ndarray:
        """(15, 4) state-space shifts (px, py, x, y), positive orientation."""
        out = np.empty((len(self.terms), 4))
        for idx, term in enumerate(self.terms):
            out[idx, 0] = term.di[0] * self.disc.delta_p
            out[idx, 1] = term.di[1] * self.disc.delta_p
            out[idx, 2] = term.dj[0] * self.disc.delta_x
            out[idx, 3] = term.dj[1] * self.disc.delta_x
        return out

    def alphas(self) -> np.ndarray:
        return np.array([t.alpha for t in self.terms])

    def signs(self) -> np.ndarray:
        return np.array([1.0 if t.alpha > 0 else -1.0 for t in self.terms])

    def probabilities(self) -> np.ndarray:
        return np.array([abs(t.alpha) for t in self.terms]) / ABS_TOTAL

    def cumulative(self) -> np.ndarray:
        # integer cumsum over |alpha| keeps the last entry exactly 1.0
        cum = np.cumsum([abs(t.alpha) for t in self.terms]) / ABS_TOTAL
        return cum


def build_stencil(disc: Discretization, fields: FieldConfig,
                  consts: PhysicalConstants) -> Stencil:
    """Stencil plus rate for the given discretisation and fields.

    gamma = 0 (b1 = 0) is the classical mode: the table is still returned
    so dumps stay well defined, but walk drivers skip scattering entirely.
    """
    gamma = scattering_rate(disc, fields, consts)
    terms = tuple(StencilTerm(di, dj, alpha) for di, dj, alpha in STENCIL_TABLE)
    return Stencil(terms=terms, gamma=gamma, disc=disc)


def sample_transition(stencil: Stencil, u: float) -> int:
    """Index of the term selected by a uniform u in [0, 1)."""
    if not (0.0 <= u < 1.0):
        raise ConfigError("transition draw must lie in [0, 1)")
    return int(np.searchsorted(stencil.cumulative(), u, side="right"))


def apply_scattering_operator(f, pt: PhaseSpacePoint, stencil: Stencil) -> float:
    """gamma * sum_k alpha_k * f(shifted point).

    Approximates gamma*f + (b1 hbar^2 e / 12 m)(f_pypyx - f_pxpyy) with
    O(delta^2) error; exact on polynomials of total degree <= 3.
    """
    dp, dx = stencil.disc.delta_p, stencil.disc.delta_x
    acc = 0.0
    for term in stencil.terms:
        shifted = PhaseSpacePoint(
            pt.px + term.di[0] * dp,
            pt.py + term.di[1] * dp,
            pt.x + term.dj[0] * dx,
            pt.y + term.dj[1] * dx,
        )
        acc += term.alpha * f(shifted)
    return stencil.gamma * acc
