"""Signed-particle Monte Carlo for Wigner transport in linear fields.

The public surface: model objects (fields, constants, initial states,
observables), the scattering stencil, forward and backward walk drivers,
the slice-evolution engine, deterministic term quadrature and the run
configuration loader.  Internal modules (kernels, RNG plumbing) stay
behind their underscore.
"""

from .backward import (BackwardResult, TermEstimate, estimate_wigner_point,
                       run_backward, run_backward_term)
from .config import RunConfig, load_config, parse_config
from .ensemble import (SliceResult, SliceStats, WignerGrid, accumulate_grid,
                       run_slices)
from .errors import (ConfigError, EstimationError, NumericalError,
                     WignerMCError)
from .forward import ForwardResult, forward_ensemble, run_forward
from .model import (FieldConfig, GaussianPacket, InitialWigner, Observable,
                    PhaseSpacePoint, PhysicalConstants, TabulatedState,
                    TwoPacketSurrogate)
from .oracle import (FredholmReport, TermQuadrature, expansion_term_backward,
                     expansion_term_forward, expansion_terms, fredholm_check,
                     transport_kernel_matrix)
from .sampling import make_sampler
from .stencil import Discretization, Stencil, build_stencil, scattering_rate
from .trajectory import IntegratorSettings, propagate_states

__version__ = "0.1.0"

__all__ = [
    "BackwardResult",
    "ConfigError",
    "Discretization",
    "EstimationError",
    "FieldConfig",
    "ForwardResult",
    "FredholmReport",
    "GaussianPacket",
    "InitialWigner",
    "IntegratorSettings",
    "NumericalError",
    "Observable",
    "PhaseSpacePoint",
    "PhysicalConstants",
    "RunConfig",
    "SliceResult",
    "SliceStats",
    "Stencil",
    "TabulatedState",
    "TermEstimate",
    "TermQuadrature",
    "TwoPacketSurrogate",
    "WignerGrid",
    "WignerMCError",
    "accumulate_grid",
    "build_stencil",
    "estimate_wigner_point",
    "expansion_term_backward",
    "expansion_term_forward",
    "expansion_terms",
    "forward_ensemble",
    "fredholm_check",
    "load_config",
    "make_sampler",
    "parse_config",
    "propagate_states",
    "run_backward",
    "run_backward_term",
    "run_forward",
    "run_slices",
    "scattering_rate",
    "transport_kernel_matrix",
    "__version__",
]
