"""chemostokes: a finite-volume laboratory for a regularized
chemotaxis-Stokes system with degenerate diffusion.

Layers:
  exponents       scalar algebra of the integrability bootstrap
  regularization  eps-families (diffusivity lift, sensitivity cutoff)
  grid/spectral   MAC operators and exact transform solvers
  solver          conservative stepping and the run driver
  diagnostics     records, running tallies, verification checks
  cli             command-line front end
"""

from .config import (DiagnosticsParams, ICSpec, ModelParams, SimConfig,
                     TimeParams, parse_config)
from .errors import (ChemoStokesError, ConfigError, ExponentDomainError,
                     NumericalError)
from .grid import Grid
from .solver import FieldState, RunResult, init_state, run, step
from .spectral import SpectralCache

__version__ = "0.1.0"

__all__ = [
    "ChemoStokesError", "ConfigError", "ExponentDomainError",
    "NumericalError", "Grid", "SpectralCache", "FieldState", "RunResult",
    "ModelParams", "TimeParams", "ICSpec", "DiagnosticsParams", "SimConfig",
    "parse_config", "init_state", "run", "step", "__version__",
]
