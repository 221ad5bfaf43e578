"""
Solitary waves and dynamics for the radial 3D quintic Schrodinger equation
with a subcritical focusing perturbation,

    i u_t = -Lap u - |u|^4 u - eps f(u).

Modules: ``radial`` (grids, quadrature, Laplacian), ``profiles`` (W and
friends), ``resolvent`` (free and full resolvents), ``construct`` (solitary
waves), ``functionals`` (mass, energy, action, Pohozaev), ``dynamics``
(time evolution and classification), ``cli``.
"""

from .construct import ConstructConfig, SolitaryWave, construct_Q, newton_oracle
from .dynamics import EvolutionConfig, EvolutionState, classify, dichotomy_sweep, evolve, step
from .errors import (
    AssumptionError,
    BallExitError,
    ConvergenceError,
    CritNLSError,
    FactorizationError,
    GridMismatchError,
    HypothesisError,
    ResolutionError,
    SizingError,
    StabilityError,
)
from .functionals import evaluate, wave_at, wave_report
from .profiles import Nonlinearity, lambda1, omega1
from .radial import RadialGrid, Stretch, make_grid

__version__ = "0.1.0"
