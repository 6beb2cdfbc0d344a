"""Numerical toolkit for the two-parameter mean field equation

    -Laplace u = rho1 (h e^u / int h e^u - 1) - rho2 (h e^-u / int h e^-u - 1)

on the flat torus and the round sphere: spectral discretization, the
fixed-point map T and Psi = Id - T, Newton-Krylov solvers with continuation,
blow-up diagnostics and Leray-Schauder degree counting.
"""

from .blowup import detect_peaks, fit_bubble, local_mass, mass_table, track_quantization, wall_approach_path
from .config import ExperimentConfig
from .degree import (
    MultistartConfig,
    ToyCubicMap,
    count_degree,
    degree_formula,
    parity_certificate,
    truncate,
)
from .errors import (
    BlowUpSuspected,
    BranchLost,
    ConfigurationError,
    DegenerateZero,
    MeanFieldError,
    NonConvergence,
    RadiusError,
    WallError,
)
from .operator import (
    EIGHT_PI,
    Parameters,
    SolutionRecord,
    energy,
    eval_psi,
    eval_T,
    jacobian_action,
    make_parameters,
    residual_norm,
    wall_distance,
    window_index,
)
from .solver import (
    ContinuationPath,
    SolverConfig,
    continue_path,
    homotopy_path,
    solve,
    solve_multistart,
)
from .surface import SpectralField, SphereSurface, TorusSurface, build_surface
from .weights import weight_function

__version__ = "0.1.0"
