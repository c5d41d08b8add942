"""Intrusive uncertainty quantification for the uncertain compressible Euler equations.

Multi-element stochastic Galerkin with a hyperbolicity-preserving limiter and
moment filters, a multi-element entropy-closure (dual variable) moment
method, exact-Riemann and collocation references, statistics, and a CLI.
"""

from .basis import (
    ElementPartition,
    GpcBasis,
    QuadratureRule,
    build_basis,
    build_partition,
    build_quadrature,
)
from .config import ConfigError, RunConfig, parse_config
from .euler import (
    GasModel,
    InadmissibleStateError,
    entropy,
    entropy_gradient,
    entropy_gradient_inverse,
    is_admissible,
    max_wave_speed,
    physical_flux,
    pressure,
)
from .fv import (
    MomentField,
    RunResult,
    RunStats,
    StructuredGrid,
    cfl_time_step,
    deterministic_solve,
    grid_1d,
    grid_2d,
    hll_flux,
    lax_friedrichs_flux,
)
from .ipm import DualSolveError, NewtonConfig, run_ipm, solve_duals
from .problems import make_initial, project_initial_data
from .riemann import (
    RiemannSolution,
    collocation_reference,
    sod_reference_on_grid,
    sod_reference_statistics,
    solve_riemann,
)
from .runner import RunReport, run
from .sg import FilterConfig, LimiterConfig, apply_filter, apply_limiter, run_sg
from .stats import FieldStatistics, field_statistics, relative_errors, write_csv

__version__ = "0.1.0"
