"""Truncated-series machinery for slit-growth evolutions and the
one-variable hierarchy reductions built on top of them."""

from .series import INF, ORIG, Region, Series, TagMismatchError, WindowError
from .faber import (
    ConvergenceError,
    FaberSet,
    GrunskyConsistencyError,
    GrunskyTable,
    faber_generating_check,
    faber_phi,
    faber_psi,
    grunsky,
)
from .loewner import (
    ChordalDriving,
    ConformalFamily,
    DrivingError,
    EXAMPLE_IDS,
    IntegrationError,
    Orientation,
    RadialDriving,
    closed_form_family,
    integrate_chordal,
    integrate_interior,
    integrate_radial,
    reflect,
)
from .reduction import (
    DKP,
    DTODA,
    NoRootError,
    NonRealResidualError,
    ReducedSolution,
    TimeVector,
    build_lax,
    chi,
    hodograph_residual,
    hodograph_solve,
    xi,
)
from .verify import (
    ResidualReport,
    grunsky_flow_symmetry,
    hydro_residual,
    lax_residual_dkp,
    lax_residual_dtoda,
    poisson_dkp,
    poisson_dtoda,
)
from .coulomb import (
    ConfinementError,
    CurveSpec,
    DensityProfile,
    ExteriorMapReport,
    GasState,
    RelaxResult,
    SupportError,
    SupportInfo,
    density_profile,
    energy,
    energy_gradient,
    exterior_map_check,
    initial_state,
    relax,
    smooth_samples,
    support,
)

__version__ = "0.1.0"
