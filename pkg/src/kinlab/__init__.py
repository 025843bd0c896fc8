"""kinlab: a numerical laboratory for hypocoercive relaxation of linear
kinetic equations.

The package discretizes ``d_t f + T f = L f`` with a confining potential on
a truncated phase-space grid, builds the micro-macro machinery (projector,
auxiliary operator, modified entropy and its dissipation), computes the
three constants of the abstract decay estimate as discrete spectral
problems, assembles certified exponential decay rates, and verifies the
certificates against simulated dynamics, the exact two-velocity toy model
and the macroscopic drift-diffusion limit.
"""

from .grids import PhaseGrid
from .equilibria import (
    Potential,
    EnergyProfile,
    GibbsState,
    WeightSet,
    ConditionReport,
    build_gibbs_state,
    compute_moments,
    build_weights,
    check_conditions,
    fast_diffusion_exponents,
    fast_diffusion_structure,
    suggest_grid,
)
from .operators import (
    Field,
    OperatorSet,
    assemble_collision,
    assemble_operator_set,
    assemble_transport,
    entropy_dissipation,
    modified_entropy,
    mu_inner,
    mu_norm,
    project_equilibrium,
    random_field,
)
from .spectral import (
    RateCertificate,
    auxiliary_norms,
    certify,
    certify_from_constants,
    diffusion_coefficient,
    hardy_poincare_constant,
    macroscopic_gap,
    microscopic_gap,
    schrodinger_gap,
    transport_macroscopic_gap,
)
from .toy import (
    coercivity_kappa,
    evolve_modes,
    mode_entropy,
    mode_matrices,
    mode_spectrum,
)
from .simulator import (
    Scenario,
    TimeSeries,
    diffusion_limit_check,
    drift_diffusion_solve,
    fit_decay_rate,
    integrate,
)

__version__ = "0.1.0"
