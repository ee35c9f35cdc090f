"""fraq: spectral simulation and control synthesis for fractional
Schrodinger equations i u_t + (sqrt(-Delta))^sigma u + P'(|u|^2) u = h
on flat tori, with nonlocal damping, HUM linear control, and a
stabilize-then-steer global control pipeline."""

__version__ = "0.1.0"

from .spectral import (
    Multiplier,
    SpectralField,
    TorusGrid,
    apply_multiplier,
    bessel_multiplier,
    inner,
    integrate_physical,
    lambda_multiplier,
    load_state,
    random_field,
    save_state,
    sobolev_norm,
    to_spectral,
)
from .model import (
    CutoffProfile,
    DampingProfile,
    GCCReport,
    Nonlinearity,
    Region,
    build_bump_profile,
    check_gcc,
    eval_nonlinear_term,
    parse_region,
    validate_defocusing,
)
from .dynamics import (
    EnergyReport,
    EvolutionConfig,
    ForcingRecord,
    NumericalFailure,
    Trajectory,
    compute_energy,
    fit_decay_rate,
    free_propagate,
    integrate_damped,
    integrate_undamped,
    nonlinear_phase_step,
    solve_damping_resolvent,
)
from .control_linear import (
    ControlResult,
    GramianSpec,
    ObservabilityEstimate,
    apply_control_operator,
    apply_gramian,
    estimate_observability_constant,
    gramian_spectrum,
    solve_hum,
)
from .control_nonlinear import (
    ControlError,
    ControlSchedule,
    FixedPointState,
    GlobalControlPlan,
    Segment,
    StabilizationResult,
    VerificationReport,
    backward_nonlinear_solve,
    solve_global_control,
    solve_local_control,
    stabilize_to_ball,
    verify_control,
)
from .strichartz import (
    AdmissibilityError,
    AdmissiblePair,
    StrichartzReport,
    estimate_strichartz_constant,
    strichartz_ratio,
    validate_pair,
)
