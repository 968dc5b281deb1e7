"""Traveling pulses of the FitzHugh-Nagumo equations by constrained steepest descent.

The workflow: minimize an exponentially weighted energy over profiles
with squared weighted H1 norm equal to 2, scan the minimal energy J(c)
across wave speeds, refine its roots (which are the traveling-pulse
speeds), and verify each pulse by evolving it in a co-moving window.
"""

from .descent import (
    DescentConfig,
    DescentState,
    MinimizeResult,
    TraceRecord,
    clip_side_lobes,
    cold_start_guess,
    descent_step,
    minimize,
    shift_normalize,
    square_wave_guess,
    strip_mode_guess,
)
from .elliptic import BandedSystem, assemble_radiation_system, solve_inhibitor, solve_system, solve_update
from .energy import EnergyBreakdown, constraint_multiplier, energy_breakdown, energy_derivative
from .grids import (
    Grid,
    Profile,
    diff_x,
    inner_grad_exp,
    inner_h1exp,
    inner_l2exp,
    norm_h1exp_sq,
    shift_grid,
    weighted_integral,
)
from .io import (
    RunConfig,
    export_profile,
    export_report,
    export_scan,
    load_checkpoint,
    load_config,
    save_checkpoint,
)
from .model import (
    DecayRates,
    ModelParams,
    box_lower_bound,
    inhibitor_decay_rates,
    reaction,
    reaction_derivative,
    reaction_potential,
    update_decay_rates,
)
from .parabolic import (
    PhysicalState,
    StabilityReport,
    evolve_moving_window,
    rescale_to_physical,
    run_stability_test,
    stability_verdict,
)
from .speeds import (
    GridSpec,
    RootResult,
    ScanConfig,
    ScanSample,
    SpeedScan,
    eta_ratio,
    recheck_root_cold,
    refine_root,
    regrid_profile,
    scan_energy_curve,
)
from .verify import OracleReport, convergence_order, dense_oracle_solve, fd_gradient_check, run_default_suite, selfadjoint_residual

__version__ = "0.1.0"
