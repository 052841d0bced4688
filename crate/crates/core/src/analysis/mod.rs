//! Small-signal and steady-state analysis of one inverter tied to a grid.

pub mod eigen;
pub mod equilibrium;
pub mod reduced;
pub mod stability;
pub mod steady;

pub use eigen::{characteristic_residual, eigenvalues, max_real_part};
pub use equilibrium::{find_equilibrium, find_equilibrium_with, newton, solve_equilibrium, NewtonOptions};
pub use reduced::{
    jacobian_analytic, jacobian_central, jacobian_numeric, reduced_dynamics, OperatingInputs, ReducedState,
};
pub use stability::{
    critical_gain, critical_value, linearize, linspace, small_signal_model, sweep, SmallSignalModel, SweepPoint,
    CRITICAL_GAIN_TOL,
};
pub use steady::{line_powers, steady_state_large_signal, LargeSignalSteadyState};
