//! Averaged αβ-frame time-domain simulation.

pub mod integrate;
pub mod metrics;
pub mod network;
pub mod scenario;
pub mod series;
pub mod summary;

pub use integrate::Rk4;
pub use metrics::{cycle_average, overshoot, settling_time, sharing_error, DEFAULT_BAND};
pub use network::{assemble, GridImpedance, Inverter, InverterObservation, Observation, System};
pub use scenario::{simulate, simulate_partial, Event, InitPolicy, Scenario, TimedEvent, DEFAULT_STEP};
pub use series::{InverterChannels, TimeSeries};
pub use summary::{summarize, Plateau, StepResponse, Summary, STEADY_CYCLES};
