use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::integrate::Rk4;
use super::network::System;
use super::series::TimeSeries;

/// Default integration step (s).
pub const DEFAULT_STEP: f64 = 50e-6;

/// Starting state of the controllers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum InitPolicy {
    /// Oscillators at nominal amplitude in phase with the grid; droop filters
    /// at their references; currents and SOGI states at zero.
    #[default]
    Synchronized,
    /// Oscillators at `fraction·v_p0`, used for start-up runs.
    Amplitude { fraction: f64 },
}

/// A disturbance applied between integration steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Event {
    GridFrequency {
        omega: f64,
    },
    GridVoltage {
        v_rms: f64,
    },
    /// `inverter = None` applies the step to every inverter.
    Setpoint {
        #[serde(default)]
        inverter: Option<usize>,
        #[serde(default)]
        p_ref: Option<f64>,
        #[serde(default)]
        q_ref: Option<f64>,
    },
    Load {
        resistance: Option<f64>,
    },
    Breaker {
        closed: bool,
    },
    GridInductance {
        l_g: f64,
    },
    GridResistance {
        r_g: f64,
    },
    /// Replaces one controller gain by name (`eta_e`, `m_p`, ...).
    Gain {
        #[serde(default)]
        inverter: Option<usize>,
        name: String,
        value: f64,
    },
}

impl Event {
    pub fn label(&self) -> String {
        match self {
            Event::GridFrequency { omega } => format!("grid_frequency omega={omega}"),
            Event::GridVoltage { v_rms } => format!("grid_voltage v_rms={v_rms}"),
            Event::Setpoint { inverter, p_ref, q_ref } => {
                format!("setpoint inverter={inverter:?} p_ref={p_ref:?} q_ref={q_ref:?}")
            }
            Event::Load { resistance } => format!("load resistance={resistance:?}"),
            Event::Breaker { closed } => format!("breaker closed={closed}"),
            Event::GridInductance { l_g } => format!("grid_inductance l_g={l_g}"),
            Event::GridResistance { r_g } => format!("grid_resistance r_g={r_g}"),
            Event::Gain { inverter, name, value } => format!("gain inverter={inverter:?} {name}={value}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimedEvent {
    pub t: f64,
    #[serde(flatten)]
    pub event: Event,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    /// Simulated horizon (s).
    pub duration: f64,
    /// Integration step (s).
    #[serde(default = "default_step")]
    pub step: f64,
    #[serde(default)]
    pub init: InitPolicy,
    #[serde(default)]
    pub events: Vec<TimedEvent>,
    /// Log every `decimation`-th step.
    #[serde(default = "default_decimation")]
    pub decimation: usize,
}

fn default_step() -> f64 {
    DEFAULT_STEP
}

fn default_decimation() -> usize {
    1
}

impl Scenario {
    pub fn new(duration: f64) -> Self {
        Self { duration, step: DEFAULT_STEP, init: InitPolicy::Synchronized, events: Vec::new(), decimation: 1 }
    }

    pub fn with_step(mut self, step: f64) -> Self {
        self.step = step;
        self
    }

    pub fn with_decimation(mut self, decimation: usize) -> Self {
        self.decimation = decimation;
        self
    }

    pub fn with_init(mut self, init: InitPolicy) -> Self {
        self.init = init;
        self
    }

    pub fn at(mut self, t: f64, event: Event) -> Self {
        self.events.push(TimedEvent { t, event });
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0) || !self.step.is_finite() {
            return Err(Error::Config(format!("step must be positive, got {}", self.step)));
        }
        if !(self.duration >= self.step) || !self.duration.is_finite() {
            return Err(Error::Config(format!("duration must be at least one step, got {}", self.duration)));
        }
        if self.decimation == 0 {
            return Err(Error::Config("decimation must be at least 1".into()));
        }
        if let InitPolicy::Amplitude { fraction } = self.init {
            if !(fraction > 0.0) {
                return Err(Error::Config("initial amplitude fraction must be positive".into()));
            }
        }
        for e in &self.events {
            if !(e.t >= 0.0 && e.t <= self.duration) {
                return Err(Error::Config(format!("event at t={} lies outside [0, {}]", e.t, self.duration)));
            }
        }
        Ok(())
    }

    fn steps(&self) -> usize {
        (self.duration / self.step).round() as usize
    }
}

const DIVERGENCE_BOUND: f64 = 1e6;

/// Integrates `system` over the scenario. On divergence the error carries the
/// last finite state; use [`simulate_partial`] to keep the samples logged so far.
pub fn simulate(system: &System, scenario: &Scenario) -> Result<TimeSeries> {
    match simulate_partial(system, scenario)? {
        (series, None) => Ok(series),
        (_, Some(err)) => Err(err),
    }
}

/// Like [`simulate`], but returns the samples logged before a mid-run failure
/// together with that failure. Configuration errors detected before the first
/// step are returned as `Err`.
/// Largest |hλ| kept by the internal substeps; RK4 is stable on the negative
/// real axis up to about 2.78.
const RK4_STABLE_REAL: f64 = 2.5;

fn substeps_for(sys: &System, h: f64) -> usize {
    ((h * sys.stiffness_bound() / RK4_STABLE_REAL).ceil() as usize).max(1)
}

pub fn simulate_partial(system: &System, scenario: &Scenario) -> Result<(TimeSeries, Option<Error>)> {
    scenario.validate()?;
    let mut sys = system.clone();
    sys.reset();

    let h = scenario.step;
    let n = scenario.steps();
    let mut events: Vec<(usize, TimedEvent)> = sys
        .scheduled_events()
        .into_iter()
        .chain(scenario.events.iter().cloned())
        .map(|e| (((e.t / h).round() as usize).min(n), e))
        .collect();
    events.sort_by_key(|(k, _)| *k);
    let mut pending = events.into_iter().peekable();

    let mut y = sys.initial_state(scenario.init);
    let mut series = TimeSeries::new(sys.inverters().len());
    let mut rk = Rk4::new(y.len());
    let mut substeps = substeps_for(&sys, h);

    for k in 0..=n {
        let t = k as f64 * h;
        while let Some((_, e)) = pending.next_if(|(ke, _)| *ke == k) {
            if let Err(err) = sys.apply(&e.event, t, &mut y) {
                return if k == 0 { Err(err) } else { Ok((series, Some(err))) };
            }
            series.events.push((t, e.event.label()));
            substeps = substeps_for(&sys, h);
        }
        if k % scenario.decimation == 0 {
            match sys.observe(t, &y) {
                Ok(obs) => series.push(t, &obs),
                Err(err) => return Ok((series, Some(err))),
            }
        }
        if k == n {
            break;
        }
        let last = y.clone();
        let hs = h / substeps as f64;
        let stepped =
            (0..substeps).try_for_each(|m| rk.step(t + m as f64 * hs, &mut y, hs, |t, y, dy| sys.derivative(t, y, dy)));
        match stepped {
            // the oscillator has left its orbit (zero amplitude or reversed rotation)
            Err(Error::Domain(_) | Error::ZeroAmplitude) => {
                return Ok((series, Some(Error::Divergence { t: t + h, last_state: last })));
            }
            Err(err) => return Ok((series, Some(err))),
            Ok(()) => {}
        }
        if y.iter().any(|v| !v.is_finite() || v.abs() > DIVERGENCE_BOUND) {
            return Ok((series, Some(Error::Divergence { t: t + h, last_state: last })));
        }
    }
    Ok((series, None))
}
