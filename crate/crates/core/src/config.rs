//! TOML run configurations and the built-in scenario files.
//!
//! A configuration has three tables:
//!
//! ```toml
//! [system]      # hardware parameters under their table names (p_0, l_f, eta_e, ...)
//! [scenario]    # duration, inverters, grid, load and timed events
//! [output]      # decimation and plot toggle
//! ```

use std::f64::consts::{PI, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    validate_system, AhoGains, BreakerSchedule, CircuitParams, ControllerKind, ControllerParams, DroopGains, EahoGains,
    GridSource, LoadProfile, Profile, RatingsAndLimits, Setpoints,
};
use crate::sim::{assemble, Event, GridImpedance, InitPolicy, Inverter, Scenario, System, TimedEvent, DEFAULT_STEP};

/// Keys every `[system]` table must define, in the order they are checked.
pub const REQUIRED_SYSTEM_KEYS: [&str; 17] = [
    "p_0", "q_0", "v_dc", "omega_0", "v_p0", "l_f", "c_f", "l_g", "r_g", "eta", "mu", "eta_e", "mu_e", "m_p", "m_q",
    "omega_p", "omega_q",
];

const OPTIONAL_SYSTEM_KEYS: [&str; 3] = ["r_f", "d_omega_max", "v_p_max"];

/// Names of the scenario files shipped with the crate.
pub const BUILTIN_SCENARIOS: [&str; 6] = [
    "s1-freq-step",
    "s2-voltage-sag-swell",
    "s3-pref-step",
    "s4-island-sharing",
    "s5-grid-disconnect",
    "s6-robustness",
];

/// Text of a built-in scenario file.
pub fn builtin_source(name: &str) -> Option<&'static str> {
    Some(match name {
        "s1-freq-step" => include_str!("../scenarios/s1-freq-step.toml"),
        "s2-voltage-sag-swell" => include_str!("../scenarios/s2-voltage-sag-swell.toml"),
        "s3-pref-step" => include_str!("../scenarios/s3-pref-step.toml"),
        "s4-island-sharing" => include_str!("../scenarios/s4-island-sharing.toml"),
        "s5-grid-disconnect" => include_str!("../scenarios/s5-grid-disconnect.toml"),
        "s6-robustness" => include_str!("../scenarios/s6-robustness.toml"),
        _ => return None,
    })
}

/// Hardware parameters shared by every inverter of a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SystemConfig {
    pub setpoints: Setpoints,
    pub ratings: RatingsAndLimits,
    pub circuit: CircuitParams,
    pub aho: AhoGains,
    pub eaho: EahoGains,
    pub droop: DroopGains,
}

impl SystemConfig {
    /// The laboratory parameter set.
    pub fn table1() -> Self {
        use crate::model::table1::*;
        let (ControllerParams::Aho(aho), ControllerParams::Eaho(eaho), ControllerParams::Droop(droop)) =
            (aho(), eaho(), droop())
        else {
            unreachable!()
        };
        Self { setpoints: setpoints(), ratings: ratings(), circuit: circuit(), aho, eaho, droop }
    }

    pub fn params(&self, kind: ControllerKind) -> ControllerParams {
        match kind {
            ControllerKind::Aho => ControllerParams::Aho(self.aho),
            ControllerKind::Eaho => ControllerParams::Eaho(self.eaho),
            ControllerKind::Droop => ControllerParams::Droop(self.droop),
        }
    }

    /// Reads the `[system]` table of a configuration file, ignoring the rest.
    pub fn parse(text: &str) -> Result<Self> {
        let root: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Config(e.message().to_string()))?;
        match root.get("system") {
            Some(toml::Value::Table(t)) => Self::from_table(t),
            Some(_) => Err(Error::Config("`system` must be a table".into())),
            None => Self::from_table(&toml::Table::new()),
        }
    }

    fn from_table(table: &toml::Table) -> Result<Self> {
        let mut values = std::collections::HashMap::new();
        for key in REQUIRED_SYSTEM_KEYS {
            let v = table.get(key).ok_or_else(|| Error::Config(format!("missing key `system.{key}`")))?;
            values.insert(key, number(key, v)?);
        }
        for key in OPTIONAL_SYSTEM_KEYS {
            if let Some(v) = table.get(key) {
                values.insert(key, number(key, v)?);
            }
        }
        if let Some(unknown) = table.keys().find(|k| !values.contains_key(k.as_str())) {
            return Err(Error::Config(format!("unknown key `system.{unknown}`")));
        }
        let g = |k: &str| values[k];
        let v_p0 = g("v_p0");
        Ok(Self {
            setpoints: Setpoints { p_ref: 0.0, q_ref: 0.0, omega_0: g("omega_0"), v_p0 },
            ratings: RatingsAndLimits {
                p_0: g("p_0"),
                q_0: g("q_0"),
                d_omega_max: values.get("d_omega_max").copied().unwrap_or(2.0 * PI * 0.5),
                v_p_max: values.get("v_p_max").copied().unwrap_or(1.1 * v_p0),
            },
            circuit: CircuitParams {
                l_f: g("l_f"),
                r_f: values.get("r_f").copied().unwrap_or(0.0),
                c_f: g("c_f"),
                l_g: g("l_g"),
                r_g: g("r_g"),
                v_dc: g("v_dc"),
            },
            aho: AhoGains { eta: g("eta"), mu: g("mu") },
            eaho: EahoGains { eta_e: g("eta_e"), mu_e: g("mu_e") },
            droop: DroopGains { m_p: g("m_p"), m_q: g("m_q"), omega_p: g("omega_p"), omega_q: g("omega_q") },
        })
    }
}

fn number(key: &str, v: &toml::Value) -> Result<f64> {
    match v {
        toml::Value::Float(x) => Ok(*x),
        toml::Value::Integer(i) => Ok(*i as f64),
        other => Err(Error::Config(format!("key `system.{key}` must be a number, got {}", other.type_str()))),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InverterSpec {
    pub controller: ControllerKind,
    #[serde(default)]
    pub p_ref: f64,
    #[serde(default)]
    pub q_ref: f64,
}

/// Grid behind the grid impedance. Omitted for islanded runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    /// RMS voltage (V); defaults to `v_p0/√2`.
    #[serde(default)]
    pub v_rms: Option<f64>,
    /// Angular frequency (rad/s); defaults to `omega_0`.
    #[serde(default)]
    pub omega: Option<f64>,
    #[serde(default)]
    pub theta0: f64,
    #[serde(default = "yes")]
    pub connected: bool,
}

fn yes() -> bool {
    true
}

fn default_step() -> f64 {
    DEFAULT_STEP
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub name: Option<String>,
    pub duration: f64,
    #[serde(default = "default_step")]
    pub step: f64,
    #[serde(default)]
    pub init: InitPolicy,
    #[serde(rename = "inverter")]
    pub inverters: Vec<InverterSpec>,
    #[serde(default)]
    pub grid: Option<GridSpec>,
    /// Load resistance at t = 0 (Ω); open when absent.
    #[serde(default)]
    pub load: Option<f64>,
    #[serde(default)]
    pub events: Vec<TimedEvent>,
}

fn default_decimation() -> usize {
    10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_decimation")]
    pub decimation: usize,
    #[serde(default)]
    pub plot: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { decimation: default_decimation(), plot: false }
    }
}

/// A complete run configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Config {
    pub system: SystemConfig,
    pub scenario: ScenarioConfig,
    pub output: OutputConfig,
}

impl Config {
    /// Parses a configuration. Errors name the first missing key.
    pub fn parse(text: &str) -> Result<Self> {
        let root: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Config(e.message().to_string()))?;
        if let Some(unknown) = root.keys().find(|k| !["system", "scenario", "output"].contains(&k.as_str())) {
            return Err(Error::Config(format!("unknown table `{unknown}`")));
        }
        let empty = toml::Table::new();
        let system = match root.get("system") {
            Some(toml::Value::Table(t)) => SystemConfig::from_table(t)?,
            Some(_) => return Err(Error::Config("`system` must be a table".into())),
            None => SystemConfig::from_table(&empty)?,
        };
        let scenario_value = root.get("scenario").cloned().unwrap_or(toml::Value::Table(empty.clone()));
        if let toml::Value::Table(t) = &scenario_value {
            for key in ["duration", "inverter"] {
                if !t.contains_key(key) {
                    return Err(Error::Config(format!("missing key `scenario.{key}`")));
                }
            }
        }
        let scenario: ScenarioConfig = scenario_value
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(format!("scenario: {}", e.message())))?;
        let output: OutputConfig = match root.get("output") {
            Some(v) => {
                v.clone().try_into().map_err(|e: toml::de::Error| Error::Config(format!("output: {}", e.message())))?
            }
            None => OutputConfig::default(),
        };
        let cfg = Self { system, scenario, output };
        cfg.validate()?;
        Ok(cfg)
    }

    /// One of [`BUILTIN_SCENARIOS`].
    pub fn builtin(name: &str) -> Result<Self> {
        let text = builtin_source(name).ok_or_else(|| {
            Error::Config(format!("unknown scenario `{name}` (built-ins: {})", BUILTIN_SCENARIOS.join(", ")))
        })?;
        Self::parse(text)
    }

    /// Replaces the controller of every inverter, keeping their setpoints.
    pub fn with_controllers(mut self, kinds: &[ControllerKind]) -> Result<Self> {
        if kinds.len() != self.scenario.inverters.len() {
            return Err(Error::Config(format!(
                "scenario has {} inverter(s) but {} controller(s) were given",
                self.scenario.inverters.len(),
                kinds.len()
            )));
        }
        for (inv, &k) in self.scenario.inverters.iter_mut().zip(kinds) {
            inv.controller = k;
        }
        Ok(self)
    }

    fn validate(&self) -> Result<()> {
        if self.scenario.inverters.is_empty() {
            return Err(Error::Config("scenario needs at least one inverter".into()));
        }
        for inv in &self.scenario.inverters {
            let sp = self.system.setpoints.with_power(inv.p_ref, inv.q_ref);
            let violations =
                validate_system(&sp, &self.system.ratings, &self.system.params(inv.controller), &self.system.circuit);
            if let Some(v) = violations.first() {
                return Err(Error::Config(v.message.clone()));
            }
        }
        if self.output.decimation == 0 {
            return Err(Error::Config("decimation must be at least 1".into()));
        }
        self.simulation().validate()
    }

    /// Assembled network. Load and breaker events become the load profile
    /// and breaker schedule; the remaining events stay in [`Self::simulation`].
    pub fn build(&self) -> Result<System> {
        let sys = &self.system;
        let inverters = self
            .scenario
            .inverters
            .iter()
            .map(|inv| {
                Inverter::new(sys.params(inv.controller), sys.setpoints.with_power(inv.p_ref, inv.q_ref), &sys.circuit)
            })
            .collect();

        let mut load = match self.scenario.load {
            Some(r) => LoadProfile::constant(r),
            None => LoadProfile::open(),
        };
        let mut switches = Vec::new();
        for e in &self.scenario.events {
            match e.event {
                Event::Load { resistance } => load = load.then(e.t, resistance),
                Event::Breaker { closed } => switches.push((e.t, closed)),
                _ => {}
            }
        }
        if let Some(v) = load.violations().first() {
            return Err(Error::Config(v.to_string()));
        }

        let grid = match &self.scenario.grid {
            Some(g) => {
                let v_rms = g.v_rms.unwrap_or(sys.setpoints.v_p0 / SQRT_2);
                let omega = g.omega.unwrap_or(sys.setpoints.omega_0);
                let grid = GridSource {
                    v_g_rms: Profile::constant(v_rms),
                    omega_g: Profile::constant(omega),
                    theta_g0: g.theta0,
                    breaker: BreakerSchedule { initially_closed: g.connected, switches },
                };
                if let Some(v) = grid.violations().first() {
                    return Err(Error::Config(v.to_string()));
                }
                Some(grid)
            }
            None if !switches.is_empty() => {
                return Err(Error::Config("breaker events need a [scenario.grid] table".into()));
            }
            None => None,
        };
        assemble(inverters, load, grid, GridImpedance::from(&sys.circuit))
    }

    /// Integration settings with the events not folded into the network.
    pub fn simulation(&self) -> Scenario {
        let mut sc = Scenario::new(self.scenario.duration)
            .with_step(self.scenario.step)
            .with_decimation(self.output.decimation)
            .with_init(self.scenario.init);
        for e in &self.scenario.events {
            if !matches!(e.event, Event::Load { .. } | Event::Breaker { .. }) {
                sc = sc.at(e.t, e.event.clone());
            }
        }
        sc
    }

    /// Nominal angular frequency, used for averaging windows.
    pub fn omega_0(&self) -> f64 {
        self.system.setpoints.omega_0
    }
}
