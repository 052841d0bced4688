//! Domain types shared by the controllers, the simulator and the analysis code.
//!
//! Unit conventions:
//! - αβ-frame quantities (oscillator voltages, instantaneous currents) are
//!   instantaneous values whose amplitude is the *peak* value.
//! - dq-frame quantities used by the reduced small-signal model are *RMS*
//!   valued, `V = V_p / √2`. Use [`peak_to_rms`] / [`rms_to_peak`]; nothing
//!   converts implicitly.
//! - Angles are in radians, angular frequencies in rad/s.

use std::f64::consts::{PI, SQRT_2};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

pub fn peak_to_rms(v_peak: f64) -> f64 {
    v_peak / SQRT_2
}

pub fn rms_to_peak(v_rms: f64) -> f64 {
    v_rms * SQRT_2
}

/// Operating references of one inverter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Setpoints {
    /// Active-power reference (W).
    pub p_ref: f64,
    /// Reactive-power reference (var).
    pub q_ref: f64,
    /// Nominal angular frequency (rad/s).
    pub omega_0: f64,
    /// Nominal voltage amplitude, peak (V).
    pub v_p0: f64,
}

impl Setpoints {
    pub fn with_power(mut self, p_ref: f64, q_ref: f64) -> Self {
        self.p_ref = p_ref;
        self.q_ref = q_ref;
        self
    }

    /// Nominal voltage as an RMS value.
    pub fn v_rms0(&self) -> f64 {
        peak_to_rms(self.v_p0)
    }
}

/// Ratings and grid-code limits used to design controller gains.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatingsAndLimits {
    /// Rated active power (W).
    pub p_0: f64,
    /// Rated reactive power (var).
    pub q_0: f64,
    /// Maximum allowable angular-frequency deviation (rad/s).
    pub d_omega_max: f64,
    /// Maximum voltage amplitude, peak (V).
    pub v_p_max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ControllerKind {
    Aho,
    Eaho,
    Droop,
}

impl ControllerKind {
    pub const ALL: [ControllerKind; 3] = [ControllerKind::Eaho, ControllerKind::Aho, ControllerKind::Droop];

    pub fn name(self) -> &'static str {
        match self {
            ControllerKind::Aho => "aho",
            ControllerKind::Eaho => "eaho",
            ControllerKind::Droop => "droop",
        }
    }

    pub fn is_oscillator(self) -> bool {
        !matches!(self, ControllerKind::Droop)
    }
}

impl fmt::Display for ControllerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ControllerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "aho" => Ok(ControllerKind::Aho),
            "eaho" => Ok(ControllerKind::Eaho),
            "droop" => Ok(ControllerKind::Droop),
            other => Err(Error::Config(format!("unknown controller `{other}` (expected aho, eaho or droop)"))),
        }
    }
}

/// Andronov–Hopf oscillator gains.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AhoGains {
    /// Current-feedback gain (V·A⁻¹·s⁻¹).
    pub eta: f64,
    /// Amplitude-regulation gain (V⁻²·s⁻¹).
    pub mu: f64,
}

/// Enhanced oscillator gains; `eta_e` is directly the ω–P droop slope.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EahoGains {
    /// rad·s⁻¹·W⁻¹
    pub eta_e: f64,
    /// V⁻²·s⁻¹
    pub mu_e: f64,
}

/// Conventional droop slopes and power low-pass filter bandwidths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DroopGains {
    /// ω–P slope (rad·s⁻¹·W⁻¹).
    pub m_p: f64,
    /// V–Q slope on the peak amplitude (V·var⁻¹).
    pub m_q: f64,
    /// Active-power filter cutoff (rad/s).
    pub omega_p: f64,
    /// Reactive-power filter cutoff (rad/s).
    pub omega_q: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ControllerParams {
    Aho(AhoGains),
    Eaho(EahoGains),
    Droop(DroopGains),
}

impl ControllerParams {
    pub fn kind(&self) -> ControllerKind {
        match self {
            ControllerParams::Aho(_) => ControllerKind::Aho,
            ControllerParams::Eaho(_) => ControllerKind::Eaho,
            ControllerParams::Droop(_) => ControllerKind::Droop,
        }
    }

    fn gains(&self) -> Vec<(&'static str, f64)> {
        match *self {
            ControllerParams::Aho(g) => vec![("eta", g.eta), ("mu", g.mu)],
            ControllerParams::Eaho(g) => vec![("eta_e", g.eta_e), ("mu_e", g.mu_e)],
            ControllerParams::Droop(g) => {
                vec![("m_p", g.m_p), ("m_q", g.m_q), ("omega_p", g.omega_p), ("omega_q", g.omega_q)]
            }
        }
    }

    /// Value of a named gain, if this controller has it.
    pub fn gain(&self, name: &str) -> Option<f64> {
        self.gains().into_iter().find(|(n, _)| *n == name).map(|(_, v)| v)
    }

    /// Returns a copy with one named gain replaced.
    pub fn with_gain(mut self, name: &str, value: f64) -> Result<Self, Error> {
        let slot = match (&mut self, name) {
            (ControllerParams::Aho(g), "eta") => &mut g.eta,
            (ControllerParams::Aho(g), "mu") => &mut g.mu,
            (ControllerParams::Eaho(g), "eta_e") => &mut g.eta_e,
            (ControllerParams::Eaho(g), "mu_e") => &mut g.mu_e,
            (ControllerParams::Droop(g), "m_p") => &mut g.m_p,
            (ControllerParams::Droop(g), "m_q") => &mut g.m_q,
            (ControllerParams::Droop(g), "omega_p") => &mut g.omega_p,
            (ControllerParams::Droop(g), "omega_q") => &mut g.omega_q,
            (p, n) => {
                return Err(Error::Config(format!("controller `{}` has no gain `{n}`", p.kind())));
            }
        };
        *slot = value;
        Ok(self)
    }
}

/// Output filter and grid impedance of the single-inverter circuit.
///
/// `c_f` and `v_dc` are carried so configurations can mirror the hardware
/// table, but the averaged model neglects both.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircuitParams {
    /// Filter inductance (H).
    pub l_f: f64,
    /// Filter parasitic resistance (Ω). Not listed in the hardware table; defaults to 0.
    #[serde(default)]
    pub r_f: f64,
    /// Filter capacitance (F), unused.
    pub c_f: f64,
    /// Grid inductance (H).
    pub l_g: f64,
    /// Grid resistance (Ω).
    pub r_g: f64,
    /// DC-link voltage (V), unused.
    pub v_dc: f64,
}

impl CircuitParams {
    pub fn l_t(&self) -> f64 {
        self.l_f + self.l_g
    }

    pub fn r_t(&self) -> f64 {
        self.r_f + self.r_g
    }

    pub fn x_t(&self, omega: f64) -> f64 {
        omega * self.l_t()
    }
}

/// Piecewise-constant signal: `initial` until the first step, then the value
/// of the latest step whose time has been reached.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    pub initial: f64,
    #[serde(default)]
    pub steps: Vec<(f64, f64)>,
}

impl Profile {
    pub fn constant(value: f64) -> Self {
        Self { initial: value, steps: Vec::new() }
    }

    pub fn value_at(&self, t: f64) -> f64 {
        self.steps.iter().take_while(|(ts, _)| *ts <= t).last().map_or(self.initial, |(_, v)| *v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BreakerSchedule {
    pub initially_closed: bool,
    /// Time-stamped switching actions; `true` closes the breaker.
    #[serde(default)]
    pub switches: Vec<(f64, bool)>,
}

impl BreakerSchedule {
    pub fn always_closed() -> Self {
        Self { initially_closed: true, switches: Vec::new() }
    }

    pub fn always_open() -> Self {
        Self { initially_closed: false, switches: Vec::new() }
    }

    pub fn closed_at(&self, t: f64) -> bool {
        self.switches.iter().take_while(|(ts, _)| *ts <= t).last().map_or(self.initially_closed, |(_, c)| *c)
    }
}

/// Stiff grid voltage source behind the grid impedance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSource {
    /// RMS grid voltage (V).
    pub v_g_rms: Profile,
    /// Grid angular frequency (rad/s).
    pub omega_g: Profile,
    /// Grid phase at t = 0 (rad).
    pub theta_g0: f64,
    pub breaker: BreakerSchedule,
}

impl GridSource {
    pub fn nominal(setpoints: &Setpoints) -> Self {
        Self {
            v_g_rms: Profile::constant(setpoints.v_rms0()),
            omega_g: Profile::constant(setpoints.omega_0),
            theta_g0: 0.0,
            breaker: BreakerSchedule::always_closed(),
        }
    }

    pub fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let negative = self.v_g_rms.initial < 0.0 || self.v_g_rms.steps.iter().any(|(_, v)| *v < 0.0);
        if negative {
            out.push(Violation::new(ViolationCode::NegativeGridVoltage, "grid RMS voltage must be non-negative"));
        }
        if !strictly_increasing(self.breaker.switches.iter().map(|(t, _)| *t)) {
            out.push(Violation::new(
                ViolationCode::UnorderedSchedule,
                "breaker schedule must be strictly time-ordered",
            ));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoadStep {
    /// Time the step takes effect (s).
    pub t: f64,
    /// Load resistance (Ω), `None` when the load is disconnected.
    pub resistance: Option<f64>,
}

/// Resistive load at the point of common coupling. Before the first step
/// the load is open.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LoadProfile {
    pub steps: Vec<LoadStep>,
}

impl LoadProfile {
    pub fn open() -> Self {
        Self::default()
    }

    pub fn constant(resistance: f64) -> Self {
        Self { steps: vec![LoadStep { t: 0.0, resistance: Some(resistance) }] }
    }

    pub fn then(mut self, t: f64, resistance: Option<f64>) -> Self {
        self.steps.push(LoadStep { t, resistance });
        self
    }

    pub fn resistance_at(&self, t: f64) -> Option<f64> {
        self.steps.iter().take_while(|s| s.t <= t).last().and_then(|s| s.resistance)
    }

    pub fn ever_closed(&self) -> bool {
        self.steps.iter().any(|s| s.resistance.is_some())
    }

    pub fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.steps.iter().any(|s| s.resistance.is_some_and(|r| r <= 0.0 || r.is_nan())) {
            out.push(Violation::new(ViolationCode::NonPositiveLoad, "load resistance must be positive"));
        }
        if !strictly_increasing(self.steps.iter().map(|s| s.t)) {
            out.push(Violation::new(ViolationCode::UnorderedSchedule, "load steps must be strictly time-ordered"));
        }
        out
    }
}

fn strictly_increasing(times: impl Iterator<Item = f64>) -> bool {
    let times: Vec<f64> = times.collect();
    times.windows(2).all(|w| w[0] < w[1])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationCode {
    NonPositiveFrequency,
    NonPositiveVoltage,
    NonPositiveRating,
    NonPositiveGain,
    DegenerateVoltageRange,
    NonPositiveInductance,
    NegativeResistance,
    NegativeGridVoltage,
    NonPositiveLoad,
    UnorderedSchedule,
    NonFinite,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub code: ViolationCode,
    pub message: String,
}

impl Violation {
    fn new(code: ViolationCode, message: impl Into<String>) -> Self {
        Self { code, message: message.into() }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}: {}", self.code, self.message)
    }
}

/// Checks every type invariant of a single-inverter system. An empty vector
/// means the system is valid.
pub fn validate_system(
    setpoints: &Setpoints,
    ratings: &RatingsAndLimits,
    params: &ControllerParams,
    circuit: &CircuitParams,
) -> Vec<Violation> {
    use ViolationCode::*;

    let mut out = Vec::new();
    let mut check = |ok: bool, code, msg: String| {
        if !ok {
            out.push(Violation::new(code, msg));
        }
    };

    let all = [
        setpoints.p_ref,
        setpoints.q_ref,
        setpoints.omega_0,
        setpoints.v_p0,
        ratings.p_0,
        ratings.q_0,
        ratings.d_omega_max,
        ratings.v_p_max,
        circuit.l_f,
        circuit.r_f,
        circuit.c_f,
        circuit.l_g,
        circuit.r_g,
        circuit.v_dc,
    ];
    check(all.iter().all(|v| v.is_finite()), NonFinite, "all parameters must be finite".into());

    check(setpoints.omega_0 > 0.0, NonPositiveFrequency, "omega_0 must be positive".into());
    check(setpoints.v_p0 > 0.0, NonPositiveVoltage, "v_p0 must be positive".into());
    check(ratings.p_0 > 0.0, NonPositiveRating, "p_0 must be positive".into());
    check(ratings.q_0 > 0.0, NonPositiveRating, "q_0 must be positive".into());
    check(ratings.d_omega_max > 0.0, NonPositiveRating, "d_omega_max must be positive".into());
    check(ratings.v_p_max > setpoints.v_p0, DegenerateVoltageRange, "v_p_max must exceed v_p0".into());

    for (name, value) in params.gains() {
        check(value > 0.0, NonPositiveGain, format!("gain must be positive: {name} = {value}"));
    }

    check(circuit.l_f > 0.0, NonPositiveInductance, "l_f must be positive".into());
    check(circuit.l_g >= 0.0, NonPositiveInductance, "l_g must be non-negative".into());
    check(circuit.r_f >= 0.0, NegativeResistance, "r_f must be non-negative".into());
    check(circuit.r_g >= 0.0, NegativeResistance, "r_g must be non-negative".into());
    out
}

/// Parameters of the 2.5 kVA laboratory setup used throughout the crate's
/// tests and built-in scenarios.
pub mod table1 {
    use super::*;

    pub const P_0: f64 = 2000.0;
    pub const Q_0: f64 = 1500.0;
    pub const V_DC: f64 = 380.0;
    pub const F_0: f64 = 50.0;
    pub const V_P0: f64 = 311.0;
    pub const L_F: f64 = 7e-3;
    pub const C_F: f64 = 3.9e-6;
    pub const L_G: f64 = 1e-3;
    pub const R_G: f64 = 1.0;
    pub const ETA: f64 = 91.99;
    pub const MU: f64 = 1.16e-4;
    pub const ETA_E: f64 = 0.0016;
    pub const MU_E: f64 = 1.16e-4;
    pub const M_P: f64 = 0.0016;
    pub const M_Q: f64 = 0.0207;
    pub const OMEGA_P: f64 = 20.0;
    pub const OMEGA_Q: f64 = 20.0;
    /// Allowed frequency deviation (Hz).
    pub const DF_MAX: f64 = 0.5;
    /// Allowed voltage amplitude as a multiple of nominal.
    pub const V_MAX_PU: f64 = 1.1;

    pub fn omega_0() -> f64 {
        2.0 * PI * F_0
    }

    pub fn setpoints() -> Setpoints {
        Setpoints { p_ref: 0.0, q_ref: 0.0, omega_0: omega_0(), v_p0: V_P0 }
    }

    pub fn ratings() -> RatingsAndLimits {
        RatingsAndLimits { p_0: P_0, q_0: Q_0, d_omega_max: 2.0 * PI * DF_MAX, v_p_max: V_MAX_PU * V_P0 }
    }

    pub fn circuit() -> CircuitParams {
        CircuitParams { l_f: L_F, r_f: 0.0, c_f: C_F, l_g: L_G, r_g: R_G, v_dc: V_DC }
    }

    pub fn aho() -> ControllerParams {
        ControllerParams::Aho(AhoGains { eta: ETA, mu: MU })
    }

    pub fn eaho() -> ControllerParams {
        ControllerParams::Eaho(EahoGains { eta_e: ETA_E, mu_e: MU_E })
    }

    pub fn droop() -> ControllerParams {
        ControllerParams::Droop(DroopGains { m_p: M_P, m_q: M_Q, omega_p: OMEGA_P, omega_q: OMEGA_Q })
    }

    pub fn params(kind: ControllerKind) -> ControllerParams {
        match kind {
            ControllerKind::Aho => aho(),
            ControllerKind::Eaho => eaho(),
            ControllerKind::Droop => droop(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn table1_is_valid() {
        for kind in ControllerKind::ALL {
            let report =
                validate_system(&table1::setpoints(), &table1::ratings(), &table1::params(kind), &table1::circuit());
            assert!(report.is_empty(), "{kind}: {report:?}");
        }
    }

    #[test]
    fn zero_gain_is_one_violation() {
        let params = ControllerParams::Eaho(EahoGains { eta_e: table1::ETA_E, mu_e: 0.0 });
        let report = validate_system(&table1::setpoints(), &table1::ratings(), &params, &table1::circuit());
        assert_eq!(report.len(), 1);
        assert_eq!(report[0].code, ViolationCode::NonPositiveGain);
        assert!(report[0].message.starts_with("gain must be positive"));
    }

    #[test]
    fn degenerate_voltage_range_is_one_violation() {
        let mut ratings = table1::ratings();
        ratings.v_p_max = table1::V_P0;
        let report = validate_system(&table1::setpoints(), &ratings, &table1::eaho(), &table1::circuit());
        assert_eq!(report.len(), 1);
        assert_eq!(report[0].code, ViolationCode::DegenerateVoltageRange);
        assert_eq!(report[0].message, "v_p_max must exceed v_p0");
    }

    #[test]
    fn circuit_totals() {
        let c = table1::circuit();
        assert_eq!(c.l_t(), 8e-3);
        assert_eq!(c.r_t(), 1.0);
        assert!((c.x_t(table1::omega_0()) - 2.513274).abs() < 1e-6);
    }

    #[test]
    fn profiles_are_piecewise_constant() {
        let p = Profile { initial: 1.0, steps: vec![(1.0, 2.0), (2.0, 3.0)] };
        assert_eq!(p.value_at(0.99), 1.0);
        assert_eq!(p.value_at(1.0), 2.0);
        assert_eq!(p.value_at(5.0), 3.0);

        let load = LoadProfile::constant(94.0).then(1.0, Some(24.4)).then(2.0, None);
        assert_eq!(load.resistance_at(0.5), Some(94.0));
        assert_eq!(load.resistance_at(1.5), Some(24.4));
        assert_eq!(load.resistance_at(2.5), None);
        assert_eq!(LoadProfile::open().resistance_at(0.0), None);
    }

    #[test]
    fn schedule_violations() {
        let load = LoadProfile::constant(-1.0).then(0.0, Some(10.0));
        let codes: Vec<_> = load.violations().into_iter().map(|v| v.code).collect();
        assert_eq!(codes, vec![ViolationCode::NonPositiveLoad, ViolationCode::UnorderedSchedule]);

        let mut grid = GridSource::nominal(&table1::setpoints());
        grid.breaker.switches = vec![(1.0, false), (1.0, true)];
        grid.v_g_rms.steps.push((0.5, -3.0));
        assert_eq!(grid.violations().len(), 2);
    }

    #[test]
    fn gain_lookup_and_replace() {
        let p = table1::eaho().with_gain("eta_e", 0.003).unwrap();
        assert_eq!(p.gain("eta_e"), Some(0.003));
        assert_eq!(p.gain("mu_e"), Some(table1::MU_E));
        assert!(table1::droop().with_gain("eta", 1.0).is_err());
    }

    #[test]
    fn kind_parses() {
        assert_eq!("EAHO".parse::<ControllerKind>().unwrap(), ControllerKind::Eaho);
        assert!("vsg".parse::<ControllerKind>().is_err());
    }

    #[derive(Debug, PartialEq, Serialize, Deserialize)]
    struct Bundle {
        setpoints: Setpoints,
        ratings: RatingsAndLimits,
        params: ControllerParams,
        circuit: CircuitParams,
        grid: GridSource,
        load: LoadProfile,
    }

    fn positive() -> impl Strategy<Value = f64> {
        1e-9..1e6f64
    }

    fn params_strategy() -> impl Strategy<Value = ControllerParams> {
        prop_oneof![
            (positive(), positive()).prop_map(|(eta, mu)| ControllerParams::Aho(AhoGains { eta, mu })),
            (positive(), positive()).prop_map(|(eta_e, mu_e)| ControllerParams::Eaho(EahoGains { eta_e, mu_e })),
            (positive(), positive(), positive(), positive()).prop_map(|(m_p, m_q, omega_p, omega_q)| {
                ControllerParams::Droop(DroopGains { m_p, m_q, omega_p, omega_q })
            }),
        ]
    }

    proptest! {
        #[test]
        fn parameter_sets_round_trip_through_toml(
            p_ref in -5e3..5e3f64, q_ref in -5e3..5e3f64, v_p0 in positive(), omega_0 in positive(),
            p_0 in positive(), q_0 in positive(), dw in positive(), extra in positive(),
            params in params_strategy(),
            l_f in positive(), r_f in 0.0..10.0f64, l_g in 0.0..1.0f64, r_g in 0.0..10.0f64,
            theta in -3.0..3.0f64, t1 in 0.0..10.0f64, r_l in positive(),
        ) {
            let bundle = Bundle {
                setpoints: Setpoints { p_ref, q_ref, omega_0, v_p0 },
                ratings: RatingsAndLimits { p_0, q_0, d_omega_max: dw, v_p_max: v_p0 + extra },
                params,
                circuit: CircuitParams { l_f, r_f, c_f: 3.9e-6, l_g, r_g, v_dc: 380.0 },
                grid: GridSource {
                    v_g_rms: Profile { initial: 220.0, steps: vec![(t1, 176.0)] },
                    omega_g: Profile::constant(omega_0),
                    theta_g0: theta,
                    breaker: BreakerSchedule { initially_closed: true, switches: vec![(t1, false)] },
                },
                load: LoadProfile::constant(r_l).then(t1 + 1.0, None),
            };
            let text = toml::to_string(&bundle).unwrap();
            let back: Bundle = toml::from_str(&text).unwrap();
            prop_assert_eq!(&back, &bundle);

            let a = validate_system(&bundle.setpoints, &bundle.ratings, &bundle.params, &bundle.circuit);
            let b = validate_system(&back.setpoints, &back.ratings, &back.params, &back.circuit);
            prop_assert_eq!(a, b);
        }
    }
}
