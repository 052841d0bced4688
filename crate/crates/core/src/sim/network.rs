//! Averaged αβ network: N inverters behind their filter inductors, a
//! resistive load at the common node, and a grid source behind its own
//! impedance. The filter capacitor is neglected, so the common node voltage
//! is algebraic.

use serde::{Deserialize, Serialize};

use crate::controllers::{
    amplitude_phase, droop_derivative, instantaneous_power, oscillator_derivative, sogi_derivative, DroopState,
    OscState, SogiState, SOGI_GAIN,
};
use crate::error::{Error, Result};
use crate::model::{peak_to_rms, rms_to_peak, CircuitParams, ControllerParams, GridSource, LoadProfile, Setpoints};

use super::scenario::{Event, InitPolicy, TimedEvent};

/// One inverter: its control law, references and output filter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Inverter {
    pub controller: ControllerParams,
    pub setpoints: Setpoints,
    /// Filter inductance (H).
    pub l_f: f64,
    /// Filter resistance (Ω).
    pub r_f: f64,
}

impl Inverter {
    pub fn new(controller: ControllerParams, setpoints: Setpoints, circuit: &CircuitParams) -> Self {
        Self { controller, setpoints, l_f: circuit.l_f, r_f: circuit.r_f }
    }

    fn controller_states(&self) -> usize {
        if self.controller.kind().is_oscillator() {
            2
        } else {
            3
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridImpedance {
    pub l_g: f64,
    pub r_g: f64,
}

impl From<&CircuitParams> for GridImpedance {
    fn from(c: &CircuitParams) -> Self {
        Self { l_g: c.l_g, r_g: c.r_g }
    }
}

/// Conditions that events may change while a run is in progress.
#[derive(Debug, Clone, PartialEq)]
struct Live {
    v_g_rms: f64,
    omega_g: f64,
    breaker_closed: bool,
    load: Option<f64>,
    impedance: GridImpedance,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InverterObservation {
    pub v_alpha: f64,
    pub v_beta: f64,
    pub v_p: f64,
    /// Wrapped to (−π, π].
    pub theta: f64,
    pub omega: f64,
    pub p: f64,
    pub q: f64,
    pub i_alpha: f64,
}

/// Algebraic quantities recovered from one state vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub inverters: Vec<InverterObservation>,
    pub v_pcc: f64,
    pub i_g: f64,
    pub i_load: f64,
    pub v_g: f64,
}

impl Observation {
    /// Σ i_j − i_load − i_g.
    pub fn kcl_residual(&self) -> f64 {
        self.inverters.iter().map(|o| o.i_alpha).sum::<f64>() - self.i_load - self.i_g
    }
}

/// Assembled network with its state layout. Built by [`assemble`].
#[derive(Debug, Clone)]
pub struct System {
    inverters: Vec<Inverter>,
    grid: Option<GridSource>,
    load: LoadProfile,
    base_impedance: GridImpedance,
    offsets: Vec<usize>,
    i_g_index: Option<usize>,
    theta_g_index: Option<usize>,
    dim: usize,
    live: Live,
}

/// Builds the state-derivative function of the network.
///
/// Per inverter the state is `[v_α, v_β, x1, x2, i]` for oscillators or
/// `[θ, P_f, Q_f, x1, x2, i]` for droop control. The grid-branch current is a
/// state only when a load can be connected while the grid is present; the
/// grid phase is the last state whenever a grid exists.
pub fn assemble(
    inverters: Vec<Inverter>,
    load: LoadProfile,
    grid: Option<GridSource>,
    impedance: GridImpedance,
) -> Result<System> {
    if inverters.is_empty() {
        return Err(Error::Config("at least one inverter is required".into()));
    }
    for (j, inv) in inverters.iter().enumerate() {
        if !(inv.l_f > 0.0) || !(inv.r_f >= 0.0) {
            return Err(Error::Config(format!("inverter {j}: l_f must be positive and r_f non-negative")));
        }
    }
    if let Some(v) = load.violations().first() {
        return Err(Error::Config(v.message.clone()));
    }
    if let Some(g) = &grid {
        if let Some(v) = g.violations().first() {
            return Err(Error::Config(v.message.clone()));
        }
    }
    if !(impedance.l_g >= 0.0) || !(impedance.r_g >= 0.0) {
        return Err(Error::Config("grid impedance must be non-negative".into()));
    }

    let mut offsets = Vec::with_capacity(inverters.len());
    let mut dim = 0;
    for inv in &inverters {
        offsets.push(dim);
        dim += inv.controller_states() + 3;
    }
    let i_g_index = if grid.is_some() && load.ever_closed() {
        if impedance.l_g <= 0.0 {
            return Err(Error::Config("a load in front of a stiff grid requires l_g > 0".into()));
        }
        dim += 1;
        Some(dim - 1)
    } else {
        None
    };
    let theta_g_index = grid.as_ref().map(|_| {
        dim += 1;
        dim - 1
    });

    let live = Live {
        v_g_rms: grid.as_ref().map_or(0.0, |g| g.v_g_rms.initial),
        omega_g: grid.as_ref().map_or(0.0, |g| g.omega_g.initial),
        breaker_closed: grid.as_ref().is_some_and(|g| g.breaker.initially_closed),
        load: load.resistance_at(0.0),
        impedance,
    };

    let system =
        System { inverters, grid, load, base_impedance: impedance, offsets, i_g_index, theta_g_index, dim, live };
    system.check_schedule_for_floating_node()?;
    Ok(system)
}

impl System {
    pub fn dimension(&self) -> usize {
        self.dim
    }

    pub fn inverters(&self) -> &[Inverter] {
        &self.inverters
    }

    pub fn has_grid_current_state(&self) -> bool {
        self.i_g_index.is_some()
    }

    fn check_schedule_for_floating_node(&self) -> Result<()> {
        let mut times = vec![0.0];
        times.extend(self.load.steps.iter().map(|s| s.t));
        if let Some(g) = &self.grid {
            times.extend(g.breaker.switches.iter().map(|(t, _)| *t));
        }
        for t in times {
            let closed = self.grid.as_ref().is_some_and(|g| g.breaker.closed_at(t));
            if !closed && self.load.resistance_at(t).is_none() {
                return Err(Error::FloatingNode { t });
            }
        }
        Ok(())
    }

    /// Grid and load steps from the assembled profiles, as events.
    pub fn scheduled_events(&self) -> Vec<TimedEvent> {
        let mut out = Vec::new();
        for s in &self.load.steps {
            if s.t > 0.0 {
                out.push(TimedEvent { t: s.t, event: Event::Load { resistance: s.resistance } });
            }
        }
        if let Some(g) = &self.grid {
            out.extend(g.v_g_rms.steps.iter().map(|&(t, v_rms)| TimedEvent { t, event: Event::GridVoltage { v_rms } }));
            out.extend(
                g.omega_g.steps.iter().map(|&(t, omega)| TimedEvent { t, event: Event::GridFrequency { omega } }),
            );
            out.extend(
                g.breaker.switches.iter().map(|&(t, closed)| TimedEvent { t, event: Event::Breaker { closed } }),
            );
        }
        out
    }

    /// Restores the conditions at t = 0.
    pub fn reset(&mut self) {
        self.live = Live {
            v_g_rms: self.grid.as_ref().map_or(0.0, |g| g.v_g_rms.initial),
            omega_g: self.grid.as_ref().map_or(0.0, |g| g.omega_g.initial),
            breaker_closed: self.grid.as_ref().is_some_and(|g| g.breaker.initially_closed),
            load: self.load.resistance_at(0.0),
            impedance: self.base_impedance,
        };
    }

    pub fn initial_state(&self, policy: InitPolicy) -> Vec<f64> {
        let theta_g0 = self.grid.as_ref().map_or(0.0, |g| g.theta_g0);
        let mut y = vec![0.0; self.dim];
        for (inv, &o) in self.inverters.iter().zip(&self.offsets) {
            let sp = &inv.setpoints;
            match inv.controller {
                ControllerParams::Droop(_) => {
                    y[o] = theta_g0;
                    y[o + 1] = sp.p_ref;
                    y[o + 2] = sp.q_ref;
                }
                _ => {
                    let amp = match policy {
                        InitPolicy::Synchronized => sp.v_p0,
                        InitPolicy::Amplitude { fraction } => fraction * sp.v_p0,
                    };
                    let s = OscState::from_polar(amp, theta_g0);
                    y[o] = s.v_alpha;
                    y[o + 1] = s.v_beta;
                }
            }
        }
        if let Some(k) = self.theta_g_index {
            y[k] = theta_g0;
        }
        y
    }

    /// Applies an event between integration steps. May adjust algebraically
    /// constrained states (the grid-branch current).
    pub fn apply(&mut self, event: &Event, t: f64, y: &mut [f64]) -> Result<()> {
        match event {
            Event::GridFrequency { omega } => self.require_grid()?.omega_g = *omega,
            Event::GridVoltage { v_rms } => {
                if *v_rms < 0.0 {
                    return Err(Error::Config("grid voltage must be non-negative".into()));
                }
                self.require_grid()?.v_g_rms = *v_rms;
            }
            Event::Breaker { closed } => {
                self.require_grid()?.breaker_closed = *closed;
                if !*closed {
                    if let Some(k) = self.i_g_index {
                        y[k] = 0.0;
                    }
                }
            }
            Event::Load { resistance } => {
                if resistance.is_some_and(|r| !(r > 0.0)) {
                    return Err(Error::Config("load resistance must be positive".into()));
                }
                if resistance.is_some() && self.grid.is_some() && self.i_g_index.is_none() {
                    return Err(Error::Config("load events need a load in the assembled profile".into()));
                }
                self.live.load = *resistance;
                if resistance.is_none() && self.live.breaker_closed {
                    if let Some(k) = self.i_g_index {
                        y[k] = self
                            .offsets
                            .iter()
                            .zip(&self.inverters)
                            .map(|(&o, inv)| y[o + inv.controller_states() + 2])
                            .sum();
                    }
                }
            }
            Event::GridInductance { l_g } => {
                if *l_g < 0.0 || (self.i_g_index.is_some() && *l_g == 0.0) {
                    return Err(Error::Config(format!("invalid grid inductance {l_g}")));
                }
                self.require_grid()?;
                self.live.impedance.l_g = *l_g;
            }
            Event::GridResistance { r_g } => {
                if *r_g < 0.0 {
                    return Err(Error::Config(format!("invalid grid resistance {r_g}")));
                }
                self.require_grid()?;
                self.live.impedance.r_g = *r_g;
            }
            Event::Setpoint { inverter, p_ref, q_ref } => {
                for j in self.targets(*inverter)? {
                    let sp = &mut self.inverters[j].setpoints;
                    if let Some(p) = p_ref {
                        sp.p_ref = *p;
                    }
                    if let Some(q) = q_ref {
                        sp.q_ref = *q;
                    }
                }
            }
            Event::Gain { inverter, name, value } => {
                for j in self.targets(*inverter)? {
                    let inv = &mut self.inverters[j];
                    inv.controller = inv.controller.with_gain(name, *value)?;
                }
            }
        }
        if !self.live.breaker_closed && self.live.load.is_none() {
            return Err(Error::FloatingNode { t });
        }
        Ok(())
    }

    fn require_grid(&mut self) -> Result<&mut Live> {
        if self.grid.is_none() {
            return Err(Error::Config("event needs a grid source".into()));
        }
        Ok(&mut self.live)
    }

    fn targets(&self, inverter: Option<usize>) -> Result<Vec<usize>> {
        match inverter {
            Some(j) if j < self.inverters.len() => Ok(vec![j]),
            Some(j) => Err(Error::Config(format!("no inverter with index {j}"))),
            None => Ok((0..self.inverters.len()).collect()),
        }
    }

    fn v_grid(&self, y: &[f64]) -> f64 {
        match self.theta_g_index {
            Some(k) => rms_to_peak(self.live.v_g_rms) * y[k].cos(),
            None => 0.0,
        }
    }

    /// Terminal voltage of inverter `j` (α component and full pair).
    fn terminal(&self, j: usize, y: &[f64]) -> OscState {
        let inv = &self.inverters[j];
        let o = self.offsets[j];
        match &inv.controller {
            ControllerParams::Droop(g) => {
                let s = DroopState { theta: y[o], p_f: y[o + 1], q_f: y[o + 2] };
                let out = droop_derivative(s, 0.0, 0.0, &inv.setpoints, g);
                OscState::new(out.v_alpha, out.v_beta)
            }
            _ => OscState::new(y[o], y[o + 1]),
        }
    }

    fn current_index(&self, j: usize) -> usize {
        self.offsets[j] + self.inverters[j].controller_states() + 2
    }

    /// Node voltage, grid-branch current and load current.
    fn node(&self, t: f64, y: &[f64], terminals: &[OscState]) -> Result<(f64, f64, f64)> {
        let currents: f64 = (0..self.inverters.len()).map(|j| y[self.current_index(j)]).sum();
        let v_g = self.v_grid(y);
        match (self.live.breaker_closed, self.live.load) {
            (true, Some(r)) => {
                let i_g = y[self.i_g_index.expect("grid current state exists when a load is present")];
                let v_pcc = r * (currents - i_g);
                Ok((v_pcc, i_g, v_pcc / r))
            }
            (true, None) => {
                let l_g = self.live.impedance.l_g;
                if l_g == 0.0 {
                    return Ok((v_g, currents, 0.0));
                }
                let r_g = self.live.impedance.r_g;
                let mut num = (v_g + r_g * currents) / l_g;
                let mut den = 1.0 / l_g;
                for (j, inv) in self.inverters.iter().enumerate() {
                    let i = y[self.current_index(j)];
                    num += (terminals[j].v_alpha - inv.r_f * i) / inv.l_f;
                    den += 1.0 / inv.l_f;
                }
                Ok((num / den, currents, 0.0))
            }
            (false, Some(r)) => Ok((r * currents, 0.0, currents)),
            (false, None) => Err(Error::FloatingNode { t }),
        }
    }

    /// Upper bound on the magnitude of the fastest eigenvalue of the filter
    /// and grid inductor currents under the present conditions (1/s).
    pub fn stiffness_bound(&self) -> f64 {
        let imp = self.live.impedance;
        let grid_branch = self.live.breaker_closed && imp.l_g > 0.0;
        let mut damping = self.inverters.iter().map(|inv| inv.r_f / inv.l_f).fold(0.0, f64::max);
        if grid_branch {
            damping = damping.max(imp.r_g / imp.l_g);
        }
        match self.live.load {
            Some(r) => {
                let mut inv_l: f64 = self.inverters.iter().map(|inv| 1.0 / inv.l_f).sum();
                if grid_branch && self.i_g_index.is_some() {
                    inv_l += 1.0 / imp.l_g;
                }
                r * inv_l + damping
            }
            None => damping,
        }
    }

    /// State derivative at time `t`.
    pub fn derivative(&self, t: f64, y: &[f64], dy: &mut [f64]) -> Result<()> {
        self.evaluate(t, y, Some(dy)).map(|_| ())
    }

    /// Algebraic outputs at `(t, y)`.
    pub fn observe(&self, t: f64, y: &[f64]) -> Result<Observation> {
        self.evaluate(t, y, None)
    }

    fn evaluate(&self, t: f64, y: &[f64], mut dy: Option<&mut [f64]>) -> Result<Observation> {
        let n = self.inverters.len();
        let terminals: Vec<OscState> = (0..n).map(|j| self.terminal(j, y)).collect();
        let (v_pcc, i_g, i_load) = self.node(t, y, &terminals)?;
        let v_g = self.v_grid(y);

        let mut observed = Vec::with_capacity(n);
        let mut di_sum = 0.0;
        for (j, inv) in self.inverters.iter().enumerate() {
            let o = self.offsets[j];
            let c = inv.controller_states();
            let sogi = SogiState { x1: y[o + c], x2: y[o + c + 1] };
            let i = y[o + c + 2];
            let v = terminals[j];
            let s = instantaneous_power(v.v_alpha, v.v_beta, i, sogi.x2);

            let omega = match &inv.controller {
                ControllerParams::Droop(g) => {
                    let st = DroopState { theta: y[o], p_f: y[o + 1], q_f: y[o + 2] };
                    let out = droop_derivative(st, s.p, s.q, &inv.setpoints, g);
                    if let Some(dy) = dy.as_deref_mut() {
                        dy[o] = out.d_theta;
                        dy[o + 1] = out.d_p_f;
                        dy[o + 2] = out.d_q_f;
                    }
                    out.d_theta
                }
                params => {
                    let d = oscillator_derivative(v, i, sogi.x2, &inv.setpoints, params)?;
                    if let Some(dy) = dy.as_deref_mut() {
                        dy[o] = d.v_alpha;
                        dy[o + 1] = d.v_beta;
                    }
                    let v_p2 = v.v_alpha * v.v_alpha + v.v_beta * v.v_beta;
                    (v.v_alpha * d.v_beta - v.v_beta * d.v_alpha) / v_p2
                }
            };

            let di = (v.v_alpha - v_pcc - inv.r_f * i) / inv.l_f;
            di_sum += di;
            if let Some(dy) = dy.as_deref_mut() {
                let (dx1, dx2) = sogi_derivative(sogi, i, omega, SOGI_GAIN)?;
                dy[o + c] = dx1;
                dy[o + c + 1] = dx2;
                dy[o + c + 2] = di;
            }

            let (v_p, theta) = amplitude_phase(v);
            observed.push(InverterObservation {
                v_alpha: v.v_alpha,
                v_beta: v.v_beta,
                v_p,
                theta,
                omega,
                p: s.p,
                q: s.q,
                i_alpha: i,
            });
        }

        if let Some(dy) = dy {
            if let Some(k) = self.i_g_index {
                dy[k] = match (self.live.breaker_closed, self.live.load) {
                    (true, Some(_)) => (v_pcc - v_g - self.live.impedance.r_g * i_g) / self.live.impedance.l_g,
                    (true, None) => di_sum,
                    (false, _) => 0.0,
                };
            }
            if let Some(k) = self.theta_g_index {
                dy[k] = self.live.omega_g;
            }
        }

        Ok(Observation { inverters: observed, v_pcc, i_g, i_load, v_g })
    }

    /// Grid RMS voltage currently in force.
    pub fn grid_voltage_rms(&self) -> f64 {
        self.live.v_g_rms
    }

    pub fn grid_peak_to_rms(&self) -> f64 {
        peak_to_rms(rms_to_peak(self.live.v_g_rms))
    }
}
