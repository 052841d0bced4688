//! Control laws of the three grid-forming controllers, evaluated as pure
//! functions of state and measurements.
//!
//! The oscillators are written in the stationary αβ frame with peak-valued
//! signals. Because only the α-axis current exists in a single-phase
//! inverter, the β-axis current is produced by a SOGI quadrature generator.

use std::f64::consts::{PI, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{AhoGains, ControllerParams, DroopGains, EahoGains, Setpoints};

/// Damping gain of the quadrature generator.
pub const SOGI_GAIN: f64 = SQRT_2;

/// Oscillator output voltage in the αβ frame (V, peak-scaled instantaneous).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct OscState {
    pub v_alpha: f64,
    pub v_beta: f64,
}

impl OscState {
    pub fn new(v_alpha: f64, v_beta: f64) -> Self {
        Self { v_alpha, v_beta }
    }

    pub fn from_polar(v_p: f64, theta: f64) -> Self {
        Self { v_alpha: v_p * theta.cos(), v_beta: v_p * theta.sin() }
    }
}

/// States of the conventional droop controller.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DroopState {
    /// Voltage phase (rad).
    pub theta: f64,
    /// Filtered active power (W).
    pub p_f: f64,
    /// Filtered reactive power (var).
    pub q_f: f64,
}

/// Quadrature generator states: `x1` tracks the input, `x2` lags it by 90°.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SogiState {
    pub x1: f64,
    pub x2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Power {
    pub p: f64,
    pub q: f64,
}

/// Amplitude and phase of an αβ pair. The phase lies in (−π, π]; a zero
/// vector reports phase 0.
pub fn amplitude_phase(s: OscState) -> (f64, f64) {
    let v_p = s.v_alpha.hypot(s.v_beta);
    if v_p == 0.0 {
        return (0.0, 0.0);
    }
    let theta = s.v_beta.atan2(s.v_alpha);
    (v_p, if theta <= -PI { PI } else { theta })
}

/// Average single-phase power carried by peak-valued orthogonal voltage and
/// current pairs.
pub fn instantaneous_power(v_alpha: f64, v_beta: f64, i_alpha: f64, i_beta: f64) -> Power {
    Power { p: 0.5 * (v_alpha * i_alpha + v_beta * i_beta), q: 0.5 * (v_beta * i_alpha - v_alpha * i_beta) }
}

/// Current that would carry exactly `(p_ref, q_ref)` at the present
/// oscillator voltage.
pub fn ref_current(s: OscState, sp: &Setpoints) -> Result<(f64, f64)> {
    let v_p2 = s.v_alpha * s.v_alpha + s.v_beta * s.v_beta;
    if v_p2 == 0.0 || !v_p2.is_finite() {
        return Err(Error::ZeroAmplitude);
    }
    let i_alpha = 2.0 * (sp.p_ref * s.v_alpha + sp.q_ref * s.v_beta) / v_p2;
    let i_beta = 2.0 * (sp.p_ref * s.v_beta - sp.q_ref * s.v_alpha) / v_p2;
    Ok((i_alpha, i_beta))
}

/// Shared Hopf form: rotation at ω₀, radial amplitude regulation, and the
/// current error rotated by +90° and scaled by `feedback`.
fn hopf_derivative(s: OscState, i_alpha: f64, i_beta: f64, sp: &Setpoints, mu: f64, feedback: f64) -> Result<OscState> {
    let (i_alpha_ref, i_beta_ref) = ref_current(s, sp)?;
    let v_p2 = s.v_alpha * s.v_alpha + s.v_beta * s.v_beta;
    let radial = mu * (sp.v_p0 * sp.v_p0 - v_p2);
    let e_alpha = i_alpha_ref - i_alpha;
    let e_beta = i_beta_ref - i_beta;
    Ok(OscState {
        v_alpha: radial * s.v_alpha - sp.omega_0 * s.v_beta - feedback * e_beta,
        v_beta: sp.omega_0 * s.v_alpha + radial * s.v_beta + feedback * e_alpha,
    })
}

/// Right-hand side of the conventional oscillator.
pub fn aho_derivative(s: OscState, i_alpha: f64, i_beta: f64, sp: &Setpoints, gains: &AhoGains) -> Result<OscState> {
    hopf_derivative(s, i_alpha, i_beta, sp, gains.mu, gains.eta)
}

/// Right-hand side of the enhanced oscillator: identical to the
/// conventional one except that the current error is weighted by `V_p²/2`.
pub fn eaho_derivative(s: OscState, i_alpha: f64, i_beta: f64, sp: &Setpoints, gains: &EahoGains) -> Result<OscState> {
    let v_p2 = s.v_alpha * s.v_alpha + s.v_beta * s.v_beta;
    hopf_derivative(s, i_alpha, i_beta, sp, gains.mu_e, gains.eta_e * v_p2 / 2.0)
}

/// Evaluates whichever oscillator `params` describes.
pub fn oscillator_derivative(
    s: OscState,
    i_alpha: f64,
    i_beta: f64,
    sp: &Setpoints,
    params: &ControllerParams,
) -> Result<OscState> {
    match params {
        ControllerParams::Aho(g) => aho_derivative(s, i_alpha, i_beta, sp, g),
        ControllerParams::Eaho(g) => eaho_derivative(s, i_alpha, i_beta, sp, g),
        ControllerParams::Droop(_) => Err(Error::Domain("droop control is not an oscillator".into())),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarRates {
    /// Amplitude derivative (V/s).
    pub dv_p: f64,
    /// Instantaneous angular frequency (rad/s).
    pub omega: f64,
}

/// Amplitude/phase form of the oscillator dynamics.
pub fn polar_dynamics(params: &ControllerParams, v_p: f64, p: f64, q: f64, sp: &Setpoints) -> Result<PolarRates> {
    if v_p <= 0.0 || !v_p.is_finite() {
        return Err(Error::Domain(format!("amplitude must be positive, got {v_p}")));
    }
    let radial = (sp.v_p0 * sp.v_p0 - v_p * v_p) * v_p;
    match params {
        ControllerParams::Aho(g) => Ok(PolarRates {
            dv_p: g.mu * radial + 2.0 * g.eta / v_p * (sp.q_ref - q),
            omega: sp.omega_0 + 2.0 * g.eta / (v_p * v_p) * (sp.p_ref - p),
        }),
        ControllerParams::Eaho(g) => Ok(PolarRates {
            dv_p: g.mu_e * radial + g.eta_e * v_p * (sp.q_ref - q),
            omega: sp.omega_0 + g.eta_e * (sp.p_ref - p),
        }),
        ControllerParams::Droop(_) => Err(Error::Domain("droop control has no amplitude dynamics".into())),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DroopOutput {
    pub d_theta: f64,
    pub d_p_f: f64,
    pub d_q_f: f64,
    /// Commanded amplitude (V, peak).
    pub v_p: f64,
    pub v_alpha: f64,
    pub v_beta: f64,
}

/// Droop law with first-order power filters. `p`, `q` are the unfiltered
/// measured powers.
pub fn droop_derivative(s: DroopState, p: f64, q: f64, sp: &Setpoints, gains: &DroopGains) -> DroopOutput {
    let v_p = droop_amplitude(s, sp, gains);
    DroopOutput {
        d_theta: sp.omega_0 + gains.m_p * (sp.p_ref - s.p_f),
        d_p_f: gains.omega_p * (p - s.p_f),
        d_q_f: gains.omega_q * (q - s.q_f),
        v_p,
        v_alpha: v_p * s.theta.cos(),
        v_beta: v_p * s.theta.sin(),
    }
}

/// Output amplitude of the droop controller; depends only on the filtered
/// reactive power.
pub fn droop_amplitude(s: DroopState, sp: &Setpoints, gains: &DroopGains) -> f64 {
    sp.v_p0 + gains.m_q * (sp.q_ref - s.q_f)
}

/// SOGI quadrature signal generator tuned to `omega`.
pub fn sogi_derivative(s: SogiState, u: f64, omega: f64, k: f64) -> Result<(f64, f64)> {
    if omega <= 0.0 || !omega.is_finite() {
        return Err(Error::Domain(format!("SOGI frequency must be positive, got {omega}")));
    }
    Ok((omega * (k * (u - s.x1) - s.x2), omega * s.x1))
}

/// Effective droop slopes `(m_p, m_q)` at amplitude `v_p`.
pub fn droop_coefficients(params: &ControllerParams, v_p: f64, sp: &Setpoints) -> Result<(f64, f64)> {
    if v_p <= 0.0 || !v_p.is_finite() {
        return Err(Error::Domain(format!("amplitude must be positive, got {v_p}")));
    }
    match params {
        ControllerParams::Aho(g) => {
            let m_p = 2.0 * g.eta / (v_p * v_p);
            // dV/dQ from the steady amplitude law V⁴ = V₀²V² + (2η/μ)(Q_ref − Q).
            let shape = 2.0 * v_p * v_p - sp.v_p0 * sp.v_p0;
            if shape.abs() <= 1e-12 * sp.v_p0 * sp.v_p0 {
                return Err(Error::SingularCoefficient(format!("AHO m_q is unbounded at v_p = v_p0/√2 ({v_p} V)")));
            }
            Ok((m_p, g.eta / (g.mu * v_p * shape)))
        }
        ControllerParams::Eaho(g) => Ok((g.eta_e, g.eta_e / (2.0 * g.mu_e * v_p))),
        ControllerParams::Droop(g) => Ok((g.m_p, g.m_q)),
    }
}
