//! Reduced single-inverter model in the grid-voltage dq frame. Voltages and
//! currents are RMS-valued (`v = V_p/√2`).

use std::f64::consts::SQRT_2;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{peak_to_rms, CircuitParams, ControllerKind, ControllerParams, Setpoints};

/// Operating inputs of the reduced model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatingInputs {
    /// Grid voltage, RMS (V).
    pub v_g: f64,
    /// Grid angular frequency (rad/s).
    pub omega_g: f64,
    pub setpoints: Setpoints,
    pub circuit: CircuitParams,
    pub params: ControllerParams,
}

impl OperatingInputs {
    pub fn kind(&self) -> ControllerKind {
        self.params.kind()
    }

    /// Nominal RMS voltage `v_p0/√2`.
    pub fn v0(&self) -> f64 {
        peak_to_rms(self.setpoints.v_p0)
    }

    /// Copy with one named quantity replaced. Accepts controller gain names
    /// plus `l_g`, `r_g`, `l_f`, `r_f`, `v_g`, `omega_g`, `p_ref`, `q_ref`.
    pub fn with_parameter(mut self, name: &str, value: f64) -> Result<Self> {
        match name {
            "l_g" => self.circuit.l_g = value,
            "r_g" => self.circuit.r_g = value,
            "l_f" => self.circuit.l_f = value,
            "r_f" => self.circuit.r_f = value,
            "v_g" => self.v_g = value,
            "omega_g" => self.omega_g = value,
            "p_ref" => self.setpoints.p_ref = value,
            "q_ref" => self.setpoints.q_ref = value,
            gain => self.params = self.params.with_gain(gain, value)?,
        }
        Ok(self)
    }

    /// Current value of a quantity accepted by [`with_parameter`](Self::with_parameter).
    pub fn parameter(&self, name: &str) -> Option<f64> {
        match name {
            "l_g" => Some(self.circuit.l_g),
            "r_g" => Some(self.circuit.r_g),
            "l_f" => Some(self.circuit.l_f),
            "r_f" => Some(self.circuit.r_f),
            "v_g" => Some(self.v_g),
            "omega_g" => Some(self.omega_g),
            "p_ref" => Some(self.setpoints.p_ref),
            "q_ref" => Some(self.setpoints.q_ref),
            gain => self.params.gain(gain),
        }
    }
}

/// Reduced state. `omega` is a dynamic state only for droop control; for the
/// oscillators it is reported as the grid frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReducedState {
    /// RMS voltage (V).
    pub v: f64,
    /// Phase relative to the grid (rad).
    pub theta: f64,
    /// Angular frequency (rad/s).
    pub omega: f64,
    /// RMS d-axis current (A).
    pub i_d: f64,
    /// RMS q-axis current (A).
    pub i_q: f64,
}

impl ReducedState {
    pub fn dimension(kind: ControllerKind) -> usize {
        if kind == ControllerKind::Droop {
            5
        } else {
            4
        }
    }

    pub fn labels(kind: ControllerKind) -> &'static [&'static str] {
        if kind == ControllerKind::Droop {
            &["v", "theta", "omega", "i_d", "i_q"]
        } else {
            &["v", "theta", "i_d", "i_q"]
        }
    }

    pub fn to_vec(&self, kind: ControllerKind) -> Vec<f64> {
        if kind == ControllerKind::Droop {
            vec![self.v, self.theta, self.omega, self.i_d, self.i_q]
        } else {
            vec![self.v, self.theta, self.i_d, self.i_q]
        }
    }

    pub fn from_slice(kind: ControllerKind, x: &[f64], omega_g: f64) -> Self {
        if kind == ControllerKind::Droop {
            Self { v: x[0], theta: x[1], omega: x[2], i_d: x[3], i_q: x[4] }
        } else {
            Self { v: x[0], theta: x[1], omega: omega_g, i_d: x[2], i_q: x[3] }
        }
    }

    /// State whose currents are the phasor steady state of the line for the
    /// given voltage and phase.
    pub fn from_phasor(v: f64, theta: f64, inputs: &OperatingInputs) -> Self {
        let r = inputs.circuit.r_t();
        let x = inputs.circuit.x_t(inputs.omega_g);
        let (re, im) = (v * theta.cos() - inputs.v_g, v * theta.sin());
        let den = r * r + x * x;
        Self { v, theta, omega: inputs.omega_g, i_d: (re * r + im * x) / den, i_q: (im * r - re * x) / den }
    }

    /// `F1 = i_d cosθ + i_q sinθ`, so that `P = v·F1`.
    pub fn f1(&self) -> f64 {
        self.i_d * self.theta.cos() + self.i_q * self.theta.sin()
    }

    /// `F2 = i_d sinθ − i_q cosθ`, so that `Q = v·F2`.
    pub fn f2(&self) -> f64 {
        self.i_d * self.theta.sin() - self.i_q * self.theta.cos()
    }

    pub fn active_power(&self) -> f64 {
        self.v * self.f1()
    }

    pub fn reactive_power(&self) -> f64 {
        self.v * self.f2()
    }
}

/// Time derivative of the reduced state, in the order of [`ReducedState::labels`].
pub fn reduced_dynamics(x: &ReducedState, inputs: &OperatingInputs) -> Result<Vec<f64>> {
    if !(x.v > 0.0) {
        return Err(Error::Domain(format!("reduced model needs v > 0, got {}", x.v)));
    }
    let sp = &inputs.setpoints;
    let c = &inputs.circuit;
    let (l, r) = (c.l_t(), c.r_t());
    let (s, co) = x.theta.sin_cos();
    let p = x.active_power();
    let q = x.reactive_power();
    let v0 = inputs.v0();
    let vp0_sq = sp.v_p0 * sp.v_p0;

    let current_rows = |omega: f64| {
        [-r / l * x.i_d + omega * x.i_q + (x.v * co - inputs.v_g) / l, -omega * x.i_d - r / l * x.i_q + x.v * s / l]
    };

    Ok(match inputs.params {
        ControllerParams::Eaho(g) => {
            let [did, diq] = current_rows(inputs.omega_g);
            vec![
                g.mu_e * (vp0_sq - 2.0 * x.v * x.v) * x.v + g.eta_e * x.v * (sp.q_ref - q),
                sp.omega_0 + g.eta_e * (sp.p_ref - p) - inputs.omega_g,
                did,
                diq,
            ]
        }
        ControllerParams::Aho(g) => {
            let [did, diq] = current_rows(inputs.omega_g);
            vec![
                g.mu * (vp0_sq - 2.0 * x.v * x.v) * x.v + g.eta * (sp.q_ref - q) / x.v,
                sp.omega_0 + g.eta / (x.v * x.v) * (sp.p_ref - p) - inputs.omega_g,
                did,
                diq,
            ]
        }
        ControllerParams::Droop(g) => {
            let [did, diq] = current_rows(x.omega);
            vec![
                g.omega_q * (v0 + g.m_q / SQRT_2 * (sp.q_ref - q) - x.v),
                x.omega - inputs.omega_g,
                g.omega_p * (sp.omega_0 + g.m_p * (sp.p_ref - p) - x.omega),
                did,
                diq,
            ]
        }
    })
}

/// Closed-form Jacobian of [`reduced_dynamics`] at `x`.
pub fn jacobian_analytic(x: &ReducedState, inputs: &OperatingInputs) -> DMatrix<f64> {
    let sp = &inputs.setpoints;
    let c = &inputs.circuit;
    let (l, r) = (c.l_t(), c.r_t());
    let (s, co) = x.theta.sin_cos();
    let (v, f1, f2) = (x.v, x.f1(), x.f2());
    let v0 = inputs.v0();
    let w = inputs.omega_g;

    match inputs.params {
        ControllerParams::Eaho(g) => {
            let (eta, mu) = (g.eta_e, g.mu_e);
            DMatrix::from_row_slice(
                4,
                4,
                &[
                    2.0 * mu * (v0 * v0 - 3.0 * v * v) + eta * sp.q_ref - 2.0 * eta * v * f2,
                    -eta * v * v * f1,
                    -eta * v * v * s,
                    eta * v * v * co,
                    //
                    -eta * f1,
                    eta * v * f2,
                    -eta * v * co,
                    -eta * v * s,
                    //
                    co / l,
                    -v * s / l,
                    -r / l,
                    w,
                    //
                    s / l,
                    v * co / l,
                    -w,
                    -r / l,
                ],
            )
        }
        ControllerParams::Aho(g) => {
            let (eta, mu) = (g.eta, g.mu);
            DMatrix::from_row_slice(
                4,
                4,
                &[
                    mu * (sp.v_p0 * sp.v_p0 - 6.0 * v * v) - eta * sp.q_ref / (v * v),
                    -eta * f1,
                    -eta * s,
                    eta * co,
                    //
                    -2.0 * eta * sp.p_ref / v.powi(3) + eta * f1 / (v * v),
                    eta * f2 / v,
                    -eta * co / v,
                    -eta * s / v,
                    //
                    co / l,
                    -v * s / l,
                    -r / l,
                    w,
                    //
                    s / l,
                    v * co / l,
                    -w,
                    -r / l,
                ],
            )
        }
        ControllerParams::Droop(g) => {
            let k = g.m_q / SQRT_2;
            let (wp, wq, mp) = (g.omega_p, g.omega_q, g.m_p);
            let om = x.omega;
            DMatrix::from_row_slice(
                5,
                5,
                &[
                    -wq * (1.0 + k * f2),
                    -wq * k * v * f1,
                    0.0,
                    -wq * k * v * s,
                    wq * k * v * co,
                    //
                    0.0,
                    0.0,
                    1.0,
                    0.0,
                    0.0,
                    //
                    -wp * mp * f1,
                    wp * mp * v * f2,
                    -wp,
                    -wp * mp * v * co,
                    -wp * mp * v * s,
                    //
                    co / l,
                    -v * s / l,
                    x.i_q,
                    -r / l,
                    om,
                    //
                    s / l,
                    v * co / l,
                    -x.i_d,
                    -om,
                    -r / l,
                ],
            )
        }
    }
}

/// Central-difference Jacobian of `f` at `x` with step `max(1e-6, 1e-6·|x_k|)`.
pub fn jacobian_central<F>(f: F, x: &[f64]) -> Result<DMatrix<f64>>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let n = x.len();
    let m = f(x)?.len();
    let mut jac = DMatrix::zeros(m, n);
    let mut xp = x.to_vec();
    for k in 0..n {
        let h = 1e-6f64.max(1e-6 * x[k].abs());
        xp[k] = x[k] + h;
        let fp = f(&xp)?;
        xp[k] = x[k] - h;
        let fm = f(&xp)?;
        xp[k] = x[k];
        for i in 0..m {
            jac[(i, k)] = (fp[i] - fm[i]) / (2.0 * h);
        }
    }
    Ok(jac)
}

/// Central-difference Jacobian of [`reduced_dynamics`] at `x`.
pub fn jacobian_numeric(x: &ReducedState, inputs: &OperatingInputs) -> Result<DMatrix<f64>> {
    let kind = inputs.kind();
    jacobian_central(|z| reduced_dynamics(&ReducedState::from_slice(kind, z, inputs.omega_g), inputs), &x.to_vec(kind))
}
