use std::f64::consts::FRAC_PI_2;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{peak_to_rms, rms_to_peak, ControllerParams};

use super::equilibrium::{newton, NewtonOptions};
use super::reduced::{OperatingInputs, ReducedState};
use super::stability::linearize;

/// Synchronized steady state of one inverter behind the total line impedance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LargeSignalSteadyState {
    /// Inverter voltage amplitude, peak (V).
    pub v_p: f64,
    /// Phase lead over the grid voltage (rad).
    pub delta: f64,
    /// Active power (W).
    pub p: f64,
    /// Reactive power (var).
    pub q: f64,
}

impl LargeSignalSteadyState {
    /// The same operating point as a reduced-model state.
    pub fn to_reduced(&self, inputs: &OperatingInputs) -> ReducedState {
        ReducedState::from_phasor(peak_to_rms(self.v_p), self.delta, inputs)
    }
}

/// Active and reactive power delivered through `R + jX` from an inverter at
/// `v_p∠delta` into a grid at `v_gp∠0` (both peak).
pub fn line_powers(v_p: f64, delta: f64, v_gp: f64, r: f64, x: f64) -> (f64, f64) {
    let v = Complex64::from_polar(v_p, delta);
    let i = (v - v_gp) / Complex64::new(r, x);
    let s = v * i.conj() / 2.0;
    (s.re, s.im)
}

/// Steady amplitude and phase laws of the controller combined with the line
/// power flow, solved by Newton iteration for `(v_p, δ)`. Only the branch
/// with `|δ| < π/2` whose linearization is stable is accepted.
pub fn steady_state_large_signal(inputs: &OperatingInputs) -> Result<LargeSignalSteadyState> {
    if !(inputs.v_g > 0.0) {
        return Err(Error::Domain(format!("grid voltage must be positive, got {}", inputs.v_g)));
    }
    let sp = inputs.setpoints;
    let v_gp = rms_to_peak(inputs.v_g);
    let r = inputs.circuit.r_t();
    let x = inputs.circuit.x_t(inputs.omega_g);
    let dw = inputs.omega_g - sp.omega_0;

    let residual = |z: &[f64]| -> Result<Vec<f64>> {
        let (v_p, delta) = (z[0], z[1]);
        let (p, q) = line_powers(v_p, delta, v_gp, r, x);
        Ok(match inputs.params {
            ControllerParams::Eaho(g) => {
                vec![g.mu_e * (sp.v_p0 * sp.v_p0 - v_p * v_p) + g.eta_e * (sp.q_ref - q), g.eta_e * (sp.p_ref - p) - dw]
            }
            ControllerParams::Aho(g) => vec![
                g.mu * (sp.v_p0 * sp.v_p0 - v_p * v_p) * v_p * v_p + 2.0 * g.eta * (sp.q_ref - q),
                2.0 * g.eta * (sp.p_ref - p) - dw * v_p * v_p,
            ],
            ControllerParams::Droop(g) => vec![sp.v_p0 + g.m_q * (sp.q_ref - q) - v_p, g.m_p * (sp.p_ref - p) - dw],
        })
    };

    let feasible = |z: &[f64]| z[0] > 0.0 && z[1].abs() < FRAC_PI_2;
    let z = newton(residual, &[sp.v_p0, 0.0], feasible, NewtonOptions::default())
        .map_err(|_| Error::NoSynchronizedEquilibrium)?;
    let (v_p, delta) = (z[0], z[1]);
    if !feasible(&z) {
        return Err(Error::NoSynchronizedEquilibrium);
    }
    let (p, q) = line_powers(v_p, delta, v_gp, r, x);
    let state = LargeSignalSteadyState { v_p, delta, p, q };

    let mut reduced = state.to_reduced(inputs);
    reduced.omega = inputs.omega_g;
    let model = linearize(inputs, reduced)?;
    if !model.is_stable() {
        return Err(Error::NoSynchronizedEquilibrium);
    }
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::equilibrium::solve_equilibrium;
    use crate::model::table1;

    fn inputs(params: ControllerParams, v_g: f64, p_ref: f64) -> OperatingInputs {
        OperatingInputs {
            v_g,
            omega_g: table1::omega_0(),
            setpoints: table1::setpoints().with_power(p_ref, 0.0),
            circuit: table1::circuit(),
            params,
        }
    }

    #[test]
    fn line_power_closed_form() {
        let (v_p, d, v_g, r, x) = (320.0, 0.2, 300.0, 1.0, 2.5);
        let (p, q) = line_powers(v_p, d, v_g, r, x);
        let z2 = 2.0 * (r * r + x * x);
        let p_ref = v_p / z2 * (r * (v_p - v_g * d.cos()) + x * v_g * d.sin());
        let q_ref = v_p / z2 * (x * (v_p - v_g * d.cos()) - r * v_g * d.sin());
        assert!((p - p_ref).abs() < 1e-9 && (q - q_ref).abs() < 1e-9);
    }

    #[test]
    fn unperturbed_grid_carries_no_power() {
        let v_nom = peak_to_rms(table1::V_P0);
        for params in [table1::eaho(), table1::aho(), table1::droop()] {
            let s = steady_state_large_signal(&inputs(params, v_nom, 0.0)).unwrap();
            assert!(s.p.abs() < 1.0 && s.q.abs() < 1.0 && s.delta.abs() < 1e-3, "{s:?}");
        }
    }

    #[test]
    fn sag_injects_reactive_power_in_order() {
        let v = 0.8 * peak_to_rms(table1::V_P0);
        let q: Vec<f64> = [table1::aho(), table1::eaho(), table1::droop()]
            .into_iter()
            .map(|p| steady_state_large_signal(&inputs(p, v, 0.0)).unwrap().q)
            .collect();
        assert!(q[0] < q[1] && q[1] < q[2], "{q:?}");
        assert!(q[0] > 1000.0);
    }

    #[test]
    fn agrees_with_reduced_equilibrium() {
        for params in [table1::eaho(), table1::aho(), table1::droop()] {
            let inp = inputs(params, 215.0, 1200.0);
            let s = steady_state_large_signal(&inp).unwrap();
            let eq = solve_equilibrium(&inp).unwrap();
            assert!((eq.active_power() - s.p).abs() / s.p.abs() < 1e-3);
            assert!((eq.reactive_power() - s.q).abs() / s.q.abs().max(1.0) < 1e-3);
            assert!((rms_to_peak(eq.v) - s.v_p).abs() / s.v_p < 1e-6);
        }
    }

    #[test]
    fn rejects_dead_grid() {
        assert!(matches!(steady_state_large_signal(&inputs(table1::eaho(), 0.0, 0.0)), Err(Error::Domain(_))));
    }

    #[test]
    fn no_synchronized_state_beyond_transfer_limit() {
        let mut inp = inputs(table1::eaho(), 50.0, 0.0);
        inp.omega_g = table1::omega_0() - 40.0;
        assert_eq!(steady_state_large_signal(&inp), Err(Error::NoSynchronizedEquilibrium));
    }
}
