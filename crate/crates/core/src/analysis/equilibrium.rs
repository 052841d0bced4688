use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

use super::reduced::{jacobian_central, reduced_dynamics, OperatingInputs, ReducedState};

/// Newton iteration limits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOptions {
    pub max_iterations: usize,
    /// Convergence threshold on the residual ∞-norm.
    pub tolerance: f64,
    /// Step halvings tried when the residual does not decrease.
    pub max_halvings: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self { max_iterations: 50, tolerance: 1e-8, max_halvings: 6 }
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn two_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Damped Newton iteration on `f(x) = 0` with a central-difference Jacobian.
/// `feasible` rejects iterates outside the model's domain.
pub fn newton<F, G>(f: F, x0: &[f64], feasible: G, opts: NewtonOptions) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
    G: Fn(&[f64]) -> bool,
{
    let mut x = x0.to_vec();
    let mut r = f(&x)?;
    for _ in 0..opts.max_iterations {
        if inf_norm(&r) < opts.tolerance {
            return Ok(x);
        }
        let jac: DMatrix<f64> = jacobian_central(&f, &x)?;
        let rhs = DVector::from_column_slice(&r);
        let dx = jac
            .lu()
            .solve(&rhs)
            .filter(|d| d.iter().all(|v| v.is_finite()))
            .ok_or(Error::NoConvergence { iterations: 0, residual: inf_norm(&r) })?;

        let base = two_norm(&r);
        let mut alpha = 1.0;
        let mut fallback = None;
        let mut accepted = None;
        for _ in 0..=opts.max_halvings {
            let trial: Vec<f64> = x.iter().zip(dx.iter()).map(|(xi, di)| xi - alpha * di).collect();
            if feasible(&trial) {
                if let Ok(rt) = f(&trial) {
                    if rt.iter().all(|v| v.is_finite()) {
                        if two_norm(&rt) < base {
                            accepted = Some((trial, rt));
                            break;
                        }
                        fallback = Some((trial, rt));
                    }
                }
            }
            alpha *= 0.5;
        }
        match accepted.or(fallback) {
            Some((xn, rn)) => {
                x = xn;
                r = rn;
            }
            None => return Err(Error::NoConvergence { iterations: opts.max_iterations, residual: inf_norm(&r) }),
        }
    }
    if inf_norm(&r) < opts.tolerance {
        Ok(x)
    } else {
        Err(Error::NoConvergence { iterations: opts.max_iterations, residual: inf_norm(&r) })
    }
}

/// Equilibrium of the reduced model by Newton iteration from `guess`.
pub fn find_equilibrium(inputs: &OperatingInputs, guess: &ReducedState) -> Result<ReducedState> {
    find_equilibrium_with(inputs, guess, NewtonOptions::default())
}

pub fn find_equilibrium_with(
    inputs: &OperatingInputs,
    guess: &ReducedState,
    opts: NewtonOptions,
) -> Result<ReducedState> {
    if !(guess.v > 0.0) {
        return Err(Error::Domain(format!("initial guess needs v > 0, got {}", guess.v)));
    }
    let kind = inputs.kind();
    let f = |z: &[f64]| reduced_dynamics(&ReducedState::from_slice(kind, z, inputs.omega_g), inputs);
    let x = newton(f, &guess.to_vec(kind), |z| z[0] > 0.0, opts)?;
    let mut eq = ReducedState::from_slice(kind, &x, inputs.omega_g);
    eq.omega = inputs.omega_g;
    Ok(eq)
}

/// Equilibrium started from the phasor solution at nominal voltage with the
/// phase of the linearized active-power flow.
pub fn solve_equilibrium(inputs: &OperatingInputs) -> Result<ReducedState> {
    let guess = default_guess(inputs);
    find_equilibrium(inputs, &guess).or_else(|first| {
        let flat = ReducedState::from_phasor(inputs.v0(), 0.0, inputs);
        find_equilibrium(inputs, &flat).map_err(|_| first)
    })
}

fn default_guess(inputs: &OperatingInputs) -> ReducedState {
    let v = inputs.v0();
    let x = inputs.circuit.x_t(inputs.omega_g);
    let p = inputs.setpoints.p_ref + (inputs.setpoints.omega_0 - inputs.omega_g) / p_slope(inputs, v);
    let s = (p * x / (v * inputs.v_g.max(1.0))).clamp(-0.9, 0.9);
    ReducedState::from_phasor(v, s.asin(), inputs)
}

/// Frequency droop slope dω/dP of the controller at RMS voltage `v`.
fn p_slope(inputs: &OperatingInputs, v: f64) -> f64 {
    use crate::model::ControllerParams::*;
    match inputs.params {
        Eaho(g) => g.eta_e,
        Aho(g) => g.eta / (v * v),
        Droop(g) => g.m_p,
    }
}
