use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};

use super::eigen::eigenvalues;
use super::equilibrium::solve_equilibrium;
use super::reduced::{jacobian_analytic, OperatingInputs, ReducedState};

/// Linearization of the reduced model about an equilibrium.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SmallSignalModel {
    pub inputs: OperatingInputs,
    pub equilibrium: ReducedState,
    pub labels: Vec<&'static str>,
    #[serde(skip)]
    pub jacobian: DMatrix<f64>,
    /// Sorted by descending real part.
    #[serde(serialize_with = "serialize_complex")]
    pub eigenvalues: Vec<Complex64>,
}

fn serialize_complex<S: serde::Serializer>(v: &[Complex64], s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(v.len()))?;
    for z in v {
        seq.serialize_element(&(z.re, z.im))?;
    }
    seq.end()
}

impl SmallSignalModel {
    pub fn max_real_part(&self) -> f64 {
        self.eigenvalues.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn is_stable(&self) -> bool {
        self.max_real_part() < 0.0
    }
}

/// Solves the equilibrium and linearizes about it.
pub fn small_signal_model(inputs: &OperatingInputs) -> Result<SmallSignalModel> {
    let equilibrium = solve_equilibrium(inputs)?;
    linearize(inputs, equilibrium)
}

/// Linearizes about a known equilibrium.
pub fn linearize(inputs: &OperatingInputs, equilibrium: ReducedState) -> Result<SmallSignalModel> {
    let jacobian = jacobian_analytic(&equilibrium, inputs);
    let eigenvalues = eigenvalues(&jacobian)?;
    Ok(SmallSignalModel {
        inputs: *inputs,
        equilibrium,
        labels: ReducedState::labels(inputs.kind()).to_vec(),
        jacobian,
        eigenvalues,
    })
}

/// One point of a parameter sweep; `eigenvalues` is `Err` where the
/// equilibrium or eigen solve failed.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub value: f64,
    pub eigenvalues: Result<Vec<Complex64>>,
}

impl SweepPoint {
    pub fn max_real_part(&self) -> Option<f64> {
        self.eigenvalues.as_ref().ok().map(|l| l.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max))
    }
}

/// Eigenvalues of the re-solved equilibrium at each value of `parameter`.
/// Points run in parallel; a failing point is flagged and the sweep continues.
pub fn sweep(parameter: &str, values: &[f64], base: &OperatingInputs) -> Result<Vec<SweepPoint>> {
    if base.parameter(parameter).is_none() {
        return Err(Error::Config(format!("unknown sweep parameter `{parameter}` for {}", base.kind())));
    }
    Ok(values
        .par_iter()
        .map(|&value| SweepPoint {
            value,
            eigenvalues: base
                .with_parameter(parameter, value)
                .and_then(|inp| small_signal_model(&inp))
                .map(|m| m.eigenvalues),
        })
        .collect())
}

/// `n` evenly spaced values from `from` to `to` inclusive.
pub fn linspace(from: f64, to: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![from],
        _ => (0..n).map(|k| from + (to - from) * k as f64 / (n - 1) as f64).collect(),
    }
}

/// Bisects for the value in `[lo, hi]` where `margin` changes sign from
/// negative to non-negative, to absolute tolerance `tol`.
pub fn critical_value<F>(margin: F, lo: f64, hi: f64, tol: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let (mut a, mut b) = (lo, hi);
    let (fa, fb) = (margin(a)?, margin(b)?);
    if !(fa < 0.0 && fb >= 0.0) {
        return Err(Error::NoInstabilityInBracket { lo, hi });
    }
    while b - a > tol {
        let m = 0.5 * (a + b);
        if margin(m)? < 0.0 {
            a = m;
        } else {
            b = m;
        }
    }
    Ok(0.5 * (a + b))
}

/// Absolute tolerance of [`critical_gain`].
pub const CRITICAL_GAIN_TOL: f64 = 1e-5;

/// Smallest value of `parameter` in `bracket` at which the equilibrium loses
/// small-signal stability (largest eigenvalue real part crosses zero).
pub fn critical_gain(parameter: &str, bracket: (f64, f64), base: &OperatingInputs) -> Result<f64> {
    critical_value(
        |g| Ok(small_signal_model(&base.with_parameter(parameter, g)?)?.max_real_part()),
        bracket.0,
        bracket.1,
        CRITICAL_GAIN_TOL,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::table1;

    fn inputs() -> OperatingInputs {
        OperatingInputs {
            v_g: 220.0,
            omega_g: table1::omega_0(),
            setpoints: table1::setpoints().with_power(2000.0, 0.0),
            circuit: table1::circuit(),
            params: table1::eaho(),
        }
    }

    #[test]
    fn design_point_is_stable() {
        let m = small_signal_model(&inputs()).unwrap();
        assert!(m.is_stable(), "{:?}", m.eigenvalues);
        assert_eq!(m.labels, vec!["v", "theta", "i_d", "i_q"]);
        assert_eq!(m.jacobian[(2, 3)], table1::omega_0());
        assert_eq!(m.jacobian[(3, 2)], -table1::omega_0());
    }

    #[test]
    fn scalar_threshold() {
        let g = critical_value(|g| Ok(g - 1.0), 0.0, 3.0, 1e-5).unwrap();
        assert!((g - 1.0).abs() < 1e-5);
        assert_eq!(
            critical_value(|g| Ok(g - 5.0), 0.0, 3.0, 1e-5),
            Err(Error::NoInstabilityInBracket { lo: 0.0, hi: 3.0 })
        );
    }

    #[test]
    fn critical_eta_e() {
        let g = critical_gain("eta_e", (0.0008, 0.0128), &inputs()).unwrap();
        assert!((g - 0.0062).abs() / 0.0062 < 0.1, "{g}");
        assert!((g / table1::ETA_E - 4.0).abs() / 4.0 < 0.1);
    }

    #[test]
    fn sweep_flags_bad_points() {
        let pts = sweep("l_g", &[1e-3, 5e-3, -1.0], &inputs()).unwrap();
        assert_eq!(pts.len(), 3);
        assert!(pts[0].eigenvalues.is_ok());
        assert!(pts[0].max_real_part().unwrap() < pts[1].max_real_part().unwrap());
        assert!(sweep("eta", &[1.0], &inputs()).is_err());
    }

    #[test]
    fn linspace_endpoints() {
        assert_eq!(linspace(1.0, 3.0, 3), vec![1.0, 2.0, 3.0]);
        assert!(linspace(0.0, 1.0, 0).is_empty());
    }
}
