//! Gain design from rated power, frequency band and voltage band, with a
//! small-signal check of the enhanced oscillator gains.

use rayon::prelude::*;
use serde::Serialize;

use crate::analysis::{critical_value, small_signal_model, OperatingInputs, CRITICAL_GAIN_TOL};
use crate::controllers::droop_coefficients;
use crate::error::{Error, Result};
use crate::model::{
    peak_to_rms, AhoGains, CircuitParams, ControllerKind, ControllerParams, DroopGains, EahoGains, RatingsAndLimits,
    Setpoints,
};

/// Multiplier applied to the critical gain when the design must be curtailed.
pub const SAFETY_FACTOR: f64 = 0.95;

fn check_range(ratings: &RatingsAndLimits, sp: &Setpoints) -> Result<()> {
    if ratings.v_p_max <= sp.v_p0 {
        return Err(Error::DegenerateVoltageRange { v_p0: sp.v_p0, v_p_max: ratings.v_p_max });
    }
    Ok(())
}

/// `(η, μ)` placing rated power at the frequency and voltage band edges.
pub fn design_aho(ratings: &RatingsAndLimits, sp: &Setpoints) -> Result<AhoGains> {
    check_range(ratings, sp)?;
    let vm2 = ratings.v_p_max * ratings.v_p_max;
    let eta = ratings.d_omega_max * vm2 / (2.0 * ratings.p_0);
    let mu = 2.0 * eta * ratings.q_0 / (vm2 * vm2 - sp.v_p0 * sp.v_p0 * vm2);
    Ok(AhoGains { eta, mu })
}

/// `(η_e, μ_e)` placing rated power at the frequency and voltage band edges.
pub fn design_eaho(ratings: &RatingsAndLimits, sp: &Setpoints) -> Result<EahoGains> {
    check_range(ratings, sp)?;
    let eta_e = ratings.d_omega_max / ratings.p_0;
    let mu_e = eta_e * ratings.q_0 / (ratings.v_p_max * ratings.v_p_max - sp.v_p0 * sp.v_p0);
    Ok(EahoGains { eta_e, mu_e })
}

/// Linear droop slopes `(m_p, m_q)`; the filter cutoffs are passed through.
pub fn design_droop(ratings: &RatingsAndLimits, sp: &Setpoints, omega_p: f64, omega_q: f64) -> Result<DroopGains> {
    check_range(ratings, sp)?;
    Ok(DroopGains {
        m_p: ratings.d_omega_max / ratings.p_0,
        m_q: (ratings.v_p_max - sp.v_p0) / ratings.q_0,
        omega_p,
        omega_q,
    })
}

/// Which band edge fixed a gain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Binding {
    Frequency,
    Voltage,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StabilityStatus {
    Pass,
    Curtailed,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityCheck {
    pub status: StabilityStatus,
    /// Gain at which the rated operating point loses stability, if one was
    /// found in the scanned range.
    pub critical: Option<f64>,
    /// η_e from the band-edge design, before any curtailment.
    pub designed: f64,
    /// Largest real eigenvalue part at the returned gains.
    pub max_real_part: f64,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DesignReport {
    pub params: ControllerParams,
    pub binding: Vec<(&'static str, Binding)>,
    pub stability: StabilityCheck,
}

/// Upper end of the scanned gain range, as a multiple of the designed gain.
const SCAN_MULTIPLES: [f64; 9] = [1.0, 1.5, 2.0, 3.0, 4.0, 6.0, 8.0, 16.0, 64.0];

/// Designs `(η_e, μ_e)` and checks small-signal stability at the rated
/// operating point (`p_ref = p_0`, `q_ref = 0`, nominal grid). If the
/// designed η_e is not below the critical gain it is reduced to
/// `SAFETY_FACTOR` times the critical gain.
pub fn design_with_stability(
    ratings: &RatingsAndLimits,
    sp: &Setpoints,
    circuit: &CircuitParams,
) -> Result<DesignReport> {
    let gains = design_eaho(ratings, sp)?;
    let base = OperatingInputs {
        v_g: peak_to_rms(sp.v_p0),
        omega_g: sp.omega_0,
        setpoints: sp.with_power(ratings.p_0, 0.0),
        circuit: *circuit,
        params: ControllerParams::Eaho(gains),
    };
    let margin =
        |eta_e: f64| -> Result<f64> { Ok(small_signal_model(&base.with_parameter("eta_e", eta_e)?)?.max_real_part()) };

    let floor = gains.eta_e * 1e-2;
    if !margin(floor).is_ok_and(|m| m < 0.0) {
        return Err(Error::InfeasibleDesign(format!(
            "no stable equilibrium at the rated operating point even for eta_e = {floor:e}"
        )));
    }

    let scanned: Vec<(f64, bool)> = SCAN_MULTIPLES
        .par_iter()
        .map(|&k| {
            let g = k * gains.eta_e;
            (g, !margin(g).is_ok_and(|m| m < 0.0))
        })
        .collect();

    let mut notes = vec!["0 < μ_e, always satisfied".to_string()];
    let critical = match scanned.iter().position(|&(_, unstable)| unstable) {
        None => {
            notes.push(format!("no instability up to {}·η_e", SCAN_MULTIPLES[SCAN_MULTIPLES.len() - 1]));
            None
        }
        Some(k) => {
            let lo = if k == 0 { floor } else { scanned[k - 1].0 };
            let hi = scanned[k].0;
            // treat a failed equilibrium as loss of stability
            let c = critical_value(|g| Ok(margin(g).unwrap_or(f64::INFINITY)), lo, hi, CRITICAL_GAIN_TOL)?;
            Some(c)
        }
    };

    let (eta_e, status) = match critical {
        Some(c) if gains.eta_e >= c => {
            notes.push(format!("η_e curtailed from {:.6} to {SAFETY_FACTOR}·{c:.6}", gains.eta_e));
            (SAFETY_FACTOR * c, StabilityStatus::Curtailed)
        }
        Some(c) => {
            notes.push(format!("η_e < {c:.4}, satisfied"));
            (gains.eta_e, StabilityStatus::Pass)
        }
        None => (gains.eta_e, StabilityStatus::Pass),
    };
    let max_real_part = margin(eta_e)?;
    if max_real_part >= 0.0 {
        return Err(Error::InfeasibleDesign(format!("eta_e = {eta_e} is not stable at the rated point")));
    }

    Ok(DesignReport {
        params: ControllerParams::Eaho(EahoGains { eta_e, mu_e: gains.mu_e }),
        binding: vec![("eta_e", Binding::Frequency), ("mu_e", Binding::Voltage)],
        stability: StabilityCheck { status, critical, designed: gains.eta_e, max_real_part, notes },
    })
}

/// One sample of the effective droop slopes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvePoint {
    pub v_p: f64,
    pub m_p: f64,
    /// `None` where the slope is unbounded.
    pub m_q: Option<f64>,
}

/// Default number of samples of [`droop_curve`].
pub const CURVE_POINTS: usize = 200;

/// Default amplitude range of [`droop_curve`], as multiples of `v_p0`.
pub const CURVE_RANGE: (f64, f64) = (0.5, 1.2);

/// Effective droop slopes sampled uniformly over `[lo, hi]` (peak volts).
pub fn droop_curve(params: &ControllerParams, range: (f64, f64), n: usize, sp: &Setpoints) -> Result<Vec<CurvePoint>> {
    let (lo, hi) = range;
    if !(lo > 0.0 && hi <= 2.0 * sp.v_p0 && lo <= hi) {
        return Err(Error::Domain(format!("curve range [{lo}, {hi}] must lie within (0, 2·v_p0]")));
    }
    crate::analysis::linspace(lo, hi, n)
        .into_iter()
        .map(|v_p| match droop_coefficients(params, v_p, sp) {
            Ok((m_p, m_q)) => Ok(CurvePoint { v_p, m_p, m_q: Some(m_q) }),
            Err(Error::SingularCoefficient(_)) => {
                let m_p = droop_coefficients(params, v_p * (1.0 + 1e-9), sp)?.0;
                Ok(CurvePoint { v_p, m_p, m_q: None })
            }
            Err(e) => Err(e),
        })
        .collect()
}

/// Band-edge design for any controller kind; droop uses the given LPF
/// cutoffs.
pub fn design(
    kind: ControllerKind,
    ratings: &RatingsAndLimits,
    sp: &Setpoints,
    omega_p: f64,
    omega_q: f64,
) -> Result<ControllerParams> {
    Ok(match kind {
        ControllerKind::Aho => ControllerParams::Aho(design_aho(ratings, sp)?),
        ControllerKind::Eaho => ControllerParams::Eaho(design_eaho(ratings, sp)?),
        ControllerKind::Droop => ControllerParams::Droop(design_droop(ratings, sp, omega_p, omega_q)?),
    })
}
