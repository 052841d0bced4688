use std::f64::consts::TAU;

use serde::Serialize;

use super::metrics::{cycle_average, overshoot, settling_time, sharing_error, DEFAULT_BAND};
use super::series::TimeSeries;

/// Cycles averaged for every reported steady value.
pub const STEADY_CYCLES: f64 = 10.0;

/// Smallest active-power step (W) for which a step response is evaluated.
const MIN_STEP: f64 = 1.0;

/// Mean powers over the last [`STEADY_CYCLES`] cycles before `t_end`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Plateau {
    pub t_end: f64,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    /// Active-power sharing error between the first two inverters.
    pub sharing_error: Option<f64>,
}

/// Cycle-averaged active-power response of one inverter to one event.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepResponse {
    pub t_event: f64,
    pub inverter: usize,
    pub initial: f64,
    pub target: f64,
    /// `None` when the response never enters the settling band.
    pub settling_time: Option<f64>,
    /// Percent of the step.
    pub overshoot: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    /// One plateau before each event and one at the end of the run.
    pub plateaus: Vec<Plateau>,
    pub steps: Vec<StepResponse>,
    pub max_kcl_residual: f64,
    pub events: Vec<(f64, String)>,
}

impl Summary {
    /// The plateau at the end of the run.
    pub fn last(&self) -> Option<&Plateau> {
        self.plateaus.last()
    }
}

/// Steady powers, step responses and sharing errors of a run. `omega` sets
/// the averaging period.
pub fn summarize(ts: &TimeSeries, omega: f64) -> Summary {
    let period = TAU / omega;
    let end = ts.t.last().copied().unwrap_or(0.0);
    let mut edges: Vec<f64> = ts.events.iter().map(|(t, _)| *t).filter(|&t| t > 0.0 && t < end).collect();
    edges.dedup();

    let plateau = |t_end: f64| {
        let p: Vec<f64> =
            ts.inverters.iter().filter_map(|ch| ts.mean_before(&ch.p, t_end + 1e-9, STEADY_CYCLES, omega)).collect();
        let q: Vec<f64> =
            ts.inverters.iter().filter_map(|ch| ts.mean_before(&ch.q, t_end + 1e-9, STEADY_CYCLES, omega)).collect();
        let sharing_error = (p.len() >= 2).then(|| sharing_error(p[0], p[1]));
        Plateau { t_end, p, q, sharing_error }
    };
    let plateaus: Vec<Plateau> = edges.iter().copied().chain(std::iter::once(end)).map(plateau).collect();

    let mut steps = Vec::new();
    for (k, &t_event) in edges.iter().enumerate() {
        let (before, after) = (&plateaus[k], &plateaus[k + 1]);
        let t_next = after.t_end;
        for (j, ch) in ts.inverters.iter().enumerate() {
            let (Some(&initial), Some(&target)) = (before.p.get(j), after.p.get(j)) else { continue };
            if (target - initial).abs() < MIN_STEP {
                continue;
            }
            let (a, b) = (ts.index_at(t_event - period), ts.index_at(t_next + 1e-9));
            let avg = cycle_average(&ts.t[a..b], &ch.p[a..b], period);
            steps.push(StepResponse {
                t_event,
                inverter: j,
                initial,
                target,
                settling_time: settling_time(&ts.t[a..b], &avg, t_event, initial, target, DEFAULT_BAND).ok(),
                overshoot: overshoot(&avg, initial, target),
            });
        }
    }

    Summary { plateaus, steps, max_kcl_residual: ts.max_kcl_residual, events: ts.events.clone() }
}
