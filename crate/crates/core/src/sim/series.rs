use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use super::network::Observation;

/// Logged channels of one inverter.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct InverterChannels {
    pub v_alpha: Vec<f64>,
    pub v_beta: Vec<f64>,
    pub v_p: Vec<f64>,
    /// Unwrapped phase (rad).
    pub theta: Vec<f64>,
    pub omega: Vec<f64>,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub i_alpha: Vec<f64>,
}

/// Uniformly sampled simulation output. All channels share `t`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub t: Vec<f64>,
    pub inverters: Vec<InverterChannels>,
    pub v_pcc: Vec<f64>,
    pub i_g: Vec<f64>,
    /// Largest |Σ i_j − i_load − i_g| seen over the logged samples (A).
    pub max_kcl_residual: f64,
    /// Event markers: application time and description.
    pub events: Vec<(f64, String)>,
}

impl TimeSeries {
    pub fn new(n_inverters: usize) -> Self {
        Self { inverters: vec![InverterChannels::default(); n_inverters], ..Default::default() }
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn push(&mut self, t: f64, obs: &Observation) {
        self.t.push(t);
        for (ch, o) in self.inverters.iter_mut().zip(&obs.inverters) {
            let theta = match ch.theta.last() {
                Some(&prev) => prev + wrap(o.theta - prev),
                None => o.theta,
            };
            ch.v_alpha.push(o.v_alpha);
            ch.v_beta.push(o.v_beta);
            ch.v_p.push(o.v_p);
            ch.theta.push(theta);
            ch.omega.push(o.omega);
            ch.p.push(o.p);
            ch.q.push(o.q);
            ch.i_alpha.push(o.i_alpha);
        }
        self.v_pcc.push(obs.v_pcc);
        self.i_g.push(obs.i_g);
        self.max_kcl_residual = self.max_kcl_residual.max(obs.kcl_residual().abs());
    }

    /// Index of the first sample at or after `t`.
    pub fn index_at(&self, t: f64) -> usize {
        self.t.partition_point(|&s| s < t - 1e-12)
    }

    /// Mean of `channel` over samples with `t0 ≤ t < t1`.
    pub fn window_mean(&self, channel: &[f64], t0: f64, t1: f64) -> Option<f64> {
        let (a, b) = (self.index_at(t0), self.index_at(t1));
        if b <= a {
            return None;
        }
        Some(channel[a..b].iter().sum::<f64>() / (b - a) as f64)
    }

    /// Mean of `channel` over the final `cycles` periods at angular frequency `omega`.
    pub fn steady_mean(&self, channel: &[f64], cycles: f64, omega: f64) -> Option<f64> {
        let end = *self.t.last()?;
        self.window_mean(channel, end - cycles * TAU / omega, end + 1e-9)
    }

    /// Mean of `channel` over the `cycles` periods ending at `t_end`.
    pub fn mean_before(&self, channel: &[f64], t_end: f64, cycles: f64, omega: f64) -> Option<f64> {
        self.window_mean(channel, t_end - cycles * TAU / omega, t_end)
    }

    /// Samples of `channel` from `t0` onward, with their times.
    pub fn after<'a>(&'a self, channel: &'a [f64], t0: f64) -> (&'a [f64], &'a [f64]) {
        let a = self.index_at(t0);
        (&self.t[a..], &channel[a..])
    }
}

fn wrap(x: f64) -> f64 {
    let y = (x + PI).rem_euclid(TAU) - PI;
    if y == -PI {
        PI
    } else {
        y
    }
}
