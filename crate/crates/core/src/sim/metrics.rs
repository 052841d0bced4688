use crate::error::{Error, Result};

/// Default settling band, as a fraction of the step size.
pub const DEFAULT_BAND: f64 = 0.02;

/// Time from `t_event` until `x` enters the band `±band·|target − initial|`
/// around `target` for good. Samples before `t_event` are ignored.
pub fn settling_time(t: &[f64], x: &[f64], t_event: f64, initial: f64, target: f64, band: f64) -> Result<f64> {
    if t.is_empty() || t.len() != x.len() {
        return Err(Error::Domain("settling time needs a nonempty channel with matching time base".into()));
    }
    let tol = band * (target - initial).abs();
    let start = t.partition_point(|&s| s < t_event);
    if start == t.len() {
        return Err(Error::NotSettled);
    }
    let outside = |k: usize| (x[k] - target).abs() > tol;
    match (start..t.len()).rev().find(|&k| outside(k)) {
        None => Ok(0.0),
        Some(k) if k + 1 == t.len() => Err(Error::NotSettled),
        Some(k) => Ok(t[k + 1] - t_event),
    }
}

/// Peak excursion beyond `target`, in percent of the step `target − initial`.
pub fn overshoot(x: &[f64], initial: f64, target: f64) -> f64 {
    let step = target - initial;
    let peak = x.iter().map(|&v| (v - target) / step).fold(0.0, f64::max);
    peak * 100.0
}

/// Trailing moving average of `x` over one `period` of the time base `t`.
/// Early samples average over the history available so far.
pub fn cycle_average(t: &[f64], x: &[f64], period: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(x.len());
    let mut sum = 0.0;
    let mut first = 0;
    for k in 0..x.len() {
        sum += x[k];
        while t[k] - t[first] >= period - 1e-12 {
            sum -= x[first];
            first += 1;
        }
        out.push(sum / (k + 1 - first) as f64);
    }
    out
}

/// Relative mismatch `|a − b| / max(|a|, |b|)`; zero when both are zero.
pub fn sharing_error(a: f64, b: f64) -> f64 {
    let m = a.abs().max(b.abs());
    if m == 0.0 {
        0.0
    } else {
        (a - b).abs() / m
    }
}
