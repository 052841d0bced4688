use crate::error::Result;

/// Classical fixed-step fourth-order Runge–Kutta with reusable stage buffers.
#[derive(Debug, Clone)]
pub struct Rk4 {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Rk4 {
    pub fn new(dim: usize) -> Self {
        Self { k1: vec![0.0; dim], k2: vec![0.0; dim], k3: vec![0.0; dim], k4: vec![0.0; dim], tmp: vec![0.0; dim] }
    }

    /// Advances `y` from `t` to `t + h`. `f(t, y, dy)` writes the derivative.
    pub fn step<F>(&mut self, t: f64, y: &mut [f64], h: f64, mut f: F) -> Result<()>
    where
        F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
    {
        let n = y.len();
        debug_assert_eq!(n, self.k1.len());

        f(t, y, &mut self.k1)?;
        axpy(&mut self.tmp, y, 0.5 * h, &self.k1);
        f(t + 0.5 * h, &self.tmp, &mut self.k2)?;
        axpy(&mut self.tmp, y, 0.5 * h, &self.k2);
        f(t + 0.5 * h, &self.tmp, &mut self.k3)?;
        axpy(&mut self.tmp, y, h, &self.k3);
        f(t + h, &self.tmp, &mut self.k4)?;
        for (i, yi) in y.iter_mut().enumerate() {
            *yi += h / 6.0 * (self.k1[i] + 2.0 * self.k2[i] + 2.0 * self.k3[i] + self.k4[i]);
        }
        Ok(())
    }
}

/// `out = y + a·k`.
fn axpy(out: &mut [f64], y: &[f64], a: f64, k: &[f64]) {
    for ((o, y), k) in out.iter_mut().zip(y).zip(k) {
        *o = y + a * k;
    }
}
