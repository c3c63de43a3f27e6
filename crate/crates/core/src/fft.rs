//! Multidimensional complex FFT on [`GridSpec`] buffers, built on `rustfft`.
//!
//! Conventions: `forward` computes `Σ_x φ(x) e^{−2πi k·x/n}` and `inverse`
//! computes `Σ_k φ̂(k) e^{+2πi k·x/n}`, both unnormalized.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::grid::GridSpec;

#[derive(Clone)]
pub struct FftNd {
    d: usize,
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for FftNd {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FftNd").field("d", &self.d).field("n", &self.n).finish()
    }
}

impl FftNd {
    pub fn new(grid: &GridSpec) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            d: grid.d,
            n: grid.n_points,
            forward: planner.plan_fft_forward(grid.n_points),
            inverse: planner.plan_fft_inverse(grid.n_points),
        }
    }

    pub fn forward(&self, data: &mut [Complex64]) {
        self.apply(data, &self.forward);
    }

    pub fn inverse(&self, data: &mut [Complex64]) {
        self.apply(data, &self.inverse);
    }

    fn apply(&self, data: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        let n = self.n;
        let total = n.pow(self.d as u32);
        assert_eq!(data.len(), total, "buffer does not match grid");
        // last axis is contiguous
        plan.process(data);
        if self.d == 1 {
            return;
        }
        let mut line = vec![Complex64::new(0.0, 0.0); n];
        for axis in 0..self.d - 1 {
            let stride = n.pow((self.d - 1 - axis) as u32);
            let block = stride * n;
            for base in (0..total).step_by(block) {
                for off in 0..stride {
                    let start = base + off;
                    for (i, v) in line.iter_mut().enumerate() {
                        *v = data[start + i * stride];
                    }
                    plan.process(&mut line);
                    for (i, v) in line.iter().enumerate() {
                        data[start + i * stride] = *v;
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn naive_dft(grid: &GridSpec, data: &[Complex64]) -> Vec<Complex64> {
        let n = grid.n_points as f64;
        (0..grid.len())
            .map(|k| {
                let kk = grid.unflatten(k);
                let mut s = Complex64::new(0.0, 0.0);
                for (x, v) in data.iter().enumerate() {
                    let xx = grid.unflatten(x);
                    let phase: f64 = (0..grid.d).map(|a| (kk[a] * xx[a]) as f64).sum::<f64>();
                    s += v * Complex64::from_polar(1.0, -2.0 * PI * phase / n);
                }
                s
            })
            .collect()
    }

    #[test]
    fn matches_naive_dft_in_2d_and_3d() {
        for d in [2, 3] {
            let g = GridSpec::new(d, 8, 1.0, 0.1).unwrap();
            let data: Vec<Complex64> = (0..g.len())
                .map(|i| Complex64::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()))
                .collect();
            let want = naive_dft(&g, &data);
            let mut got = data.clone();
            let fft = FftNd::new(&g);
            fft.forward(&mut got);
            for (a, b) in got.iter().zip(&want) {
                assert!((a - b).norm() < 1e-10);
            }
            fft.inverse(&mut got);
            for (a, b) in got.iter().zip(&data) {
                assert!((a / g.len() as f64 - b).norm() < 1e-12);
            }
        }
    }
}
