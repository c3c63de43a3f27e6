//! Periodic spatial grids and their discrete frequency lattices.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A `d`-dimensional periodic grid of `n_points` per axis on a torus of side
/// `extent`, with time step `dt`. Points are stored row-major with the last
/// axis fastest.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub d: usize,
    pub n_points: usize,
    pub extent: f64,
    pub dt: f64,
}

impl GridSpec {
    pub fn new(d: usize, n_points: usize, extent: f64, dt: f64) -> Result<Self> {
        let g = Self { d, n_points, extent, dt };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.d) {
            return Err(Error::config(format!("grid dimension {} outside 1..=3", self.d)));
        }
        if self.n_points < 8 || !self.n_points.is_power_of_two() {
            return Err(Error::config(format!(
                "n_points = {} must be a power of two and at least 8",
                self.n_points
            )));
        }
        if !(self.extent > 0.0 && self.extent.is_finite()) {
            return Err(Error::config("extent must be positive"));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::config("dt must be positive"));
        }
        Ok(())
    }

    /// Total number of grid points, `n^d`.
    pub fn len(&self) -> usize {
        self.n_points.pow(self.d as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dx(&self) -> f64 {
        self.extent / self.n_points as f64
    }

    pub fn cell_volume(&self) -> f64 {
        self.dx().powi(self.d as i32)
    }

    /// Frequency spacing `1/L`.
    pub fn dxi(&self) -> f64 {
        1.0 / self.extent
    }

    /// Per-axis indices of a flat index.
    pub fn unflatten(&self, mut idx: usize) -> [usize; 3] {
        let n = self.n_points;
        let mut out = [0; 3];
        for a in (0..self.d).rev() {
            out[a] = idx % n;
            idx /= n;
        }
        out
    }

    pub fn flatten(&self, ix: &[usize]) -> usize {
        ix.iter().take(self.d).fold(0, |acc, &i| acc * self.n_points + i % self.n_points)
    }

    /// Signed index along one axis: `0..n/2` map to themselves and the rest to
    /// negative values, so the Nyquist index `n/2` maps to `−n/2`.
    pub fn signed(&self, i: usize) -> i64 {
        let n = self.n_points as i64;
        let i = i as i64;
        if i < n / 2 {
            i
        } else {
            i - n
        }
    }

    /// Frequency vector of a flat mode index.
    pub fn frequency(&self, idx: usize) -> [f64; 3] {
        let ix = self.unflatten(idx);
        let mut xi = [0.0; 3];
        for a in 0..self.d {
            xi[a] = self.signed(ix[a]) as f64 / self.extent;
        }
        xi
    }

    pub fn frequency_norm(&self, idx: usize) -> f64 {
        let xi = self.frequency(idx);
        xi.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Flat index of the mode with frequency `−ξ`.
    pub fn mirror(&self, idx: usize) -> usize {
        let n = self.n_points;
        let ix = self.unflatten(idx);
        let mut m = [0; 3];
        for a in 0..self.d {
            m[a] = (n - ix[a]) % n;
        }
        self.flatten(&m[..self.d])
    }

    /// Physical coordinates of a flat point index, in `[0, L)^d`.
    pub fn position(&self, idx: usize) -> [f64; 3] {
        let ix = self.unflatten(idx);
        let mut x = [0.0; 3];
        for a in 0..self.d {
            x[a] = ix[a] as f64 * self.dx();
        }
        x
    }

    /// Periodic displacement of a flat point index from the origin, folded into
    /// `[−L/2, L/2)^d`.
    pub fn displacement(&self, idx: usize) -> [f64; 3] {
        let ix = self.unflatten(idx);
        let mut x = [0.0; 3];
        for a in 0..self.d {
            x[a] = self.signed(ix[a]) as f64 * self.dx();
        }
        x
    }

    /// Nearest grid point to `x` (coordinates wrapped onto the torus).
    pub fn snap(&self, x: &[f64]) -> (usize, [f64; 3]) {
        let n = self.n_points as i64;
        let mut ix = [0usize; 3];
        let mut snapped = [0.0; 3];
        for a in 0..self.d {
            let v = x.get(a).copied().unwrap_or(0.0);
            let i = (v / self.dx()).round() as i64;
            let w = i.rem_euclid(n) as usize;
            ix[a] = w;
            snapped[a] = w as f64 * self.dx();
        }
        (self.flatten(&ix[..self.d]), snapped)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_grids() {
        assert!(GridSpec::new(1, 12, 1.0, 0.1).is_err());
        assert!(GridSpec::new(1, 4, 1.0, 0.1).is_err());
        assert!(GridSpec::new(1, 16, 0.0, 0.1).is_err());
        assert!(GridSpec::new(4, 16, 1.0, 0.1).is_err());
        assert!(GridSpec::new(2, 16, 1.0, 0.1).is_ok());
    }

    #[test]
    fn flatten_roundtrip_and_mirror() {
        let g = GridSpec::new(3, 8, 2.0, 0.1).unwrap();
        for idx in 0..g.len() {
            let ix = g.unflatten(idx);
            assert_eq!(g.flatten(&ix[..3]), idx);
            let m = g.mirror(idx);
            assert_eq!(g.mirror(m), idx);
            let (a, b) = (g.frequency(idx), g.frequency(m));
            for k in 0..3 {
                // the Nyquist frequency is its own mirror
                let nyq = 4.0 / 2.0;
                assert!(a[k] + b[k] == 0.0 || (a[k] == -nyq && b[k] == -nyq));
            }
        }
    }

    #[test]
    fn snapping_wraps() {
        let g = GridSpec::new(1, 8, 4.0, 0.1).unwrap();
        assert_eq!(g.snap(&[1.1]).0, 2);
        assert_eq!(g.snap(&[-0.5]).0, 7);
        assert_eq!(g.snap(&[4.0]).0, 0);
    }
}
