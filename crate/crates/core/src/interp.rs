//! Piecewise cubic Hermite interpolation with Fritsch–Carlson slopes.
//!
//! The interpolant is C¹; its second derivative jumps at the knots, which is
//! why tabulated geometry reports its second derivative as approximate.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct MonotoneCubic {
    x: Vec<f64>,
    y: Vec<f64>,
    slopes: Vec<f64>,
}

impl MonotoneCubic {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::InvalidParameter(format!(
                "interpolation table has {} abscissae but {} values",
                x.len(),
                y.len()
            )));
        }
        if x.len() < 2 {
            return Err(Error::GridTooSmall {
                needed: 2,
                got: x.len(),
            });
        }
        if x.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParameter(
                "interpolation abscissae must be strictly increasing".into(),
            ));
        }
        if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(
                "interpolation table contains non-finite values".into(),
            ));
        }
        let slopes = fritsch_carlson_slopes(&x, &y);
        Ok(Self { x, y, slopes })
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn lo(&self) -> f64 {
        self.x[0]
    }

    pub fn hi(&self) -> f64 {
        self.x[self.x.len() - 1]
    }

    fn segment(&self, t: f64) -> usize {
        let n = self.x.len();
        match self.x.partition_point(|&xi| xi <= t) {
            0 => 0,
            k if k >= n => n - 2,
            k => k - 1,
        }
    }

    /// Value and first three derivatives at `t` (extrapolates the end cubics).
    pub fn eval_derivs(&self, t: f64) -> [f64; 4] {
        let k = self.segment(t);
        let h = self.x[k + 1] - self.x[k];
        let s = (t - self.x[k]) / h;
        let (y0, y1) = (self.y[k], self.y[k + 1]);
        let (m0, m1) = (self.slopes[k] * h, self.slopes[k + 1] * h);

        // Hermite basis in the local variable s ∈ [0, 1].
        let h00 = 2.0 * s * s * s - 3.0 * s * s + 1.0;
        let h10 = s * s * s - 2.0 * s * s + s;
        let h01 = -2.0 * s * s * s + 3.0 * s * s;
        let h11 = s * s * s - s * s;
        let value = h00 * y0 + h10 * m0 + h01 * y1 + h11 * m1;

        let d00 = 6.0 * s * s - 6.0 * s;
        let d10 = 3.0 * s * s - 4.0 * s + 1.0;
        let d01 = -6.0 * s * s + 6.0 * s;
        let d11 = 3.0 * s * s - 2.0 * s;
        let first = (d00 * y0 + d10 * m0 + d01 * y1 + d11 * m1) / h;

        let e00 = 12.0 * s - 6.0;
        let e10 = 6.0 * s - 4.0;
        let e01 = -12.0 * s + 6.0;
        let e11 = 6.0 * s - 2.0;
        let second = (e00 * y0 + e10 * m0 + e01 * y1 + e11 * m1) / (h * h);

        let third = (12.0 * y0 + 6.0 * m0 - 12.0 * y1 + 6.0 * m1) / (h * h * h);
        [value, first, second, third]
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.eval_derivs(t)[0]
    }
}

fn fritsch_carlson_slopes(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let secants: Vec<f64> = (0..n - 1)
        .map(|k| (y[k + 1] - y[k]) / (x[k + 1] - x[k]))
        .collect();
    if n == 2 {
        return vec![secants[0]; 2];
    }
    let mut m = vec![0.0; n];
    m[0] = secants[0];
    m[n - 1] = secants[n - 2];
    for k in 1..n - 1 {
        let (d0, d1) = (secants[k - 1], secants[k]);
        if d0 * d1 <= 0.0 {
            m[k] = 0.0;
        } else {
            // weighted harmonic mean (Fritsch–Butland form)
            let h0 = x[k] - x[k - 1];
            let h1 = x[k + 1] - x[k];
            let w0 = 2.0 * h1 + h0;
            let w1 = h1 + 2.0 * h0;
            m[k] = (w0 + w1) / (w0 / d0 + w1 / d1);
        }
    }
    m
}

/// Resample `values` given on increasing nodes `src` at the points `dst`.
///
/// Points that coincide with a source node (to 1e-12 of the local spacing)
/// take the node value exactly.
pub fn resample(src: &[f64], values: &[f64], dst: &[f64]) -> Result<Vec<f64>> {
    let interp = MonotoneCubic::new(src.to_vec(), values.to_vec())?;
    let (lo, hi) = (interp.lo(), interp.hi());
    let span = hi - lo;
    dst.iter()
        .map(|&t| {
            if t < lo - 1e-12 * span || t > hi + 1e-12 * span {
                return Err(Error::GridMismatch(format!(
                    "resampling point {t} outside [{lo}, {hi}]"
                )));
            }
            let k = src.partition_point(|&s| s < t);
            for j in [k.wrapping_sub(1), k] {
                if j < src.len() {
                    let spacing = if j + 1 < src.len() {
                        src[j + 1] - src[j]
                    } else {
                        src[j] - src[j - 1]
                    };
                    if (src[j] - t).abs() <= 1e-12 * spacing {
                        return Ok(values[j]);
                    }
                }
            }
            Ok(interp.eval(t))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproduces_cubic_free_data_at_knots() {
        let x: Vec<f64> = (0..11).map(|i| i as f64 * 0.3).collect();
        let y: Vec<f64> = x.iter().map(|v| v.exp()).collect();
        let p = MonotoneCubic::new(x.clone(), y.clone()).unwrap();
        for (xi, yi) in x.iter().zip(&y) {
            assert!((p.eval(*xi) - yi).abs() < 1e-14 * yi);
        }
        let mid = p.eval(1.05);
        assert!((mid - 1.05f64.exp()).abs() < 1e-2);
    }

    #[test]
    fn preserves_monotonicity() {
        let x = vec![0.0, 1.0, 2.0, 3.0, 4.0];
        let y = vec![0.0, 0.0, 1.0, 1.0, 5.0];
        let p = MonotoneCubic::new(x, y).unwrap();
        let mut prev = f64::NEG_INFINITY;
        for i in 0..=400 {
            let v = p.eval(i as f64 * 0.01);
            assert!(v >= prev - 1e-15);
            prev = v;
        }
    }

    #[test]
    fn rejects_unsorted_abscissae() {
        assert!(MonotoneCubic::new(vec![0.0, 2.0, 1.0], vec![1.0; 3]).is_err());
        assert!(MonotoneCubic::new(vec![0.0], vec![1.0]).is_err());
    }

    #[test]
    fn resample_is_exact_on_shared_nodes() {
        let src: Vec<f64> = (0..5).map(|i| i as f64).collect();
        let vals = vec![3.0, 1.0, 4.0, 1.0, 5.0];
        let out = resample(&src, &vals, &[0.0, 2.0, 4.0]).unwrap();
        assert_eq!(out, vec![3.0, 4.0, 5.0]);
        assert!(resample(&src, &vals, &[4.5]).is_err());
    }
}
