//! Sampled concentration fields and the norms used to compare them.

use serde::Serialize;

use crate::error::{Error, Result};

/// Relative tolerance on node spacing for a grid to count as uniform.
pub const UNIFORM_TOL: f64 = 1e-12;

/// Concentration per unit length sampled on a uniform grid at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct ConcentrationField {
    x: Vec<f64>,
    values: Vec<f64>,
    time: f64,
}

/// `n` equally spaced nodes from `lo` to `hi` inclusive.
pub fn uniform_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let h = (hi - lo) / (n - 1) as f64;
    (0..n)
        .map(|i| if i + 1 == n { hi } else { lo + i as f64 * h })
        .collect()
}

impl ConcentrationField {
    pub fn new(x: Vec<f64>, values: Vec<f64>, time: f64) -> Result<Self> {
        if x.len() != values.len() {
            return Err(Error::GridMismatch(format!(
                "{} nodes but {} values",
                x.len(),
                values.len()
            )));
        }
        if x.len() < 2 {
            return Err(Error::GridTooSmall { needed: 2, got: x.len() });
        }
        let n = x.len();
        let span = x[n - 1] - x[0];
        if !(span > 0.0) || !span.is_finite() {
            return Err(Error::GridMismatch("grid must be increasing and finite".into()));
        }
        let h = span / (n - 1) as f64;
        for (i, xi) in x.iter().enumerate() {
            if (xi - (x[0] + i as f64 * h)).abs() > UNIFORM_TOL * span {
                return Err(Error::GridMismatch(format!("grid is not uniform at node {i}")));
            }
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::IntegrityError(format!("non-finite value at node {i}")));
        }
        if !(time >= 0.0) {
            return Err(Error::InvalidParameter(format!("field time must be non-negative, got {time}")));
        }
        Ok(Self { x, values, time })
    }

    /// Samples `f` on `n` uniform nodes spanning `[lo, hi]`.
    pub fn from_fn(lo: f64, hi: f64, n: usize, time: f64, f: impl Fn(f64) -> f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::GridTooSmall { needed: 2, got: n });
        }
        let x = uniform_grid(lo, hi, n);
        let values = x.iter().map(|&t| f(t)).collect();
        Self::new(x, values, time)
    }

    /// Like [`from_fn`](Self::from_fn) with a fallible sampler.
    pub fn try_from_fn(
        lo: f64,
        hi: f64,
        n: usize,
        time: f64,
        f: impl Fn(f64) -> Result<f64>,
    ) -> Result<Self> {
        if n < 2 {
            return Err(Error::GridTooSmall { needed: 2, got: n });
        }
        let x = uniform_grid(lo, hi, n);
        let values = x.iter().map(|&t| f(t)).collect::<Result<Vec<_>>>()?;
        Self::new(x, values, time)
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn dx(&self) -> f64 {
        (self.x[self.x.len() - 1] - self.x[0]) / (self.x.len() - 1) as f64
    }

    pub fn lo(&self) -> f64 {
        self.x[0]
    }

    pub fn hi(&self) -> f64 {
        self.x[self.x.len() - 1]
    }

    /// Same grid, new values and time. Values must be finite.
    pub fn with_values(&self, values: Vec<f64>, time: f64) -> Result<Self> {
        if values.len() != self.x.len() {
            return Err(Error::GridMismatch(format!(
                "{} nodes but {} values",
                self.x.len(),
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::IntegrityError(format!("non-finite value at node {i}")));
        }
        Ok(Self { x: self.x.clone(), values, time })
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn same_grid(&self, other: &Self) -> bool {
        self.x.len() == other.x.len()
            && self
                .x
                .iter()
                .zip(&other.x)
                .all(|(a, b)| (a - b).abs() <= UNIFORM_TOL * (self.hi() - self.lo()))
    }
}

fn trapezoid(x: &[f64], v: &[f64]) -> f64 {
    x.windows(2)
        .zip(v.windows(2))
        .map(|(xw, vw)| 0.5 * (xw[1] - xw[0]) * (vw[0] + vw[1]))
        .sum()
}

/// Trapezoid-rule mass `∫ C dx`.
pub fn total_mass(state: &ConcentrationField) -> f64 {
    trapezoid(&state.x, &state.values)
}

/// Norms of the difference of two fields.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErrorNorms {
    pub l2: f64,
    pub linf: f64,
    pub mass_drift: f64,
}

/// Compares two fields on a common grid.
///
/// With `mass_normalize`, each field is divided by its own trapezoid mass
/// before differencing (or by its L¹ norm when the mass is negligible, as for
/// sign-changing eigenmodes). `mass_drift` is the symmetric relative mass
/// difference of the fields as compared.
pub fn error_norms(a: &ConcentrationField, b: &ConcentrationField, mass_normalize: bool) -> Result<ErrorNorms> {
    error_norms_in_window(a, b, mass_normalize, None)
}

/// [`error_norms`] restricted to the nodes inside `window` (inclusive).
pub fn error_norms_in_window(
    a: &ConcentrationField,
    b: &ConcentrationField,
    mass_normalize: bool,
    window: Option<(f64, f64)>,
) -> Result<ErrorNorms> {
    if !a.same_grid(b) {
        return Err(Error::GridMismatch(format!(
            "cannot compare fields on [{}, {}]x{} and [{}, {}]x{}",
            a.lo(),
            a.hi(),
            a.len(),
            b.lo(),
            b.hi(),
            b.len()
        )));
    }
    let keep: Vec<usize> = match window {
        Some((lo, hi)) => (0..a.len()).filter(|&i| a.x[i] >= lo && a.x[i] <= hi).collect(),
        None => (0..a.len()).collect(),
    };
    if keep.len() < 2 {
        return Err(Error::GridTooSmall { needed: 2, got: keep.len() });
    }
    let x: Vec<f64> = keep.iter().map(|&i| a.x[i]).collect();
    let va: Vec<f64> = keep.iter().map(|&i| a.values[i]).collect();
    let vb: Vec<f64> = keep.iter().map(|&i| b.values[i]).collect();

    let scale = |v: &[f64]| -> f64 {
        if !mass_normalize {
            return 1.0;
        }
        let m = trapezoid(&x, v);
        let abs: Vec<f64> = v.iter().map(|t| t.abs()).collect();
        let l1 = trapezoid(&x, &abs);
        if l1 == 0.0 {
            1.0
        } else if m.abs() > 1e-8 * l1 {
            m
        } else {
            l1
        }
    };
    let (sa, sb) = (scale(&va), scale(&vb));
    let na: Vec<f64> = va.iter().map(|v| v / sa).collect();
    let nb: Vec<f64> = vb.iter().map(|v| v / sb).collect();
    let diff2: Vec<f64> = na.iter().zip(&nb).map(|(p, q)| (p - q) * (p - q)).collect();
    let l2 = trapezoid(&x, &diff2).sqrt();
    let linf = na.iter().zip(&nb).fold(0.0f64, |m, (p, q)| m.max((p - q).abs()));
    let (ma, mb) = (trapezoid(&x, &na), trapezoid(&x, &nb));
    let denom = 0.5 * (ma.abs() + mb.abs());
    let mass_drift = if denom == 0.0 { 0.0 } else { (ma - mb).abs() / denom };
    Ok(ErrorNorms { l2, linf, mass_drift })
}
