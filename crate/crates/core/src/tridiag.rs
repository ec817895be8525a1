//! Tridiagonal linear solves and the lowest eigenpairs of symmetric
//! tridiagonal matrices.

use crate::error::{Error, Result};

/// General tridiagonal matrix stored by diagonals.
#[derive(Debug, Clone, PartialEq)]
pub struct Tridiagonal {
    /// Sub-diagonal, `lower[i]` multiplies `x[i]` in row `i + 1`.
    pub lower: Vec<f64>,
    pub diag: Vec<f64>,
    /// Super-diagonal, `upper[i]` multiplies `x[i + 1]` in row `i`.
    pub upper: Vec<f64>,
}

impl Tridiagonal {
    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.diag.len();
        (0..n)
            .map(|i| {
                let mut v = self.diag[i] * x[i];
                if i > 0 {
                    v += self.lower[i - 1] * x[i - 1];
                }
                if i + 1 < n {
                    v += self.upper[i] * x[i + 1];
                }
                v
            })
            .collect()
    }

    /// Thomas factorization without pivoting; for the diagonally dominant
    /// systems produced by implicit diffusion steps.
    pub fn factor(&self, pivot_tol: f64) -> Result<ThomasFactor> {
        let n = self.diag.len();
        if n == 0 {
            return Err(Error::GridTooSmall { needed: 1, got: 0 });
        }
        let scale = self.diag.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut pivots = vec![0.0; n];
        let mut multipliers = vec![0.0; n.saturating_sub(1)];
        pivots[0] = self.diag[0];
        for i in 1..n {
            if pivots[i - 1].abs() <= pivot_tol * scale {
                return Err(Error::SingularSystem(format!("vanishing pivot in row {}", i - 1)));
            }
            let m = self.lower[i - 1] / pivots[i - 1];
            multipliers[i - 1] = m;
            pivots[i] = self.diag[i] - m * self.upper[i - 1];
        }
        if pivots[n - 1].abs() <= pivot_tol * scale {
            return Err(Error::SingularSystem(format!("vanishing pivot in row {}", n - 1)));
        }
        Ok(ThomasFactor { upper: self.upper.clone(), pivots, multipliers })
    }
}

#[derive(Debug, Clone)]
pub struct ThomasFactor {
    upper: Vec<f64>,
    pivots: Vec<f64>,
    multipliers: Vec<f64>,
}

impl ThomasFactor {
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let n = self.pivots.len();
        let mut y = rhs.to_vec();
        for i in 1..n {
            y[i] -= self.multipliers[i - 1] * y[i - 1];
        }
        y[n - 1] /= self.pivots[n - 1];
        for i in (0..n - 1).rev() {
            y[i] = (y[i] - self.upper[i] * y[i + 1]) / self.pivots[i];
        }
        y
    }
}

/// Number of eigenvalues of the symmetric tridiagonal `(diag, off)` that are
/// strictly less than `shift` (Sturm sequence count).
fn sturm_count(diag: &[f64], off_sq: &[f64], shift: f64, tiny: f64) -> usize {
    let mut count = 0;
    let mut q = diag[0] - shift;
    for i in 0..diag.len() {
        if i > 0 {
            q = diag[i] - shift - off_sq[i - 1] / q;
        }
        if q.abs() < tiny {
            q = -tiny;
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// Solves `(T - shift) x = b` by LU with partial pivoting. Exactly singular
/// pivots are nudged to `tiny`, which is what inverse iteration wants.
fn shifted_solve(diag: &[f64], off: &[f64], shift: f64, tiny: f64, b: &mut [f64]) {
    let n = diag.len();
    if n == 1 {
        let p = diag[0] - shift;
        b[0] /= if p.abs() < tiny { tiny } else { p };
        return;
    }
    let mut dl = off.to_vec();
    let mut dd: Vec<f64> = diag.iter().map(|d| d - shift).collect();
    let mut du = off.to_vec();
    let mut du2 = vec![0.0; n.saturating_sub(2)];
    let mut swapped = vec![false; n - 1];
    for i in 0..n - 1 {
        if dd[i].abs() >= dl[i].abs() {
            if dd[i].abs() < tiny {
                dd[i] = tiny;
            }
            let fact = dl[i] / dd[i];
            dl[i] = fact;
            dd[i + 1] -= fact * du[i];
        } else {
            let fact = dd[i] / dl[i];
            dd[i] = dl[i];
            dl[i] = fact;
            let temp = du[i];
            du[i] = dd[i + 1];
            dd[i + 1] = temp - fact * dd[i + 1];
            if i + 2 < n {
                du2[i] = du[i + 1];
                du[i + 1] *= -fact;
            }
            swapped[i] = true;
        }
    }
    if dd[n - 1].abs() < tiny {
        dd[n - 1] = tiny;
    }
    for i in 0..n - 1 {
        if swapped[i] {
            let temp = b[i];
            b[i] = b[i + 1];
            b[i + 1] = temp - dl[i] * b[i];
        } else {
            b[i + 1] -= dl[i] * b[i];
        }
    }
    b[n - 1] /= dd[n - 1];
    b[n - 2] = (b[n - 2] - du[n - 2] * b[n - 1]) / dd[n - 2];
    for i in (0..n.saturating_sub(2)).rev() {
        b[i] = (b[i] - du[i] * b[i + 1] - du2[i] * b[i + 2]) / dd[i];
    }
}

/// Lowest eigenpairs of a symmetric tridiagonal matrix.
#[derive(Debug, Clone)]
pub struct Eigenpairs {
    /// Ascending eigenvalues.
    pub values: Vec<f64>,
    /// Unit-norm eigenvectors, one per eigenvalue.
    pub vectors: Vec<Vec<f64>>,
}

/// Computes the `count` smallest eigenpairs of the symmetric tridiagonal
/// matrix with diagonal `diag` and off-diagonal `off`.
///
/// Eigenvalues come from Sturm-sequence bisection, eigenvectors from inverse
/// iteration with re-orthogonalization against the previously accepted
/// vectors. Each vector's sign is fixed so its first significant entry is
/// positive. Fully deterministic.
pub fn lowest_eigenpairs(diag: &[f64], off: &[f64], count: usize) -> Result<Eigenpairs> {
    let n = diag.len();
    if n == 0 || off.len() + 1 != n {
        return Err(Error::InvalidParameter(format!(
            "tridiagonal with {} diagonal and {} off-diagonal entries",
            n,
            off.len()
        )));
    }
    if count > n {
        return Err(Error::InvalidParameter(format!("requested {count} eigenpairs of a {n}x{n} matrix")));
    }
    let off_sq: Vec<f64> = off.iter().map(|e| e * e).collect();
    let (mut gl, mut gu) = (f64::INFINITY, f64::NEG_INFINITY);
    for i in 0..n {
        let r = if i > 0 { off[i - 1].abs() } else { 0.0 } + if i + 1 < n { off[i].abs() } else { 0.0 };
        gl = gl.min(diag[i] - r);
        gu = gu.max(diag[i] + r);
    }
    let norm = gl.abs().max(gu.abs()).max(f64::MIN_POSITIVE);
    let tiny = f64::EPSILON * norm * 1e-3;
    gl -= 2.0 * f64::EPSILON * norm;
    gu += 2.0 * f64::EPSILON * norm;

    let mut values = Vec::with_capacity(count);
    let mut lower_bound = gl;
    for k in 0..count {
        let (mut lo, mut hi) = (lower_bound, gu);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if hi - lo <= 4.0 * f64::EPSILON * (lo.abs().max(hi.abs())) + tiny || mid <= lo || mid >= hi {
                break;
            }
            if sturm_count(diag, &off_sq, mid, tiny) > k {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let value = 0.5 * (lo + hi);
        values.push(value);
        lower_bound = lo;
    }

    let mut vectors: Vec<Vec<f64>> = Vec::with_capacity(count);
    for (k, &lambda) in values.iter().enumerate() {
        let mut v: Vec<f64> = (0..n).map(|i| (0.713 * i as f64 + 0.3 + k as f64).sin() + 0.5).collect();
        normalize(&mut v);
        let mut converged = false;
        for _ in 0..8 {
            shifted_solve(diag, off, lambda, tiny, &mut v);
            for prev in &vectors {
                let c = dot(&v, prev);
                for (vi, pi) in v.iter_mut().zip(prev) {
                    *vi -= c * pi;
                }
            }
            if !normalize(&mut v) {
                break;
            }
            let tv = apply_sym(diag, off, &v);
            let resid = tv
                .iter()
                .zip(&v)
                .fold(0.0f64, |m, (a, b)| m.max((a - lambda * b).abs()));
            if resid <= 1e-10 * norm.max(1.0) {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::ConvergenceFailure(format!(
                "inverse iteration for eigenvalue {k} ({lambda}) did not converge"
            )));
        }
        let vmax = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if let Some(first) = v.iter().find(|x| x.abs() > 1e-3 * vmax) {
            if *first < 0.0 {
                v.iter_mut().for_each(|x| *x = -*x);
            }
        }
        vectors.push(v);
    }
    Ok(Eigenpairs { values, vectors })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(v: &mut [f64]) -> bool {
    let s = dot(v, v).sqrt();
    if !(s > 0.0) || !s.is_finite() {
        return false;
    }
    v.iter_mut().for_each(|x| *x /= s);
    true
}

fn apply_sym(diag: &[f64], off: &[f64], v: &[f64]) -> Vec<f64> {
    let n = diag.len();
    (0..n)
        .map(|i| {
            let mut s = diag[i] * v[i];
            if i > 0 {
                s += off[i - 1] * v[i - 1];
            }
            if i + 1 < n {
                s += off[i] * v[i + 1];
            }
            s
        })
        .collect()
}
