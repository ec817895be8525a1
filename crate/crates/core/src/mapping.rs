//! Change of variable to Schrödinger form.
//!
//! With `y = ∫_{x0}^{x} dz/√D(z)` the Fick-Jacobs generator becomes
//! `−H_f` with `H_f = e^{f} (P² + V) e^{−f}`, where
//!
//! * `∂f/∂y = −½ √D ∂/∂x ln(√D/A)` and
//! * `V = (∂f/∂y)² − ∂²f/∂y² + ∂/∂x (D ∂ ln A/∂x)`.
//!
//! `V` is stored in the unit-diffusion `y` convention. For constant `D = D0`
//! it equals `D0` times the entropic potential of [`crate::geometry`];
//! [`SchrodingerMap::potential_x_convention`] undoes that factor.

use std::cell::Cell;

use crate::error::{Error, Result};
use crate::field::{uniform_grid, ConcentrationField, UNIFORM_TOL};
use crate::geometry::{ChannelProfile, DiffusionModel};
use crate::quadrature;

/// Runs adaptive quadrature over an integrand that may fail; the first
/// integrand error wins over the quadrature's own diagnosis.
fn integrate_fallible(f: impl Fn(f64) -> Result<f64>, a: f64, b: f64) -> Result<f64> {
    let failure: Cell<Option<Error>> = Cell::new(None);
    let result = quadrature::integrate_default(
        |t| match f(t) {
            Ok(v) => v,
            Err(e) => {
                let prev = failure.take();
                failure.set(prev.or(Some(e)));
                f64::NAN
            }
        },
        a,
        b,
    );
    if let Some(e) = failure.take() {
        return Err(e);
    }
    result
}

fn inverse_sqrt_diffusion(model: &DiffusionModel, profile: &ChannelProfile, z: f64) -> Result<f64> {
    model.diffusion_coefficient(profile, z).map(|d| 1.0 / d.sqrt())
}

/// `y(x) = ∫_{x0}^{x} dz/√D(z)` by adaptive Gauss–Kronrod quadrature.
pub fn transform_coordinate(model: &DiffusionModel, profile: &ChannelProfile, x: f64, x0: f64) -> Result<f64> {
    profile.check(x)?;
    profile.check(x0)?;
    if let Some(d0) = model.constant_value() {
        return Ok((x - x0) / d0.sqrt());
    }
    integrate_fallible(|z| inverse_sqrt_diffusion(model, profile, z), x0, x)
}

/// Local drift data at `x`: `(∂f/∂y, ∂²f/∂y², V)` with `V` in the `y`
/// convention.
pub fn drift_and_potential(model: &DiffusionModel, profile: &ChannelProfile, x: f64) -> Result<(f64, f64, f64)> {
    let [_, l1, l2, _] = profile.log_area_derivs(x)?;
    let [d, d1, d2] = model.derivs(profile, x)?;
    // L = ln(√D / A)
    let lp = 0.5 * d1 / d - l1;
    let lpp = 0.5 * d2 / d - 0.5 * (d1 / d) * (d1 / d) - l2;
    let fy = -0.5 * d.sqrt() * lp;
    let fyy = -0.5 * (0.5 * d1 * lp + d * lpp);
    // ∂/∂x (D ∂ ln A / ∂x)
    let kappa = d1 * l1 + d * l2;
    Ok((fy, fyy, fy * fy - fyy + kappa))
}

/// Transformed potential `V` at the point `y(x)`, unit-diffusion convention.
pub fn transformed_potential(model: &DiffusionModel, profile: &ChannelProfile, x: f64) -> Result<f64> {
    drift_and_potential(model, profile, x).map(|(_, _, v)| v)
}

/// `f(x) = ∫_{y(x0)}^{y(x)} ∂f/∂y dy`, normalized so that `f(x0) = 0`.
pub fn drift_function(model: &DiffusionModel, profile: &ChannelProfile, x0: f64, x: f64) -> Result<f64> {
    profile.check(x)?;
    profile.check(x0)?;
    integrate_fallible(|z| drift_integrand(model, profile, z), x0, x)
}

fn drift_integrand(model: &DiffusionModel, profile: &ChannelProfile, z: f64) -> Result<f64> {
    let (fy, _, _) = drift_and_potential(model, profile, z)?;
    Ok(fy * inverse_sqrt_diffusion(model, profile, z)?)
}

/// The transformed problem sampled on a uniform `y` grid.
#[derive(Debug, Clone)]
pub struct SchrodingerMap {
    y: Vec<f64>,
    x: Vec<f64>,
    f: Vec<f64>,
    df: Vec<f64>,
    d2f: Vec<f64>,
    v: Vec<f64>,
    x0: f64,
    profile: ChannelProfile,
    model: DiffusionModel,
}

/// Builds the map on `n_points` uniform `y` nodes covering `[x_lo, x_hi]`.
pub fn build_schrodinger_map(
    model: &DiffusionModel,
    profile: &ChannelProfile,
    x0: f64,
    bounds: (f64, f64),
    n_points: usize,
) -> Result<SchrodingerMap> {
    let (x_lo, x_hi) = bounds;
    if n_points < 3 {
        return Err(Error::GridTooSmall { needed: 3, got: n_points });
    }
    if !(x_hi > x_lo) {
        return Err(Error::InvalidParameter(format!("empty truncation interval [{x_lo}, {x_hi}]")));
    }
    profile.check(x_lo)?;
    profile.check(x_hi)?;
    profile.check(x0)?;

    let (x, y) = if let Some(d0) = model.constant_value() {
        let x = uniform_grid(x_lo, x_hi, n_points);
        let y = x.iter().map(|xi| (xi - x0) / d0.sqrt()).collect();
        (x, y)
    } else {
        // Fine monotone table in x, then uniform y nodes by inversion.
        let xt = uniform_grid(x_lo, x_hi, n_points);
        let mut yt = Vec::with_capacity(n_points);
        yt.push(transform_coordinate(model, profile, x_lo, x0)?);
        for w in xt.windows(2) {
            let seg = integrate_fallible(|z| inverse_sqrt_diffusion(model, profile, z), w[0], w[1])?;
            yt.push(yt[yt.len() - 1] + seg);
        }
        let y = uniform_grid(yt[0], yt[n_points - 1], n_points);
        let x = y
            .iter()
            .enumerate()
            .map(|(j, &target)| match j {
                0 => Ok(x_lo),
                _ if j + 1 == n_points => Ok(x_hi),
                _ => invert_on_table(model, profile, &xt, &yt, target),
            })
            .collect::<Result<Vec<_>>>()?;
        (x, y)
    };

    let mut f = Vec::with_capacity(n_points);
    f.push(drift_function(model, profile, x0, x[0])?);
    for w in x.windows(2) {
        let seg = integrate_fallible(|z| drift_integrand(model, profile, z), w[0], w[1])?;
        f.push(f[f.len() - 1] + seg);
    }
    // Pin f(x0) = 0 exactly when x0 is a node.
    if let Some(k) = x.iter().position(|&xi| xi == x0) {
        let offset = f[k];
        f.iter_mut().for_each(|v| *v -= offset);
    }
    let mut df = Vec::with_capacity(n_points);
    let mut d2f = Vec::with_capacity(n_points);
    let mut v = Vec::with_capacity(n_points);
    for &xi in &x {
        let (a, b, c) = drift_and_potential(model, profile, xi)?;
        df.push(a);
        d2f.push(b);
        v.push(c);
    }
    Ok(SchrodingerMap {
        y,
        x,
        f,
        df,
        d2f,
        v,
        x0,
        profile: profile.clone(),
        model: model.clone(),
    })
}

/// Newton iteration safeguarded by bisection on the bracket containing
/// `target` in the monotone table `(xt, yt)`.
fn invert_on_table(
    model: &DiffusionModel,
    profile: &ChannelProfile,
    xt: &[f64],
    yt: &[f64],
    target: f64,
) -> Result<f64> {
    let n = yt.len();
    if target < yt[0] || target > yt[n - 1] {
        return Err(Error::OutOfRange { y: target, lo: yt[0], hi: yt[n - 1] });
    }
    let k = match yt.partition_point(|&v| v <= target) {
        0 => 0,
        k if k >= n => n - 2,
        k => k - 1,
    };
    if yt[k] == target {
        return Ok(xt[k]);
    }
    let (mut lo, mut hi) = (xt[k], xt[k + 1]);
    let (base_x, base_y) = (xt[k], yt[k]);
    let mut x = lo + (hi - lo) * (target - yt[k]) / (yt[k + 1] - yt[k]);
    for _ in 0..100 {
        let g = base_y + integrate_fallible(|z| inverse_sqrt_diffusion(model, profile, z), base_x, x)? - target;
        if g.abs() <= 1e-13 * target.abs().max(1.0) {
            return Ok(x);
        }
        if g > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let slope = inverse_sqrt_diffusion(model, profile, x)?;
        let mut next = x - g / slope;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= 4.0 * f64::EPSILON * x.abs().max(1.0) {
            return Ok(next);
        }
        x = next;
    }
    Ok(x)
}

impl SchrodingerMap {
    pub fn y_grid(&self) -> &[f64] {
        &self.y
    }

    pub fn x_of_y(&self) -> &[f64] {
        &self.x
    }

    /// Drift function `f` on the grid, `f(x0) = 0`.
    pub fn f(&self) -> &[f64] {
        &self.f
    }

    /// `∂f/∂y` on the grid.
    pub fn df(&self) -> &[f64] {
        &self.df
    }

    /// `∂²f/∂y²` on the grid.
    pub fn d2f(&self) -> &[f64] {
        &self.d2f
    }

    /// Potential in the unit-diffusion `y` convention.
    pub fn potential(&self) -> &[f64] {
        &self.v
    }

    pub fn x0(&self) -> f64 {
        self.x0
    }

    pub fn profile(&self) -> &ChannelProfile {
        &self.profile
    }

    pub fn model(&self) -> &DiffusionModel {
        &self.model
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn dy(&self) -> f64 {
        (self.y[self.y.len() - 1] - self.y[0]) / (self.y.len() - 1) as f64
    }

    pub fn x_bounds(&self) -> (f64, f64) {
        (self.x[0], self.x[self.x.len() - 1])
    }

    /// `V / D0`, the potential in the `x` convention of `H = D0 (P² + V)`.
    /// Only defined for constant diffusion.
    pub fn potential_x_convention(&self) -> Option<Vec<f64>> {
        self.model
            .constant_value()
            .map(|d0| self.v.iter().map(|v| v / d0).collect())
    }

    /// True when the `x` nodes are uniform (always for constant `D`).
    pub fn x_is_uniform(&self) -> bool {
        let n = self.x.len();
        let span = self.x[n - 1] - self.x[0];
        let h = span / (n - 1) as f64;
        self.x
            .iter()
            .enumerate()
            .all(|(i, xi)| (xi - (self.x[0] + i as f64 * h)).abs() <= UNIFORM_TOL * span)
    }

    /// `y(x)` measured from the first table node.
    pub fn forward(&self, x: f64) -> Result<f64> {
        let (lo, hi) = self.x_bounds();
        if x < lo || x > hi {
            return Err(Error::OutOfDomain { x, lo, hi });
        }
        if let Some(d0) = self.model.constant_value() {
            return Ok((x - self.x0) / d0.sqrt());
        }
        let k = self.x.partition_point(|&v| v <= x).saturating_sub(1).min(self.x.len() - 2);
        Ok(self.y[k]
            + integrate_fallible(|z| inverse_sqrt_diffusion(&self.model, &self.profile, z), self.x[k], x)?)
    }

    /// `x(y)` by bracketed root finding on the cached table.
    pub fn invert(&self, y: f64) -> Result<f64> {
        let n = self.y.len();
        if y < self.y[0] || y > self.y[n - 1] {
            return Err(Error::OutOfRange { y, lo: self.y[0], hi: self.y[n - 1] });
        }
        if let Some(d0) = self.model.constant_value() {
            return Ok(self.x0 + y * d0.sqrt());
        }
        invert_on_table(&self.model, &self.profile, &self.x, &self.y, y)
    }
}

/// Free-function form of [`SchrodingerMap::invert`].
pub fn invert_coordinate(map: &SchrodingerMap, y: f64) -> Result<f64> {
    map.invert(y)
}

fn second_difference(u: &[f64], i: usize, h: f64) -> f64 {
    (u[i + 1] - 2.0 * u[i] + u[i - 1]) / (h * h)
}

/// `H_f u = −u″ + 2 f′ u′ + (f″ − f′² + V) u` by central differences, at the
/// interior nodes of the map's grid.
pub fn apply_drift_hamiltonian(map: &SchrodingerMap, u: &[f64]) -> Result<Vec<f64>> {
    if u.len() != map.len() {
        return Err(Error::GridMismatch(format!("{} samples for a {}-node map", u.len(), map.len())));
    }
    let h = map.dy();
    Ok((1..u.len() - 1)
        .map(|i| {
            let (fp, fpp, v) = (map.df[i], map.d2f[i], map.v[i]);
            -second_difference(u, i, h) + 2.0 * fp * (u[i + 1] - u[i - 1]) / (2.0 * h) + (fpp - fp * fp + v) * u[i]
        })
        .collect())
}

/// `e^{f} (P² + V)(e^{−f} u)` by central differences, at the interior nodes.
pub fn apply_conjugated_hamiltonian(map: &SchrodingerMap, u: &[f64]) -> Result<Vec<f64>> {
    if u.len() != map.len() {
        return Err(Error::GridMismatch(format!("{} samples for a {}-node map", u.len(), map.len())));
    }
    let h = map.dy();
    let w: Vec<f64> = u.iter().zip(&map.f).map(|(ui, fi)| ui * (-fi).exp()).collect();
    Ok((1..u.len() - 1)
        .map(|i| map.f[i].exp() * (-second_difference(&w, i, h) + map.v[i] * w[i]))
        .collect())
}

/// Partner potentials `W² ± W′` from a superpotential `W`.
#[derive(Debug, Clone, PartialEq)]
pub struct SusyPair {
    pub x: Vec<f64>,
    /// `W² + W′`, the potential of `α² P_f† P_f`.
    pub v_plus: Vec<f64>,
    /// `W² − W′`, the potential of `α² P_f P_f†`.
    pub v_minus: Vec<f64>,
    pub alpha2: f64,
}

/// Builds both partner potentials from `W` sampled on a uniform grid.
/// `W′` uses central differences inside and second-order one-sided stencils
/// at the ends.
pub fn susy_partner_potentials(x: &[f64], w: &[f64], alpha2: f64) -> Result<SusyPair> {
    let n = w.len();
    if n < 3 {
        return Err(Error::GridTooSmall { needed: 3, got: n });
    }
    if x.len() != n {
        return Err(Error::GridMismatch(format!("{} abscissae for {} superpotential samples", x.len(), n)));
    }
    if !(alpha2 > 0.0) {
        return Err(Error::InvalidParameter(format!("alpha² must be positive, got {alpha2}")));
    }
    // validates uniformity
    ConcentrationField::new(x.to_vec(), w.to_vec(), 0.0)?;
    let h = (x[n - 1] - x[0]) / (n - 1) as f64;
    let dw: Vec<f64> = (0..n)
        .map(|i| match i {
            0 => (-3.0 * w[0] + 4.0 * w[1] - w[2]) / (2.0 * h),
            _ if i == n - 1 => (3.0 * w[n - 1] - 4.0 * w[n - 2] + w[n - 3]) / (2.0 * h),
            _ => (w[i + 1] - w[i - 1]) / (2.0 * h),
        })
        .collect();
    let v_plus = w.iter().zip(&dw).map(|(a, b)| a * a + b).collect();
    let v_minus = w.iter().zip(&dw).map(|(a, b)| a * a - b).collect();
    Ok(SusyPair { x: x.to_vec(), v_plus, v_minus, alpha2 })
}

/// Flux-form generator `∂/∂x [D A ∂/∂x (C/A)]` at the interior nodes of
/// `c`'s grid, with `D` and `A` evaluated at the cell midpoints.
pub fn apply_fj_generator(
    model: &DiffusionModel,
    profile: &ChannelProfile,
    c: &ConcentrationField,
) -> Result<ConcentrationField> {
    let x = c.x();
    let n = x.len();
    if n < 3 {
        return Err(Error::GridTooSmall { needed: 3, got: n });
    }
    let h = c.dx();
    let u = x
        .iter()
        .zip(c.values())
        .map(|(&xi, ci)| profile.area(xi).map(|a| ci / a))
        .collect::<Result<Vec<_>>>()?;
    let flux = (0..n - 1)
        .map(|i| {
            let xm = 0.5 * (x[i] + x[i + 1]);
            let a = profile.area(xm)?;
            let d = model.diffusion_coefficient(profile, xm)?;
            Ok(-d * a * (u[i + 1] - u[i]) / h)
        })
        .collect::<Result<Vec<_>>>()?;
    let values = (1..n - 1).map(|i| (flux[i - 1] - flux[i]) / h).collect();
    ConcentrationField::new(x[1..n - 1].to_vec(), values, c.time())
}
