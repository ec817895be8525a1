//! Closed-form solutions for constant diffusion.
//!
//! With `D = D0` the concentration is `C = √A e^{−Ht} (C0/√A)`, where
//! `H = D0 (P² + V)`. Conical, throat and sinusoidal channels have constant
//! `V`, so a Gaussian initial condition just spreads; the Gaussian-area
//! channel gives a shifted harmonic oscillator.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::field::{uniform_grid, ConcentrationField};
use crate::geometry::{ChannelProfile, DiffusionModel, Family};
use crate::mapping;

/// Which normalization the closed forms carry.
///
/// The printed evolved formulas put `(σ²/2π)^{1/4} (σ² + D0 t)^{−1/2}` in
/// front of the Gaussian, while the printed initial conditions use
/// `(2πσ²)^{−1/2}`; at `t = 0` the two differ by `(2πσ²)^{1/4}`. For the
/// oscillator modes the initial condition carries an extra `(a/π)^{1/4}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Prefactor {
    /// Evolved formulas exactly as printed.
    #[default]
    Evolved,
    /// Rescaled so that `C(x, 0)` equals the printed initial condition.
    Initial,
}

/// Gaussian initial condition of width `sigma` centred at `a0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianInit {
    pub sigma: f64,
    pub a0: f64,
    pub prefactor: Prefactor,
}

impl GaussianInit {
    pub fn new(sigma: f64, a0: f64, prefactor: Prefactor) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) || !a0.is_finite() {
            return Err(Error::InvalidParameter(format!("Gaussian init needs sigma > 0, got sigma = {sigma}, a0 = {a0}")));
        }
        Ok(Self { sigma, a0, prefactor })
    }

    /// Spreading Gaussian `G(x, t)` that multiplies every free-kernel
    /// solution. Its variance parameter is `σ² + D0 t`.
    pub fn spread(&self, d0: f64, x: f64, t: f64) -> f64 {
        let s2 = self.sigma * self.sigma;
        let dx = x - self.a0;
        if t == 0.0 {
            let g = (-dx * dx / (4.0 * s2)).exp();
            return match self.prefactor {
                Prefactor::Evolved => (s2 / (2.0 * PI)).powf(0.25) / self.sigma * g,
                Prefactor::Initial => g / (2.0 * PI * s2).sqrt(),
            };
        }
        let s = s2 + t * d0;
        let front = match self.prefactor {
            Prefactor::Evolved => (s2 / (2.0 * PI)).powf(0.25),
            Prefactor::Initial => self.sigma / (2.0 * PI * s2).sqrt(),
        };
        front / s.sqrt() * (-dx * dx / (4.0 * s)).exp()
    }

    /// Variance parameter `σ² + D0 t` of the spread factor.
    pub fn variance_parameter(&self, d0: f64, t: f64) -> f64 {
        self.sigma * self.sigma + t * d0
    }
}

/// Oscillator level `n` of the Gaussian-area channel with curvature `a`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenmodeInit {
    pub n: usize,
    pub a: f64,
    pub prefactor: Prefactor,
}

impl EigenmodeInit {
    pub fn new(n: usize, a: f64, prefactor: Prefactor) -> Result<Self> {
        if !(a > 0.0) {
            return Err(Error::NegativeCurvature(a));
        }
        Ok(Self { n, a, prefactor })
    }

    /// `E_n = 2 D0 a (n + ½)`, the level of `h = D0 (P² + a² ζ²)`.
    pub fn energy(&self, d0: f64) -> f64 {
        2.0 * d0 * self.a * (self.n as f64 + 0.5)
    }

    /// Total decay rate `D0 a + E_n = 2 D0 a (n + 1)`.
    pub fn decay_rate(&self, d0: f64) -> f64 {
        d0 * self.a + self.energy(d0)
    }
}

fn check_time(t: f64) -> Result<()> {
    if t >= 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::NonPositiveTime(t))
    }
}

/// Free propagator `(4π D0 t)^{−1/2} exp(−(x − xp)² / (4 D0 t))`.
pub fn heat_kernel(d0: f64, t: f64, x: f64, xp: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::NonPositiveTime(t));
    }
    let dx = x - xp;
    Ok((-dx * dx / (4.0 * d0 * t)).exp() / (4.0 * PI * d0 * t).sqrt())
}

/// Cone `A = π(1 + λx)²`: `C = (1 + λx) G(x, t)`.
pub fn conical_solution(lambda: f64, d0: f64, init: &GaussianInit, x: f64, t: f64) -> Result<f64> {
    check_time(t)?;
    let r = 1.0 + lambda * x;
    if !(r > 0.0) {
        let edge = -1.0 / lambda;
        let (lo, hi) = if lambda > 0.0 { (edge, f64::INFINITY) } else { (f64::NEG_INFINITY, edge) };
        return Err(Error::OutOfDomain { x, lo, hi });
    }
    Ok(r * init.spread(d0, x, t))
}

/// Throat `A = e^{αx + β}`: `C = e^{−D0 α² t/4} e^{αx/2} G(x, t)`.
pub fn throat_solution(alpha: f64, _beta: f64, d0: f64, init: &GaussianInit, x: f64, t: f64) -> Result<f64> {
    check_time(t)?;
    let shape = (0.5 * alpha * x).exp() * init.spread(d0, x, t);
    if t == 0.0 {
        return Ok(shape);
    }
    Ok((-d0 * alpha * alpha * t / 4.0).exp() * shape)
}

/// Sinusoidal `A = B sin²(γx)`: `C = e^{D0 γ² t} sin(γx) G(x, t)`.
pub fn sinusoidal_solution(_amplitude: f64, gamma: f64, d0: f64, init: &GaussianInit, x: f64, t: f64) -> Result<f64> {
    check_time(t)?;
    let shape = (gamma * x).sin() * init.spread(d0, x, t);
    if t == 0.0 {
        return Ok(shape);
    }
    Ok((d0 * gamma * gamma * t).exp() * shape)
}

/// Normalized Hermite polynomials `H_k(ξ)/√(2^k k!)` for `k ≤ n`, by the
/// three-term recurrence. Multiplying by `π^{−1/4} e^{−ξ²/2}` gives the
/// orthonormal Hermite functions.
fn normalized_hermite(n: usize, xi: f64) -> f64 {
    let mut prev = 0.0;
    let mut cur = 1.0;
    for k in 0..n {
        let kf = k as f64;
        let next = (2.0 / (kf + 1.0)).sqrt() * xi * cur - (kf / (kf + 1.0)).sqrt() * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// Orthonormal Hermite function `ψ_n(ξ)` of `P² + ξ²`.
pub fn hermite_function(n: usize, xi: f64) -> f64 {
    // Recurrence on the functions rather than the polynomials keeps large
    // arguments from overflowing.
    let mut prev = 0.0;
    let mut cur = PI.powf(-0.25) * (-0.5 * xi * xi).exp();
    for k in 0..n {
        let kf = k as f64;
        let next = (2.0 / (kf + 1.0)).sqrt() * xi * cur - (kf / (kf + 1.0)).sqrt() * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// Eigenfunction `ψ_n(ζ)` of `P² + a² ζ²`, normalized in `ζ`.
pub fn oscillator_eigenfunction(n: usize, a: f64, zeta: f64) -> f64 {
    a.powf(0.25) * hermite_function(n, a.sqrt() * zeta)
}

/// Shift that completes the square in `V = a + ¼(2ax + b)²`.
pub fn gaussian_channel_zeta(a: f64, b: f64, x: f64) -> f64 {
    x + b / (2.0 * a)
}

/// Gaussian-area channel started in oscillator level `n`:
/// `C = e^{−D0 a t} e^{aζ²/2} e^{−E_n t} ψ_n(ζ)` with `ζ = x + b/(2a)`.
pub fn gaussian_channel_solution(b: f64, d0: f64, init: &EigenmodeInit, x: f64, t: f64) -> Result<f64> {
    check_time(t)?;
    let a = init.a;
    if !(a > 0.0) {
        return Err(Error::NegativeCurvature(a));
    }
    let zeta = gaussian_channel_zeta(a, b, x);
    // e^{aζ²/2} ψ_n(ζ) is a polynomial; evaluate it without the exponentials.
    let xi = a.sqrt() * zeta;
    let mut shape = (a / PI).powf(0.25) * normalized_hermite(init.n, xi);
    if init.prefactor == Prefactor::Initial {
        shape *= (a / PI).powf(0.25);
    }
    if t == 0.0 {
        return Ok(shape);
    }
    Ok((-init.decay_rate(d0) * t).exp() * shape)
}

/// Initial data accepted by [`closed_form`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ClosedFormInit {
    Gaussian(GaussianInit),
    Eigenmode(EigenmodeInit),
}

/// Dispatches to the closed form matching `profile`. Requires constant
/// diffusion; Gaussian data go with cone, throat and sinusoidal channels,
/// oscillator levels with the Gaussian-area channel.
pub fn closed_form(
    profile: &ChannelProfile,
    model: &DiffusionModel,
    init: &ClosedFormInit,
    x: f64,
    t: f64,
) -> Result<f64> {
    let d0 = model
        .constant_value()
        .ok_or_else(|| Error::InvalidParameter("closed forms need constant diffusion".into()))?;
    let dom = profile.domain();
    if !(dom.contains(x) || dom.is_open_endpoint(x)) {
        return Err(Error::OutOfDomain { x, lo: dom.lo, hi: dom.hi });
    }
    match (profile.family(), init) {
        (Family::Conical { slope }, ClosedFormInit::Gaussian(g)) => conical_solution(*slope, d0, g, x, t),
        (Family::Throat { alpha, beta }, ClosedFormInit::Gaussian(g)) => throat_solution(*alpha, *beta, d0, g, x, t),
        (Family::Sinusoidal { amplitude, wavenumber, .. }, ClosedFormInit::Gaussian(g)) => {
            sinusoidal_solution(*amplitude, *wavenumber, d0, g, x, t)
        }
        (Family::GaussianArea { a, b, .. }, ClosedFormInit::Eigenmode(m)) => {
            if (a - m.a).abs() > 1e-14 * a.abs() {
                return Err(Error::InvalidParameter(format!(
                    "eigenmode curvature {} does not match the channel's a = {a}",
                    m.a
                )));
            }
            gaussian_channel_solution(*b, d0, m, x, t)
        }
        (family, _) => Err(Error::InvalidParameter(format!(
            "no closed form for a {} channel with this initial condition",
            match family {
                Family::Conical { .. } => "conical",
                Family::Throat { .. } => "throat",
                Family::Sinusoidal { .. } => "sinusoidal",
                Family::GaussianArea { .. } => "Gaussian-area",
                Family::Tabulated(_) => "tabulated",
            }
        ))),
    }
}

/// `e^{f}` sampled on a uniform grid, with `f(x0) = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct StationaryProfile {
    pub field: ConcentrationField,
    /// True only when `|V| < 1e-10` at every node: `e^{f}` is stationary
    /// exactly when `H` annihilates constants.
    pub stationary: bool,
}

pub fn stationary_profile(
    profile: &ChannelProfile,
    model: &DiffusionModel,
    x0: f64,
    bounds: (f64, f64),
    n_points: usize,
) -> Result<StationaryProfile> {
    if n_points < 2 {
        return Err(Error::GridTooSmall { needed: 2, got: n_points });
    }
    let x = uniform_grid(bounds.0, bounds.1, n_points);
    let mut f = Vec::with_capacity(n_points);
    f.push(mapping::drift_function(model, profile, x0, x[0])?);
    for w in x.windows(2) {
        f.push(f[f.len() - 1] + mapping::drift_function(model, profile, w[0], w[1])?);
    }
    let mut stationary = true;
    for &xi in &x {
        if mapping::transformed_potential(model, profile, xi)?.abs() >= 1e-10 {
            stationary = false;
        }
    }
    let values = f.iter().map(|v| v.exp()).collect();
    Ok(StationaryProfile { field: ConcentrationField::new(x, values, 0.0)?, stationary })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mapping::apply_fj_generator;
    use crate::quadrature::integrate_default;

    fn gi(sigma: f64, a0: f64) -> GaussianInit {
        GaussianInit::new(sigma, a0, Prefactor::Evolved).unwrap()
    }

    #[test]
    fn heat_kernel_basics() {
        let v = heat_kernel(1.0, 0.25, 0.7, 0.7).unwrap();
        assert!((v - 1.0 / PI.sqrt()).abs() < 1e-15);
        let m = integrate_default(|xp| heat_kernel(0.8, 0.3, 0.2, xp).unwrap(), -20.0, 20.0).unwrap();
        assert!((m - 1.0).abs() < 1e-10);
        assert!(matches!(heat_kernel(1.0, 0.0, 0.0, 0.0), Err(Error::NonPositiveTime(_))));
    }

    #[test]
    fn heat_kernel_spreads_gaussian_width() {
        // exp(−x²/4σ²) convolved with the kernel is ∝ exp(−x²/4(σ² + D0 t)).
        let (sigma, d0, t) = (0.7, 1.3, 0.4);
        let conv = |x: f64| {
            integrate_default(|xp| heat_kernel(d0, t, x, xp).unwrap() * (-xp * xp / (4.0 * sigma * sigma)).exp(), -30.0, 30.0)
                .unwrap()
        };
        let s = sigma * sigma + d0 * t;
        for x in [0.0, 0.5, 1.5] {
            let expect = sigma / s.sqrt() * (-x * x / (4.0 * s)).exp();
            assert!((conv(x) - expect).abs() < 1e-10);
        }
    }

    #[test]
    fn conical_reference_value() {
        let v = conical_solution(1.0, 1.0, &gi(1.0, 3.0), 3.0, 1.0).unwrap();
        let expect = 4.0 * (1.0 / (2.0 * PI)).powf(0.25) / 2f64.sqrt();
        assert!((v - expect).abs() < 1e-15);
        assert!(matches!(conical_solution(1.0, 1.0, &gi(1.0, 3.0), -2.0, 1.0), Err(Error::OutOfDomain { .. })));
    }

    #[test]
    fn conical_without_slope_is_pure_spreading() {
        let g = gi(0.8, 0.5);
        for &(x, t) in &[(0.1, 0.3), (2.0, 1.7)] {
            assert_eq!(conical_solution(0.0, 1.5, &g, x, t).unwrap(), g.spread(1.5, x, t));
            assert_eq!(throat_solution(0.0, 0.0, 1.5, &g, x, t).unwrap(), g.spread(1.5, x, t));
        }
    }

    #[test]
    fn prefactor_conventions_differ_by_constant() {
        let (sigma, a0) = (0.6, 1.0);
        let e = GaussianInit::new(sigma, a0, Prefactor::Evolved).unwrap();
        let i = GaussianInit::new(sigma, a0, Prefactor::Initial).unwrap();
        let printed = |x: f64| (1.0 + 0.5 * x) * ((-(x - a0) * (x - a0) / (4.0 * (sigma * sigma))).exp() / (2.0 * PI * (sigma * sigma)).sqrt());
        let ratio = (2.0 * PI * sigma * sigma).powf(0.25);
        for x in [0.0, 1.0, 2.5] {
            assert_eq!(conical_solution(0.5, 1.0, &i, x, 0.0).unwrap(), printed(x));
            let ev = conical_solution(0.5, 1.0, &e, x, 0.0).unwrap();
            assert!((ev / printed(x) - ratio).abs() < 1e-14);
            for t in [0.2, 1.0] {
                let r = conical_solution(0.5, 1.0, &e, x, t).unwrap() / conical_solution(0.5, 1.0, &i, x, t).unwrap();
                assert!((r - ratio).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn t_zero_reproduces_initial_condition_bitwise() {
        let (sigma, a0) = (0.9f64, 1.2f64);
        let s2 = sigma * sigma;
        let g = GaussianInit::new(sigma, a0, Prefactor::Initial).unwrap();
        for x in [0.3f64, 1.0, 2.0] {
            let gauss = (-(x - a0) * (x - a0) / (4.0 * s2)).exp() / (2.0 * PI * s2).sqrt();
            let c0 = (1.0 + 2.0 * x) * gauss;
            assert_eq!(conical_solution(2.0, 1.0, &g, x, 0.0).unwrap().to_bits(), c0.to_bits());
            let s0 = x.sin() * gauss;
            assert_eq!(sinusoidal_solution(1.0, 1.0, 1.0, &g, x, 0.0).unwrap().to_bits(), s0.to_bits());
        }
        let m = EigenmodeInit::new(2, 0.7, Prefactor::Initial).unwrap();
        for x in [-1.0f64, 0.4] {
            let zeta: f64 = x + 0.3 / 1.4;
            let expect = (0.5 * 0.7 * zeta * zeta).exp() * (0.7 / PI).powf(0.25) * oscillator_eigenfunction(2, 0.7, zeta);
            let got = gaussian_channel_solution(0.3, 1.0, &m, x, 0.0).unwrap();
            assert!((got - expect).abs() < 1e-14 * expect.abs().max(1.0));
        }
    }

    #[test]
    fn throat_global_decay() {
        let g = gi(1.0, 0.0);
        for x in [-1.0, 0.0, 2.0] {
            let t = 0.8;
            let with = throat_solution(2.0, 0.0, 1.0, &g, x, t).unwrap();
            let shape = (x).exp() * g.spread(1.0, x, t);
            assert!((with / shape - (-t).exp()).abs() < 1e-14);
        }
    }

    #[test]
    fn sinusoidal_vanishes_at_cell_walls() {
        let g = gi(1.0, PI / 2.0);
        for t in [0.0, 0.5, 2.0] {
            for wall in [0.0, PI] {
                assert!(sinusoidal_solution(1.0, 1.0, 1.0, &g, wall, t).unwrap().abs() < 1e-15);
            }
        }
        let v = sinusoidal_solution(1.0, 1.0, 1.0, &g, PI / 2.0, 0.5).unwrap();
        let expect = 0.5f64.exp() * (1.0 / (2.0 * PI)).powf(0.25) / 1.5f64.sqrt();
        assert!((v - expect).abs() < 1e-15);
    }

    #[test]
    fn hermite_functions_are_orthonormal() {
        let a: f64 = 0.5;
        let l = 20.0 / a.sqrt();
        for m in 0..=8 {
            for n in m..=8 {
                let ip = integrate_default(|z| oscillator_eigenfunction(m, a, z) * oscillator_eigenfunction(n, a, z), -l, l).unwrap();
                let expect = if m == n { 1.0 } else { 0.0 };
                assert!((ip - expect).abs() < 1e-8, "<{m}|{n}> = {ip}");
            }
        }
    }

    #[test]
    fn hermite_functions_survive_high_order() {
        let v = hermite_function(60, 8.0);
        assert!(v.is_finite() && v.abs() < 1.0);
    }

    #[test]
    fn oscillator_energies() {
        let m0 = EigenmodeInit::new(0, 1.0, Prefactor::Evolved).unwrap();
        let m1 = EigenmodeInit::new(1, 1.0, Prefactor::Evolved).unwrap();
        assert_eq!((m0.energy(1.0), m1.energy(1.0)), (1.0, 3.0));
        let m = EigenmodeInit::new(1, 0.5, Prefactor::Evolved).unwrap();
        let (d0, t) = (2.0, 0.1);
        for x in [-0.5, 0.7] {
            let r = gaussian_channel_solution(0.0, d0, &m, x, t).unwrap() / gaussian_channel_solution(0.0, d0, &m, x, 0.0).unwrap();
            assert!((r - (-0.4f64).exp()).abs() < 1e-14);
        }
        assert!(matches!(EigenmodeInit::new(0, -1.0, Prefactor::Evolved), Err(Error::NegativeCurvature(_))));
    }

    #[test]
    fn ground_state_profile_is_flat() {
        let m = EigenmodeInit::new(0, 0.8, Prefactor::Evolved).unwrap();
        let c0 = gaussian_channel_solution(0.4, 1.0, &m, 0.0, 0.0).unwrap();
        for x in [-3.0, 1.0, 4.0] {
            assert_eq!(gaussian_channel_solution(0.4, 1.0, &m, x, 0.0).unwrap(), c0);
        }
    }

    #[test]
    fn spreading_law_from_log_quadratic_fit() {
        let (d0, t) = (1.3, 0.7);
        let g = gi(0.9, 2.0);
        let expect = g.variance_parameter(d0, t);
        // ln[C / prefactor-shape] is quadratic in x with curvature −1/(2s).
        let fits: [Box<dyn Fn(f64) -> f64>; 3] = [
            Box::new(|x| (conical_solution(0.5, d0, &g, x, t).unwrap() / (1.0 + 0.5 * x)).ln()),
            Box::new(|x| (throat_solution(1.0, 0.0, d0, &g, x, t).unwrap() / (0.5 * x).exp()).ln()),
            Box::new(|x| (sinusoidal_solution(1.0, 1.0, d0, &g, x, t).unwrap() / x.sin()).ln()),
        ];
        for fit in &fits {
            let (x1, x2, x3) = (1.0, 2.0, 3.0);
            let c2 = (fit(x1) - 2.0 * fit(x2) + fit(x3)) / 2.0;
            let s = -1.0 / (4.0 * c2);
            assert!((s - expect).abs() < 1e-10 * expect, "{s} vs {expect}");
        }
    }

    fn gaussian_time_log_derivative(g: &GaussianInit, d0: f64, x: f64, t: f64) -> f64 {
        let s = g.variance_parameter(d0, t);
        d0 * (-0.5 / s + (x - g.a0).powi(2) / (4.0 * s * s))
    }

    fn generator_residual(profile: &ChannelProfile, lo: f64, hi: f64, n: usize, exact: impl Fn(f64) -> (f64, f64)) -> f64 {
        let m = DiffusionModel::constant(1.0).unwrap();
        let c = ConcentrationField::from_fn(lo, hi, n, 0.5, |x| exact(x).0).unwrap();
        let r = apply_fj_generator(&m, profile, &c).unwrap();
        r.x().iter().zip(r.values()).fold(0.0f64, |acc, (&x, v)| acc.max((v - exact(x).1).abs()))
    }

    #[test]
    fn closed_forms_satisfy_the_equation() {
        let g = gi(1.0, 2.0);
        let t = 0.5;
        let cone = ChannelProfile::conical(1.0).unwrap();
        let cone_exact = |x: f64| {
            let c = conical_solution(1.0, 1.0, &g, x, t).unwrap();
            (c, c * gaussian_time_log_derivative(&g, 1.0, x, t))
        };
        let throat = ChannelProfile::throat(1.0, 0.0).unwrap();
        let throat_exact = |x: f64| {
            let c = throat_solution(1.0, 0.0, 1.0, &g, x, t).unwrap();
            (c, c * (gaussian_time_log_derivative(&g, 1.0, x, t) - 0.25))
        };
        let sine = ChannelProfile::sinusoidal(1.0, 1.0, 0).unwrap();
        let gs = gi(0.5, PI / 2.0);
        let sine_exact = |x: f64| {
            let c = sinusoidal_solution(1.0, 1.0, 1.0, &gs, x, t).unwrap();
            (c, c * (gaussian_time_log_derivative(&gs, 1.0, x, t) + 1.0))
        };
        for (name, coarse, fine) in [
            ("cone", generator_residual(&cone, 0.0, 6.0, 201, cone_exact), generator_residual(&cone, 0.0, 6.0, 401, cone_exact)),
            ("throat", generator_residual(&throat, -3.0, 5.0, 201, throat_exact), generator_residual(&throat, -3.0, 5.0, 401, throat_exact)),
            ("sine", generator_residual(&sine, 0.3, 2.8, 201, sine_exact), generator_residual(&sine, 0.3, 2.8, 401, sine_exact)),
        ] {
            let ratio = coarse / fine;
            assert!(coarse < 1e-2 && (3.5..4.5).contains(&ratio), "{name}: {coarse} {fine} {ratio}");
        }
        let m = EigenmodeInit::new(2, 0.6, Prefactor::Evolved).unwrap();
        let gauss = ChannelProfile::gaussian_area(0.6, 0.3, 0.0).unwrap();
        let gauss_exact = |x: f64| {
            let c = gaussian_channel_solution(0.3, 1.0, &m, x, t).unwrap();
            (c, -m.decay_rate(1.0) * c)
        };
        let coarse = generator_residual(&gauss, -3.0, 3.0, 201, gauss_exact);
        let fine = generator_residual(&gauss, -3.0, 3.0, 401, gauss_exact);
        assert!((3.5..4.5).contains(&(coarse / fine)), "{coarse} {fine}");
    }

    #[test]
    fn closed_form_dispatch() {
        let m = DiffusionModel::constant(1.0).unwrap();
        let cone = ChannelProfile::conical(1.0).unwrap();
        let init = ClosedFormInit::Gaussian(gi(1.0, 3.0));
        assert_eq!(closed_form(&cone, &m, &init, 3.0, 1.0).unwrap(), conical_solution(1.0, 1.0, &gi(1.0, 3.0), 3.0, 1.0).unwrap());
        let rr = DiffusionModel::reguera_rubi(1.0).unwrap();
        assert!(closed_form(&cone, &rr, &init, 3.0, 1.0).is_err());
        let gauss = ChannelProfile::gaussian_area(1.0, 0.0, 0.0).unwrap();
        assert!(closed_form(&gauss, &m, &init, 0.0, 1.0).is_err());
        let sine = ChannelProfile::sinusoidal(1.0, 1.0, 0).unwrap();
        assert!(closed_form(&sine, &m, &init, 0.0, 1.0).unwrap().abs() < 1e-16);
    }

    #[test]
    fn stationary_profiles() {
        let m = DiffusionModel::constant(1.0).unwrap();
        let cone = ChannelProfile::conical(0.5).unwrap();
        let s = stationary_profile(&cone, &m, 0.0, (0.0, 4.0), 41).unwrap();
        assert!(s.stationary);
        for (x, v) in s.field.x().iter().zip(s.field.values()) {
            assert!((v - (1.0 + 0.5 * x)).abs() < 1e-10);
        }
        let cyl = ChannelProfile::cylinder(3.0).unwrap();
        let s = stationary_profile(&cyl, &m, 0.0, (0.0, 1.0), 11).unwrap();
        assert!(s.stationary && s.field.values().iter().all(|&v| v == 1.0));
        let throat = ChannelProfile::throat(1.0, 0.0).unwrap();
        assert!(!stationary_profile(&throat, &m, 0.0, (0.0, 1.0), 11).unwrap().stationary);
    }
}
