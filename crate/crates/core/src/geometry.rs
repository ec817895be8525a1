//! Channel cross-section profiles, the entropic potential they induce under
//! constant diffusion, and position-dependent diffusion models.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::interp::MonotoneCubic;

/// Geometry family with its parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum Family {
    /// `A = π (1 + slope·x)²`.
    Conical { slope: f64 },
    /// `A = exp(alpha·x + beta)`.
    Throat { alpha: f64, beta: f64 },
    /// `A = amplitude · sin²(wavenumber·x)` restricted to one cell between zeros.
    Sinusoidal {
        amplitude: f64,
        wavenumber: f64,
        cell: i64,
    },
    /// `A = exp(a x² + b x + c)`.
    GaussianArea { a: f64, b: f64, c: f64 },
    /// Sampled `(x, A)` pairs, monotone-cubic interpolated.
    Tabulated(MonotoneCubic),
}

/// Interval on which a profile is defined. Closed-form families live on open
/// intervals; tabulated profiles include their end knots.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Domain {
    pub lo: f64,
    pub hi: f64,
    pub closed: bool,
}

impl Domain {
    pub fn contains(&self, x: f64) -> bool {
        if self.closed {
            x >= self.lo && x <= self.hi
        } else {
            x > self.lo && x < self.hi
        }
    }

    /// True if `x` is an endpoint of an open domain (a wall where `A → 0`).
    pub fn is_open_endpoint(&self, x: f64) -> bool {
        !self.closed && (x == self.lo || x == self.hi)
    }
}

/// Area and its first two derivatives at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AreaDerivs {
    pub area: f64,
    pub d1: f64,
    pub d2: f64,
    /// Set for tabulated profiles: the second derivative of a C¹ interpolant
    /// is only piecewise continuous.
    pub approximate: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelProfile {
    family: Family,
    domain: Domain,
}

impl ChannelProfile {
    pub fn conical(slope: f64) -> Result<Self> {
        finite("conical slope", slope)?;
        let domain = if slope > 0.0 {
            Domain { lo: -1.0 / slope, hi: f64::INFINITY, closed: false }
        } else if slope < 0.0 {
            Domain { lo: f64::NEG_INFINITY, hi: -1.0 / slope, closed: false }
        } else {
            Domain { lo: f64::NEG_INFINITY, hi: f64::INFINITY, closed: false }
        };
        Ok(Self { family: Family::Conical { slope }, domain })
    }

    pub fn throat(alpha: f64, beta: f64) -> Result<Self> {
        finite("throat alpha", alpha)?;
        finite("throat beta", beta)?;
        Ok(Self {
            family: Family::Throat { alpha, beta },
            domain: Domain { lo: f64::NEG_INFINITY, hi: f64::INFINITY, closed: false },
        })
    }

    /// Constant cross-section `area` (a throat with zero exponent).
    pub fn cylinder(area: f64) -> Result<Self> {
        if !(area > 0.0) || !area.is_finite() {
            return Err(Error::InvalidParameter(format!("cylinder area must be positive, got {area}")));
        }
        Self::throat(0.0, area.ln())
    }

    /// Sinusoidal channel on the open cell `(cell·π/γ, (cell+1)·π/γ)`.
    pub fn sinusoidal(amplitude: f64, wavenumber: f64, cell: i64) -> Result<Self> {
        if !(amplitude > 0.0) || !amplitude.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "sinusoidal amplitude B must be positive, got {amplitude}"
            )));
        }
        if !(wavenumber > 0.0) || !wavenumber.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "sinusoidal wavenumber must be positive, got {wavenumber}"
            )));
        }
        let lo = cell as f64 * PI / wavenumber;
        let hi = (cell + 1) as f64 * PI / wavenumber;
        Ok(Self {
            family: Family::Sinusoidal { amplitude, wavenumber, cell },
            domain: Domain { lo, hi, closed: false },
        })
    }

    pub fn gaussian_area(a: f64, b: f64, c: f64) -> Result<Self> {
        finite("gaussian-area a", a)?;
        finite("gaussian-area b", b)?;
        finite("gaussian-area c", c)?;
        Ok(Self {
            family: Family::GaussianArea { a, b, c },
            domain: Domain { lo: f64::NEG_INFINITY, hi: f64::INFINITY, closed: false },
        })
    }

    /// Tabulated profile. Positivity is checked on the knots and on eight
    /// interior points per segment.
    pub fn tabulated(x: Vec<f64>, area: Vec<f64>) -> Result<Self> {
        let interp = MonotoneCubic::new(x, area)?;
        let xs = interp.x();
        for k in 0..xs.len() - 1 {
            for j in 0..=8 {
                let t = xs[k] + (xs[k + 1] - xs[k]) * j as f64 / 8.0;
                let v = interp.eval(t);
                if !(v > 0.0) {
                    return Err(Error::NonPositiveArea { x: t, area: v });
                }
            }
        }
        let domain = Domain { lo: interp.lo(), hi: interp.hi(), closed: true };
        Ok(Self { family: Family::Tabulated(interp), domain })
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn family_name(&self) -> &'static str {
        match self.family {
            Family::Conical { .. } => "conical",
            Family::Throat { .. } => "throat",
            Family::Sinusoidal { .. } => "sinusoidal",
            Family::GaussianArea { .. } => "gaussian_area",
            Family::Tabulated(_) => "tabulated",
        }
    }

    pub fn check(&self, x: f64) -> Result<()> {
        if self.domain.contains(x) {
            Ok(())
        } else {
            Err(Error::OutOfDomain { x, lo: self.domain.lo, hi: self.domain.hi })
        }
    }

    /// `A(x)`, `A′(x)`, `A″(x)`.
    pub fn area_derivs(&self, x: f64) -> Result<AreaDerivs> {
        self.check(x)?;
        let exact = |area, d1, d2| AreaDerivs { area, d1, d2, approximate: false };
        let out = match &self.family {
            Family::Conical { slope } => {
                let u = 1.0 + slope * x;
                exact(PI * u * u, 2.0 * PI * slope * u, 2.0 * PI * slope * slope)
            }
            Family::Throat { alpha, beta } => {
                let a = (alpha * x + beta).exp();
                exact(a, alpha * a, alpha * alpha * a)
            }
            Family::Sinusoidal { amplitude, wavenumber, .. } => {
                let (s, c) = (wavenumber * x).sin_cos();
                let k = *wavenumber;
                exact(
                    amplitude * s * s,
                    2.0 * amplitude * k * s * c,
                    2.0 * amplitude * k * k * (c * c - s * s),
                )
            }
            Family::GaussianArea { a, b, c } => {
                let g1 = 2.0 * a * x + b;
                let area = (a * x * x + b * x + c).exp();
                exact(area, g1 * area, (2.0 * a + g1 * g1) * area)
            }
            Family::Tabulated(interp) => {
                let [v, d1, d2, _] = interp.eval_derivs(x);
                AreaDerivs { area: v, d1, d2, approximate: true }
            }
        };
        if !(out.area > 0.0) {
            return Err(Error::NonPositiveArea { x, area: out.area });
        }
        Ok(out)
    }

    pub fn area(&self, x: f64) -> Result<f64> {
        self.area_derivs(x).map(|d| d.area)
    }

    /// `[ln A, (ln A)′, (ln A)″, (ln A)‴]`, analytic for closed families.
    pub fn log_area_derivs(&self, x: f64) -> Result<[f64; 4]> {
        self.check(x)?;
        let out = match &self.family {
            Family::Conical { slope } => {
                let u = 1.0 + slope * x;
                let r = slope / u;
                [PI.ln() + 2.0 * u.abs().ln(), 2.0 * r, -2.0 * r * r, 4.0 * r * r * r]
            }
            Family::Throat { alpha, beta } => [alpha * x + beta, *alpha, 0.0, 0.0],
            Family::Sinusoidal { amplitude, wavenumber, .. } => {
                let (s, c) = (wavenumber * x).sin_cos();
                let k = *wavenumber;
                [
                    amplitude.ln() + 2.0 * s.abs().ln(),
                    2.0 * k * c / s,
                    -2.0 * k * k / (s * s),
                    4.0 * k * k * k * c / (s * s * s),
                ]
            }
            Family::GaussianArea { a, b, c } => {
                [a * x * x + b * x + c, 2.0 * a * x + b, 2.0 * a, 0.0]
            }
            Family::Tabulated(interp) => {
                let [v, d1, d2, d3] = interp.eval_derivs(x);
                if !(v > 0.0) {
                    return Err(Error::NonPositiveArea { x, area: v });
                }
                let l1 = d1 / v;
                let l2 = d2 / v - l1 * l1;
                let l3 = d3 / v - 3.0 * l1 * l2 - l1 * l1 * l1;
                [v.ln(), l1, l2, l3]
            }
        };
        if !out[0].is_finite() {
            return Err(Error::NonPositiveArea { x, area: out[0].exp() });
        }
        Ok(out)
    }

    /// Entropic potential `V = ½ A″/A − ¼ (A′/A)²` for constant diffusion,
    /// evaluated as `½ (ln A)″ + ¼ ((ln A)′)²` to stay finite where `A`
    /// itself would overflow.
    pub fn entropic_potential(&self, x: f64) -> Result<f64> {
        if let Family::Tabulated(_) = self.family {
            let d = self.area_derivs(x)?;
            let l1 = d.d1 / d.area;
            return Ok(0.5 * d.d2 / d.area - 0.25 * l1 * l1);
        }
        let [_, l1, l2, _] = self.log_area_derivs(x)?;
        Ok(0.5 * l2 + 0.25 * l1 * l1)
    }

    /// The value of the entropic potential when the family makes it constant.
    pub fn constant_potential(&self) -> Option<f64> {
        match self.family {
            Family::Conical { .. } => Some(0.0),
            Family::Throat { alpha, .. } => Some(0.25 * alpha * alpha),
            Family::Sinusoidal { wavenumber, .. } => Some(-wavenumber * wavenumber),
            _ => None,
        }
    }
}

fn finite(name: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be finite, got {v}")))
    }
}

/// Diffusion coefficient model.
#[derive(Debug, Clone, PartialEq)]
pub enum DiffusionModel {
    /// `D(x) = d0`.
    Constant { d0: f64 },
    /// `D(x) = d0 / (1 + R′(x)²)^{1/2}` with `R = √(A/π)`.
    RegueraRubi { d0: f64 },
    /// `D(x) = d0 · exp(rate·x)`.
    Exponential { d0: f64, rate: f64 },
    /// Sampled `(x, D)` pairs, monotone-cubic interpolated.
    Tabulated(MonotoneCubic),
}

impl DiffusionModel {
    pub fn constant(d0: f64) -> Result<Self> {
        positive_d0(d0)?;
        Ok(Self::Constant { d0 })
    }

    pub fn reguera_rubi(d0: f64) -> Result<Self> {
        positive_d0(d0)?;
        Ok(Self::RegueraRubi { d0 })
    }

    pub fn exponential(d0: f64, rate: f64) -> Result<Self> {
        positive_d0(d0)?;
        finite("exponential diffusion rate", rate)?;
        Ok(Self::Exponential { d0, rate })
    }

    pub fn tabulated(x: Vec<f64>, d: Vec<f64>) -> Result<Self> {
        let interp = MonotoneCubic::new(x, d)?;
        let xs = interp.x();
        for k in 0..xs.len() - 1 {
            for j in 0..=8 {
                let t = xs[k] + (xs[k + 1] - xs[k]) * j as f64 / 8.0;
                let v = interp.eval(t);
                if !(v > 0.0) {
                    return Err(Error::NonPositiveDiffusion { x: t, value: v });
                }
            }
        }
        Ok(Self::Tabulated(interp))
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Self::Constant { .. } => "constant",
            Self::RegueraRubi { .. } => "reguera_rubi",
            Self::Exponential { .. } => "exponential",
            Self::Tabulated(_) => "tabulated",
        }
    }

    /// `Some(d0)` when `D` does not depend on position.
    pub fn constant_value(&self) -> Option<f64> {
        match self {
            Self::Constant { d0 } => Some(*d0),
            _ => None,
        }
    }

    /// `[D, D′, D″]` at `x`.
    pub fn derivs(&self, profile: &ChannelProfile, x: f64) -> Result<[f64; 3]> {
        profile.check(x)?;
        let out = match self {
            Self::Constant { d0 } => [*d0, 0.0, 0.0],
            Self::Exponential { d0, rate } => {
                let d = d0 * (rate * x).exp();
                [d, rate * d, rate * rate * d]
            }
            Self::RegueraRubi { d0 } => {
                let [ln_a, l1, l2, l3] = profile.log_area_derivs(x)?;
                let r = (0.5 * ln_a).exp() / PI.sqrt();
                let s = r * 0.5 * l1;
                let s1 = r * (0.25 * l1 * l1 + 0.5 * l2);
                let s2 = r * (l1 * l1 * l1 / 8.0 + 0.75 * l1 * l2 + 0.5 * l3);
                let q = 1.0 + s * s;
                let d = d0 / q.sqrt();
                let d1 = -d0 * s * s1 / (q * q.sqrt());
                let d2 = -d0
                    * ((s1 * s1 + s * s2) / (q * q.sqrt())
                        - 3.0 * s * s * s1 * s1 / (q * q * q.sqrt()));
                [d, d1, d2]
            }
            Self::Tabulated(interp) => {
                if x < interp.lo() || x > interp.hi() {
                    return Err(Error::OutOfDomain { x, lo: interp.lo(), hi: interp.hi() });
                }
                let [d, d1, d2, _] = interp.eval_derivs(x);
                [d, d1, d2]
            }
        };
        if !(out[0] > 0.0) || !out[0].is_finite() {
            return Err(Error::NonPositiveDiffusion { x, value: out[0] });
        }
        Ok(out)
    }

    /// `D(x)` on the given profile.
    pub fn diffusion_coefficient(&self, profile: &ChannelProfile, x: f64) -> Result<f64> {
        self.derivs(profile, x).map(|d| d[0])
    }
}

fn positive_d0(d0: f64) -> Result<()> {
    if d0 > 0.0 && d0.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("D0 must be positive, got {d0}")))
    }
}

/// Free-function form of [`ChannelProfile::area_derivs`].
pub fn area_derivs(profile: &ChannelProfile, x: f64) -> Result<AreaDerivs> {
    profile.area_derivs(x)
}

/// Free-function form of [`ChannelProfile::entropic_potential`].
pub fn entropic_potential(profile: &ChannelProfile, x: f64) -> Result<f64> {
    profile.entropic_potential(x)
}

/// Free-function form of [`DiffusionModel::diffusion_coefficient`].
pub fn diffusion_coefficient(model: &DiffusionModel, profile: &ChannelProfile, x: f64) -> Result<f64> {
    model.diffusion_coefficient(profile, x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn central_fd(f: impl Fn(f64) -> f64, x: f64, h: f64) -> (f64, f64) {
        let (fm, f0, fp) = (f(x - h), f(x), f(x + h));
        ((fp - fm) / (2.0 * h), (fp - 2.0 * f0 + fm) / (h * h))
    }

    #[test]
    fn conical_area_derivs_at_origin() {
        let p = ChannelProfile::conical(1.0).unwrap();
        let d = p.area_derivs(0.0).unwrap();
        assert_eq!((d.area, d.d1, d.d2), (PI, 2.0 * PI, 2.0 * PI));
        assert!(!d.approximate);
    }

    #[test]
    fn cylinder_is_flat() {
        let p = ChannelProfile::throat(0.0, 0.0).unwrap();
        for x in [-3.0, 0.0, 7.5] {
            let d = p.area_derivs(x).unwrap();
            assert_eq!((d.area, d.d1, d.d2), (1.0, 0.0, 0.0));
            assert_eq!(p.entropic_potential(x).unwrap(), 0.0);
        }
    }

    #[test]
    fn sinusoidal_derivs_match_finite_differences() {
        let p = ChannelProfile::sinusoidal(1.0, 1.0, 0).unwrap();
        let x = PI / 2.0;
        let d = p.area_derivs(x).unwrap();
        let area = |t: f64| t.sin().powi(2);
        let (fd1, _) = central_fd(area, x, 1e-5);
        let (_, fd2) = central_fd(area, x, 1e-4);
        assert!((d.area - 1.0).abs() < 1e-15);
        assert!((d.d1 - fd1).abs() < 1e-9 && d.d1.abs() < 1e-12);
        assert!((d.d2 - fd2).abs() < 1e-6 && (d.d2 + 2.0).abs() < 1e-12);
    }

    #[test]
    fn closed_form_potentials() {
        let cone = ChannelProfile::conical(2.0).unwrap();
        assert!(cone.entropic_potential(1.3).unwrap().abs() < 1e-12);
        let throat = ChannelProfile::throat(2.0, 0.3).unwrap();
        for x in [-4.0, 0.0, 2.2] {
            assert!((throat.entropic_potential(x).unwrap() - 1.0).abs() < 1e-14);
        }
        let sine = ChannelProfile::sinusoidal(1.0, 3.0, 0).unwrap();
        assert!((sine.entropic_potential(0.2).unwrap() + 9.0).abs() < 1e-12);
        let gauss = ChannelProfile::gaussian_area(0.5, 0.0, 0.0).unwrap();
        assert!((gauss.entropic_potential(2.0).unwrap() - 1.5).abs() < 1e-14);
    }

    #[test]
    fn gaussian_area_potential_from_area_derivs() {
        // Independent route: evaluate ½A″/A − ¼(A′/A)² from area_derivs.
        let p = ChannelProfile::gaussian_area(0.5, 0.0, 0.0).unwrap();
        let d = p.area_derivs(2.0).unwrap();
        let v = 0.5 * d.d2 / d.area - 0.25 * (d.d1 / d.area).powi(2);
        assert!((v - 1.5).abs() < 1e-13);
    }

    #[test]
    fn domains_and_walls() {
        let cone = ChannelProfile::conical(-0.5).unwrap();
        assert_eq!(cone.domain().hi, 2.0);
        assert!(cone.area(2.0).is_err());
        assert!(cone.area(1.9).is_ok());
        let sine = ChannelProfile::sinusoidal(2.0, 2.0, 1).unwrap();
        let dom = sine.domain();
        assert!((dom.lo - PI / 2.0).abs() < 1e-15 && (dom.hi - PI).abs() < 1e-15);
        assert!(matches!(sine.area_derivs(dom.lo), Err(Error::OutOfDomain { .. })));
        assert!(ChannelProfile::sinusoidal(1.0, -1.0, 0).is_err());
    }

    #[test]
    fn tabulated_profile_flags_second_derivative() {
        let x: Vec<f64> = (0..41).map(|i| i as f64 * 0.1).collect();
        let a: Vec<f64> = x.iter().map(|t| 1.0 + 0.5 * t).collect();
        let p = ChannelProfile::tabulated(x, a).unwrap();
        let d = p.area_derivs(1.234).unwrap();
        assert!(d.approximate);
        assert!((d.area - 1.617).abs() < 1e-12);
        assert!((d.d1 - 0.5).abs() < 1e-12);
        assert!(p.area(4.01).is_err());
        assert!(ChannelProfile::tabulated(vec![0.0, 1.0], vec![1.0, -1.0]).is_err());
    }

    #[test]
    fn reguera_rubi_on_cone_and_cylinder() {
        let lambda = 0.7;
        let cone = ChannelProfile::conical(lambda).unwrap();
        let m = DiffusionModel::reguera_rubi(2.0).unwrap();
        for x in [-0.5, 0.0, 3.0] {
            let [d, d1, d2] = m.derivs(&cone, x).unwrap();
            assert!((d - 2.0 / (1.0 + lambda * lambda).sqrt()).abs() < 1e-14);
            assert!(d1.abs() < 1e-14 && d2.abs() < 1e-14);
        }
        let cyl = ChannelProfile::cylinder(3.0).unwrap();
        assert_eq!(m.diffusion_coefficient(&cyl, 1.0).unwrap(), 2.0);
    }

    #[test]
    fn reguera_rubi_on_throat_matches_fd_oracle() {
        let p = ChannelProfile::throat(1.0, 0.0).unwrap();
        let m = DiffusionModel::reguera_rubi(1.0).unwrap();
        let radius = |t: f64| ((t).exp() / PI).sqrt();
        let h = 1e-6;
        let r1 = (radius(h) - radius(-h)) / (2.0 * h);
        let oracle = 1.0 / (1.0 + r1 * r1).sqrt();
        let d = m.diffusion_coefficient(&p, 0.0).unwrap();
        assert!((d - oracle).abs() < 1e-9, "{d} vs {oracle}");
    }

    #[test]
    fn reguera_rubi_derivatives_match_fd() {
        let p = ChannelProfile::gaussian_area(0.3, 0.2, 0.1).unwrap();
        let m = DiffusionModel::reguera_rubi(1.5).unwrap();
        for x in [-1.0, 0.4, 1.7] {
            let [_, d1, d2] = m.derivs(&p, x).unwrap();
            let dfun = |t: f64| m.diffusion_coefficient(&p, t).unwrap();
            let (fd1, _) = central_fd(dfun, x, 1e-5);
            let d1fun = |t: f64| m.derivs(&p, t).unwrap()[1];
            let (fd2, _) = central_fd(d1fun, x, 1e-5);
            assert!((d1 - fd1).abs() < 1e-8, "{d1} {fd1}");
            assert!((d2 - fd2).abs() < 1e-7, "{d2} {fd2}");
        }
    }

    fn closed_profiles() -> Vec<ChannelProfile> {
        vec![
            ChannelProfile::conical(1.3).unwrap(),
            ChannelProfile::throat(-0.8, 0.4).unwrap(),
            ChannelProfile::sinusoidal(2.0, 1.5, 0).unwrap(),
            ChannelProfile::gaussian_area(-0.4, 0.3, 0.2).unwrap(),
        ]
    }

    proptest! {
        #[test]
        fn potential_agrees_with_area_sample_fd(which in 0usize..4, u in 0.05f64..0.95) {
            let p = &closed_profiles()[which];
            let dom = p.domain();
            // Keep clear of the sinusoidal walls, where the area-sample stencil
            // itself loses accuracy as A → 0.
            let (lo, hi) = (dom.lo.max(-3.0), dom.hi.min(3.0));
            let x = lo + (0.1 + 0.8 * u) * (hi - lo);
            let h = 1e-4;
            let a = |t: f64| p.area(t).unwrap();
            let (a0, am, ap) = (a(x), a(x - h), a(x + h));
            let a1 = (ap - am) / (2.0 * h);
            let a2 = (ap - 2.0 * a0 + am) / (h * h);
            let fd = 0.5 * a2 / a0 - 0.25 * (a1 / a0).powi(2);
            let v = p.entropic_potential(x).unwrap();
            prop_assert!((v - fd).abs() < 1e-6, "x={} v={} fd={}", x, v, fd);
        }

        #[test]
        fn reguera_rubi_never_exceeds_d0(which in 0usize..4, u in 0.05f64..0.95, d0 in 0.1f64..5.0) {
            let p = &closed_profiles()[which];
            let dom = p.domain();
            let (lo, hi) = (dom.lo.max(-3.0), dom.hi.min(3.0));
            let x = lo + u * (hi - lo);
            let m = DiffusionModel::reguera_rubi(d0).unwrap();
            let d = m.diffusion_coefficient(p, x).unwrap();
            prop_assert!(d > 0.0 && d <= d0);
        }

        #[test]
        fn cone_potential_vanishes(slope in -3.0f64..3.0, u in 0.0f64..1.0) {
            let p = ChannelProfile::conical(slope).unwrap();
            let dom = p.domain();
            let (lo, hi) = (dom.lo.max(-10.0), dom.hi.min(10.0));
            let x = lo + (0.001 + 0.998 * u) * (hi - lo);
            prop_assert!(p.entropic_potential(x).unwrap().abs() <= 1e-12);
        }
    }
}
