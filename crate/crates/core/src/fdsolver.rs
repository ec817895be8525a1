//! Reference solver: flux-conservative Crank–Nicolson in the original `x`
//! variable. It never uses the Schrödinger mapping.
//!
//! Nodes carry `C_i`; the control volume of node `i` has width `w_i` (`Δx`
//! inside, `Δx/2` at a no-flux end) so that `Σ w_i C_i` is the trapezoid
//! mass. Interface fluxes are
//! `J_{i+½} = −D(x_{i+½}) A(x_{i+½}) (u_{i+1} − u_i)/Δx` with `u = C/A`.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::field::ConcentrationField;
use crate::geometry::{ChannelProfile, DiffusionModel};
use crate::tridiag::{ThomasFactor, Tridiagonal};

/// Reference values `(x, t) -> C` for [`BoundaryCondition::DirichletAnalytic`].
pub type BoundaryFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum BoundaryCondition {
    /// Zero flux through both end faces; mass is conserved.
    NoFlux,
    /// `C = 0` at both end nodes. End nodes are not unknowns, so walls where
    /// `A` vanishes are allowed there.
    DirichletZero,
    /// End nodes follow a supplied reference solution.
    DirichletAnalytic(BoundaryFn),
}

impl fmt::Debug for BoundaryCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl BoundaryCondition {
    pub fn name(&self) -> &'static str {
        match self {
            Self::NoFlux => "no_flux",
            Self::DirichletZero => "dirichlet_zero",
            Self::DirichletAnalytic(_) => "dirichlet_analytic",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub dt: f64,
    pub bc: BoundaryCondition,
    /// Relative residual accepted from the tridiagonal solve.
    pub tolerance: f64,
    /// Number of leading steps replaced by two backward-Euler half steps,
    /// which damps the stiff modes excited by incompatible initial data.
    pub startup_steps: usize,
}

impl SolverConfig {
    pub fn new(dt: f64, bc: BoundaryCondition) -> Result<Self> {
        let cfg = Self { dt, bc, tolerance: 1e-12, startup_steps: 0 };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_startup_steps(mut self, steps: usize) -> Self {
        self.startup_steps = steps;
        self
    }

    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidParameter(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidParameter(format!("solver tolerance must be positive, got {}", self.tolerance)));
        }
        Ok(())
    }
}

/// Negative values below `−NEG_TOL · max|C|` are an integrity error.
pub const NEG_TOL: f64 = 1e-12;

struct Scheme {
    matrix: Tridiagonal,
    factor: ThomasFactor,
    theta: f64,
    tau: f64,
}

struct Geometry<'a> {
    inv_area: &'a [f64],
    cond: &'a [f64],
    weight: &'a [f64],
    first: usize,
    last: usize,
}

impl Geometry<'_> {
    /// `W − θτ S A^{-1}` restricted to the unknowns.
    fn scheme(&self, theta: f64, tau: f64) -> Result<Scheme> {
        let m = self.last - self.first + 1;
        let n = self.inv_area.len();
        let mut lower = vec![0.0; m.saturating_sub(1)];
        let mut diag = vec![0.0; m];
        let mut upper = vec![0.0; m.saturating_sub(1)];
        for r in 0..m {
            let i = self.first + r;
            let left = if i > 0 { self.cond[i - 1] } else { 0.0 };
            let right = if i + 1 < n { self.cond[i] } else { 0.0 };
            diag[r] = self.weight[r] + theta * tau * (left + right) * self.inv_area[i];
            if r > 0 {
                lower[r - 1] = -theta * tau * left * self.inv_area[i - 1];
            }
            if r + 1 < m {
                upper[r] = -theta * tau * right * self.inv_area[i + 1];
            }
        }
        let matrix = Tridiagonal { lower, diag, upper };
        let factor = matrix.factor(1e-14)?;
        Ok(Scheme { matrix, factor, theta, tau })
    }
}

/// Precomputed geometry and factorizations for one grid and configuration.
pub struct Stepper {
    x: Vec<f64>,
    /// `1/A_i`; zero at end nodes whose value is pinned to zero.
    inv_area: Vec<f64>,
    /// Interface conductances `D A / Δx` at the `n − 1` midpoints.
    cond: Vec<f64>,
    /// Control-volume widths of the unknown nodes.
    weight: Vec<f64>,
    first: usize,
    last: usize,
    cfg: SolverConfig,
    cn: Scheme,
    startup: Option<Scheme>,
}

impl Stepper {
    pub fn new(profile: &ChannelProfile, model: &DiffusionModel, x: &[f64], cfg: SolverConfig) -> Result<Self> {
        cfg.validate()?;
        let n = x.len();
        let pinned = !matches!(cfg.bc, BoundaryCondition::NoFlux);
        let needed = if pinned { 3 } else { 2 };
        if n < needed {
            return Err(Error::GridTooSmall { needed, got: n });
        }
        let h = (x[n - 1] - x[0]) / (n - 1) as f64;
        let (first, last) = if pinned { (1, n - 2) } else { (0, n - 1) };

        let mut inv_area = vec![0.0; n];
        for i in 0..n {
            let unknown = i >= first && i <= last;
            let needs_area = unknown || matches!(cfg.bc, BoundaryCondition::DirichletAnalytic(_));
            if !needs_area {
                continue;
            }
            match profile.area(x[i]) {
                Ok(a) => inv_area[i] = 1.0 / a,
                Err(e) if unknown => {
                    return Err(Error::SingularSystem(format!("degenerate area at node {i} (x = {}): {e}", x[i])))
                }
                // A wall under an analytic boundary: only C = 0 is admissible.
                Err(_) => inv_area[i] = f64::NAN,
            }
        }
        let cond = x
            .windows(2)
            .map(|w| {
                let xm = 0.5 * (w[0] + w[1]);
                Ok(model.diffusion_coefficient(profile, xm)? * profile.area(xm)? / h)
            })
            .collect::<Result<Vec<_>>>()?;
        let weight: Vec<f64> = (first..=last)
            .map(|i| if !pinned && (i == 0 || i == n - 1) { 0.5 * h } else { h })
            .collect();
        let geom = Geometry { inv_area: &inv_area, cond: &cond, weight: &weight, first, last };
        let cn = geom.scheme(0.5, cfg.dt)?;
        let startup = if cfg.startup_steps > 0 { Some(geom.scheme(1.0, 0.5 * cfg.dt)?) } else { None };
        Ok(Self { x: x.to_vec(), inv_area, cond, weight, first, last, cfg, cn, startup })
    }

    pub fn grid(&self) -> &[f64] {
        &self.x
    }

    pub fn config(&self) -> &SolverConfig {
        &self.cfg
    }

    fn boundary_u(&self, i: usize, t: f64) -> Result<f64> {
        match &self.cfg.bc {
            BoundaryCondition::NoFlux => unreachable!("no-flux ends are unknowns"),
            BoundaryCondition::DirichletZero => Ok(0.0),
            BoundaryCondition::DirichletAnalytic(g) => {
                let c = g(self.x[i], t);
                if !c.is_finite() {
                    return Err(Error::IntegrityError(format!("boundary value at x = {} is not finite", self.x[i])));
                }
                let ia = self.inv_area[i];
                if ia.is_nan() {
                    if c.abs() <= 1e-12 {
                        Ok(0.0)
                    } else {
                        Err(Error::SingularSystem(format!(
                            "nonzero boundary value {c} at a wall x = {} where A = 0",
                            self.x[i]
                        )))
                    }
                } else {
                    Ok(c * ia)
                }
            }
        }
    }

    fn advance(&self, scheme: &Scheme, c: &[f64], t_old: f64) -> Result<Vec<f64>> {
        let n = self.x.len();
        let t_new = t_old + scheme.tau;
        let mut u: Vec<f64> = c.iter().zip(&self.inv_area).map(|(ci, ia)| ci * ia).collect();
        let (mut ub_new_lo, mut ub_new_hi) = (0.0, 0.0);
        if self.first > 0 {
            u[0] = self.boundary_u(0, t_old)?;
            u[n - 1] = self.boundary_u(n - 1, t_old)?;
            ub_new_lo = self.boundary_u(0, t_new)?;
            ub_new_hi = self.boundary_u(n - 1, t_new)?;
        }
        let explicit = (1.0 - scheme.theta) * scheme.tau;
        let implicit = scheme.theta * scheme.tau;
        let mut rhs: Vec<f64> = (self.first..=self.last)
            .map(|i| {
                let mut s = 0.0;
                if i > 0 {
                    s += self.cond[i - 1] * (u[i - 1] - u[i]);
                }
                if i + 1 < n {
                    s += self.cond[i] * (u[i + 1] - u[i]);
                }
                self.weight[i - self.first] * c[i] + explicit * s
            })
            .collect();
        if self.first > 0 {
            let m = rhs.len();
            rhs[0] += implicit * self.cond[0] * ub_new_lo;
            rhs[m - 1] += implicit * self.cond[n - 2] * ub_new_hi;
        }
        let mut sol = scheme.factor.solve(&rhs);
        let norm = rhs.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
        let residual = |s: &[f64]| -> Vec<f64> { scheme.matrix.apply(s).iter().zip(&rhs).map(|(a, b)| b - a).collect() };
        let worst = |r: &[f64]| r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut r = residual(&sol);
        if worst(&r) > self.cfg.tolerance * norm {
            let corr = scheme.factor.solve(&r);
            sol.iter_mut().zip(&corr).for_each(|(s, d)| *s += d);
            r = residual(&sol);
            if worst(&r) > self.cfg.tolerance * norm {
                return Err(Error::SingularSystem(format!(
                    "tridiagonal residual {:e} exceeds tolerance {:e}",
                    worst(&r) / norm,
                    self.cfg.tolerance
                )));
            }
        }
        let mut out = vec![0.0; n];
        out[self.first..=self.last].copy_from_slice(&sol);
        if self.first > 0 {
            out[0] = self.boundary_value(0, t_new)?;
            out[n - 1] = self.boundary_value(n - 1, t_new)?;
        }
        Ok(out)
    }

    fn boundary_value(&self, i: usize, t: f64) -> Result<f64> {
        match &self.cfg.bc {
            BoundaryCondition::DirichletAnalytic(g) => Ok(g(self.x[i], t)),
            _ => Ok(0.0),
        }
    }

    fn check_state(&self, state: &ConcentrationField) -> Result<()> {
        let n = self.x.len();
        let span = self.x[n - 1] - self.x[0];
        if state.len() != n || state.x().iter().zip(&self.x).any(|(a, b)| (a - b).abs() > 1e-12 * span) {
            return Err(Error::GridMismatch("state grid differs from the stepper grid".into()));
        }
        Ok(())
    }

    fn finish(&self, before: &ConcentrationField, values: Vec<f64>, time: f64) -> Result<ConcentrationField> {
        let max_in = before.max_abs();
        let nonneg_in = before.values().iter().all(|&v| v >= -NEG_TOL * max_in);
        if nonneg_in {
            let max_out = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if let Some((i, v)) = values.iter().enumerate().find(|(_, &v)| v < -NEG_TOL * max_out) {
                return Err(Error::IntegrityError(format!(
                    "concentration {v:e} at node {i} (x = {}) went negative",
                    self.x[i]
                )));
            }
        }
        before.with_values(values, time)
    }

    /// One Crank–Nicolson step of size `dt`.
    pub fn step(&self, state: &ConcentrationField) -> Result<ConcentrationField> {
        self.check_state(state)?;
        let t = state.time();
        let v = self.advance(&self.cn, state.values(), t)?;
        self.finish(state, v, t + self.cfg.dt)
    }

    /// One step of size `dt` made of two backward-Euler half steps.
    pub fn damped_step(&self, state: &ConcentrationField) -> Result<ConcentrationField> {
        self.check_state(state)?;
        let scheme = match &self.startup {
            Some(s) => s,
            None => return self.step(state),
        };
        let t = state.time();
        let half = self.advance(scheme, state.values(), t)?;
        let v = self.advance(scheme, &half, t + scheme.tau)?;
        self.finish(state, v, t + self.cfg.dt)
    }

    /// Trapezoid mass of a state on this grid.
    pub fn mass(&self, state: &ConcentrationField) -> f64 {
        crate::field::total_mass(state)
    }
}

/// One Crank–Nicolson step (startup damping is not applied).
pub fn step(
    profile: &ChannelProfile,
    model: &DiffusionModel,
    state: &ConcentrationField,
    cfg: &SolverConfig,
) -> Result<ConcentrationField> {
    Stepper::new(profile, model, state.x(), cfg.clone())?.step(state)
}

/// Evolves `c0` to `t_final` and returns the states at the requested
/// snapshot times (each rounded to the nearest step). An empty schedule
/// returns the final state only.
pub fn evolve(
    profile: &ChannelProfile,
    model: &DiffusionModel,
    c0: &ConcentrationField,
    t_final: f64,
    snapshots: &[f64],
    cfg: &SolverConfig,
) -> Result<Vec<ConcentrationField>> {
    let stepper = Stepper::new(profile, model, c0.x(), cfg.clone())?;
    evolve_with(&stepper, c0, t_final, snapshots)
}

/// [`evolve`] with a prepared [`Stepper`].
pub fn evolve_with(
    stepper: &Stepper,
    c0: &ConcentrationField,
    t_final: f64,
    snapshots: &[f64],
) -> Result<Vec<ConcentrationField>> {
    if !(t_final >= 0.0) {
        return Err(Error::InvalidParameter(format!("t_final must be non-negative, got {t_final}")));
    }
    let dt = stepper.cfg.dt;
    let total = (t_final / dt).round() as usize;
    let mut wanted: Vec<usize> = if snapshots.is_empty() {
        vec![total]
    } else {
        snapshots
            .iter()
            .map(|&s| {
                if !(s >= 0.0 && s <= t_final * (1.0 + 1e-12)) {
                    Err(Error::InvalidParameter(format!("snapshot time {s} outside [0, {t_final}]")))
                } else {
                    Ok(((s / dt).round() as usize).min(total))
                }
            })
            .collect::<Result<Vec<_>>>()?
    };
    wanted.sort_unstable();
    wanted.dedup();

    let t0 = c0.time();
    let mut out = Vec::with_capacity(wanted.len());
    let mut state = c0.clone();
    let mut k = 0;
    for &target in &wanted {
        while k < target {
            state = if k < stepper.cfg.startup_steps {
                stepper.damped_step(&state)?
            } else {
                stepper.step(&state)?
            };
            k += 1;
        }
        // report times on the step lattice rather than accumulated sums
        let values = state.values().to_vec();
        out.push(state.with_values(values, t0 + k as f64 * dt)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::total_mass;
    use std::f64::consts::PI;

    fn gaussian(lo: f64, hi: f64, n: usize, center: f64, width: f64) -> ConcentrationField {
        ConcentrationField::from_fn(lo, hi, n, 0.0, |x| (-(x - center).powi(2) / (4.0 * width * width)).exp()).unwrap()
    }

    #[test]
    fn no_flux_step_conserves_mass() {
        let p = ChannelProfile::conical(0.7).unwrap();
        let m = DiffusionModel::reguera_rubi(1.0).unwrap();
        let c = gaussian(0.0, 8.0, 401, 3.0, 0.8);
        let cfg = SolverConfig::new(1e-2, BoundaryCondition::NoFlux).unwrap();
        let next = step(&p, &m, &c, &cfg).unwrap();
        let (m0, m1) = (total_mass(&c), total_mass(&next));
        assert!((m1 - m0).abs() <= 1e-12 * m0);
        assert!((next.time() - 1e-2).abs() < 1e-18);
    }

    #[test]
    fn equilibrium_is_a_fixed_point() {
        let p = ChannelProfile::throat(0.6, 0.1).unwrap();
        let m = DiffusionModel::constant(1.3).unwrap();
        let c = ConcentrationField::try_from_fn(-2.0, 3.0, 201, 0.0, |x| p.area(x).map(|a| 2.5 * a)).unwrap();
        let cfg = SolverConfig::new(0.05, BoundaryCondition::NoFlux).unwrap();
        let next = step(&p, &m, &c, &cfg).unwrap();
        for (a, b) in c.values().iter().zip(next.values()) {
            assert!((a - b).abs() <= 1e-10);
        }
    }

    #[test]
    fn cylinder_variance_grows_linearly() {
        let p = ChannelProfile::cylinder(1.0).unwrap();
        let m = DiffusionModel::constant(0.8).unwrap();
        let c0 = gaussian(-15.0, 15.0, 1201, 0.0, 0.7);
        let cfg = SolverConfig::new(1e-3, BoundaryCondition::NoFlux).unwrap();
        let t = 1.0;
        let out = evolve(&p, &m, &c0, t, &[], &cfg).unwrap();
        let second = |f: &ConcentrationField| {
            let w: Vec<f64> = f.x().iter().zip(f.values()).map(|(x, c)| x * x * c).collect();
            total_mass(&f.with_values(w, 0.0).unwrap()) / total_mass(f)
        };
        let growth = second(&out[0]) - second(&c0);
        assert!((growth - 2.0 * 0.8 * t).abs() < 1e-6, "{growth}");
    }

    #[test]
    fn zero_final_time_returns_initial_state() {
        let p = ChannelProfile::cylinder(1.0).unwrap();
        let m = DiffusionModel::constant(1.0).unwrap();
        let c0 = gaussian(-5.0, 5.0, 101, 0.0, 1.0);
        let cfg = SolverConfig::new(0.01, BoundaryCondition::DirichletZero).unwrap();
        let out = evolve(&p, &m, &c0, 0.0, &[], &cfg).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0], c0);
    }

    #[test]
    fn split_runs_are_bitwise_identical() {
        let p = ChannelProfile::conical(1.0).unwrap();
        let m = DiffusionModel::constant(1.0).unwrap();
        let c0 = gaussian(0.0, 6.0, 301, 2.5, 0.6);
        let cfg = SolverConfig::new(2e-3, BoundaryCondition::NoFlux).unwrap();
        let full = evolve(&p, &m, &c0, 0.5, &[], &cfg).unwrap().pop().unwrap();
        let half = evolve(&p, &m, &c0, 0.25, &[], &cfg).unwrap().pop().unwrap();
        let rest = evolve(&p, &m, &half, 0.25, &[], &cfg).unwrap().pop().unwrap();
        assert!(full.values().iter().zip(rest.values()).all(|(a, b)| a.to_bits() == b.to_bits()));
        assert!((full.time() - rest.time()).abs() < 1e-15);
    }

    #[test]
    fn snapshots_follow_the_schedule() {
        let p = ChannelProfile::cylinder(1.0).unwrap();
        let m = DiffusionModel::constant(1.0).unwrap();
        let c0 = gaussian(-5.0, 5.0, 101, 0.0, 1.0);
        let cfg = SolverConfig::new(0.01, BoundaryCondition::NoFlux).unwrap();
        let out = evolve(&p, &m, &c0, 0.5, &[0.5, 0.0, 0.2], &cfg).unwrap();
        let times: Vec<f64> = out.iter().map(|s| s.time()).collect();
        assert_eq!(times.len(), 3);
        assert!((times[1] - 0.2).abs() < 1e-15 && (times[2] - 0.5).abs() < 1e-15);
        assert!(evolve(&p, &m, &c0, 0.5, &[0.7], &cfg).is_err());
    }

    #[test]
    fn throat_eigenprofile_decays_uniformly() {
        // e^{αx/2} is an exact decaying mode: C = e^{−D0 α² t/4} e^{αx/2}.
        let (alpha, d0) = (1.0, 1.0);
        let p = ChannelProfile::throat(alpha, 0.0).unwrap();
        let m = DiffusionModel::constant(d0).unwrap();
        let exact = move |x: f64, t: f64| (-d0 * alpha * alpha * t / 4.0).exp() * (0.5 * alpha * x).exp();
        let c0 = ConcentrationField::from_fn(-3.0, 3.0, 601, 0.0, |x| exact(x, 0.0)).unwrap();
        let cfg = SolverConfig::new(1e-3, BoundaryCondition::DirichletAnalytic(Arc::new(exact))).unwrap();
        let times = [0.25, 0.5, 0.75, 1.0];
        let out = evolve(&p, &m, &c0, 1.0, &times, &cfg).unwrap();
        let logs: Vec<f64> = out.iter().map(|s| total_mass(s).ln()).collect();
        let m0 = total_mass(&c0).ln();
        for (t, l) in times.iter().zip(&logs) {
            let rate = (m0 - l) / t;
            assert!((rate - d0 * alpha * alpha / 4.0).abs() < 1e-4 * 0.25, "{rate}");
        }
    }

    #[test]
    fn walls_are_excluded_under_dirichlet_zero() {
        let p = ChannelProfile::sinusoidal(1.0, 1.0, 0).unwrap();
        let m = DiffusionModel::constant(1.0).unwrap();
        let c0 = ConcentrationField::from_fn(0.0, PI, 201, 0.0, |x| x.sin().powi(2) * (-(x - PI / 2.0).powi(2)).exp()).unwrap();
        let cfg = SolverConfig::new(1e-3, BoundaryCondition::DirichletZero).unwrap();
        let next = step(&p, &m, &c0, &cfg).unwrap();
        assert_eq!((next.values()[0], next.values()[200]), (0.0, 0.0));
        let noflux = SolverConfig::new(1e-3, BoundaryCondition::NoFlux).unwrap();
        assert!(matches!(step(&p, &m, &c0, &noflux), Err(Error::SingularSystem(_))));
    }

    #[test]
    fn startup_damping_keeps_incompatible_data_positive() {
        // Nonzero data against zero Dirichlet ends.
        let p = ChannelProfile::cylinder(1.0).unwrap();
        let m = DiffusionModel::constant(1.0).unwrap();
        let c0 = ConcentrationField::from_fn(0.0, 1.0, 401, 0.0, |_| 1.0).unwrap();
        let raw = SolverConfig::new(1e-2, BoundaryCondition::DirichletZero).unwrap();
        assert!(matches!(evolve(&p, &m, &c0, 0.05, &[], &raw), Err(Error::IntegrityError(_))));
        let damped = raw.with_startup_steps(4);
        let out = evolve(&p, &m, &c0, 0.05, &[], &damped).unwrap();
        assert!(out[0].values().iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn rejects_bad_config() {
        assert!(SolverConfig::new(0.0, BoundaryCondition::NoFlux).is_err());
        assert!(SolverConfig::new(-1.0, BoundaryCondition::NoFlux).is_err());
    }
}
