//! Eigenfunction-expansion propagator.
//!
//! `H = P² + V` is discretized on the map's uniform `y` grid with
//! Dirichlet-zero ends. The solution is
//! `C(y, t) = Σ a_n e^{f(y)} e^{−E_n t} ψ_n(y)` with `a_n = ⟨ψ_n, e^{−f} C0⟩`.

use crate::error::{Error, Result};
use crate::field::{uniform_grid, ConcentrationField};
use crate::interp::resample;
use crate::mapping::SchrodingerMap;
use crate::tridiag::lowest_eigenpairs;

/// Largest basis chosen automatically by the tail criterion.
pub const MAX_AUTO_MODES: usize = 256;
/// Parseval tail, relative to `‖φ0‖²`, below which automatic truncation stops.
pub const DEFAULT_TAIL_TOL: f64 = 1e-10;

/// Truncation boundary condition. Only Dirichlet-zero is supported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SpectralBoundary {
    #[default]
    DirichletZero,
}

/// Lowest eigenpairs of `P² + V` on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralBasis {
    y: Vec<f64>,
    energies: Vec<f64>,
    /// `modes[n][i] = ψ_n(y_i)`, zero at both end nodes.
    modes: Vec<Vec<f64>>,
    dy: f64,
}

/// Builds the basis from the map's `y` grid and potential.
pub fn build_basis(map: &SchrodingerMap, n_modes: usize, bc: SpectralBoundary) -> Result<SpectralBasis> {
    build_basis_from_potential(map.y_grid(), map.potential(), n_modes, bc)
}

/// Builds the basis for an arbitrary potential sampled on a uniform grid.
pub fn build_basis_from_potential(
    y: &[f64],
    potential: &[f64],
    n_modes: usize,
    bc: SpectralBoundary,
) -> Result<SpectralBasis> {
    let SpectralBoundary::DirichletZero = bc;
    let n = y.len();
    if n < 3 {
        return Err(Error::GridTooSmall { needed: 3, got: n });
    }
    if potential.len() != n {
        return Err(Error::GridMismatch(format!("{} potential samples on {} nodes", potential.len(), n)));
    }
    if n_modes == 0 || n_modes > n - 2 {
        return Err(Error::InvalidParameter(format!(
            "n_modes must lie in 1..={} for {} nodes, got {n_modes}",
            n - 2,
            n
        )));
    }
    // validates uniformity
    ConcentrationField::new(y.to_vec(), potential.to_vec(), 0.0)?;
    let h = (y[n - 1] - y[0]) / (n - 1) as f64;
    let inv_h2 = 1.0 / (h * h);
    let diag: Vec<f64> = potential[1..n - 1].iter().map(|v| 2.0 * inv_h2 + v).collect();
    let off = vec![-inv_h2; n - 3];
    let pairs = lowest_eigenpairs(&diag, &off, n_modes)?;
    let scale = 1.0 / h.sqrt();
    let modes = pairs
        .vectors
        .into_iter()
        .map(|v| {
            let mut psi = Vec::with_capacity(n);
            psi.push(0.0);
            psi.extend(v.into_iter().map(|c| c * scale));
            psi.push(0.0);
            psi
        })
        .collect();
    Ok(SpectralBasis { y: y.to_vec(), energies: pairs.values, modes, dy: h })
}

impl SpectralBasis {
    pub fn y_grid(&self) -> &[f64] {
        &self.y
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn modes(&self) -> &[Vec<f64>] {
        &self.modes
    }

    pub fn n_modes(&self) -> usize {
        self.energies.len()
    }

    pub fn dy(&self) -> f64 {
        self.dy
    }

    /// `⟨ψ_n, u⟩` by the trapezoid rule on the grid.
    pub fn inner(&self, n: usize, u: &[f64]) -> f64 {
        // ψ_n vanishes at both ends, so the trapezoid rule is a plain sum.
        self.modes[n].iter().zip(u).map(|(p, v)| p * v).sum::<f64>() * self.dy
    }

    /// Keeps only the lowest `n` modes.
    pub fn truncated(&self, n: usize) -> Result<SpectralBasis> {
        if n == 0 || n > self.n_modes() {
            return Err(Error::InvalidParameter(format!("cannot keep {n} of {} modes", self.n_modes())));
        }
        Ok(SpectralBasis {
            y: self.y.clone(),
            energies: self.energies[..n].to_vec(),
            modes: self.modes[..n].to_vec(),
            dy: self.dy,
        })
    }

    /// Coefficients of `φ` given directly on the `y` grid.
    pub fn project_phi(&self, phi: &[f64]) -> Result<Vec<f64>> {
        if phi.len() != self.y.len() {
            return Err(Error::GridMismatch(format!("{} samples on a {}-node basis", phi.len(), self.y.len())));
        }
        Ok((0..self.n_modes()).map(|n| self.inner(n, phi)).collect())
    }

    /// `Σ a_n e^{−E_n t} ψ_n` on the `y` grid.
    pub fn evolve_phi(&self, coeffs: &[f64], t: f64) -> Result<Vec<f64>> {
        if !(t >= 0.0) {
            return Err(Error::NonPositiveTime(t));
        }
        if coeffs.len() > self.n_modes() {
            return Err(Error::InvalidParameter(format!(
                "{} coefficients for a {}-mode basis",
                coeffs.len(),
                self.n_modes()
            )));
        }
        let mut out = vec![0.0; self.y.len()];
        for (n, &a) in coeffs.iter().enumerate() {
            let w = a * (-self.energies[n] * t).exp();
            for (o, p) in out.iter_mut().zip(&self.modes[n]) {
                *o += w * p;
            }
        }
        Ok(out)
    }
}

/// `φ0 = e^{−f} C0` on the map's nodes. `c0` is resampled when its grid is
/// not the map's `x` table.
pub fn transformed_initial(map: &SchrodingerMap, c0: &ConcentrationField) -> Result<Vec<f64>> {
    let xs = map.x_of_y();
    let on_nodes = c0.len() == xs.len()
        && c0
            .x()
            .iter()
            .zip(xs)
            .all(|(a, b)| (a - b).abs() <= 1e-12 * (c0.hi() - c0.lo()));
    let values = if on_nodes {
        c0.values().to_vec()
    } else {
        resample(c0.x(), c0.values(), xs)?
    };
    Ok(values.iter().zip(map.f()).map(|(c, f)| c * (-f).exp()).collect())
}

/// Expansion coefficients `a_n = ⟨ψ_n, e^{−f} C0⟩`.
pub fn project_initial(basis: &SpectralBasis, map: &SchrodingerMap, c0: &ConcentrationField) -> Result<Vec<f64>> {
    check_basis(basis, map)?;
    basis.project_phi(&transformed_initial(map, c0)?)
}

fn check_basis(basis: &SpectralBasis, map: &SchrodingerMap) -> Result<()> {
    if basis.y.len() != map.len() || (basis.y[0] - map.y_grid()[0]).abs() > 1e-12 * map.dy().max(1.0) {
        return Err(Error::GridMismatch("basis was not built on this map".into()));
    }
    Ok(())
}

/// Evolves the expansion to time `t` and returns `C` on a uniform `x` grid
/// spanning the map, with as many nodes as the map.
pub fn propagate(basis: &SpectralBasis, map: &SchrodingerMap, coeffs: &[f64], t: f64) -> Result<ConcentrationField> {
    check_basis(basis, map)?;
    let phi = basis.evolve_phi(coeffs, t)?;
    let c: Vec<f64> = phi.iter().zip(map.f()).map(|(p, f)| p * f.exp()).collect();
    let (lo, hi) = map.x_bounds();
    if map.x_is_uniform() {
        return ConcentrationField::new(map.x_of_y().to_vec(), c, t);
    }
    let x = uniform_grid(lo, hi, map.len());
    let values = resample(map.x_of_y(), &c, &x)?;
    ConcentrationField::new(x, values, t)
}

/// Smallest `N` whose Parseval tail `‖φ‖² − Σ_{n<N} a_n²` is below
/// `tol·‖φ‖²`, or `None` if the supplied coefficients never reach it.
pub fn modes_for_tail(coeffs: &[f64], phi_norm2: f64, tol: f64) -> Option<usize> {
    let mut captured = 0.0;
    for (n, a) in coeffs.iter().enumerate() {
        captured += a * a;
        if phi_norm2 - captured < tol * phi_norm2 {
            return Some(n + 1);
        }
    }
    None
}

/// Fraction of `∫ φ0²` lying in the outermost 1% of the interval at either
/// end (at least one cell). Dirichlet truncation is only faithful when this
/// is negligible.
pub fn boundary_tail_fraction(map: &SchrodingerMap, phi: &[f64]) -> f64 {
    let n = phi.len();
    let layer = ((n - 1) / 100).max(1);
    let sq: Vec<f64> = phi.iter().map(|p| p * p).collect();
    let trap = |s: &[f64]| -> f64 { s.windows(2).map(|w| 0.5 * (w[0] + w[1])).sum::<f64>() * map.dy() };
    let total = trap(&sq);
    if total == 0.0 {
        return 0.0;
    }
    (trap(&sq[..=layer]) + trap(&sq[n - 1 - layer..])) / total
}

/// `Σ φ_i² Δy` over interior nodes, the norm the Dirichlet basis can span.
pub fn interior_norm2(phi: &[f64], dy: f64) -> f64 {
    phi[1..phi.len() - 1].iter().map(|p| p * p).sum::<f64>() * dy
}

/// A basis sized by the tail criterion for a particular initial condition.
#[derive(Debug, Clone)]
pub struct AutoBasis {
    pub basis: SpectralBasis,
    pub coeffs: Vec<f64>,
    /// Parseval tail relative to `‖φ0‖²` at the chosen size.
    pub tail: f64,
    /// False when the cap was hit before the tail criterion was met.
    pub tail_met: bool,
}

/// Builds up to `min(cap, n − 2)` modes and keeps the smallest count meeting
/// the tail criterion.
pub fn build_basis_for_initial(
    map: &SchrodingerMap,
    c0: &ConcentrationField,
    cap: usize,
    tol: f64,
) -> Result<AutoBasis> {
    let phi = transformed_initial(map, c0)?;
    let cap = cap.min(map.len() - 2).max(1);
    let full = build_basis(map, cap, SpectralBoundary::DirichletZero)?;
    let coeffs = full.project_phi(&phi)?;
    let norm2 = interior_norm2(&phi, map.dy());
    let (n, tail_met) = match modes_for_tail(&coeffs, norm2, tol) {
        Some(n) => (n, true),
        None => (cap, false),
    };
    let captured: f64 = coeffs[..n].iter().map(|a| a * a).sum();
    let tail = if norm2 > 0.0 { ((norm2 - captured) / norm2).max(0.0) } else { 0.0 };
    Ok(AutoBasis { basis: full.truncated(n)?, coeffs: coeffs[..n].to_vec(), tail, tail_met })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{ChannelProfile, DiffusionModel};
    use crate::mapping::build_schrodinger_map;
    use std::f64::consts::PI;

    fn grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        uniform_grid(lo, hi, n)
    }

    #[test]
    fn particle_in_a_box() {
        let l = 2.0;
        let y = grid(0.0, l, 2001);
        let b = build_basis_from_potential(&y, &vec![0.0; y.len()], 6, SpectralBoundary::DirichletZero).unwrap();
        for (k, e) in b.energies().iter().enumerate() {
            let exact = ((k + 1) as f64 * PI / l).powi(2);
            assert!((e - exact).abs() <= 1e-3 * exact);
        }
        for m in 0..6 {
            for n in 0..6 {
                let ip = b.inner(m, &b.modes()[n]);
                assert!((ip - if m == n { 1.0 } else { 0.0 }).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn harmonic_oscillator_levels() {
        let y = grid(-12.0, 12.0, 4001);
        let v: Vec<f64> = y.iter().map(|t| t * t).collect();
        let b = build_basis_from_potential(&y, &v, 6, SpectralBoundary::DirichletZero).unwrap();
        for (n, e) in b.energies().iter().enumerate() {
            let exact = 2.0 * n as f64 + 1.0;
            assert!((e - exact).abs() <= 1e-3 * exact, "{n}: {e}");
        }
    }

    #[test]
    fn constant_shift_moves_levels() {
        let y = grid(-5.0, 5.0, 401);
        let v: Vec<f64> = y.iter().map(|t| 0.3 * t * t).collect();
        let shifted: Vec<f64> = v.iter().map(|t| t + 0.75).collect();
        let a = build_basis_from_potential(&y, &v, 1, SpectralBoundary::DirichletZero).unwrap();
        let b = build_basis_from_potential(&y, &shifted, 1, SpectralBoundary::DirichletZero).unwrap();
        assert!((b.energies()[0] - a.energies()[0] - 0.75).abs() < 1e-10);
    }

    #[test]
    fn second_order_convergence_of_levels() {
        let level = |n_pts: usize| {
            let y = grid(-8.0, 8.0, n_pts);
            let v: Vec<f64> = y.iter().map(|t| t * t).collect();
            build_basis_from_potential(&y, &v, 6, SpectralBoundary::DirichletZero).unwrap().energies().to_vec()
        };
        let (coarse, fine) = (level(401), level(801));
        for n in 0..6 {
            let exact = 2.0 * n as f64 + 1.0;
            let r = (coarse[n] - exact).abs() / (fine[n] - exact).abs();
            assert!((3.5..4.5).contains(&r), "level {n}: ratio {r}");
        }
    }

    #[test]
    fn rejects_bad_sizes() {
        let y = grid(0.0, 1.0, 5);
        let v = vec![0.0; 5];
        assert!(build_basis_from_potential(&y, &v, 4, SpectralBoundary::DirichletZero).is_err());
        assert!(matches!(
            build_basis_from_potential(&y[..2], &v[..2], 1, SpectralBoundary::DirichletZero),
            Err(Error::GridTooSmall { .. })
        ));
    }

    fn cone_setup(n: usize) -> (SchrodingerMap, SpectralBasis) {
        let p = ChannelProfile::conical(1.0).unwrap();
        let m = DiffusionModel::constant(1.0).unwrap();
        let map = build_schrodinger_map(&m, &p, 0.0, (0.0, 12.0), n).unwrap();
        let basis = build_basis(&map, 40, SpectralBoundary::DirichletZero).unwrap();
        (map, basis)
    }

    #[test]
    fn projection_of_modes() {
        let (map, basis) = cone_setup(801);
        let to_field = |phi: Vec<f64>| {
            let c: Vec<f64> = phi.iter().zip(map.f()).map(|(p, f)| p * f.exp()).collect();
            ConcentrationField::new(map.x_of_y().to_vec(), c, 0.0).unwrap()
        };
        let a = project_initial(&basis, &map, &to_field(basis.modes()[3].clone())).unwrap();
        for (n, an) in a.iter().enumerate() {
            assert!((an - if n == 3 { 1.0 } else { 0.0 }).abs() < 1e-8);
        }
        let mix: Vec<f64> = basis.modes()[0].iter().zip(&basis.modes()[1]).map(|(p, q)| (p + q) / 2f64.sqrt()).collect();
        let a = project_initial(&basis, &map, &to_field(mix)).unwrap();
        assert!((a[0] - 0.5f64.sqrt()).abs() < 1e-8 && (a[1] - 0.5f64.sqrt()).abs() < 1e-8);
    }

    #[test]
    fn single_mode_decays_without_changing_shape() {
        let (map, basis) = cone_setup(401);
        let mut coeffs = vec![0.0; 40];
        coeffs[2] = 1.0;
        let c0 = propagate(&basis, &map, &coeffs, 0.0).unwrap();
        let c1 = propagate(&basis, &map, &coeffs, 0.3).unwrap();
        let factor = (-basis.energies()[2] * 0.3).exp();
        for (a, b) in c0.values().iter().zip(c1.values()) {
            assert!((b - factor * a).abs() < 1e-14);
        }
    }

    fn gaussian_on_cone(map: &SchrodingerMap) -> ConcentrationField {
        ConcentrationField::from_fn(0.0, 12.0, map.len(), 0.0, |x| (1.0 + x) * (-(x - 6.0).powi(2)).exp()).unwrap()
    }

    #[test]
    fn parseval_tail_and_semigroup() {
        let p = ChannelProfile::conical(1.0).unwrap();
        let m = DiffusionModel::constant(1.0).unwrap();
        let map = build_schrodinger_map(&m, &p, 0.0, (0.0, 12.0), 1201).unwrap();
        let c0 = gaussian_on_cone(&map);
        let auto = build_basis_for_initial(&map, &c0, MAX_AUTO_MODES, DEFAULT_TAIL_TOL).unwrap();
        assert!(auto.tail_met && auto.tail < 1e-10);
        let phi = transformed_initial(&map, &c0).unwrap();
        let norm2 = interior_norm2(&phi, map.dy());
        let captured: f64 = auto.coeffs.iter().map(|a| a * a).sum();
        assert!((norm2 - captured).abs() < 1e-6 * norm2);

        let (t1, t2) = (0.2, 0.3);
        let direct = propagate(&auto.basis, &map, &auto.coeffs, t1 + t2).unwrap();
        let mid = propagate(&auto.basis, &map, &auto.coeffs, t1).unwrap();
        let a_mid = project_initial(&auto.basis, &map, &mid).unwrap();
        let twice = propagate(&auto.basis, &map, &a_mid, t2).unwrap();
        let scale = direct.max_abs();
        for (a, b) in direct.values().iter().zip(twice.values()) {
            assert!((a - b).abs() < 1e-8 * scale);
        }
    }

    #[test]
    fn coefficient_norm_is_non_increasing() {
        let (map, basis) = cone_setup(401);
        let a = project_initial(&basis, &map, &gaussian_on_cone(&map)).unwrap();
        let norm = |t: f64| {
            a.iter().zip(basis.energies()).map(|(c, e)| (c * (-e * t).exp()).powi(2)).sum::<f64>().sqrt()
        };
        let mut prev = norm(0.0);
        for k in 1..20 {
            let cur = norm(0.1 * k as f64);
            assert!(cur <= prev);
            prev = cur;
        }
    }

    #[test]
    fn tail_fraction_flags_wide_data() {
        let (map, _) = cone_setup(401);
        let narrow = transformed_initial(&map, &gaussian_on_cone(&map)).unwrap();
        assert!(boundary_tail_fraction(&map, &narrow) < 1e-12);
        let wide = ConcentrationField::from_fn(0.0, 12.0, 401, 0.0, |x| (1.0 + x) * (-(x - 1.0).powi(2) / 4.0).exp()).unwrap();
        let wide = transformed_initial(&map, &wide).unwrap();
        assert!(boundary_tail_fraction(&map, &wide) > 1e-3);
    }
}
