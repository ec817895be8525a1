//! C ABI over `fickjacobs`.
//!
//! Profiles, diffusion models, maps and bases live behind opaque handles and
//! are released with the matching `fj_*_free`. Every fallible call returns an
//! `FjStatus`; on failure `fj_last_error_message` describes it on the same
//! thread. Results are written through out-pointers, which are left untouched
//! on failure.

#![allow(clippy::missing_safety_doc, clippy::neg_cmp_op_on_partial_ord)]

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use fickjacobs::analytic::{self, EigenmodeInit, GaussianInit, Prefactor};
use fickjacobs::fdsolver::{self, BoundaryCondition, SolverConfig};
use fickjacobs::mapping::{self, build_schrodinger_map};
use fickjacobs::spectral::{self, SpectralBoundary};
use fickjacobs::{ChannelProfile, ConcentrationField, DiffusionModel, Error, SchrodingerMap, SpectralBasis};

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FjStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidParameter = 2,
    OutOfDomain = 3,
    OutOfRange = 4,
    NonPositiveArea = 5,
    NonPositiveDiffusion = 6,
    NonPositiveTime = 7,
    NegativeCurvature = 8,
    GridTooSmall = 9,
    GridMismatch = 10,
    QuadratureFailure = 11,
    ConvergenceFailure = 12,
    SingularSystem = 13,
    IntegrityError = 14,
    BufferTooSmall = 15,
    Panic = 99,
}

impl From<&Error> for FjStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::OutOfDomain { .. } => FjStatus::OutOfDomain,
            Error::NonPositiveArea { .. } => FjStatus::NonPositiveArea,
            Error::NonPositiveDiffusion { .. } => FjStatus::NonPositiveDiffusion,
            Error::QuadratureFailure { .. } => FjStatus::QuadratureFailure,
            Error::OutOfRange { .. } => FjStatus::OutOfRange,
            Error::GridTooSmall { .. } => FjStatus::GridTooSmall,
            Error::GridMismatch(_) => FjStatus::GridMismatch,
            Error::NonPositiveTime(_) => FjStatus::NonPositiveTime,
            Error::NegativeCurvature(_) => FjStatus::NegativeCurvature,
            Error::ConvergenceFailure(_) => FjStatus::ConvergenceFailure,
            Error::SingularSystem(_) => FjStatus::SingularSystem,
            Error::IntegrityError(_) => FjStatus::IntegrityError,
            Error::InvalidParameter(_) => FjStatus::InvalidParameter,
        }
    }
}

/// Boundary conditions available to `fj_evolve`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FjBoundary {
    NoFlux = 0,
    DirichletZero = 1,
}

/// Normalization of closed-form solutions.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FjPrefactor {
    /// The printed time-dependent formula.
    Evolved = 0,
    /// Rescaled so the `t = 0` value equals the initial condition.
    Initial = 1,
}

impl From<FjPrefactor> for Prefactor {
    fn from(p: FjPrefactor) -> Self {
        match p {
            FjPrefactor::Evolved => Prefactor::Evolved,
            FjPrefactor::Initial => Prefactor::Initial,
        }
    }
}

/// Opaque channel geometry.
pub struct FjProfile(ChannelProfile);
/// Opaque diffusion model.
pub struct FjDiffusion(DiffusionModel);
/// Opaque transformed problem on a uniform `y` grid.
pub struct FjMap(SchrodingerMap);
/// Opaque eigenbasis of a map.
pub struct FjBasis(SpectralBasis);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

enum Failure {
    Lib(Error),
    Null(&'static str),
    Buffer { needed: usize, got: usize },
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

type Outcome = Result<(), Failure>;

/// Runs `body`, converting errors and panics into a status.
fn guard(body: impl FnOnce() -> Outcome) -> FjStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => FjStatus::Ok,
        Ok(Err(Failure::Lib(e))) => {
            set_error(e.to_string());
            FjStatus::from(&e)
        }
        Ok(Err(Failure::Null(name))) => {
            set_error(format!("`{name}` is null"));
            FjStatus::NullPointer
        }
        Ok(Err(Failure::Buffer { needed, got })) => {
            set_error(format!("buffer holds {got} values, {needed} needed"));
            FjStatus::BufferTooSmall
        }
        Err(_) => {
            set_error("panic inside fickjacobs".into());
            FjStatus::Panic
        }
    }
}

unsafe fn get<'a, T>(p: *const T, name: &'static str) -> Result<&'a T, Failure> {
    unsafe { p.as_ref() }.ok_or(Failure::Null(name))
}

unsafe fn out<'a, T>(p: *mut T, name: &'static str) -> Result<&'a mut T, Failure> {
    unsafe { p.as_mut() }.ok_or(Failure::Null(name))
}

unsafe fn slice<'a>(p: *const f64, len: usize, name: &'static str) -> Result<&'a [f64], Failure> {
    if p.is_null() {
        return Err(Failure::Null(name));
    }
    Ok(unsafe { std::slice::from_raw_parts(p, len) })
}

unsafe fn copy_out(src: &[f64], dst: *mut f64, len: usize, name: &'static str) -> Outcome {
    if dst.is_null() {
        return Err(Failure::Null(name));
    }
    if len < src.len() {
        return Err(Failure::Buffer { needed: src.len(), got: len });
    }
    unsafe { ptr::copy_nonoverlapping(src.as_ptr(), dst, src.len()) };
    Ok(())
}

fn boxed<T>(value: T, dst: *mut *mut T, name: &'static str) -> Outcome {
    let slot = unsafe { out(dst, name)? };
    *slot = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn free<T>(p: *mut T) {
    if !p.is_null() {
        drop(unsafe { Box::from_raw(p) });
    }
}

/// Message for the last failure on this thread, or null. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn fj_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Static name of a status code.
#[no_mangle]
pub extern "C" fn fj_status_name(status: FjStatus) -> *const c_char {
    let name: &'static [u8] = match status {
        FjStatus::Ok => b"ok\0",
        FjStatus::NullPointer => b"null pointer\0",
        FjStatus::InvalidParameter => b"invalid parameter\0",
        FjStatus::OutOfDomain => b"out of domain\0",
        FjStatus::OutOfRange => b"out of range\0",
        FjStatus::NonPositiveArea => b"non-positive area\0",
        FjStatus::NonPositiveDiffusion => b"non-positive diffusion\0",
        FjStatus::NonPositiveTime => b"non-positive time\0",
        FjStatus::NegativeCurvature => b"negative curvature\0",
        FjStatus::GridTooSmall => b"grid too small\0",
        FjStatus::GridMismatch => b"grid mismatch\0",
        FjStatus::QuadratureFailure => b"quadrature failure\0",
        FjStatus::ConvergenceFailure => b"convergence failure\0",
        FjStatus::SingularSystem => b"singular system\0",
        FjStatus::IntegrityError => b"integrity error\0",
        FjStatus::BufferTooSmall => b"buffer too small\0",
        FjStatus::Panic => b"panic\0",
    };
    name.as_ptr().cast()
}

/// Crate version as a static string.
#[no_mangle]
pub extern "C" fn fj_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

// Geometry.

#[no_mangle]
pub unsafe extern "C" fn fj_profile_conical(lambda: f64, profile: *mut *mut FjProfile) -> FjStatus {
    guard(|| boxed(FjProfile(ChannelProfile::conical(lambda)?), profile, "profile"))
}

#[no_mangle]
pub unsafe extern "C" fn fj_profile_throat(alpha: f64, beta: f64, profile: *mut *mut FjProfile) -> FjStatus {
    guard(|| boxed(FjProfile(ChannelProfile::throat(alpha, beta)?), profile, "profile"))
}

#[no_mangle]
pub unsafe extern "C" fn fj_profile_sinusoidal(
    amplitude: f64,
    gamma: f64,
    cell: i64,
    profile: *mut *mut FjProfile,
) -> FjStatus {
    guard(|| boxed(FjProfile(ChannelProfile::sinusoidal(amplitude, gamma, cell)?), profile, "profile"))
}

#[no_mangle]
pub unsafe extern "C" fn fj_profile_gaussian_area(a: f64, b: f64, c: f64, profile: *mut *mut FjProfile) -> FjStatus {
    guard(|| boxed(FjProfile(ChannelProfile::gaussian_area(a, b, c)?), profile, "profile"))
}

/// Monotone-cubic profile through `len` samples `(x[i], area[i])`.
#[no_mangle]
pub unsafe extern "C" fn fj_profile_tabulated(
    x: *const f64,
    area: *const f64,
    len: usize,
    profile: *mut *mut FjProfile,
) -> FjStatus {
    guard(|| {
        let (x, area) = unsafe { (slice(x, len, "x")?, slice(area, len, "area")?) };
        boxed(FjProfile(ChannelProfile::tabulated(x.to_vec(), area.to_vec())?), profile, "profile")
    })
}

#[no_mangle]
pub unsafe extern "C" fn fj_profile_free(profile: *mut FjProfile) {
    unsafe { free(profile) }
}

/// Bounds of the profile's domain; infinite ends are reported as ±inf.
#[no_mangle]
pub unsafe extern "C" fn fj_profile_domain(profile: *const FjProfile, lo: *mut f64, hi: *mut f64) -> FjStatus {
    guard(|| {
        let d = unsafe { get(profile, "profile")? }.0.domain();
        let (lo, hi) = unsafe { (out(lo, "lo")?, out(hi, "hi")?) };
        (*lo, *hi) = (d.lo, d.hi);
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn fj_profile_area(profile: *const FjProfile, x: f64, area: *mut f64) -> FjStatus {
    guard(|| {
        let p = unsafe { get(profile, "profile")? };
        *unsafe { out(area, "area")? } = p.0.area(x)?;
        Ok(())
    })
}

/// `½A″/A − ¼(A′/A)²` at `x`.
#[no_mangle]
pub unsafe extern "C" fn fj_entropic_potential(profile: *const FjProfile, x: f64, v: *mut f64) -> FjStatus {
    guard(|| {
        let p = unsafe { get(profile, "profile")? };
        *unsafe { out(v, "v")? } = p.0.entropic_potential(x)?;
        Ok(())
    })
}

// Diffusion.

#[no_mangle]
pub unsafe extern "C" fn fj_diffusion_constant(d0: f64, model: *mut *mut FjDiffusion) -> FjStatus {
    guard(|| boxed(FjDiffusion(DiffusionModel::constant(d0)?), model, "model"))
}

/// `D = d0 / √(1 + A′²/(4π A))`.
#[no_mangle]
pub unsafe extern "C" fn fj_diffusion_reguera_rubi(d0: f64, model: *mut *mut FjDiffusion) -> FjStatus {
    guard(|| boxed(FjDiffusion(DiffusionModel::reguera_rubi(d0)?), model, "model"))
}

/// `D = d0 · e^{rate·x}`.
#[no_mangle]
pub unsafe extern "C" fn fj_diffusion_exponential(d0: f64, rate: f64, model: *mut *mut FjDiffusion) -> FjStatus {
    guard(|| boxed(FjDiffusion(DiffusionModel::exponential(d0, rate)?), model, "model"))
}

#[no_mangle]
pub unsafe extern "C" fn fj_diffusion_free(model: *mut FjDiffusion) {
    unsafe { free(model) }
}

#[no_mangle]
pub unsafe extern "C" fn fj_diffusion_coefficient(
    model: *const FjDiffusion,
    profile: *const FjProfile,
    x: f64,
    d: *mut f64,
) -> FjStatus {
    guard(|| {
        let (m, p) = unsafe { (get(model, "model")?, get(profile, "profile")?) };
        *unsafe { out(d, "d")? } = m.0.diffusion_coefficient(&p.0, x)?;
        Ok(())
    })
}

// Mapping.

/// `y(x) = ∫_{x0}^{x} dz/√D(z)`.
#[no_mangle]
pub unsafe extern "C" fn fj_transform_coordinate(
    model: *const FjDiffusion,
    profile: *const FjProfile,
    x: f64,
    x0: f64,
    y: *mut f64,
) -> FjStatus {
    guard(|| {
        let (m, p) = unsafe { (get(model, "model")?, get(profile, "profile")?) };
        *unsafe { out(y, "y")? } = mapping::transform_coordinate(&m.0, &p.0, x, x0)?;
        Ok(())
    })
}

/// Transformed problem on `n_points` uniform `y` nodes covering `[x_lo, x_hi]`.
#[no_mangle]
pub unsafe extern "C" fn fj_map_build(
    model: *const FjDiffusion,
    profile: *const FjProfile,
    x0: f64,
    x_lo: f64,
    x_hi: f64,
    n_points: usize,
    map: *mut *mut FjMap,
) -> FjStatus {
    guard(|| {
        let (m, p) = unsafe { (get(model, "model")?, get(profile, "profile")?) };
        boxed(FjMap(build_schrodinger_map(&m.0, &p.0, x0, (x_lo, x_hi), n_points)?), map, "map")
    })
}

#[no_mangle]
pub unsafe extern "C" fn fj_map_free(map: *mut FjMap) {
    unsafe { free(map) }
}

/// Number of nodes, or 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn fj_map_len(map: *const FjMap) -> usize {
    unsafe { map.as_ref() }.map_or(0, |m| m.0.len())
}

/// Which per-node table of a map to copy.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FjMapColumn {
    Y = 0,
    X = 1,
    Potential = 2,
    Drift = 3,
}

/// Copies one per-node table into `buffer`, which must hold `fj_map_len` values.
#[no_mangle]
pub unsafe extern "C" fn fj_map_column(
    map: *const FjMap,
    column: FjMapColumn,
    buffer: *mut f64,
    len: usize,
) -> FjStatus {
    guard(|| {
        let m = &unsafe { get(map, "map")? }.0;
        let src = match column {
            FjMapColumn::Y => m.y_grid(),
            FjMapColumn::X => m.x_of_y(),
            FjMapColumn::Potential => m.potential(),
            FjMapColumn::Drift => m.f(),
        };
        unsafe { copy_out(src, buffer, len, "buffer") }
    })
}

/// `x(y)` by inverting the map's table.
#[no_mangle]
pub unsafe extern "C" fn fj_map_invert(map: *const FjMap, y: f64, x: *mut f64) -> FjStatus {
    guard(|| {
        let m = unsafe { get(map, "map")? };
        *unsafe { out(x, "x")? } = m.0.invert(y)?;
        Ok(())
    })
}

// Spectral.

/// Lowest `n_modes` Dirichlet eigenpairs of the map's Schrödinger operator.
#[no_mangle]
pub unsafe extern "C" fn fj_basis_build(map: *const FjMap, n_modes: usize, basis: *mut *mut FjBasis) -> FjStatus {
    guard(|| {
        let m = unsafe { get(map, "map")? };
        boxed(FjBasis(spectral::build_basis(&m.0, n_modes, SpectralBoundary::DirichletZero)?), basis, "basis")
    })
}

#[no_mangle]
pub unsafe extern "C" fn fj_basis_free(basis: *mut FjBasis) {
    unsafe { free(basis) }
}

#[no_mangle]
pub unsafe extern "C" fn fj_basis_n_modes(basis: *const FjBasis) -> usize {
    unsafe { basis.as_ref() }.map_or(0, |b| b.0.n_modes())
}

#[no_mangle]
pub unsafe extern "C" fn fj_basis_energies(basis: *const FjBasis, buffer: *mut f64, len: usize) -> FjStatus {
    guard(|| unsafe { copy_out(get(basis, "basis")?.0.energies(), buffer, len, "buffer") })
}

/// Mode `k` on the map's nodes, zero at both ends.
#[no_mangle]
pub unsafe extern "C" fn fj_basis_mode(basis: *const FjBasis, k: usize, buffer: *mut f64, len: usize) -> FjStatus {
    guard(|| {
        let b = &unsafe { get(basis, "basis")? }.0;
        let mode = b
            .modes()
            .get(k)
            .ok_or_else(|| Error::InvalidParameter(format!("mode {k} of {}", b.n_modes())))?;
        unsafe { copy_out(mode, buffer, len, "buffer") }
    })
}

/// Projects `c0` (sampled on a uniform grid over the map's `x` range) onto
/// the basis and writes `C(t)` on the same grid into `c_out`.
#[no_mangle]
pub unsafe extern "C" fn fj_spectral_propagate(
    basis: *const FjBasis,
    map: *const FjMap,
    c0: *const f64,
    len: usize,
    t: f64,
    c_out: *mut f64,
) -> FjStatus {
    guard(|| {
        let (b, m) = unsafe { (get(basis, "basis")?, get(map, "map")?) };
        let (lo, hi) = m.0.x_bounds();
        let values = unsafe { slice(c0, len, "c0")? }.to_vec();
        let c0 = ConcentrationField::new(fickjacobs::field::uniform_grid(lo, hi, len), values, 0.0)?;
        let coeffs = spectral::project_initial(&b.0, &m.0, &c0)?;
        let field = spectral::propagate(&b.0, &m.0, &coeffs, t)?;
        let values = if field.len() == len {
            field.values().to_vec()
        } else {
            fickjacobs::interp::resample(field.x(), field.values(), c0.x())?
        };
        unsafe { copy_out(&values, c_out, len, "c_out") }
    })
}

// Closed forms.

#[no_mangle]
pub unsafe extern "C" fn fj_conical_solution(
    lambda: f64,
    d0: f64,
    sigma: f64,
    a0: f64,
    prefactor: FjPrefactor,
    x: f64,
    t: f64,
    c: *mut f64,
) -> FjStatus {
    guard(|| {
        let init = GaussianInit::new(sigma, a0, prefactor.into())?;
        *unsafe { out(c, "c")? } = analytic::conical_solution(lambda, d0, &init, x, t)?;
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn fj_throat_solution(
    alpha: f64,
    beta: f64,
    d0: f64,
    sigma: f64,
    a0: f64,
    prefactor: FjPrefactor,
    x: f64,
    t: f64,
    c: *mut f64,
) -> FjStatus {
    guard(|| {
        let init = GaussianInit::new(sigma, a0, prefactor.into())?;
        *unsafe { out(c, "c")? } = analytic::throat_solution(alpha, beta, d0, &init, x, t)?;
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn fj_sinusoidal_solution(
    amplitude: f64,
    gamma: f64,
    d0: f64,
    sigma: f64,
    a0: f64,
    prefactor: FjPrefactor,
    x: f64,
    t: f64,
    c: *mut f64,
) -> FjStatus {
    guard(|| {
        let init = GaussianInit::new(sigma, a0, prefactor.into())?;
        *unsafe { out(c, "c")? } = analytic::sinusoidal_solution(amplitude, gamma, d0, &init, x, t)?;
        Ok(())
    })
}

/// Oscillator level `n` of the Gaussian-area channel `e^{a x² + b x + c}`.
#[no_mangle]
pub unsafe extern "C" fn fj_gaussian_channel_solution(
    a: f64,
    b: f64,
    d0: f64,
    n: usize,
    prefactor: FjPrefactor,
    x: f64,
    t: f64,
    c: *mut f64,
) -> FjStatus {
    guard(|| {
        let init = EigenmodeInit::new(n, a, prefactor.into())?;
        *unsafe { out(c, "c")? } = analytic::gaussian_channel_solution(b, d0, &init, x, t)?;
        Ok(())
    })
}

// Reference solver.

/// Evolves `c0`, sampled on `len` uniform nodes over `[x_lo, x_hi]`, to
/// `t_final` with the Crank–Nicolson reference solver and writes the final
/// state into `c_out`.
#[no_mangle]
pub unsafe extern "C" fn fj_evolve(
    profile: *const FjProfile,
    model: *const FjDiffusion,
    x_lo: f64,
    x_hi: f64,
    c0: *const f64,
    len: usize,
    dt: f64,
    t_final: f64,
    boundary: FjBoundary,
    startup_steps: usize,
    c_out: *mut f64,
) -> FjStatus {
    guard(|| {
        let (p, m) = unsafe { (get(profile, "profile")?, get(model, "model")?) };
        let values = unsafe { slice(c0, len, "c0")? }.to_vec();
        let grid = fickjacobs::field::uniform_grid(x_lo, x_hi, len);
        let state = ConcentrationField::new(grid, values, 0.0)?;
        let bc = match boundary {
            FjBoundary::NoFlux => BoundaryCondition::NoFlux,
            FjBoundary::DirichletZero => BoundaryCondition::DirichletZero,
        };
        let cfg = SolverConfig::new(dt, bc)?.with_startup_steps(startup_steps);
        let last = fdsolver::evolve(&p.0, &m.0, &state, t_final, &[], &cfg)?.pop().expect("final snapshot");
        unsafe { copy_out(last.values(), c_out, len, "c_out") }
    })
}

/// Trapezoid mass of `len` samples on a uniform grid over `[x_lo, x_hi]`.
#[no_mangle]
pub unsafe extern "C" fn fj_total_mass(x_lo: f64, x_hi: f64, c: *const f64, len: usize, mass: *mut f64) -> FjStatus {
    guard(|| {
        let values = unsafe { slice(c, len, "c")? }.to_vec();
        let field = ConcentrationField::new(fickjacobs::field::uniform_grid(x_lo, x_hi, len), values, 0.0)?;
        *unsafe { out(mass, "mass")? } = fickjacobs::total_mass(&field);
        Ok(())
    })
}
