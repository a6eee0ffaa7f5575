//! Classical steady state of the driven two-cavity system with the trapped
//! nanosphere.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DerivedQuantities, DriveDetuning, SystemParams, TrapMode, HBAR};

const RELAXATION: f64 = 0.5;
const MAX_ITERATIONS: usize = 10_000;
const ABS_STEP_TOL: f64 = 1e-18;
const REL_STEP_TOL: f64 = 1e-12;
const SCAN_POINTS: usize = 4096;

/// Mean-field operating point around which the probe response is linearized.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SteadyState {
    /// Trap position, m.
    pub x_ns: f64,
    /// Momentum, always zero.
    pub p_ns: f64,
    pub c1s: C64,
    pub c2s: C64,
    /// Effective mechanical frequency, rad/s.
    pub omega_n: f64,
    /// `G_n = g_n k sin(2k x_ns)`, rad/(s·m).
    pub g_coeff: f64,
    /// `G = G_n c1s`.
    pub g_eff: C64,
    /// `Δ_c = Δ_d − g_n cos²(k x_ns)`, rad/s.
    pub delta_c: f64,
    /// Drive detuning actually used, rad/s.
    pub delta_d: f64,
    /// Coulomb force balanced by the optical trap at `x_ns`, N.
    pub sigma_implied: f64,
    /// More than one fixed point exists on the principal branch.
    pub multiple_fixed_points: bool,
}

impl SteadyState {
    /// `sin(2k x_ns)`.
    pub fn sin_2kx(&self, d: &DerivedQuantities) -> f64 {
        (2.0 * d.k * self.x_ns).sin()
    }

    /// `|G|² = G_n² |c1s|²`.
    pub fn g_eff_sq(&self) -> f64 {
        self.g_eff.norm_sqr()
    }
}

/// Intracavity mean fields at drive detuning `delta_d` with the sphere's
/// cavity pull `g_n cos²(kx)` given as `pull`. Returns `(c1, c2, Δ_c)`.
pub fn mean_fields(
    d: &DerivedQuantities,
    p: &SystemParams,
    pull: f64,
    delta_d: f64,
) -> Result<(C64, C64, f64)> {
    let delta_c = delta_d - pull;
    let passive = C64::new(p.gamma, delta_c);
    if p.hop_j == 0.0 {
        return Ok((d.omega_d / passive, C64::new(0.0, 0.0), delta_c));
    }
    let active = C64::new(p.kappa, -delta_d);
    // −J² follows from the +iJ hopping terms of both field equations
    let den = passive * active - p.hop_j * p.hop_j;
    if den.norm() == 0.0 {
        return Err(Error::Singular { determinant: 0.0 });
    }
    let c1 = active * d.omega_d / den;
    let c2 = C64::new(0.0, -p.hop_j) * d.omega_d / den;
    Ok((c1, c2, delta_c))
}

fn assemble(
    d: &DerivedQuantities,
    p: &SystemParams,
    x_ns: f64,
    sin_2kx: f64,
    cos_2kx: f64,
    delta_d: f64,
) -> Result<SteadyState> {
    if cos_2kx <= 0.0 {
        return Err(Error::UnstableTrap { cos_2kx });
    }
    let cos_sq = 0.5 * (1.0 + cos_2kx);
    let (c1s, c2s, delta_c) = mean_fields(d, p, d.g_n * cos_sq, delta_d)?;
    let intensity = c1s.norm_sqr();
    let omega_n_sq = 2.0 * HBAR * d.g_n * d.k * d.k * intensity * cos_2kx / d.mass;
    if !(omega_n_sq > 0.0) || !omega_n_sq.is_finite() {
        return Err(Error::Domain(format!(
            "optical restoring force vanishes (|c1s|² = {intensity:e}, g_n = {:e})",
            d.g_n
        )));
    }
    let g_coeff = d.g_n * d.k * sin_2kx;
    Ok(SteadyState {
        x_ns,
        p_ns: 0.0,
        c1s,
        c2s,
        omega_n: omega_n_sq.sqrt(),
        g_coeff,
        g_eff: c1s * g_coeff,
        delta_c,
        delta_d,
        sigma_implied: HBAR * d.g_n * d.k * intensity * sin_2kx,
        multiple_fixed_points: false,
    })
}

/// Steady state with `sin(2k x_ns) = s` imposed. `Δ_d` follows `p.delta_d`.
pub fn solve_prescribed(d: &DerivedQuantities, p: &SystemParams, s: f64) -> Result<SteadyState> {
    if !s.is_finite() || s.abs() > 1.0 {
        return Err(Error::Domain(format!("|s| = {} exceeds 1", s.abs())));
    }
    if s < 0.0 {
        return Err(Error::Domain(format!(
            "s = {s} lies off the principal branch 0 <= 2k x_ns <= pi/2"
        )));
    }
    with_drive_detuning(p, |delta_d, p| prescribed_at(d, p, s, delta_d))
}

fn prescribed_at(d: &DerivedQuantities, p: &SystemParams, s: f64, delta_d: f64) -> Result<SteadyState> {
    let x_ns = s.asin() / (2.0 * d.k);
    assemble(d, p, x_ns, s, (1.0 - s * s).sqrt(), delta_d)
}

/// Steady state with the trap position set by the Coulomb force `sigma` (N).
pub fn solve_selfconsistent(
    d: &DerivedQuantities,
    p: &SystemParams,
    sigma: f64,
) -> Result<SteadyState> {
    if !sigma.is_finite() || sigma < 0.0 {
        return Err(Error::Domain(format!("sigma = {sigma} must be finite and >= 0")));
    }
    with_drive_detuning(p, |delta_d, p| selfconsistent_at(d, p, sigma, delta_d))
}

/// Dispatches on `p.trap_mode`.
pub fn solve(d: &DerivedQuantities, p: &SystemParams) -> Result<SteadyState> {
    match p.trap_mode {
        TrapMode::Prescribed { s } => solve_prescribed(d, p, s),
        TrapMode::SelfConsistent { sigma } => solve_selfconsistent(d, p, sigma),
    }
}

/// Two-pass bootstrap for the red-sideband drive: solve at `Δ_d = 0`, then
/// re-solve once at `Δ_d = ω_n`. When the provisional passive field vanishes
/// (lossless active cavity resonant with the drive) the provisional `ω_n` is
/// taken from the uncoupled passive cavity.
fn with_drive_detuning<F>(p: &SystemParams, solve_at: F) -> Result<SteadyState>
where
    F: Fn(f64, &SystemParams) -> Result<SteadyState>,
{
    match p.delta_d {
        DriveDetuning::Fixed { value } => solve_at(value, p),
        DriveDetuning::MechanicalResonance => {
            let provisional = match solve_at(0.0, p) {
                Ok(ss) => ss,
                Err(Error::Domain(_)) if p.hop_j != 0.0 => {
                    let uncoupled = SystemParams { hop_j: 0.0, ..*p };
                    solve_at(0.0, &uncoupled)?
                }
                Err(e) => return Err(e),
            };
            solve_at(provisional.omega_n, p)
        }
    }
}

fn restoring_force_scale(d: &DerivedQuantities, p: &SystemParams, x: f64, delta_d: f64) -> Result<f64> {
    let cos_sq = (d.k * x).cos().powi(2);
    let (c1, _, _) = mean_fields(d, p, d.g_n * cos_sq, delta_d)?;
    Ok(HBAR * d.g_n * d.k * c1.norm_sqr())
}

/// `f(x) = ħ g_n k |c1s(x)|² sin(2kx) − σ`; its zeros on the principal branch
/// are the trap positions.
fn force_balance(d: &DerivedQuantities, p: &SystemParams, sigma: f64, x: f64, delta_d: f64) -> Result<f64> {
    Ok(restoring_force_scale(d, p, x, delta_d)? * (2.0 * d.k * x).sin() - sigma)
}

fn selfconsistent_at(
    d: &DerivedQuantities,
    p: &SystemParams,
    sigma: f64,
    delta_d: f64,
) -> Result<SteadyState> {
    let two_k = 2.0 * d.k;
    let map = |x: f64| -> Result<f64> {
        let scale = restoring_force_scale(d, p, x, delta_d)?;
        let ratio = sigma / scale;
        if !(ratio <= 1.0) {
            return Err(Error::NoTrapSolution { ratio });
        }
        Ok(ratio.asin() / two_k)
    };

    let mut x = 0.0_f64;
    let mut converged = false;
    let mut last_step = f64::INFINITY;
    for _ in 0..MAX_ITERATIONS {
        let next = x + RELAXATION * (map(x)? - x);
        last_step = (next - x).abs();
        x = next;
        if last_step < ABS_STEP_TOL || last_step < REL_STEP_TOL * x.abs() {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::IterationLimit {
            iterations: MAX_ITERATIONS,
            residual: last_step,
        });
    }

    let (roots, first_bracket) = scan_fixed_points(d, p, sigma, delta_d)?;
    if let Some((lo, hi)) = first_bracket {
        // the damped map can settle on a later root; fall back to the first
        if x > hi {
            x = bisect(|x| force_balance(d, p, sigma, x, delta_d), lo, hi)?;
        }
    }

    let phase = two_k * x;
    let mut ss = assemble(d, p, x, phase.sin(), phase.cos(), delta_d)?;
    ss.multiple_fixed_points = roots > 1;
    Ok(ss)
}

/// Counts sign changes of the force balance over `0 < 2kx < π/2` and returns
/// the first bracketing interval.
fn scan_fixed_points(
    d: &DerivedQuantities,
    p: &SystemParams,
    sigma: f64,
    delta_d: f64,
) -> Result<(usize, Option<(f64, f64)>)> {
    if sigma == 0.0 {
        return Ok((1, None));
    }
    let edge = std::f64::consts::FRAC_PI_4 / d.k;
    let mut roots = 0;
    let mut first = None;
    let mut prev_x = 0.0;
    let mut prev_f = force_balance(d, p, sigma, 0.0, delta_d)?;
    for i in 1..=SCAN_POINTS {
        let x = edge * i as f64 / SCAN_POINTS as f64;
        let f = force_balance(d, p, sigma, x, delta_d)?;
        if (prev_f < 0.0) != (f < 0.0) {
            roots += 1;
            first.get_or_insert((prev_x, x));
        }
        prev_x = x;
        prev_f = f;
    }
    Ok((roots, first))
}

fn bisect<F: Fn(f64) -> Result<f64>>(f: F, mut lo: f64, mut hi: f64) -> Result<f64> {
    let mut f_lo = f(lo)?;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let f_mid = f(mid)?;
        if (f_mid < 0.0) == (f_lo < 0.0) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
