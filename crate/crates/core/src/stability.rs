//! Linear stability of the operating point.
//!
//! The linearized drift is written on the real state
//! `(q, u, Re δc₁, Im δc₁, Re δc₂, Im δc₂)` with `δx = ℓ q`,
//! `δẋ = ℓ ω_n u` and `ℓ = √(2ħ/(m ω_n))`, which puts every entry on the
//! scale of a rate.

use nalgebra::{Matrix4, Matrix6};
use num_complex::Complex64 as C64;

use crate::model::{DerivedQuantities, SystemParams, HBAR};
use crate::steady::SteadyState;

/// Length unit used for the mechanical coordinate.
pub fn mechanical_length_scale(d: &DerivedQuantities, ss: &SteadyState) -> f64 {
    (2.0 * HBAR / (d.mass * ss.omega_n)).sqrt()
}

pub fn drift_matrix(d: &DerivedQuantities, p: &SystemParams, ss: &SteadyState) -> Matrix6<f64> {
    let ell = mechanical_length_scale(d, ss);
    let (gr, gi) = (ss.g_eff.re, ss.g_eff.im);
    let (w, dc, dd, j) = (ss.omega_n, ss.delta_c, ss.delta_d, p.hop_j);
    #[rustfmt::skip]
    let m = Matrix6::new(
        0.0,       w,           0.0,        0.0,        0.0,     0.0,
        -w,        -p.gamma_n,  -ell * gr,  -ell * gi,  0.0,     0.0,
        ell * gi,  0.0,         -p.gamma,   dc,         0.0,     -j,
        -ell * gr, 0.0,         -dc,        -p.gamma,   j,       0.0,
        0.0,       0.0,         0.0,        -j,         p.kappa, dd,
        0.0,       0.0,         j,          0.0,        -dd,     p.kappa,
    );
    m
}

/// Drift eigenvalues. With `J = 0` the active cavity never couples in and its
/// modes are left out.
pub fn eigenvalues(d: &DerivedQuantities, p: &SystemParams, ss: &SteadyState) -> Vec<C64> {
    let m = drift_matrix(d, p, ss);
    if p.hop_j == 0.0 {
        let block: Matrix4<f64> = m.fixed_view::<4, 4>(0, 0).into_owned();
        return block.complex_eigenvalues().iter().copied().collect();
    }
    m.complex_eigenvalues().iter().copied().collect()
}

/// Largest real part among the drift eigenvalues, 1/s. Positive means the
/// operating point is dynamically unstable and no stationary probe response
/// is reached in time.
pub fn growth_rate(d: &DerivedQuantities, p: &SystemParams, ss: &SteadyState) -> f64 {
    eigenvalues(d, p, ss)
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max)
}

pub fn is_stable(d: &DerivedQuantities, p: &SystemParams, ss: &SteadyState) -> bool {
    growth_rate(d, p, ss) < 0.0
}
