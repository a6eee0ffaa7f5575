//! Probe response: first-order sideband amplitudes, absorption and
//! transmission.
//!
//! The canonical route inserts `δO = O₊e^{−iΔt} + O₋e^{+iΔt}` into the
//! linearized equations and solves the resulting complex linear system for
//! `(x₊, c₁⁺, (c₁⁻)*, c₂⁺, (c₂⁻)*)`. The closed form for `c₁⁺` is kept
//! alongside for comparison only.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DerivedQuantities, SystemParams, HBAR};
use crate::stability::mechanical_length_scale;
use crate::steady::SteadyState;

/// Normalized determinants below this are treated as singular.
pub const SINGULAR_DETERMINANT: f64 = 1e-13;

const I: C64 = C64::new(0.0, 1.0);

/// Sideband amplitudes at one probe detuning, all per unit probe amplitude.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SidebandSolution {
    /// Probe–drive detuning `Δ = ω_p − ω_d`, rad/s.
    pub delta: f64,
    /// `x₊ / ε_p`.
    pub x_plus: C64,
    /// `c₁⁺ / ε_p`.
    pub a1_plus: C64,
    /// `(c₁⁻)* / ε_p`.
    pub a1_minus_conj: C64,
    /// `c₂⁺ / ε_p`.
    pub a2_plus: C64,
    /// `(c₂⁻)* / ε_p`.
    pub a2_minus_conj: C64,
    /// `ε_T = 2γ c₁⁺ / ε_p`.
    pub eps_t: C64,
    pub chi: f64,
    pub eta: f64,
    /// Determinant of the row/column-equilibrated system matrix.
    pub determinant: f64,
}

/// Solves the five sideband equations at probe detuning `delta`.
///
/// When `J = 0` the active-cavity unknowns decouple and are set to zero, so
/// an undamped decoupled active cavity cannot make the system singular.
pub fn solve_sideband_system(
    d: &DerivedQuantities,
    p: &SystemParams,
    ss: &SteadyState,
    delta: f64,
) -> Result<SidebandSolution> {
    let g = ss.g_eff;
    let gc = g.conj();
    let j = p.hop_j;
    let n = if j == 0.0 { 3 } else { 5 };

    // x₊ = ℓ q₊ and the mechanical row divided by m ℓ ω_n put every entry on
    // the scale of a rate; ħ/(m ℓ ω_n) = ℓ/2
    let ell = mechanical_length_scale(d, ss);
    let w = ss.omega_n;
    let mut m = DMatrix::<C64>::zeros(n, n);
    let mut rhs = DVector::<C64>::zeros(n);
    // mechanics: m Γ_n x₊ + ħ(G* c₁⁺ + G (c₁⁻)*) = 0
    m[(0, 0)] = C64::new(w - delta * delta / w, -p.gamma_n * delta / w);
    m[(0, 1)] = gc * (0.5 * ell);
    m[(0, 2)] = g * (0.5 * ell);
    // passive cavity, upper sideband
    m[(1, 0)] = I * g * ell;
    m[(1, 1)] = C64::new(p.gamma, ss.delta_c - delta);
    rhs[1] = C64::new(d.eps_p, 0.0);
    // passive cavity, conjugated lower sideband
    m[(2, 0)] = -I * gc * ell;
    m[(2, 2)] = C64::new(p.gamma, -(ss.delta_c + delta));
    if n == 5 {
        m[(1, 3)] = -I * j;
        m[(2, 4)] = I * j;
        // active cavity
        m[(3, 1)] = -I * j;
        m[(3, 3)] = C64::new(-p.kappa, ss.delta_d - delta);
        m[(4, 2)] = I * j;
        m[(4, 4)] = C64::new(-p.kappa, -(ss.delta_d + delta));
    }

    let (u, determinant) = equilibrated_solve(m, rhs)?;
    let scale = 1.0 / d.eps_p;
    let a1_plus = u[1] * scale;
    let (a2_plus, a2_minus_conj) = if n == 5 {
        (u[3] * scale, u[4] * scale)
    } else {
        (C64::new(0.0, 0.0), C64::new(0.0, 0.0))
    };
    let eps_t = a1_plus * (2.0 * p.gamma);
    Ok(SidebandSolution {
        delta,
        x_plus: u[0] * (ell * scale),
        a1_plus,
        a1_minus_conj: u[2] * scale,
        a2_plus,
        a2_minus_conj,
        eps_t,
        chi: eps_t.re,
        eta: (C64::new(1.0, 0.0) - eps_t).norm_sqr(),
        determinant,
    })
}

/// Row then column max-scaling before LU, so that the mechanical row (kg/s²
/// scale) and the optical rows are comparable. Returns the solution of the
/// original system and the determinant of the scaled one.
fn equilibrated_solve(mut m: DMatrix<C64>, mut rhs: DVector<C64>) -> Result<(DVector<C64>, f64)> {
    let n = m.nrows();
    for r in 0..n {
        let s = (0..n).map(|c| m[(r, c)].norm()).fold(0.0, f64::max);
        if s == 0.0 {
            return Err(Error::Singular { determinant: 0.0 });
        }
        for c in 0..n {
            m[(r, c)] /= s;
        }
        rhs[r] /= s;
    }
    let mut col_scale = vec![1.0; n];
    for (c, cs) in col_scale.iter_mut().enumerate() {
        let s = (0..n).map(|r| m[(r, c)].norm()).fold(0.0, f64::max);
        if s == 0.0 {
            return Err(Error::Singular { determinant: 0.0 });
        }
        *cs = s;
        for r in 0..n {
            m[(r, c)] /= s;
        }
    }
    let lu = m.lu();
    let determinant = lu.determinant().norm();
    if !(determinant >= SINGULAR_DETERMINANT) {
        return Err(Error::Singular { determinant });
    }
    let mut u = lu.solve(&rhs).ok_or(Error::Singular { determinant })?;
    for (c, cs) in col_scale.iter().enumerate() {
        u[c] /= *cs;
    }
    if u.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Singular { determinant });
    }
    Ok((u, determinant))
}

/// Placement of the passive decay and the active gain inside the closed-form
/// coefficients `G₁…G₄`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClosedFormConvention {
    /// As printed: `G₁, G₂` carry κ and `G₃, G₄` carry −γ.
    Literal,
    /// γ and κ exchanged: `G₁, G₂` carry γ and `G₃, G₄` carry −κ. This is the
    /// assignment that reproduces the linear solve.
    Exchanged,
}

/// Closed-form `c₁⁺ / ε_p`, transcribed term by term, with the mechanical
/// coupling `ξ = iħ|G|²/m`.
pub fn closed_form_c1plus(
    d: &DerivedQuantities,
    p: &SystemParams,
    ss: &SteadyState,
    delta: f64,
    convention: ClosedFormConvention,
) -> Result<C64> {
    let (first, second) = match convention {
        ClosedFormConvention::Literal => (p.kappa, p.gamma),
        ClosedFormConvention::Exchanged => (p.gamma, p.kappa),
    };
    let j2 = p.hop_j * p.hop_j;
    let g1 = C64::new(first, ss.delta_c - delta);
    let g2 = C64::new(first, -(ss.delta_c + delta));
    let g3 = C64::new(-second, ss.delta_d - delta);
    let g4 = C64::new(-second, -(ss.delta_d + delta));
    let om1 = g1 * g3 + j2;
    let om2 = g2 * g4 + j2;
    let om3 = (g3 - g4) * j2;
    let gamma_n = C64::new(ss.omega_n * ss.omega_n - delta * delta, -delta * p.gamma_n);
    let xi = I * (HBAR * ss.g_eff_sq() / d.mass);

    let num = g3 * om2 * gamma_n + xi * g3 * g4;
    let den = om1 * om2 * gamma_n - xi * (om3 + g3 * g4 * (g2 - g1));
    if den.norm() == 0.0 || !den.re.is_finite() {
        return Err(Error::Singular { determinant: den.norm() });
    }
    Ok(num / den)
}

/// `χ = Re[ε_T]`.
pub fn absorption(sol: &SidebandSolution) -> f64 {
    sol.eps_t.re
}

/// `η = |1 − 2γ c₁⁺/ε_p|²`.
pub fn transmission(sol: &SidebandSolution) -> f64 {
    (C64::new(1.0, 0.0) - sol.eps_t).norm_sqr()
}
