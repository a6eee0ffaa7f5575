//! PT phase of the coupled gain/loss cavity pair.

use std::fmt;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

/// Relative distance from `(κ+γ)/2` within which `J` counts as sitting on the
/// exceptional point.
pub const EXCEPTIONAL_POINT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Phase {
    PtSymmetric,
    Broken,
    ExceptionalPoint,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::PtSymmetric => "PT_SYMMETRIC",
            Phase::Broken => "BROKEN",
            Phase::ExceptionalPoint => "EXCEPTIONAL_POINT",
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseReport {
    /// `(κ+γ)/2`, rad/s.
    pub j_threshold_pt: f64,
    /// `√(κγ)`, rad/s; only defined for gain (κ > 0).
    pub j_threshold_aux: Option<f64>,
    pub phase: Phase,
    /// Supermode frequencies; loss shows up as a negative imaginary part.
    pub eigenvalues: [C64; 2],
}

impl PhaseReport {
    /// `ω₊ − ω₋`.
    pub fn splitting(&self) -> C64 {
        self.eigenvalues[0] - self.eigenvalues[1]
    }
}

/// Classifies the phase from `J` against `(κ+γ)/2` and returns the
/// eigenvalues of `[[Δ_d − iγ, J], [J, Δ_d + iκ]]`.
pub fn classify_phase(j: f64, kappa: f64, gamma: f64, delta_d: f64) -> PhaseReport {
    let threshold = 0.5 * (kappa + gamma);
    let phase = if (j - threshold).abs() <= EXCEPTIONAL_POINT_TOL * j.abs().max(threshold.abs()) {
        Phase::ExceptionalPoint
    } else if j > threshold {
        Phase::PtSymmetric
    } else {
        Phase::Broken
    };

    let center = C64::new(delta_d, 0.5 * (kappa - gamma));
    let root = match phase {
        Phase::ExceptionalPoint => C64::new(0.0, 0.0),
        _ => C64::new(j * j - threshold * threshold, 0.0).sqrt(),
    };
    PhaseReport {
        j_threshold_pt: threshold,
        j_threshold_aux: (kappa > 0.0).then(|| (kappa * gamma).sqrt()),
        phase,
        eigenvalues: [center + root, center - root],
    }
}

/// Gain at which `J` sits on the exceptional point: `κ = 2J − γ`.
pub fn exceptional_gain(j: f64, gamma: f64) -> f64 {
    2.0 * j - gamma
}

#[cfg(test)]
mod tests {
    use super::*;

    const GAMMA: f64 = 2.0 * std::f64::consts::PI * 215.0e3;

    #[test]
    fn exceptional_point_at_point_eight() {
        let r = classify_phase(0.9 * GAMMA, 0.8 * GAMMA, GAMMA, 0.0);
        assert_eq!(r.phase, Phase::ExceptionalPoint);
        assert!((exceptional_gain(0.9 * GAMMA, GAMMA) / GAMMA - 0.8).abs() < 4.0 * f64::EPSILON);
    }

    #[test]
    fn balanced_gain_either_side_of_threshold() {
        assert_eq!(classify_phase(1.01 * GAMMA, GAMMA, GAMMA, 0.0).phase, Phase::PtSymmetric);
        assert_eq!(classify_phase(0.99 * GAMMA, GAMMA, GAMMA, 0.0).phase, Phase::Broken);
    }

    #[test]
    fn eigenvalues_solve_the_supermode_matrix() {
        for &(j, k) in &[(0.3, 0.5), (1.2, 1.0), (0.9, -0.4), (2.0, 0.0)] {
            let (j, k) = (j * GAMMA, k * GAMMA);
            let dd = 4.0e5;
            let r = classify_phase(j, k, GAMMA, dd);
            let a = C64::new(dd, -GAMMA);
            let b = C64::new(dd, k);
            for w in r.eigenvalues {
                // det([[a−w, J],[J, b−w]]) = 0
                let det = (a - w) * (b - w) - j * j;
                assert!(det.norm() < 1e-9 * GAMMA * GAMMA, "{det}");
            }
        }
    }

    #[test]
    fn real_splitting_iff_symmetric_at_balance() {
        for i in 1..400 {
            let j = GAMMA * i as f64 / 200.0;
            let r = classify_phase(j, GAMMA, GAMMA, 3.0e5);
            let s = r.splitting();
            let real_split = s.re != 0.0 && s.im == 0.0;
            assert_eq!(real_split, r.phase == Phase::PtSymmetric, "J/γ = {}", i as f64 / 200.0);
            // balanced gain/loss: real spectrum in the symmetric phase
            if r.phase == Phase::PtSymmetric {
                assert!(r.eigenvalues.iter().all(|w| w.im.abs() < 1e-9 * GAMMA));
            }
        }
    }

    #[test]
    fn auxiliary_threshold_only_with_gain() {
        assert!(classify_phase(GAMMA, -0.5 * GAMMA, GAMMA, 0.0).j_threshold_aux.is_none());
        let r = classify_phase(GAMMA, 0.25 * GAMMA, GAMMA, 0.0);
        assert!((r.j_threshold_aux.unwrap() / GAMMA - 0.5).abs() < 1e-15);
    }
}
