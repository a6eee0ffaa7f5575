//! Physical parameters of the two-cavity system and the constants derived
//! from them.
//!
//! Everything here is in SI units. Rates are angular (rad/s); conversion from
//! Hz happens at the config boundary.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Reduced Planck constant, J·s.
pub const HBAR: f64 = 1.054_571_817e-34;
/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 2.997_924_58e8;
/// Vacuum permittivity, F/m. Only enters the Coulomb force constant.
pub const VACUUM_PERMITTIVITY: f64 = 8.854_187_812_8e-12;

/// How the trap position of the nanosphere is fixed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum TrapMode {
    /// `s = sin(2k x_ns)` is imposed directly.
    Prescribed { s: f64 },
    /// The trap position follows from balancing the Coulomb force `sigma` (N)
    /// against the optical restoring force.
    SelfConsistent { sigma: f64 },
}

/// Drive detuning `Δ_d = ω_c − ω_d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum DriveDetuning {
    /// Fixed value in rad/s.
    Fixed { value: f64 },
    /// Red sideband: `Δ_d` is set to the effective mechanical frequency found
    /// by a provisional solve at `Δ_d = 0`.
    MechanicalResonance,
}

/// Cavity geometry and passive decay presets. The two sources of the
/// numbers disagree; both are kept.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CavityPreset {
    /// γ = 2π × 215 kHz, L = 25 mm.
    TextBody,
    /// γ = 2π × 60 kHz, L = 10 mm.
    Fig2Caption,
}

impl CavityPreset {
    pub fn gamma(self) -> f64 {
        match self {
            CavityPreset::TextBody => 2.0 * PI * 215.0e3,
            CavityPreset::Fig2Caption => 2.0 * PI * 6.0e4,
        }
    }

    pub fn cavity_length(self) -> f64 {
        match self {
            CavityPreset::TextBody => 25.0e-3,
            CavityPreset::Fig2Caption => 0.01,
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "textbody" => Some(CavityPreset::TextBody),
            "fig2caption" => Some(CavityPreset::Fig2Caption),
            _ => None,
        }
    }
}

/// User-facing physical inputs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    /// Laser wavelength, m.
    pub lambda: f64,
    /// Coupling (pump) field power, W.
    pub power_drive: f64,
    /// Probe field power, W.
    pub power_probe: f64,
    /// Passive-cavity decay rate, rad/s.
    pub gamma: f64,
    /// Active-cavity gain rate, rad/s. Positive is gain, negative is loss.
    pub kappa: f64,
    /// Nanosphere damping rate, rad/s.
    pub gamma_n: f64,
    /// Photon hopping strength between the cavities, rad/s.
    pub hop_j: f64,
    /// Nanosphere mass density, kg/m³.
    pub rho: f64,
    /// Nanosphere radius, m.
    pub radius_a: f64,
    /// Relative dielectric constant of the nanosphere.
    pub eps_r: f64,
    /// Cavity length, m.
    pub cavity_length: f64,
    /// Cavity mode waist, m.
    pub waist_w: f64,
    pub delta_d: DriveDetuning,
    pub trap_mode: TrapMode,
    /// Nanosphere to charged-mirror separation, m.
    pub mirror_distance_d: f64,
}

impl Default for SystemParams {
    fn default() -> Self {
        SystemParams::with_cavity(CavityPreset::TextBody)
    }
}

impl SystemParams {
    pub fn with_cavity(cavity: CavityPreset) -> Self {
        SystemParams {
            lambda: 1064.0e-9,
            power_drive: 0.2e-3,
            power_probe: 0.2e-6,
            gamma: cavity.gamma(),
            kappa: 0.0,
            gamma_n: 2.0 * PI * 0.003,
            hop_j: 0.0,
            rho: 2300.0,
            radius_a: 60.0e-9,
            eps_r: 2.0,
            cavity_length: cavity.cavity_length(),
            waist_w: 20.0e-6,
            delta_d: DriveDetuning::MechanicalResonance,
            trap_mode: TrapMode::Prescribed { s: 0.1 },
            mirror_distance_d: 1.0e-3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        positive("lambda", self.lambda)?;
        positive("power_drive", self.power_drive)?;
        positive("power_probe", self.power_probe)?;
        positive("gamma", self.gamma)?;
        finite("kappa", self.kappa)?;
        non_negative("gamma_n", self.gamma_n)?;
        finite("hop_J", self.hop_j)?;
        positive("rho", self.rho)?;
        positive("radius_a", self.radius_a)?;
        finite("eps_r", self.eps_r)?;
        if self.eps_r < 1.0 {
            return Err(Error::validation("eps_r", format!("{} is below 1", self.eps_r)));
        }
        positive("cavity_L", self.cavity_length)?;
        positive("waist_w", self.waist_w)?;
        positive("mirror_distance_d", self.mirror_distance_d)?;
        if let DriveDetuning::Fixed { value } = self.delta_d {
            finite("delta_d", value)?;
        }
        match self.trap_mode {
            TrapMode::Prescribed { s } => {
                finite("s", s)?;
                if s.abs() > 1.0 {
                    return Err(Error::validation("s", format!("|s| = {} exceeds 1", s.abs())));
                }
            }
            TrapMode::SelfConsistent { sigma } => non_negative("sigma", sigma)?,
        }
        Ok(())
    }

    /// `(κ+γ)/2`, the hopping strength at the exceptional point.
    pub fn exceptional_hopping(&self) -> f64 {
        0.5 * (self.kappa + self.gamma)
    }
}

fn finite(field: &'static str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::validation(field, format!("{v} is not finite")))
    }
}

fn positive(field: &'static str, v: f64) -> Result<()> {
    finite(field, v)?;
    if v > 0.0 {
        Ok(())
    } else {
        Err(Error::validation(field, format!("{v} must be positive")))
    }
}

fn non_negative(field: &'static str, v: f64) -> Result<()> {
    finite(field, v)?;
    if v >= 0.0 {
        Ok(())
    } else {
        Err(Error::validation(field, format!("{v} must not be negative")))
    }
}

/// Constants computed once from [`SystemParams`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedQuantities {
    /// Cavity resonance, rad/s.
    pub omega_c: f64,
    /// Wavenumber, rad/m.
    pub k: f64,
    /// Sphere volume, m³.
    pub volume: f64,
    /// Sphere mass, kg.
    pub mass: f64,
    /// Optical mode volume, m³.
    pub mode_volume: f64,
    /// Single-photon sphere/field coupling, rad/s.
    pub g_n: f64,
    /// Drive amplitude, s^-1/2 scaled field units.
    pub omega_d: f64,
    /// Probe amplitude, same units as `omega_d`.
    pub eps_p: f64,
}

pub fn derive(params: &SystemParams) -> Result<DerivedQuantities> {
    params.validate()?;
    let omega_c = 2.0 * PI * SPEED_OF_LIGHT / params.lambda;
    let k = 2.0 * PI / params.lambda;
    let volume = 4.0 / 3.0 * PI * params.radius_a.powi(3);
    let mode_volume = PI / 4.0 * params.cavity_length * params.waist_w * params.waist_w;
    let mass = params.rho * volume;
    let clausius_mossotti = (params.eps_r - 1.0) / (params.eps_r + 2.0);
    let g_n = 3.0 * volume / (4.0 * mode_volume) * clausius_mossotti * omega_c;
    // drive and probe frequencies are both taken as ω_c for the amplitudes
    let omega_d = (2.0 * params.gamma * params.power_drive / (HBAR * omega_c)).sqrt();
    let eps_p = (2.0 * params.gamma * params.power_probe / (HBAR * omega_c)).sqrt();
    Ok(DerivedQuantities {
        omega_c,
        k,
        volume,
        mass,
        mode_volume,
        g_n,
        omega_d,
        eps_p,
    })
}

/// First-order Coulomb force constant `σ = Q₁Q₂ / (4π ε₀ d²)` between the
/// charged sphere and the charged mirror at distance `d`.
pub fn coulomb_sigma(q1: f64, q2: f64, d: f64) -> f64 {
    q1 * q2 / (4.0 * PI * VACUUM_PERMITTIVITY * d * d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cavity_frequency_at_1064nm() {
        let d = derive(&SystemParams::default()).unwrap();
        let expected = 2.0 * PI * 2.997_924_58e8 / 1064.0e-9;
        assert_eq!(d.omega_c, expected);
        assert!((d.omega_c / 1.7704e15 - 1.0).abs() < 1e-4);
    }

    #[test]
    fn unit_dielectric_gives_zero_coupling() {
        let p = SystemParams {
            eps_r: 1.0,
            ..SystemParams::default()
        };
        assert_eq!(derive(&p).unwrap().g_n, 0.0);
    }

    #[test]
    fn textbody_coupling_and_mass() {
        // hand calculation: V = 4/3 π (60 nm)³, V_c = π/4 · 25 mm · (20 µm)²
        let v = 4.0 / 3.0 * PI * 2.16e-22;
        let vc = PI / 4.0 * 0.025 * 4.0e-10;
        let wc = 2.0 * PI * SPEED_OF_LIGHT / 1064.0e-9;
        let g_hand = 0.75 * v / vc * 0.25 * wc;
        let d = derive(&SystemParams::default()).unwrap();
        assert!((d.volume / v - 1.0).abs() < 1e-14);
        assert!((d.mode_volume / vc - 1.0).abs() < 1e-14);
        assert!((d.g_n / g_hand - 1.0).abs() < 1e-13);
        assert!((d.g_n / 3.82e4 - 1.0).abs() < 5e-3, "g_n = {}", d.g_n);
        assert!((d.mass / 2.08e-18 - 1.0).abs() < 5e-3, "m = {}", d.mass);
    }

    #[test]
    fn doubling_radius_scales_volume_terms_by_eight() {
        let p = SystemParams::default();
        let big = SystemParams {
            radius_a: 2.0 * p.radius_a,
            ..p
        };
        let (a, b) = (derive(&p).unwrap(), derive(&big).unwrap());
        assert!((b.g_n / a.g_n - 8.0).abs() < 1e-12);
        assert!((b.mass / a.mass - 8.0).abs() < 1e-12);
    }

    #[test]
    fn drive_amplitude_scales_as_root_power() {
        let p = SystemParams::default();
        let q = SystemParams {
            power_drive: 4.0 * p.power_drive,
            ..p
        };
        assert_eq!(derive(&q).unwrap().omega_d / derive(&p).unwrap().omega_d, 2.0);
    }

    #[test]
    fn rejects_non_physical_inputs_by_field() {
        let cases: [(&str, SystemParams); 5] = [
            ("radius_a", SystemParams { radius_a: 0.0, ..Default::default() }),
            ("rho", SystemParams { rho: -1.0, ..Default::default() }),
            ("cavity_L", SystemParams { cavity_length: f64::NAN, ..Default::default() }),
            ("gamma", SystemParams { gamma: 0.0, ..Default::default() }),
            ("eps_r", SystemParams { eps_r: 0.5, ..Default::default() }),
        ];
        for (field, p) in cases {
            match derive(&p) {
                Err(Error::Validation { field: f, .. }) => assert_eq!(f, field),
                other => panic!("{field}: {other:?}"),
            }
        }
    }

    #[test]
    fn prescribed_s_out_of_range_is_rejected() {
        let p = SystemParams {
            trap_mode: TrapMode::Prescribed { s: 1.5 },
            ..Default::default()
        };
        assert!(matches!(p.validate(), Err(Error::Validation { field: "s", .. })));
    }

    #[test]
    fn caption_preset_differs_from_text() {
        let a = SystemParams::with_cavity(CavityPreset::TextBody);
        let b = SystemParams::with_cavity(CavityPreset::Fig2Caption);
        assert_eq!(b.cavity_length, 0.01);
        assert!((b.gamma - 2.0 * PI * 6.0e4).abs() < 1e-9);
        assert!(a.gamma > b.gamma);
    }

    #[test]
    fn coulomb_constant() {
        // 1 C and 1 C at 1 m: Coulomb's constant
        assert!((coulomb_sigma(1.0, 1.0, 1.0) / 8.987_551_79e9 - 1.0).abs() < 1e-9);
    }
}
