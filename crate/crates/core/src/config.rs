//! `key = value` parameter files.
//!
//! Values are SI. Rates must carry a unit suffix: `_hz` values are multiplied
//! by 2π, `_rads` values are used as given. `#` starts a comment. Unknown keys
//! are errors.
//!
//! ```text
//! preset = fig5
//! cavity_preset = textbody
//! gamma_n_hz = 0.003
//! J_over_gamma = 0.9
//! kappa_over_gamma = 0.4
//! s = 0.1
//! ```

use std::f64::consts::TAU;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{coulomb_sigma, CavityPreset, DriveDetuning, SystemParams, TrapMode};
use crate::sweep::SweepPreset;

const RATE_KEYS: [&str; 5] = ["gamma", "kappa", "gamma_n", "hop_J", "delta_d"];

#[derive(Debug, Clone, Copy, PartialEq)]
enum Setting {
    Lambda(f64),
    PowerDrive(f64),
    PowerProbe(f64),
    Rate(&'static str, f64),
    RedSideband,
    Rho(f64),
    RadiusA(f64),
    EpsR(f64),
    CavityL(f64),
    WaistW(f64),
    MirrorDistance(f64),
    S(f64),
    Sigma(f64),
    ChargeQ1(f64),
    ChargeQ2(f64),
    KappaOverGamma(f64),
    JOverGamma(f64),
}

/// A parsed parameter file.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConfigFile {
    pub preset: Option<SweepPreset>,
    pub cavity: Option<CavityPreset>,
    settings: Vec<(usize, Setting)>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<ConfigFile> {
        let mut cfg = ConfigFile::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let (key, value) = body.split_once('=').ok_or_else(|| Error::Config {
                line,
                message: format!("expected `key = value`, got `{body}`"),
            })?;
            let (key, value) = (key.trim(), value.trim());
            if value.is_empty() {
                return Err(Error::Config {
                    line,
                    message: format!("`{key}` has no value"),
                });
            }
            let num = || -> Result<f64> {
                value.parse::<f64>().map_err(|_| Error::Config {
                    line,
                    message: format!("`{key}`: `{value}` is not a number"),
                })
            };
            let setting = match key {
                "preset" => {
                    cfg.preset = Some(SweepPreset::parse(value).ok_or_else(|| Error::Config {
                        line,
                        message: format!("unknown preset `{value}`"),
                    })?);
                    continue;
                }
                "cavity_preset" => {
                    cfg.cavity = Some(CavityPreset::parse(value).ok_or_else(|| Error::Config {
                        line,
                        message: format!("unknown cavity preset `{value}` (textbody, fig2caption)"),
                    })?);
                    continue;
                }
                "delta_d" if value == "red_sideband" => Setting::RedSideband,
                "lambda" => Setting::Lambda(num()?),
                "power_drive" => Setting::PowerDrive(num()?),
                "power_probe" => Setting::PowerProbe(num()?),
                "rho" => Setting::Rho(num()?),
                "radius_a" => Setting::RadiusA(num()?),
                "eps_r" => Setting::EpsR(num()?),
                "cavity_L" => Setting::CavityL(num()?),
                "waist_w" => Setting::WaistW(num()?),
                "mirror_distance_d" => Setting::MirrorDistance(num()?),
                "s" => Setting::S(num()?),
                "sigma" => Setting::Sigma(num()?),
                "charge_q1" => Setting::ChargeQ1(num()?),
                "charge_q2" => Setting::ChargeQ2(num()?),
                "kappa_over_gamma" => Setting::KappaOverGamma(num()?),
                "J_over_gamma" => Setting::JOverGamma(num()?),
                _ => match rate_key(key) {
                    Some((name, factor)) => Setting::Rate(name, num()? * factor),
                    None if RATE_KEYS.contains(&key) => {
                        return Err(Error::Config {
                            line,
                            message: format!("rate `{key}` needs a `_hz` or `_rads` suffix"),
                        })
                    }
                    None => {
                        return Err(Error::UnknownKey {
                            line,
                            key: key.to_string(),
                        })
                    }
                },
            };
            cfg.settings.push((line, setting));
        }
        cfg.check_conflicts()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<ConfigFile> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("cannot read {}: {e}", path.display())))?;
        ConfigFile::parse(&text)
    }

    fn check_conflicts(&self) -> Result<()> {
        let find = |f: fn(&Setting) -> bool| self.settings.iter().find(|(_, s)| f(s)).map(|(l, _)| *l);
        let prescribed = find(|s| matches!(s, Setting::S(_)));
        let sigma = find(|s| matches!(s, Setting::Sigma(_)));
        let q1 = find(|s| matches!(s, Setting::ChargeQ1(_)));
        let q2 = find(|s| matches!(s, Setting::ChargeQ2(_)));
        if let (Some(_), Some(line)) = (prescribed, sigma.or(q1).or(q2)) {
            return Err(Error::Config {
                line,
                message: "`s` and a Coulomb force (`sigma` or charges) are mutually exclusive".into(),
            });
        }
        if let (Some(_), Some(line)) = (sigma, q1.or(q2)) {
            return Err(Error::Config {
                line,
                message: "give either `sigma` or the two charges, not both".into(),
            });
        }
        if let (Some(line), None) | (None, Some(line)) = (q1, q2) {
            return Err(Error::Config {
                line,
                message: "`charge_q1` and `charge_q2` must be given together".into(),
            });
        }
        Ok(())
    }

    /// Applies the file on top of `base` and validates the result. A cavity
    /// preset is applied first, ratios to γ last.
    pub fn apply(&self, base: SystemParams) -> Result<SystemParams> {
        let mut p = base;
        if let Some(c) = self.cavity {
            p.gamma = c.gamma();
            p.cavity_length = c.cavity_length();
        }
        let (mut q1, mut q2) = (None, None);
        for &(_, s) in &self.settings {
            match s {
                Setting::Lambda(v) => p.lambda = v,
                Setting::PowerDrive(v) => p.power_drive = v,
                Setting::PowerProbe(v) => p.power_probe = v,
                Setting::Rate(name, v) => match name {
                    "gamma" => p.gamma = v,
                    "kappa" => p.kappa = v,
                    "gamma_n" => p.gamma_n = v,
                    "hop_J" => p.hop_j = v,
                    _ => p.delta_d = DriveDetuning::Fixed { value: v },
                },
                Setting::RedSideband => p.delta_d = DriveDetuning::MechanicalResonance,
                Setting::Rho(v) => p.rho = v,
                Setting::RadiusA(v) => p.radius_a = v,
                Setting::EpsR(v) => p.eps_r = v,
                Setting::CavityL(v) => p.cavity_length = v,
                Setting::WaistW(v) => p.waist_w = v,
                Setting::MirrorDistance(v) => p.mirror_distance_d = v,
                Setting::S(v) => p.trap_mode = TrapMode::Prescribed { s: v },
                Setting::Sigma(v) => p.trap_mode = TrapMode::SelfConsistent { sigma: v },
                Setting::ChargeQ1(v) => q1 = Some(v),
                Setting::ChargeQ2(v) => q2 = Some(v),
                Setting::KappaOverGamma(_) | Setting::JOverGamma(_) => {}
            }
        }
        for &(_, s) in &self.settings {
            match s {
                Setting::KappaOverGamma(r) => p.kappa = r * p.gamma,
                Setting::JOverGamma(r) => p.hop_j = r * p.gamma,
                _ => {}
            }
        }
        if let (Some(a), Some(b)) = (q1, q2) {
            p.trap_mode = TrapMode::SelfConsistent {
                sigma: coulomb_sigma(a, b, p.mirror_distance_d),
            };
        }
        p.validate()?;
        Ok(p)
    }
}

fn rate_key(key: &str) -> Option<(&'static str, f64)> {
    RATE_KEYS.iter().find_map(|&name| {
        let rest = key.strip_prefix(name)?;
        match rest {
            "_hz" => Some((name, TAU)),
            "_rads" => Some((name, 1.0)),
            _ => None,
        }
    })
}
