//! One- and two-dimensional parameter sweeps.
//!
//! Every grid point is evaluated from scratch (parameters, steady state,
//! sideband solve), so a point computed on its own is bitwise equal to the same
//! point inside a sweep, whatever the thread count.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{derive, SystemParams, TrapMode};
use crate::oracle::{demodulated_response, Demodulation};
use crate::phase::classify_phase;
use crate::response::solve_sideband_system;
use crate::stability::growth_rate;
use crate::steady;
use crate::table::{Cell, Column, LabelledSteadyState, Metadata, SpectrumTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepPreset {
    Fig2,
    Fig3,
    Fig4,
    Fig5,
    Fig6,
    Custom,
}

impl SweepPreset {
    pub const ALL: [SweepPreset; 6] = [
        SweepPreset::Fig2,
        SweepPreset::Fig3,
        SweepPreset::Fig4,
        SweepPreset::Fig5,
        SweepPreset::Fig6,
        SweepPreset::Custom,
    ];

    pub fn parse(s: &str) -> Option<SweepPreset> {
        SweepPreset::ALL.into_iter().find(|p| p.as_str() == s)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SweepPreset::Fig2 => "fig2",
            SweepPreset::Fig3 => "fig3",
            SweepPreset::Fig4 => "fig4",
            SweepPreset::Fig5 => "fig5",
            SweepPreset::Fig6 => "fig6",
            SweepPreset::Custom => "custom",
        }
    }

    /// Physical parameters shared by every curve of the figure. The cavity is
    /// the text-body one (γ = 2π × 215 kHz, L = 25 mm) and γ_n = 2π × 0.003 rad/s.
    pub fn params(self) -> SystemParams {
        let base = SystemParams::default();
        let g = base.gamma;
        let (hop_j, kappa) = match self {
            SweepPreset::Fig2 | SweepPreset::Fig3 | SweepPreset::Custom => (0.0, 0.0),
            SweepPreset::Fig4 => (0.5 * g, g),
            SweepPreset::Fig5 => (0.9 * g, 0.0),
            SweepPreset::Fig6 => (0.9 * g, g),
        };
        SystemParams {
            hop_j,
            kappa,
            trap_mode: TrapMode::Prescribed { s: 0.1 },
            ..base
        }
    }

    /// Grid, outputs and curve variants of the figure.
    pub fn spec(self) -> SweepSpec {
        let delta = Axis::range(AxisName::DeltaOverOmegaN, -2.0, 2.0, 2001);
        let variants = |name: AxisName, values: &[f64]| -> Vec<Variant> {
            values.iter().map(|&v| Variant::single(name, v)).collect()
        };
        let (axis2, outputs, variants) = match self {
            SweepPreset::Fig2 => (None, vec![Output::Chi], variants(AxisName::S, &[0.0, 0.1])),
            SweepPreset::Fig3 => (
                None,
                vec![Output::Chi],
                variants(AxisName::JOverGamma, &[0.0, 0.2, 0.5, 0.9]),
            ),
            SweepPreset::Fig4 => (
                Some(Axis::list(AxisName::JOverGamma, vec![0.2, 0.5, 0.9])),
                vec![Output::Chi],
                variants(AxisName::KappaOverGamma, &[1.0, -1.0]),
            ),
            SweepPreset::Fig5 => (
                Some(Axis::list(
                    AxisName::KappaOverGamma,
                    vec![-1.0, 0.0, 0.2, 0.4, 0.6, 0.8, 1.0],
                )),
                vec![Output::Eta, Output::Phase, Output::Growth],
                Vec::new(),
            ),
            SweepPreset::Fig6 => (
                Some(Axis::list(AxisName::KappaOverGamma, vec![1.0, -1.0])),
                vec![Output::Eta],
                variants(AxisName::S, &[0.0, 0.05, 0.1]),
            ),
            SweepPreset::Custom => (None, vec![Output::Chi, Output::Eta], Vec::new()),
        };
        SweepSpec {
            preset: self,
            axis1: delta,
            axis2,
            outputs,
            variants,
            delta_over_omega_n: 1.0,
        }
    }
}

impl fmt::Display for SweepPreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AxisName {
    #[serde(rename = "delta_over_omega_n")]
    DeltaOverOmegaN,
    #[serde(rename = "J_over_gamma")]
    JOverGamma,
    #[serde(rename = "kappa_over_gamma")]
    KappaOverGamma,
    #[serde(rename = "s")]
    S,
}

impl AxisName {
    pub const ALL: [AxisName; 4] = [
        AxisName::DeltaOverOmegaN,
        AxisName::JOverGamma,
        AxisName::KappaOverGamma,
        AxisName::S,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AxisName::DeltaOverOmegaN => "delta_over_omega_n",
            AxisName::JOverGamma => "J_over_gamma",
            AxisName::KappaOverGamma => "kappa_over_gamma",
            AxisName::S => "s",
        }
    }

    pub fn parse(s: &str) -> Option<AxisName> {
        AxisName::ALL.into_iter().find(|a| a.as_str() == s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AxisValues {
    Range { min: f64, max: f64, points: usize },
    List { values: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub name: AxisName,
    #[serde(flatten)]
    pub values: AxisValues,
}

impl Axis {
    pub fn range(name: AxisName, min: f64, max: f64, points: usize) -> Axis {
        Axis {
            name,
            values: AxisValues::Range { min, max, points },
        }
    }

    pub fn list(name: AxisName, values: Vec<f64>) -> Axis {
        Axis {
            name,
            values: AxisValues::List { values },
        }
    }

    /// `name=min:max:points` or `name=v1,v2,...`.
    pub fn parse(text: &str) -> Result<Axis> {
        let bad = |why: &str| Error::Sweep(format!("axis `{text}`: {why}"));
        let (name, rest) = text.split_once('=').ok_or_else(|| bad("expected name=..."))?;
        let name = AxisName::parse(name.trim()).ok_or_else(|| bad("unknown axis name"))?;
        let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad("not a number"));
        let axis = if rest.contains(':') {
            let parts: Vec<&str> = rest.split(':').collect();
            if parts.len() != 3 {
                return Err(bad("expected min:max:points"));
            }
            let points = parts[2].trim().parse::<usize>().map_err(|_| bad("bad point count"))?;
            Axis::range(name, num(parts[0])?, num(parts[1])?, points)
        } else {
            Axis::list(name, rest.split(',').map(num).collect::<Result<_>>()?)
        };
        axis.validate()?;
        Ok(axis)
    }

    pub fn validate(&self) -> Result<()> {
        let name = self.name.as_str();
        match &self.values {
            AxisValues::Range { min, max, points } => {
                if *points < 2 {
                    return Err(Error::Sweep(format!("{name}: points = {points} must be at least 2")));
                }
                if !(min < max) || !min.is_finite() || !max.is_finite() {
                    return Err(Error::Sweep(format!("{name}: need finite min < max, got {min}, {max}")));
                }
            }
            AxisValues::List { values } => {
                if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Sweep(format!("{name}: list must be non-empty and finite")));
                }
            }
        }
        Ok(())
    }

    pub fn points(&self) -> Vec<f64> {
        match &self.values {
            AxisValues::Range { min, max, points } => {
                let n = *points;
                let step = (max - min) / (n - 1) as f64;
                (0..n)
                    .map(|i| if i == n - 1 { *max } else { min + step * i as f64 })
                    .collect()
            }
            AxisValues::List { values } => values.clone(),
        }
    }

    pub fn len(&self) -> usize {
        match &self.values {
            AxisValues::Range { points, .. } => *points,
            AxisValues::List { values } => values.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Output {
    Chi,
    Eta,
    C1Plus,
    C1Minus,
    Phase,
    /// Largest real part of the linear drift eigenvalues, 1/s.
    Growth,
}

impl Output {
    pub const ALL: [Output; 6] = [
        Output::Chi,
        Output::Eta,
        Output::C1Plus,
        Output::C1Minus,
        Output::Phase,
        Output::Growth,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Output::Chi => "chi",
            Output::Eta => "eta",
            Output::C1Plus => "c1plus",
            Output::C1Minus => "c1minus",
            Output::Phase => "phase",
            Output::Growth => "growth",
        }
    }

    pub fn parse(s: &str) -> Option<Output> {
        Output::ALL.into_iter().find(|o| o.as_str() == s)
    }

    fn columns(self) -> &'static [&'static str] {
        match self {
            Output::Chi => &["chi"],
            Output::Eta => &["eta"],
            Output::C1Plus => &["c1plus_re", "c1plus_im"],
            Output::C1Minus => &["c1minus_re", "c1minus_im"],
            Output::Phase => &["phase"],
            Output::Growth => &["growth_rate"],
        }
    }
}

/// One curve of a figure: fixed values for some of the axis quantities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Variant {
    pub label: String,
    pub overrides: Vec<(AxisName, f64)>,
}

impl Variant {
    pub fn single(name: AxisName, value: f64) -> Variant {
        Variant {
            label: format!("{}={value}", name.as_str()),
            overrides: vec![(name, value)],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub preset: SweepPreset,
    pub axis1: Axis,
    pub axis2: Option<Axis>,
    pub outputs: Vec<Output>,
    /// Curves emitted side by side; empty means one unlabelled curve.
    pub variants: Vec<Variant>,
    /// Probe detuning used when Δ is not swept.
    pub delta_over_omega_n: f64,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        self.axis1.validate()?;
        if let Some(a2) = &self.axis2 {
            a2.validate()?;
            if a2.name == self.axis1.name {
                return Err(Error::Sweep(format!("both axes are {}", a2.name.as_str())));
            }
        }
        if self.outputs.is_empty() {
            return Err(Error::Sweep("no outputs requested".into()));
        }
        for (i, o) in self.outputs.iter().enumerate() {
            if self.outputs[..i].contains(o) {
                return Err(Error::Sweep(format!("output {} listed twice", o.as_str())));
            }
        }
        let swept: Vec<AxisName> = std::iter::once(self.axis1.name)
            .chain(self.axis2.as_ref().map(|a| a.name))
            .collect();
        for v in &self.variants {
            for (name, _) in &v.overrides {
                if *name == AxisName::DeltaOverOmegaN {
                    return Err(Error::Sweep(format!("variant {}: Δ cannot be fixed per curve", v.label)));
                }
                if swept.contains(name) {
                    return Err(Error::Sweep(format!(
                        "variant {} fixes the swept axis {}",
                        v.label,
                        name.as_str()
                    )));
                }
            }
        }
        if !self.delta_over_omega_n.is_finite() {
            return Err(Error::Sweep("delta_over_omega_n must be finite".into()));
        }
        Ok(())
    }

    fn variant_list(&self) -> Vec<Option<&Variant>> {
        if self.variants.is_empty() {
            vec![None]
        } else {
            self.variants.iter().map(Some).collect()
        }
    }

    pub fn headers(&self) -> Vec<String> {
        let mut h = Vec::new();
        if let Some(a2) = &self.axis2 {
            h.push(a2.name.as_str().to_string());
        }
        h.push(self.axis1.name.as_str().to_string());
        for v in self.variant_list() {
            for o in &self.outputs {
                for c in o.columns() {
                    h.push(match v {
                        Some(v) => format!("{c}[{}]", v.label),
                        None => c.to_string(),
                    });
                }
            }
        }
        h
    }
}

/// Sets one axis quantity on `p` and returns the Δ/ω_n ratio if the axis is Δ.
fn apply_axis(p: &mut SystemParams, name: AxisName, value: f64) -> Option<f64> {
    match name {
        AxisName::DeltaOverOmegaN => return Some(value),
        AxisName::JOverGamma => p.hop_j = value * p.gamma,
        AxisName::KappaOverGamma => p.kappa = value * p.gamma,
        AxisName::S => p.trap_mode = TrapMode::Prescribed { s: value },
    }
    None
}

/// Parameters and Δ/ω_n at one grid point.
pub fn point_params(
    spec: &SweepSpec,
    base: &SystemParams,
    variant: Option<&Variant>,
    axis2: Option<f64>,
    axis1: f64,
) -> (SystemParams, f64) {
    let mut p = *base;
    let mut ratio = spec.delta_over_omega_n;
    if let Some(v) = variant {
        for &(name, value) in &v.overrides {
            apply_axis(&mut p, name, value);
        }
    }
    if let (Some(a2), Some(v)) = (&spec.axis2, axis2) {
        if let Some(r) = apply_axis(&mut p, a2.name, v) {
            ratio = r;
        }
    }
    if let Some(r) = apply_axis(&mut p, spec.axis1.name, axis1) {
        ratio = r;
    }
    (p, ratio)
}

/// Output cells at one point. Failures of the steady state or of the
/// sideband solve turn the numeric cells into `unstable`.
pub fn evaluate_point(p: &SystemParams, delta_over_omega_n: f64, outputs: &[Output]) -> Vec<Cell> {
    let phase = classify_phase(p.hop_j, p.kappa, p.gamma, 0.0).phase;
    let solved = derive(p).and_then(|d| {
        let ss = steady::solve(&d, p)?;
        let sol = solve_sideband_system(&d, p, &ss, delta_over_omega_n * ss.omega_n)?;
        Ok((d, ss, sol))
    });
    let mut cells = Vec::new();
    for o in outputs {
        match (o, &solved) {
            (Output::Phase, _) => cells.push(Cell::Text(phase.as_str().to_string())),
            (_, Err(_)) => cells.extend(o.columns().iter().map(|_| Cell::unstable())),
            (Output::Chi, Ok((_, _, s))) => cells.push(Cell::Num(s.chi)),
            (Output::Eta, Ok((_, _, s))) => cells.push(Cell::Num(s.eta)),
            (Output::C1Plus, Ok((_, _, s))) => {
                cells.extend([Cell::Num(s.a1_plus.re), Cell::Num(s.a1_plus.im)]);
            }
            (Output::C1Minus, Ok((_, _, s))) => {
                // c₁⁻ itself, not its conjugate
                cells.extend([Cell::Num(s.a1_minus_conj.re), Cell::Num(-s.a1_minus_conj.im)]);
            }
            (Output::Growth, Ok((d, ss, _))) => cells.push(Cell::Num(growth_rate(d, p, ss))),
        }
    }
    cells
}

fn with_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Sweep(format!("cannot start {threads} worker threads: {e}")))?;
    Ok(pool.install(f))
}

/// Runs the sweep on `threads` workers (0 picks the number of cores). Rows
/// are ordered with axis 2 outer and axis 1 inner.
pub fn run_sweep(spec: &SweepSpec, base: &SystemParams, threads: usize, timestamp: bool) -> Result<SpectrumTable> {
    spec.validate()?;
    let derived = derive(base)?;
    let a1 = spec.axis1.points();
    let a2: Vec<Option<f64>> = match &spec.axis2 {
        Some(a) => a.points().into_iter().map(Some).collect(),
        None => vec![None],
    };
    let variants = spec.variant_list();
    let grid: Vec<(Option<f64>, f64)> = a2.iter().flat_map(|&y| a1.iter().map(move |&x| (y, x))).collect();

    // every point must be a valid parameter set before anything is computed
    for v in &variants {
        for &(y, x) in &grid {
            let (p, _) = point_params(spec, base, *v, y, x);
            p.validate().map_err(|e| Error::Sweep(format!("grid point {x} ({}): {e}", spec.axis1.name.as_str())))?;
        }
    }

    let rows: Vec<Vec<Cell>> = with_pool(threads, || {
        grid.par_iter()
            .map(|&(y, x)| {
                let mut row = Vec::new();
                if let Some(y) = y {
                    row.push(Cell::Num(y));
                }
                row.push(Cell::Num(x));
                for v in &variants {
                    let (p, ratio) = point_params(spec, base, *v, y, x);
                    row.extend(evaluate_point(&p, ratio, &spec.outputs));
                }
                row
            })
            .collect()
    })?;

    let headers = spec.headers();
    let mut columns: Vec<Column> = headers
        .into_iter()
        .map(|name| Column {
            name,
            values: Vec::with_capacity(rows.len()),
        })
        .collect();
    for row in rows {
        for (c, cell) in columns.iter_mut().zip(row) {
            c.values.push(cell);
        }
    }

    let mut metadata = Metadata::new(*base, derived, timestamp);
    metadata.sweep = Some(spec.clone());
    metadata.steady = variants
        .iter()
        .map(|v| {
            let mut p = *base;
            if let Some(v) = v {
                for &(name, value) in &v.overrides {
                    apply_axis(&mut p, name, value);
                }
            }
            LabelledSteadyState {
                label: v.map_or_else(String::new, |v| v.label.clone()),
                steady: derive(&p).and_then(|d| steady::solve(&d, &p)).ok(),
            }
        })
        .collect();
    Ok(SpectrumTable { metadata, columns })
}

/// Canonical `c₁⁺/ε_p` next to the time-domain estimate at each Δ/ω_n.
pub fn oracle_table(
    base: &SystemParams,
    ratios: &[f64],
    method: &Demodulation,
    threads: usize,
    timestamp: bool,
) -> Result<SpectrumTable> {
    let d = derive(base)?;
    let ss = steady::solve(&d, base)?;
    let rows: Vec<[Cell; 6]> = with_pool(threads, || {
        ratios
            .par_iter()
            .map(|&r| {
                let delta = r * ss.omega_n;
                let canonical = solve_sideband_system(&d, base, &ss, delta).map(|s| s.a1_plus);
                let oracle = demodulated_response(&d, base, &ss, delta, method).map(|o| o.c1_plus);
                match (canonical, oracle) {
                    (Ok(c), Ok(o)) => [
                        Cell::Num(r),
                        Cell::Num(c.re),
                        Cell::Num(c.im),
                        Cell::Num(o.re),
                        Cell::Num(o.im),
                        Cell::Num((o - c).norm() / c.norm()),
                    ],
                    _ => [
                        Cell::Num(r),
                        Cell::unstable(),
                        Cell::unstable(),
                        Cell::unstable(),
                        Cell::unstable(),
                        Cell::unstable(),
                    ],
                }
            })
            .collect()
    })?;
    let names = [
        "delta_over_omega_n",
        "canonical_re",
        "canonical_im",
        "oracle_re",
        "oracle_im",
        "relative_error",
    ];
    let mut columns: Vec<Column> = names
        .iter()
        .map(|n| Column {
            name: n.to_string(),
            values: Vec::with_capacity(rows.len()),
        })
        .collect();
    for row in rows {
        for (c, cell) in columns.iter_mut().zip(row) {
            c.values.push(cell);
        }
    }
    let mut metadata = Metadata::new(*base, d, timestamp);
    metadata.steady = vec![LabelledSteadyState {
        label: String::new(),
        steady: Some(ss),
    }];
    Ok(SpectrumTable { metadata, columns })
}
