//! Time-domain cross-checks.
//!
//! [`relax_nonlinear`] integrates the full classical equations of motion and
//! lets them settle, which checks the steady-state algebra.
//! [`demodulated_response`] drives the linearized fluctuation equations with a
//! coherent probe and extracts `c₁⁺` by projecting `δc₁(t)` onto `e^{−iΔt}`,
//! which checks the sideband solve. Both use fixed-step classical RK4.

use std::f64::consts::TAU;
use std::ops::{Add, Mul};

use nalgebra::{DMatrix, DVector, Schur};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DerivedQuantities, SystemParams, TrapMode, HBAR};
use crate::steady::{self, SteadyState};

/// Upper bound on the number of steps of a single trajectory.
pub const MAX_STEPS: f64 = 1e8;
/// Default number of steps per shortest time scale.
pub const STEPS_PER_TIMESCALE: f64 = 200.0;
/// Relative derivative level at which a nonlinear trajectory counts as settled.
/// A trajectory released from rest rings with an amplitude close to its
/// offset, so stopping at 10⁻⁶ would leave a 10⁻⁶ relative error in the
/// position.
pub const SETTLE_TOL: f64 = 1e-8;
/// Magnitude, in units of the drive scale, treated as divergence.
pub const DIVERGENCE_FACTOR: f64 = 1e12;

const I: C64 = C64::new(0.0, 1.0);

fn rk4_step<T, const N: usize, F>(f: &F, t: f64, y: &[T; N], h: f64) -> [T; N]
where
    T: Copy + Add<Output = T> + Mul<f64, Output = T>,
    F: Fn(f64, &[T; N]) -> [T; N],
{
    let shift = |base: &[T; N], k: &[T; N], s: f64| -> [T; N] {
        let mut out = *base;
        for (o, k) in out.iter_mut().zip(k) {
            *o = *o + *k * s;
        }
        out
    };
    let k1 = f(t, y);
    let k2 = f(t + 0.5 * h, &shift(y, &k1, 0.5 * h));
    let k3 = f(t + 0.5 * h, &shift(y, &k2, 0.5 * h));
    let k4 = f(t + h, &shift(y, &k3, h));
    let mut out = *y;
    for i in 0..N {
        out[i] = out[i] + (k1[i] + k2[i] * 2.0 + k3[i] * 2.0 + k4[i]) * (h / 6.0);
    }
    out
}

/// Time derivatives of the classical state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NonlinearRates {
    pub x_dot: f64,
    pub p_dot: f64,
    pub c1: C64,
    pub c2: C64,
}

/// Right-hand sides of the classical equations of motion without the probe.
/// The Coulomb force is taken from a self-consistent trap mode and is zero
/// for a prescribed one.
pub fn nonlinear_rhs(
    d: &DerivedQuantities,
    p: &SystemParams,
    delta_d: f64,
    mech: &[f64; 2],
    fields: [C64; 2],
) -> NonlinearRates {
    let sigma = match p.trap_mode {
        TrapMode::SelfConsistent { sigma } => sigma,
        TrapMode::Prescribed { .. } => 0.0,
    };
    rates(d, p, delta_d, sigma, mech[0], mech[1], fields[0], fields[1])
}

#[allow(clippy::too_many_arguments)]
fn rates(
    d: &DerivedQuantities,
    p: &SystemParams,
    delta_d: f64,
    sigma: f64,
    x: f64,
    mom: f64,
    c1: C64,
    c2: C64,
) -> NonlinearRates {
    let (s, c) = (d.k * x).sin_cos();
    // sin(2kx) = 2 sin cos
    let force = -HBAR * d.g_n * d.k * c1.norm_sqr() * 2.0 * s * c + sigma - p.gamma_n * mom;
    let c1_dot = -C64::new(p.gamma, delta_d) * c1 + I * p.hop_j * c2 + I * (d.g_n * c * c) * c1
        + d.omega_d;
    let c2_dot = -C64::new(-p.kappa, delta_d) * c2 + I * p.hop_j * c1;
    NonlinearRates {
        x_dot: mom / d.mass,
        p_dot: force,
        c1: c1_dot,
        c2: c2_dot,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySpec {
    /// Total integration time, s.
    pub t_end: f64,
    /// Upper bound on the step, s. The integrator may shrink it to fit whole
    /// beat periods.
    pub dt: f64,
    /// Portion of the run discarded before demodulation.
    pub transient_fraction: f64,
    /// Whether the probe is applied.
    pub drive_on: bool,
}

impl TrajectorySpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::Trajectory(format!("dt = {} must be positive", self.dt)));
        }
        if !(self.t_end > 0.0) || !self.t_end.is_finite() {
            return Err(Error::Trajectory(format!("t_end = {} must be positive", self.t_end)));
        }
        if self.t_end / self.dt > MAX_STEPS {
            return Err(Error::Trajectory(format!(
                "{:e} steps exceed the limit of {MAX_STEPS:e}",
                self.t_end / self.dt
            )));
        }
        if !(0.5..=0.95).contains(&self.transient_fraction) {
            return Err(Error::Trajectory(format!(
                "transient_fraction = {} outside [0.5, 0.95]",
                self.transient_fraction
            )));
        }
        Ok(())
    }
}

/// Shortest time scale of the linearized dynamics divided by
/// `steps_per_timescale`.
pub fn default_dt(p: &SystemParams, ss: &SteadyState, steps_per_timescale: f64) -> f64 {
    let mut scale = TAU / ss.omega_n;
    scale = scale.min(1.0 / p.gamma);
    for period in [ss.delta_c, ss.delta_d] {
        if period != 0.0 {
            scale = scale.min(TAU / period.abs());
        }
    }
    for rate in [p.kappa, p.hop_j] {
        if rate != 0.0 {
            scale = scale.min(1.0 / rate.abs());
        }
    }
    scale / steps_per_timescale
}

/// Classical state `(x, p, c₁, c₂)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NonlinearState {
    pub x: f64,
    pub p: f64,
    pub c1: C64,
    pub c2: C64,
}

impl NonlinearState {
    pub const ZERO: NonlinearState = NonlinearState {
        x: 0.0,
        p: 0.0,
        c1: C64::new(0.0, 0.0),
        c2: C64::new(0.0, 0.0),
    };

    fn to_array(self) -> [f64; 6] {
        [self.x, self.p, self.c1.re, self.c1.im, self.c2.re, self.c2.im]
    }

    fn from_array(y: &[f64; 6]) -> Self {
        NonlinearState {
            x: y[0],
            p: y[1],
            c1: C64::new(y[2], y[3]),
            c2: C64::new(y[4], y[5]),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Relaxation {
    pub state: NonlinearState,
    pub time: f64,
    pub steps: u64,
    /// All derivatives fell below [`SETTLE_TOL`] of their running peaks.
    pub converged: bool,
}

/// Drive detuning and Coulomb force used by the nonlinear equations. A
/// red-sideband drive or a prescribed trap is resolved through the steady
/// state solver.
fn resolve_drive(d: &DerivedQuantities, p: &SystemParams) -> Result<(f64, f64)> {
    use crate::model::DriveDetuning;
    match (p.delta_d, p.trap_mode) {
        (DriveDetuning::Fixed { value }, TrapMode::SelfConsistent { sigma }) => Ok((value, sigma)),
        (_, TrapMode::SelfConsistent { sigma }) => Ok((steady::solve(d, p)?.delta_d, sigma)),
        (_, TrapMode::Prescribed { .. }) => {
            let ss = steady::solve(d, p)?;
            Ok((ss.delta_d, ss.sigma_implied))
        }
    }
}

/// Integrates the classical equations from `initial` (the origin by default)
/// until every derivative has dropped below [`SETTLE_TOL`] of its peak, or
/// until `spec.t_end`.
pub fn relax_nonlinear(
    d: &DerivedQuantities,
    p: &SystemParams,
    spec: &TrajectorySpec,
    initial: Option<NonlinearState>,
) -> Result<Relaxation> {
    if spec.drive_on {
        return Err(Error::Trajectory("relaxation runs without the probe".into()));
    }
    if !(spec.dt > 0.0) || spec.t_end / spec.dt > MAX_STEPS || !(spec.t_end > 0.0) {
        return Err(Error::Trajectory(format!(
            "t_end = {:e}, dt = {:e} is not a usable step plan",
            spec.t_end, spec.dt
        )));
    }
    let (delta_d, sigma) = resolve_drive(d, p)?;
    let f = |_t: f64, y: &[f64; 6]| -> [f64; 6] {
        let r = rates(d, p, delta_d, sigma, y[0], y[1], C64::new(y[2], y[3]), C64::new(y[4], y[5]));
        [r.x_dot, r.p_dot, r.c1.re, r.c1.im, r.c2.re, r.c2.im]
    };
    let field_limit = DIVERGENCE_FACTOR * d.omega_d / p.gamma;
    let length_limit = DIVERGENCE_FACTOR / d.k;

    let steps = (spec.t_end / spec.dt).ceil() as u64;
    let h = spec.t_end / steps as f64;
    let mut y = initial.unwrap_or(NonlinearState::ZERO).to_array();
    let mut peaks = [0.0_f64; 4];
    for n in 0..steps {
        let t = n as f64 * h;
        let r = f(t, &y);
        let mags = [
            r[0].abs(),
            r[1].abs(),
            r[2].hypot(r[3]),
            r[4].hypot(r[5]),
        ];
        for (pk, m) in peaks.iter_mut().zip(mags) {
            *pk = pk.max(m);
        }
        if n > 0 && mags.iter().zip(peaks).all(|(m, pk)| *m <= SETTLE_TOL * pk) {
            return Ok(Relaxation {
                state: NonlinearState::from_array(&y),
                time: t,
                steps: n,
                converged: true,
            });
        }
        y = rk4_step(&f, t, &y, h);
        let field = y[2].hypot(y[3]).max(y[4].hypot(y[5]));
        if !(field <= field_limit) || !(y[0].abs() <= length_limit) {
            return Err(Error::Diverged {
                time: t + h,
                magnitude: field,
            });
        }
    }
    Ok(Relaxation {
        state: NonlinearState::from_array(&y),
        time: spec.t_end,
        steps,
        converged: false,
    })
}

/// Linearized fluctuation dynamics on `(q, u, δc₁, δc₁†, δc₂, δc₂†)` with
/// `δx = ℓ q`, `δẋ = ℓ ω_n u`. The two field components and their adjoints
/// are integrated as independent complex variables; `q` and `u` stay real
/// because the probe drives `δc₁` and `δc₁†` with conjugate amplitudes.
struct LinearModel {
    omega_n: f64,
    gamma_n: f64,
    gamma: f64,
    kappa: f64,
    delta_c: f64,
    delta_d: f64,
    hop_j: f64,
    /// `G ℓ`.
    coupling: C64,
    /// Whether the active cavity participates (`J ≠ 0`).
    active: bool,
}

impl LinearModel {
    fn new(d: &DerivedQuantities, p: &SystemParams, ss: &SteadyState) -> Self {
        let ell = (2.0 * HBAR / (d.mass * ss.omega_n)).sqrt();
        LinearModel {
            omega_n: ss.omega_n,
            gamma_n: p.gamma_n,
            gamma: p.gamma,
            kappa: p.kappa,
            delta_c: ss.delta_c,
            delta_d: ss.delta_d,
            hop_j: p.hop_j,
            coupling: ss.g_eff * ell,
            active: p.hop_j != 0.0,
        }
    }

    /// Homogeneous part plus the probe terms `f_plus e^{−iΔt}` on `δc₁` and
    /// `f_minus e^{+iΔt}` on `δc₁†`.
    fn rhs(&self, t: f64, y: &[C64; 6], delta: f64, f_plus: C64, f_minus: C64) -> [C64; 6] {
        let [q, u, a1, b1, a2, b2] = *y;
        let g = self.coupling;
        let j = self.hop_j;
        // ħ/(m ℓ ω_n) = ℓ/2
        let force = (g * b1 + g.conj() * a1) * 0.5;
        let phase = C64::from_polar(1.0, -delta * t);
        [
            u * self.omega_n,
            -q * self.omega_n - u * self.gamma_n - force,
            -C64::new(self.gamma, self.delta_c) * a1 + I * j * a2 - I * g * q + f_plus * phase,
            -C64::new(self.gamma, -self.delta_c) * b1 - I * j * b2
                + I * g.conj() * q
                + f_minus * phase.conj(),
            C64::new(self.kappa, -self.delta_d) * a2 + I * j * a1,
            C64::new(self.kappa, self.delta_d) * b2 - I * j * b1,
        ]
    }
}

/// How the stationary probe response is extracted from the time domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Demodulation {
    /// Integrate from rest, discard the transient, project the rest of the
    /// run over whole beat periods.
    Relaxation(TrajectorySpec),
    /// Solve for the periodic orbit by multiple shooting over one beat period
    /// and project that orbit. Needs no transient, so it also works when the
    /// mechanical damping is very slow or the operating point is unstable.
    PeriodicOrbit {
        steps_per_timescale: f64,
        /// Return the orbit even when the operating point grows.
        allow_unstable: bool,
    },
}

impl Default for Demodulation {
    fn default() -> Self {
        Demodulation::PeriodicOrbit {
            steps_per_timescale: STEPS_PER_TIMESCALE,
            allow_unstable: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DemodulatedResponse {
    /// Projection of `δc₁(t)` onto `e^{−iΔt}`, before normalization.
    pub raw_projection: C64,
    /// `c₁⁺ / ε_p`.
    pub c1_plus: C64,
    /// `c₁⁻ / ε_p*`.
    pub c1_minus: C64,
    /// Step actually used, s.
    pub dt: f64,
    /// Whole beat periods inside the projection window.
    pub periods: u64,
    /// The projection window was shortened to a whole number of periods.
    pub window_adjusted: bool,
    /// Largest growth rate of the linear dynamics estimated from the
    /// one-segment propagator, 1/s. Only set by the periodic-orbit method.
    pub growth_rate: Option<f64>,
}

impl DemodulatedResponse {
    pub fn is_stable(&self) -> bool {
        self.growth_rate.is_none_or(|g| g < 0.0)
    }
}

/// Time-domain estimate of `c₁⁺ / ε_p` at probe detuning `delta`.
pub fn demodulated_response(
    d: &DerivedQuantities,
    p: &SystemParams,
    ss: &SteadyState,
    delta: f64,
    method: &Demodulation,
) -> Result<DemodulatedResponse> {
    let model = LinearModel::new(d, p, ss);
    let eps = C64::new(d.eps_p, 0.0);
    if delta == 0.0 {
        // e^{±iΔt} coincide; separate the sidebands with two probe phases
        let a = demodulate_at(&model, p, ss, delta, eps, method)?;
        let b = demodulate_at(&model, p, ss, delta, eps * I, method)?;
        let sum = a.raw_projection;
        let quad = b.raw_projection;
        let plus = (sum - I * quad) * 0.5;
        let minus = (sum + I * quad) * 0.5;
        return Ok(DemodulatedResponse {
            raw_projection: plus,
            c1_plus: plus / eps,
            c1_minus: minus / eps.conj(),
            ..a
        });
    }
    demodulate_at(&model, p, ss, delta, eps, method)
}

/// Runs one demodulation with probe amplitude `eps`; at `Δ = 0` the raw
/// projection holds the sum of both sidebands.
fn demodulate_at(
    model: &LinearModel,
    p: &SystemParams,
    ss: &SteadyState,
    delta: f64,
    eps: C64,
    method: &Demodulation,
) -> Result<DemodulatedResponse> {
    match *method {
        Demodulation::Relaxation(spec) => relaxation_demod(model, delta, eps, &spec),
        Demodulation::PeriodicOrbit {
            steps_per_timescale,
            allow_unstable,
        } => {
            let dt_max = default_dt(p, ss, steps_per_timescale);
            let r = periodic_demod(model, delta, eps, dt_max)?;
            if !allow_unstable && !r.is_stable() {
                return Err(Error::Diverged {
                    time: f64::INFINITY,
                    magnitude: r.growth_rate.unwrap_or(f64::NAN),
                });
            }
            Ok(r)
        }
    }
}

fn beat_period(delta: f64, omega_n: f64) -> f64 {
    if delta == 0.0 {
        TAU / omega_n
    } else {
        TAU / delta.abs()
    }
}

fn relaxation_demod(
    model: &LinearModel,
    delta: f64,
    eps: C64,
    spec: &TrajectorySpec,
) -> Result<DemodulatedResponse> {
    spec.validate()?;
    let period = beat_period(delta, model.omega_n);
    let per_period = (period / spec.dt).ceil() as u64;
    let h = period / per_period as f64;
    let total = (spec.t_end / h).round() as u64;
    let window_steps = ((1.0 - spec.transient_fraction) * total as f64).floor() as u64;
    let periods = window_steps / per_period;
    if periods == 0 {
        return Err(Error::Trajectory(format!(
            "projection window of {window_steps} steps is shorter than one beat period ({per_period} steps)"
        )));
    }
    let used = periods * per_period;
    let start = total - used;
    let (f_plus, f_minus) = if spec.drive_on {
        (eps, eps.conj())
    } else {
        (C64::new(0.0, 0.0), C64::new(0.0, 0.0))
    };
    let f = |t: f64, y: &[C64; 6]| model.rhs(t, y, delta, f_plus, f_minus);
    let limit = DIVERGENCE_FACTOR * (eps.norm() / model.gamma).max(f64::MIN_POSITIVE);

    let mut y = [C64::new(0.0, 0.0); 6];
    let mut plus = C64::new(0.0, 0.0);
    let mut minus = C64::new(0.0, 0.0);
    for n in 0..total {
        let t = n as f64 * h;
        if n >= start {
            let rot = C64::from_polar(1.0, delta * t);
            plus += y[2] * rot;
            minus += y[2] * rot.conj();
        }
        y = rk4_step(&f, t, &y, h);
        let mag = y.iter().map(|z| z.norm()).fold(0.0, f64::max);
        if !(mag <= limit) {
            return Err(Error::Diverged {
                time: t + h,
                magnitude: mag,
            });
        }
    }
    let plus = plus / used as f64;
    let minus = minus / used as f64;
    Ok(DemodulatedResponse {
        raw_projection: plus,
        c1_plus: if eps.norm() == 0.0 { C64::new(0.0, 0.0) } else { plus / eps },
        c1_minus: if eps.norm() == 0.0 { C64::new(0.0, 0.0) } else { minus / eps.conj() },
        dt: h,
        periods,
        window_adjusted: used != window_steps,
        growth_rate: None,
    })
}

/// Growth allowed across one shooting segment before the period is split
/// further (in e-folds).
const SEGMENT_EFOLDS: f64 = 8.0;

fn periodic_demod(model: &LinearModel, delta: f64, eps: C64, dt_max: f64) -> Result<DemodulatedResponse> {
    let period = beat_period(delta, model.omega_n);
    // log-norm bound on the growth rate of the homogeneous dynamics
    let bound = model.kappa.max(0.0) + model.hop_j.abs() + model.coupling.norm();
    let segments = ((period * bound / SEGMENT_EFOLDS).ceil() as usize).max(1);
    let seg_len = period / segments as f64;
    let seg_steps = (seg_len / dt_max).ceil() as usize;
    let h = seg_len / seg_steps as f64;
    let dim = if model.active { 6 } else { 4 };

    let propagate = |y0: [C64; 6], t0: f64, f_plus: C64, f_minus: C64| -> [C64; 6] {
        let f = |t: f64, y: &[C64; 6]| model.rhs(t, y, delta, f_plus, f_minus);
        let mut y = y0;
        for n in 0..seg_steps {
            y = rk4_step(&f, t0 + n as f64 * h, &y, h);
        }
        y
    };
    let zero = C64::new(0.0, 0.0);

    // one-segment propagator
    let mut m = DMatrix::<C64>::zeros(dim, dim);
    for c in 0..dim {
        let mut e = [zero; 6];
        e[c] = C64::new(1.0, 0.0);
        let col = propagate(e, 0.0, zero, zero);
        for r in 0..dim {
            m[(r, c)] = col[r];
        }
    }
    // particular responses to each probe term over the first segment; a
    // segment starting at t_k sees them rotated by e^{∓iΔt_k}
    let b_plus = propagate([zero; 6], 0.0, eps, zero);
    let b_minus = propagate([zero; 6], 0.0, zero, eps.conj());

    let multipliers = Schur::new(m.clone())
        .eigenvalues()
        .ok_or_else(|| Error::Trajectory("propagator eigenvalues did not converge".into()))?;
    let growth_rate = multipliers
        .iter()
        .map(|z| z.norm().ln() / seg_len)
        .fold(f64::NEG_INFINITY, f64::max);

    // cyclic block system: y_{k+1} − M y_k = b_k, y_0 − M y_{K−1} = b_{K−1}
    let n = dim * segments;
    let mut sys = DMatrix::<C64>::zeros(n, n);
    let mut rhs = DVector::<C64>::zeros(n);
    for k in 0..segments {
        let next = (k + 1) % segments;
        let t_k = k as f64 * seg_len;
        let rot = C64::from_polar(1.0, -delta * t_k);
        for r in 0..dim {
            sys[(next * dim + r, next * dim + r)] += C64::new(1.0, 0.0);
            for c in 0..dim {
                sys[(next * dim + r, k * dim + c)] -= m[(r, c)];
            }
            rhs[next * dim + r] = b_plus[r] * rot + b_minus[r] * rot.conj();
        }
    }
    let starts = sys
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Trajectory("periodic orbit is not unique (unit multiplier)".into()))?;

    // march each segment from its own start and project δc₁
    let mut plus = zero;
    let mut minus = zero;
    for k in 0..segments {
        let t0 = k as f64 * seg_len;
        let mut y = [zero; 6];
        for r in 0..dim {
            y[r] = starts[k * dim + r];
        }
        let f = |t: f64, y: &[C64; 6]| model.rhs(t, y, delta, eps, eps.conj());
        for s in 0..seg_steps {
            let t = t0 + s as f64 * h;
            let rot = C64::from_polar(1.0, delta * t);
            plus += y[2] * rot;
            minus += y[2] * rot.conj();
            y = rk4_step(&f, t, &y, h);
        }
    }
    let samples = (segments * seg_steps) as f64;
    let plus = plus / samples;
    let minus = minus / samples;
    let scale = eps.norm();
    Ok(DemodulatedResponse {
        raw_projection: plus,
        c1_plus: if scale == 0.0 { zero } else { plus / eps },
        c1_minus: if scale == 0.0 { zero } else { minus / eps.conj() },
        dt: h,
        periods: 1,
        window_adjusted: false,
        growth_rate: Some(growth_rate),
    })
}
