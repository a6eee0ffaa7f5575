use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use nmit::config::ConfigFile;
use nmit::model::{derive, DerivedQuantities, SystemParams};
use nmit::oracle::{Demodulation, TrajectorySpec, STEPS_PER_TIMESCALE};
use nmit::phase::{classify_phase, PhaseReport};
use nmit::steady::{self, SteadyState};
use nmit::sweep::{oracle_table, run_sweep, Axis, AxisName, Output, SweepPreset, SweepSpec};
use nmit::table::{self, write_atomic, Format, SpectrumTable};
use nmit::Error;

#[derive(Parser, Debug)]
#[command(name = "nmit", version, about = "Probe absorption and transmission of a levitated nanosphere in a gain/loss cavity pair")]
struct Cli {
    /// Parameter file (key = value, SI units, rates with _hz or _rads).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// fig2, fig3, fig4, fig5, fig6 or custom.
    #[arg(long, global = true)]
    preset: Option<String>,
    /// Output file; stdout when omitted.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = FormatArg::Csv)]
    format: FormatArg,
    /// Leave the run timestamp out of the metadata.
    #[arg(long, global = true)]
    no_timestamp: bool,
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// Exit with status 2 when any point is unstable.
    #[arg(long, global = true)]
    strict: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum MethodArg {
    Periodic,
    Relaxation,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print the derived constants.
    Derive,
    /// Print the steady-state operating point.
    Steady,
    /// Tabulate the response against Δ/ω_n for the resolved parameters.
    Spectrum {
        #[arg(long, default_value_t = -2.0, allow_hyphen_values = true)]
        min: f64,
        #[arg(long, default_value_t = 2.0, allow_hyphen_values = true)]
        max: f64,
        #[arg(long, default_value_t = 2001)]
        points: usize,
        /// Comma-separated: chi, eta, c1plus, c1minus, phase, growth.
        #[arg(long, default_value = "chi,eta")]
        outputs: String,
    },
    /// Run the preset sweep, optionally with a different grid.
    Sweep {
        /// `name=min:max:points` or `name=v1,v2,...`; names are
        /// delta_over_omega_n, J_over_gamma, kappa_over_gamma, s.
        #[arg(long, allow_hyphen_values = true)]
        axis1: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        axis2: Option<String>,
        /// Remove the preset's second axis.
        #[arg(long, conflicts_with = "axis2")]
        no_axis2: bool,
        #[arg(long)]
        outputs: Option<String>,
        /// Probe detuning when Δ is not swept.
        #[arg(long, allow_hyphen_values = true)]
        delta_over_omega_n: Option<f64>,
    },
    /// Classify the PT phase of the cavity pair.
    Phase,
    /// Compare the linear solve with the time-domain response.
    Oracle {
        #[arg(long, default_value_t = -2.0, allow_hyphen_values = true)]
        min: f64,
        #[arg(long, default_value_t = 2.0, allow_hyphen_values = true)]
        max: f64,
        #[arg(long, default_value_t = 41)]
        points: usize,
        #[arg(long, value_enum, default_value_t = MethodArg::Periodic)]
        method: MethodArg,
        /// Integration time for the relaxation method, s. Defaults to 20/γ_n,
        /// capped at 10⁷ steps.
        #[arg(long)]
        t_end: Option<f64>,
        #[arg(long, default_value_t = 0.75)]
        transient_fraction: f64,
        #[arg(long, default_value_t = STEPS_PER_TIMESCALE)]
        steps_per_timescale: f64,
    },
}

#[derive(Serialize)]
struct Report<'a, T: Serialize> {
    version: String,
    params: &'a SystemParams,
    derived: &'a DerivedQuantities,
    #[serde(flatten)]
    extra: T,
}

enum Failure {
    Input(Error),
    Instability(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Input(e)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(e)) if e.is_instability() && cli.strict => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(Failure::Input(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(Failure::Instability(msg)) => {
            eprintln!("unstable: {msg}");
            ExitCode::from(2)
        }
    }
}

fn resolve(cli: &Cli) -> Result<(SweepPreset, SystemParams), Error> {
    let file = match &cli.config {
        Some(path) => Some(ConfigFile::load(path)?),
        None => None,
    };
    let preset = match &cli.preset {
        Some(name) => SweepPreset::parse(name)
            .ok_or_else(|| Error::Sweep(format!("unknown preset `{name}`")))?,
        None => file.as_ref().and_then(|f| f.preset).unwrap_or(SweepPreset::Custom),
    };
    let params = match &file {
        Some(f) => f.apply(preset.params())?,
        None => {
            let p = preset.params();
            p.validate()?;
            p
        }
    };
    Ok((preset, params))
}

fn parse_outputs(text: &str) -> Result<Vec<Output>, Error> {
    text.split(',')
        .map(|s| {
            Output::parse(s.trim())
                .ok_or_else(|| Error::Sweep(format!("unknown output `{}`", s.trim())))
        })
        .collect()
}

fn format(cli: &Cli) -> Format {
    match cli.format {
        FormatArg::Csv => Format::Csv,
        FormatArg::Json => Format::Json,
    }
}

fn write_text(cli: &Cli, text: &str) -> Result<(), Error> {
    match &cli.output {
        Some(path) => write_atomic(path, text.as_bytes()),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn write_report<T: Serialize>(cli: &Cli, params: &SystemParams, derived: &DerivedQuantities, extra: T) -> Result<(), Error> {
    let report = Report {
        version: table::version_string(),
        params,
        derived,
        extra,
    };
    let mut text = serde_json::to_string_pretty(&report).expect("report serializes");
    text.push('\n');
    write_text(cli, &text)
}

fn emit_table(cli: &Cli, t: &SpectrumTable) -> Result<(), Failure> {
    t.emit(format(cli), cli.output.as_deref())?;
    let unstable = t
        .columns
        .iter()
        .flat_map(|c| &c.values)
        .filter(|v| v.is_unstable())
        .count();
    if cli.strict && unstable > 0 {
        return Err(Failure::Instability(format!("{unstable} cells flagged unstable")));
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let (preset, params) = resolve(cli)?;
    let timestamp = !cli.no_timestamp;
    match &cli.command {
        Command::Derive => {
            let d = derive(&params)?;
            write_report(cli, &params, &d, serde_json::json!({}))?;
        }
        Command::Steady => {
            let d = derive(&params)?;
            let ss: SteadyState = steady::solve(&d, &params)?;
            let growth = nmit::stability::growth_rate(&d, &params, &ss);
            write_report(
                cli,
                &params,
                &d,
                serde_json::json!({ "steady": ss, "growth_rate": growth }),
            )?;
            if cli.strict && growth >= 0.0 {
                return Err(Failure::Instability(format!("operating point grows at {growth:e} 1/s")));
            }
        }
        Command::Phase => {
            let d = derive(&params)?;
            let delta_d = steady::solve(&d, &params).map(|ss| ss.delta_d).unwrap_or(0.0);
            let report: PhaseReport = classify_phase(params.hop_j, params.kappa, params.gamma, delta_d);
            write_report(cli, &params, &d, serde_json::json!({ "phase": report }))?;
        }
        Command::Spectrum {
            min,
            max,
            points,
            outputs,
        } => {
            let spec = SweepSpec {
                preset,
                axis1: Axis::range(AxisName::DeltaOverOmegaN, *min, *max, *points),
                axis2: None,
                outputs: parse_outputs(outputs)?,
                variants: Vec::new(),
                delta_over_omega_n: 1.0,
            };
            let t = run_sweep(&spec, &params, cli.threads, timestamp)?;
            emit_table(cli, &t)?;
        }
        Command::Sweep {
            axis1,
            axis2,
            no_axis2,
            outputs,
            delta_over_omega_n,
        } => {
            let mut spec = preset.spec();
            if let Some(a) = axis1 {
                spec.axis1 = Axis::parse(a)?;
            }
            if let Some(a) = axis2 {
                spec.axis2 = Some(Axis::parse(a)?);
            }
            if *no_axis2 {
                spec.axis2 = None;
            }
            if let Some(o) = outputs {
                spec.outputs = parse_outputs(o)?;
            }
            if let Some(r) = delta_over_omega_n {
                spec.delta_over_omega_n = *r;
            }
            let t = run_sweep(&spec, &params, cli.threads, timestamp)?;
            emit_table(cli, &t)?;
        }
        Command::Oracle {
            min,
            max,
            points,
            method,
            t_end,
            transient_fraction,
            steps_per_timescale,
        } => {
            let axis = Axis::range(AxisName::DeltaOverOmegaN, *min, *max, *points);
            axis.validate()?;
            let method = match method {
                MethodArg::Periodic => Demodulation::PeriodicOrbit {
                    steps_per_timescale: *steps_per_timescale,
                    allow_unstable: !cli.strict,
                },
                MethodArg::Relaxation => {
                    let d = derive(&params)?;
                    let ss = steady::solve(&d, &params)?;
                    let dt = nmit::oracle::default_dt(&params, &ss, *steps_per_timescale);
                    // 20/γ_n settles the mechanics fully but is usually far
                    // beyond the step budget, so the default is capped
                    let t_end = t_end.unwrap_or((20.0 / params.gamma_n).min(1e7 * dt));
                    Demodulation::Relaxation(TrajectorySpec {
                        t_end,
                        dt,
                        transient_fraction: *transient_fraction,
                        drive_on: true,
                    })
                }
            };
            let t = oracle_table(&params, &axis.points(), &method, cli.threads, timestamp)?;
            emit_table(cli, &t)?;
        }
    }
    Ok(())
}
