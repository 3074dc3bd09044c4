//! Command-line front end. One command per invocation; reports go to
//! `--out` or standard output.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde::Serialize;

use crate::bands::{estimate_thresholds_with, mourre_constant, sample_bands, ThresholdOptions};
use crate::crystal::{builtin, load_crystal_file, load_perturbation_file, PerturbationSpec, PowerLaw, QuotientGraph};
use crate::crystal::{EdgeField, SiteField};
use crate::realspace::{build_h, build_h0, conjugate_j, spectrum, torus_oracle, BoxSpec};
use crate::scatter::{self, gaussian_packet, wave_operator_probe, Method};
use crate::symbols::{check_decay, check_long_range, DecayMode, DecayProfile};
use crate::{Error, Result};

pub const THREADS_ENV: &str = "CRYSTAL_SPECTRA_THREADS";

#[derive(Debug, Parser)]
#[command(name = "crystal-spectra", version, about = "Spectra and scattering on periodic graphs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// `builtin:NAME` or a crystal file.
    #[arg(long)]
    pub crystal: String,
    /// Write the report here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Short,
    Long,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Chebyshev,
    DenseExp,
}

#[derive(Debug, Clone, Args)]
pub struct PacketArgs {
    /// Packet center, one coordinate per axis (defaults to the origin).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub center: Option<Vec<f64>>,
    #[arg(long, default_value_t = 10.0)]
    pub sigma: f64,
    /// Packet momentum per axis (defaults to pi/2 along the first axis).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub momentum: Option<Vec<f64>>,
    /// Zero-based vertex carrying the packet.
    #[arg(long, default_value_t = 0)]
    pub vertex: usize,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a crystal and optional perturbation file.
    Validate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        perturbation: Option<PathBuf>,
    },
    /// Fiber eigenvalues on the uniform torus grid, as CSV.
    Bands {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        grid: usize,
    },
    /// Eigenvalues of H (or J H J*) on a window, as CSV.
    Spectrum {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        perturbation: Option<PathBuf>,
        #[arg(long = "box")]
        box_spec: BoxSpec,
        /// Only the lowest k eigenvalues.
        #[arg(long)]
        k: Option<usize>,
        /// Report the spectrum of J H J* in l2(X, m0).
        #[arg(long)]
        conjugate_j: bool,
    },
    /// Threshold energies, as JSON.
    Thresholds {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 64)]
        grid: usize,
        #[arg(long, default_value_t = 40)]
        refine: usize,
        /// Merge tolerance for nearby threshold values.
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Mourre constant on an interval, as JSON.
    Mourre {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_parser = parse_interval, allow_hyphen_values = true)]
        interval: (f64, f64),
        #[arg(long, default_value_t = 256)]
        grid: usize,
        /// Degeneracy tolerance.
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Torus spectrum against the fiber union.
    Oracle {
        #[command(flatten)]
        common: Common,
        #[arg(long = "N")]
        n: usize,
    },
    /// Dyadic-shell decay evidence for a perturbation, as JSON.
    Decay {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        perturbation: Option<PathBuf>,
        #[arg(long, value_enum)]
        mode: ModeArg,
        #[arg(long, default_value_t = 20)]
        levels: usize,
    },
    /// Evolve a Gaussian packet under H, as CSV.
    Evolve {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        perturbation: Option<PathBuf>,
        #[arg(long = "box")]
        box_spec: BoxSpec,
        #[arg(long, value_delimiter = ',', required = true)]
        times: Vec<f64>,
        #[arg(long, value_enum, default_value = "chebyshev")]
        method: MethodArg,
        #[command(flatten)]
        packet: PacketArgs,
    },
    /// Finite-time wave-operator probe, as JSON.
    Scatter {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        perturbation: Option<PathBuf>,
        #[arg(long = "box")]
        box_spec: BoxSpec,
        #[arg(long, value_parser = parse_interval, allow_hyphen_values = true)]
        interval: (f64, f64),
        #[arg(long, value_delimiter = ',', required = true)]
        times: Vec<f64>,
        #[command(flatten)]
        packet: PacketArgs,
    },
}

fn parse_interval(s: &str) -> std::result::Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or_else(|| format!("interval `{s}` must be a,b"))?;
    let a: f64 = a.trim().parse().map_err(|_| format!("bad interval endpoint `{a}`"))?;
    let b: f64 = b.trim().parse().map_err(|_| format!("bad interval endpoint `{b}`"))?;
    if !(a.is_finite() && b.is_finite() && a <= b) {
        return Err(format!("interval [{a}, {b}] is not well ordered"));
    }
    Ok((a, b))
}

pub fn load_crystal_source(source: &str) -> Result<QuotientGraph> {
    match source.strip_prefix("builtin:") {
        Some(name) => builtin(name),
        None => load_crystal_file(source),
    }
}

fn load_spec(path: Option<&Path>, g: &QuotientGraph) -> Result<PerturbationSpec> {
    match path {
        Some(p) => load_perturbation_file(p, g),
        None => Ok(PerturbationSpec::empty()),
    }
}

fn json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

fn csv_number(x: f64) -> String {
    format!("{x:.16e}")
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Validate { common, .. }
            | Command::Bands { common, .. }
            | Command::Spectrum { common, .. }
            | Command::Thresholds { common, .. }
            | Command::Mourre { common, .. }
            | Command::Oracle { common, .. }
            | Command::Decay { common, .. }
            | Command::Evolve { common, .. }
            | Command::Scatter { common, .. } => common,
        }
    }
}

/// Result of a command: the report text, and whether it records a failed
/// numerical check.
pub struct Output {
    pub text: String,
    pub failed: Option<String>,
}

impl From<String> for Output {
    fn from(text: String) -> Self {
        Self { text, failed: None }
    }
}

/// Runs one command and returns its report without writing it anywhere.
pub fn execute(command: &Command) -> Result<Output> {
    let g = load_crystal_source(&command.common().crystal)?;
    match command {
        Command::Validate { perturbation, .. } => {
            #[derive(Serialize)]
            struct Summary {
                valid: bool,
                dimension: usize,
                vertices: usize,
                edges: usize,
                perturbation: Option<PerturbationSummary>,
            }
            #[derive(Serialize)]
            struct PerturbationSummary {
                short_potential: bool,
                long_potential: bool,
                measure: bool,
            }
            let p = perturbation
                .as_deref()
                .map(|path| load_perturbation_file(path, &g))
                .transpose()?;
            Ok(json(&Summary {
                valid: true,
                dimension: g.dimension(),
                vertices: g.num_vertices(),
                edges: g.num_unoriented_edges(),
                perturbation: p.map(|p| PerturbationSummary {
                    short_potential: !p.potential_short.is_empty(),
                    long_potential: p.potential_long.is_some(),
                    measure: p.has_measure_perturbation(),
                }),
            })?
            .into())
        }
        Command::Bands { grid, .. } => {
            let s = sample_bands(&g, *grid, false)?;
            let mut out = String::new();
            let header: Vec<String> = (1..=g.dimension())
                .map(|k| format!("xi_{k}"))
                .chain((1..=g.num_vertices()).map(|j| format!("lambda_{j}")))
                .collect();
            out.push_str(&header.join(","));
            out.push('\n');
            for (xi, vals) in s.xi.iter().zip(&s.values) {
                let row: Vec<String> = xi.iter().chain(vals).map(|&x| csv_number(x)).collect();
                out.push_str(&row.join(","));
                out.push('\n');
            }
            Ok(out.into())
        }
        Command::Spectrum {
            perturbation,
            box_spec,
            k,
            conjugate_j: use_j,
            ..
        } => {
            let p = load_spec(perturbation.as_deref(), &g)?;
            let mut op = build_h(&g, &p, *box_spec)?;
            if *use_j {
                op = conjugate_j(&op, &g, &p)?;
            }
            let values = spectrum(&op, *k)?;
            let mut out = String::from("index,eigenvalue\n");
            for (i, v) in values.iter().enumerate() {
                let _ = writeln!(out, "{i},{}", csv_number(*v));
            }
            Ok(out.into())
        }
        Command::Thresholds { grid, refine, tol, .. } => {
            let mut opts = ThresholdOptions::new(*grid, *refine);
            if let Some(t) = tol {
                if !(*t > 0.0) {
                    return Err(Error::InvalidArgument("--tol must be positive".into()));
                }
                opts.merge_tol = *t;
            }
            Ok(json(&estimate_thresholds_with(&g, &opts)?)?.into())
        }
        Command::Mourre { interval, grid, tol, .. } => Ok(json(&mourre_constant(&g, *interval, *grid, *tol)?)?.into()),
        Command::Oracle { n, .. } => {
            let r = torus_oracle(&g, *n)?;
            let verdict = if r.pass { "PASS" } else { "FAIL" };
            let text = format!(
                "grid={} eigenvalues={} deviation={:e} tolerance={:e} {verdict}\n",
                r.grid, r.eigenvalues, r.deviation, r.tolerance
            );
            Ok(Output {
                text,
                failed: (!r.pass).then(|| format!("oracle deviation {:e} exceeds {:e}", r.deviation, r.tolerance)),
            })
        }
        Command::Decay {
            perturbation,
            mode,
            levels,
            ..
        } => {
            let p = load_spec(perturbation.as_deref(), &g)?;
            decay_report(&g, &p, *mode, *levels)
        }
        Command::Evolve {
            perturbation,
            box_spec,
            times,
            method,
            packet,
            ..
        } => {
            let p = load_spec(perturbation.as_deref(), &g)?;
            let op = build_h(&g, &p, *box_spec)?;
            let psi = packet_vector(&op, packet)?;
            let method = match method {
                MethodArg::Chebyshev => Method::Chebyshev,
                MethodArg::DenseExp => Method::DenseExp,
            };
            let d = g.dimension();
            let mut out = String::from("time,norm");
            for k in 1..=d {
                let _ = write!(out, ",position_{k}");
            }
            out.push('\n');
            for &t in times {
                if !t.is_finite() {
                    return Err(Error::InvalidArgument(format!("time {t} is not finite")));
                }
                // each time from the initial packet, so rows do not depend on
                // one another
                let v = scatter::evolve(&op, &psi, t, method)?;
                let mass: f64 = v.iter().map(|z| z.norm_sqr()).sum();
                let mut position = vec![0.0; d];
                for (i, z) in v.iter().enumerate() {
                    let cell = op.site(i).0;
                    for k in 0..d {
                        position[k] += cell[k] as f64 * z.norm_sqr() / mass;
                    }
                }
                let mut row = vec![csv_number(t), csv_number(mass.sqrt())];
                row.extend(position.into_iter().map(csv_number));
                out.push_str(&row.join(","));
                out.push('\n');
            }
            Ok(out.into())
        }
        Command::Scatter {
            perturbation,
            box_spec,
            interval,
            times,
            packet,
            ..
        } => {
            let p = load_spec(perturbation.as_deref(), &g)?;
            let h0 = build_h0(&g, *box_spec)?;
            let psi = packet_vector(&h0, packet)?;
            Ok(json(&wave_operator_probe(&g, &p, *interval, &psi, times, *box_spec)?)?.into())
        }
    }
}

fn packet_vector(op: &crate::realspace::RealSpaceOperator, a: &PacketArgs) -> Result<Vec<Complex64>> {
    let d = op.dimension();
    let center = a.center.clone().unwrap_or_else(|| vec![0.0; d]);
    let momentum = a.momentum.clone().unwrap_or_else(|| {
        let mut m = vec![0.0; d];
        m[0] = std::f64::consts::FRAC_PI_2;
        m
    });
    gaussian_packet(op, &center, a.sigma, &momentum, a.vertex)
}

fn site_profile(field: &SiteField) -> DecayProfile {
    envelope_profile(
        field.table.iter().map(|e| (e.cell.clone(), e.value)).collect(),
        field.envelope.as_ref(),
    )
}

fn edge_profile(field: &EdgeField) -> DecayProfile {
    envelope_profile(
        field.table.iter().map(|e| (e.cell.clone(), e.value)).collect(),
        field.envelope.as_ref(),
    )
}

fn envelope_profile(mut table: Vec<(crate::crystal::Cell, f64)>, law: Option<&PowerLaw>) -> DecayProfile {
    // entries sharing a cell add up to a bound for that cell
    table.sort_by(|a, b| a.0.cmp(&b.0));
    let mut merged: Vec<(crate::crystal::Cell, f64)> = Vec::new();
    for (c, v) in table {
        match merged.last_mut() {
            Some((last, acc)) if *last == c => *acc += v.abs(),
            _ => merged.push((c, v.abs())),
        }
    }
    let mut parts = vec![DecayProfile::Table(merged)];
    if let Some(law) = law {
        parts.push(DecayProfile::PowerLaw {
            amplitude: law.amplitude.abs() * law.max_abs_coefficient(),
            exponent: law.exponent,
        });
    }
    DecayProfile::Sum(parts)
}

fn decay_report(g: &QuotientGraph, p: &PerturbationSpec, mode: ModeArg, levels: usize) -> Result<Output> {
    match mode {
        ModeArg::Short => {
            #[derive(Serialize)]
            struct ShortReport {
                potential_short: crate::symbols::DecayReport,
                vertex_measure: crate::symbols::DecayReport,
                edge_measure: crate::symbols::DecayReport,
            }
            let r = ShortReport {
                potential_short: check_decay(&site_profile(&p.potential_short), DecayMode::Short, levels)?,
                vertex_measure: check_decay(&site_profile(&p.vertex_measure_delta), DecayMode::Short, levels)?,
                edge_measure: check_decay(&edge_profile(&p.edge_measure_delta), DecayMode::Short, levels)?,
            };
            Ok(json(&r)?.into())
        }
        ModeArg::Long => {
            let (values, diffs) = match &p.potential_long {
                None => (DecayProfile::Zero, vec![DecayProfile::Zero; g.dimension()]),
                Some(law) => {
                    let amplitude = law.amplitude.abs() * law.max_abs_coefficient();
                    let values = DecayProfile::PowerLaw {
                        amplitude,
                        exponent: law.exponent,
                    };
                    let diff = DecayProfile::AxisDifference {
                        amplitude,
                        exponent: law.exponent,
                    };
                    (values, vec![diff; g.dimension()])
                }
            };
            Ok(json(&check_long_range(&values, &diffs, levels)?)?.into())
        }
    }
}

/// Configures the worker pool from [`THREADS_ENV`].
pub fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::InvalidArgument(format!("{THREADS_ENV}={raw:?} is not a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::InvalidArgument(format!("cannot size the worker pool: {e}")))
}

/// Runs the command and writes its report. The report is written even when
/// it records a failed check, which is then returned as an error.
pub fn run(cli: &Cli) -> Result<()> {
    let output = execute(&cli.command)?;
    match &cli.command.common().out {
        Some(path) => std::fs::write(path, &output.text)?,
        None => print!("{}", output.text),
    }
    match output.failed {
        Some(msg) => Err(Error::SolverNonConvergence(msg)),
        None => Ok(()),
    }
}

/// Exit status for an error: 1 for bad input, 2 for numerical failure.
pub fn exit_code(err: &Error) -> i32 {
    if err.is_validation() {
        1
    } else {
        2
    }
}
