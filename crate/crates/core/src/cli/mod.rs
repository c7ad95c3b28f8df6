//! Command-line front end. Every subcommand reads one JSON config and
//! writes plain files; identical inputs give byte-identical outputs. The
//! only wall-clock data goes to a `.log` file next to `--out`.

pub mod config;
pub mod output;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::bands::band_edges;
use crate::construct::{run_construction, verify_records, ConstructionConfig, PhiFunction, StageRecord};
use crate::error::{Error, Result};
use crate::ids::{ids_finite_count, sample_curve, window};
use crate::modulus::{modulus_report, ModulusOptions};
use crate::thouless::{thouless_lyapunov_with, QuadratureOptions};
use crate::transfer::{averaged_lyapunov, discriminant, lyapunov_periodic, PeriodicPotential};

use config::RunConfig;
use output::{csv, json, sibling, svg_polyline, svg_scatter, write_text};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_BUDGET: i32 = 3;
pub const EXIT_INVARIANT: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "logholder", version, about = "Spectral tools for periodic discrete Schrödinger operators")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// JSON run configuration.
    #[arg(long)]
    pub config: PathBuf,
    /// Main output file; standard output if omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Optional SVG plot.
    #[arg(long)]
    pub svg: Option<PathBuf>,
    /// Overrides every seed in the config.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Band edges and total measure.
    Bands(Common),
    /// Exact IDS on the grid, optionally with a finite-volume column.
    Ids {
        #[command(flatten)]
        common: Common,
        #[arg(long = "finite-n")]
        finite_n: Option<usize>,
    },
    /// Lyapunov exponent on the grid.
    Lyapunov(Common),
    /// Thouless integral against the transfer-matrix exponent.
    ThoulessCheck(Common),
    /// Certified stagewise construction.
    Construct {
        #[command(flatten)]
        common: Common,
        /// Potentials file; defaults to `<out>.potentials.json`.
        #[arg(long)]
        potentials: Option<PathBuf>,
    },
    /// Witness pairs, stage ratios and the log-Hölder scan.
    Modulus {
        #[command(flatten)]
        common: Common,
        /// Witness CSV; defaults to `<out>.witness.csv`.
        #[arg(long)]
        witness: Option<PathBuf>,
    },
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Bands(c) | Command::Lyapunov(c) | Command::ThoulessCheck(c) => c,
            Command::Ids { common, .. } | Command::Construct { common, .. } | Command::Modulus { common, .. } => common,
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Command::Bands(_) => "bands",
            Command::Ids { .. } => "ids",
            Command::Lyapunov(_) => "lyapunov",
            Command::ThoulessCheck(_) => "thouless-check",
            Command::Construct { .. } => "construct",
            Command::Modulus { .. } => "modulus",
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidInput(_) => EXIT_CONFIG,
        Error::ConstructionBudgetExceeded { .. } => EXIT_BUDGET,
        Error::InvariantViolation(_) | Error::BandIsolationFailure { .. } | Error::QuadratureFailure { .. } => {
            EXIT_INVARIANT
        }
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let started = std::time::SystemTime::now();
    let result = dispatch(&cli.command);
    let code = match &result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(e)
        }
    };
    if let Some(out) = &cli.command.common().out {
        if code != EXIT_CONFIG || out.exists() {
            let secs = started.duration_since(std::time::UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
            let log = format!(
                "command={}\nconfig={}\nstarted_unix={secs}\nexit_code={code}\n",
                cli.command.name(),
                cli.command.common().config.display()
            );
            let _ = std::fs::write(sibling(out, "log"), log);
        }
    }
    code
}

fn dispatch(cmd: &Command) -> Result<()> {
    let common = cmd.common();
    let (cfg, base) = RunConfig::load(&common.config)?;
    match cmd {
        Command::Bands(c) => cmd_bands(&cfg, &base, c),
        Command::Ids { common, finite_n } => cmd_ids(&cfg, &base, common, *finite_n),
        Command::Lyapunov(c) => cmd_lyapunov(&cfg, &base, c),
        Command::ThoulessCheck(c) => cmd_thouless(&cfg, &base, c),
        Command::Construct { common, potentials } => cmd_construct(&cfg, &base, common, potentials.as_deref()),
        Command::Modulus { common, witness } => cmd_modulus(&cfg, &base, common, witness.as_deref()),
    }
}

fn write_svg(path: Option<&Path>, svg: impl FnOnce() -> String) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, svg()).map_err(|e| output::io_error(p, e)),
        None => Ok(()),
    }
}

fn cmd_bands(cfg: &RunConfig, base: &Path, c: &Common) -> Result<()> {
    let pot = cfg.potential(base)?;
    let bs = band_edges(&pot)?;
    let rows: Vec<Vec<String>> = bs
        .bands
        .iter()
        .enumerate()
        .map(|(i, b)| {
            vec![
                (i + 1).to_string(),
                b.lower.to_string(),
                b.upper.to_string(),
                b.width().to_string(),
                b.thin.to_string(),
            ]
        })
        .collect();
    let mut text = csv(&["band_index", "E_minus", "E_plus", "width", "thin_flag"], &rows);
    text.push_str(&format!("# measure={}\n", bs.measure));
    // Validate the plot before writing anything.
    let plot = match &c.svg {
        Some(_) => {
            let reach = 2.0 + pot.supnorm() + 0.1;
            let pts = crate::grid::EnergyGrid::uniform(-reach, reach, 801)
                .energies()
                .into_iter()
                .map(|e| discriminant(&pot, e).map(|d| (e, d.0.clamp(-4.0, 4.0))))
                .collect::<Result<Vec<_>>>()?;
            Some(svg_polyline(&pts, "discriminant (clipped to [-4, 4])", "E", "D(E)"))
        }
        None => None,
    };
    write_text(c.out.as_deref(), &text)?;
    write_svg(c.svg.as_deref(), || plot.unwrap_or_default())
}

fn cmd_ids(cfg: &RunConfig, base: &Path, c: &Common, finite_n: Option<usize>) -> Result<()> {
    let pot = cfg.potential(base)?;
    let grid = cfg.grid()?;
    let n = finite_n.or(cfg.finite_n);
    if n == Some(0) {
        return Err(Error::InvalidInput("finite_n: must be positive".into()));
    }
    let curve = sample_curve(&pot, &grid)?;
    curve.check()?;
    let finite: Option<Vec<f64>> = match n {
        Some(n) => {
            let w = window(&pot, n);
            Some(curve.samples.iter().map(|s| ids_finite_count(&w, s.0)).collect::<Result<_>>()?)
        }
        None => None,
    };
    let rows: Vec<Vec<String>> = curve
        .samples
        .iter()
        .enumerate()
        .map(|(i, (e, k))| {
            let mut r = vec![e.to_string(), k.to_string()];
            if let Some(f) = &finite {
                r.push(f[i].to_string());
            }
            r
        })
        .collect();
    let header: &[&str] = if finite.is_some() { &["E", "k", "k_N"] } else { &["E", "k"] };
    write_text(c.out.as_deref(), &csv(header, &rows))?;
    write_svg(c.svg.as_deref(), || svg_polyline(&curve.samples, "integrated density of states", "E", "k(E)"))
}

fn cmd_lyapunov(cfg: &RunConfig, base: &Path, c: &Common) -> Result<()> {
    let pot = cfg.potential(base)?;
    let grid = cfg.grid()?.energies();
    let family = cfg.family()?;
    let mut rows = Vec::with_capacity(grid.len());
    let mut pts = Vec::with_capacity(grid.len());
    for &e in &grid {
        let l = lyapunov_periodic(&pot, e)?;
        pts.push((e, l));
        let mut r = vec![e.to_string(), l.to_string()];
        if let Some(f) = &family {
            r.push(averaged_lyapunov(f, e)?.to_string());
        }
        rows.push(r);
    }
    let header: &[&str] = if family.is_some() { &["E", "L", "L_avg"] } else { &["E", "L"] };
    write_text(c.out.as_deref(), &csv(header, &rows))?;
    write_svg(c.svg.as_deref(), || svg_polyline(&pts, "Lyapunov exponent", "E", "L(E)"))
}

fn cmd_thouless(cfg: &RunConfig, base: &Path, c: &Common) -> Result<()> {
    let pot = cfg.potential(base)?;
    let grid = cfg.grid()?.energies();
    let q = cfg.quadrature()?;
    let opts = QuadratureOptions { tolerance: q.tolerance, max_intervals: q.max_intervals };
    let bs = band_edges(&pot)?;
    let mut rows = Vec::with_capacity(grid.len());
    let mut worst: f64 = 0.0;
    let mut pts = Vec::with_capacity(grid.len());
    for &e in &grid {
        let lt = lyapunov_periodic(&pot, e)?;
        let li = thouless_lyapunov_with(&pot, &bs, e, opts)?;
        let d = (lt - li).abs();
        worst = worst.max(d);
        pts.push((e, li));
        rows.push(vec![e.to_string(), lt.to_string(), li.to_string(), d.to_string()]);
    }
    let mut text = csv(&["E", "L_transfer", "L_thouless", "abs_diff"], &rows);
    text.push_str(&format!("# max_abs_diff={worst}\n"));
    write_text(c.out.as_deref(), &text)?;
    write_svg(c.svg.as_deref(), || svg_polyline(&pts, "Thouless integral", "E", "L(E)"))?;
    if worst > q.check_tolerance {
        return Err(Error::InvariantViolation(format!(
            "Thouless and transfer exponents differ by {worst}, above {}",
            q.check_tolerance
        )));
    }
    Ok(())
}

/// What `construct` writes: enough to re-verify every stage from the file
/// alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstructReport {
    pub v0: PeriodicPotential,
    pub phi: PhiFunction,
    pub construction: ConstructionConfig,
    pub stages: Vec<StageRecord>,
    pub failure: Option<FailureSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureSummary {
    pub stage: Option<usize>,
    pub message: String,
    pub best_period: Option<usize>,
    pub best_multiplier: Option<usize>,
    pub best_seed: Option<u64>,
    pub best_measure: Option<f64>,
    pub best_lhs: Option<f64>,
    pub best_rhs: Option<f64>,
    /// `rhs - lhs` of the best rejected candidate.
    pub certificate_gap: Option<f64>,
}

impl FailureSummary {
    fn from_error(e: &Error) -> Self {
        let mut s = FailureSummary {
            stage: None,
            message: e.to_string(),
            best_period: None,
            best_multiplier: None,
            best_seed: None,
            best_measure: None,
            best_lhs: None,
            best_rhs: None,
            certificate_gap: None,
        };
        if let Error::ConstructionBudgetExceeded { stage, best } = e {
            s.stage = Some(*stage);
            s.best_period = Some(best.potential.period());
            s.best_multiplier = Some(best.multiplier);
            s.best_seed = best.seed_used;
            s.best_measure = Some(best.certificate.measure);
            s.best_lhs = Some(best.certificate.lhs);
            s.best_rhs = Some(best.certificate.rhs);
            s.certificate_gap = Some(best.certificate.gap());
        }
        s
    }

    /// Exit code this failure maps to.
    pub fn exit_code(&self) -> i32 {
        if self.certificate_gap.is_some() {
            EXIT_BUDGET
        } else {
            EXIT_INVARIANT
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StagePotential {
    pub j: usize,
    pub values: PeriodicPotential,
}

fn cmd_construct(cfg: &RunConfig, base: &Path, c: &Common, potentials: Option<&Path>) -> Result<()> {
    let v0 = cfg.potential(base)?;
    let phi = cfg.phi()?;
    let mut construction = cfg.construction(&v0)?;
    if let Some(s) = c.seed {
        construction.seed = s;
    }
    let outcome = run_construction(&v0, &phi, &construction)?;
    let failure = outcome.failure.as_ref().map(FailureSummary::from_error);
    let report = ConstructReport { v0: v0.clone(), phi, construction, stages: outcome.records, failure };
    write_text(c.out.as_deref(), &json(&report)?)?;
    let pots_path = potentials.map(Path::to_path_buf).or_else(|| c.out.as_ref().map(|o| sibling(o, "potentials.json")));
    if let Some(p) = pots_path {
        let mut list = vec![StagePotential { j: 0, values: v0 }];
        list.extend(report.stages.iter().map(|r| StagePotential { j: r.j, values: r.potential.clone() }));
        std::fs::write(&p, json(&list)?).map_err(|e| output::io_error(&p, e))?;
    }
    if let Some(svg) = &c.svg {
        let pts: Vec<(f64, f64)> = report.stages.iter().map(|r| (r.j as f64, -r.eps_j.log10())).collect();
        std::fs::write(svg, svg_polyline(&pts, "spectral measure by stage", "stage j", "-log10 eps_j"))
            .map_err(|e| output::io_error(svg, e))?;
    }
    match outcome.failure {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

pub fn load_construct_report(path: &Path) -> Result<ConstructReport> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::InvalidInput(format!("modulus.stages_file: cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| Error::InvalidInput(format!("modulus.stages_file: {}: {e}", path.display())))
}

fn cmd_modulus(cfg: &RunConfig, base: &Path, c: &Common, witness: Option<&Path>) -> Result<()> {
    let m = cfg.modulus()?;
    let report = load_construct_report(&base.join(&m.stages_file))?;
    if report.stages.is_empty() {
        return Err(Error::InvalidInput(format!(
            "modulus.stages_file: {} holds no accepted stages",
            m.stages_file.display()
        )));
    }
    verify_records(&report.v0, &report.phi, &report.construction, &report.stages)?;
    let opts = ModulusOptions {
        probes_per_stage: m.probes_per_stage,
        seed: c.seed.unwrap_or(m.seed),
        base_points: m.base_points,
        offset_ratio: m.offset_ratio,
    };
    let (mut out, witnesses) = modulus_report(&report.stages, &report.phi, opts)?;
    if let Some(f) = &report.failure {
        out.warnings.push(format!("construction stopped early: {}", f.message));
    }
    write_text(c.out.as_deref(), &json(&out)?)?;
    let rows: Vec<Vec<String>> = witnesses
        .iter()
        .map(|w| {
            let r = &report.stages[w.j - 1];
            vec![
                w.j.to_string(),
                r.period.to_string(),
                r.eps_j.to_string(),
                w.e0.to_string(),
                w.e1.to_string(),
                w.band.lower.to_string(),
                w.band.upper.to_string(),
                w.ej.to_string(),
                w.delta_k.to_string(),
                w.band_increment.to_string(),
                w.ratio.to_string(),
            ]
        })
        .collect();
    let text =
        csv(&["j", "p_j", "eps_j", "E0", "E1", "E_minus", "E_plus", "Ej", "deltaK", "band_increment", "ratio"], &rows);
    let wpath = witness.map(Path::to_path_buf).or_else(|| c.out.as_ref().map(|o| sibling(o, "witness.csv")));
    match wpath {
        Some(p) => std::fs::write(&p, text).map_err(|e| output::io_error(&p, e))?,
        None => print!("{text}"),
    }
    write_svg(c.svg.as_deref(), || {
        let pts: Vec<(f64, f64)> = witnesses.iter().map(|w| ((1.0 / (w.e0 - w.ej).abs()).ln(), w.delta_k)).collect();
        svg_scatter(&pts, "witness pairs", "log(1/|dE|)", "|dk|")
    })
}
