//! Command-line front end. Exit codes: 0 success, 1 failed verdicts,
//! 2 usage or configuration errors, 3 numerical or capacity errors.

use std::ffi::OsString;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::LevelFilter;

use crate::analytic::{ModeOperator, ModeTable};
use crate::assembly::DiscreteFunction;
use crate::config::{ConfigBuilder, StudyConfig};
use crate::error::{Error, Result};
use crate::krylov::{operator_norm, NormMetric};
use crate::probes::{probe_exponent_fit, ProbeGeometry, DEFAULT_EPSILON, DEFAULT_M};
use crate::report::emit_report;
use crate::selftest::run_selftest;
use crate::studies::{compare_with_mie, run_study_with, solve_plane_wave, LayerCache};

/// `println!` that surfaces write errors (a closed pipe) instead of panicking.
macro_rules! out {
    ($($arg:tt)*) => {
        writeln!(std::io::stdout(), $($arg)*)?
    };
}

macro_rules! out_raw {
    ($($arg:tt)*) => {
        write!(std::io::stdout(), $($arg)*)?
    };
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERDICT: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "hbl", version, about = "2-D Helmholtz exterior-Dirichlet BEM lab")]
pub struct Cli {
    /// Worker threads (falls back to HBL_THREADS, then all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Repeat for more log output.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a study and write report.json, table.csv and plot files.
    Study(StudyArgs),
    /// Solve the direct CFIE for a plane wave once.
    Solve(SolveArgs),
    /// Assemble one operator and report its L² norm.
    Assemble(AssembleArgs),
    /// Circle mode eigenvalues and DtN symbol.
    Modes(ModesArgs),
    /// Quasimode probe ratios and their exponent.
    Probe(ProbeArgs),
    /// Oracle-consistency suite.
    Selftest(SelftestArgs),
}

#[derive(Debug, Args, Default)]
pub struct ProblemArgs {
    #[arg(long)]
    pub geometry: Option<String>,
    #[arg(long)]
    pub k: Option<String>,
    #[arg(long = "k-list")]
    pub k_list: Option<String>,
    /// k | -k | <c>k | 0
    #[arg(long, allow_hyphen_values = true)]
    pub eta: Option<String>,
    #[arg(long)]
    pub ppw: Option<String>,
    /// hk | hk43
    #[arg(long = "mesh-rule")]
    pub mesh_rule: Option<String>,
    #[arg(long)]
    pub tol: Option<String>,
    #[arg(long)]
    pub maxit: Option<String>,
}

impl ProblemArgs {
    fn apply(&self, b: &mut ConfigBuilder) -> Result<()> {
        if self.k.is_some() {
            b.unset("k_list");
        }
        if self.k_list.is_some() {
            b.unset("k");
        }
        let pairs = [
            ("geometry", &self.geometry),
            ("k", &self.k),
            ("k_list", &self.k_list),
            ("eta", &self.eta),
            ("ppw", &self.ppw),
            ("mesh_rule", &self.mesh_rule),
            ("tol", &self.tol),
            ("maxit", &self.maxit),
        ];
        for (key, value) in pairs {
            if let Some(v) = value {
                b.set(key, v)?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Args)]
pub struct StudyArgs {
    /// key = value configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Study name when no config file is given.
    #[arg(long)]
    pub study: Option<String>,
    #[command(flatten)]
    pub problem: ProblemArgs,
    /// Output directory; nothing is written without it.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum OperatorArg {
    Slp,
    Dlp,
    Adlp,
    Direct,
    Indirect,
}

#[derive(Debug, Args)]
pub struct AssembleArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[arg(long, value_enum, default_value = "slp")]
    pub operator: OperatorArg,
    /// Writes `<operator>.bin` and `<operator>.json` here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ModesArgs {
    #[arg(long)]
    pub k: f64,
    #[arg(long, default_value_t = 1.0)]
    pub radius: f64,
    /// Coupling parameter as a rule (k, -k, <c>k, 0).
    #[arg(long, allow_hyphen_values = true, default_value = "k")]
    pub eta: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ProbeArgs {
    /// segment | parabola
    #[arg(long, default_value = "segment")]
    pub geometry: String,
    #[arg(long = "k-list", default_value = "32,64,128,256")]
    pub k_list: String,
    #[arg(long)]
    pub derivative: bool,
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    pub epsilon: f64,
    #[arg(long, default_value_t = DEFAULT_M)]
    pub m: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SelftestArgs {
    /// Writes selftest.json here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn threads(cli: Option<usize>) -> Result<Option<usize>> {
    if cli.is_some() {
        return Ok(cli);
    }
    match std::env::var("HBL_THREADS") {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map(Some)
            .map_err(|_| Error::config("HBL_THREADS", format!("expected a thread count, got `{v}`"))),
        Err(_) => Ok(None),
    }
}

fn out_dir(dir: &Path) -> Result<&Path> {
    fs::create_dir_all(dir)?;
    Ok(dir)
}

/// A single-wavenumber configuration for the unit subcommands.
fn problem_config(p: &ProblemArgs) -> Result<StudyConfig> {
    if p.k_list.is_some() {
        return Err(Error::config("k_list", "this subcommand takes a single --k"));
    }
    let mut b = ConfigBuilder::new();
    b.set("study", "norms")?;
    p.apply(&mut b)?;
    if p.k.is_none() {
        return Err(Error::config("k", "missing --k"));
    }
    b.build()
}

fn run_study_cmd(a: &StudyArgs) -> Result<i32> {
    let mut b = match &a.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Error::config("config", format!("cannot read {}: {e}", path.display())))?;
            ConfigBuilder::parse_text(&text)?
        }
        None => ConfigBuilder::new(),
    };
    if let Some(s) = &a.study {
        b.set("study", s)?;
    }
    a.problem.apply(&mut b)?;
    let cfg = b.build()?;
    let report = run_study_with(&cfg, &LayerCache::new())?;
    out_raw!("{}", report.table_csv());
    for f in &report.fits {
        let theory = f.theory.map(|t| format!(", theory {t:.4}")).unwrap_or_default();
        out!("fit {}: slope {:.4} ± {:.4}{theory}", f.quantity, f.fit.slope, f.fit.stderr);
    }
    for v in &report.verdicts {
        out!("{} {}: {} ({})", if v.passed { "PASS" } else { "FAIL" }, v.criterion, v.check, v.detail);
    }
    if let Some(dir) = &a.out {
        for path in emit_report(&report, out_dir(dir)?)? {
            log::info!("wrote {}", path.display());
        }
    }
    Ok(if report.passed() { EXIT_OK } else { EXIT_VERDICT })
}

fn run_solve(a: &SolveArgs) -> Result<i32> {
    let cfg = problem_config(&a.problem)?;
    let k = cfg.k_list[0];
    let eta = cfg.eta.eta(k);
    if eta == 0.0 {
        return Err(Error::config("eta", "η = 0 does not give an invertible system"));
    }
    let curve = cfg.curve()?;
    let disc = LayerCache::new().get(&curve, cfg.dof_for(&curve, k, cfg.mesh_rule, cfg.ppw)?, k)?;
    let sol = solve_plane_wave(&disc, eta, cfg.tol, cfg.maxit)?;
    out!("geometry {}", curve.name());
    out!("k {k}");
    out!("eta {eta}");
    out!("dof {}", sol.dof);
    out!("iterations {}", sol.trace.iterations);
    out!("converged {}", sol.trace.converged);
    out!("final_residual {:.6e}", sol.trace.final_residual());
    let mie = match compare_with_mie(&disc.mesh, &sol.coefficients, k) {
        Ok(c) => {
            out!("mie_relative_error {:.6e}", c.relative);
            out!("quasi_optimality {:.6}", c.quasi_optimality);
            Some(c)
        }
        Err(Error::Unsupported(_)) => None,
        Err(e) => return Err(e),
    };
    if let Some(dir) = &a.out {
        let dir = out_dir(dir)?;
        fs::write(dir.join("residuals.csv"), sol.trace.to_csv())?;
        let density = DiscreteFunction { coefficients: sol.coefficients.clone(), mesh_id: disc.mesh.id() };
        let summary = serde_json::json!({
            "geometry": curve.name(),
            "k": k,
            "eta": eta,
            "dof": sol.dof,
            "iterations": sol.trace.iterations,
            "converged": sol.trace.converged,
            "residuals": sol.trace.residuals,
            "mie_relative_error": mie.map(|c| c.relative),
            "density_l2": density.l2_norm(&disc.mesh.mass()),
            "density": sol.coefficients.iter().map(|c| [c.re, c.im]).collect::<Vec<_>>(),
        });
        fs::write(dir.join("solve.json"), serde_json::to_string_pretty(&summary)?)?;
    }
    Ok(if sol.trace.converged { EXIT_OK } else { EXIT_VERDICT })
}

fn run_assemble(a: &AssembleArgs) -> Result<i32> {
    let cfg = problem_config(&a.problem)?;
    let k = cfg.k_list[0];
    let curve = cfg.curve()?;
    let disc = LayerCache::new().get(&curve, cfg.dof_for(&curve, k, cfg.mesh_rule, cfg.ppw)?, k)?;
    let eta = cfg.eta.eta(k);
    let op = match a.operator {
        OperatorArg::Slp => disc.layers.slp_operator(),
        OperatorArg::Dlp => disc.layers.dlp_operator(),
        OperatorArg::Adlp => disc.layers.adlp_operator(),
        OperatorArg::Direct => disc.layers.combined_direct(eta),
        OperatorArg::Indirect => disc.layers.combined_indirect(eta),
    };
    out!("operator {}", op.kind.name());
    out!("dof {}", op.dof());
    out!("h {:.6e}", op.h);
    out!("l2_norm {:.10e}", operator_norm(&op, NormMetric::L2)?);
    if let Some(dir) = &a.out {
        let stem = out_dir(dir)?.join(op.kind.name());
        let (bin, json) = op.dump(&stem)?;
        log::info!("wrote {} and {}", bin.display(), json.display());
    }
    Ok(EXIT_OK)
}

fn run_modes(a: &ModesArgs) -> Result<i32> {
    let rule = crate::config::EtaRule::parse(&a.eta)
        .ok_or_else(|| Error::config("eta", format!("expected k, -k, <c>k or 0, got `{}`", a.eta)))?;
    let t = ModeTable::build(a.k, a.radius, rule.eta(a.k))?;
    let csv = t.to_csv();
    match &a.out {
        Some(dir) => fs::write(out_dir(dir)?.join("modes.csv"), &csv)?,
        None => out_raw!("{csv}"),
    }
    out!("sup_slp {:.10e}", t.sup_abs(ModeOperator::Slp));
    out!("sup_dlp {:.10e}", t.sup_abs(ModeOperator::Dlp));
    Ok(EXIT_OK)
}

fn run_probe(a: &ProbeArgs) -> Result<i32> {
    let geometry = match a.geometry.as_str() {
        "segment" => ProbeGeometry::Segment,
        "parabola" => ProbeGeometry::Parabola,
        other => return Err(Error::config("geometry", format!("probes need segment or parabola, got `{other}`"))),
    };
    let k_list = a
        .k_list
        .split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|_| Error::config("k_list", format!("bad wavenumber `{s}`"))))
        .collect::<Result<Vec<f64>>>()?;
    let sweep = probe_exponent_fit(geometry, a.derivative, &k_list, a.epsilon, a.m)?;
    let csv = sweep.to_csv();
    match &a.out {
        Some(dir) => fs::write(out_dir(dir)?.join("probe.csv"), &csv)?,
        None => out_raw!("{csv}"),
    }
    out!("slope {:.6} ± {:.6}", sweep.fit.slope, sweep.fit.stderr);
    Ok(EXIT_OK)
}

fn run_selftest_cmd(a: &SelftestArgs) -> Result<i32> {
    let report = run_selftest(&LayerCache::new());
    for c in &report.checks {
        out!("{} [{}] {} {}", if c.passed { "PASS" } else { "FAIL" }, c.module, c.name, c.detail);
    }
    let failed = report.failures().count();
    out!("{} checks, {failed} failed, {} ms", report.checks.len(), report.elapsed_ms);
    if let Some(dir) = &a.out {
        fs::write(out_dir(dir)?.join("selftest.json"), serde_json::to_string_pretty(&report)?)?;
    }
    Ok(if failed == 0 { EXIT_OK } else { EXIT_VERDICT })
}

fn dispatch(cli: &Cli) -> Result<i32> {
    match &cli.command {
        Command::Study(a) => run_study_cmd(a),
        Command::Solve(a) => run_solve(a),
        Command::Assemble(a) => run_assemble(a),
        Command::Modes(a) => run_modes(a),
        Command::Probe(a) => run_probe(a),
        Command::Selftest(a) => run_selftest_cmd(a),
    }
}

/// Parses `argv` (program name first), runs the command and returns the exit code.
pub fn parse_and_dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let level = match cli.verbose {
        0 => LevelFilter::Warn,
        1 => LevelFilter::Info,
        _ => LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new().filter_level(level).try_init();
    let outcome = threads(cli.threads).and_then(|n| {
        let mut pool = rayon::ThreadPoolBuilder::new();
        if let Some(n) = n {
            pool = pool.num_threads(n);
        }
        let pool = pool.build().map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
        pool.install(|| dispatch(&cli))
    });
    match outcome {
        Ok(code) => code,
        Err(Error::Io(e)) if e.kind() == std::io::ErrorKind::BrokenPipe => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn usage_errors_exit_2() {
        assert_eq!(parse_and_dispatch(["hbl", "frobnicate"]), EXIT_USAGE);
        assert_eq!(parse_and_dispatch(["hbl", "study", "--bogus"]), EXIT_USAGE);
        assert_eq!(parse_and_dispatch(["hbl"]), EXIT_USAGE);
        assert_eq!(parse_and_dispatch(["hbl", "solve", "--k", "16", "--eta", "0"]), EXIT_USAGE);
        assert_eq!(parse_and_dispatch(["hbl", "solve", "--k", "x"]), EXIT_USAGE);
        assert_eq!(parse_and_dispatch(["hbl", "--help"]), EXIT_OK);
    }

    #[test]
    fn capacity_errors_exit_3() {
        assert_eq!(parse_and_dispatch(["hbl", "assemble", "--k", "2000"]), 3);
    }

    #[test]
    fn negative_eta_is_a_value() {
        let cli = Cli::try_parse_from(["hbl", "solve", "--k", "8", "--eta", "-k"]).unwrap();
        let Command::Solve(a) = cli.command else { panic!() };
        assert_eq!(a.problem.eta.as_deref(), Some("-k"));
    }

    #[test]
    fn overrides_replace_config_wavenumbers() {
        let mut b = ConfigBuilder::parse_text("study = norms\nk = 16").unwrap();
        ProblemArgs { k_list: Some("8,16".into()), ..Default::default() }.apply(&mut b).unwrap();
        assert_eq!(b.build().unwrap().k_list, vec![8.0, 16.0]);
    }
}
