//! Command-line front end. [`run`] is the whole program; the binary only
//! forwards `std::env::args` and the exit code.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::field::FieldParams;
use crate::integrator::{integrate, IntegratorControls, ProblemParams, StopPolicy};
use crate::io;
use crate::ladder::{classify, find_alpha_k, linspace, sweep};
use crate::portrait::detect_events;
use crate::verify::{run_checks, verification_controls, CheckId, VerificationPlan};

pub const OUT_DIR_ENV: &str = "BOUNDSTATE_LAB_OUT_DIR";
pub const DEFAULT_OUT_DIR: &str = "boundstate-out";

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NUMERIC: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_CHECKS: i32 = 4;

#[derive(Parser, Debug)]
#[command(name = "boundstate-lab", version, about = "Radial shooting for -Δu = f(u): solve, classify, ladder, sweep, verify, export")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Integrate one shot; write the trajectory CSV and the phase portrait JSON.
    Solve(Flags),
    /// Classify one shot.
    Classify(Flags),
    /// Bracket the initial values with exactly k zeros.
    Ladder(Flags),
    /// Classify a grid of initial values.
    Sweep(Flags),
    /// Run a verification preset.
    Verify(Flags),
    /// Write functional traces along one shot.
    Export(Flags),
}

#[derive(Args, Debug, Default, Clone)]
struct Flags {
    /// Flat key=value file with the same keys as the long flags.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n: Option<u32>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    /// `lo:hi` or `lo..hi`.
    #[arg(long = "alpha-range")]
    alpha_range: Option<String>,
    /// Number of sweep points.
    #[arg(long)]
    count: Option<usize>,
    /// A single k or an inclusive range `a..b`.
    #[arg(long)]
    k: Option<String>,
    /// Relative bracket width for ladder entries.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    rmax: Option<f64>,
    #[arg(long = "abs-tol")]
    abs_tol: Option<f64>,
    #[arg(long = "rel-tol")]
    rel_tol: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// json or csv.
    #[arg(long)]
    format: Option<String>,
    #[arg(long)]
    preset: Option<String>,
    /// Comma-separated check ids; replaces the preset's list.
    #[arg(long)]
    checks: Option<String>,
}

const CONFIG_KEYS: [&str; 14] = [
    "n", "p", "alpha", "alpha-range", "count", "k", "tol", "rmax", "abs-tol", "rel-tol", "out", "format", "preset",
    "checks",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CommandKind {
    Solve,
    Classify,
    Ladder,
    Sweep,
    Verify,
    Export,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

/// Fully resolved settings, echoed into every JSON output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: CommandKind,
    pub n: u32,
    pub p: f64,
    pub alpha: Option<f64>,
    pub alpha_range: Option<(f64, f64)>,
    pub count: Option<usize>,
    pub k_range: Option<(usize, usize)>,
    pub tol: Option<f64>,
    pub controls: IntegratorControls,
    pub out_dir: PathBuf,
    pub format: Format,
    pub preset: Option<String>,
    pub checks: Option<Vec<CheckId>>,
}

impl RunConfig {
    pub fn field(&self) -> Result<FieldParams> {
        FieldParams::new(self.n, self.p)
    }
}

struct Sources {
    flags: Flags,
    file: BTreeMap<String, String>,
}

impl Sources {
    fn raw(&self, key: &str) -> Option<String> {
        let f = &self.flags;
        let flag = match key {
            "n" => f.n.map(|x| x.to_string()),
            "p" => f.p.map(|x| x.to_string()),
            "alpha" => f.alpha.map(|x| x.to_string()),
            "alpha-range" => f.alpha_range.clone(),
            "count" => f.count.map(|x| x.to_string()),
            "k" => f.k.clone(),
            "tol" => f.tol.map(|x| x.to_string()),
            "rmax" => f.rmax.map(|x| x.to_string()),
            "abs-tol" => f.abs_tol.map(|x| x.to_string()),
            "rel-tol" => f.rel_tol.map(|x| x.to_string()),
            "out" => f.out.as_ref().map(|x| x.display().to_string()),
            "format" => f.format.clone(),
            "preset" => f.preset.clone(),
            "checks" => f.checks.clone(),
            _ => None,
        };
        flag.or_else(|| self.file.get(key).cloned())
    }

    fn parsed<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        self.raw(key)
            .map(|s| s.parse::<T>().map_err(|e| LabError::Config(format!("--{key} '{s}': {e}"))))
            .transpose()
    }
}

fn parse_alpha_range(s: &str) -> Result<(f64, f64)> {
    let (a, b) = s
        .split_once("..")
        .or_else(|| s.split_once(':'))
        .ok_or_else(|| LabError::Config(format!("alpha range '{s}' must be lo:hi")))?;
    let parse = |x: &str| x.trim().parse::<f64>().map_err(|e| LabError::Config(format!("alpha range '{s}': {e}")));
    let (lo, hi) = (parse(a)?, parse(b)?);
    if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
        return Err(LabError::Config(format!("alpha range '{s}' must satisfy 0 < lo <= hi")));
    }
    Ok((lo, hi))
}

fn parse_k_range(s: &str) -> Result<(usize, usize)> {
    let bad = |e: String| LabError::Config(format!("k '{s}': {e}"));
    let parse = |x: &str| x.trim().parse::<usize>().map_err(|e| bad(e.to_string()));
    let (a, b) = match s.split_once("..") {
        Some((a, b)) => (parse(a)?, parse(b.trim_start_matches('='))?),
        None => {
            let k = parse(s)?;
            (k, k)
        }
    };
    if a > b {
        return Err(bad("empty range".into()));
    }
    Ok((a, b))
}

fn check_tolerance(name: &str, x: f64) -> Result<f64> {
    if (1e-15..=1e-3).contains(&x) {
        Ok(x)
    } else {
        Err(LabError::Config(format!("{name} = {x} outside [1e-15, 1e-3]")))
    }
}

fn resolve(command: CommandKind, flags: Flags, env_out: Option<String>) -> Result<RunConfig> {
    let file = match &flags.config {
        Some(path) => io::read_config_file(path).map_err(|e| LabError::Config(format!("{}: {e}", path.display())))?,
        None => BTreeMap::new(),
    };
    if let Some(k) = file.keys().find(|k| !CONFIG_KEYS.contains(&k.as_str())) {
        return Err(LabError::Config(format!("unknown config key '{k}'")));
    }
    let src = Sources { flags, file };
    let n = src.parsed::<u32>("n")?.ok_or_else(|| LabError::Config("--n is required".into()))?;
    let p = src.parsed::<f64>("p")?.ok_or_else(|| LabError::Config("--p is required".into()))?;

    let mut controls = match command {
        CommandKind::Verify => verification_controls(),
        _ => IntegratorControls::default(),
    };
    if let Some(x) = src.parsed::<f64>("abs-tol")? {
        controls.abs_tol = check_tolerance("abs-tol", x)?;
    }
    if let Some(x) = src.parsed::<f64>("rel-tol")? {
        controls.rel_tol = check_tolerance("rel-tol", x)?;
    }
    if let Some(x) = src.parsed::<f64>("rmax")? {
        controls.r_max = x;
    }
    controls.validate().map_err(|e| LabError::Config(e.to_string()))?;

    let alpha = src.parsed::<f64>("alpha")?;
    if let Some(a) = alpha {
        if !(a > 0.0 && a.is_finite()) {
            return Err(LabError::Config(format!("alpha = {a} must be positive")));
        }
    }
    let needs_alpha = matches!(command, CommandKind::Solve | CommandKind::Classify | CommandKind::Export);
    if needs_alpha && alpha.is_none() {
        return Err(LabError::Config("--alpha is required".into()));
    }
    let alpha_range = src.raw("alpha-range").map(|s| parse_alpha_range(&s)).transpose()?;
    let count = src.parsed::<usize>("count")?;
    let (alpha_range, count) = if command == CommandKind::Sweep {
        let range = alpha_range.ok_or_else(|| LabError::Config("--alpha-range is required".into()))?;
        let count = count.unwrap_or(50);
        if count == 0 {
            return Err(LabError::Config("--count must be positive".into()));
        }
        (Some(range), Some(count))
    } else {
        (alpha_range, count)
    };
    let k_range = src.raw("k").map(|s| parse_k_range(&s)).transpose()?;
    let (k_range, tol) = if command == CommandKind::Ladder {
        let tol = check_tolerance("tol", src.parsed::<f64>("tol")?.unwrap_or(1e-8))?;
        (Some(k_range.unwrap_or((0, 0))), Some(tol))
    } else {
        (k_range, src.parsed::<f64>("tol")?.map(|t| check_tolerance("tol", t)).transpose()?)
    };

    let format = match src.raw("format").as_deref() {
        None => match command {
            CommandKind::Sweep | CommandKind::Export => Format::Csv,
            _ => Format::Json,
        },
        Some("json") => Format::Json,
        Some("csv") if matches!(command, CommandKind::Sweep | CommandKind::Export | CommandKind::Solve) => Format::Csv,
        Some(other) => return Err(LabError::Config(format!("format '{other}' not available for this command"))),
    };
    let (preset, checks) = if command == CommandKind::Verify {
        let preset = src.raw("preset").unwrap_or_else(|| "core".into());
        let checks = src
            .raw("checks")
            .map(|s| s.split(',').filter(|x| !x.trim().is_empty()).map(CheckId::parse).collect::<Result<Vec<_>>>())
            .transpose()?;
        if checks.as_ref().is_some_and(|c| c.is_empty()) {
            return Err(LabError::MalformedPlan("empty checks list".into()));
        }
        (Some(preset), checks)
    } else {
        (None, None)
    };
    let out_dir = src
        .flags
        .out
        .clone()
        .or_else(|| env_out.filter(|s| !s.is_empty()).map(PathBuf::from))
        .or_else(|| src.file.get("out").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR));

    Ok(RunConfig { command, n, p, alpha, alpha_range, count, k_range, tol, controls, out_dir, format, preset, checks })
}

/// Maps library errors onto the documented exit codes.
pub fn exit_code(err: &LabError) -> i32 {
    match err {
        LabError::InvalidParameter(_) | LabError::Config(_) | LabError::MalformedPlan(_) => EXIT_USAGE,
        LabError::Io(_) => EXIT_IO,
        LabError::Csv(e) if matches!(e.kind(), csv::ErrorKind::Io(_)) => EXIT_IO,
        LabError::Json(e) if e.is_io() => EXIT_IO,
        _ => EXIT_NUMERIC,
    }
}

/// Errors raised while writing outputs are always I/O failures.
fn write_out(path: &Path, contents: &[u8]) -> std::result::Result<(), (i32, LabError)> {
    io::write_atomic(path, contents).map_err(|e| (EXIT_IO, e))
}

type Outcome = std::result::Result<i32, (i32, LabError)>;

fn numeric<T>(r: Result<T>) -> std::result::Result<T, (i32, LabError)> {
    r.map_err(|e| (exit_code(&e), e))
}

fn csv_bytes(f: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> std::result::Result<Vec<u8>, (i32, LabError)> {
    let mut buf = Vec::new();
    f(&mut buf).map_err(|e| (EXIT_IO, e))?;
    Ok(buf)
}

fn json_bytes<T: Serialize>(cfg: &RunConfig, result: &T) -> std::result::Result<Vec<u8>, (i32, LabError)> {
    io::to_json(cfg, result).map(String::into_bytes).map_err(|e| (EXIT_NUMERIC, e))
}

fn cmd_solve(cfg: &RunConfig, out: &mut dyn Write) -> Outcome {
    let field = numeric(cfg.field())?;
    let pp = ProblemParams::new(field, cfg.alpha.expect("resolved")).with_controls(cfg.controls);
    let traj = numeric(integrate(&pp, StopPolicy::full_range()))?;
    if traj.termination.cause.is_failure() {
        let e = LabError::Domain(format!("integration stopped: {:?} at r = {}", traj.termination.cause, traj.r_stop()));
        return Err((EXIT_NUMERIC, e));
    }
    let portrait = numeric(detect_events(&traj))?;
    let csv = csv_bytes(|b| io::write_trajectory_csv(&traj, b))?;
    let json = json_bytes(cfg, &portrait)?;
    let (tp, pp_path) = (cfg.out_dir.join("trajectory.csv"), cfg.out_dir.join("portrait.json"));
    write_out(&tp, &csv)?;
    write_out(&pp_path, &json)?;
    let _ = writeln!(out, "{} samples, {} zeros; wrote {} and {}", traj.samples.len(), portrait.zeros_u.len(), tp.display(), pp_path.display());
    Ok(EXIT_OK)
}

fn cmd_classify(cfg: &RunConfig, out: &mut dyn Write) -> Outcome {
    let field = numeric(cfg.field())?;
    let class = numeric(classify(&ProblemParams::new(field, cfg.alpha.expect("resolved")).with_controls(cfg.controls)))?;
    let path = cfg.out_dir.join("classification.json");
    write_out(&path, &json_bytes(cfg, &class)?)?;
    let _ = writeln!(out, "{}({})", class.tag(), class.node_count());
    Ok(EXIT_OK)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderRecord {
    pub k: usize,
    pub status: String,
    pub alpha_lo: Option<f64>,
    pub alpha_hi: Option<f64>,
    pub midpoint: Option<f64>,
    pub evaluations: Option<usize>,
    pub error: Option<String>,
}

fn cmd_ladder(cfg: &RunConfig, out: &mut dyn Write) -> Outcome {
    let field = numeric(cfg.field())?;
    let (a, b) = cfg.k_range.expect("resolved");
    let tol = cfg.tol.expect("resolved");
    let records: Vec<LadderRecord> = (a..=b)
        .into_par_iter()
        .map(|k| match find_alpha_k(&field, k, tol, &cfg.controls) {
            Ok(e) => LadderRecord {
                k,
                status: "ok".into(),
                alpha_lo: Some(e.alpha_lo),
                alpha_hi: Some(e.alpha_hi),
                midpoint: Some(e.midpoint()),
                evaluations: Some(e.evaluations),
                error: None,
            },
            Err(e) => LadderRecord {
                k,
                status: "failed".into(),
                alpha_lo: None,
                alpha_hi: None,
                midpoint: None,
                evaluations: None,
                error: Some(e.to_string()),
            },
        })
        .collect();
    let path = cfg.out_dir.join("ladder.json");
    write_out(&path, &json_bytes(cfg, &records)?)?;
    for r in &records {
        match (r.alpha_lo, r.alpha_hi) {
            (Some(lo), Some(hi)) => {
                let _ = writeln!(out, "k={} [{}, {}]", r.k, io::fmt_real(lo), io::fmt_real(hi));
            }
            _ => eprintln!("k={} failed: {}", r.k, r.error.as_deref().unwrap_or("")),
        }
    }
    Ok(if records.iter().all(|r| r.status != "ok") { EXIT_NUMERIC } else { EXIT_OK })
}

fn cmd_sweep(cfg: &RunConfig, out: &mut dyn Write) -> Outcome {
    let field = numeric(cfg.field())?;
    let (lo, hi) = cfg.alpha_range.expect("resolved");
    let atlas = numeric(sweep(&field, &linspace(lo, hi, cfg.count.expect("resolved")), &cfg.controls))?;
    let (path, bytes) = match cfg.format {
        Format::Csv => (cfg.out_dir.join("sweep.csv"), csv_bytes(|b| io::write_sweep_csv(&atlas, b))?),
        Format::Json => (cfg.out_dir.join("sweep.json"), json_bytes(cfg, &atlas)?),
    };
    write_out(&path, &bytes)?;
    if atlas.indeterminate > 0 {
        eprintln!("warning: {} indeterminate row(s)", atlas.indeterminate);
    }
    let _ = writeln!(out, "{} rows; wrote {}", atlas.rows.len(), path.display());
    if !atlas.monotone {
        let mut rows: Vec<_> =
            atlas.rows.iter().filter(|r| r.class.tag() != "Indeterminate").collect();
        rows.sort_by(|a, b| a.alpha.total_cmp(&b.alpha));
        if let Some(w) = rows.windows(2).find(|w| w[1].class.node_count() < w[0].class.node_count()) {
            let e = LabError::MonotonicityViolation {
                a1: w[0].alpha,
                n1: w[0].class.node_count(),
                a2: w[1].alpha,
                n2: w[1].class.node_count(),
            };
            return Err((EXIT_NUMERIC, e));
        }
    }
    Ok(EXIT_OK)
}

fn cmd_verify(cfg: &RunConfig, out: &mut dyn Write) -> Outcome {
    let field = numeric(cfg.field())?;
    let mut plan = numeric(VerificationPlan::preset(cfg.preset.as_deref().unwrap_or("core"), field))?;
    plan.controls = cfg.controls;
    if let Some(checks) = &cfg.checks {
        plan.checks = checks.clone();
    }
    let report = numeric(run_checks(&plan))?;
    let table = report.table();
    write_out(&cfg.out_dir.join("verify.json"), &json_bytes(cfg, &report)?)?;
    write_out(&cfg.out_dir.join("verify.txt"), table.as_bytes())?;
    let _ = out.write_all(table.as_bytes());
    let failed = report.failures().count();
    if failed > 0 {
        eprintln!("{failed} check(s) failed");
        return Ok(EXIT_CHECKS);
    }
    Ok(EXIT_OK)
}

fn cmd_export(cfg: &RunConfig, out: &mut dyn Write) -> Outcome {
    let field = numeric(cfg.field())?;
    let alpha = cfg.alpha.expect("resolved");
    let traj = numeric(integrate(&ProblemParams::new(field, alpha).with_controls(cfg.controls), StopPolicy::full_range()))?;
    let (path, bytes) = match cfg.format {
        Format::Csv => (cfg.out_dir.join("functionals.csv"), csv_bytes(|b| io::write_functionals_csv(&traj, b))?),
        Format::Json => {
            let rows: Vec<_> = traj.samples.iter().map(|s| crate::functionals::aux_from_state(&field, s)).collect();
            (cfg.out_dir.join("functionals.json"), json_bytes(cfg, &rows)?)
        }
    };
    write_out(&path, &bytes)?;
    let _ = writeln!(out, "{} rows; wrote {}", traj.samples.len(), path.display());
    Ok(EXIT_OK)
}

/// Runs the CLI on `args` (program name first) and returns the exit code.
/// Normal output goes to `out`, diagnostics to standard error.
pub fn run_with<I, T>(args: I, env_out: Option<String>, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let (kind, flags) = match cli.command {
        Command::Solve(f) => (CommandKind::Solve, f),
        Command::Classify(f) => (CommandKind::Classify, f),
        Command::Ladder(f) => (CommandKind::Ladder, f),
        Command::Sweep(f) => (CommandKind::Sweep, f),
        Command::Verify(f) => (CommandKind::Verify, f),
        Command::Export(f) => (CommandKind::Export, f),
    };
    let cfg = match resolve(kind, flags, env_out).and_then(|c| c.field().map(|_| c)) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    let result = match kind {
        CommandKind::Solve => cmd_solve(&cfg, out),
        CommandKind::Classify => cmd_classify(&cfg, out),
        CommandKind::Ladder => cmd_ladder(&cfg, out),
        CommandKind::Sweep => cmd_sweep(&cfg, out),
        CommandKind::Verify => cmd_verify(&cfg, out),
        CommandKind::Export => cmd_export(&cfg, out),
    };
    match result {
        Ok(code) => code,
        Err((code, e)) => {
            eprintln!("error: {e}");
            code
        }
    }
}

/// [`run_with`] using the process environment and standard output.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    run_with(args, std::env::var(OUT_DIR_ENV).ok(), &mut std::io::stdout().lock())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flags() -> Flags {
        Flags { n: Some(3), p: Some(3.0), ..Default::default() }
    }

    #[test]
    fn ranges_parse() {
        assert_eq!(parse_k_range("0..2").unwrap(), (0, 2));
        assert_eq!(parse_k_range("0..=2").unwrap(), (0, 2));
        assert_eq!(parse_k_range("3").unwrap(), (3, 3));
        assert!(parse_k_range("2..1").is_err());
        assert_eq!(parse_alpha_range("1.5:20").unwrap(), (1.5, 20.0));
        assert_eq!(parse_alpha_range("0.1..1.4").unwrap(), (0.1, 1.4));
        assert!(parse_alpha_range("3:1").is_err());
    }

    #[test]
    fn tolerances_are_bounded() {
        let f = Flags { alpha: Some(2.0), abs_tol: Some(1e-2), ..flags() };
        assert!(resolve(CommandKind::Solve, f, None).is_err());
        let f = Flags { alpha: Some(2.0), rel_tol: Some(1e-16), ..flags() };
        assert!(resolve(CommandKind::Solve, f, None).is_err());
    }

    #[test]
    fn out_dir_precedence() {
        let f = Flags { alpha: Some(2.0), ..flags() };
        let c = resolve(CommandKind::Solve, f.clone(), Some("/tmp/env".into())).unwrap();
        assert_eq!(c.out_dir, PathBuf::from("/tmp/env"));
        let c = resolve(CommandKind::Solve, Flags { out: Some("x".into()), ..f.clone() }, Some("/tmp/env".into())).unwrap();
        assert_eq!(c.out_dir, PathBuf::from("x"));
        let c = resolve(CommandKind::Solve, f, None).unwrap();
        assert_eq!(c.out_dir, PathBuf::from(DEFAULT_OUT_DIR));
    }

    #[test]
    fn defaults_are_resolved() {
        let c = resolve(CommandKind::Ladder, flags(), None).unwrap();
        assert_eq!(c.k_range, Some((0, 0)));
        assert_eq!(c.tol, Some(1e-8));
        assert_eq!(c.controls, IntegratorControls::default());
        let c = resolve(CommandKind::Verify, flags(), None).unwrap();
        assert_eq!(c.controls, verification_controls());
        assert_eq!(c.preset.as_deref(), Some("core"));
    }

    #[test]
    fn empty_check_list_is_rejected() {
        let f = Flags { checks: Some(String::new()), ..flags() };
        assert!(matches!(resolve(CommandKind::Verify, f, None), Err(LabError::MalformedPlan(_))));
    }
}
