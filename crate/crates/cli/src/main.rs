//! `zeno`: run Zeno-limit experiments from JSON configs or flags.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 invalid configuration,
//! 3 numerical failure, 4 guard violation. Failures print one JSON object
//! on stderr.

mod config;
mod experiments;
mod output;
mod report;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use zeno_core::{ErrorClass, ZenoError};

use config::{set_path, ConfigError, ExperimentConfig, Kind};
use output::{sha256_hex, write_artifact, RunIdentity};

/// Default output directory when neither a flag nor the config names one.
const DEFAULT_OUT: &str = "zeno-out";

#[derive(Debug)]
pub enum Failure {
    Config(ConfigError),
    Core(ZenoError),
    Io(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e)
    }
}

impl From<ZenoError> for Failure {
    fn from(e: ZenoError) -> Self {
        Failure::Core(e)
    }
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Core(e) => match e.class() {
                ErrorClass::Validation => 2,
                ErrorClass::Numerical => 3,
                ErrorClass::Guard => 4,
            },
            Failure::Io(_) => 1,
        }
    }

    fn to_json(&self) -> Value {
        let class = match self.code() {
            2 => "validation",
            3 => "numerical",
            4 => "guard",
            _ => "io",
        };
        let mut err = json!({ "class": class, "exit_code": self.code() });
        match self {
            Failure::Config(c) => {
                err["message"] = json!(c.message);
                err["path"] = json!(c.path);
                err["pointer"] = json!(c.pointer());
            }
            Failure::Core(e) => {
                err["message"] = json!(e.to_string());
                if let ZenoError::InvalidParameter { field, .. } = e {
                    err["field"] = json!(field);
                }
            }
            Failure::Io(m) => err["message"] = json!(m),
        }
        json!({ "error": err })
    }
}

#[derive(Parser)]
#[command(name = "zeno", version, about = "Zeno-limit experiments on Dirichlet domains")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Dirichlet spectrum, analytic or finite-difference.
    Spectrum(SpectrumArgs),
    /// Convergence of (P U(t/N) P)^N to the Dirichlet evolution along an N ladder.
    ZenoRun(ZenoRunArgs),
    /// Single-step matrix elements and their short-time remainders.
    ShortTime(ShortTimeArgs),
    /// Norm leaking out of the domain in one free step.
    Leakage(LeakageArgs),
    /// Thin-domain reduction with regularized energies and extrapolation.
    Reduce(ReduceArgs),
    /// Projected-product identities and smoothed projector rates.
    AlgebraCheck(AlgebraArgs),
    /// Run whatever experiment a config file describes.
    Run(RunArgs),
    /// Merge the envelopes in a directory into summary.json and summary.txt.
    Report(ReportArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum DomainKind {
    Interval,
    Rectangle,
    Annulus,
    Shell,
    Mask,
}

#[derive(Clone, Copy, ValueEnum)]
enum Source {
    Analytic,
    Fd,
}

#[derive(Args)]
struct Common {
    /// JSON experiment config; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    domain: Option<DomainKind>,
    #[arg(long, allow_hyphen_values = true)]
    x0: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    x1: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    a: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    b: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    r1: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    r2: Option<f64>,
    /// PGM raster for a mask domain (nonzero pixels are inside).
    #[arg(long)]
    mask: Option<PathBuf>,
    /// Mask origin as `x,y`.
    #[arg(long, allow_hyphen_values = true)]
    origin: Option<String>,
    /// Mask pixel size.
    #[arg(long)]
    spacing: Option<f64>,
    /// Cells across each side of the domain.
    #[arg(long)]
    cells: Option<usize>,
    #[arg(long)]
    hbar: Option<f64>,
    #[arg(long)]
    mass: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory [default: config output_dir, then $ZENO_OUT, then ./zeno-out]
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for ladder points and random trials.
    #[arg(long)]
    jobs: Option<usize>,
    /// Also write gnuplot-style .dat files.
    #[arg(long)]
    dat: bool,
}

#[derive(Args)]
struct SpectrumArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    lmax: Option<u32>,
    #[arg(long)]
    nmax: Option<u32>,
    #[arg(long)]
    mmax: Option<u32>,
    #[arg(long, value_enum)]
    source: Option<Source>,
    /// Number of finite-difference modes.
    #[arg(long)]
    count: Option<usize>,
}

#[derive(Args)]
struct ZenoRunArgs {
    #[command(flatten)]
    common: Common,
    /// Total time.
    #[arg(long)]
    t: Option<f64>,
    /// `lo:hi` for powers of two from lo to hi, or a comma list.
    #[arg(long)]
    n_ladder: Option<String>,
    /// Initial mode as JSON, e.g. '{"family":"rectangle","n":1,"m":1}'.
    #[arg(long)]
    initial: Option<String>,
    #[arg(long, value_enum)]
    reference: Option<Source>,
    #[arg(long)]
    reference_modes: Option<usize>,
}

#[derive(Args)]
struct ShortTimeArgs {
    #[command(flatten)]
    common: Common,
    /// `min:max:count` geometric, or a comma list.
    #[arg(long)]
    taus: Option<String>,
    #[arg(long)]
    modes: Option<usize>,
    #[arg(long, value_enum)]
    reference: Option<Source>,
}

#[derive(Args)]
struct LeakageArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    taus: Option<String>,
    /// Mode as JSON; defaults to the ground state.
    #[arg(long)]
    state: Option<String>,
    #[arg(long, value_enum)]
    reference: Option<Source>,
    #[arg(long)]
    reference_modes: Option<usize>,
    /// Also estimate ||Q U(tau) P|| by power iteration.
    #[arg(long)]
    operator_norm: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Family {
    RectangleToInterval,
    AnnulusToCircle,
    ShellToSphere,
}

#[derive(Args)]
struct ReduceArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_enum)]
    family: Option<Family>,
    /// Mean radius for annulus and shell families.
    #[arg(long)]
    radius: Option<f64>,
    /// Interval length for the rectangle family.
    #[arg(long)]
    length: Option<f64>,
    /// Transverse sector for the rectangle family.
    #[arg(long)]
    sector: Option<u32>,
    #[arg(long)]
    levels: Option<u32>,
    /// Comma list of angular orders.
    #[arg(long)]
    l_set: Option<String>,
    /// Comma list of widths.
    #[arg(long)]
    ladder: Option<String>,
    #[arg(long)]
    t: Option<f64>,
    #[arg(long)]
    step_budget: Option<u64>,
    #[arg(long)]
    guard_ratio: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Schedule {
    InverseN,
    InverseNSquared,
}

#[derive(Clone, Copy, ValueEnum)]
enum Profile {
    Linear,
    RaisedCosine,
}

#[derive(Args)]
struct AlgebraArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    trials: Option<usize>,
    /// Comma list of N for the smoothed projector.
    #[arg(long)]
    projector_ladder: Option<String>,
    #[arg(long, value_enum)]
    schedule: Option<Schedule>,
    #[arg(long)]
    w0: Option<f64>,
    #[arg(long, value_enum)]
    profile: Option<Profile>,
    #[arg(long)]
    projector_cells: Option<usize>,
}

#[derive(Args)]
struct RunArgs {
    /// JSON experiment config.
    #[arg(value_name = "CONFIG")]
    file: PathBuf,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct ReportArgs {
    /// Directory holding result envelopes.
    dir: PathBuf,
}

fn flag_error(flag: &str, msg: impl Into<String>) -> Failure {
    Failure::Config(ConfigError::new(format!("--{flag}"), msg))
}

fn parse_list<T: std::str::FromStr>(flag: &str, s: &str) -> Result<Vec<T>, Failure> {
    s.split(',')
        .map(|p| p.trim().parse::<T>().map_err(|_| flag_error(flag, format!("cannot parse `{p}`"))))
        .collect()
}

/// `lo:hi` doubles from lo up to hi; anything else is a comma list.
fn parse_n_ladder(s: &str) -> Result<Vec<usize>, Failure> {
    if let Some((lo, hi)) = s.split_once(':') {
        let lo: usize = lo.trim().parse().map_err(|_| flag_error("n-ladder", "bad lower bound"))?;
        let hi: usize = hi.trim().parse().map_err(|_| flag_error("n-ladder", "bad upper bound"))?;
        if lo == 0 || hi < lo {
            return Err(flag_error("n-ladder", "need 1 <= lo <= hi"));
        }
        let mut out = Vec::new();
        let mut n = lo;
        while n <= hi {
            out.push(n);
            n = n.checked_mul(2).unwrap_or(usize::MAX);
            if n == usize::MAX {
                break;
            }
        }
        return Ok(out);
    }
    parse_list("n-ladder", s)
}

fn parse_taus(flag: &str, s: &str) -> Result<Value, Failure> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() == 3 {
        let min: f64 = parts[0].parse().map_err(|_| flag_error(flag, "bad min"))?;
        let max: f64 = parts[1].parse().map_err(|_| flag_error(flag, "bad max"))?;
        let count: usize = parts[2].parse().map_err(|_| flag_error(flag, "bad count"))?;
        return Ok(json!({ "min": min, "max": max, "count": count }));
    }
    Ok(json!(parse_list::<f64>(flag, s)?))
}

fn parse_label(flag: &str, s: &str) -> Result<Value, Failure> {
    serde_json::from_str(s).map_err(|e| flag_error(flag, format!("not JSON: {e}")))
}

fn source_name(s: Source, reference: bool) -> &'static str {
    match (s, reference) {
        (Source::Analytic, _) => "analytic",
        (Source::Fd, true) => "fd_oracle",
        (Source::Fd, false) => "fd",
    }
}

/// Load the config file (if any) with relative mask paths anchored at its directory.
fn load_file(path: &Path) -> Result<Value, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Config(ConfigError::new("", format!("cannot read {}: {e}", path.display()))))?;
    let mut v: Value = serde_json::from_str(&text).map_err(|e| {
        Failure::Config(ConfigError::new("", format!("{}: invalid JSON at line {} column {}: {e}", path.display(), e.line(), e.column())))
    })?;
    let base = path.parent().unwrap_or(Path::new("."));
    if let Some(p) = v.pointer_mut("/domain/path") {
        if let Some(s) = p.as_str() {
            let rel = Path::new(s);
            if rel.is_relative() {
                *p = json!(base.join(rel).to_string_lossy());
            }
        }
    }
    Ok(v)
}

fn apply_common(v: &mut Value, c: &Common) -> Result<(), Failure> {
    if let Some(kind) = c.domain.or(c.mask.as_ref().map(|_| DomainKind::Mask)) {
        let name = match kind {
            DomainKind::Interval => "interval",
            DomainKind::Rectangle => "rectangle",
            DomainKind::Annulus => "annulus",
            DomainKind::Shell => "shell",
            DomainKind::Mask => "mask",
        };
        if v.pointer("/domain/type").and_then(Value::as_str) != Some(name) {
            set_path(v, "domain", json!({ "type": name }));
        }
    }
    for (key, val) in [("x0", c.x0), ("x1", c.x1), ("a", c.a), ("b", c.b), ("r1", c.r1), ("r2", c.r2), ("spacing", c.spacing)] {
        if let Some(x) = val {
            set_path(v, &format!("domain.{key}"), json!(x));
        }
    }
    if let Some(p) = &c.mask {
        set_path(v, "domain.path", json!(p.to_string_lossy()));
    }
    if let Some(o) = &c.origin {
        let xy: Vec<f64> = parse_list("origin", o)?;
        if xy.len() != 2 {
            return Err(flag_error("origin", "expected x,y"));
        }
        set_path(v, "domain.origin", json!(xy));
    }
    if let Some(n) = c.cells {
        set_path(v, "grid.cells", json!(n));
    }
    if let Some(h) = c.hbar {
        set_path(v, "units.hbar", json!(h));
    }
    if let Some(m) = c.mass {
        set_path(v, "units.mass", json!(m));
    }
    if let Some(s) = c.seed {
        set_path(v, "seed", json!(s));
    }
    Ok(())
}

/// Subcommand-specific flags, written into `params`.
fn apply_specific(v: &mut Value, cmd: &Command) -> Result<(), Failure> {
    let mut set = |k: &str, x: Value| set_path(v, &format!("params.{k}"), x);
    match cmd {
        Command::Spectrum(a) => {
            if let Some(x) = a.lmax {
                set("l_max", json!(x));
            }
            if let Some(x) = a.nmax {
                set("n_max", json!(x));
            }
            if let Some(x) = a.mmax {
                set("m_max", json!(x));
            }
            if let Some(x) = a.source {
                set("source", json!(source_name(x, false)));
            }
            if let Some(x) = a.count {
                set("count", json!(x));
            }
        }
        Command::ZenoRun(a) => {
            if let Some(x) = a.t {
                set("t", json!(x));
            }
            if let Some(s) = &a.n_ladder {
                set("n_ladder", json!(parse_n_ladder(s)?));
            }
            if let Some(s) = &a.initial {
                set("initial", parse_label("initial", s)?);
            }
            if let Some(x) = a.reference {
                set("reference", json!(source_name(x, true)));
            }
            if let Some(x) = a.reference_modes {
                set("reference_modes", json!(x));
            }
        }
        Command::ShortTime(a) => {
            if let Some(s) = &a.taus {
                set("taus", parse_taus("taus", s)?);
            }
            if let Some(x) = a.modes {
                set("modes", json!(x));
            }
            if let Some(x) = a.reference {
                set("reference", json!(source_name(x, true)));
            }
        }
        Command::Leakage(a) => {
            if let Some(s) = &a.taus {
                set("taus", parse_taus("taus", s)?);
            }
            if let Some(s) = &a.state {
                set("state", parse_label("state", s)?);
            }
            if let Some(x) = a.reference {
                set("reference", json!(source_name(x, true)));
            }
            if let Some(x) = a.reference_modes {
                set("reference_modes", json!(x));
            }
            if a.operator_norm {
                set("operator_norm", json!(true));
            }
        }
        Command::Reduce(a) => {
            if let Some(f) = a.family {
                let name = match f {
                    Family::RectangleToInterval => "rectangle_to_interval",
                    Family::AnnulusToCircle => "annulus_to_circle",
                    Family::ShellToSphere => "shell_to_sphere",
                };
                set("family", json!({ "family": name }));
            }
            if let Some(x) = a.radius {
                set("family.radius", json!(x));
            }
            if let Some(x) = a.length {
                set("family.a", json!(x));
            }
            if let Some(x) = a.sector {
                set("family.m", json!(x));
            }
            if let Some(x) = a.levels {
                set("family.n_max", json!(x));
            }
            if let Some(s) = &a.l_set {
                set("family.l_set", json!(parse_list::<u32>("l-set", s)?));
            }
            if let Some(s) = &a.ladder {
                set("ladder", json!(parse_list::<f64>("ladder", s)?));
            }
            if let Some(x) = a.t {
                set("t", json!(x));
            }
            if let Some(x) = a.step_budget {
                set("step_budget", json!(x));
            }
            if let Some(x) = a.guard_ratio {
                set("guard_ratio", json!(x));
            }
        }
        Command::AlgebraCheck(a) => {
            if let Some(x) = a.dim {
                set("dim", json!(x));
            }
            if let Some(x) = a.trials {
                set("trials", json!(x));
            }
            if let Some(s) = &a.projector_ladder {
                set("projector_ladder", json!(parse_list::<usize>("projector-ladder", s)?));
            }
            if let Some(s) = a.schedule {
                let law = match s {
                    Schedule::InverseN => "inverse_n",
                    Schedule::InverseNSquared => "inverse_n_squared",
                };
                set("schedule", json!({ "law": law, "w0": a.w0.unwrap_or(1.0) }));
            } else if let Some(w) = a.w0 {
                set("schedule.w0", json!(w));
            }
            if let Some(p) = a.profile {
                let name = match p {
                    Profile::Linear => "linear",
                    Profile::RaisedCosine => "raised_cosine",
                };
                set("profile", json!(name));
            }
            if let Some(x) = a.projector_cells {
                set("projector_cells", json!(x));
            }
        }
        Command::Run(_) | Command::Report(_) => {}
    }
    Ok(())
}

fn kind_of(cmd: &Command) -> Option<Kind> {
    Some(match cmd {
        Command::Spectrum(_) => Kind::Spectrum,
        Command::ZenoRun(_) => Kind::ZenoRun,
        Command::ShortTime(_) => Kind::ShortTime,
        Command::Leakage(_) => Kind::Leakage,
        Command::Reduce(_) => Kind::Reduce,
        Command::AlgebraCheck(_) => Kind::AlgebraCheck,
        Command::Run(_) | Command::Report(_) => return None,
    })
}

fn common_of(cmd: &Command) -> Option<&Common> {
    Some(match cmd {
        Command::Spectrum(a) => &a.common,
        Command::ZenoRun(a) => &a.common,
        Command::ShortTime(a) => &a.common,
        Command::Leakage(a) => &a.common,
        Command::Reduce(a) => &a.common,
        Command::AlgebraCheck(a) => &a.common,
        Command::Run(a) => &a.common,
        Command::Report(_) => return None,
    })
}

fn run_experiment(cmd: &Command) -> Result<(), Failure> {
    let common = common_of(cmd).expect("experiment command");
    let file = match cmd {
        Command::Run(a) => Some(a.file.clone()),
        _ => common.config.clone(),
    };
    let mut value = match &file {
        Some(p) => load_file(p)?,
        None => json!({}),
    };
    if let Some(kind) = kind_of(cmd) {
        match value.get("kind").and_then(Value::as_str) {
            Some(k) if k != kind.name() => {
                return Err(Failure::Config(ConfigError::new(
                    "kind",
                    format!("config is for `{k}` but the subcommand is `{}`", kind.name()),
                )))
            }
            _ => set_path(&mut value, "kind", json!(kind.name())),
        }
    }
    apply_common(&mut value, common)?;
    apply_specific(&mut value, cmd)?;
    let cfg = ExperimentConfig::from_value(value)?;

    if let Some(j) = common.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(j.max(1))
            .build_global()
            .map_err(|e| Failure::Io(format!("thread pool: {e}")))?;
    }
    let out_dir = common
        .out
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .or_else(|| std::env::var_os("ZENO_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));

    let canonical = cfg.canonical();
    let id = RunIdentity {
        kind: cfg.kind.name(),
        config: serde_json::from_str(&canonical).expect("canonical JSON"),
        config_hash: sha256_hex(&canonical),
        series_key: sha256_hex(&cfg.series_canonical()),
    };
    let start = Instant::now();
    let artifact = experiments::run(&cfg, Path::new("."))?;
    let elapsed = start.elapsed().as_secs_f64();
    let files = write_artifact(&out_dir, &id, &artifact, elapsed, common.dat)
        .map_err(|e| Failure::Io(format!("writing to {}: {e}", out_dir.display())))?;
    for f in files {
        println!("{}", f.display());
    }
    for flag in &artifact.flags {
        eprintln!("note: {flag}");
    }
    Ok(())
}

fn run_report(dir: &Path) -> Result<(), Failure> {
    let envelopes =
        report::load_envelopes(dir).map_err(|e| Failure::Io(format!("reading {}: {e}", dir.display())))?;
    if envelopes.is_empty() {
        return Err(Failure::Config(ConfigError::new("", format!("no result envelopes in {}", dir.display()))));
    }
    let summary = report::summarize(&envelopes);
    for w in &summary.warnings {
        eprintln!("warning: {w}");
    }
    let files = report::write_summary(dir, &summary).map_err(|e| Failure::Io(e.to_string()))?;
    for f in files {
        println!("{}", f.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Report(a) => run_report(&a.dir),
        cmd => run_experiment(cmd),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{}", f.to_json());
            ExitCode::from(f.code())
        }
    }
}
