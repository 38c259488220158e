//! Command-line front end: argument parsing, validation, dispatch and
//! run records.

pub mod commands;
pub mod config;
pub mod inputs;
pub mod linear;
pub mod presets;
pub mod record;

use std::ffi::OsString;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub use commands::CmdError;
pub use config::{ConfigError, RunConfig};
pub use linear::LinearProblem;
pub use record::{RunRecord, Verdict};

pub const OUT_ENV: &str = "CURVEFORGE_OUT";
pub const DEFAULT_OUT: &str = "curveforge-out";

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "curveforge", version, about = "Prescribed scalar curvature experiments on flat-torus products")]
pub struct Cli {
    /// Output directory (default: $CURVEFORGE_OUT, then ./curveforge-out).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Finite-difference curvature against the closed forms.
    VerifyCurvature(VerifyArgs),
    /// Galerkin solve of a linear problem.
    SolveLinear(LinearArgs),
    /// Picard solve of the nonlinear curvature equation.
    Solve(SolveArgs),
    /// Energy trace and Gronwall check of a given field.
    EnergyReport(EnergyArgs),
    /// Run a named experiment end to end.
    Reproduce(ReproduceArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum CurvaturePreset {
    FlatZero,
    SineM1,
    GeneralN,
}

#[derive(Args, Debug)]
#[command(allow_negative_numbers = true)]
pub struct VerifyArgs {
    #[arg(long, value_enum, default_value = "sine-m1")]
    pub preset: CurvaturePreset,
    /// Comma-separated resolutions along the refined axes.
    #[arg(long, value_delimiter = ',')]
    pub resolutions: Vec<usize>,
    /// Conformal factor φ(x) of a curved base metric e^{2φ}δ.
    #[arg(long, allow_hyphen_values = true)]
    pub base_conformal: Option<String>,
}

#[derive(Args, Debug)]
pub struct LinearArgs {
    /// TOML problem file.
    #[arg(long, conflicts_with = "preset")]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub preset: Option<LinearPreset>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum LinearPreset {
    StandingWave,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Local,
    SmallData,
}

#[derive(Args, Debug)]
#[command(allow_negative_numbers = true)]
pub struct SolveArgs {
    #[arg(long, default_value_t = 1)]
    pub m: usize,
    #[arg(long = "N", default_value_t = 32)]
    pub n: usize,
    #[arg(long)]
    pub t0: Option<f64>,
    #[arg(long = "T", default_value_t = 1.0)]
    pub t_end: f64,
    #[arg(long)]
    pub s: Option<usize>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long = "D")]
    pub d_bound: Option<f64>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub kappa: Option<usize>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    /// Expression in x… and t, or a field file.
    #[arg(long, default_value = "0", allow_hyphen_values = true)]
    pub rtilde: String,
    #[arg(long, allow_hyphen_values = true)]
    pub phi: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub psi: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub rg: Option<String>,
    #[arg(long, value_enum, default_value = "local")]
    pub mode: Mode,
    #[arg(long)]
    pub adaptive: bool,
    /// Bracket the largest convergent multiple of R̃ (small-data mode).
    #[arg(long)]
    pub bisect: bool,
    /// Start the iteration from a random band-limited field.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args, Debug)]
#[command(allow_negative_numbers = true)]
pub struct EnergyArgs {
    /// Field u(x, t) as an expression or a file.
    #[arg(long, default_value = "0", allow_hyphen_values = true)]
    pub u: String,
    /// Frozen coefficient field (defaults to u).
    #[arg(long, allow_hyphen_values = true)]
    pub v: Option<String>,
    #[arg(long, default_value_t = 1)]
    pub m: usize,
    #[arg(long = "N", default_value_t = 32)]
    pub n: usize,
    #[arg(long)]
    pub s: Option<usize>,
    #[arg(long = "T", default_value_t = 1.0)]
    pub t_end: f64,
    #[arg(long, default_value_t = 1e-2)]
    pub dt: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub rtilde: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub rg: Option<String>,
}

#[derive(Args, Debug)]
pub struct ReproduceArgs {
    /// One of sec3-derivation, thm11-local, thm12-smalldata, prop63-uniqueness.
    pub preset: String,
}

fn preset_name<T: ValueEnum>(v: T) -> String {
    v.to_possible_value().expect("named variant").get_name().to_string()
}

/// Output directory: `--out`, then `$CURVEFORGE_OUT`, then the default.
pub fn out_dir(flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
}

impl Cli {
    pub fn run_config(self) -> Result<RunConfig, ConfigError> {
        let mut cfg = RunConfig {
            out: out_dir(self.out),
            ..Default::default()
        };
        match self.command {
            Command::VerifyCurvature(a) => {
                cfg.command = "verify-curvature".into();
                cfg.preset = Some(preset_name(a.preset));
                cfg.resolutions = a.resolutions;
                cfg.base_conformal = a.base_conformal;
            }
            Command::SolveLinear(a) => {
                cfg.command = "solve-linear".into();
                let problem = match (a.config, a.preset) {
                    (Some(path), _) => {
                        let src = std::fs::read_to_string(&path)
                            .map_err(|e| ConfigError::new("config", format!("{}: {e}", path.display())))?;
                        LinearProblem::from_toml(&src)?
                    }
                    (None, Some(p)) => {
                        cfg.preset = Some(preset_name(p));
                        LinearProblem::standing_wave()
                    }
                    (None, None) => return Err(ConfigError::new("config", "give --config or --preset")),
                };
                cfg.m = Some(problem.m);
                cfg.n = Some(problem.n);
                cfg.kappa = Some(problem.kappa);
                cfg.dt = Some(problem.dt);
                cfg.t_end = Some(problem.t_end);
                cfg.linear = Some(problem);
            }
            Command::Solve(a) => {
                cfg.command = "solve".into();
                cfg.mode = Some(preset_name(a.mode));
                cfg.m = Some(a.m);
                cfg.n = Some(a.n);
                cfg.t0 = a.t0;
                cfg.t_end = Some(a.t_end);
                cfg.s = a.s;
                cfg.k = a.k;
                cfg.d_bound = a.d_bound;
                cfg.tol = a.tol;
                cfg.kappa = a.kappa;
                cfg.dt = Some(a.dt.unwrap_or(1e-2));
                cfg.max_iters = a.max_iters;
                cfg.rtilde = Some(a.rtilde);
                cfg.phi = a.phi;
                cfg.psi = a.psi;
                cfg.r_g = a.rg;
                cfg.adaptive = a.adaptive;
                cfg.bisect = a.bisect;
                cfg.seed = a.seed;
            }
            Command::EnergyReport(a) => {
                cfg.command = "energy-report".into();
                cfg.u = Some(a.u);
                cfg.v = a.v;
                cfg.m = Some(a.m);
                cfg.n = Some(a.n);
                cfg.s = a.s;
                cfg.t_end = Some(a.t_end);
                cfg.dt = Some(a.dt);
                cfg.rtilde = a.rtilde;
                cfg.r_g = a.rg;
            }
            Command::Reproduce(a) => {
                cfg.command = "reproduce".into();
                if !presets::PRESETS.contains(&a.preset.as_str()) {
                    return Err(ConfigError::new(
                        "preset",
                        format!("'{}' is not one of {}", a.preset, presets::PRESETS.join(", ")),
                    ));
                }
                cfg.preset = Some(a.preset);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Runs a validated configuration. Errors after validation still yield a
/// record, marked partial.
pub fn execute(cfg: RunConfig) -> (RunRecord, Option<CmdError>) {
    let start = Instant::now();
    let mut rec = RunRecord::new(cfg.clone());
    let result = match cfg.command.as_str() {
        "verify-curvature" => commands::verify_curvature(&cfg, &mut rec),
        "solve-linear" => commands::solve_linear_cmd(&cfg, &mut rec),
        "solve" => commands::solve(&cfg, &mut rec),
        "energy-report" => commands::energy_report(&cfg, &mut rec),
        "reproduce" => presets::reproduce(&cfg, &mut rec),
        other => Err(ConfigError::new("command", format!("unknown command '{other}'")).into()),
    };
    let err = result.err();
    if let Some(e) = &err {
        rec.partial = true;
        rec.error = Some(match e {
            CmdError::Config(c) => c.to_string(),
            CmdError::Compute(c) => c.to_string(),
        });
    }
    rec.finish();
    rec.wall_time_s = start.elapsed().as_secs_f64();
    (rec, err)
}

/// Parses, validates, runs and writes `report.json`; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_PASS };
        }
    };
    let cfg = match cli.run_config() {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("config error: {e}");
            return EXIT_CONFIG;
        }
    };
    let out = cfg.out.clone();
    let (rec, err) = execute(cfg);
    if let Err(e) = rec.write(&out) {
        eprintln!("cannot write {}: {e}", out.join("report.json").display());
        return EXIT_FAIL;
    }
    print!("{}", rec.table());
    println!("report: {}", out.join("report.json").display());
    match err {
        Some(CmdError::Config(e)) => {
            eprintln!("config error: {e}");
            EXIT_CONFIG
        }
        Some(CmdError::Compute(e)) => {
            eprintln!("error: {e}");
            EXIT_FAIL
        }
        None if rec.pass => EXIT_PASS,
        None => EXIT_FAIL,
    }
}
