//! Command-line front end.
//!
//! Everything numeric is configured through a `key = value` file passed with
//! `--config`; the flags only pick the subcommand and the output directory.
//! Exit codes: 0 on success (including a decided dichotomy), 1 when a solver
//! fails or a frozen check regresses, 2 when the dichotomy test is
//! undetermined at the simulated horizon, 64 for usage errors, 66 for
//! configuration errors.

use std::fmt;
use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use crate::fbsolver::ClassifyThresholds;
use crate::harness::{
    self, check_frozen, CheckStatus, ExitClass, ExperimentSpec, FrozenStore, HarnessError,
    Scenario,
};
use crate::model::{ConfigMap, ModelParams};
use crate::semiwave::{RelaxOptions, XiGrid};
use crate::speed::{SpeedOptions, TravelingWaveOptions};

pub const EXIT_SUCCESS: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_UNDETERMINED: i32 = 2;
pub const EXIT_USAGE: i32 = 64;
pub const EXIT_CONFIG: i32 = 66;

#[derive(Parser)]
#[command(
    name = "frontspeed",
    about = "Semi-wave profiles, spreading-speed selection, and free-boundary \
             simulation for a two-species competition model",
    disable_version_flag = true
)]
struct Cli {
    /// Path to a `key = value` configuration file.
    #[arg(short, long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Directory for CSV output.
    #[arg(short, long, global = true, default_value = "out", value_name = "DIR")]
    out: PathBuf,
    /// Suppress informational lines; RESULT lines still print.
    #[arg(short, long, global = true)]
    quiet: bool,
    /// Print the version and the default tolerances.
    #[arg(short = 'V', long)]
    version: bool,
    #[command(subcommand)]
    cmd: Option<Cmd>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Compute semi-wave profiles at fixed frame speeds (`s`, default 0).
    Semiwave,
    /// Estimate the existence threshold s0 and select the speed s_mu.
    Speed,
    /// Simulate the free boundary and verify h(t)/t against s_mu.
    Simulate,
    /// Select speeds for a list of boundary coefficients (`mu_list`).
    Sweep,
    /// Refinement study for the boundary slope and the front position.
    Converge,
    /// Recompute the frozen reference values and write the store.
    Freeze,
    /// Recompute reference values and compare them with the frozen store.
    Check,
}

/// Configuration errors exit with 66, solver failures with 1.
#[derive(Debug)]
enum CliError {
    Config(String),
    Run(HarnessError),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Run(_) => EXIT_FAILURE,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration: {m}"),
            CliError::Run(e) => write!(f, "{e}"),
        }
    }
}

const KNOWN_KEYS: &[&str] = &[
    // dimensionless model
    "d", "r", "a", "b", "mu", "N", "h0",
    // physical model (a complete block takes precedence)
    "d1", "d2", "a1", "a2", "b1", "b2", "c1", "c2", "mu_hat", "H0",
    // semi-wave grid
    "l_left", "l_right", "h_xi",
    // speed selection
    "s", "tol_s", "tol_s0", "mu_list",
    // free-boundary run
    "t_end", "dt", "dr", "y_cells", "sample_dt", "snapshots", "u0_amplitude",
    "v0_level", "margin",
    // outcome thresholds
    "theta", "theta_u", "eps_h", "spread_multiple", "window_fraction",
    "compact_radius",
    // frozen store
    "store",
];

const PHYSICAL_KEYS: [&str; 9] = ["d1", "d2", "a1", "a2", "b1", "b2", "c1", "c2", "mu_hat"];

/// Everything a subcommand can read from the configuration file, with the
/// reference parameters filled in for whatever is absent.
struct Settings {
    model: ModelParams,
    h0: f64,
    grid: XiGrid,
    s_values: Vec<f64>,
    mus: Vec<f64>,
    tol_s: f64,
    tol_s0: f64,
    t_end: f64,
    dt: f64,
    dr: f64,
    y_cells: usize,
    sample_dt: f64,
    snapshot_times: Vec<f64>,
    u0_amplitude: f64,
    v0_level: f64,
    margin: f64,
    thresholds: ClassifyThresholds,
    store: Option<PathBuf>,
}

fn config_err(e: impl fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

impl Settings {
    fn from_config(cfg: &ConfigMap) -> Result<Self, CliError> {
        for key in cfg.keys() {
            if !KNOWN_KEYS.contains(&key) {
                return Err(CliError::Config(format!("unknown key `{key}`")));
            }
        }

        let has_physical = PHYSICAL_KEYS.iter().any(|k| cfg.contains(k));
        let (model, h0) = if has_physical {
            if cfg.contains("h0") {
                return Err(CliError::Config(
                    "use `H0` (physical units) with physical parameters, not `h0`".into(),
                ));
            }
            let nd = cfg.model_params().map_err(config_err)?;
            (nd.params, nd.h0)
        } else {
            let reference = harness::reference_model();
            let model = ModelParams::new(
                cfg.get_f64_or("d", reference.d).map_err(config_err)?,
                cfg.get_f64_or("r", reference.r).map_err(config_err)?,
                cfg.get_f64_or("a", reference.a).map_err(config_err)?,
                cfg.get_f64_or("b", reference.b).map_err(config_err)?,
                cfg.get_f64_or("mu", reference.mu).map_err(config_err)?,
                cfg.get_usize("N").map_err(config_err)?.unwrap_or(1),
            )
            .map_err(config_err)?;
            (model, cfg.get_f64_or("h0", 5.0).map_err(config_err)?)
        };

        let grid = XiGrid::new(
            cfg.get_f64_or("l_left", 60.0).map_err(config_err)?,
            cfg.get_f64_or("l_right", 60.0).map_err(config_err)?,
            cfg.get_f64_or("h_xi", 0.05).map_err(config_err)?,
        )
        .map_err(config_err)?;

        let def = ClassifyThresholds::default();
        let thresholds = ClassifyThresholds {
            theta: cfg.get_f64_or("theta", def.theta).map_err(config_err)?,
            theta_u: cfg.get_f64_or("theta_u", def.theta_u).map_err(config_err)?,
            eps_h: cfg.get_f64_or("eps_h", def.eps_h).map_err(config_err)?,
            spread_multiple: cfg
                .get_f64_or("spread_multiple", def.spread_multiple)
                .map_err(config_err)?,
            window_fraction: cfg
                .get_f64_or("window_fraction", def.window_fraction)
                .map_err(config_err)?,
            compact_radius: cfg
                .get_f64_or("compact_radius", def.compact_radius)
                .map_err(config_err)?,
        };

        Ok(Self {
            model,
            h0,
            grid,
            s_values: cfg
                .get_f64_list("s")
                .map_err(config_err)?
                .unwrap_or_else(|| vec![0.0]),
            mus: cfg
                .get_f64_list("mu_list")
                .map_err(config_err)?
                .unwrap_or_else(|| vec![0.5, 1.0, 2.0]),
            tol_s: cfg.get_f64_or("tol_s", 1e-4).map_err(config_err)?,
            tol_s0: cfg.get_f64_or("tol_s0", 1e-3).map_err(config_err)?,
            t_end: cfg.get_f64_or("t_end", 200.0).map_err(config_err)?,
            dt: cfg.get_f64_or("dt", 0.01).map_err(config_err)?,
            dr: cfg.get_f64_or("dr", 0.1).map_err(config_err)?,
            y_cells: cfg.get_usize("y_cells").map_err(config_err)?.unwrap_or(400),
            sample_dt: cfg.get_f64_or("sample_dt", 0.5).map_err(config_err)?,
            snapshot_times: cfg
                .get_f64_list("snapshots")
                .map_err(config_err)?
                .unwrap_or_default(),
            u0_amplitude: cfg.get_f64_or("u0_amplitude", 0.9).map_err(config_err)?,
            v0_level: cfg.get_f64_or("v0_level", 1.0).map_err(config_err)?,
            margin: cfg.get_f64_or("margin", 20.0).map_err(config_err)?,
            thresholds,
            store: cfg.get_str("store").map(PathBuf::from),
        })
    }

    fn spec(&self, scenario: Scenario, out_dir: &PathBuf) -> ExperimentSpec {
        let mut spec = ExperimentSpec::new(self.model, scenario, out_dir);
        spec.grid = self.grid;
        spec.tol_s = self.tol_s;
        spec.tol_s0 = self.tol_s0;
        spec.h0 = self.h0;
        spec.t_end = self.t_end;
        spec.dt = self.dt;
        spec.dr = self.dr;
        spec.y_cells = self.y_cells;
        spec.sample_dt = self.sample_dt;
        spec.snapshot_times = self.snapshot_times.clone();
        spec.u0_amplitude = self.u0_amplitude;
        spec.v0_level = self.v0_level;
        spec.thresholds = self.thresholds;
        spec.margin = self.margin;
        spec
    }
}

fn print_version() {
    println!("frontspeed {}", env!("CARGO_PKG_VERSION"));
    let relax = RelaxOptions::default();
    let speed = SpeedOptions::default();
    let tw = TravelingWaveOptions::default();
    let spec = ExperimentSpec::new(
        harness::reference_model(),
        Scenario::SpeedSelection,
        PathBuf::new(),
    );
    println!(
        "defaults: steady_tol={:e} tol_s0={:e} tol_s_mu={:e} eta_target={:e} \
         tw_tol={:e} fb_dt={:e}",
        relax.tol, speed.tol_s0, spec.tol_s, speed.eta_target, tw.tol, spec.dt
    );
}

fn dispatch(cli: &Cli, cmd: &Cmd) -> Result<i32, CliError> {
    let cfg = match &cli.config {
        Some(path) => ConfigMap::load(path).map_err(config_err)?,
        None => ConfigMap::default(),
    };
    let st = Settings::from_config(&cfg)?;

    let scenario = match cmd {
        Cmd::Semiwave => Some(Scenario::SemiWaveTable {
            s_values: st.s_values.clone(),
        }),
        Cmd::Speed => Some(Scenario::SpeedSelection),
        Cmd::Simulate => Some(Scenario::SpreadingVerification),
        Cmd::Sweep => Some(Scenario::MuSweep {
            mus: st.mus.clone(),
        }),
        Cmd::Converge => Some(Scenario::ConvergenceStudy),
        Cmd::Freeze | Cmd::Check => None,
    };

    if let Some(scenario) = scenario {
        let spec = st.spec(scenario, &cli.out);
        // Re-check the assembled experiment as configuration before running,
        // so an invalid value exits 66 rather than 1.
        spec.validate().map_err(config_err)?;
        let summary = harness::run(&spec).map_err(CliError::Run)?;
        println!("{}", summary.result_line());
        return Ok(match summary.exit {
            ExitClass::Success => EXIT_SUCCESS,
            ExitClass::Undetermined => EXIT_UNDETERMINED,
        });
    }

    match cmd {
        Cmd::Freeze => {
            let path = st
                .store
                .clone()
                .unwrap_or_else(|| cli.out.join("frozen.csv"));
            if !cli.quiet {
                println!(
                    "recomputing reference values (full pipeline plus two refined solves)"
                );
            }
            let store = harness::freeze_references(&path).map_err(CliError::Run)?;
            println!(
                "RESULT freeze entries={} file={}",
                store.entries.len(),
                path.display()
            );
            Ok(EXIT_SUCCESS)
        }
        Cmd::Check => {
            let store = match &st.store {
                Some(path) => FrozenStore::load(path).map_err(config_err)?,
                None => FrozenStore::embedded(),
            };
            let current = harness::current_reference_values().map_err(CliError::Run)?;
            let outcomes = check_frozen(&store, &current);
            let (mut pass, mut fail, mut new) = (0, 0, 0);
            for o in &outcomes {
                match o.status {
                    CheckStatus::Pass => {
                        pass += 1;
                        if !cli.quiet {
                            println!(
                                "CHECK {}: PASS (value={} expected={} tol={})",
                                o.fingerprint,
                                o.value,
                                o.expected.unwrap(),
                                o.tolerance.unwrap()
                            );
                        }
                    }
                    CheckStatus::Fail => {
                        fail += 1;
                        println!(
                            "CHECK {}: FAIL (value={} expected={} tol={})",
                            o.fingerprint,
                            o.value,
                            o.expected.unwrap(),
                            o.tolerance.unwrap()
                        );
                    }
                    CheckStatus::New => {
                        new += 1;
                        println!("CHECK {}: NEW (value={})", o.fingerprint, o.value);
                    }
                }
            }
            println!("RESULT check pass={pass} fail={fail} new={new}");
            Ok(if fail > 0 { EXIT_FAILURE } else { EXIT_SUCCESS })
        }
        _ => unreachable!("scenario commands handled above"),
    }
}

/// Parses `args` (including the program name) and runs the subcommand,
/// returning the process exit code.
pub fn run<I>(args: I) -> i32
where
    I: IntoIterator<Item = String>,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let informational = matches!(
                e.kind(),
                ErrorKind::DisplayHelp
                    | ErrorKind::DisplayVersion
                    | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand
            );
            let _ = e.print();
            return if informational { EXIT_SUCCESS } else { EXIT_USAGE };
        }
    };
    if cli.version {
        print_version();
        return EXIT_SUCCESS;
    }
    let Some(cmd) = &cli.cmd else {
        eprintln!(
            "error: a subcommand is required \
             (semiwave, speed, simulate, sweep, converge, freeze, check)"
        );
        eprintln!("run with --help for details");
        return EXIT_USAGE;
    };
    match dispatch(&cli, cmd) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            err.exit_code()
        }
    }
}
