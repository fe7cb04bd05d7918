//! Experiment driver: named scenarios, CSV output, and a frozen-reference
//! store for regression checks.
//!
//! A scenario bundles the solvers into one reproducible run: semi-wave
//! tables, speed selection, `mu`-sweeps, the spreading verification that
//! compares the measured front slope with the selected speed, and a
//! convergence study. All floating-point output goes through the shortest
//! round-trip formatting, so two runs of the same build produce
//! byte-identical files.

use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::fbsolver::{
    classify_outcome, compare_with_semiwave, measure_speed, required_r_max, simulate,
    ClassifyThresholds, CompareReport, FbError, FreeBoundaryState, InitialData, Outcome,
    SimOptions, Snapshot, Trajectory, Validation,
};
use crate::model::{ModelError, ModelParams};
use crate::numerics::LineFit;
use crate::semiwave::{
    relax_semiwave, RelaxOptions, RelaxOutcome, SemiWaveError, SemiWaveProfile, XiGrid,
};
use crate::speed::{SpeedError, SpeedOptions, SpeedResult, SpeedSolver};
use rayon::prelude::*;

/// Errors from scenario runs and the frozen store.
#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid experiment: {0}")]
    Spec(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    SemiWave(#[from] SemiWaveError),
    #[error(transparent)]
    Speed(#[from] SpeedError),
    #[error(transparent)]
    Fb(#[from] FbError),
    #[error("frozen store: {0}")]
    Frozen(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Shortest round-trip decimal text for a float; the single formatting used
/// in every CSV so identical runs produce identical bytes.
pub fn fmt_f64(x: f64) -> String {
    format!("{x}")
}

/// What to run.
#[derive(Debug, Clone)]
pub enum Scenario {
    /// Semi-wave profiles at the given frame speeds.
    SemiWaveTable { s_values: Vec<f64> },
    /// `s0` estimate plus speed selection at the model's own `mu`.
    SpeedSelection,
    /// Speed selection across a list of `mu` values (runs concurrently).
    MuSweep { mus: Vec<f64> },
    /// Full pipeline: select `s_mu`, simulate the free boundary, classify,
    /// measure the front slope, and compare against the semi-wave.
    SpreadingVerification,
    /// Grid- and step-refinement orders for the two main observables.
    ConvergenceStudy,
}

impl Scenario {
    pub fn name(&self) -> &'static str {
        match self {
            Scenario::SemiWaveTable { .. } => "semiwave",
            Scenario::SpeedSelection => "speed",
            Scenario::MuSweep { .. } => "sweep",
            Scenario::SpreadingVerification => "simulate",
            Scenario::ConvergenceStudy => "converge",
        }
    }
}

/// One fully specified run.
#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub model: ModelParams,
    pub scenario: Scenario,
    pub out_dir: PathBuf,
    pub grid: XiGrid,
    /// Bisection width for the selected speed.
    pub tol_s: f64,
    /// Bisection width for the existence threshold.
    pub tol_s0: f64,
    pub h0: f64,
    pub t_end: f64,
    pub dt: f64,
    pub dr: f64,
    pub y_cells: usize,
    pub sample_dt: f64,
    pub snapshot_times: Vec<f64>,
    /// Peak of the parabolic invader bump, supported on `r < h0`.
    pub u0_amplitude: f64,
    /// Uniform resident level (its floor for validation).
    pub v0_level: f64,
    pub thresholds: ClassifyThresholds,
    pub margin: f64,
}

impl ExperimentSpec {
    pub fn new(model: ModelParams, scenario: Scenario, out_dir: impl Into<PathBuf>) -> Self {
        Self {
            model,
            scenario,
            out_dir: out_dir.into(),
            grid: XiGrid::default_semiwave(),
            tol_s: 1e-4,
            tol_s0: 1e-3,
            h0: 5.0,
            t_end: 200.0,
            dt: 0.01,
            dr: 0.1,
            y_cells: 400,
            sample_dt: 0.5,
            snapshot_times: Vec::new(),
            u0_amplitude: 0.9,
            v0_level: 1.0,
            thresholds: ClassifyThresholds::default(),
            margin: 20.0,
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        self.model.validate()?;
        if let Scenario::MuSweep { mus } = &self.scenario {
            if mus.is_empty() {
                return Err(HarnessError::Spec("mu list must not be empty".into()));
            }
            if mus.iter().any(|&m| !(m > 0.0)) {
                return Err(HarnessError::Spec("mu values must be positive".into()));
            }
            if mus.windows(2).any(|w| w[1] <= w[0]) {
                return Err(HarnessError::Spec(
                    "mu list must be strictly increasing".into(),
                ));
            }
        }
        if let Scenario::SemiWaveTable { s_values } = &self.scenario {
            if s_values.is_empty() {
                return Err(HarnessError::Spec("s list must not be empty".into()));
            }
            if s_values.iter().any(|&s| !(s >= 0.0)) {
                return Err(HarnessError::Spec("s values must be nonnegative".into()));
            }
        }
        for (name, v) in [
            ("tol_s", self.tol_s),
            ("tol_s0", self.tol_s0),
            ("h0", self.h0),
            ("t_end", self.t_end),
            ("dt", self.dt),
            ("dr", self.dr),
            ("sample_dt", self.sample_dt),
            ("u0_amplitude", self.u0_amplitude),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(HarnessError::Spec(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        if !(self.v0_level >= 0.0) || !self.v0_level.is_finite() {
            return Err(HarnessError::Spec(format!(
                "v0_level must be nonnegative, got {}",
                self.v0_level
            )));
        }
        if self.y_cells < 8 {
            return Err(HarnessError::Spec("need at least 8 front-fixed cells".into()));
        }
        Ok(())
    }
}

/// Exit class of a finished run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitClass {
    Success,
    /// The dichotomy test could not decide within the simulated horizon.
    Undetermined,
}

/// Key/value summary of a finished run, one line per scenario.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub scenario: &'static str,
    pub fields: Vec<(String, String)>,
    pub exit: ExitClass,
}

impl RunSummary {
    pub fn get(&self, key: &str) -> Option<&str> {
        self.fields
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    /// The `RESULT <scenario> key=value ...` line.
    pub fn result_line(&self) -> String {
        let mut line = format!("RESULT {}", self.scenario);
        for (k, v) in &self.fields {
            line.push(' ');
            line.push_str(k);
            line.push('=');
            line.push_str(v);
        }
        line
    }
}

fn write_profile_csv(path: &Path, prof: &SemiWaveProfile) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["xi", "phi", "psi"])?;
    for i in 0..prof.grid.num_nodes() {
        w.write_record([
            fmt_f64(prof.grid.xi(i)),
            fmt_f64(prof.phi[i]),
            fmt_f64(prof.psi[i]),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

fn write_speed_csv(
    path: &Path,
    m: &ModelParams,
    rows: &[&SpeedResult],
) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "a",
        "b",
        "d",
        "r",
        "mu",
        "s0_lower",
        "s0_upper",
        "s0_est",
        "s_mu",
        "eta_residual",
    ])?;
    for res in rows {
        w.write_record([
            fmt_f64(m.a),
            fmt_f64(m.b),
            fmt_f64(m.d),
            fmt_f64(m.r),
            fmt_f64(res.mu),
            fmt_f64(res.s0_lower),
            fmt_f64(res.s0_upper),
            fmt_f64(res.s0_est),
            fmt_f64(res.s_mu),
            fmt_f64(res.eta_residual),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

fn write_trace_csv(path: &Path, res: &SpeedResult) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["s", "eta"])?;
    for (s, eta) in &res.trace {
        w.write_record([fmt_f64(*s), fmt_f64(*eta)])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

fn write_front_csv(path: &Path, traj: &Trajectory) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["t", "h", "dhdt", "h_over_t"])?;
    for i in 0..traj.times.len() {
        let t = traj.times[i];
        w.write_record([
            fmt_f64(t),
            fmt_f64(traj.h[i]),
            fmt_f64(traj.dhdt[i]),
            fmt_f64(traj.h[i] / t),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

fn write_snapshot_csv(path: &Path, snap: &Snapshot) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["r", "u", "v"])?;
    for k in 0..snap.v.len() {
        w.write_record([
            fmt_f64(k as f64 * snap.dr),
            fmt_f64(snap.u[k]),
            fmt_f64(snap.v[k]),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Inputs of the spreading pipeline, independent of any output directory.
#[derive(Debug, Clone)]
pub struct SpreadingSetup {
    pub m: ModelParams,
    pub grid: XiGrid,
    pub tol_s: f64,
    pub tol_s0: f64,
    pub h0: f64,
    pub t_end: f64,
    pub dt: f64,
    pub dr: f64,
    pub y_cells: usize,
    pub u0_amplitude: f64,
    pub v0_level: f64,
    pub sample_dt: f64,
    pub snapshot_times: Vec<f64>,
    pub thresholds: ClassifyThresholds,
    pub margin: f64,
}

impl SpreadingSetup {
    fn from_spec(spec: &ExperimentSpec) -> Self {
        Self {
            m: spec.model,
            grid: spec.grid,
            tol_s: spec.tol_s,
            tol_s0: spec.tol_s0,
            h0: spec.h0,
            t_end: spec.t_end,
            dt: spec.dt,
            dr: spec.dr,
            y_cells: spec.y_cells,
            u0_amplitude: spec.u0_amplitude,
            v0_level: spec.v0_level,
            sample_dt: spec.sample_dt,
            snapshot_times: spec.snapshot_times.clone(),
            thresholds: spec.thresholds,
            margin: spec.margin,
        }
    }
}

/// Everything the spreading pipeline produces.
#[derive(Debug, Clone)]
pub struct SpreadingOutput {
    pub speed: SpeedResult,
    pub profile: SemiWaveProfile,
    pub trajectory: Trajectory,
    pub final_state: FreeBoundaryState,
    pub fit: LineFit,
    pub compare: CompareReport,
    pub outcome: Outcome,
}

/// Selects `s_mu`, runs the free boundary, classifies the outcome, fits the
/// late-time front slope, and compares the final state with the semi-wave.
pub fn run_spreading(setup: &SpreadingSetup) -> Result<SpreadingOutput, HarnessError> {
    let opts = SpeedOptions {
        tol_s0: setup.tol_s0,
        ..SpeedOptions::default()
    };
    let mut solver = SpeedSolver::with_options(&setup.m, setup.grid, opts)?;
    let speed = solver.solve_s_mu(setup.m.mu, setup.tol_s)?;
    let profile = solver.profile_at(speed.s_mu, true)?;

    let r_max = required_r_max(&setup.m, setup.h0, setup.t_end, setup.margin);
    let h0 = setup.h0;
    let amp = setup.u0_amplitude;
    let level = setup.v0_level;
    let init = InitialData::from_fns(
        h0,
        setup.y_cells,
        r_max,
        setup.dr,
        level,
        |r| amp * (1.0 - (r / h0) * (r / h0)).max(0.0),
        |_| level,
    );
    let sim = SimOptions {
        t_end: setup.t_end,
        dt: setup.dt,
        sample_dt: setup.sample_dt,
        snapshot_times: setup.snapshot_times.clone(),
        margin: setup.margin,
        allow_small_domain: false,
        validation: if level > 0.0 {
            Validation::Standard
        } else {
            Validation::Permissive
        },
    };
    let (trajectory, final_state) = simulate(&init, &setup.m, &sim)?;
    let fit = measure_speed(&trajectory, setup.thresholds.window_fraction)?;
    let outcome = classify_outcome(&trajectory, &setup.thresholds);
    let compare = compare_with_semiwave(&final_state, &profile, 20.0);
    Ok(SpreadingOutput {
        speed,
        profile,
        trajectory,
        final_state,
        fit,
        compare,
        outcome,
    })
}

/// Runs a scenario, writing its CSV files under `spec.out_dir`.
pub fn run(spec: &ExperimentSpec) -> Result<RunSummary, HarnessError> {
    spec.validate()?;
    fs::create_dir_all(&spec.out_dir)?;
    let mut fields: Vec<(String, String)> = Vec::new();
    let mut exit = ExitClass::Success;

    match &spec.scenario {
        Scenario::SemiWaveTable { s_values } => {
            let single = s_values.len() == 1;
            for (i, &s) in s_values.iter().enumerate() {
                let name = if single {
                    "profile.csv".to_string()
                } else {
                    format!("profile_{i:02}.csv")
                };
                let opts = RelaxOptions::default();
                match relax_semiwave(
                    &spec.model,
                    s,
                    crate::model::GrowthOffsets::ZERO,
                    &spec.grid,
                    &opts,
                )? {
                    RelaxOutcome::Profile(prof) => {
                        write_profile_csv(&spec.out_dir.join(&name), &prof)?;
                        fields.push((format!("s_{i}"), fmt_f64(s)));
                        fields.push((format!("dpsi0_{i}"), fmt_f64(prof.dpsi0)));
                        fields.push((format!("residual_{i}"), fmt_f64(prof.residual)));
                    }
                    RelaxOutcome::Degenerate(info) => {
                        fields.push((format!("s_{i}"), fmt_f64(s)));
                        fields.push((format!("degenerate_{i}"), "true".to_string()));
                        fields.push((format!("interface_{i}"), fmt_f64(info.interface)));
                    }
                }
            }
        }
        Scenario::SpeedSelection => {
            let opts = SpeedOptions {
                tol_s0: spec.tol_s0,
                ..SpeedOptions::default()
            };
            let mut solver = SpeedSolver::with_options(&spec.model, spec.grid, opts)?;
            let res = solver.solve_s_mu(spec.model.mu, spec.tol_s)?;
            let prof = solver.profile_at(res.s_mu, true)?;
            write_speed_csv(&spec.out_dir.join("speed.csv"), &spec.model, &[&res])?;
            write_trace_csv(&spec.out_dir.join("trace.csv"), &res)?;
            write_profile_csv(&spec.out_dir.join("profile.csv"), &prof)?;
            fields.extend([
                ("s0_lower".into(), fmt_f64(res.s0_lower)),
                ("s0_upper".into(), fmt_f64(res.s0_upper)),
                ("s0_est".into(), fmt_f64(res.s0_est)),
                ("s_mu".into(), fmt_f64(res.s_mu)),
                ("eta_residual".into(), fmt_f64(res.eta_residual)),
                ("evals".into(), res.trace.len().to_string()),
            ]);
        }
        Scenario::MuSweep { mus } => {
            let opts = SpeedOptions {
                tol_s0: spec.tol_s0,
                ..SpeedOptions::default()
            };
            let mut base = SpeedSolver::with_options(&spec.model, spec.grid, opts)?;
            let s0 = base.estimate_s0()?;
            let results: Vec<Result<SpeedResult, SpeedError>> = mus
                .par_iter()
                .map(|&mu| {
                    SpeedSolver::with_options(&spec.model, spec.grid, opts)?
                        .with_s0_est(s0)
                        .solve_s_mu(mu, spec.tol_s)
                })
                .collect();
            let mut rows = Vec::with_capacity(results.len());
            for res in results {
                rows.push(res?);
            }
            write_speed_csv(
                &spec.out_dir.join("speed.csv"),
                &spec.model,
                &rows.iter().collect::<Vec<_>>(),
            )?;
            let monotone = rows.windows(2).all(|w| w[1].s_mu >= w[0].s_mu);
            fields.push(("s0_est".into(), fmt_f64(s0)));
            for (i, res) in rows.iter().enumerate() {
                fields.push((format!("mu{i}"), fmt_f64(res.mu)));
                fields.push((format!("s_mu{i}"), fmt_f64(res.s_mu)));
            }
            fields.push(("monotone".into(), monotone.to_string()));
        }
        Scenario::SpreadingVerification => {
            let out = run_spreading(&SpreadingSetup::from_spec(spec))?;
            write_speed_csv(&spec.out_dir.join("speed.csv"), &spec.model, &[&out.speed])?;
            write_profile_csv(&spec.out_dir.join("profile.csv"), &out.profile)?;
            write_front_csv(&spec.out_dir.join("front.csv"), &out.trajectory)?;
            for snap in &out.trajectory.snapshots {
                // Accumulated step time carries float noise; label to ms.
                let name = format!("snapshot_t{:.3}.csv", snap.t);
                write_snapshot_csv(&spec.out_dir.join(name), snap)?;
            }
            let gap_rel = (out.fit.slope - out.speed.s_mu).abs() / out.speed.s_mu;
            let diag = out.trajectory.diagnostics;
            fields.extend([
                ("s0_est".into(), fmt_f64(out.speed.s0_est)),
                ("s_mu".into(), fmt_f64(out.speed.s_mu)),
                ("slope".into(), fmt_f64(out.fit.slope)),
                ("slope_stderr".into(), fmt_f64(out.fit.slope_stderr)),
                ("gap_rel".into(), fmt_f64(gap_rel)),
                ("outcome".into(), out.outcome.to_string()),
                ("h_end".into(), fmt_f64(out.final_state.h)),
                ("sup_u".into(), fmt_f64(out.compare.sup_u)),
                ("sup_v".into(), fmt_f64(out.compare.sup_v)),
                ("min_u".into(), fmt_f64(diag.min_u)),
                ("min_v".into(), fmt_f64(diag.min_v)),
                ("max_u".into(), fmt_f64(diag.max_u)),
                ("max_v".into(), fmt_f64(diag.max_v)),
            ]);
            if out.outcome == Outcome::Undetermined {
                exit = ExitClass::Undetermined;
            }
        }
        Scenario::ConvergenceStudy => {
            let (dpsi0_vals, dpsi0_steps) = dpsi0_refinement(&spec.model, &spec.grid)?;
            let t_small = spec.t_end.min(10.0);
            let mut front_vals = Vec::new();
            let mut front_steps = Vec::new();
            for k in 0..3 {
                let dt = spec.dt / f64::powi(2.0, k);
                front_steps.push(dt);
                front_vals.push(front_position_at(spec, t_small, dt)?);
            }
            let mut w = csv::Writer::from_path(spec.out_dir.join("convergence.csv"))?;
            w.write_record(["quantity", "step", "value"])?;
            for (s, v) in dpsi0_steps.iter().zip(&dpsi0_vals) {
                w.write_record(["dpsi0".to_string(), fmt_f64(*s), fmt_f64(*v)])?;
            }
            for (s, v) in front_steps.iter().zip(&front_vals) {
                w.write_record(["front_position".to_string(), fmt_f64(*s), fmt_f64(*v)])?;
            }
            w.flush().map_err(csv::Error::from)?;

            let order = |v: &[f64]| ((v[0] - v[1]) / (v[1] - v[2])).log2();
            let extrap = |v: &[f64]| {
                let ratio = (v[0] - v[1]) / (v[1] - v[2]);
                v[2] + (v[2] - v[1]) / (ratio - 1.0)
            };
            fields.extend([
                ("dpsi0_order".into(), fmt_f64(order(&dpsi0_vals))),
                ("dpsi0_extrap".into(), fmt_f64(extrap(&dpsi0_vals))),
                ("front_order".into(), fmt_f64(order(&front_vals))),
                ("front_extrap".into(), fmt_f64(extrap(&front_vals))),
            ]);
        }
    }

    Ok(RunSummary {
        scenario: spec.scenario.name(),
        fields,
        exit,
    })
}

/// Boundary slope at `s = 0` on the grid and two refinements.
fn dpsi0_refinement(
    m: &ModelParams,
    grid: &XiGrid,
) -> Result<(Vec<f64>, Vec<f64>), HarnessError> {
    let mut vals = Vec::new();
    let mut steps = Vec::new();
    let mut g = *grid;
    for _ in 0..3 {
        let opts = RelaxOptions {
            tol: 1e-11,
            ..RelaxOptions::default()
        };
        match relax_semiwave(m, 0.0, crate::model::GrowthOffsets::ZERO, &g, &opts)? {
            RelaxOutcome::Profile(p) => vals.push(p.dpsi0),
            RelaxOutcome::Degenerate(_) => {
                return Err(HarnessError::Spec(
                    "the zero-speed profile collapsed; parameters are outside the \
                     superior-invader regime"
                        .into(),
                ))
            }
        }
        steps.push(g.h_xi());
        g = g.refined();
    }
    Ok((vals, steps))
}

/// Front position at `t_end` for one step size (small-horizon run).
fn front_position_at(spec: &ExperimentSpec, t_end: f64, dt: f64) -> Result<f64, HarnessError> {
    let r_max = required_r_max(&spec.model, spec.h0, t_end, spec.margin);
    let h0 = spec.h0;
    let amp = spec.u0_amplitude;
    let level = spec.v0_level;
    let init = InitialData::from_fns(
        h0,
        spec.y_cells,
        r_max,
        spec.dr,
        level,
        |r| amp * (1.0 - (r / h0) * (r / h0)).max(0.0),
        |_| level,
    );
    let sim = SimOptions {
        t_end,
        dt,
        sample_dt: spec.sample_dt,
        snapshot_times: Vec::new(),
        margin: spec.margin,
        allow_small_domain: false,
        validation: if level > 0.0 {
            Validation::Standard
        } else {
            Validation::Permissive
        },
    };
    let (_, final_state) = simulate(&init, &spec.model, &sim)?;
    Ok(final_state.h)
}

/// One frozen scalar: a stable fingerprint, the stored value, the allowed
/// deviation, and a human note on what it measures.
#[derive(Debug, Clone, PartialEq)]
pub struct FrozenReference {
    pub fingerprint: String,
    pub value: f64,
    pub tolerance: f64,
    pub note: String,
}

/// CSV-backed collection of frozen references.
#[derive(Debug, Clone, Default)]
pub struct FrozenStore {
    pub entries: Vec<FrozenReference>,
}

impl FrozenStore {
    pub fn parse(text: &str) -> Result<Self, HarnessError> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(text.as_bytes());
        let mut entries = Vec::new();
        for record in reader.records() {
            let record = record?;
            if record.len() != 4 {
                return Err(HarnessError::Frozen(format!(
                    "expected 4 columns (fingerprint,value,tolerance,note), got {}",
                    record.len()
                )));
            }
            let value: f64 = record[1]
                .parse()
                .map_err(|e| HarnessError::Frozen(format!("bad value: {e}")))?;
            let tolerance: f64 = record[2]
                .parse()
                .map_err(|e| HarnessError::Frozen(format!("bad tolerance: {e}")))?;
            entries.push(FrozenReference {
                fingerprint: record[0].to_string(),
                value,
                tolerance,
                note: record[3].to_string(),
            });
        }
        Ok(Self { entries })
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = fs::read_to_string(path)?;
        Self::parse(&text)
    }

    /// The store checked in with the crate and compiled into the binary.
    pub fn embedded() -> Self {
        Self::parse(include_str!("../data/frozen.csv"))
            .expect("the embedded frozen store parses")
    }

    pub fn save(&self, path: &Path) -> Result<(), HarnessError> {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["fingerprint", "value", "tolerance", "note"])?;
        for e in &self.entries {
            w.write_record([
                e.fingerprint.clone(),
                fmt_f64(e.value),
                fmt_f64(e.tolerance),
                e.note.clone(),
            ])?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    pub fn find(&self, fingerprint: &str) -> Option<&FrozenReference> {
        self.entries.iter().find(|e| e.fingerprint == fingerprint)
    }
}

/// Verdict for one recomputed value against the store.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckStatus {
    Pass,
    Fail,
    /// Not in the store yet; reported but never failing.
    New,
}

#[derive(Debug, Clone)]
pub struct CheckOutcome {
    pub fingerprint: String,
    pub value: f64,
    pub expected: Option<f64>,
    pub tolerance: Option<f64>,
    pub status: CheckStatus,
}

/// Compares recomputed values against the store entry with the same
/// fingerprint. Unknown fingerprints are reported as new, not failed.
pub fn check_frozen(store: &FrozenStore, current: &[(String, f64)]) -> Vec<CheckOutcome> {
    current
        .iter()
        .map(|(fp, value)| match store.find(fp) {
            Some(entry) => {
                let ok = (value - entry.value).abs() <= entry.tolerance;
                CheckOutcome {
                    fingerprint: fp.clone(),
                    value: *value,
                    expected: Some(entry.value),
                    tolerance: Some(entry.tolerance),
                    status: if ok { CheckStatus::Pass } else { CheckStatus::Fail },
                }
            }
            None => CheckOutcome {
                fingerprint: fp.clone(),
                value: *value,
                expected: None,
                tolerance: None,
                status: CheckStatus::New,
            },
        })
        .collect()
}

/// The parameter set every frozen reference is computed at.
pub fn reference_model() -> ModelParams {
    ModelParams::new(1.0, 1.0, 2.0, 0.5, 1.0, 1).expect("reference parameters are valid")
}

/// Spreading pipeline at the reference parameters (the run the frozen
/// front-speed references come from).
pub fn reference_spreading_setup() -> SpreadingSetup {
    SpreadingSetup {
        m: reference_model(),
        grid: XiGrid::default_semiwave(),
        tol_s: 1e-4,
        tol_s0: 1e-3,
        h0: 5.0,
        t_end: 200.0,
        dt: 0.01,
        dr: 0.1,
        y_cells: 400,
        u0_amplitude: 0.9,
        v0_level: 1.0,
        sample_dt: 0.5,
        snapshot_times: Vec::new(),
        thresholds: ClassifyThresholds::default(),
        margin: 20.0,
    }
}

pub const FP_DPSI0: &str = "dpsi0|s=0|a=2|b=0.5|d=1|r=1|grid=60:60:0.05";
pub const FP_SMU: &str = "s_mu|mu=1|a=2|b=0.5|d=1|r=1|grid=60:60:0.05";
pub const FP_SMU_EXTRAP: &str = "s_mu_extrapolated|mu=1|a=2|b=0.5|d=1|r=1";
pub const FP_FRONT_GAP: &str = "front_gap_rel|mu=1|h0=5|t_end=200|dt=0.01";
pub const FP_SUP_U: &str = "compare_sup_u|mu=1|h0=5|t_end=200|dt=0.01";

/// Recomputes, on the production grid, the value behind every fingerprint.
pub fn current_reference_values() -> Result<Vec<(String, f64)>, HarnessError> {
    let m = reference_model();
    let grid = XiGrid::default_semiwave();
    let mut solver = SpeedSolver::new(&m, grid)?;
    let dpsi0 = solver.profile_at(0.0, true)?.dpsi0;
    let smu = solver.solve_s_mu(1.0, 1e-4)?;
    let spread = run_spreading(&reference_spreading_setup())?;
    let gap_rel = (spread.fit.slope - spread.speed.s_mu).abs() / spread.speed.s_mu;
    Ok(vec![
        (FP_DPSI0.to_string(), dpsi0),
        (FP_SMU.to_string(), smu.s_mu),
        // The production-grid speed is also held against the extrapolated
        // value, whose tolerance budgets the discretization error.
        (FP_SMU_EXTRAP.to_string(), smu.s_mu),
        (FP_FRONT_GAP.to_string(), gap_rel),
        (FP_SUP_U.to_string(), spread.compare.sup_u),
    ])
}

/// Recomputes every reference (including the grid-refinement extrapolation)
/// and writes the store to `path`.
pub fn freeze_references(path: &Path) -> Result<FrozenStore, HarnessError> {
    let current = current_reference_values()?;
    let value_of = |fp: &str| {
        current
            .iter()
            .find(|(k, _)| k == fp)
            .map(|(_, v)| *v)
            .expect("fingerprint is computed")
    };

    let m = reference_model();
    let grid = XiGrid::default_semiwave();
    let s0_seed = SpeedSolver::new(&m, grid)?.estimate_s0()?;
    // The roots on the refined grids must be resolved well below the
    // grid-to-grid shift of the root (a few 1e-5), or the extrapolation
    // would amplify root-finding noise instead of discretization error.
    let tight = SpeedOptions {
        eta_target: 1e-6,
        ..SpeedOptions::default()
    };
    let mut refined_smu = Vec::new();
    let mut g = grid;
    for _ in 0..2 {
        g = g.refined();
        let res = SpeedSolver::with_options(&m, g, tight)?
            .with_s0_est(s0_seed)
            .solve_s_mu(1.0, 1e-5)?;
        refined_smu.push(res.s_mu);
    }
    // Second-order slope discretization: one Richardson step on the two
    // finest grids.
    let extrapolated = refined_smu[1] + (refined_smu[1] - refined_smu[0]) / 3.0;

    let entry = |fp: &str, value: f64, tolerance: f64, note: &str| FrozenReference {
        fingerprint: fp.to_string(),
        value,
        tolerance,
        note: note.to_string(),
    };
    let store = FrozenStore {
        entries: vec![
            entry(
                FP_DPSI0,
                value_of(FP_DPSI0),
                1e-6,
                "boundary slope of the zero-speed semi-wave (regression)",
            ),
            entry(
                FP_SMU,
                value_of(FP_SMU),
                5e-4,
                "selected speed on the production grid (regression)",
            ),
            entry(
                FP_SMU_EXTRAP,
                extrapolated,
                1e-3,
                "grid-extrapolated selected speed; production grid must agree \
                 within discretization error",
            ),
            entry(
                FP_FRONT_GAP,
                value_of(FP_FRONT_GAP),
                1e-4,
                "relative gap between the measured front slope and s_mu (regression)",
            ),
            entry(
                FP_SUP_U,
                value_of(FP_SUP_U),
                1e-4,
                "sup |u - psi(h - r)| against the semi-wave at t_end (regression)",
            ),
        ],
    };
    store.save(path)?;
    Ok(store)
}
