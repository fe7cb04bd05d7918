//! Radially symmetric free-boundary simulation.
//!
//! The invader `u` occupies the ball `r < h(t)` with a Stefan condition on
//! the moving edge, while the resident `v` lives on a fixed domain
//! `[0, r_max]`:
//!
//! ```text
//! u_t = d (u_rr + (N-1)/r u_r) + r u (1 - u - b v)   on 0 < r < h(t)
//! v_t =    v_rr + (N-1)/r v_r  +   v (1 - v - a u)   on 0 < r < r_max
//! u_r(0) = 0, u(h(t)) = 0, h'(t) = -mu u_r(h(t))
//! v_r(0) = 0, v_r(r_max) = 0
//! ```
//!
//! The `u`-field is front-fixed onto `y = r / h(t)` in `[0, 1]`, which
//! turns the moving boundary into a fixed Dirichlet end plus an extra
//! drift `y h'(t)/h` in the advection coefficient. Each step updates `h`
//! explicitly from the one-sided boundary gradient, then advances both
//! fields with implicit diffusion/advection (tridiagonal solves) and
//! explicit reaction. Advection is discretized centered where the cell
//! Peclet number allows and upwind otherwise, so both implicit matrices
//! stay M-matrices and the fields remain nonnegative and bounded by their
//! initial invariant levels at every step.

use thiserror::Error;

use crate::model::ModelParams;
use crate::numerics::{fit_line, lerp_uniform, LineFit, NumericsError, TridiagonalWorkspace};
use crate::semiwave::SemiWaveProfile;

/// Errors from free-boundary runs.
#[derive(Debug, Error)]
pub enum FbError {
    #[error("invalid initial data: {0}")]
    InitialData(String),
    #[error(
        "domain too small: r_max = {r_max} but the front can reach {required} \
         (= h0 + 2 sqrt(r d) t_end + margin); enlarge the grid or opt in to a small domain"
    )]
    DomainTooSmall { r_max: f64, required: f64 },
    #[error("time step {dt} too large for the explicit reaction; need dt <= {max_dt:.3e}")]
    StepTooLarge { dt: f64, max_dt: f64 },
    #[error("free boundary retreated: dhdt = {dhdt:.3e} at t = {t}")]
    FrontRetreat { t: f64, dhdt: f64 },
    #[error("{what} exceeded its invariant bound by more than 10%: {value} at t = {t}")]
    Instability {
        what: &'static str,
        value: f64,
        t: f64,
    },
    #[error("domain exhausted: h = {h} passed 0.9 r_max = {limit} at t = {t}")]
    DomainExhausted { h: f64, limit: f64, t: f64 },
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// How strictly [`InitialData::validate`] vets the fields.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Validation {
    /// Shape, finiteness, and nonnegativity only; admits reduced setups
    /// such as an absent resident (`v0` identically zero).
    Permissive,
    /// Adds a nontrivial invader and a resident above its stated floor.
    Standard,
    /// Adds the comparison-argument hypotheses: both fields at or below
    /// carrying capacity and the invader positive inside its initial
    /// support.
    Strict,
}

/// Initial fields: `u0` on the front-fixed grid `y in [0, 1]` (its last
/// entry is the Dirichlet zero at the free boundary), `v0` on the fixed
/// radial grid `{0, dr, ..., r_max}`.
#[derive(Debug, Clone)]
pub struct InitialData {
    pub h0: f64,
    pub u0: Vec<f64>,
    pub v0: Vec<f64>,
    pub dr: f64,
    /// Claimed pointwise lower bound for `v0`, used by the stricter
    /// validation levels.
    pub v0_floor: f64,
}

impl InitialData {
    /// Samples `u0(r)` on `y_cells + 1` front-fixed nodes (forcing the
    /// boundary zero) and `v0(r)` on the fixed radial grid.
    pub fn from_fns(
        h0: f64,
        y_cells: usize,
        r_max: f64,
        dr: f64,
        v0_floor: f64,
        u0: impl Fn(f64) -> f64,
        v0: impl Fn(f64) -> f64,
    ) -> Self {
        let dy = 1.0 / y_cells as f64;
        let mut u = Vec::with_capacity(y_cells + 1);
        for j in 0..=y_cells {
            u.push(u0(j as f64 * dy * h0));
        }
        u[y_cells] = 0.0;
        // Round up so the realized domain always covers the requested radius.
        let r_cells = (r_max / dr).ceil().max(1.0) as usize;
        let v = (0..=r_cells).map(|k| v0(k as f64 * dr)).collect();
        Self {
            h0,
            u0: u,
            v0: v,
            dr,
            v0_floor,
        }
    }

    pub fn r_max(&self) -> f64 {
        (self.v0.len() - 1) as f64 * self.dr
    }

    pub fn validate(&self, level: Validation) -> Result<(), FbError> {
        let err = |msg: String| Err(FbError::InitialData(msg));
        if !(self.h0 > 0.0) || !self.h0.is_finite() {
            return err(format!("h0 must be positive and finite, got {}", self.h0));
        }
        if !(self.dr > 0.0) || !self.dr.is_finite() {
            return err(format!("dr must be positive and finite, got {}", self.dr));
        }
        if self.u0.len() < 9 || self.v0.len() < 9 {
            return err("need at least 8 cells per field".to_string());
        }
        if self.u0.iter().chain(&self.v0).any(|x| !x.is_finite()) {
            return err("fields must be finite".to_string());
        }
        if self.u0.iter().chain(&self.v0).any(|&x| x < 0.0) {
            return err("densities must be nonnegative".to_string());
        }
        if *self.u0.last().unwrap() != 0.0 {
            return err("u0 must vanish at the free boundary".to_string());
        }
        if level == Validation::Permissive {
            return Ok(());
        }
        if !self.u0.iter().any(|&x| x > 0.0) {
            return err("u0 must not be identically zero".to_string());
        }
        if !(self.v0_floor > 0.0) {
            return err(format!(
                "v0_floor must be positive, got {}",
                self.v0_floor
            ));
        }
        if self.v0.iter().any(|&x| x < self.v0_floor) {
            return err("v0 must stay at or above v0_floor".to_string());
        }
        if level == Validation::Standard {
            return Ok(());
        }
        if self.u0.iter().chain(&self.v0).any(|&x| x > 1.0) {
            return err("fields must not exceed carrying capacity".to_string());
        }
        if self.u0[..self.u0.len() - 1].iter().any(|&x| !(x > 0.0)) {
            return err("u0 must be positive inside its support".to_string());
        }
        Ok(())
    }
}

/// One time slice of the run.
#[derive(Debug, Clone)]
pub struct FreeBoundaryState {
    pub t: f64,
    pub h: f64,
    /// Front speed used in the step that produced this state.
    pub dhdt: f64,
    /// Invader on the front-fixed grid `y in [0, 1]`; the last entry is
    /// the Dirichlet zero at `r = h`.
    pub u: Vec<f64>,
    /// Resident on the fixed radial grid.
    pub v: Vec<f64>,
    pub dr: f64,
}

impl FreeBoundaryState {
    pub fn dy(&self) -> f64 {
        1.0 / (self.u.len() - 1) as f64
    }

    pub fn r_max(&self) -> f64 {
        (self.v.len() - 1) as f64 * self.dr
    }

    /// Invader density at physical radius `r` (zero beyond the front).
    pub fn u_at(&self, r: f64) -> f64 {
        if r >= self.h {
            0.0
        } else {
            lerp_uniform(0.0, self.dy(), &self.u, r / self.h)
        }
    }

    pub fn v_at(&self, r: f64) -> f64 {
        lerp_uniform(0.0, self.dr, &self.v, r)
    }
}

/// Per-step extrema, for monitoring the scheme's invariant bounds.
#[derive(Debug, Clone, Copy)]
pub struct StepStats {
    pub dhdt: f64,
    pub min_u: f64,
    pub max_u: f64,
    pub min_v: f64,
    pub max_v: f64,
}

/// Reusable stepping kernel: holds the invariant bounds inferred from the
/// initial data, the stability limit on the time step, and scratch storage.
pub struct Stepper {
    bound_u: f64,
    bound_v: f64,
    max_dt: f64,
    front_tol: f64,
    ws: TridiagonalWorkspace,
    lower: Vec<f64>,
    diag: Vec<f64>,
    upper: Vec<f64>,
    rhs_u: Vec<f64>,
    rhs_v: Vec<f64>,
}

impl Stepper {
    pub fn new(init: &InitialData, m: &ModelParams) -> Self {
        let max0 = |xs: &[f64]| xs.iter().fold(0.0_f64, |a, &b| a.max(b));
        Self::from_bounds(max0(&init.u0).max(1.0), max0(&init.v0).max(1.0), m)
    }

    /// `bound_u`/`bound_v` are the invariant levels `max(1, sup of the
    /// initial field)`; the time-step limit keeps the explicit reaction
    /// maps monotone on `[0, bound]`, which is what preserves the bounds.
    pub fn from_bounds(bound_u: f64, bound_v: f64, m: &ModelParams) -> Self {
        let max_dt_u = 0.95 / (m.r * (1.0 + 2.0 * bound_u + m.b * bound_v));
        let max_dt_v = 0.95 / (1.0 + 2.0 * bound_v + m.a * bound_u);
        Self {
            bound_u,
            bound_v,
            max_dt: max_dt_u.min(max_dt_v),
            front_tol: 1e-9,
            ws: TridiagonalWorkspace::new(),
            lower: Vec::new(),
            diag: Vec::new(),
            upper: Vec::new(),
            rhs_u: Vec::new(),
            rhs_v: Vec::new(),
        }
    }

    pub fn bounds(&self) -> (f64, f64) {
        (self.bound_u, self.bound_v)
    }

    pub fn max_dt(&self) -> f64 {
        self.max_dt
    }

    /// Advances `st` by one step of size `dt` in place.
    pub fn advance(
        &mut self,
        st: &mut FreeBoundaryState,
        m: &ModelParams,
        dt: f64,
    ) -> Result<StepStats, FbError> {
        if dt > self.max_dt {
            return Err(FbError::StepTooLarge {
                dt,
                max_dt: self.max_dt,
            });
        }
        let mm = st.u.len() - 1;
        let kk = st.v.len() - 1;
        let dy = st.dy();
        let dr = st.dr;
        let n_dim = m.n_dim as f64;

        // Front update first, from the one-sided second-order gradient at
        // the old fields (u[mm] = 0 by the Dirichlet condition).
        let uy1 = (st.u[mm - 2] - 4.0 * st.u[mm - 1]) / (2.0 * dy);
        let mut dhdt = -m.mu * uy1 / st.h;
        if dhdt < -self.front_tol * m.mu.max(1.0) {
            return Err(FbError::FrontRetreat { t: st.t, dhdt });
        }
        dhdt = dhdt.max(0.0);
        let h_new = st.h + dt * dhdt;

        // Both reactions read the old fields, so assemble both right-hand
        // sides before either solve. The invader samples the resident at
        // its new physical positions; the resident samples the invader on
        // the old front scale, where the old field lives.
        self.rhs_u.clear();
        for j in 0..mm {
            let v_here = lerp_uniform(0.0, dr, &st.v, j as f64 * dy * h_new);
            self.rhs_u
                .push(st.u[j] * (1.0 + dt * m.r * (1.0 - st.u[j] - m.b * v_here)));
        }
        self.rhs_v.clear();
        for k in 0..=kk {
            let r_k = k as f64 * dr;
            let u_here = if r_k >= st.h {
                0.0
            } else {
                lerp_uniform(0.0, dy, &st.u, r_k / st.h)
            };
            self.rhs_v
                .push(st.v[k] * (1.0 + dt * (1.0 - st.v[k] - m.a * u_here)));
        }

        // Invader rows on y-nodes 0..mm-1. The mapped equation is
        //   u_t = (d/h^2) u_yy + [d(N-1)/(y h^2) + y h'/h] u_y + reaction,
        // with the full N-dimensional Laplacian at the symmetric center.
        let diff_u = m.d / (h_new * h_new);
        self.lower.clear();
        self.diag.clear();
        self.upper.clear();
        self.lower.push(0.0);
        self.diag.push(1.0 + 2.0 * dt * n_dim * diff_u / (dy * dy));
        self.upper.push(-2.0 * dt * n_dim * diff_u / (dy * dy));
        for j in 1..mm {
            let y = j as f64 * dy;
            let c = m.d * (n_dim - 1.0) / (y * h_new * h_new) + y * dhdt / h_new;
            push_advection_row(
                &mut self.lower,
                &mut self.diag,
                &mut self.upper,
                diff_u,
                c,
                dy,
                dt,
            );
        }
        self.upper[mm - 1] = 0.0;
        self.ws
            .solve(&self.lower, &self.diag, &self.upper, &mut self.rhs_u)?;
        st.u[..mm].copy_from_slice(&self.rhs_u);
        st.u[mm] = 0.0;

        // Resident rows on r-nodes 0..kk: symmetric center, Neumann outer
        // edge via the ghost-node reflection.
        self.lower.clear();
        self.diag.clear();
        self.upper.clear();
        self.lower.push(0.0);
        self.diag.push(1.0 + 2.0 * dt * n_dim / (dr * dr));
        self.upper.push(-2.0 * dt * n_dim / (dr * dr));
        for k in 1..kk {
            let c = (n_dim - 1.0) / (k as f64 * dr);
            push_advection_row(
                &mut self.lower,
                &mut self.diag,
                &mut self.upper,
                1.0,
                c,
                dr,
                dt,
            );
        }
        self.lower.push(-2.0 * dt / (dr * dr));
        self.diag.push(1.0 + 2.0 * dt / (dr * dr));
        self.upper.push(0.0);
        self.ws
            .solve(&self.lower, &self.diag, &self.upper, &mut self.rhs_v)?;
        st.v.copy_from_slice(&self.rhs_v);

        st.t += dt;
        st.h = h_new;
        st.dhdt = dhdt;

        let fold = |xs: &[f64]| {
            xs.iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
                    (lo.min(x), hi.max(x))
                })
        };
        let (min_u, max_u) = fold(&st.u);
        let (min_v, max_v) = fold(&st.v);
        for (what, value, bound) in [("u", max_u, self.bound_u), ("v", max_v, self.bound_v)] {
            if !value.is_finite() || value > 1.1 * bound {
                return Err(FbError::Instability {
                    what: if what == "u" { "invader field" } else { "resident field" },
                    value,
                    t: st.t,
                });
            }
        }
        Ok(StepStats {
            dhdt,
            min_u,
            max_u,
            min_v,
            max_v,
        })
    }
}

/// Appends one interior advection-diffusion row: centered differences when
/// the cell Peclet number `c dx / (2 diff)` stays at or below one, upwind
/// (the drift `+c u_x` carries information from the right) otherwise, so
/// the implicit matrix is always an M-matrix.
fn push_advection_row(
    lower: &mut Vec<f64>,
    diag: &mut Vec<f64>,
    upper: &mut Vec<f64>,
    diff: f64,
    c: f64,
    dx: f64,
    dt: f64,
) {
    debug_assert!(c >= 0.0);
    let dx2 = dx * dx;
    if c * dx <= 2.0 * diff {
        lower.push(dt * (-diff / dx2 + c / (2.0 * dx)));
        diag.push(1.0 + 2.0 * dt * diff / dx2);
        upper.push(dt * (-diff / dx2 - c / (2.0 * dx)));
    } else {
        lower.push(-dt * diff / dx2);
        diag.push(1.0 + dt * (2.0 * diff / dx2 + c / dx));
        upper.push(-dt * (diff / dx2 + c / dx));
    }
}

/// One step from `state`, returning the new state. The invariant bounds
/// are inferred from the current fields; batch runs should reuse a
/// [`Stepper`] (or call [`simulate`]), which pins the bounds to the
/// initial data and reuses scratch storage.
pub fn step(
    state: &FreeBoundaryState,
    m: &ModelParams,
    dt: f64,
) -> Result<FreeBoundaryState, FbError> {
    let max0 = |xs: &[f64]| xs.iter().fold(0.0_f64, |a, &b| a.max(b));
    let mut stepper = Stepper::from_bounds(max0(&state.u).max(1.0), max0(&state.v).max(1.0), m);
    let mut next = state.clone();
    stepper.advance(&mut next, m, dt)?;
    Ok(next)
}

/// Fields mapped to the common radial grid at one instant.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub t: f64,
    pub h: f64,
    pub dr: f64,
    /// Invader interpolated onto the radial grid, zero beyond the front.
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

impl Snapshot {
    fn new(st: &FreeBoundaryState) -> Self {
        let kk = st.v.len() - 1;
        let u = (0..=kk).map(|k| st.u_at(k as f64 * st.dr)).collect();
        Self {
            t: st.t,
            h: st.h,
            dr: st.dr,
            u,
            v: st.v.clone(),
        }
    }
}

/// Extremes observed over a whole run; the scheme keeps both fields inside
/// `[0, bound]` up to rounding, so these are the evidence.
#[derive(Debug, Clone, Copy)]
pub struct Diagnostics {
    pub steps: u64,
    pub min_u: f64,
    pub max_u: f64,
    pub min_v: f64,
    pub max_v: f64,
    pub bound_u: f64,
    pub bound_v: f64,
}

/// Sampled front history plus snapshots.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub h: Vec<f64>,
    pub dhdt: Vec<f64>,
    pub snapshots: Vec<Snapshot>,
    pub diagnostics: Diagnostics,
    pub h0: f64,
    pub t_end: f64,
}

/// Knobs of a full run.
#[derive(Debug, Clone)]
pub struct SimOptions {
    pub t_end: f64,
    pub dt: f64,
    /// Cadence of the front-history samples.
    pub sample_dt: f64,
    /// Instants at which full field snapshots are recorded (the final state
    /// is always included).
    pub snapshot_times: Vec<f64>,
    /// Extra headroom demanded beyond the farthest the front can travel.
    pub margin: f64,
    /// Skips the domain-size refusal (the exhaustion guard still applies).
    pub allow_small_domain: bool,
    pub validation: Validation,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            t_end: 100.0,
            dt: 0.01,
            sample_dt: 0.5,
            snapshot_times: Vec::new(),
            margin: 20.0,
            allow_small_domain: false,
            validation: Validation::Standard,
        }
    }
}

/// Radius the resident grid must reach for a run to `t_end`: the front
/// starts at `h0` and moves no faster than the free-space invasion speed
/// `2 sqrt(r d)`.
pub fn required_r_max(m: &ModelParams, h0: f64, t_end: f64, margin: f64) -> f64 {
    h0 + 2.0 * (m.r * m.d).sqrt() * t_end + margin
}

/// Runs the free-boundary problem to `t_end`, returning the sampled
/// trajectory and the final state.
pub fn simulate(
    init: &InitialData,
    m: &ModelParams,
    opts: &SimOptions,
) -> Result<(Trajectory, FreeBoundaryState), FbError> {
    m.validate()
        .map_err(|e| FbError::InitialData(e.to_string()))?;
    init.validate(opts.validation)?;
    if !(opts.t_end > 0.0) || !(opts.dt > 0.0) {
        return Err(FbError::InitialData(format!(
            "t_end and dt must be positive, got {} and {}",
            opts.t_end, opts.dt
        )));
    }
    let r_max = init.r_max();
    let required = required_r_max(m, init.h0, opts.t_end, opts.margin);
    // Half a cell of slack: the estimate already carries a safety margin and
    // the realized radius is the requested one snapped to the grid.
    if !opts.allow_small_domain && r_max + 0.5 * init.dr < required {
        return Err(FbError::DomainTooSmall { r_max, required });
    }
    if init.h0 >= 0.9 * r_max {
        return Err(FbError::InitialData(format!(
            "h0 = {} already exhausts the domain (0.9 r_max = {})",
            init.h0,
            0.9 * r_max
        )));
    }

    let mut stepper = Stepper::new(init, m);
    let n_steps = (opts.t_end / opts.dt).round().max(1.0) as u64;
    let stride = (opts.sample_dt / opts.dt).round().max(1.0) as u64;

    let mut st = FreeBoundaryState {
        t: 0.0,
        h: init.h0,
        dhdt: 0.0,
        u: init.u0.clone(),
        v: init.v0.clone(),
        dr: init.dr,
    };

    let mut snapshot_times = opts.snapshot_times.clone();
    snapshot_times.sort_by(|a, b| a.partial_cmp(b).expect("snapshot times are finite"));
    let mut next_snapshot = 0;

    let (bound_u, bound_v) = stepper.bounds();
    let mut diag = Diagnostics {
        steps: 0,
        min_u: f64::INFINITY,
        max_u: f64::NEG_INFINITY,
        min_v: f64::INFINITY,
        max_v: f64::NEG_INFINITY,
        bound_u,
        bound_v,
    };
    let mut traj = Trajectory {
        times: vec![0.0],
        h: vec![st.h],
        dhdt: vec![0.0],
        snapshots: Vec::new(),
        diagnostics: diag,
        h0: init.h0,
        t_end: n_steps as f64 * opts.dt,
    };

    for k in 1..=n_steps {
        let stats = stepper.advance(&mut st, m, opts.dt)?;
        diag.steps = k;
        diag.min_u = diag.min_u.min(stats.min_u);
        diag.max_u = diag.max_u.max(stats.max_u);
        diag.min_v = diag.min_v.min(stats.min_v);
        diag.max_v = diag.max_v.max(stats.max_v);

        if st.h > 0.9 * r_max {
            return Err(FbError::DomainExhausted {
                h: st.h,
                limit: 0.9 * r_max,
                t: st.t,
            });
        }
        if k % stride == 0 || k == n_steps {
            traj.times.push(st.t);
            traj.h.push(st.h);
            traj.dhdt.push(st.dhdt);
        }
        while next_snapshot < snapshot_times.len()
            && st.t + 0.5 * opts.dt >= snapshot_times[next_snapshot]
        {
            traj.snapshots.push(Snapshot::new(&st));
            next_snapshot += 1;
        }
    }
    let final_recorded = traj
        .snapshots
        .last()
        .is_some_and(|s| (s.t - st.t).abs() < 0.5 * opts.dt);
    if !final_recorded {
        traj.snapshots.push(Snapshot::new(&st));
    }
    traj.diagnostics = diag;
    Ok((traj, st))
}

/// Long-time verdict of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    /// The invader takes over: the front keeps advancing and the fields
    /// approach `(1, 0)` on compact parts.
    Spreading,
    /// The invader dies out: the front stalls and the invader is uniformly
    /// small.
    Vanishing,
    Undetermined,
}

impl std::fmt::Display for Outcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Outcome::Spreading => "spreading",
            Outcome::Vanishing => "vanishing",
            Outcome::Undetermined => "undetermined",
        })
    }
}

/// Thresholds of the spreading/vanishing dichotomy test.
#[derive(Debug, Clone, Copy)]
pub struct ClassifyThresholds {
    /// Compact-part closeness to the `(1, 0)` state for spreading.
    pub theta: f64,
    /// Uniform invader smallness for vanishing.
    pub theta_u: f64,
    /// Late-time front-speed floor separating advance from stall.
    pub eps_h: f64,
    /// Spreading requires the front to pass this multiple of `h0`.
    pub spread_multiple: f64,
    /// Trailing fraction of the run used for the late-time front speed.
    pub window_fraction: f64,
    /// The compact window is `[0, max(h0, compact_radius)]`, clamped to
    /// half the final front position.
    pub compact_radius: f64,
}

impl Default for ClassifyThresholds {
    fn default() -> Self {
        Self {
            theta: 0.1,
            theta_u: 1e-3,
            eps_h: 1e-4,
            spread_multiple: 3.0,
            window_fraction: 0.25,
            compact_radius: 5.0,
        }
    }
}

/// Late-time front speed: mean slope of `h` over the trailing window.
fn late_front_rate(traj: &Trajectory, window_fraction: f64) -> Option<f64> {
    let t_end = *traj.times.last()?;
    let t_from = t_end * (1.0 - window_fraction);
    let i0 = traj.times.iter().position(|&t| t >= t_from)?;
    let dt = t_end - traj.times[i0];
    if dt <= 0.0 {
        return None;
    }
    Some((traj.h.last()? - traj.h[i0]) / dt)
}

/// Applies the dichotomy test to a finished run.
pub fn classify_outcome(traj: &Trajectory, th: &ClassifyThresholds) -> Outcome {
    let Some(final_snap) = traj.snapshots.last() else {
        return Outcome::Undetermined;
    };
    let Some(rate) = late_front_rate(traj, th.window_fraction) else {
        return Outcome::Undetermined;
    };
    let h_end = *traj.h.last().expect("trajectory has samples");

    let compact = th.compact_radius.max(traj.h0).min(0.5 * h_end);
    let in_window = |k: usize| (k as f64) * final_snap.dr <= compact;
    let mut min_u_compact = f64::INFINITY;
    let mut max_v_compact: f64 = 0.0;
    for k in 0..final_snap.v.len() {
        if in_window(k) {
            min_u_compact = min_u_compact.min(final_snap.u[k]);
            max_v_compact = max_v_compact.max(final_snap.v[k]);
        }
    }
    let max_u_everywhere = final_snap.u.iter().fold(0.0_f64, |a, &b| a.max(b));

    let spreading = h_end >= th.spread_multiple * traj.h0
        && rate >= th.eps_h
        && min_u_compact >= 1.0 - th.theta
        && max_v_compact <= th.theta;
    if spreading {
        return Outcome::Spreading;
    }
    let vanishing = rate < th.eps_h && max_u_everywhere < th.theta_u;
    if vanishing {
        return Outcome::Vanishing;
    }
    Outcome::Undetermined
}

/// Least-squares front speed over the trailing `window_fraction` of the
/// samples, with the slope's standard error.
pub fn measure_speed(traj: &Trajectory, window_fraction: f64) -> Result<LineFit, FbError> {
    let t_end = traj.times.last().copied().unwrap_or(0.0);
    let t_from = t_end * (1.0 - window_fraction);
    let i0 = traj.times.iter().position(|&t| t >= t_from).unwrap_or(0);
    Ok(fit_line(&traj.times[i0..], &traj.h[i0..])?)
}

/// Sup distances between a simulated state and the semi-wave profile
/// aligned at the front (`xi = h - r`).
#[derive(Debug, Clone, Copy)]
pub struct CompareReport {
    /// Sup over `r in [0, h]` of `|u - psi(h - r)|`.
    pub sup_u: f64,
    /// Sup over `r in [0, min(h + pad, r_max)]` of `|v - phi(h - r)|`.
    pub sup_v: f64,
}

/// Measures how closely the state follows the semi-wave moving frame. The
/// profile is extended by its limits beyond the truncated grid: `psi` by
/// its carrying level on the far left of the front and zero ahead of it,
/// `phi` by zero behind and its carrying level ahead.
pub fn compare_with_semiwave(
    state: &FreeBoundaryState,
    prof: &SemiWaveProfile,
    pad: f64,
) -> CompareReport {
    let grid = &prof.grid;
    let cu = prof.offsets.carrying_u();
    let cv = prof.offsets.carrying_v();
    let l_left = grid.l_left();
    let l_right = grid.l_right();
    let h = grid.h_xi();
    let eval = |values: &[f64], left_limit: f64, right_limit: f64, xi: f64| -> f64 {
        if xi <= -l_left {
            left_limit
        } else if xi >= l_right {
            right_limit
        } else {
            lerp_uniform(-l_left, h, values, xi)
        }
    };

    let mut sup_u = 0.0_f64;
    let dy = state.dy();
    for (j, &uj) in state.u.iter().enumerate() {
        let r = j as f64 * dy * state.h;
        let xi = state.h - r;
        sup_u = sup_u.max((uj - eval(&prof.psi, 0.0, cu, xi)).abs());
    }
    let mut sup_v = 0.0_f64;
    let r_stop = (state.h + pad).min(state.r_max());
    for (k, &vk) in state.v.iter().enumerate() {
        let r = k as f64 * state.dr;
        if r > r_stop {
            break;
        }
        let xi = state.h - r;
        sup_v = sup_v.max((vk - eval(&prof.phi, cv, 0.0, xi)).abs());
    }
    CompareReport { sup_u, sup_v }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> ModelParams {
        ModelParams::new(1.0, 1.0, 2.0, 0.5, 1.0, 1).unwrap()
    }

    fn small_init() -> InitialData {
        InitialData::from_fns(
            2.0,
            40,
            30.0,
            0.25,
            1.0,
            |r| 0.8 * (1.0 - (r / 2.0) * (r / 2.0)).max(0.0),
            |_| 1.0,
        )
    }

    #[test]
    fn validation_levels_escalate() {
        let init = small_init();
        init.validate(Validation::Strict).unwrap();

        let mut no_resident = init.clone();
        no_resident.v0.iter_mut().for_each(|v| *v = 0.0);
        assert!(no_resident.validate(Validation::Standard).is_err());
        no_resident.validate(Validation::Permissive).unwrap();

        let mut hot = init.clone();
        hot.u0[0] = 1.5;
        hot.validate(Validation::Standard).unwrap();
        assert!(hot.validate(Validation::Strict).is_err());

        let mut loose_end = init;
        *loose_end.u0.last_mut().unwrap() = 0.2;
        assert!(loose_end.validate(Validation::Permissive).is_err());
    }

    #[test]
    fn step_preserves_bounds_and_grows_front() {
        let m = params();
        let init = small_init();
        let st = FreeBoundaryState {
            t: 0.0,
            h: init.h0,
            dhdt: 0.0,
            u: init.u0.clone(),
            v: init.v0.clone(),
            dr: init.dr,
        };
        let next = step(&st, &m, 0.01).unwrap();
        assert!(next.h > st.h);
        assert!(next.u.iter().all(|&x| (0.0..=1.0 + 1e-9).contains(&x)));
        assert!(next.v.iter().all(|&x| (0.0..=1.0 + 1e-9).contains(&x)));
        assert_eq!(*next.u.last().unwrap(), 0.0);
    }

    #[test]
    fn simulate_refuses_small_domains() {
        let m = params();
        let init = small_init();
        let opts = SimOptions {
            t_end: 100.0,
            ..SimOptions::default()
        };
        match simulate(&init, &m, &opts) {
            Err(FbError::DomainTooSmall { required, .. }) => {
                assert!((required - required_r_max(&m, 2.0, 100.0, 20.0)).abs() < 1e-12);
            }
            other => panic!("expected a domain-size refusal, got {other:?}"),
        }
    }

    #[test]
    fn classify_synthetic_tables() {
        let th = ClassifyThresholds::default();
        let times: Vec<f64> = (0..=100).map(|i| i as f64).collect();
        let spread_h: Vec<f64> = times.iter().map(|t| 5.0 + 2.0 * t).collect();
        let kk = 200;
        let dr = 1.0;
        let spread_snap = Snapshot {
            t: 100.0,
            h: 205.0,
            dr,
            u: vec![0.99; kk + 1],
            v: vec![0.01; kk + 1],
        };
        let diag = Diagnostics {
            steps: 100,
            min_u: 0.0,
            max_u: 1.0,
            min_v: 0.0,
            max_v: 1.0,
            bound_u: 1.0,
            bound_v: 1.0,
        };
        let spread = Trajectory {
            times: times.clone(),
            h: spread_h,
            dhdt: vec![2.0; times.len()],
            snapshots: vec![spread_snap],
            diagnostics: diag,
            h0: 5.0,
            t_end: 100.0,
        };
        assert_eq!(classify_outcome(&spread, &th), Outcome::Spreading);
        let fit = measure_speed(&spread, 0.25).unwrap();
        assert!((fit.slope - 2.0).abs() < 1e-12);
        assert!(fit.slope_stderr < 1e-12);

        let vanish_snap = Snapshot {
            t: 100.0,
            h: 5.5,
            dr,
            u: vec![1e-5; kk + 1],
            v: vec![0.9; kk + 1],
        };
        let vanish = Trajectory {
            times: times.clone(),
            h: vec![5.5; times.len()],
            dhdt: vec![0.0; times.len()],
            snapshots: vec![vanish_snap],
            diagnostics: diag,
            h0: 5.0,
            t_end: 100.0,
        };
        assert_eq!(classify_outcome(&vanish, &th), Outcome::Vanishing);

        let stuck_snap = Snapshot {
            t: 100.0,
            h: 6.0,
            dr,
            u: vec![0.4; kk + 1],
            v: vec![0.5; kk + 1],
        };
        let stuck = Trajectory {
            times: times.clone(),
            h: vec![6.0; times.len()],
            dhdt: vec![0.0; times.len()],
            snapshots: vec![stuck_snap],
            diagnostics: diag,
            h0: 5.0,
            t_end: 100.0,
        };
        assert_eq!(classify_outcome(&stuck, &th), Outcome::Undetermined);
    }
}
