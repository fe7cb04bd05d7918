//! Semi-wave profiles by parabolic relaxation.
//!
//! For a frame speed `s >= 0` the semi-wave pair `(phi, psi)` solves
//!
//! ```text
//! s phi' - phi''   = phi (1 - phi - a psi)      on all xi
//! s psi' - d psi'' = r psi (1 - psi - b phi)    on xi > 0
//! phi(-inf) = 1, phi decreasing, phi(+inf) = 0
//! psi = 0 on xi <= 0, psi increasing, psi(+inf) = 1
//! ```
//!
//! The solver marches the parabolic counterpart to steady state on a
//! truncated grid, seeded with an ordered sub/supersolution pair: the
//! `phi`-field rises and the `psi`-field falls monotonically in relaxation
//! time, sandwiching the profile. A unique profile exists exactly for
//! `s` below the minimal traveling-wave speed `s0`; at and above `s0` the
//! `psi`-field collapses (its interface escapes to the right edge of the
//! grid) and the run reports [`RelaxOutcome::Degenerate`].
//!
//! Carrying levels may be shifted by [`GrowthOffsets`] to produce the
//! perturbed systems used for sandwich arguments; zero offsets give the
//! system above.

use thiserror::Error;

use crate::model::{classify, CompetitionRegime, GrowthOffsets, ModelParams};
use crate::numerics::{fit_log_slope, NumericsError, TridiagonalWorkspace};

/// Errors from grid construction, seed solves, and relaxation runs.
#[derive(Debug, Error)]
pub enum SemiWaveError {
    #[error("invalid grid: {0}")]
    Grid(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("seed Newton iteration stalled after {iters} iterations; residual history {history:?}")]
    NewtonStall { iters: usize, history: Vec<f64> },
    #[error(
        "relaxation hit t_max = {t_max} with residual {residual:.3e} \
         (interface at xi = {interface:.2}, dpsi0 = {dpsi0:.4e})"
    )]
    NonConverged {
        t_max: f64,
        residual: f64,
        interface: f64,
        dpsi0: f64,
    },
    #[error(
        "iterates moved against the expected direction by {magnitude:.3e} \
         (allowed {tol:.3e}) at t = {t:.2}"
    )]
    OrderViolated { t: f64, magnitude: f64, tol: f64 },
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// Uniform grid on `[-L_left, L_right]` with a node exactly at `xi = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct XiGrid {
    n_left: usize,
    n_right: usize,
    h_xi: f64,
}

impl XiGrid {
    /// Builds a grid with spacing `h_xi`; the truncation depths are snapped
    /// to the nearest whole number of cells.
    pub fn new(l_left: f64, l_right: f64, h_xi: f64) -> Result<Self, SemiWaveError> {
        if !(h_xi > 0.0) || !h_xi.is_finite() {
            return Err(SemiWaveError::Grid(format!("spacing must be positive, got {h_xi}")));
        }
        if !(l_left > 0.0) || !(l_right > 0.0) {
            return Err(SemiWaveError::Grid(
                "truncation depths must be positive".to_string(),
            ));
        }
        let n_left = (l_left / h_xi).round() as usize;
        let n_right = (l_right / h_xi).round() as usize;
        if n_left < 8 || n_right < 8 {
            return Err(SemiWaveError::Grid(format!(
                "grid too coarse: {n_left} cells left, {n_right} cells right of the origin"
            )));
        }
        Ok(Self { n_left, n_right, h_xi })
    }

    /// Default production grid: 60 units each side, spacing 0.05.
    pub fn default_semiwave() -> Self {
        Self::new(60.0, 60.0, 0.05).expect("default grid is valid")
    }

    pub fn h_xi(&self) -> f64 {
        self.h_xi
    }

    pub fn l_left(&self) -> f64 {
        self.n_left as f64 * self.h_xi
    }

    pub fn l_right(&self) -> f64 {
        self.n_right as f64 * self.h_xi
    }

    /// Total number of nodes, including both ends and the origin.
    pub fn num_nodes(&self) -> usize {
        self.n_left + self.n_right + 1
    }

    /// Index of the node at `xi = 0`.
    pub fn origin_index(&self) -> usize {
        self.n_left
    }

    pub fn xi(&self, i: usize) -> f64 {
        (i as isize - self.n_left as isize) as f64 * self.h_xi
    }

    pub fn xis(&self) -> Vec<f64> {
        (0..self.num_nodes()).map(|i| self.xi(i)).collect()
    }

    /// Same extents with halved spacing.
    pub fn refined(&self) -> Self {
        Self {
            n_left: self.n_left * 2,
            n_right: self.n_right * 2,
            h_xi: self.h_xi / 2.0,
        }
    }
}

/// Closed-form solution of the scalar seed problem `-g'' = g (1 - g)` on
/// `z <= 0` with `g(0) = 0`, `g(-inf) = 1`: the first integral
/// `(g')^2 = (2/3)(1-g)^2 (g + 1/2)` integrates to
/// `g(z) = (3 w^2 - 1)/2` with `w = tanh(atanh(1/sqrt(3)) - z/2)`.
fn seed_closed_form(z: f64) -> f64 {
    debug_assert!(z <= 0.0);
    let w0 = (1.0 / 3.0_f64.sqrt()).atanh();
    let w = (w0 - z / 2.0).tanh();
    (3.0 * w * w - 1.0) / 2.0
}

/// Ordered seed pair: a subsolution for the `phi`-field and a supersolution
/// for the `psi`-field, stored on all grid nodes (zero off their supports).
#[derive(Debug, Clone)]
pub struct SeedPair {
    /// Decreasing on `xi <= 0`, zero on `xi > 0`; solves the discrete
    /// scalar problem `-phi'' = phi (c_v - phi)` with `phi(0) = 0`.
    pub phi_lower: Vec<f64>,
    /// Increasing on `xi >= 0`, zero on `xi < 0`; solves the discrete
    /// scalar problem `-d psi'' = r psi (c_u - psi)` with `psi(0) = 0`.
    pub psi_upper: Vec<f64>,
}

/// Damped Newton solve of the discrete scalar boundary-value problem
/// `-c2 * D2 x = f(x)` on `count` interior nodes with Dirichlet ends.
///
/// `f(x) = rate * x * (level - x)`; `left`/`right` are the boundary values.
fn newton_logistic_bvp(
    init: &[f64],
    left: f64,
    right: f64,
    c2: f64,
    rate: f64,
    level: f64,
    h: f64,
) -> Result<Vec<f64>, SemiWaveError> {
    let n = init.len();
    let mut x = init.to_vec();
    let inv_h2 = c2 / (h * h);
    let mut ws = TridiagonalWorkspace::new();
    let mut history = Vec::new();

    let residual = |x: &[f64], out: &mut Vec<f64>| {
        out.clear();
        for i in 0..n {
            let xm = if i == 0 { left } else { x[i - 1] };
            let xp = if i + 1 == n { right } else { x[i + 1] };
            let lap = (xm - 2.0 * x[i] + xp) * inv_h2;
            out.push(-lap - rate * x[i] * (level - x[i]));
        }
    };

    let mut f = Vec::with_capacity(n);
    residual(&x, &mut f);
    let mut fnorm = f.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let tol = 1e-12 * (1.0 + level * level * rate);

    for iter in 0..60 {
        if fnorm < tol {
            return Ok(x);
        }
        history.push(fnorm);
        // Tridiagonal Jacobian: -D2 scaled by c2, minus the reaction slope.
        let mut lower = vec![-inv_h2; n];
        let mut upper = vec![-inv_h2; n];
        lower[0] = 0.0;
        upper[n - 1] = 0.0;
        let diag: Vec<f64> = x
            .iter()
            .map(|&xi| 2.0 * inv_h2 - rate * (level - 2.0 * xi))
            .collect();
        let mut delta: Vec<f64> = f.iter().map(|v| -v).collect();
        ws.solve(&lower, &diag, &upper, &mut delta)?;

        let mut lambda = 1.0;
        let mut trial = vec![0.0; n];
        let mut f_trial = Vec::with_capacity(n);
        let mut accepted = false;
        for _ in 0..30 {
            for i in 0..n {
                trial[i] = x[i] + lambda * delta[i];
            }
            residual(&trial, &mut f_trial);
            let fnorm_trial = f_trial.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            if fnorm_trial < (1.0 - 0.25 * lambda) * fnorm || fnorm_trial < tol {
                x.copy_from_slice(&trial);
                f.clone_from(&f_trial);
                fnorm = fnorm_trial;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if !accepted {
            return Err(SemiWaveError::NewtonStall {
                iters: iter + 1,
                history,
            });
        }
    }
    if fnorm < tol {
        Ok(x)
    } else {
        Err(SemiWaveError::NewtonStall { iters: 60, history })
    }
}

/// Computes the seed pair on `grid` for the carrying levels implied by
/// `off`. Each seed is the exact solution of its discrete boundary-value
/// problem, which makes the relaxation iterates monotone step by step.
pub fn build_seeds(
    m: &ModelParams,
    grid: &XiGrid,
    off: GrowthOffsets,
) -> Result<SeedPair, SemiWaveError> {
    m.validate()
        .map_err(|e| SemiWaveError::Precondition(e.to_string()))?;
    off.validate()
        .map_err(|e| SemiWaveError::Precondition(e.to_string()))?;
    let n_nodes = grid.num_nodes();
    let nl = grid.origin_index();
    let h = grid.h_xi();
    let cv = off.carrying_v();
    let cu = off.carrying_u();

    // phi side: interior nodes 1..nl-1 between phi(-L) = cv and phi(0) = 0.
    let init_phi: Vec<f64> = (1..nl)
        .map(|i| cv * seed_closed_form(grid.xi(i) * cv.sqrt()))
        .collect();
    let phi_int = newton_logistic_bvp(&init_phi, cv, 0.0, 1.0, 1.0, cv, h)?;

    // psi side: interior nodes nl+1..n-2 between psi(0) = 0 and psi(L) = cu.
    let kappa = (m.r * cu / m.d).sqrt();
    let init_psi: Vec<f64> = (nl + 1..n_nodes - 1)
        .map(|i| cu * seed_closed_form(-grid.xi(i) * kappa))
        .collect();
    let psi_int = newton_logistic_bvp(&init_psi, 0.0, cu, m.d, m.r, cu, h)?;

    let mut phi_lower = vec![0.0; n_nodes];
    phi_lower[0] = cv;
    phi_lower[1..nl].copy_from_slice(&phi_int);
    let mut psi_upper = vec![0.0; n_nodes];
    psi_upper[nl + 1..n_nodes - 1].copy_from_slice(&psi_int);
    psi_upper[n_nodes - 1] = cu;

    // Monotone up to rounding: where the tail saturates at the carrying
    // level, the Newton polish leaves wiggles of a few ulps, so only genuine
    // reversals are rejected. Shape is cosmetic here; the ordering of the
    // relaxation iterates rests on the seeds solving their discrete
    // boundary-value problems, which Newton guarantees by residual.
    let tie = 1e-10;
    for i in 1..=nl {
        if phi_lower[i] > phi_lower[i - 1] + tie * cv {
            return Err(SemiWaveError::Precondition(format!(
                "seed phi increases at node {i}"
            )));
        }
    }
    for i in nl + 1..n_nodes {
        if psi_upper[i] < psi_upper[i - 1] - tie * cu {
            return Err(SemiWaveError::Precondition(format!(
                "seed psi decreases at node {i}"
            )));
        }
    }
    Ok(SeedPair { phi_lower, psi_upper })
}

/// Knobs of the relaxation march.
#[derive(Debug, Clone, Copy)]
pub struct RelaxOptions {
    /// Steady-state threshold on the max update per unit time.
    pub tol: f64,
    /// Relaxation-time cap before the run reports non-convergence.
    pub t_max: f64,
    /// Requested time step; clamped so the explicit reaction map stays
    /// monotone for the current carrying levels.
    pub dt: f64,
    /// Distance from the right edge past which the `psi`-interface counts
    /// as collapsed.
    pub collapse_buffer: f64,
    /// Slack allowed in the per-step ordering monitor before the run aborts
    /// with [`SemiWaveError::OrderViolated`]. Seed-started runs move one way
    /// up to the seed solve tolerance amplified by the relaxation, so the
    /// default leaves two orders of magnitude of headroom over rounding;
    /// warm starts inherit the finite residual of their starting profile and
    /// need a looser value.
    pub order_tol: f64,
}

impl Default for RelaxOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            t_max: 30_000.0,
            dt: 0.25,
            collapse_buffer: 20.0,
            order_tol: 1e-10,
        }
    }
}

/// Converged semi-wave profile on a truncated grid.
///
/// `phi` and `psi` are stored on all nodes; `psi` is identically zero on
/// `xi <= 0` by construction.
#[derive(Debug, Clone)]
pub struct SemiWaveProfile {
    pub grid: XiGrid,
    pub s: f64,
    pub phi: Vec<f64>,
    pub psi: Vec<f64>,
    /// Second-order one-sided estimate of `psi'(0+)`.
    pub dpsi0: f64,
    /// Final max update per unit time.
    pub residual: f64,
    pub offsets: GrowthOffsets,
    pub stats: RelaxStats,
}

/// Bookkeeping from a relaxation run.
#[derive(Debug, Clone, Copy, Default)]
pub struct RelaxStats {
    pub steps: u64,
    pub t_final: f64,
    /// Worst observed violation of the per-step ordering; stays at rounding
    /// level for seed-started runs.
    pub max_order_violation: f64,
    pub warm_start: bool,
}

/// Evidence of a collapsed run: the steady state is `(c_v, 0)` and the
/// `psi`-interface has escaped toward the right edge, signalling `s >= s0`.
#[derive(Debug, Clone, Copy)]
pub struct DegenerateInfo {
    pub t: f64,
    /// Half-level crossing position of the `psi`-field when the run stopped.
    pub interface: f64,
    pub residual: f64,
}

/// Result of a relaxation run at speed `s`.
#[derive(Debug, Clone)]
pub enum RelaxOutcome {
    Profile(SemiWaveProfile),
    Degenerate(DegenerateInfo),
}

impl RelaxOutcome {
    pub fn profile(self) -> Option<SemiWaveProfile> {
        match self {
            RelaxOutcome::Profile(p) => Some(p),
            RelaxOutcome::Degenerate(_) => None,
        }
    }

    pub fn is_degenerate(&self) -> bool {
        matches!(self, RelaxOutcome::Degenerate(_))
    }
}

/// Which way the iterates are expected to move in relaxation time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum MonitorDirection {
    /// `p` rises, `q` falls (seed-started runs and warm starts from below).
    Ascending,
    /// `p` falls, `q` rises (warm starts from a faster frame).
    Descending,
    /// No ordering expected (full-line runs with unordered seeds).
    Unordered,
}

/// Domain handling for the shared relaxation kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum DomainMode {
    /// `q` pinned to zero at the origin and on the whole left half-line.
    HalfLineCutoff,
    /// `q` free on the interior with Dirichlet data at both ends.
    FullLine,
}

pub(crate) struct RelaxConfig<'a> {
    pub m: &'a ModelParams,
    pub s: f64,
    pub off: GrowthOffsets,
    pub grid: &'a XiGrid,
    pub mode: DomainMode,
    pub p0: Vec<f64>,
    pub q0: Vec<f64>,
    pub monitor: MonitorDirection,
    pub opts: RelaxOptions,
    /// Stop as soon as the `q`-interface passes the collapse threshold.
    /// Sound only for ascending runs, where the interface moves one way.
    pub early_escape: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum RelaxStatus {
    Converged,
    EscapedRight,
    CapReached,
}

pub(crate) struct RawRelax {
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub status: RelaxStatus,
    pub residual: f64,
    pub steps: u64,
    pub t: f64,
    pub max_order_violation: f64,
    /// Half-level crossing of `q`, measured left to right.
    pub xi_half: f64,
}

/// Position where `values` first crosses `level`, scanning rightward from
/// `start`. Returns the right edge if the level is never reached.
pub(crate) fn crossing_position(grid: &XiGrid, values: &[f64], start: usize, level: f64) -> f64 {
    let n = values.len();
    if values[start] >= level {
        return grid.xi(start);
    }
    for i in start + 1..n {
        if values[i] >= level {
            let frac = (level - values[i - 1]) / (values[i] - values[i - 1]);
            return grid.xi(i - 1) + frac * grid.h_xi();
        }
    }
    grid.xi(n - 1)
}

/// Shared semi-implicit relaxation kernel: diffusion and advection implicit
/// (one tridiagonal solve per field per step), reaction explicit. The time
/// step is clamped so both the implicit matrices are M-matrices and the
/// explicit reaction maps preserve the competitive order.
pub(crate) fn run_relaxation(cfg: RelaxConfig<'_>) -> Result<RawRelax, SemiWaveError> {
    let grid = cfg.grid;
    let n = grid.num_nodes();
    let h = grid.h_xi();
    let m = cfg.m;
    let s = cfg.s;
    if !(s >= 0.0) {
        return Err(SemiWaveError::Precondition(format!(
            "frame speed must be nonnegative, got {s}"
        )));
    }
    let cv = cfg.off.carrying_v();
    let cu = cfg.off.carrying_u();

    // Centered advection needs the mesh Peclet number below one for both
    // fields, otherwise the implicit solves lose the comparison principle.
    if s * h / 2.0 > 1.0 || s * h / (2.0 * m.d) > 1.0 {
        return Err(SemiWaveError::Grid(format!(
            "mesh Peclet number exceeds 1 at s = {s}; refine h_xi below {:.4}",
            2.0 * m.d.min(1.0) / s
        )));
    }

    let dt = cfg
        .opts
        .dt
        .min(0.95 / (cv + m.a * cu))
        .min(0.95 / (m.r * (cu + m.b * cv)));
    assert!(dt > 0.0);

    let q_lo = match cfg.mode {
        DomainMode::HalfLineCutoff => grid.origin_index(),
        DomainMode::FullLine => 0,
    };

    let mut p = cfg.p0;
    let mut q = cfg.q0;
    assert_eq!(p.len(), n);
    assert_eq!(q.len(), n);

    // Implicit matrices (constant over the run). Interior p-nodes are
    // 1..n-2; interior q-nodes are q_lo+1..n-2.
    let p_count = n - 2;
    let q_count = n - 2 - q_lo;
    let adv = s / (2.0 * h);
    let build = |diff: f64, count: usize| {
        let lo = -dt * (diff / (h * h) + adv);
        let up = -dt * (diff / (h * h) - adv);
        let dg = 1.0 + dt * 2.0 * diff / (h * h);
        let mut lower = vec![lo; count];
        let mut upper = vec![up; count];
        lower[0] = 0.0;
        upper[count - 1] = 0.0;
        (lower, vec![dg; count], upper, lo, up)
    };
    let (p_lower, p_diag, p_upper, p_lo_coef, p_up_coef) = build(1.0, p_count);
    let (q_lower, q_diag, q_upper, q_lo_coef, q_up_coef) = build(m.d, q_count);

    // Dirichlet data lives in the boundary entries of the seed vectors and
    // never changes over the run.
    let p_left = p[0];
    let p_right = p[n - 1];
    let q_left = q[q_lo];
    let q_right = q[n - 1];

    let mut ws = TridiagonalWorkspace::new();
    let mut rp = vec![0.0; p_count];
    let mut rq = vec![0.0; q_count];

    let level = cu / 2.0;
    let threshold = grid.l_right() - cfg.opts.collapse_buffer;
    let mut max_violation = 0.0_f64;
    let mut steps: u64 = 0;
    let mut t = 0.0;

    loop {
        // Explicit reaction, with Dirichlet contributions folded into the
        // right-hand side ends.
        for i in 1..n - 1 {
            rp[i - 1] = p[i] + dt * p[i] * (cv - p[i] - m.a * q[i]);
        }
        rp[0] -= p_lo_coef * p_left;
        rp[p_count - 1] -= p_up_coef * p_right;
        for i in q_lo + 1..n - 1 {
            rq[i - q_lo - 1] = q[i] + dt * m.r * q[i] * (cu - q[i] - m.b * p[i]);
        }
        rq[0] -= q_lo_coef * q_left;
        rq[q_count - 1] -= q_up_coef * q_right;

        ws.solve(&p_lower, &p_diag, &p_upper, &mut rp)?;
        ws.solve(&q_lower, &q_diag, &q_upper, &mut rq)?;

        let mut max_update = 0.0_f64;
        for i in 1..n - 1 {
            let new = rp[i - 1];
            let delta = new - p[i];
            max_update = max_update.max(delta.abs());
            match cfg.monitor {
                MonitorDirection::Ascending => max_violation = max_violation.max(-delta),
                MonitorDirection::Descending => max_violation = max_violation.max(delta),
                MonitorDirection::Unordered => {}
            }
            p[i] = new;
        }
        for i in q_lo + 1..n - 1 {
            let new = rq[i - q_lo - 1];
            let delta = new - q[i];
            max_update = max_update.max(delta.abs());
            match cfg.monitor {
                MonitorDirection::Ascending => max_violation = max_violation.max(delta),
                MonitorDirection::Descending => max_violation = max_violation.max(-delta),
                MonitorDirection::Unordered => {}
            }
            q[i] = new;
        }

        steps += 1;
        t += dt;
        let residual = max_update / dt;

        let check_now = steps.is_multiple_of(16) || residual < cfg.opts.tol || t >= cfg.opts.t_max;
        if check_now {
            if max_violation > cfg.opts.order_tol {
                return Err(SemiWaveError::OrderViolated {
                    t,
                    magnitude: max_violation,
                    tol: cfg.opts.order_tol,
                });
            }
            let xi_half = crossing_position(grid, &q, q_lo, level);
            if cfg.early_escape && xi_half > threshold {
                return Ok(RawRelax {
                    p,
                    q,
                    status: RelaxStatus::EscapedRight,
                    residual,
                    steps,
                    t,
                    max_order_violation: max_violation,
                    xi_half,
                });
            }
            if residual < cfg.opts.tol {
                return Ok(RawRelax {
                    p,
                    q,
                    status: RelaxStatus::Converged,
                    residual,
                    steps,
                    t,
                    max_order_violation: max_violation,
                    xi_half,
                });
            }
            if t >= cfg.opts.t_max {
                return Ok(RawRelax {
                    p,
                    q,
                    status: RelaxStatus::CapReached,
                    residual,
                    steps,
                    t,
                    max_order_violation: max_violation,
                    xi_half,
                });
            }
        }
    }
}

/// One-sided second-order estimate of `psi'(0+)`.
fn dpsi0_of(grid: &XiGrid, psi: &[f64]) -> f64 {
    let nl = grid.origin_index();
    (-3.0 * psi[nl] + 4.0 * psi[nl + 1] - psi[nl + 2]) / (2.0 * grid.h_xi())
}

fn require_superior(m: &ModelParams) -> Result<(), SemiWaveError> {
    if classify(m) != CompetitionRegime::SuperiorU {
        return Err(SemiWaveError::Precondition(format!(
            "semi-wave computation needs the superior-invader regime a > 1 > b, got a = {}, b = {}",
            m.a, m.b
        )));
    }
    Ok(())
}

fn finish_semiwave(
    raw: RawRelax,
    s: f64,
    off: GrowthOffsets,
    grid: &XiGrid,
    opts: &RelaxOptions,
    warm: bool,
) -> Result<RelaxOutcome, SemiWaveError> {
    let threshold = grid.l_right() - opts.collapse_buffer;
    match raw.status {
        RelaxStatus::EscapedRight => Ok(RelaxOutcome::Degenerate(DegenerateInfo {
            t: raw.t,
            interface: raw.xi_half,
            residual: raw.residual,
        })),
        RelaxStatus::Converged => {
            if raw.xi_half > threshold {
                return Ok(RelaxOutcome::Degenerate(DegenerateInfo {
                    t: raw.t,
                    interface: raw.xi_half,
                    residual: raw.residual,
                }));
            }
            let dpsi0 = dpsi0_of(grid, &raw.q);
            Ok(RelaxOutcome::Profile(SemiWaveProfile {
                grid: *grid,
                s,
                phi: raw.p,
                psi: raw.q,
                dpsi0,
                residual: raw.residual,
                offsets: off,
                stats: RelaxStats {
                    steps: raw.steps,
                    t_final: raw.t,
                    max_order_violation: raw.max_order_violation,
                    warm_start: warm,
                },
            }))
        }
        RelaxStatus::CapReached => Err(SemiWaveError::NonConverged {
            t_max: opts.t_max,
            residual: raw.residual,
            interface: raw.xi_half,
            dpsi0: dpsi0_of(grid, &raw.q),
        }),
    }
}

/// Relaxes the semi-wave system at speed `s` from fresh seeds.
pub fn relax_semiwave(
    m: &ModelParams,
    s: f64,
    off: GrowthOffsets,
    grid: &XiGrid,
    opts: &RelaxOptions,
) -> Result<RelaxOutcome, SemiWaveError> {
    require_superior(m)?;
    let seeds = build_seeds(m, grid, off)?;
    let raw = run_relaxation(RelaxConfig {
        m,
        s,
        off,
        grid,
        mode: DomainMode::HalfLineCutoff,
        p0: seeds.phi_lower,
        q0: seeds.psi_upper,
        monitor: MonitorDirection::Ascending,
        opts: *opts,
        early_escape: true,
    })?;
    finish_semiwave(raw, s, off, grid, opts, false)
}

/// Relaxes at speed `s` starting from a profile converged at a nearby speed.
///
/// A profile from a slower frame is a valid sub/supersolution pair for the
/// faster frame (and vice versa), so the iterates stay monotone; the
/// ordering monitor direction follows the sign of `s - start.s`.
pub fn relax_semiwave_warm(
    m: &ModelParams,
    s: f64,
    off: GrowthOffsets,
    grid: &XiGrid,
    opts: &RelaxOptions,
    start: &SemiWaveProfile,
) -> Result<RelaxOutcome, SemiWaveError> {
    require_superior(m)?;
    if start.grid != *grid {
        return Err(SemiWaveError::Precondition(
            "warm start requires the same grid".to_string(),
        ));
    }
    if start.offsets != off {
        return Err(SemiWaveError::Precondition(
            "warm start requires the same growth offsets".to_string(),
        ));
    }
    let ascending = s >= start.s;
    let raw = run_relaxation(RelaxConfig {
        m,
        s,
        off,
        grid,
        mode: DomainMode::HalfLineCutoff,
        p0: start.phi.clone(),
        q0: start.psi.clone(),
        monitor: if ascending {
            MonitorDirection::Ascending
        } else {
            MonitorDirection::Descending
        },
        opts: *opts,
        early_escape: ascending,
    })?;
    finish_semiwave(raw, s, off, grid, opts, true)
}

/// Closed-form decay rates of the profile tails.
///
/// `gamma1 < 0 < gamma2` govern `phi` at `+inf` (linearization around the
/// invaded state, requires `a > 1` for the sign split); `lambda1 < 0 <
/// lambda2` come from the invader's linearization with zero growth; the
/// `beta` pair governs the leading edge and exists when
/// `s^2 >= 4 r d (1 - b)`.
#[derive(Debug, Clone, Copy)]
pub struct TailExponents {
    pub s: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    /// `(beta1, beta2)` with `beta1 >= beta2 > 0`, or `None` when the
    /// discriminant `s^2 - 4 r d (1 - b)` is negative.
    pub beta: Option<(f64, f64)>,
    d: f64,
    r: f64,
}

impl TailExponents {
    /// The quadratic `g(y) = -d y^2 + s y + r` from the leading-edge
    /// expansion, evaluated on demand.
    pub fn g(&self, y: f64) -> f64 {
        -self.d * y * y + self.s * y + self.r
    }
}

/// Evaluates all closed-form tail exponents at speed `s`.
pub fn tail_exponents(m: &ModelParams, s: f64) -> TailExponents {
    let disc_gamma = (s * s + 4.0 * (m.a - 1.0)).sqrt();
    let disc_lambda = (s * s + 4.0 * m.r * m.d).sqrt();
    let beta_disc = s * s - 4.0 * m.r * m.d * (1.0 - m.b);
    let beta = if beta_disc >= 0.0 {
        let root = beta_disc.sqrt();
        Some(((s + root) / (2.0 * m.d), (s - root) / (2.0 * m.d)))
    } else {
        None
    };
    TailExponents {
        s,
        gamma1: (s - disc_gamma) / 2.0,
        gamma2: (s + disc_gamma) / 2.0,
        lambda1: (s - disc_lambda) / (2.0 * m.d),
        lambda2: (s + disc_lambda) / (2.0 * m.d),
        beta,
        d: m.d,
        r: m.r,
    }
}

/// Measured-versus-expected tail decay rate.
#[derive(Debug, Clone, Copy)]
pub struct TailFit {
    pub measured: f64,
    pub expected: f64,
}

impl TailFit {
    pub fn relative_error(&self) -> f64 {
        (self.measured - self.expected).abs() / self.expected.abs()
    }
}

/// Post-hoc quality report for a converged profile.
#[derive(Debug, Clone)]
pub struct ValidationReport {
    /// Max pointwise residual of the `phi` steady equation under centered
    /// differences.
    pub max_residual_phi: f64,
    /// Same for the `psi` equation on `xi > 0`.
    pub max_residual_psi: f64,
    /// Nodes where `phi` increases or `psi` decreases beyond rounding.
    pub monotonicity_violations: usize,
    /// Log-slope fit of the `phi` tail on the right against `gamma1`.
    pub phi_tail: Option<TailFit>,
    /// Log-slope fit of `c_u - psi` against `max(gamma1, lambda1)`.
    pub psi_tail: Option<TailFit>,
}

/// Validates a converged profile: steady-equation residuals, monotonicity,
/// and tail decay rates against their closed-form values.
pub fn validate_profile(prof: &SemiWaveProfile, m: &ModelParams) -> ValidationReport {
    let grid = &prof.grid;
    let n = grid.num_nodes();
    let nl = grid.origin_index();
    let h = grid.h_xi();
    let s = prof.s;
    let cv = prof.offsets.carrying_v();
    let cu = prof.offsets.carrying_u();

    let mut max_residual_phi = 0.0_f64;
    for i in 1..n - 1 {
        let lap = (prof.phi[i - 1] - 2.0 * prof.phi[i] + prof.phi[i + 1]) / (h * h);
        let der = (prof.phi[i + 1] - prof.phi[i - 1]) / (2.0 * h);
        let res = s * der - lap - prof.phi[i] * (cv - prof.phi[i] - m.a * prof.psi[i]);
        max_residual_phi = max_residual_phi.max(res.abs());
    }
    let mut max_residual_psi = 0.0_f64;
    for i in nl + 1..n - 1 {
        let lap = (prof.psi[i - 1] - 2.0 * prof.psi[i] + prof.psi[i + 1]) / (h * h);
        let der = (prof.psi[i + 1] - prof.psi[i - 1]) / (2.0 * h);
        let res =
            s * der - m.d * lap - m.r * prof.psi[i] * (cu - prof.psi[i] - m.b * prof.phi[i]);
        max_residual_psi = max_residual_psi.max(res.abs());
    }

    let tiny = 1e-12;
    let mut monotonicity_violations = 0;
    for i in 1..n {
        if prof.phi[i] > prof.phi[i - 1] + tiny {
            monotonicity_violations += 1;
        }
    }
    for i in nl + 1..n {
        if prof.psi[i] < prof.psi[i - 1] - tiny {
            monotonicity_violations += 1;
        }
    }

    let exps = tail_exponents(m, s);
    let xis = grid.xis();
    // Fit windows sit below 1% of the carrying level and above the level
    // where truncation error from the Dirichlet end pollutes the tail.
    let phi_floor = (50.0 * (exps.gamma1 * grid.l_right()).exp()).max(1e-10);
    let phi_tail = fit_log_slope(&xis[nl..], &prof.phi[nl..], phi_floor, 0.01 * cv, 8).map(|fit| {
        TailFit {
            measured: fit.slope,
            expected: exps.gamma1,
        }
    });
    let psi_rate = exps.gamma1.max(exps.lambda1);
    let gap: Vec<f64> = prof.psi[nl..].iter().map(|v| cu - v).collect();
    let gap_floor = (50.0 * (psi_rate * grid.l_right()).exp()).max(1e-10);
    let psi_tail = fit_log_slope(&xis[nl..], &gap, gap_floor, 0.01 * cu, 8).map(|fit| TailFit {
        measured: fit.slope,
        expected: psi_rate,
    });

    ValidationReport {
        max_residual_phi,
        max_residual_psi,
        monotonicity_violations,
        phi_tail,
        psi_tail,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_places_origin_on_a_node() {
        let grid = XiGrid::new(10.0, 20.0, 0.1).unwrap();
        assert_eq!(grid.num_nodes(), 301);
        assert_eq!(grid.xi(grid.origin_index()), 0.0);
        assert_eq!(grid.xi(0), -10.0);
        assert_eq!(grid.xi(grid.num_nodes() - 1), 20.0);
        let fine = grid.refined();
        assert_eq!(fine.num_nodes(), 601);
        assert!((fine.h_xi() - 0.05).abs() < 1e-15);
    }

    #[test]
    fn closed_form_seed_satisfies_its_ode() {
        // Spot-check -g'' = g(1-g) by finite differences on the formula.
        let h = 1e-4;
        for &z in &[-0.5, -2.0, -6.0] {
            let gm = seed_closed_form(z - h);
            let g0 = seed_closed_form(z);
            let gp = seed_closed_form(z + h);
            let lap = (gm - 2.0 * g0 + gp) / (h * h);
            assert!((-lap - g0 * (1.0 - g0)).abs() < 1e-6, "z = {z}");
        }
        assert!(seed_closed_form(0.0).abs() < 1e-15);
        assert!((seed_closed_form(-40.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn tail_exponent_closed_forms() {
        let m = ModelParams::new(1.0, 1.0, 2.0, 0.5, 1.0, 1).unwrap();
        let e = tail_exponents(&m, 0.0);
        assert!((e.gamma1 + 1.0).abs() < 1e-15);
        assert!((e.gamma2 - 1.0).abs() < 1e-15);
        assert!(e.beta.is_none());

        let m2 = ModelParams::new(1.0, 2.0, 2.0, 0.5, 1.0, 1).unwrap();
        let e2 = tail_exponents(&m2, 3.0);
        assert!((e2.lambda1 - (3.0 - 17.0_f64.sqrt()) / 2.0).abs() < 1e-15);

        // Vanishing discriminant: both betas equal s/(2d). Rounding in
        // s_crit^2 leaves a residual discriminant of order eps, which the
        // square root amplifies to order sqrt(eps).
        let s_crit = 2.0 * (m.r * m.d * (1.0 - m.b)).sqrt();
        let e3 = tail_exponents(&m, s_crit);
        let (b1, b2) = e3.beta.unwrap();
        assert!((b1 - b2).abs() < 1e-7);
        assert!((b1 - s_crit / (2.0 * m.d)).abs() < 1e-7);
        assert!((e3.g(1.0) - (-m.d + s_crit + m.r)).abs() < 1e-15);
    }

    #[test]
    fn crossing_position_interpolates() {
        let grid = XiGrid::new(1.0, 1.0, 0.1).unwrap();
        let mut q = vec![0.0; grid.num_nodes()];
        for (i, v) in q.iter_mut().enumerate() {
            *v = 0.1 * i as f64;
        }
        let pos = crossing_position(&grid, &q, 0, 0.55);
        assert!((pos - (-1.0 + 0.55)).abs() < 1e-12);
    }
}
