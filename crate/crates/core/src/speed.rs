//! Minimal wave speed and free-boundary speed selection.
//!
//! Two speeds organize the long-time behavior of the system. Semi-wave
//! profiles exist exactly for frame speeds `s` below the minimal
//! traveling-wave speed `s0`, which is bracketed in closed form by
//! `2 sqrt(r d (1 - b)) <= s0 <= 2 sqrt(r d)`. A free boundary moving by
//! `h'(t) = mu psi'(0)` selects the spreading speed `s_mu`: the unique root
//! of the selection residual
//!
//! ```text
//! eta(s) = mu dpsi0(s) - s
//! ```
//!
//! on `(0, s0)`, where `dpsi0(s)` is the boundary slope of the semi-wave at
//! speed `s`. `eta` is positive at `s = 0`, strictly decreasing, and tends
//! to `-s0` as the profile degenerates, so bisection brackets the root and
//! a guarded false-position pass polishes it until the residual meets the
//! requested bound.
//!
//! [`solve_traveling_wave`] handles the companion full-line problem: for
//! `s >= s0` the relaxation converges to a genuine wave with both fronts in
//! the interior of the grid, while for `s < s0` the fronts drift to the
//! left edge and the run settles into a layered state, reported as
//! [`TravelingWaveOutcome::NoWave`].

use thiserror::Error;

use crate::model::{classify, CompetitionRegime, GrowthOffsets, ModelParams};
use crate::semiwave::{
    crossing_position, relax_semiwave, relax_semiwave_warm, run_relaxation, tail_exponents,
    DomainMode, MonitorDirection, RelaxConfig, RelaxOptions, RelaxOutcome, RelaxStatus,
    SemiWaveError, SemiWaveProfile, XiGrid,
};

/// Errors from speed estimation and wave solves.
#[derive(Debug, Error)]
pub enum SpeedError {
    #[error(transparent)]
    SemiWave(#[from] SemiWaveError),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("internal consistency: {0}")]
    Inconsistent(String),
    #[error(
        "selection-residual polish stalled at s = {best_s} with residual {best_eta:.3e}"
    )]
    PolishStall { best_s: f64, best_eta: f64 },
}

/// Closed-form bracket `(2 sqrt(r d (1-b)), 2 sqrt(r d))` for the minimal
/// wave speed; the sides coincide when `b = 0` (decoupled leading edge).
pub fn s0_bounds(m: &ModelParams) -> (f64, f64) {
    let upper = 2.0 * (m.r * m.d).sqrt();
    let lower = 2.0 * (m.r * m.d * (1.0 - m.b).max(0.0)).sqrt();
    (lower, upper)
}

/// Knobs of the speed solver.
#[derive(Debug, Clone, Copy)]
pub struct SpeedOptions {
    /// Relaxation settings shared by every probe.
    pub relax: RelaxOptions,
    /// Bisection tolerance on the existence threshold `s0`.
    pub tol_s0: f64,
    /// The polish stops once `|eta| < eta_target * max(1, s)` at a fully
    /// converged slope evaluation.
    pub eta_target: f64,
    /// Tighter steady-state tolerance used for polish-stage evaluations, so
    /// slope noise sits well below the residual target.
    pub tight_tol: f64,
    /// Ordering slack granted to warm-started probes, which inherit the
    /// finite residual of their starting profile.
    pub warm_order_tol: f64,
}

impl Default for SpeedOptions {
    fn default() -> Self {
        Self {
            relax: RelaxOptions::default(),
            tol_s0: 1e-3,
            eta_target: 1e-4,
            tight_tol: 1e-11,
            warm_order_tol: 1e-6,
        }
    }
}

/// Result of a speed-selection solve.
#[derive(Debug, Clone)]
pub struct SpeedResult {
    /// Closed-form lower bound for `s0`.
    pub s0_lower: f64,
    /// Closed-form upper bound for `s0`.
    pub s0_upper: f64,
    /// Bisection estimate of `s0` (existence threshold of the profiles).
    pub s0_est: f64,
    /// Selected speed: root of `mu dpsi0(s) - s`.
    pub s_mu: f64,
    pub mu: f64,
    /// Selection residual at `s_mu`.
    pub eta_residual: f64,
    /// Every `(s, eta)` evaluation, sorted by `s` (duplicate speeds keep the
    /// tightest evaluation); `eta` decreases in `s` up to slope noise.
    pub trace: Vec<(f64, f64)>,
    /// Bracket width achieved by the bisection stage.
    pub tol_s: f64,
}

struct CachedProfile {
    prof: SemiWaveProfile,
    tol: f64,
}

enum Probe {
    Exists { dpsi0: f64 },
    Degenerate,
    /// Hit the relaxation-time cap: classified by interface position, with
    /// the current slope as a best estimate.
    Stalled { interface: f64, dpsi0: f64 },
}

/// Shared driver for `s0` estimation and speed selection. Converged
/// profiles are cached and reused as warm starts, which keeps the many
/// probes of a bisection cheap and lets several `mu` values share one `s0`
/// estimate.
pub struct SpeedSolver<'a> {
    m: &'a ModelParams,
    grid: XiGrid,
    opts: SpeedOptions,
    s0_est: Option<f64>,
    cache: Vec<CachedProfile>,
}

impl<'a> SpeedSolver<'a> {
    pub fn new(m: &'a ModelParams, grid: XiGrid) -> Result<Self, SpeedError> {
        Self::with_options(m, grid, SpeedOptions::default())
    }

    pub fn with_options(
        m: &'a ModelParams,
        grid: XiGrid,
        opts: SpeedOptions,
    ) -> Result<Self, SpeedError> {
        m.validate()
            .map_err(|e| SpeedError::Precondition(e.to_string()))?;
        if classify(m) != CompetitionRegime::SuperiorU {
            return Err(SpeedError::Precondition(format!(
                "speed selection needs the superior-invader regime a > 1 > b, got a = {}, b = {}",
                m.a, m.b
            )));
        }
        Ok(Self {
            m,
            grid,
            opts,
            s0_est: None,
            cache: Vec::new(),
        })
    }

    /// Seeds the solver with an `s0` estimate computed elsewhere (same model
    /// and grid), so parallel sweeps do not repeat the existence bisection.
    pub fn with_s0_est(mut self, s0_est: f64) -> Self {
        self.s0_est = Some(s0_est);
        self
    }

    pub fn bounds(&self) -> (f64, f64) {
        s0_bounds(self.m)
    }

    pub fn s0_estimate(&self) -> Option<f64> {
        self.s0_est
    }

    fn collapse_threshold(&self) -> f64 {
        self.grid.l_right() - self.opts.relax.collapse_buffer
    }

    /// Relaxes at speed `s` to tolerance `tol`, warm-starting from the
    /// nearest cached profile.
    fn probe(&mut self, s: f64, tol: f64) -> Result<Probe, SpeedError> {
        if let Some(hit) = self
            .cache
            .iter()
            .find(|c| c.prof.s == s && c.tol <= tol)
        {
            return Ok(Probe::Exists { dpsi0: hit.prof.dpsi0 });
        }
        let warm = self
            .cache
            .iter()
            .min_by(|x, y| {
                (x.prof.s - s)
                    .abs()
                    .partial_cmp(&(y.prof.s - s).abs())
                    .expect("cached speeds are finite")
            })
            .map(|c| c.prof.clone());

        let mut opts = self.opts.relax;
        opts.tol = tol;
        let outcome = match &warm {
            Some(start) => {
                opts.order_tol = opts.order_tol.max(self.opts.warm_order_tol);
                relax_semiwave_warm(self.m, s, GrowthOffsets::ZERO, &self.grid, &opts, start)
            }
            None => relax_semiwave(self.m, s, GrowthOffsets::ZERO, &self.grid, &opts),
        };
        match outcome {
            Ok(RelaxOutcome::Profile(prof)) => {
                let dpsi0 = prof.dpsi0;
                self.cache.retain(|c| c.prof.s != s);
                self.cache.push(CachedProfile { prof, tol });
                Ok(Probe::Exists { dpsi0 })
            }
            Ok(RelaxOutcome::Degenerate(_)) => Ok(Probe::Degenerate),
            Err(SemiWaveError::NonConverged {
                interface, dpsi0, ..
            }) => Ok(Probe::Stalled { interface, dpsi0 }),
            Err(e) => Err(e.into()),
        }
    }

    /// Returns the converged profile at speed `s`, relaxing if needed.
    pub fn profile_at(&mut self, s: f64, tight: bool) -> Result<SemiWaveProfile, SpeedError> {
        let tol = if tight {
            self.opts.tight_tol
        } else {
            self.opts.relax.tol
        };
        match self.probe(s, tol)? {
            Probe::Exists { .. } => Ok(self
                .cache
                .iter()
                .find(|c| c.prof.s == s)
                .expect("probe caches the profile it reports")
                .prof
                .clone()),
            Probe::Degenerate => Err(SpeedError::Precondition(format!(
                "no semi-wave profile exists at s = {s} (collapsed run)"
            ))),
            Probe::Stalled { interface, .. } => Err(SpeedError::SemiWave(
                SemiWaveError::NonConverged {
                    t_max: self.opts.relax.t_max,
                    residual: f64::NAN,
                    interface,
                    dpsi0: f64::NAN,
                },
            )),
        }
    }

    /// Bisection estimate of the existence threshold `s0` inside the
    /// closed-form bracket. A probe that still converges marks the existence
    /// side; a collapsed probe marks the other. Probes that hit the time cap
    /// are classified by how far the interface has traveled, which errs
    /// toward the existence side and keeps the estimate inside the bracket.
    pub fn estimate_s0(&mut self) -> Result<f64, SpeedError> {
        if let Some(v) = self.s0_est {
            return Ok(v);
        }
        let (lo0, hi0) = self.bounds();
        let tol = self.opts.tol_s0;
        let est = if hi0 - lo0 <= tol {
            0.5 * (lo0 + hi0)
        } else {
            let (mut lo, mut hi) = (lo0, hi0);
            while hi - lo > tol {
                let mid = 0.5 * (lo + hi);
                let exists = match self.probe(mid, self.opts.relax.tol)? {
                    Probe::Exists { .. } => true,
                    Probe::Degenerate => false,
                    Probe::Stalled { interface, .. } => interface <= self.collapse_threshold(),
                };
                if exists {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            0.5 * (lo + hi)
        };
        self.s0_est = Some(est);
        Ok(est)
    }

    fn eval_eta(
        &mut self,
        mu: f64,
        s: f64,
        tight: bool,
        trace: &mut Vec<(f64, f64)>,
    ) -> Result<(f64, bool), SpeedError> {
        let tol = if tight {
            self.opts.tight_tol
        } else {
            self.opts.relax.tol
        };
        // A collapsed probe has no boundary slope; its residual is reported
        // as -s, which has the correct sign (the root lies strictly below
        // any collapsed speed) but a synthetic magnitude, so it never counts
        // as a certified evaluation.
        let (eta, certified) = match self.probe(s, tol)? {
            Probe::Exists { dpsi0 } => (mu * dpsi0 - s, true),
            Probe::Degenerate => (-s, false),
            Probe::Stalled { interface, dpsi0 } => {
                if interface > self.collapse_threshold() {
                    (-s, false)
                } else {
                    (mu * dpsi0 - s, false)
                }
            }
        };
        trace.push((s, eta));
        Ok((eta, certified))
    }

    /// Solves the speed-selection problem for boundary coefficient `mu`:
    /// bisection on the sign of `eta` down to bracket width `tol_s`, then
    /// guarded false position until the residual at a fully converged
    /// evaluation drops below `eta_target * max(1, s)`.
    pub fn solve_s_mu(&mut self, mu: f64, tol_s: f64) -> Result<SpeedResult, SpeedError> {
        if !(mu > 0.0) || !mu.is_finite() {
            return Err(SpeedError::Precondition(format!(
                "boundary coefficient must be positive and finite, got {mu}"
            )));
        }
        if !(tol_s > 0.0) {
            return Err(SpeedError::Precondition(format!(
                "bisection tolerance must be positive, got {tol_s}"
            )));
        }
        let s0 = self.estimate_s0()?;
        let (lo0, hi0) = self.bounds();
        let mut trace: Vec<(f64, f64)> = Vec::new();
        let mut best: Option<(f64, f64)> = None;

        let (eta0, cert0) = self.eval_eta(mu, 0.0, false, &mut trace)?;
        if eta0 <= 0.0 {
            return Err(SpeedError::Inconsistent(format!(
                "selection residual at s = 0 must be positive, got {eta0} \
                 (boundary slope is not positive)"
            )));
        }
        if cert0 {
            best = Some((0.0, eta0));
        }

        let (mut lo, mut eta_lo) = (0.0_f64, eta0);
        // The residual tends to -s0 at the existence threshold; the
        // magnitude is refined as soon as a real negative evaluation lands.
        let (mut hi, mut eta_hi) = (s0, -s0);
        while hi - lo > tol_s {
            let mid = 0.5 * (lo + hi);
            let (eta, certified) = self.eval_eta(mu, mid, false, &mut trace)?;
            if certified && best.is_none_or(|(_, b)| eta.abs() < b.abs()) {
                best = Some((mid, eta));
            }
            if eta >= 0.0 {
                lo = mid;
                eta_lo = eta;
            } else {
                hi = mid;
                eta_hi = eta;
            }
        }

        let eta_target = self.opts.eta_target;
        let target = move |s: f64| eta_target * s.abs().max(1.0);
        let mut kept_pos = false;
        let mut kept_neg = false;
        for _ in 0..60 {
            if let Some((bs, be)) = best {
                if be.abs() < target(bs) {
                    return Ok(self.finish(mu, bs, be, s0, lo0, hi0, tol_s, trace));
                }
            }
            if hi - lo < 1e-14 * s0.max(1.0) {
                break;
            }
            let denom = eta_lo - eta_hi;
            let mut cand = if denom > 0.0 {
                (lo * (-eta_hi) + hi * eta_lo) / denom
            } else {
                0.5 * (lo + hi)
            };
            if !(cand > lo && cand < hi) {
                cand = 0.5 * (lo + hi);
            }
            let (eta, certified) = self.eval_eta(mu, cand, true, &mut trace)?;
            if certified && best.is_none_or(|(_, b)| eta.abs() < b.abs()) {
                best = Some((cand, eta));
            }
            if eta >= 0.0 {
                lo = cand;
                eta_lo = eta;
                // Illinois damping: a side retained twice in a row gets its
                // residual halved so the next secant cut crosses over.
                if kept_pos {
                    eta_hi *= 0.5;
                }
                kept_pos = true;
                kept_neg = false;
            } else {
                hi = cand;
                eta_hi = eta;
                if kept_neg {
                    eta_lo *= 0.5;
                }
                kept_neg = true;
                kept_pos = false;
            }
        }

        match best {
            Some((bs, be)) if be.abs() < target(bs) => {
                Ok(self.finish(mu, bs, be, s0, lo0, hi0, tol_s, trace))
            }
            Some((bs, be)) => Err(SpeedError::PolishStall {
                best_s: bs,
                best_eta: be,
            }),
            None => Err(SpeedError::PolishStall {
                best_s: f64::NAN,
                best_eta: f64::INFINITY,
            }),
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn finish(
        &self,
        mu: f64,
        s_mu: f64,
        eta_residual: f64,
        s0_est: f64,
        s0_lower: f64,
        s0_upper: f64,
        tol_s: f64,
        mut trace: Vec<(f64, f64)>,
    ) -> SpeedResult {
        trace.sort_by(|x, y| x.0.partial_cmp(&y.0).expect("speeds are finite"));
        let mut deduped: Vec<(f64, f64)> = Vec::with_capacity(trace.len());
        for pair in trace {
            match deduped.last_mut() {
                // The stable sort keeps evaluation order within one speed;
                // the last (tightest) evaluation wins.
                Some(last) if last.0 == pair.0 => *last = pair,
                _ => deduped.push(pair),
            }
        }
        SpeedResult {
            s0_lower,
            s0_upper,
            s0_est,
            s_mu,
            mu,
            eta_residual,
            trace: deduped,
            tol_s,
        }
    }
}

/// One-call estimate of the existence threshold `s0`.
pub fn estimate_s0(m: &ModelParams, grid: &XiGrid, tol_s0: f64) -> Result<f64, SpeedError> {
    let opts = SpeedOptions {
        tol_s0,
        ..SpeedOptions::default()
    };
    SpeedSolver::with_options(m, *grid, opts)?.estimate_s0()
}

/// One-call speed selection for boundary coefficient `mu`.
pub fn solve_s_mu(
    m: &ModelParams,
    mu: f64,
    grid: &XiGrid,
    tol_s: f64,
) -> Result<SpeedResult, SpeedError> {
    SpeedSolver::new(m, *grid)?.solve_s_mu(mu, tol_s)
}

/// Converged full-line wave at speed `s`.
#[derive(Debug, Clone)]
pub struct TravelingWaveProfile {
    pub grid: XiGrid,
    pub s: f64,
    /// Decreasing connection from `1` to `0`.
    pub phi: Vec<f64>,
    /// Increasing connection from `0` to `1`.
    pub psi: Vec<f64>,
    /// Final max update per unit time.
    pub residual: f64,
    /// Half-level position of the `phi` front.
    pub interface_phi: f64,
    /// Half-level position of the `psi` front.
    pub interface_psi: f64,
}

/// Existence verdict of the full-line wave solve.
#[derive(Debug, Clone)]
pub enum TravelingWaveOutcome {
    Wave(TravelingWaveProfile),
    /// The relaxation settled into a layered state with both fronts pinned
    /// at the left edge: no wave connects the rest states at this speed.
    NoWave,
}

impl TravelingWaveOutcome {
    pub fn wave(self) -> Option<TravelingWaveProfile> {
        match self {
            TravelingWaveOutcome::Wave(w) => Some(w),
            TravelingWaveOutcome::NoWave => None,
        }
    }

    pub fn is_wave(&self) -> bool {
        matches!(self, TravelingWaveOutcome::Wave(_))
    }
}

/// Knobs of the full-line wave solve.
#[derive(Debug, Clone, Copy)]
pub struct TravelingWaveOptions {
    /// Steady-state threshold on the max update per unit time. The anchored
    /// tail pins the translation mode, so this mainly trades run time
    /// against how precisely the front settles.
    pub tol: f64,
    pub t_max: f64,
    pub dt: f64,
    /// A front within this distance of an edge counts as escaped.
    pub edge_buffer: f64,
}

impl Default for TravelingWaveOptions {
    fn default() -> Self {
        Self {
            tol: 1e-5,
            t_max: 3000.0,
            dt: 0.25,
            edge_buffer: 20.0,
        }
    }
}

/// Position where `values` first falls below `level`, scanning rightward.
/// Returns the right edge if the level is never crossed.
fn falling_crossing(grid: &XiGrid, values: &[f64], level: f64) -> f64 {
    let n = values.len();
    if values[0] <= level {
        return grid.xi(0);
    }
    for i in 1..n {
        if values[i] <= level {
            let frac = (values[i - 1] - level) / (values[i - 1] - values[i]);
            return grid.xi(i - 1) + frac * grid.h_xi();
        }
    }
    grid.xi(n - 1)
}

/// Solves the full-line wave problem at speed `s > 0`: both fields free on
/// the interior, seeded with the closed-form tail shapes
/// `min(1, e^(beta2 xi))` and `min(1, e^(gamma1 xi))`.
///
/// Supercritical waves decay at the slow rate `beta2` toward the invaded
/// side, and that tail carries the front: cutting it off with a rest-state
/// boundary lets the front recede at the slower pulled speed. The left
/// Dirichlet value of the invader is therefore anchored at the exact tail
/// amplitude `e(-beta2 L)`, which pins the wave in place. Below the
/// existence threshold there is no real decay rate, the boundary stays at
/// the rest state, and the front piles up against it, which is what the
/// no-wave classification detects.
pub fn solve_traveling_wave(
    m: &ModelParams,
    s: f64,
    grid: &XiGrid,
    opts: &TravelingWaveOptions,
) -> Result<TravelingWaveOutcome, SpeedError> {
    m.validate()
        .map_err(|e| SpeedError::Precondition(e.to_string()))?;
    if classify(m) != CompetitionRegime::SuperiorU {
        return Err(SpeedError::Precondition(format!(
            "wave solve needs the superior-invader regime a > 1 > b, got a = {}, b = {}",
            m.a, m.b
        )));
    }
    if !(s > 0.0) || !s.is_finite() {
        return Err(SpeedError::Precondition(format!(
            "wave speed must be positive and finite, got {s}"
        )));
    }

    let n = grid.num_nodes();
    let exps = tail_exponents(m, s);
    // Below the existence threshold the leading-edge exponents are complex;
    // seed with their real part, the front will drift left regardless.
    let beta2 = exps.beta.map_or(s / (2.0 * m.d), |(_, b2)| b2);
    let mut p0 = vec![0.0; n];
    let mut q0 = vec![0.0; n];
    for i in 0..n {
        let xi = grid.xi(i);
        p0[i] = (exps.gamma1 * xi).exp().min(1.0);
        q0[i] = (beta2 * xi).exp().min(1.0);
    }
    // The kernel folds fixed Dirichlet data into the right-hand sides. The
    // resident holds its rest states, p(-L) = 1 and p(L) = 0; the invader is
    // anchored at its exact tail amplitude on the left (when a real decay
    // rate exists) and at its rest state on the right.
    p0[0] = 1.0;
    p0[n - 1] = 0.0;
    q0[0] = if exps.beta.is_some() {
        (beta2 * grid.xi(0)).exp()
    } else {
        0.0
    };
    q0[n - 1] = 1.0;

    let relax = RelaxOptions {
        tol: opts.tol,
        t_max: opts.t_max,
        dt: opts.dt,
        collapse_buffer: opts.edge_buffer,
        order_tol: f64::INFINITY,
    };
    let raw = run_relaxation(RelaxConfig {
        m,
        s,
        off: GrowthOffsets::ZERO,
        grid,
        mode: DomainMode::FullLine,
        p0,
        q0,
        monitor: MonitorDirection::Unordered,
        opts: relax,
        early_escape: false,
    })?;

    match raw.status {
        RelaxStatus::Converged => {
            let interface_psi = crossing_position(grid, &raw.q, 0, 0.5);
            let interface_phi = falling_crossing(grid, &raw.p, 0.5);
            let interior = |x: f64| {
                x > -grid.l_left() + opts.edge_buffer && x < grid.l_right() - opts.edge_buffer
            };
            if interior(interface_phi) && interior(interface_psi) {
                Ok(TravelingWaveOutcome::Wave(TravelingWaveProfile {
                    grid: *grid,
                    s,
                    phi: raw.p,
                    psi: raw.q,
                    residual: raw.residual,
                    interface_phi,
                    interface_psi,
                }))
            } else {
                Ok(TravelingWaveOutcome::NoWave)
            }
        }
        RelaxStatus::CapReached => Err(SpeedError::SemiWave(SemiWaveError::NonConverged {
            t_max: opts.t_max,
            residual: raw.residual,
            interface: raw.xi_half,
            dpsi0: f64::NAN,
        })),
        RelaxStatus::EscapedRight => unreachable!("early escape is disabled for wave solves"),
    }
}
