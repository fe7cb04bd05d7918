//! Free-boundary solver tests: exact reductions (absent invader, absent
//! resident), first-order front convergence in the time step, the
//! spreading/vanishing classifier on synthetic and simulated runs, scheme
//! invariants, and the moving-frame comparison with the semi-wave profile.

use frontspeed::fbsolver::{
    classify_outcome, compare_with_semiwave, measure_speed, simulate, ClassifyThresholds,
    Diagnostics, FbError, InitialData, Outcome, SimOptions, Snapshot, Trajectory, Validation,
};
use frontspeed::model::ModelParams;
use frontspeed::semiwave::XiGrid;
use frontspeed::speed::SpeedSolver;

fn reference() -> ModelParams {
    ModelParams::new(1.0, 1.0, 2.0, 0.5, 1.0, 1).unwrap()
}

fn bump(amplitude: f64, h0: f64) -> impl Fn(f64) -> f64 {
    move |r: f64| amplitude * (1.0 - (r / h0) * (r / h0)).max(0.0)
}

fn run(
    m: &ModelParams,
    init: &InitialData,
    t_end: f64,
    dt: f64,
    validation: Validation,
) -> (Trajectory, frontspeed::fbsolver::FreeBoundaryState) {
    let opts = SimOptions {
        t_end,
        dt,
        sample_dt: 0.5,
        margin: 5.0,
        validation,
        ..SimOptions::default()
    };
    simulate(init, m, &opts).expect("simulation failed")
}

/// Without an invader the front never moves and the homogeneous resident
/// follows the explicit logistic map exactly, which in turn tracks the
/// continuum logistic at first order in `dt`.
#[test]
fn absent_invader_leaves_logistic_resident() {
    let m = reference();
    let dt = 0.01;
    let t_end = 5.0;
    let v_init = 0.2;
    let init = InitialData::from_fns(2.0, 40, 20.0, 0.25, v_init, |_| 0.0, |_| v_init);
    let (traj, state) = run(&m, &init, t_end, dt, Validation::Permissive);

    assert_eq!(state.h, 2.0, "front moved without an invader");
    assert!(state.u.iter().all(|&x| x == 0.0));

    // Discrete oracle: the same explicit reaction map, computed directly.
    let steps = (t_end / dt).round() as usize;
    let mut w = v_init;
    for _ in 0..steps {
        w *= 1.0 + dt * (1.0 - w);
    }
    let spread = state
        .v
        .iter()
        .fold(0.0f64, |acc, &x| acc.max((x - w).abs()));
    println!("homogeneous resident: map gap = {spread}");
    assert!(spread < 1e-12, "resident drifted from the logistic map");

    // Continuum oracle at first order.
    let exact = 1.0 / (1.0 + (1.0 / v_init - 1.0) * (-t_end).exp());
    let err = (w - exact).abs();
    println!("logistic: discrete = {w} exact = {exact} err = {err}");
    assert!(err < 5.0 * dt * 0.25, "logistic error {err} too large");

    assert_eq!(classify_outcome(&traj, &ClassifyThresholds::default()), Outcome::Vanishing);
}

/// With the resident absent it stays absent, and the invader dynamics is
/// bitwise independent of the competition weight it no longer feels.
#[test]
fn absent_resident_decouples_invader() {
    let weak = ModelParams::new(1.0, 1.0, 2.0, 0.0, 1.0, 1).unwrap();
    let strong = ModelParams::new(1.0, 1.0, 2.0, 0.9, 1.0, 1).unwrap();
    let init = InitialData::from_fns(3.0, 80, 30.0, 0.25, 0.0, bump(0.8, 3.0), |_| 0.0);

    let (ta, sa) = run(&weak, &init, 8.0, 0.01, Validation::Permissive);
    let (tb, sb) = run(&strong, &init, 8.0, 0.01, Validation::Permissive);

    assert!(sa.v.iter().all(|&x| x == 0.0));
    assert_eq!(sa.h, sb.h, "front depends on b without a resident");
    assert_eq!(sa.u, sb.u, "invader depends on b without a resident");
    assert_eq!(ta.h, tb.h);
    // Unopposed invader expands.
    assert!(sa.h > init.h0);
}

/// Halving `dt` halves the front-position error: the explicit front update
/// makes the scheme first order in time.
#[test]
fn front_position_first_order_in_dt() {
    let m = reference();
    let init = InitialData::from_fns(5.0, 200, 45.0, 0.1, 1.0, bump(0.9, 5.0), |_| 1.0);
    let h_at = |dt: f64| {
        let (_, state) = run(&m, &init, 10.0, dt, Validation::Standard);
        state.h
    };
    let h1 = h_at(0.04);
    let h2 = h_at(0.02);
    let h3 = h_at(0.01);
    let ratio = (h1 - h2) / (h2 - h3);
    println!("front dt-refinement: {h1} {h2} {h3} ratio = {ratio}");
    assert!(
        (1.7..2.5).contains(&ratio),
        "expected first-order ratio, got {ratio}"
    );
}

fn synthetic_trajectory(h0: f64, rate: f64, u_level: f64, v_level: f64) -> Trajectory {
    let times: Vec<f64> = (0..=100).map(|i| i as f64).collect();
    let h: Vec<f64> = times.iter().map(|t| h0 + rate * t).collect();
    let dhdt = vec![rate; times.len()];
    let h_end = *h.last().unwrap();
    let dr = 0.5;
    let cells = (2.0 * h_end / dr) as usize;
    let u: Vec<f64> = (0..=cells)
        .map(|k| if (k as f64) * dr <= h_end { u_level } else { 0.0 })
        .collect();
    let v = vec![v_level; cells + 1];
    let snap = Snapshot {
        t: 100.0,
        h: h_end,
        dr,
        u,
        v,
    };
    Trajectory {
        times,
        h,
        dhdt,
        snapshots: vec![snap],
        diagnostics: Diagnostics {
            steps: 100,
            min_u: 0.0,
            max_u: u_level,
            min_v: v_level.min(0.0),
            max_v: v_level,
            bound_u: 1.0,
            bound_v: 1.0,
        },
        h0,
        t_end: 100.0,
    }
}

#[test]
fn classifier_and_speed_fit_on_synthetic_runs() {
    let th = ClassifyThresholds::default();

    let spreading = synthetic_trajectory(2.0, 0.3, 0.95, 0.01);
    assert_eq!(classify_outcome(&spreading, &th), Outcome::Spreading);
    let fit = measure_speed(&spreading, 0.25).unwrap();
    assert!((fit.slope - 0.3).abs() < 1e-12, "slope {}", fit.slope);

    let vanishing = synthetic_trajectory(2.0, 0.0, 5e-4, 1.0);
    assert_eq!(classify_outcome(&vanishing, &th), Outcome::Vanishing);

    // Stalled front with a large invader fits neither verdict.
    let stuck = synthetic_trajectory(2.0, 0.0, 0.5, 0.5);
    assert_eq!(classify_outcome(&stuck, &th), Outcome::Undetermined);

    // A fast front whose compact window still holds resident is undecided.
    let mixed = synthetic_trajectory(2.0, 0.3, 0.95, 0.8);
    assert_eq!(classify_outcome(&mixed, &th), Outcome::Undetermined);
}

/// An inferior invader (weak against the resident, strongly suppressed)
/// dies out: the invader collapses uniformly while the resident recovers
/// to carrying capacity, and the front barely moves.
#[test]
fn inferior_invader_vanishes() {
    let m = ModelParams::new(1.0, 1.0, 0.5, 2.0, 1.0, 1).unwrap();
    let init = InitialData::from_fns(5.0, 200, 90.0, 0.2, 1.0, bump(0.9, 5.0), |_| 1.0);
    let (traj, state) = run(&m, &init, 30.0, 0.01, Validation::Standard);

    let max_u = state.u.iter().fold(0.0f64, |a, &b| a.max(b));
    let min_v_compact = state
        .v
        .iter()
        .take((10.0 / 0.2) as usize)
        .fold(f64::INFINITY, |a, &b| a.min(b));
    println!(
        "inferior invader at t = 30: max u = {max_u} h = {} min v on [0,10] = {min_v_compact}",
        state.h
    );
    assert!(max_u < 0.05, "invader did not collapse: {max_u}");
    assert!(state.h < 7.0, "front ran away: {}", state.h);
    assert!(min_v_compact > 0.8, "resident failed to recover");

    // The front never retreats even while the invader dies.
    for w in traj.h.windows(2) {
        assert!(w[1] >= w[0], "front retreated");
    }
    assert!(traj.dhdt.iter().all(|&x| x >= 0.0));
}

/// Scheme invariants on a genuine spreading run: both fields stay inside
/// `[0, bound]` up to one rounding unit and the front advances monotonely.
#[test]
fn spreading_run_respects_bounds_and_monotone_front() {
    let m = reference();
    let init = InitialData::from_fns(5.0, 200, 65.0, 0.2, 1.0, bump(0.9, 5.0), |_| 1.0);
    let (traj, _) = run(&m, &init, 20.0, 0.01, Validation::Strict);

    let d = &traj.diagnostics;
    println!(
        "diagnostics: u in [{}, {}] v in [{}, {}] bounds ({}, {})",
        d.min_u, d.max_u, d.min_v, d.max_v, d.bound_u, d.bound_v
    );
    assert!(d.min_u >= 0.0);
    assert!(d.min_v >= 0.0);
    let ulp = 1e-15;
    assert!(d.max_u <= d.bound_u * (1.0 + ulp));
    assert!(d.max_v <= d.bound_v * (1.0 + ulp));
    for w in traj.h.windows(2) {
        assert!(w[1] >= w[0], "front retreated");
    }
    assert!(traj.dhdt.iter().all(|&x| x >= 0.0));
    assert!(*traj.h.last().unwrap() > traj.h0);
}

/// Domain sizing is enforced: a grid too small for the horizon is refused
/// up front, and a run that outgrows an undersized grid stops with the
/// exhaustion error rather than polluted data.
#[test]
fn domain_guards_fire() {
    let m = reference();
    let init = InitialData::from_fns(5.0, 100, 30.0, 0.25, 1.0, bump(0.9, 5.0), |_| 1.0);

    let refuse = SimOptions {
        t_end: 100.0,
        ..SimOptions::default()
    };
    match simulate(&init, &m, &refuse) {
        Err(FbError::DomainTooSmall { r_max, required }) => {
            assert!(r_max < required);
        }
        other => panic!("expected DomainTooSmall, got {other:?}"),
    }

    let exhaust = SimOptions {
        t_end: 100.0,
        allow_small_domain: true,
        ..SimOptions::default()
    };
    match simulate(&init, &m, &exhaust) {
        Err(FbError::DomainExhausted { h, limit, .. }) => {
            assert!(h > limit);
        }
        other => panic!("expected DomainExhausted, got {other:?}"),
    }
}

/// The spreading solution follows the semi-wave moving frame: at late
/// times the sup distance between the state and the shifted profile is
/// small and dominated by discretization error, shrinking at second
/// order when the front-fixed grid is refined.
#[test]
fn state_approaches_semiwave_frame() {
    let m = reference();
    let grid = XiGrid::default_semiwave();
    let mut solver = SpeedSolver::new(&m, grid).unwrap();
    let result = solver.solve_s_mu(1.0, 1e-4).unwrap();
    let prof = solver.profile_at(result.s_mu, true).unwrap();

    let sup_at = |t_end: f64, y_cells: usize| {
        let r_max = 5.0 + 2.0 * t_end + 10.0;
        let init = InitialData::from_fns(5.0, y_cells, r_max, 0.1, 1.0, bump(0.9, 5.0), |_| 1.0);
        let (_, state) = run(&m, &init, t_end, 0.01, Validation::Strict);
        compare_with_semiwave(&state, &prof, 20.0)
    };

    let early = sup_at(80.0, 300);
    let late = sup_at(160.0, 300);
    println!(
        "comparison: t = 80 sup_u = {} sup_v = {}; t = 160 sup_u = {} sup_v = {}",
        early.sup_u, early.sup_v, late.sup_u, late.sup_v
    );
    assert!(early.sup_u < 5e-3 && early.sup_v < 5e-3);
    assert!(late.sup_u < 5e-3 && late.sup_v < 5e-3);

    // The front-fixed spacing is dy h(t), so the residual gap at fixed time
    // is resolution, not dynamics: doubling the cell count must shrink it.
    // The shrink factor sits below the second-order 4 because the reference
    // profile contributes its own fixed grid error to the floor.
    let fine = sup_at(160.0, 600);
    println!("refined: sup_u = {} sup_v = {}", fine.sup_u, fine.sup_v);
    let ratio = late.sup_u / fine.sup_u;
    println!("invader gap refinement ratio = {ratio}");
    assert!(ratio > 1.5, "gap did not shrink under refinement: {ratio}");
}
