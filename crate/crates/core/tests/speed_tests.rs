//! Tests of the existence threshold and speed selection: closed-form bounds,
//! the decoupled case, the selection identity checked by independent
//! re-evaluation, monotonicity in the boundary coefficient, and full-line
//! wave existence on either side of the threshold.

use frontspeed::harness::{self, FP_SMU};
use frontspeed::model::ModelParams;
use frontspeed::semiwave::XiGrid;
use frontspeed::speed::{
    s0_bounds, solve_traveling_wave, SpeedSolver, TravelingWaveOptions,
};

fn reference() -> ModelParams {
    ModelParams::new(1.0, 1.0, 2.0, 0.5, 1.0, 1).unwrap()
}

#[test]
fn threshold_bounds_match_closed_forms() {
    let m = ModelParams::new(2.0, 3.0, 2.0, 0.4, 1.0, 1).unwrap();
    let (lo, hi) = s0_bounds(&m);
    assert!((hi - 2.0 * 6.0f64.sqrt()).abs() < 1e-14);
    assert!((lo - 2.0 * (6.0f64 * 0.6).sqrt()).abs() < 1e-14);

    // The lower bound clamps at zero once b reaches 1.
    let heavy = ModelParams::new(1.0, 1.0, 2.0, 1.5, 1.0, 1).unwrap();
    let (lo2, hi2) = s0_bounds(&heavy);
    assert_eq!(lo2, 0.0);
    assert!((hi2 - 2.0).abs() < 1e-14);
}

/// With `b = 0` the invader sees no competition in its own equation, so the
/// existence threshold collapses onto the classical pulled-front speed
/// `2 sqrt(r d)`.
#[test]
fn decoupled_threshold_hits_pulled_front_speed() {
    let m = ModelParams::new(1.0, 1.0, 2.0, 0.0, 1.0, 1).unwrap();
    let grid = XiGrid::default_semiwave();
    let mut solver = SpeedSolver::new(&m, grid).unwrap();
    let s0 = solver.estimate_s0().unwrap();
    println!("decoupled s0 estimate = {s0}");
    assert!((s0 - 2.0).abs() < 1e-6, "s0 = {s0}");
}

/// The threshold estimate always lands inside the closed-form bracket
/// (widened by the bisection tolerance).
#[test]
fn threshold_estimate_stays_in_bracket() {
    for (d, r, b) in [(1.0, 1.0, 0.5), (0.5, 2.0, 0.25), (2.0, 0.75, 0.6)] {
        let m = ModelParams::new(d, r, 2.5, b, 1.0, 1).unwrap();
        let grid = XiGrid::default_semiwave();
        let mut solver = SpeedSolver::new(&m, grid).unwrap();
        let s0 = solver.estimate_s0().unwrap();
        let (lo, hi) = s0_bounds(&m);
        println!("d={d} r={r} b={b}: bracket [{lo}, {hi}] estimate {s0}");
        assert!(s0 >= lo - 1e-3 && s0 <= hi + 1e-3);
    }
}

/// The selected speed satisfies the boundary identity when the slope is
/// re-evaluated independently on a tightly converged profile.
#[test]
fn selection_identity_holds_at_root() {
    let m = reference();
    let grid = XiGrid::default_semiwave();
    let mut solver = SpeedSolver::new(&m, grid).unwrap();
    let result = solver.solve_s_mu(1.0, 1e-4).unwrap();

    let prof = solver.profile_at(result.s_mu, true).unwrap();
    let eta = 1.0 * prof.dpsi0 - result.s_mu;
    println!(
        "s_mu = {} re-evaluated eta = {eta} reported = {}",
        result.s_mu, result.eta_residual
    );
    assert!(
        eta.abs() < 1e-4 * result.s_mu.abs().max(1.0),
        "identity residual {eta}"
    );
    assert!(result.s_mu > 0.0 && result.s_mu < result.s0_est);

    // Regression pin for the reference configuration.
    let frozen = harness::FrozenStore::embedded();
    let entry = frozen.find(FP_SMU).expect("missing frozen reference");
    assert!(
        (result.s_mu - entry.value).abs() < entry.tolerance,
        "s_mu drifted from frozen value: {} vs {}",
        result.s_mu,
        entry.value
    );
}

/// Faster boundary response (larger `mu`) selects a faster front, and the
/// whole family stays below the existence threshold.
#[test]
fn selected_speed_increases_with_mu() {
    let m = reference();
    let grid = XiGrid::default_semiwave();
    let mut solver = SpeedSolver::new(&m, grid).unwrap();
    let s0 = solver.estimate_s0().unwrap();

    let mut last = 0.0;
    for mu in [0.5, 1.0, 2.0] {
        let result = solver.solve_s_mu(mu, 1e-4).unwrap();
        println!("mu = {mu}: s_mu = {}", result.s_mu);
        assert!(
            result.s_mu > last,
            "s_mu not increasing at mu = {mu}: {} after {last}",
            result.s_mu
        );
        assert!(result.s_mu < s0);
        last = result.s_mu;
    }
}

/// The recorded trace of `(s, eta)` evaluations is decreasing in `s` up to
/// slope noise: the selection function crosses zero only once.
#[test]
fn selection_trace_is_decreasing() {
    let m = reference();
    let grid = XiGrid::default_semiwave();
    let mut solver = SpeedSolver::new(&m, grid).unwrap();
    let result = solver.solve_s_mu(1.0, 1e-4).unwrap();

    assert!(result.trace.len() >= 4);
    let mut worst = 0.0f64;
    for w in result.trace.windows(2) {
        assert!(w[0].0 < w[1].0, "trace not sorted by s");
        worst = worst.max(w[1].1 - w[0].1);
    }
    println!("worst eta increase along trace = {worst}");
    assert!(worst <= 1e-6, "trace increases by {worst}");
}

/// Full-line waves exist exactly for speeds at or above the threshold: the
/// relaxation finds a wave at `s > s0` and collapses to the layered state
/// below it.
#[test]
fn traveling_wave_exists_only_above_threshold() {
    let m = reference();
    let grid = XiGrid::default_semiwave();
    let opts = TravelingWaveOptions::default();

    let above = solve_traveling_wave(&m, 1.8, &grid, &opts).unwrap();
    let wave = above.wave().expect("wave must exist at s = 1.8");
    println!(
        "wave at s = 1.8: interfaces phi = {} psi = {} residual = {}",
        wave.interface_phi, wave.interface_psi, wave.residual
    );
    let n = wave.phi.len();
    assert_eq!(wave.phi[0], 1.0);
    assert_eq!(wave.phi[n - 1], 0.0);
    // The invader's left boundary holds the exact tail amplitude, which is
    // what pins a supercritical wave in the moving frame.
    let beta2 = frontspeed::semiwave::tail_exponents(&m, 1.8).beta.unwrap().1;
    assert_eq!(wave.psi[0], (beta2 * -grid.l_left()).exp());
    assert!(wave.psi[0] > 0.0 && wave.psi[0] < 1e-6);
    assert_eq!(wave.psi[n - 1], 1.0);
    // Fronts are interior and ordered sensibly for an invasion wave.
    assert!(wave.interface_phi.abs() < 40.0);
    assert!(wave.interface_psi.abs() < 40.0);

    let below = solve_traveling_wave(&m, 1.0, &grid, &opts).unwrap();
    assert!(!below.is_wave(), "no full-line wave below the threshold");
}

#[test]
fn solver_rejects_inferior_invader() {
    let m = ModelParams::new(1.0, 1.0, 0.5, 2.0, 1.0, 1).unwrap();
    let grid = XiGrid::default_semiwave();
    assert!(SpeedSolver::new(&m, grid).is_err());
    assert!(solve_traveling_wave(&m, 1.0, &grid, &TravelingWaveOptions::default()).is_err());
}
