//! Acceptance gate: one test per release criterion, each printing a
//! PASS/FAIL line. Tolerances and runtime budgets are pinned in the asserts.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sponsor_market::derived::{sponsor_prob, MarketState, ZipfCatalog};
use sponsor_market::harness::{self, CALIBRATION_TARGET};
use sponsor_market::model::{Budgets, ModelParams, Population, UserType};
use sponsor_market::payoffs::{best_membership, classify_region, user_payoff, Membership};
use sponsor_market::stage1::{compare_schemes, optimize_budgets, SolverChoice};
use sponsor_market::stage2::{
    best_response_step, solve_dynamics, solve_fixedpoint, verify_equilibrium,
    MembershipAssignment,
};

fn defaults() -> (ModelParams, Budgets, ZipfCatalog) {
    let params = ModelParams::default();
    let budgets = Budgets::default_for(&params);
    let catalog = ZipfCatalog::for_params(&params).unwrap();
    (params, budgets, catalog)
}

fn report(criterion: &str, pass: bool, detail: &str) {
    println!(
        "[{}] criterion {criterion}: {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {criterion} failed: {detail}");
}

/// Criterion 1: 20 seeded U=100 populations at default parameters converge
/// and show zero eps=1e-9 deviation violations, in under 10 s.
/// Criterion 2: one extra synchronous round changes zero labels on each run.
#[test]
fn c1_c2_equilibrium_correctness_and_fixed_point() {
    let started = Instant::now();
    let (params, budgets, catalog) = defaults();
    let params = ModelParams {
        num_users: 100,
        ..params
    };
    let catalog2 = catalog; // same parameters apart from U, catalog unaffected
    let mut total_violations = 0usize;
    let mut total_label_changes = 0usize;
    let mut all_converged = true;
    for seed in 0..20u64 {
        let population = Population::sample(&params, 1000 + seed);
        let init = MembershipAssignment::uniform(Membership::NoSp, 100);
        let result =
            solve_dynamics(&population, &budgets, &params, &catalog2, init, 500).unwrap();
        all_converged &= result.converged;
        let verification = verify_equilibrium(
            &population,
            &result.assignment,
            &budgets,
            &params,
            &catalog2,
            1e-9,
        )
        .unwrap();
        total_violations += verification.violations.len();
        let (stepped, _) =
            best_response_step(&population, &result.assignment, &budgets, &params, &catalog2)
                .unwrap();
        total_label_changes += stepped
            .labels()
            .iter()
            .zip(result.assignment.labels())
            .filter(|(a, b)| a != b)
            .count();
    }
    let elapsed = started.elapsed().as_secs_f64();
    report(
        "1 (equilibrium correctness)",
        all_converged && total_violations == 0 && elapsed < 10.0,
        &format!("converged={all_converged} violations={total_violations} elapsed={elapsed:.2}s"),
    );
    report(
        "2 (fixed-point property)",
        total_label_changes == 0,
        &format!("labels changed by extra step: {total_label_changes}"),
    );
}

/// Criterion 3: 10 random initial assignments on one U=10,000 population
/// reach percentages pairwise within 1e-3 per component, in under 30 s.
#[test]
fn c3_empirical_uniqueness() {
    let started = Instant::now();
    let (params, budgets, catalog) = defaults();
    let population = Population::sample(&params, 42);
    let mut mus: Vec<[f64; 4]> = Vec::new();
    for seed in 0..10u64 {
        let init = MembershipAssignment::random(population.len(), 7000 + seed);
        let result = solve_dynamics(&population, &budgets, &params, &catalog, init, 500).unwrap();
        assert!(result.converged, "init seed {seed} did not converge");
        mus.push(result.assignment.mu());
    }
    let mut max_gap = 0.0f64;
    for a in &mus {
        for b in &mus {
            for k in 0..4 {
                max_gap = max_gap.max((a[k] - b[k]).abs());
            }
        }
    }
    let elapsed = started.elapsed().as_secs_f64();
    report(
        "3 (empirical uniqueness)",
        max_gap <= 1e-3 && elapsed < 30.0,
        &format!("max pairwise mu gap={max_gap:.2e} elapsed={elapsed:.2}s"),
    );
}

/// Criterion 4: agent-based and fixed-point equilibria agree within 0.02 per
/// component at default parameters, U=10,000.
#[test]
fn c4_solver_cross_validation() {
    let (params, budgets, catalog) = defaults();
    let population = Population::sample(&params, 42);
    let init = MembershipAssignment::uniform(Membership::NoSp, population.len());
    let agents = solve_dynamics(&population, &budgets, &params, &catalog, init, 500).unwrap();
    assert!(agents.converged);
    let fp = solve_fixedpoint(&budgets, &params, &catalog, Some(&population), 200).unwrap();
    let gap = agents
        .assignment
        .mu()
        .iter()
        .zip(&fp.mu)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    report(
        "4 (solver cross-validation)",
        gap <= 0.02,
        &format!(
            "agents mu={:?} fixed-point mu={:?} max gap={gap:.4}",
            agents.assignment.mu(),
            fp.mu
        ),
    );
}

/// Criterion 5: the hybrid payoff identity holds to 1e-12 on 1e5 random
/// inputs, and the analytic classifier matches the payoff argmax on 1e5
/// random off-boundary inputs.
#[test]
fn c5_payoff_identity_and_classifier() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst_identity = 0.0f64;
    let mut mismatches = 0usize;
    let mut checked = 0usize;
    for _ in 0..100_000 {
        let phi = rng.gen::<f64>() * 0.5;
        let params = ModelParams {
            phi1: phi,
            phi2: phi,
            ..ModelParams::default()
        };
        let state = MarketState::from_parts(rng.gen(), 0.0, 0.0, rng.gen(), &params);
        let user = UserType {
            f: rng.gen(),
            r: rng.gen(),
        };
        let vh = user_payoff(user, Membership::HybridSp, &state, &params);
        let vc = user_payoff(user, Membership::CellSp, &state, &params);
        let ve = user_payoff(user, Membership::EdgeSp, &state, &params);
        worst_identity = worst_identity
            .max((vh - (vc + ve - state.delta1 * state.rho * user.f * user.r)).abs());

        let values = [
            0.0,
            vc,
            ve,
            vh,
        ];
        let mut sorted = values;
        sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
        if sorted[0] - sorted[1] > 1e-9 {
            checked += 1;
            let analytic = classify_region(user, state.delta1, state.delta2, state.rho, phi);
            if analytic != best_membership(user, &state, &params) {
                mismatches += 1;
            }
        }
    }
    report(
        "5 (payoff identity + classifier)",
        worst_identity <= 1e-12 && mismatches == 0,
        &format!(
            "worst identity residual={worst_identity:.2e}, {mismatches} mismatches on {checked} off-boundary samples"
        ),
    );
}

/// Criterion 6: sweeping v over [2,4] gives mu_H non-decreasing and mu_N
/// non-increasing; sweeping c1 over [1,3.5] gives mu_C non-increasing with
/// mu_C = 0 from c1 >= 3.
#[test]
fn c6_sweep_trends() {
    let (params, budgets, catalog) = defaults();
    let population = Population::sample(&params, 42);
    let solve_at = |p: &ModelParams| {
        solve_fixedpoint(&budgets, p, &catalog, Some(&population), 200)
            .unwrap()
            .mu
    };

    let mut v_ok = true;
    let mut prev: Option<[f64; 4]> = None;
    for i in 0..9 {
        let v = 2.0 + 2.0 * i as f64 / 8.0;
        let mu = solve_at(&ModelParams { v, ..params.clone() });
        if let Some(p) = prev {
            v_ok &= mu[3] >= p[3] - 1e-12 && mu[0] <= p[0] + 1e-12;
        }
        prev = Some(mu);
    }
    report(
        "6a (v-sweep trend)",
        v_ok,
        "mu_H non-decreasing, mu_N non-increasing over v in [2,4]",
    );

    let mut c1_ok = true;
    let mut zero_ok = true;
    let mut prev_c: Option<f64> = None;
    for i in 0..11 {
        let c1 = 1.0 + 2.5 * i as f64 / 10.0;
        let mu = solve_at(&ModelParams { c1, ..params.clone() });
        if let Some(p) = prev_c {
            c1_ok &= mu[1] <= p + 1e-12;
        }
        if c1 >= 3.0 {
            zero_ok &= mu[1] == 0.0;
        }
        prev_c = Some(mu[1]);
    }
    report(
        "6b (c1-sweep trend)",
        c1_ok && zero_ok,
        "mu_C non-increasing over c1 in [1,3.5] and exactly 0 for c1 >= 3",
    );
}

/// Criterion 7: default dynamics converge within 50 synchronous rounds, and
/// the gamma calibration reaches the reference equilibrium within 0.08 per
/// component for some swept exponent.
#[test]
fn c7_dynamics_and_calibration() {
    let (params, budgets, catalog) = defaults();
    let population = Population::sample(&params, 42);
    let init = MembershipAssignment::uniform(Membership::NoSp, population.len());
    let result = solve_dynamics(&population, &budgets, &params, &catalog, init, 500).unwrap();
    report(
        "7a (convergence speed)",
        result.converged && result.iterations <= 50,
        &format!("converged in {} iterations", result.iterations),
    );

    let dir = tempfile::tempdir().unwrap();
    let (_, best) = harness::calibrate_gamma(
        &params,
        &budgets,
        &population,
        &[0.6, 0.8, 1.0, 1.2],
        CALIBRATION_TARGET,
        dir.path(),
    )
    .unwrap();
    report(
        "7b (gamma calibration)",
        best.max_abs_err <= 0.08,
        &format!(
            "best gamma={} mu={:?} max component error={:.4} (target {:?})",
            best.gamma, best.mu, best.max_abs_err, CALIBRATION_TARGET
        ),
    );
}

/// Criterion 8: joint sponsoring dominates both pure schemes structurally,
/// strictly at default parameters; the reference gains are reported, not
/// gated.
#[test]
fn c8_scheme_dominance() {
    let (params, _, catalog) = defaults();
    let params = ModelParams {
        num_users: 2000,
        alpha_max: 2000.0,
        ..params
    };
    let population = Population::sample(&params, 42);
    let cmp = compare_schemes(
        &params,
        &catalog,
        &population,
        SolverChoice::FixedPoint,
        25,
    )
    .unwrap();
    let joint = cmp.joint.1.total;
    let cell = cmp.pure_cellular.1.total;
    let edge = cmp.pure_edge.1.total;
    let dominance = joint >= cell - 1e-9 && joint >= edge - 1e-9;
    let strict = joint > cell && joint > edge;
    report(
        "8 (scheme dominance)",
        dominance && strict,
        &format!(
            "joint={joint:.2} pure_cellular={cell:.2} pure_edge={edge:.2} gains: {:?} {:?} (reference: 105% / 85%)",
            cmp.gain_vs_cellular, cmp.gain_vs_edge
        ),
    );
}

/// Criterion 9: on a 50x50 grid at default parameters the grid optimum lies
/// within one grid step of a best-response-curve intersection, in under
/// 5 minutes with the fixed-point inner solver.
#[test]
fn c9_intersection_consistency() {
    let started = Instant::now();
    let (params, _, catalog) = defaults();
    let population = Population::sample(&params, 42);
    let report_opt = optimize_budgets(
        &params,
        &catalog,
        &population,
        SolverChoice::FixedPoint,
        50,
    )
    .unwrap();
    let step1 = report_opt.alpha1_axis[1] - report_opt.alpha1_axis[0];
    let step2 = report_opt.alpha2_axis[1] - report_opt.alpha2_axis[0];
    let (best, _) = &report_opt.best;
    let near = report_opt.intersections.iter().any(|b| {
        (b.alpha1 - best.alpha1).abs() <= step1 + 1e-9 && (b.alpha2 - best.alpha2).abs() <= step2 + 1e-9
    });
    let elapsed = started.elapsed().as_secs_f64();
    report(
        "9 (intersection consistency)",
        near && elapsed < 300.0,
        &format!(
            "optimum=({}, {}), {} intersections, elapsed={elapsed:.1}s",
            best.alpha1,
            best.alpha2,
            report_opt.intersections.len()
        ),
    );
}

/// Criterion 10: derived-quantity sanity. Zipf pmf sums to 1 within 1e-12
/// for S in {1, 10, 1000}; rho hits 0 and 1 at the cache extremes; P clamps
/// to [0,1] on randomized inputs.
#[test]
fn c10_derived_quantities() {
    let mut ok = true;
    for s in [1u64, 10, 1000] {
        let catalog = ZipfCatalog::build(s, 0.8).unwrap();
        let total: f64 = catalog.pmf().iter().sum();
        ok &= (total - 1.0).abs() <= 1e-12;
        ok &= catalog.cache_hit_prob(0.0).unwrap() == 0.0;
        ok &= (catalog.cache_hit_prob(s as f64).unwrap() - 1.0).abs() <= 1e-12;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for _ in 0..10_000 {
        let alpha1 = rng.gen::<f64>() * 1e4;
        let n_c = rng.gen::<f64>() * 1e4;
        let p = sponsor_prob(alpha1, n_c).unwrap();
        ok &= (0.0..=1.0).contains(&p);
    }
    report("10 (derived quantities)", ok, "zipf normalization, rho extremes, P clamp");
}
