//! Stage-II membership equilibrium: synchronous best-response dynamics over
//! the finite population (with an asynchronous fallback on detected cycles)
//! and a reduced one-dimensional fixed-point solver in the sponsor
//! probability `P`.

use std::collections::HashMap;
use std::hash::{Hash, Hasher};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::derived::{expected_requests, sponsor_prob, MarketState, ZipfCatalog};
use crate::error::{Error, Result};
use crate::exec;
use crate::model::{Budgets, ModelParams, Population, UserType};
use crate::payoffs::{best_membership, user_payoff, Membership};

/// Per-user membership labels plus the membership percentages.
#[derive(Debug, Clone, PartialEq)]
pub struct MembershipAssignment {
    labels: Vec<Membership>,
    mu: [f64; 4],
}

impl MembershipAssignment {
    pub fn from_labels(labels: Vec<Membership>) -> Self {
        let mut counts = [0usize; 4];
        for m in &labels {
            counts[m.index()] += 1;
        }
        let total = labels.len().max(1) as f64;
        let mu = [
            counts[0] as f64 / total,
            counts[1] as f64 / total,
            counts[2] as f64 / total,
            counts[3] as f64 / total,
        ];
        Self { labels, mu }
    }

    pub fn uniform(label: Membership, n: usize) -> Self {
        Self::from_labels(vec![label; n])
    }

    /// Uniformly random labels; the canonical "other starting point" for the
    /// uniqueness experiments.
    pub fn random(n: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let labels = (0..n)
            .map(|_| *Membership::ALL.choose(&mut rng).expect("non-empty"))
            .collect();
        Self::from_labels(labels)
    }

    pub fn labels(&self) -> &[Membership] {
        &self.labels
    }

    /// `(mu_N, mu_C, mu_E, mu_H)`.
    pub fn mu(&self) -> [f64; 4] {
        self.mu
    }

    fn content_hash(&self) -> u64 {
        let mut hasher = std::collections::hash_map::DefaultHasher::new();
        self.labels.hash(&mut hasher);
        hasher.finish()
    }
}

/// One row of the dynamics trace: the percentages and market state after a
/// synchronous round.
#[derive(Debug, Clone, Copy)]
pub struct TraceRow {
    pub iter: usize,
    pub mu: [f64; 4],
    pub p: f64,
    pub rho: f64,
    pub n_c: f64,
    pub n_e: f64,
}

#[derive(Debug, Clone)]
pub struct EquilibriumResult {
    pub assignment: MembershipAssignment,
    pub state: MarketState,
    pub trace: Vec<TraceRow>,
    pub iterations: usize,
    pub converged: bool,
    pub cycle_broken: bool,
}

/// Market state induced by an assignment: `rho` from the catalog and
/// `alpha2`, demand aggregates from the membership sets, `P` from `alpha1`.
pub fn market_state(
    population: &Population,
    assignment: &MembershipAssignment,
    budgets: &Budgets,
    params: &ModelParams,
    catalog: &ZipfCatalog,
) -> Result<MarketState> {
    let rho = catalog.cache_hit_prob(budgets.alpha2)?;
    let (n_c, n_e) = expected_requests(population, assignment.labels(), rho)?;
    let p = sponsor_prob(budgets.alpha1, n_c)?;
    Ok(MarketState::from_parts(rho, n_c, n_e, p, params))
}

/// One synchronous round: every user simultaneously switches to their best
/// membership under the state induced by the current assignment.
pub fn best_response_step(
    population: &Population,
    assignment: &MembershipAssignment,
    budgets: &Budgets,
    params: &ModelParams,
    catalog: &ZipfCatalog,
) -> Result<(MembershipAssignment, MarketState)> {
    let state = market_state(population, assignment, budgets, params, catalog)?;
    let labels = exec::map_slice(population.users(), |&user| {
        best_membership(user, &state, params)
    });
    Ok((MembershipAssignment::from_labels(labels), state))
}

/// Iterate synchronous best responses from `init` until the assignment stops
/// changing, up to `max_iters` rounds. A revisited label vector means the
/// synchronous map is cycling; the solver then switches to single-user
/// updates in seeded random order, bounded by `U * max_iters` updates.
/// Non-convergence is reported through the flags, never as an error.
pub fn solve_dynamics(
    population: &Population,
    budgets: &Budgets,
    params: &ModelParams,
    catalog: &ZipfCatalog,
    init: MembershipAssignment,
    max_iters: usize,
) -> Result<EquilibriumResult> {
    if init.labels().len() != population.len() {
        return Err(Error::SizeMismatch {
            assignment: init.labels().len(),
            population: population.len(),
        });
    }
    let mut assignment = init;
    let mut state = market_state(population, &assignment, budgets, params, catalog)?;
    let mut trace = vec![TraceRow {
        iter: 0,
        mu: assignment.mu(),
        p: state.p,
        rho: state.rho,
        n_c: state.n_c,
        n_e: state.n_e,
    }];
    let mut seen: HashMap<u64, usize> = HashMap::new();
    seen.insert(assignment.content_hash(), 0);

    let mut iterations = 0;
    let mut converged = false;
    let mut cycle_detected = false;
    for iter in 1..=max_iters.max(1) {
        let (next, _) = best_response_step(population, &assignment, budgets, params, catalog)?;
        let changed = next.labels() != assignment.labels();
        assignment = next;
        state = market_state(population, &assignment, budgets, params, catalog)?;
        iterations = iter;
        trace.push(TraceRow {
            iter,
            mu: assignment.mu(),
            p: state.p,
            rho: state.rho,
            n_c: state.n_c,
            n_e: state.n_e,
        });
        if !changed {
            converged = true;
            break;
        }
        let hash = assignment.content_hash();
        if seen.insert(hash, iter).is_some() {
            cycle_detected = true;
            break;
        }
    }

    let mut cycle_broken = false;
    if cycle_detected {
        let settled = asynchronous_sweeps(
            population,
            &mut assignment,
            budgets,
            params,
            catalog,
            max_iters,
        )?;
        cycle_broken = true;
        converged = settled;
        state = market_state(population, &assignment, budgets, params, catalog)?;
        trace.push(TraceRow {
            iter: iterations + 1,
            mu: assignment.mu(),
            p: state.p,
            rho: state.rho,
            n_c: state.n_c,
            n_e: state.n_e,
        });
    }

    Ok(EquilibriumResult {
        assignment,
        state,
        trace,
        iterations,
        converged,
        cycle_broken,
    })
}

/// Single-user better-response sweeps in random order, with incremental
/// demand bookkeeping. Returns true if a full sweep produced no change.
fn asynchronous_sweeps(
    population: &Population,
    assignment: &mut MembershipAssignment,
    budgets: &Budgets,
    params: &ModelParams,
    catalog: &ZipfCatalog,
    max_iters: usize,
) -> Result<bool> {
    let rho = catalog.cache_hit_prob(budgets.alpha2)?;
    let mut labels = assignment.labels().to_vec();
    let (mut n_c, mut n_e) = expected_requests(population, &labels, rho)?;
    let mut rng = ChaCha8Rng::seed_from_u64(population.seed().wrapping_add(0x9E37_79B9));
    let mut order: Vec<usize> = (0..population.len()).collect();
    let budget = population.len().saturating_mul(max_iters);
    let mut updates = 0usize;
    loop {
        order.shuffle(&mut rng);
        let mut changed = 0usize;
        for &idx in &order {
            let user = population.users()[idx];
            let p = sponsor_prob(budgets.alpha1, n_c.max(0.0))?;
            let state = MarketState::from_parts(rho, n_c, n_e, p, params);
            let best = best_membership(user, &state, params);
            if best != labels[idx] {
                let (dc_old, de_old) = load_contribution(user, labels[idx], rho);
                let (dc_new, de_new) = load_contribution(user, best, rho);
                n_c += dc_new - dc_old;
                n_e += de_new - de_old;
                labels[idx] = best;
                changed += 1;
            }
            updates += 1;
            if updates >= budget && changed > 0 {
                *assignment = MembershipAssignment::from_labels(labels);
                return Ok(false);
            }
        }
        if changed == 0 {
            *assignment = MembershipAssignment::from_labels(labels);
            return Ok(true);
        }
    }
}

fn load_contribution(user: UserType, m: Membership, rho: f64) -> (f64, f64) {
    let edge = user.r * user.f * rho;
    match m {
        Membership::NoSp => (0.0, 0.0),
        Membership::CellSp => (user.f, 0.0),
        Membership::EdgeSp => (0.0, edge),
        Membership::HybridSp => (user.f - edge, edge),
    }
}

/// Equilibrium found by the reduced solver.
#[derive(Debug, Clone)]
pub struct FixedPointEquilibrium {
    pub p_star: f64,
    pub rho: f64,
    pub mu: [f64; 4],
    pub n_c: f64,
    pub n_e: f64,
    /// Per-user labels when solved over a population; absent in grid mode.
    pub labels: Option<Vec<Membership>>,
}

impl FixedPointEquilibrium {
    pub fn state(&self, params: &ModelParams) -> MarketState {
        MarketState::from_parts(self.rho, self.n_c, self.n_e, self.p_star, params)
    }
}

/// Solve the equilibrium as a fixed point of `P = min(alpha1 / N_C(P), 1)`.
///
/// `rho` is pinned by `alpha2`, so the whole coupling reduces to the scalar
/// `P`. `N_C(P)` classifies either the given population or a
/// `grid_resolution`-squared midpoint grid of the uniform type square.
/// Bisection works because `N_C` is non-decreasing in `P`: the residual
/// `P - min(alpha1/N_C(P), 1)` is negative at 0 and non-negative at 1.
pub fn solve_fixedpoint(
    budgets: &Budgets,
    params: &ModelParams,
    catalog: &ZipfCatalog,
    population: Option<&Population>,
    grid_resolution: usize,
) -> Result<FixedPointEquilibrium> {
    let rho = catalog.cache_hit_prob(budgets.alpha2)?;

    let evaluate = |p: f64| -> (Vec<Membership>, [f64; 4], f64, f64) {
        let state = MarketState::from_parts(rho, 0.0, 0.0, p, params);
        match population {
            Some(pop) => {
                let labels = exec::map_slice(pop.users(), |&user| {
                    best_membership(user, &state, params)
                });
                let (n_c, n_e) =
                    expected_requests(pop, &labels, rho).expect("labels built from population");
                let mu = MembershipAssignment::from_labels(labels.clone()).mu();
                (labels, mu, n_c, n_e)
            }
            None => {
                let g = grid_resolution.max(100);
                let cell = 1.0 / g as f64;
                let rows = exec::map_range(g, |i| {
                    let f = (i as f64 + 0.5) * cell;
                    let mut counts = [0usize; 4];
                    let mut n_c = 0.0;
                    let mut n_e = 0.0;
                    for j in 0..g {
                        let r = (j as f64 + 0.5) * cell;
                        let user = UserType { f, r };
                        let m = best_membership(user, &state, params);
                        counts[m.index()] += 1;
                        let (dc, de) = load_contribution(user, m, rho);
                        n_c += dc;
                        n_e += de;
                    }
                    (counts, n_c, n_e)
                });
                let mut counts = [0usize; 4];
                let mut n_c = 0.0;
                let mut n_e = 0.0;
                for (c, dc, de) in rows {
                    for k in 0..4 {
                        counts[k] += c[k];
                    }
                    n_c += dc;
                    n_e += de;
                }
                let cells = (g * g) as f64;
                let scale = params.num_users as f64 / cells;
                let mu = [
                    counts[0] as f64 / cells,
                    counts[1] as f64 / cells,
                    counts[2] as f64 / cells,
                    counts[3] as f64 / cells,
                ];
                (Vec::new(), mu, n_c * scale, n_e * scale)
            }
        }
    };

    // With no cellular budget the only consistent outcome is P = 0: the
    // zero-demand convention P(0) = 1 would otherwise leave the residual
    // without a root (it jumps from negative straight to positive where the
    // first user joins).
    if budgets.alpha1 == 0.0 {
        let (labels, mu, n_c, n_e) = evaluate(0.0);
        return Ok(FixedPointEquilibrium {
            p_star: 0.0,
            rho,
            mu,
            n_c,
            n_e,
            labels: population.map(|_| labels),
        });
    }

    let implied = |n_c: f64| sponsor_prob(budgets.alpha1, n_c).expect("non-negative demand");

    let mut lo = 0.0f64;
    let mut hi = 1.0f64;
    // Residual is <= 0 at P=0; if it is already >= 0 at P=1 the clamp binds.
    let (_, _, n_c_hi, _) = evaluate(1.0);
    if 1.0 <= implied(n_c_hi) {
        let (labels, mu, n_c, n_e) = evaluate(1.0);
        return Ok(FixedPointEquilibrium {
            p_star: 1.0,
            rho,
            mu,
            n_c,
            n_e,
            labels: population.map(|_| labels),
        });
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        let (_, _, n_c, _) = evaluate(mid);
        if mid > implied(n_c) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let p_star = 0.5 * (lo + hi);
    let (labels, mu, n_c, n_e) = evaluate(p_star);
    Ok(FixedPointEquilibrium {
        p_star,
        rho,
        mu,
        n_c,
        n_e,
        labels: population.map(|_| labels),
    })
}

/// One user whose membership is more than epsilon below their best option.
#[derive(Debug, Clone, Copy)]
pub struct Violation {
    pub user: usize,
    pub current: Membership,
    pub current_payoff: f64,
    pub best: Membership,
    pub best_payoff: f64,
}

#[derive(Debug, Clone)]
pub struct VerificationReport {
    pub state: MarketState,
    pub violations: Vec<Violation>,
}

impl VerificationReport {
    pub fn is_equilibrium(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Check the fixed-point property: under the state induced by `assignment`,
/// list every user who could gain more than `epsilon` by switching.
pub fn verify_equilibrium(
    population: &Population,
    assignment: &MembershipAssignment,
    budgets: &Budgets,
    params: &ModelParams,
    catalog: &ZipfCatalog,
    epsilon: f64,
) -> Result<VerificationReport> {
    if assignment.labels().len() != population.len() {
        return Err(Error::SizeMismatch {
            assignment: assignment.labels().len(),
            population: population.len(),
        });
    }
    let state = market_state(population, assignment, budgets, params, catalog)?;
    let checks = exec::map_range(population.len(), |idx| {
        let user = population.users()[idx];
        let current = assignment.labels()[idx];
        let current_payoff = user_payoff(user, current, &state, params);
        let mut best = current;
        let mut best_payoff = current_payoff;
        for m in Membership::ALL {
            let value = user_payoff(user, m, &state, params);
            if value > best_payoff {
                best = m;
                best_payoff = value;
            }
        }
        (best_payoff - current_payoff > epsilon).then_some(Violation {
            user: idx,
            current,
            current_payoff,
            best,
            best_payoff,
        })
    });
    Ok(VerificationReport {
        state,
        violations: checks.into_iter().flatten().collect(),
    })
}
