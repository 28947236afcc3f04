//! Stage-I analysis: CP revenue at the Stage-II equilibrium, budget grid
//! search, one-dimensional best-response curves and their intersections, and
//! the comparison against pure-cellular and pure-edge sponsoring.

use crate::derived::ZipfCatalog;
use crate::error::Result;
use crate::exec;
use crate::model::{Budgets, ModelParams, Population};
use crate::stage2::{solve_dynamics, solve_fixedpoint, MembershipAssignment};
use crate::payoffs::Membership;

/// Which Stage-II solver backs the revenue evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverChoice {
    Agents,
    FixedPoint,
}

impl std::str::FromStr for SolverChoice {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "agents" => Ok(SolverChoice::Agents),
            "fixedpoint" => Ok(SolverChoice::FixedPoint),
            other => Err(format!("unknown solver '{other}' (expected agents|fixedpoint)")),
        }
    }
}

/// CP revenue split: `u_c = u P N_C - alpha1 h1`, `u_e = u N_E - alpha2 h2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RevenueBreakdown {
    pub u_c: f64,
    pub u_e: f64,
    pub total: f64,
    /// False when the inner agent dynamics hit the iteration budget; the
    /// revenue is still evaluated at the final iterate.
    pub converged: bool,
}

impl RevenueBreakdown {
    fn new(u_c: f64, u_e: f64, converged: bool) -> Self {
        Self {
            u_c,
            u_e,
            total: u_c + u_e,
            converged,
        }
    }
}

/// Solve Stage II at the given budgets and evaluate the CP revenue there.
pub fn cp_revenue(
    budgets: &Budgets,
    params: &ModelParams,
    catalog: &ZipfCatalog,
    population: &Population,
    solver: SolverChoice,
) -> Result<RevenueBreakdown> {
    let (p, n_c, n_e, converged) = match solver {
        SolverChoice::Agents => {
            let init = MembershipAssignment::uniform(Membership::NoSp, population.len());
            let result = solve_dynamics(population, budgets, params, catalog, init, 500)?;
            (
                result.state.p,
                result.state.n_c,
                result.state.n_e,
                result.converged,
            )
        }
        SolverChoice::FixedPoint => {
            let result = solve_fixedpoint(budgets, params, catalog, Some(population), 200)?;
            (result.p_star, result.n_c, result.n_e, true)
        }
    };
    let u_c = params.u * p * n_c - budgets.alpha1 * params.h1;
    let u_e = params.u * n_e - budgets.alpha2 * params.h2;
    Ok(RevenueBreakdown::new(u_c, u_e, converged))
}

/// A sampled one-dimensional best-response curve of the CP: for each value of
/// the fixed budget, the revenue-maximizing value of the free one.
#[derive(Debug, Clone)]
pub struct BestResponseCurve {
    /// Sampled values of the budget held fixed.
    pub fixed_axis: Vec<f64>,
    /// Argmax of the free budget at each fixed value (ties to the smaller).
    pub best: Vec<f64>,
}

/// Which budget is held fixed during a one-dimensional search.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FixedAxis {
    Alpha1,
    Alpha2,
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n <= 1 {
        return vec![lo];
    }
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}

/// Natural scan ranges: `alpha1` saturates at the population size, `alpha2`
/// at the catalog.
fn axis_ranges(params: &ModelParams) -> ((f64, f64), (f64, f64)) {
    let a1 = (params.alpha_min, params.alpha_max);
    let a2 = (
        params.alpha_min.min(params.catalog_size as f64),
        params.alpha_max.min(params.catalog_size as f64),
    );
    (a1, a2)
}

/// Grid-scan the free budget while the other is pinned at `fixed_value`.
pub fn best_budget_1d(
    fixed: FixedAxis,
    fixed_value: f64,
    params: &ModelParams,
    catalog: &ZipfCatalog,
    population: &Population,
    solver: SolverChoice,
    resolution: usize,
) -> Result<(f64, RevenueBreakdown)> {
    let ((a1_lo, a1_hi), (a2_lo, a2_hi)) = axis_ranges(params);
    let free_axis = match fixed {
        FixedAxis::Alpha1 => linspace(a2_lo, a2_hi, resolution),
        FixedAxis::Alpha2 => linspace(a1_lo, a1_hi, resolution),
    };
    let evals = exec::map_slice(&free_axis, |&free| {
        let budgets = match fixed {
            FixedAxis::Alpha1 => Budgets {
                alpha1: fixed_value,
                alpha2: free,
            },
            FixedAxis::Alpha2 => Budgets {
                alpha1: free,
                alpha2: fixed_value,
            },
        };
        cp_revenue(&budgets, params, catalog, population, solver)
    });
    let mut best_idx = 0;
    let mut best_rev: Option<RevenueBreakdown> = None;
    for (idx, eval) in evals.into_iter().enumerate() {
        let rev = eval?;
        match &best_rev {
            Some(current) if rev.total <= current.total => {}
            _ => {
                best_idx = idx;
                best_rev = Some(rev);
            }
        }
    }
    Ok((free_axis[best_idx], best_rev.expect("resolution >= 1")))
}

#[derive(Debug, Clone)]
pub struct OptimizationReport {
    pub best: (Budgets, RevenueBreakdown),
    pub alpha1_axis: Vec<f64>,
    pub alpha2_axis: Vec<f64>,
    /// `grid[i][j]` is the breakdown at `(alpha1_axis[i], alpha2_axis[j])`.
    pub grid: Vec<Vec<RevenueBreakdown>>,
    /// Best `alpha1` per `alpha2` value.
    pub curve_a1: BestResponseCurve,
    /// Best `alpha2` per `alpha1` value.
    pub curve_a2: BestResponseCurve,
    pub intersections: Vec<Budgets>,
}

/// Full grid over the budget box plus both best-response curves and their
/// crossings. The grid is the ground truth; the intersection points are a
/// structural cross-check (the optimum should sit on one).
pub fn optimize_budgets(
    params: &ModelParams,
    catalog: &ZipfCatalog,
    population: &Population,
    solver: SolverChoice,
    grid_resolution: usize,
) -> Result<OptimizationReport> {
    let n = grid_resolution.max(2);
    let ((a1_lo, a1_hi), (a2_lo, a2_hi)) = axis_ranges(params);
    let alpha1_axis = linspace(a1_lo, a1_hi, n);
    let alpha2_axis = linspace(a2_lo, a2_hi, n);

    let flat = exec::map_range(n * n, |idx| {
        let budgets = Budgets {
            alpha1: alpha1_axis[idx / n],
            alpha2: alpha2_axis[idx % n],
        };
        cp_revenue(&budgets, params, catalog, population, solver)
    });
    let mut grid: Vec<Vec<RevenueBreakdown>> = Vec::with_capacity(n);
    let mut flat_iter = flat.into_iter();
    for _ in 0..n {
        let mut row = Vec::with_capacity(n);
        for _ in 0..n {
            row.push(flat_iter.next().expect("n*n cells")?);
        }
        grid.push(row);
    }

    // Argmax over the grid; ties go to smaller budgets via scan order.
    let (mut bi, mut bj) = (0usize, 0usize);
    for i in 0..n {
        for j in 0..n {
            if grid[i][j].total > grid[bi][bj].total {
                bi = i;
                bj = j;
            }
        }
    }

    let curve_a1 = BestResponseCurve {
        fixed_axis: alpha2_axis.clone(),
        best: (0..n)
            .map(|j| {
                let mut best = 0;
                for i in 1..n {
                    if grid[i][j].total > grid[best][j].total {
                        best = i;
                    }
                }
                alpha1_axis[best]
            })
            .collect(),
    };
    let curve_a2 = BestResponseCurve {
        fixed_axis: alpha1_axis.clone(),
        best: (0..n)
            .map(|i| {
                let mut best = 0;
                for j in 1..n {
                    if grid[i][j].total > grid[i][best].total {
                        best = j;
                    }
                }
                alpha2_axis[best]
            })
            .collect(),
    };
    let intersections = find_intersections(&curve_a1, &curve_a2);

    Ok(OptimizationReport {
        best: (
            Budgets {
                alpha1: alpha1_axis[bi],
                alpha2: alpha2_axis[bj],
            },
            grid[bi][bj],
        ),
        alpha1_axis,
        alpha2_axis,
        grid,
        curve_a1,
        curve_a2,
        intersections,
    })
}

fn nearest_index(axis: &[f64], value: f64) -> usize {
    let mut best = 0;
    let mut best_dist = f64::INFINITY;
    for (i, &x) in axis.iter().enumerate() {
        let d = (x - value).abs();
        if d < best_dist {
            best = i;
            best_dist = d;
        }
    }
    best
}

/// Crossings of the two best-response curves, found as sign changes of the
/// composed map `alpha1 -> curve_a1(curve_a2(alpha1)) - alpha1`.
pub fn find_intersections(
    curve_a1: &BestResponseCurve,
    curve_a2: &BestResponseCurve,
) -> Vec<Budgets> {
    let n = curve_a2.fixed_axis.len();
    if n == 0 || curve_a1.fixed_axis.is_empty() {
        return Vec::new();
    }
    let gamma: Vec<f64> = (0..n)
        .map(|i| {
            let a2 = curve_a2.best[i];
            let j = nearest_index(&curve_a1.fixed_axis, a2);
            curve_a1.best[j] - curve_a2.fixed_axis[i]
        })
        .collect();
    let mut out = Vec::new();
    let mut push = |i: usize| {
        let b = Budgets {
            alpha1: curve_a2.fixed_axis[i],
            alpha2: curve_a2.best[i],
        };
        if !out.contains(&b) {
            out.push(b);
        }
    };
    for i in 0..n {
        if gamma[i] == 0.0 {
            push(i);
        } else if i + 1 < n && (gamma[i] > 0.0) != (gamma[i + 1] > 0.0) {
            // Keep the side closer to the crossing.
            if gamma[i].abs() <= gamma[i + 1].abs() {
                push(i);
            } else {
                push(i + 1);
            }
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct SchemeComparison {
    pub joint: (Budgets, RevenueBreakdown),
    pub pure_cellular: (Budgets, RevenueBreakdown),
    pub pure_edge: (Budgets, RevenueBreakdown),
    /// `joint/pure - 1`; undefined when the pure optimum is not positive.
    pub gain_vs_cellular: Option<f64>,
    pub gain_vs_edge: Option<f64>,
}

/// Joint optimization versus the two single-scheme restrictions
/// (`alpha2 = 0` and `alpha1 = 0`).
pub fn compare_schemes(
    params: &ModelParams,
    catalog: &ZipfCatalog,
    population: &Population,
    solver: SolverChoice,
    resolution: usize,
) -> Result<SchemeComparison> {
    let report = optimize_budgets(params, catalog, population, solver, resolution)?;
    let (a1_cell, rev_cell) = best_budget_1d(
        FixedAxis::Alpha2,
        0.0,
        params,
        catalog,
        population,
        solver,
        resolution,
    )?;
    let (a2_edge, rev_edge) = best_budget_1d(
        FixedAxis::Alpha1,
        0.0,
        params,
        catalog,
        population,
        solver,
        resolution,
    )?;
    let gain = |joint: f64, pure: f64| (pure > 0.0).then(|| joint / pure - 1.0);
    let joint_total = report.best.1.total;
    Ok(SchemeComparison {
        joint: report.best,
        pure_cellular: (
            Budgets {
                alpha1: a1_cell,
                alpha2: 0.0,
            },
            rev_cell,
        ),
        pure_edge: (
            Budgets {
                alpha1: 0.0,
                alpha2: a2_edge,
            },
            rev_edge,
        ),
        gain_vs_cellular: gain(joint_total, rev_cell.total),
        gain_vs_edge: gain(joint_total, rev_edge.total),
    })
}
