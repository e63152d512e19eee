//! Brute-force verifiers for the closed forms.
//!
//! Every routine here works from the definitions only (the free-energy
//! functional, the dual objective, exact min / max recursions) by exhaustive
//! search over simplex and cost grids. They never call the equilibrium,
//! certainty-equivalent or best-response formulas for their search; those
//! appear only as the reference the reported gap is measured against.
//!
//! Search is deterministic: reductions keep the lowest grid index on ties.

use serde::Serialize;

use crate::adversary::{best_response_costs, dual_objective, indifference_residual, CostVector};
use crate::error::{Error, Result};
use crate::free_energy::{certainty_equivalent, equilibrium, free_energy, DecisionProblem};
use crate::legendre::Grid1D;
use crate::simplex::{grid_size, grid_steps, Compositions, Policy};
use crate::tree_eval::{Aggregator, DecisionTree};

/// Largest simplex grid any oracle will enumerate.
pub const MAX_GRID_POINTS: u64 = 2_000_000;
/// Largest action count for the free-energy grid search.
pub const MAX_FREE_ENERGY_ACTIONS: usize = 4;
/// Largest action count for the minimax searches.
pub const MAX_MINIMAX_ACTIONS: usize = 3;
/// Residual allowed for the indifference check at the closed-form equilibrium.
pub const INDIFFERENCE_TOL: f64 = 1e-10;
/// Relative tolerance of the duality-constant identity.
pub const DUALITY_CONSTANT_RTOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OraclePoint {
    Policy(Policy),
    Costs(CostVector),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleReport {
    pub best_value: f64,
    pub best_point: OraclePoint,
    /// Closed-form value minus oracle value.
    pub gap_to_closed_form: f64,
    pub resolution: f64,
    /// Bound on `|gap_to_closed_form|` implied by the grid resolution.
    pub certificate: f64,
}

impl OracleReport {
    pub fn within_certificate(&self) -> bool {
        self.gap_to_closed_form.abs() <= self.certificate
    }
}

fn check_budget(n: usize, max_actions: usize, steps: u32) -> Result<()> {
    if n > max_actions {
        return Err(Error::BudgetExceeded(format!(
            "{n} actions exceeds the oracle limit of {max_actions}"
        )));
    }
    let size = grid_size(n, steps);
    if size > MAX_GRID_POINTS {
        return Err(Error::BudgetExceeded(format!(
            "{size} grid policies exceeds the limit of {MAX_GRID_POINTS}; use a coarser resolution"
        )));
    }
    Ok(())
}

/// `(max|U| + (1/|β|)(1 + |log min p₀|)) · step`, a conservative Lipschitz
/// bound on how far the grid extremum of `F` sits from the true extremum.
pub fn free_energy_certificate(problem: &DecisionProblem, resolution: f64) -> f64 {
    let max_u = problem
        .utilities()
        .iter()
        .fold(0.0f64, |a, u| a.max(u.abs()));
    let min_p0 = problem
        .prior()
        .weights()
        .iter()
        .copied()
        .filter(|&w| w > 0.0)
        .fold(f64::INFINITY, f64::min);
    let info = if problem.beta() == 0.0 {
        0.0
    } else {
        (1.0 + min_p0.ln().abs()) / problem.beta().abs()
    };
    (max_u + info) * resolution
}

fn composition_policy(counts: &[u32], steps: u32) -> Policy {
    let m = steps as f64;
    Policy::from_raw(counts.iter().map(|&k| k as f64 / m).collect())
}

/// Exhaustive extremum of the free energy over the simplex grid: the maximum
/// for β ≥ 0, the minimum for β < 0.
pub fn grid_max_free_energy(problem: &DecisionProblem, resolution: f64) -> Result<OracleReport> {
    let n = problem.n_actions();
    let steps = grid_steps(resolution)?;
    check_budget(n, MAX_FREE_ENERGY_ACTIONS, steps)?;
    let sign = if problem.beta() < 0.0 { -1.0 } else { 1.0 };

    let mut best: Option<(f64, Vec<u32>)> = None;
    for counts in Compositions::new(n, steps) {
        let p = composition_policy(&counts, steps);
        let value = match free_energy(problem, &p) {
            Ok(v) => v,
            Err(Error::AbsoluteContinuityViolation { .. }) => continue,
            Err(e) => return Err(e),
        };
        if best.as_ref().is_none_or(|(b, _)| sign * value > sign * b) {
            best = Some((value, counts));
        }
    }
    let (best_value, counts) = best.ok_or_else(|| {
        Error::InvalidDistribution(
            "no grid policy is absolutely continuous w.r.t. the prior".into(),
        )
    })?;
    Ok(OracleReport {
        best_value,
        best_point: OraclePoint::Policy(composition_policy(&counts, steps)),
        gap_to_closed_form: certainty_equivalent(problem) - best_value,
        resolution,
        certificate: free_energy_certificate(problem, resolution),
    })
}

fn require_positive_beta(problem: &DecisionProblem) -> Result<f64> {
    let beta = problem.beta();
    if beta > 0.0 {
        Ok(beta)
    } else {
        Err(Error::InvalidBeta {
            beta,
            reason: "the adversarial dual requires beta > 0",
        })
    }
}

/// Minimum of one coordinate of the dual objective over the cost grid:
/// `min_c p(U − c) + p₀ e^{βc}`. Returns the value and the grid minimizer.
fn coordinate_min(
    mass: f64,
    utility: f64,
    prior: f64,
    exp_grid: &[f64],
    grid: &Grid1D,
) -> (f64, f64) {
    let mut best = f64::INFINITY;
    let mut best_c = grid.lo();
    for (c, e) in grid.iter().zip(exp_grid) {
        let v = mass * (utility - c) + prior * e;
        if v < best {
            best = v;
            best_c = c;
        }
    }
    (best, best_c)
}

/// `min_C Σ p (U − C) + Σ p₀ e^{βC}` with each cost restricted to the grid.
/// The objective is separable, so the minimum is taken per coordinate.
pub fn inner_min_dual(
    problem: &DecisionProblem,
    p: &Policy,
    cost_grid: &Grid1D,
) -> Result<(f64, CostVector)> {
    let beta = require_positive_beta(problem)?;
    if p.len() != problem.n_actions() {
        return Err(Error::DimensionMismatch {
            expected: problem.n_actions(),
            found: p.len(),
        });
    }
    let exp_grid: Vec<f64> = cost_grid.iter().map(|c| (beta * c).exp()).collect();
    let mut total = 0.0;
    let mut costs = Vec::with_capacity(p.len());
    for ((&w, &u), &q) in p
        .weights()
        .iter()
        .zip(problem.utilities())
        .zip(problem.prior().weights())
    {
        let (v, c) = coordinate_min(w, u, q, &exp_grid, cost_grid);
        total += v;
        costs.push(c);
    }
    Ok((total, CostVector::new(costs)?))
}

/// `max_p min_C` of the dual objective, with `p` on the simplex grid and
/// every cost coordinate on `cost_grid`. Compared against the prediction
/// `CE + (log β + 1)/β` of the duality-constant identity.
pub fn minimax_grid(
    problem: &DecisionProblem,
    policy_resolution: f64,
    cost_grid: &Grid1D,
) -> Result<OracleReport> {
    let beta = require_positive_beta(problem)?;
    let n = problem.n_actions();
    let steps = grid_steps(policy_resolution)?;
    check_budget(n, MAX_MINIMAX_ACTIONS, steps)?;

    // Coordinate x only sees p(x) = k/steps, so tabulate the inner minima once.
    let exp_grid: Vec<f64> = cost_grid.iter().map(|c| (beta * c).exp()).collect();
    let table: Vec<Vec<f64>> = problem
        .utilities()
        .iter()
        .zip(problem.prior().weights())
        .map(|(&u, &q)| {
            (0..=steps)
                .map(|k| coordinate_min(k as f64 / steps as f64, u, q, &exp_grid, cost_grid).0)
                .collect()
        })
        .collect();

    let mut best: Option<(f64, Vec<u32>)> = None;
    for counts in Compositions::new(n, steps) {
        let value: f64 = counts
            .iter()
            .enumerate()
            .map(|(x, &k)| table[x][k as usize])
            .sum();
        if best.as_ref().is_none_or(|(b, _)| value > *b) {
            best = Some((value, counts));
        }
    }
    let (best_value, counts) = best.expect("grid is nonempty");
    let predicted = certainty_equivalent(problem) + (beta.ln() + 1.0) / beta;
    Ok(OracleReport {
        best_value,
        best_point: OraclePoint::Policy(composition_policy(&counts, steps)),
        gap_to_closed_form: predicted - best_value,
        resolution: policy_resolution,
        certificate: free_energy_certificate(problem, policy_resolution) + cost_grid.step(),
    })
}

/// Both orders of the dual game on the same grids.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExchangeCheck {
    pub max_min: f64,
    pub min_max: f64,
    /// `|min_max − max_min|`.
    pub gap: f64,
    /// `10 × (policy step + cost step)`.
    pub certificate: f64,
    pub min_max_costs: CostVector,
}

impl ExchangeCheck {
    pub fn passed(&self) -> bool {
        self.gap <= self.certificate
    }
}

/// Grid `min_C max_p` of the dual objective.
///
/// For fixed `C` the objective is linear in `p`, so the inner maximum is
/// `max_x (U − C)(x)`. Call that level `t`; at an optimum every cost can be
/// lowered to the smallest grid value with `U − C ≤ t` without raising the
/// level, which only reduces the penalty. The search therefore runs over the
/// finitely many levels `U(x) − c` for grid costs `c`.
fn grid_min_max(problem: &DecisionProblem, beta: f64, cost_grid: &Grid1D) -> (f64, Vec<f64>) {
    let u = problem.utilities();
    let p0 = problem.prior().weights();
    let h = cost_grid.step();
    let last = cost_grid.len() - 1;
    let mut best = f64::INFINITY;
    let mut best_costs = vec![cost_grid.lo(); u.len()];
    let mut costs = vec![0.0; u.len()];
    for &ux in u {
        for c in cost_grid.iter() {
            let level = ux - c;
            for (y, &uy) in u.iter().enumerate() {
                let idx = ((uy - level - cost_grid.lo()) / h - 1e-9).ceil();
                costs[y] = cost_grid.point(idx.clamp(0.0, last as f64) as usize);
            }
            let top = u
                .iter()
                .zip(&costs)
                .map(|(u, c)| u - c)
                .fold(f64::NEG_INFINITY, f64::max);
            let penalty: f64 = p0
                .iter()
                .zip(&costs)
                .map(|(q, c)| q * (beta * c).exp())
                .sum();
            let value = top + penalty;
            if value < best {
                best = value;
                best_costs.copy_from_slice(&costs);
            }
        }
    }
    (best, best_costs)
}

/// Measures the duality gap `|min-max − max-min|` of the dual game on grids.
pub fn saddle_exchange_check(
    problem: &DecisionProblem,
    policy_resolution: f64,
    cost_grid: &Grid1D,
) -> Result<ExchangeCheck> {
    let beta = require_positive_beta(problem)?;
    let max_min = minimax_grid(problem, policy_resolution, cost_grid)?.best_value;
    let (min_max, costs) = grid_min_max(problem, beta, cost_grid);
    Ok(ExchangeCheck {
        max_min,
        min_max,
        gap: (min_max - max_min).abs(),
        certificate: 10.0 * (policy_resolution + cost_grid.step()),
        min_max_costs: CostVector::new(costs)?,
    })
}

/// Exact recursion for trees whose β are all `0` or extreme proxies:
/// max, prior expectation or min over each node's prior support.
/// Nodes with any other β fall back to the certainty-equivalent.
pub fn exact_tree_value(tree: &DecisionTree) -> f64 {
    match tree {
        DecisionTree::Leaf(u) => *u,
        DecisionTree::Node {
            prior,
            beta,
            children,
        } => {
            let values: Vec<f64> = children.iter().map(exact_tree_value).collect();
            let supported = values.iter().zip(prior.weights()).filter(|(_, &w)| w > 0.0);
            match Aggregator::from_beta(*beta) {
                Some(Aggregator::Max) => {
                    supported.map(|(&v, _)| v).fold(f64::NEG_INFINITY, f64::max)
                }
                Some(Aggregator::Min) => supported.map(|(&v, _)| v).fold(f64::INFINITY, f64::min),
                Some(Aggregator::Expectation) => supported.map(|(&v, &w)| v * w).sum(),
                None => {
                    crate::free_energy::certainty_equivalent_raw(&values, prior.weights(), *beta)
                }
            }
        }
    }
}

/// Knobs for [`verify`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyOptions {
    pub resolution: f64,
    pub cost_grid: Grid1D,
    /// Added to every closed-form reference value before comparison. Zero in
    /// normal use; nonzero values exist to exercise the failure path.
    pub closed_form_offset: f64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            resolution: 0.01,
            cost_grid: Grid1D::cost_default(),
            closed_form_offset: 0.0,
        }
    }
}

impl VerifyOptions {
    /// Options at `resolution` with a cost grid sized by [`cost_grid_for`].
    pub fn for_problem(problem: &DecisionProblem, resolution: f64) -> Self {
        Self {
            resolution,
            cost_grid: cost_grid_for(problem, resolution),
            closed_form_offset: 0.0,
        }
    }
}

/// Largest cost grid [`cost_grid_for`] will build.
pub const MAX_COST_POINTS: usize = 200_001;

/// A cost grid containing the default range and every best-response cost
/// `C*(p)` with all grid masses `p(x) ≥ resolution`, with one utile of
/// margin. The step is 0.001 unless that would exceed [`MAX_COST_POINTS`].
pub fn cost_grid_for(problem: &DecisionProblem, resolution: f64) -> Grid1D {
    let default = Grid1D::cost_default();
    let beta = problem.beta();
    if beta.is_nan() || beta <= 0.0 || resolution.is_nan() || resolution <= 0.0 {
        return default;
    }
    let weights = problem
        .prior()
        .weights()
        .iter()
        .copied()
        .filter(|&w| w > 0.0);
    let (q_min, q_max) = weights.fold((f64::INFINITY, 0.0f64), |(a, b), w| (a.min(w), b.max(w)));
    let c_lo = (resolution.min(1.0) / (beta * q_max)).ln() / beta;
    let c_hi = (1.0 / (beta * q_min)).ln() / beta;
    let lo = default.lo().min(c_lo - 1.0);
    let hi = default.hi().max(c_hi + 1.0);
    let step = default.step().max((hi - lo) / (MAX_COST_POINTS - 1) as f64);
    let points = ((hi - lo) / step).ceil() as usize + 1;
    Grid1D::new(lo, lo + step * (points - 1) as f64, points).unwrap_or(default)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckStatus {
    Pass,
    Fail,
    Skip,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub status: CheckStatus,
    pub value: f64,
    pub bound: f64,
    pub detail: String,
}

impl Check {
    fn measured(name: &'static str, value: f64, bound: f64, detail: String) -> Self {
        let status = if value.abs() <= bound {
            CheckStatus::Pass
        } else {
            CheckStatus::Fail
        };
        Self {
            name,
            status,
            value,
            bound,
            detail,
        }
    }

    fn skipped(name: &'static str, why: &str) -> Self {
        Self {
            name,
            status: CheckStatus::Skip,
            value: f64::NAN,
            bound: f64::NAN,
            detail: why.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub free_energy_grid: OracleReport,
    pub minimax_grid: Option<OracleReport>,
    pub saddle_exchange: Option<ExchangeCheck>,
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.status != CheckStatus::Fail)
    }
}

/// Runs every oracle against the closed forms for one problem.
pub fn verify(problem: &DecisionProblem, opts: &VerifyOptions) -> Result<VerifyReport> {
    let offset = opts.closed_form_offset;
    let mut checks = Vec::new();

    let fe = grid_max_free_energy(problem, opts.resolution)?;
    checks.push(Check::measured(
        "free_energy_grid",
        fe.gap_to_closed_form + offset,
        fe.certificate,
        format!("grid extremum {:.9} vs certainty-equivalent", fe.best_value),
    ));

    let beta = problem.beta();
    if beta <= 0.0 {
        for name in [
            "minimax_grid",
            "saddle_exchange",
            "indifference",
            "duality_constant",
        ] {
            checks.push(Check::skipped(name, "adversarial dual needs beta > 0"));
        }
        return Ok(VerifyReport {
            free_energy_grid: fe,
            minimax_grid: None,
            saddle_exchange: None,
            checks,
        });
    }

    let mm = minimax_grid(problem, opts.resolution, &opts.cost_grid)?;
    checks.push(Check::measured(
        "minimax_grid",
        mm.gap_to_closed_form + offset,
        mm.certificate,
        format!(
            "grid max-min {:.9} vs CE + (log beta + 1)/beta",
            mm.best_value
        ),
    ));

    let ex = saddle_exchange_check(problem, opts.resolution, &opts.cost_grid)?;
    checks.push(Check::measured(
        "saddle_exchange",
        ex.gap,
        ex.certificate,
        format!("max-min {:.9}, min-max {:.9}", ex.max_min, ex.min_max),
    ));

    let star = equilibrium(problem);
    if star.has_full_support() {
        let r = indifference_residual(problem, &star)?;
        checks.push(Check::measured(
            "indifference",
            r,
            INDIFFERENCE_TOL,
            "spread of U - C* at the equilibrium".into(),
        ));
    } else {
        checks.push(Check::skipped(
            "indifference",
            "equilibrium lacks full support",
        ));
    }

    let c = best_response_costs(problem, &star)?;
    let lhs = dual_objective(problem, &star, &c)? - free_energy(problem, &star)?;
    let rhs = (beta.ln() + 1.0) / beta + offset;
    checks.push(Check::measured(
        "duality_constant",
        lhs - rhs,
        DUALITY_CONSTANT_RTOL * rhs.abs().max(1.0),
        "dual objective minus free energy vs (log beta + 1)/beta".into(),
    ));

    Ok(VerifyReport {
        free_energy_grid: fe,
        minimax_grid: Some(mm),
        saddle_exchange: Some(ex),
        checks,
    })
}
