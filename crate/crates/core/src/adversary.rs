//! The adversarial dual of free-energy maximization.
//!
//! Maximizing `Σ p U − (1/β) KL(p ‖ p₀)` over policies is the same problem as
//!
//! ```text
//! max_p min_C  Σ_x p(x) [U(x) − C(x)]  +  Σ_x p₀(x) e^{β C(x)}
//! ```
//!
//! where an imaginary adversary subtracts costs `C` from the agent's utilities
//! and pays an exponential penalty for doing so. For a fixed policy the
//! adversary's best response is `C*(x) = (1/β) log(p(x) / (β p₀(x)))`, and at
//! the saddle point the net utilities `U − C*` are constant across actions.
//!
//! Other regularizers give other adversaries; see [`RegularizerSpec`].

use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::de::{self, SeqAccess, Visitor};
use serde::ser::SerializeSeq;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::expected_utility::argmax_policy;
use crate::free_energy::DecisionProblem;
use crate::legendre::holder_conjugate;
use crate::simplex::{log_sum_exp, Policy, Prior};

/// Adversary costs per action. `−∞` is allowed (no cost pressure can be
/// placed on an action the agent never plays); `+∞` and NaN are not.
///
/// Serializes as a JSON array whose `−∞` entries are the string `"-inf"`.
#[derive(Debug, Clone, PartialEq)]
pub struct CostVector {
    costs: Vec<f64>,
}

impl CostVector {
    pub fn new(costs: Vec<f64>) -> Result<Self> {
        for (i, &c) in costs.iter().enumerate() {
            if c.is_nan() || c == f64::INFINITY {
                return Err(Error::InvalidCost(format!("entry {i} is {c}")));
            }
        }
        Ok(Self { costs })
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            costs: vec![0.0; n],
        }
    }

    pub fn costs(&self) -> &[f64] {
        &self.costs
    }

    pub fn len(&self) -> usize {
        self.costs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.costs.is_empty()
    }
}

impl Serialize for CostVector {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut seq = serializer.serialize_seq(Some(self.costs.len()))?;
        for &c in &self.costs {
            if c == f64::NEG_INFINITY {
                seq.serialize_element("-inf")?;
            } else {
                seq.serialize_element(&c)?;
            }
        }
        seq.end()
    }
}

impl<'de> Deserialize<'de> for CostVector {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Entry {
            Number(f64),
            Token(String),
        }

        struct CostVisitor;

        impl<'de> Visitor<'de> for CostVisitor {
            type Value = CostVector;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("an array of numbers or \"-inf\"")
            }

            fn visit_seq<A: SeqAccess<'de>>(
                self,
                mut seq: A,
            ) -> std::result::Result<CostVector, A::Error> {
                let mut costs = Vec::new();
                while let Some(entry) = seq.next_element::<Entry>()? {
                    costs.push(match entry {
                        Entry::Number(v) => v,
                        Entry::Token(t) if t == "-inf" => f64::NEG_INFINITY,
                        Entry::Token(t) => {
                            return Err(de::Error::custom(format!("unexpected token {t:?}")))
                        }
                    });
                }
                CostVector::new(costs).map_err(de::Error::custom)
            }
        }

        deserializer.deserialize_seq(CostVisitor)
    }
}

/// Regularizer of the primal problem, equivalently the adversary's penalty.
///
/// | kind | primal regularizer `R(p)` | adversary penalty `R*(C)` |
/// |------|---------------------------|---------------------------|
/// | `kl` | `(1/β) KL(p ‖ p₀)` | `Σ p₀ e^{βC}` (up to the constant `(log β + 1)/β`) |
/// | `null` | `0` | `0` if `C ≡ 0`, else `+∞` |
/// | `power` | conjugate of the penalty | `Σ scale·|C|^{α′}`, `1/α + 1/α′ = 1` |
/// | `quadratic` | `(λ/2) pᵀ Σ p` | `(1/(2λ)) Cᵀ Σ⁻¹ C` |
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RegularizerSpec {
    Kl { beta: f64 },
    Null,
    Power { alpha: f64, scale: f64 },
    Quadratic { lambda: f64, sigma: Vec<Vec<f64>> },
}

impl RegularizerSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            RegularizerSpec::Kl { beta } => {
                if !(beta.is_finite() && *beta > 0.0) {
                    return Err(Error::InvalidBeta {
                        beta: *beta,
                        reason: "the adversarial dual requires beta > 0",
                    });
                }
            }
            RegularizerSpec::Null => {}
            RegularizerSpec::Power { alpha, scale } => {
                holder_conjugate(*alpha)?;
                if !(scale.is_finite() && *scale > 0.0) {
                    return Err(Error::InvalidRegularizer(format!(
                        "power scale {scale} must be > 0"
                    )));
                }
            }
            RegularizerSpec::Quadratic { lambda, sigma } => {
                if !(lambda.is_finite() && *lambda > 0.0) {
                    return Err(Error::InvalidRegularizer(format!(
                        "lambda {lambda} must be > 0"
                    )));
                }
                sigma_cholesky(sigma)?;
            }
        }
        Ok(())
    }

    fn check_dim(&self, n: usize) -> Result<()> {
        if let RegularizerSpec::Quadratic { sigma, .. } = self {
            if sigma.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: sigma.len(),
                });
            }
        }
        Ok(())
    }

    /// The adversary's cost against policy `p`, i.e. the gradient of the
    /// primal regularizer.
    pub fn best_response(&self, p: &Policy, p0: &Prior) -> Result<CostVector> {
        self.validate()?;
        self.check_dim(p.len())?;
        if p.len() != p0.len() {
            return Err(Error::DimensionMismatch {
                expected: p0.len(),
                found: p.len(),
            });
        }
        let costs = match self {
            RegularizerSpec::Kl { beta } => {
                return kl_best_response(p.weights(), p0.weights(), *beta)
            }
            RegularizerSpec::Null => vec![0.0; p.len()],
            RegularizerSpec::Power { alpha, scale } => {
                let dual = holder_conjugate(*alpha)?;
                p.weights()
                    .iter()
                    .map(|&w| (w / (scale * dual)).powf(alpha - 1.0))
                    .collect()
            }
            RegularizerSpec::Quadratic { lambda, sigma } => {
                let s = to_matrix(sigma);
                (s * DVector::from_column_slice(p.weights()) * *lambda)
                    .iter()
                    .copied()
                    .collect()
            }
        };
        CostVector::new(costs)
    }
}

fn to_matrix(rows: &[Vec<f64>]) -> DMatrix<f64> {
    let n = rows.len();
    DMatrix::from_fn(n, n, |i, j| rows[i][j])
}

fn sigma_cholesky(sigma: &[Vec<f64>]) -> Result<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
    let n = sigma.len();
    if n == 0 || sigma.iter().any(|r| r.len() != n) {
        return Err(Error::InvalidRegularizer(
            "sigma must be a nonempty square matrix".into(),
        ));
    }
    if sigma.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::InvalidRegularizer(
            "sigma has non-finite entries".into(),
        ));
    }
    for (i, row) in sigma.iter().enumerate() {
        for (j, &a) in row.iter().enumerate().take(i) {
            let b = sigma[j][i];
            if (a - b).abs() > 1e-12 * a.abs().max(b.abs()).max(1.0) {
                return Err(Error::InvalidRegularizer(format!(
                    "sigma is not symmetric at ({i}, {j})"
                )));
            }
        }
    }
    nalgebra::Cholesky::new(to_matrix(sigma))
        .ok_or_else(|| Error::InvalidRegularizer("sigma is not positive definite".into()))
}

fn check_positive_beta(beta: f64) -> Result<()> {
    if beta > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidBeta {
            beta,
            reason: "the adversarial dual requires beta > 0",
        })
    }
}

fn kl_best_response(p: &[f64], p0: &[f64], beta: f64) -> Result<CostVector> {
    check_positive_beta(beta)?;
    let log_beta = beta.ln();
    let mut costs = Vec::with_capacity(p.len());
    for (index, (&w, &q)) in p.iter().zip(p0).enumerate() {
        if w == 0.0 {
            costs.push(f64::NEG_INFINITY);
        } else if q == 0.0 {
            return Err(Error::AbsoluteContinuityViolation { index, mass: w });
        } else {
            costs.push(((w / q).ln() - log_beta) / beta);
        }
    }
    Ok(CostVector { costs })
}

fn check_costs(problem: &DecisionProblem, c: &CostVector) -> Result<()> {
    if c.len() != problem.n_actions() {
        return Err(Error::DimensionMismatch {
            expected: problem.n_actions(),
            found: c.len(),
        });
    }
    Ok(())
}

/// Expected net utility `Σ p (U − C)`; zero-mass actions contribute nothing.
fn expected_net_utility(utilities: &[f64], p: &[f64], c: &[f64]) -> Result<f64> {
    let mut total = 0.0;
    for (index, ((&u, &w), &cost)) in utilities.iter().zip(p).zip(c).enumerate() {
        if w == 0.0 {
            continue;
        }
        if cost == f64::NEG_INFINITY {
            return Err(Error::IllDefinedObjective { index });
        }
        total += w * (u - cost);
    }
    Ok(total)
}

/// `Σ p (U − C) + Σ p₀ e^{βC}` with the problem's β.
pub fn dual_objective(problem: &DecisionProblem, p: &Policy, c: &CostVector) -> Result<f64> {
    check_positive_beta(problem.beta())?;
    problem.check_policy(p)?;
    check_costs(problem, c)?;
    let net = expected_net_utility(problem.utilities(), p.weights(), c.costs())?;
    Ok(net + kl_penalty(problem.beta(), c.costs(), problem.prior().weights()))
}

fn kl_penalty(beta: f64, c: &[f64], p0: &[f64]) -> f64 {
    c.iter()
        .zip(p0)
        .filter(|(_, &q)| q > 0.0)
        .map(|(&cost, &q)| q * (beta * cost).exp())
        .sum()
}

/// Closed-form adversary response `C*(x) = (1/β) log(p(x) / (β p₀(x)))`,
/// `−∞` where `p(x) = 0`.
pub fn best_response_costs(problem: &DecisionProblem, p: &Policy) -> Result<CostVector> {
    problem.check_policy(p)?;
    kl_best_response(p.weights(), problem.prior().weights(), problem.beta())
}

/// `min_C dual_objective(p, C)`, attained at [`best_response_costs`].
pub fn worst_case_dual_objective(problem: &DecisionProblem, p: &Policy) -> Result<f64> {
    let c = best_response_costs(problem, p)?;
    dual_objective(problem, p, &c)
}

/// `U − C`. A `−∞` cost gives `+∞`: the action is outside the policy's
/// support and the adversary has stopped pressing on it.
pub fn net_utilities(problem: &DecisionProblem, c: &CostVector) -> Result<Vec<f64>> {
    check_costs(problem, c)?;
    Ok(problem
        .utilities()
        .iter()
        .zip(c.costs())
        .map(|(u, c)| u - c)
        .collect())
}

/// Spread `max_x (U − C*) − min_x (U − C*)` of the net utilities against the
/// best-response costs. Zero exactly at the equilibrium.
pub fn indifference_residual(problem: &DecisionProblem, p: &Policy) -> Result<f64> {
    problem.check_policy(p)?;
    if let Some(index) = p.weights().iter().position(|&w| w == 0.0) {
        return Err(Error::RestrictedSupport { index });
    }
    let c = best_response_costs(problem, p)?;
    let net = net_utilities(problem, &c)?;
    let hi = net.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = net.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(hi - lo)
}

/// Adversary penalty `R*(C)` for a regularizer. Infeasible costs yield `+∞`.
pub fn dual_penalty(reg: &RegularizerSpec, c: &CostVector, p0: &Prior) -> Result<f64> {
    reg.validate()?;
    if c.len() != p0.len() {
        return Err(Error::DimensionMismatch {
            expected: p0.len(),
            found: c.len(),
        });
    }
    reg.check_dim(c.len())?;
    let costs = c.costs();
    Ok(match reg {
        RegularizerSpec::Kl { beta } => kl_penalty(*beta, costs, p0.weights()),
        RegularizerSpec::Null => {
            if costs.iter().all(|&v| v == 0.0) {
                0.0
            } else {
                f64::INFINITY
            }
        }
        RegularizerSpec::Power { alpha, scale } => {
            let dual = holder_conjugate(*alpha)?;
            costs.iter().map(|v| scale * v.abs().powf(dual)).sum()
        }
        RegularizerSpec::Quadratic { lambda, sigma } => {
            if costs.iter().any(|v| v.is_infinite()) {
                return Ok(f64::INFINITY);
            }
            let chol = sigma_cholesky(sigma)?;
            let cv = DVector::from_column_slice(costs);
            let solved = chol.solve(&cv);
            cv.dot(&solved) / (2.0 * lambda)
        }
    })
}

/// Result of the alternating saddle-point scheme.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SaddleSolution {
    pub policy: Policy,
    pub costs: CostVector,
    /// Min-max side value `max_x (U − C)(x) + R*(C)` at the final costs.
    pub objective: f64,
    /// `max_x (U − C)(x) − Σ p (U − C)`, the duality gap of the final pair.
    pub indifference_residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Multiplicative-weights ascent on the policy against the adversary's best
/// response.
///
/// Each step sets `C ← best_response(p)` and `log p ← log p + η_t (U − C)`
/// with `η_t = 1/√t` (per utile). For `kl` the step is additionally capped at
/// `β`, where the update lands exactly on the equilibrium, since steps above
/// `2β` diverge. Iteration stops once the duality gap of the current pair is
/// at most `tol`. Running out of iterations is reported through
/// `converged = false`, never as an error.
///
/// Under `kl` only actions in the prior's support are playable. Under `null`
/// the adversary's only feasible response is `C ≡ 0`, so the saddle is the
/// expected-utility argmax and is returned directly.
pub fn saddle_solve(
    problem: &DecisionProblem,
    reg: &RegularizerSpec,
    tol: f64,
    max_iter: usize,
) -> Result<SaddleSolution> {
    reg.validate()?;
    reg.check_dim(problem.n_actions())?;
    if tol.is_nan() || tol < 0.0 {
        return Err(Error::InvalidRegularizer(format!(
            "tolerance {tol} must be >= 0"
        )));
    }
    let n = problem.n_actions();
    let u = problem.utilities();
    let p0 = problem.prior().weights();

    if let RegularizerSpec::Null = reg {
        let policy = argmax_policy(u)?;
        let objective = u.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        return Ok(SaddleSolution {
            policy,
            costs: CostVector::zeros(n),
            objective,
            indifference_residual: 0.0,
            iterations: 0,
            converged: true,
        });
    }

    let kl_beta = match reg {
        RegularizerSpec::Kl { beta } => Some(*beta),
        _ => None,
    };
    let playable: Vec<bool> = match kl_beta {
        Some(_) => p0.iter().map(|&q| q > 0.0).collect(),
        None => vec![true; n],
    };
    let mut log_w: Vec<f64> = match kl_beta {
        Some(_) => p0
            .iter()
            .map(|&q| if q > 0.0 { q.ln() } else { f64::NEG_INFINITY })
            .collect(),
        None => vec![0.0; n],
    };

    let mut iterations = 0;
    loop {
        let log_z = log_sum_exp(&log_w).expect("at least one playable action");
        for l in log_w.iter_mut() {
            *l -= log_z;
        }
        let weights: Vec<f64> = log_w.iter().map(|l| l.exp()).collect();
        let policy = Policy::from_raw(weights);

        // KL costs come from the log weights so underflowed masses keep finite costs.
        let costs = match kl_beta {
            Some(beta) => log_w
                .iter()
                .zip(p0)
                .map(|(&l, &q)| {
                    if q > 0.0 {
                        (l - q.ln() - beta.ln()) / beta
                    } else {
                        f64::NEG_INFINITY
                    }
                })
                .collect(),
            None => reg.best_response(&policy, problem.prior())?.costs,
        };
        let net: Vec<f64> = u.iter().zip(&costs).map(|(u, c)| u - c).collect();
        let best_net = net
            .iter()
            .zip(&playable)
            .filter(|(_, &ok)| ok)
            .map(|(&v, _)| v)
            .fold(f64::NEG_INFINITY, f64::max);
        let mean_net: f64 = policy
            .weights()
            .iter()
            .zip(&net)
            .zip(&playable)
            .filter(|((&w, _), &ok)| ok && w > 0.0)
            .map(|((&w, &v), _)| w * v)
            .sum();
        let residual = (best_net - mean_net).max(0.0);
        let converged = residual <= tol;

        if converged || iterations >= max_iter || !residual.is_finite() {
            let costs = CostVector::new(costs)?;
            let objective = best_net + dual_penalty(reg, &costs, problem.prior())?;
            return Ok(SaddleSolution {
                policy,
                costs,
                objective,
                indifference_residual: residual,
                iterations,
                converged,
            });
        }

        iterations += 1;
        let mut step = 1.0 / (iterations as f64).sqrt();
        if let Some(beta) = kl_beta {
            step = step.min(beta);
        }
        for ((l, &g), &ok) in log_w.iter_mut().zip(&net).zip(&playable) {
            if ok {
                *l += step * g;
            }
        }
    }
}

/// Lagrangian `Σ p (U − C) + R*(C)` of the max-min game for any regularizer.
pub fn saddle_lagrangian(
    problem: &DecisionProblem,
    reg: &RegularizerSpec,
    p: &Policy,
    c: &CostVector,
) -> Result<f64> {
    problem.check_policy(p)?;
    check_costs(problem, c)?;
    let net = expected_net_utility(problem.utilities(), p.weights(), c.costs())?;
    Ok(net + dual_penalty(reg, c, problem.prior())?)
}

/// Primal regularized objective `Σ p U − R(p)`, evaluated as the Lagrangian
/// at the adversary's best response.
pub fn regularized_objective(
    problem: &DecisionProblem,
    reg: &RegularizerSpec,
    p: &Policy,
) -> Result<f64> {
    let c = reg.best_response(p, problem.prior())?;
    saddle_lagrangian(problem, reg, p, &c)
}
