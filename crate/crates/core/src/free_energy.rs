//! Free-energy functional `F_β[p] = Σ p U − (1/β) KL(p ‖ p₀)`, its closed-form
//! equilibrium `p* ∝ p₀ e^{βU}`, and the certainty-equivalent `(1/β) log Z_β`.
//!
//! β > 0 maximizes `F` (optimistic aggregation), β < 0 minimizes it
//! (pessimistic aggregation). β = 0 is the analytic limit: the equilibrium is
//! the prior and the certainty-equivalent is the prior mean.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::simplex::{kl_raw, log_sum_exp, normalize, Policy, Prior};

/// A single-step decision problem `(X, U, p₀, β)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecisionProblem {
    actions: Vec<String>,
    utilities: Vec<f64>,
    prior: Prior,
    beta: f64,
}

impl DecisionProblem {
    pub fn new(actions: Vec<String>, utilities: Vec<f64>, prior: Prior, beta: f64) -> Result<Self> {
        if utilities.is_empty() {
            return Err(Error::InvalidUtility("no actions".into()));
        }
        if let Some((index, &value)) = utilities.iter().enumerate().find(|(_, u)| !u.is_finite()) {
            return Err(Error::NonFinite { index, value });
        }
        if actions.len() != utilities.len() {
            return Err(Error::DimensionMismatch {
                expected: utilities.len(),
                found: actions.len(),
            });
        }
        if prior.len() != utilities.len() {
            return Err(Error::DimensionMismatch {
                expected: utilities.len(),
                found: prior.len(),
            });
        }
        check_beta(beta)?;
        Ok(Self {
            actions,
            utilities,
            prior,
            beta,
        })
    }

    /// Problem with labels `x1..xn` and the given prior.
    pub fn with_prior(utilities: Vec<f64>, prior: Prior, beta: f64) -> Result<Self> {
        let actions = default_labels(utilities.len());
        Self::new(actions, utilities, prior, beta)
    }

    /// Problem with labels `x1..xn` and a uniform prior.
    pub fn uniform(utilities: Vec<f64>, beta: f64) -> Result<Self> {
        let prior = Prior::uniform(utilities.len().max(1));
        Self::with_prior(utilities, prior, beta)
    }

    pub fn actions(&self) -> &[String] {
        &self.actions
    }

    pub fn utilities(&self) -> &[f64] {
        &self.utilities
    }

    pub fn prior(&self) -> &Prior {
        &self.prior
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn n_actions(&self) -> usize {
        self.utilities.len()
    }

    pub fn set_beta(&mut self, beta: f64) -> Result<()> {
        check_beta(beta)?;
        self.beta = beta;
        Ok(())
    }

    pub fn with_beta(mut self, beta: f64) -> Result<Self> {
        self.set_beta(beta)?;
        Ok(self)
    }

    pub(crate) fn check_policy(&self, p: &Policy) -> Result<()> {
        if p.len() != self.n_actions() {
            return Err(Error::DimensionMismatch {
                expected: self.n_actions(),
                found: p.len(),
            });
        }
        Ok(())
    }

    /// `Σ p U`.
    pub fn expected_utility(&self, p: &Policy) -> Result<f64> {
        self.check_policy(p)?;
        Ok(dot(p.weights(), &self.utilities))
    }
}

pub(crate) fn default_labels(n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("x{i}")).collect()
}

fn check_beta(beta: f64) -> Result<()> {
    if beta.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidBeta {
            beta,
            reason: "must be finite",
        })
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Closed-form summary of the optimal bounded-rational decision.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FreeEnergyReport {
    pub policy: Policy,
    pub free_energy: f64,
    pub certainty_equivalent: f64,
    pub expected_utility: f64,
    pub information_cost: f64,
}

/// `F_β[p]`. At β = 0 the information cost is taken in the β → 0⁺ limit:
/// zero at the prior, `+∞` anywhere else.
pub fn free_energy(problem: &DecisionProblem, p: &Policy) -> Result<f64> {
    let eu = problem.expected_utility(p)?;
    let kl = kl_raw(p.weights(), problem.prior.weights())?;
    Ok(eu - information_cost(kl, problem.beta))
}

fn information_cost(kl: f64, beta: f64) -> f64 {
    if beta == 0.0 {
        if kl == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        kl / beta
    }
}

/// Equilibrium distribution `p₀ e^{βU} / Z_β`, computed in shifted log space.
/// Actions outside the prior's support keep zero mass.
pub fn equilibrium(problem: &DecisionProblem) -> Policy {
    equilibrium_raw(&problem.utilities, problem.prior.weights(), problem.beta)
}

pub(crate) fn equilibrium_log_weights(utilities: &[f64], prior: &[f64], beta: f64) -> Vec<f64> {
    utilities
        .iter()
        .zip(prior)
        .map(|(&u, &w)| {
            if w > 0.0 {
                w.ln() + beta * u
            } else {
                f64::NEG_INFINITY
            }
        })
        .collect()
}

pub(crate) fn equilibrium_raw(utilities: &[f64], prior: &[f64], beta: f64) -> Policy {
    if beta == 0.0 {
        return Policy::from_raw(prior.to_vec());
    }
    let log_w = equilibrium_log_weights(utilities, prior, beta);
    let log_z = log_sum_exp(&log_w).expect("prior has nonempty support");
    let weights: Vec<f64> = log_w.iter().map(|&l| (l - log_z).exp()).collect();
    normalize(&weights).expect("equilibrium weights are a distribution")
}

/// Certainty-equivalent `(1/β) log Σ p₀ e^{βU}`; the prior mean at β = 0.
pub fn certainty_equivalent(problem: &DecisionProblem) -> f64 {
    certainty_equivalent_raw(&problem.utilities, problem.prior.weights(), problem.beta)
}

/// Certainty-equivalent over raw slices. The prior only needs to be
/// nonnegative with positive total mass; it is normalized implicitly.
///
/// Written as `(m + log1p(Σ p₀ expm1(βU − m) / Σ p₀)) / β` with `m = max βU`,
/// which stays accurate as β → 0 and does not overflow for large |β|.
pub fn certainty_equivalent_raw(utilities: &[f64], prior: &[f64], beta: f64) -> f64 {
    let mass: f64 = prior.iter().filter(|&&w| w > 0.0).sum();
    if beta == 0.0 {
        return dot(prior, utilities) / mass;
    }
    let m = utilities
        .iter()
        .zip(prior)
        .filter(|(_, &w)| w > 0.0)
        .map(|(&u, _)| beta * u)
        .fold(f64::NEG_INFINITY, f64::max);
    let tail: f64 = utilities
        .iter()
        .zip(prior)
        .filter(|(_, &w)| w > 0.0)
        .map(|(&u, &w)| w * (beta * u - m).exp_m1())
        .sum();
    (m + (tail / mass).ln_1p()) / beta
}

/// Closed-form solution: equilibrium policy and its free-energy decomposition.
pub fn solve(problem: &DecisionProblem) -> FreeEnergyReport {
    let policy = equilibrium(problem);
    let expected_utility = dot(policy.weights(), &problem.utilities);
    let kl = kl_raw(policy.weights(), problem.prior.weights())
        .expect("equilibrium is absolutely continuous w.r.t. the prior");
    let information_cost = information_cost(kl, problem.beta);
    FreeEnergyReport {
        free_energy: expected_utility - information_cost,
        certainty_equivalent: certainty_equivalent(problem),
        expected_utility,
        information_cost,
        policy,
    }
}

/// One row of a β sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub beta: f64,
    pub certainty_equivalent: f64,
    pub policy: Policy,
    pub entropy: f64,
    pub kl_to_prior: f64,
}

/// Evaluates the problem at each β independently.
pub fn beta_sweep(problem: &DecisionProblem, betas: &[f64]) -> Result<Vec<SweepRow>> {
    betas
        .iter()
        .map(|&beta| {
            check_beta(beta)?;
            let ce = certainty_equivalent_raw(&problem.utilities, problem.prior.weights(), beta);
            let policy = equilibrium_raw(&problem.utilities, problem.prior.weights(), beta);
            let kl_to_prior = kl_raw(policy.weights(), problem.prior.weights())?;
            Ok(SweepRow {
                beta,
                certainty_equivalent: ce,
                entropy: policy.entropy(),
                kl_to_prior,
                policy,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simplex::{grid_policies, total_variation};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    const E: f64 = std::f64::consts::E;

    fn standard(beta: f64) -> DecisionProblem {
        DecisionProblem::uniform(vec![1.0, 0.0], beta).unwrap()
    }

    #[test]
    fn free_energy_examples() {
        let pb = standard(1.0);
        let p0 = Policy::uniform(2);
        assert_eq!(free_energy(&pb, &p0).unwrap(), 0.5);
        let star = equilibrium(&pb);
        assert_relative_eq!(
            free_energy(&pb, &star).unwrap(),
            ((E + 1.0) / 2.0).ln(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn free_energy_at_prior_has_no_information_cost() {
        let prior = Prior::new(vec![0.2, 0.3, 0.5]).unwrap();
        let pb = DecisionProblem::with_prior(vec![1.0, -2.0, 4.0], prior.clone(), 3.0).unwrap();
        let expected = 0.2 - 0.6 + 2.0;
        assert_relative_eq!(
            free_energy(&pb, prior.as_policy()).unwrap(),
            expected,
            epsilon = 1e-15
        );
    }

    #[test]
    fn free_energy_rejects_mass_off_prior_support() {
        let prior = Prior::new(vec![1.0, 0.0]).unwrap();
        let pb = DecisionProblem::with_prior(vec![0.0, 1.0], prior, 1.0).unwrap();
        assert!(matches!(
            free_energy(&pb, &Policy::uniform(2)),
            Err(Error::AbsoluteContinuityViolation { index: 1, .. })
        ));
    }

    #[test]
    fn beta_zero_free_energy_limit() {
        let pb = standard(0.0);
        assert_eq!(free_energy(&pb, &Policy::uniform(2)).unwrap(), 0.5);
        assert_eq!(
            free_energy(&pb, &Policy::delta(2, 0)).unwrap(),
            f64::NEG_INFINITY
        );
    }

    #[test]
    fn equilibrium_examples() {
        let pb = standard(0.0);
        assert_eq!(equilibrium(&pb).weights(), pb.prior().weights());

        let star = equilibrium(&standard(1.0));
        assert_relative_eq!(star.weights()[0], E / (1.0 + E), epsilon = 1e-15);
        assert_relative_eq!(star.weights()[1], 1.0 / (1.0 + E), epsilon = 1e-15);
        assert_relative_eq!(star.weights()[0], 0.731058578630005, epsilon = 1e-12);

        let sharp = equilibrium(&standard(1e4));
        let tv = total_variation(sharp.weights(), &[1.0, 0.0]).unwrap();
        assert!(tv < 1e-6);
    }

    #[test]
    fn zero_prior_actions_stay_at_zero() {
        let prior = Prior::new(vec![0.5, 0.0, 0.5]).unwrap();
        let pb = DecisionProblem::with_prior(vec![0.0, 100.0, 1.0], prior, 2.0).unwrap();
        let star = equilibrium(&pb);
        assert_eq!(star.weights()[1], 0.0);
        assert_relative_eq!(
            certainty_equivalent(&pb),
            (0.5 * (1.0 + 2f64.exp())).ln() / 2.0,
            epsilon = 1e-14
        );
    }

    #[test]
    fn certainty_equivalent_examples() {
        assert_eq!(certainty_equivalent(&standard(0.0)), 0.5);
        assert_relative_eq!(
            certainty_equivalent(&standard(1.0)),
            0.6201145069582774,
            epsilon = 1e-14
        );
        let ce = certainty_equivalent(&standard(-1.0));
        assert_relative_eq!(ce, -((1.0 / E + 1.0) / 2.0).ln(), epsilon = 1e-14);
        assert_relative_eq!(ce, 0.379_885_493_041_722_5, epsilon = 1e-14);
        assert!(0.0 < ce && ce < 0.5);
    }

    #[test]
    fn certainty_equivalent_is_continuous_at_zero() {
        for beta in [1e-300, 1e-12, -1e-12, 1e-6] {
            let ce = certainty_equivalent(&standard(beta));
            assert!((ce - 0.5).abs() < 1e-6, "beta={beta} ce={ce}");
        }
    }

    #[test]
    fn report_decomposes() {
        let r = solve(&standard(1.0));
        assert_relative_eq!(r.free_energy, r.certainty_equivalent, epsilon = 1e-12);
        assert_eq!(r.free_energy, r.expected_utility - r.information_cost);
        let r0 = solve(&standard(0.0));
        assert_eq!(r0.information_cost, 0.0);
        assert_eq!(r0.certainty_equivalent, 0.5);
    }

    #[test]
    fn sweep_examples() {
        let pb = standard(1.0);
        let rows = beta_sweep(&pb, &[0.0]).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].certainty_equivalent, 0.5);
        assert_eq!(rows[0].policy.weights(), &[0.5, 0.5]);
        assert_eq!(rows[0].kl_to_prior, 0.0);
        assert_relative_eq!(rows[0].entropy, 2f64.ln());

        let rows = beta_sweep(&pb, &[-1e4, 0.0, 1e4]).unwrap();
        let ce: Vec<f64> = rows.iter().map(|r| r.certainty_equivalent).collect();
        assert!((ce[0] - 0.0).abs() < 1e-3);
        assert_eq!(ce[1], 0.5);
        assert!((ce[2] - 1.0).abs() < 1e-3);

        assert!(beta_sweep(&pb, &[f64::NAN]).is_err());
    }

    #[test]
    fn invalid_problems() {
        assert!(DecisionProblem::uniform(vec![], 1.0).is_err());
        assert!(DecisionProblem::uniform(vec![f64::NAN], 1.0).is_err());
        assert!(DecisionProblem::uniform(vec![1.0], f64::INFINITY).is_err());
        assert!(DecisionProblem::with_prior(vec![1.0, 2.0], Prior::uniform(3), 1.0).is_err());
    }

    fn problem_strategy(max_n: usize) -> impl Strategy<Value = DecisionProblem> {
        (1..=max_n).prop_flat_map(|n| {
            (
                prop::collection::vec(-5.0f64..5.0, n),
                prop::collection::vec(0.05f64..1.0, n),
                prop_oneof![-20.0f64..-0.01, 0.01f64..20.0],
            )
                .prop_map(|(u, w, beta)| {
                    let prior = Prior::from_policy(normalize(&w).unwrap());
                    DecisionProblem::with_prior(u, prior, beta).unwrap()
                })
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn equilibrium_maximizes_free_energy(pb in problem_strategy(3), beta in 0.01f64..=10.0) {
            let pb = pb.with_beta(beta).unwrap();
            let best = free_energy(&pb, &equilibrium(&pb)).unwrap();
            for p in grid_policies(pb.n_actions(), 0.01).unwrap() {
                prop_assert!(free_energy(&pb, &p).unwrap() <= best + 1e-9);
            }
        }

        #[test]
        fn free_energy_at_equilibrium_is_certainty_equivalent(pb in problem_strategy(6)) {
            let f = free_energy(&pb, &equilibrium(&pb)).unwrap();
            let ce = certainty_equivalent(&pb);
            prop_assert!((f - ce).abs() <= 1e-10 * ce.abs().max(1.0), "f={} ce={}", f, ce);
        }

        #[test]
        fn certainty_equivalent_is_bracketed(pb in problem_strategy(6)) {
            let ce = certainty_equivalent(&pb);
            let lo = pb.utilities().iter().copied().fold(f64::INFINITY, f64::min);
            let hi = pb.utilities().iter().copied().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(lo - 1e-12 <= ce && ce <= hi + 1e-12);
        }

        #[test]
        fn certainty_equivalent_is_monotone(pb in problem_strategy(6), mut betas in prop::collection::vec(-50.0f64..50.0, 2..20)) {
            betas.sort_by(f64::total_cmp);
            let rows = beta_sweep(&pb, &betas).unwrap();
            for w in rows.windows(2) {
                prop_assert!(w[1].certainty_equivalent >= w[0].certainty_equivalent - 1e-12);
            }
        }

        #[test]
        fn shift_covariance(pb in problem_strategy(6), c in -10.0f64..10.0) {
            let shifted: Vec<f64> = pb.utilities().iter().map(|u| u + c).collect();
            let qb = DecisionProblem::with_prior(shifted, pb.prior().clone(), pb.beta()).unwrap();
            let lhs = certainty_equivalent(&qb);
            let rhs = certainty_equivalent(&pb) + c;
            prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.abs().max(1.0), "{} vs {}", lhs, rhs);
            let tv = total_variation(equilibrium(&pb).weights(), equilibrium(&qb).weights()).unwrap();
            prop_assert!(tv <= 1e-12);
        }
    }
}
