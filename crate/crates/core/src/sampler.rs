//! Exact sampling from the equilibrium distribution by rejection from the prior.
//!
//! A proposal `x ~ p₀` is accepted with probability `e^{β (U(x) − B)}`, where
//! `B ≥ max U` is a caller-supplied bound. Accepted draws are distributed
//! exactly as `p₀ e^{βU} / Z_β`, and only proposed actions have their utility
//! evaluated. A loose bound lowers the acceptance rate but never biases the
//! samples.
//!
//! # Random stream
//!
//! Samples are produced in blocks of [`BLOCK_SIZE`]. Block `b` draws from
//! ChaCha8 (`rand_chacha`) seeded with `seed_from_u64(seed)` and switched to
//! stream `b`. Within a block every attempt consumes one prior draw
//! (`WeightedIndex` over the prior) followed by one uniform `f64` in `[0, 1)`.
//! Blocks are independent, so the concatenated output does not depend on how
//! many threads produced it.

use std::sync::atomic::{AtomicU64, Ordering};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::free_energy::DecisionProblem;
use crate::simplex::Prior;

/// Samples per independently seeded block.
pub const BLOCK_SIZE: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SamplerConfig {
    /// Upper bound on every utility the sampler may propose.
    pub utility_bound: f64,
    pub seed: u64,
    pub max_attempts_per_sample: u64,
}

impl SamplerConfig {
    pub fn new(utility_bound: f64, seed: u64) -> Self {
        Self {
            utility_bound,
            seed,
            max_attempts_per_sample: 1_000_000,
        }
    }
}

/// Utility oracle that counts how often it is queried.
pub struct CountingUtility<F> {
    f: F,
    calls: AtomicU64,
}

impl<F: Fn(usize) -> f64> CountingUtility<F> {
    pub fn new(f: F) -> Self {
        Self {
            f,
            calls: AtomicU64::new(0),
        }
    }

    pub fn evaluate(&self, action: usize) -> f64 {
        self.calls.fetch_add(1, Ordering::Relaxed);
        (self.f)(action)
    }

    pub fn evaluations(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleRun {
    pub samples: Vec<usize>,
    pub proposals: u64,
    pub acceptances: u64,
    pub utility_evaluations: u64,
}

impl SampleRun {
    pub fn acceptance_rate(&self) -> f64 {
        if self.proposals == 0 {
            0.0
        } else {
            self.acceptances as f64 / self.proposals as f64
        }
    }

    /// Empirical frequency of each action.
    pub fn histogram(&self, n_actions: usize) -> Vec<f64> {
        let mut counts = vec![0u64; n_actions];
        for &s in &self.samples {
            counts[s] += 1;
        }
        let total = self.samples.len().max(1) as f64;
        counts.into_iter().map(|c| c as f64 / total).collect()
    }
}

/// Theoretical acceptance rate `Σ p₀ e^{β (U − B)}`.
pub fn expected_acceptance_rate(problem: &DecisionProblem, utility_bound: f64) -> f64 {
    let beta = problem.beta();
    problem
        .prior()
        .weights()
        .iter()
        .zip(problem.utilities())
        .map(|(&w, &u)| w * (beta * (u - utility_bound)).exp())
        .sum()
}

/// Draws `count` samples from the problem's equilibrium distribution.
pub fn sample_equilibrium(
    problem: &DecisionProblem,
    cfg: &SamplerConfig,
    count: usize,
) -> Result<SampleRun> {
    let utilities = problem.utilities();
    let oracle = CountingUtility::new(|x| utilities[x]);
    sample_with_oracle(problem.prior(), problem.beta(), &oracle, cfg, count)
}

/// Rejection sampler against a lazily evaluated utility oracle.
pub fn sample_with_oracle<F>(
    prior: &Prior,
    beta: f64,
    utility: &CountingUtility<F>,
    cfg: &SamplerConfig,
    count: usize,
) -> Result<SampleRun>
where
    F: Fn(usize) -> f64 + Sync,
{
    let blocks: Vec<usize> = (0..count.div_ceil(BLOCK_SIZE)).collect();
    let runs = blocks
        .par_iter()
        .map(|&b| run_block(prior, beta, utility, cfg, b, block_len(count, b)))
        .collect::<Vec<_>>();
    merge(runs)
}

fn block_len(count: usize, block: usize) -> usize {
    (count - block * BLOCK_SIZE).min(BLOCK_SIZE)
}

fn merge(runs: Vec<Result<SampleRun>>) -> Result<SampleRun> {
    let mut out = SampleRun {
        samples: Vec::new(),
        proposals: 0,
        acceptances: 0,
        utility_evaluations: 0,
    };
    for run in runs {
        let run = run?;
        out.samples.extend(run.samples);
        out.proposals += run.proposals;
        out.acceptances += run.acceptances;
        out.utility_evaluations += run.utility_evaluations;
    }
    Ok(out)
}

fn validate(prior: &Prior, beta: f64, cfg: &SamplerConfig) -> Result<()> {
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(Error::InvalidBeta {
            beta,
            reason: "sampling requires finite beta >= 0",
        });
    }
    if !cfg.utility_bound.is_finite() {
        return Err(Error::InvalidUtility(format!(
            "utility bound {} is not finite",
            cfg.utility_bound
        )));
    }
    if cfg.max_attempts_per_sample == 0 {
        return Err(Error::InvalidUtility(
            "max_attempts_per_sample must be >= 1".into(),
        ));
    }
    if prior.is_empty() {
        return Err(Error::InvalidDistribution("empty prior".into()));
    }
    Ok(())
}

fn run_block<F>(
    prior: &Prior,
    beta: f64,
    utility: &CountingUtility<F>,
    cfg: &SamplerConfig,
    block: usize,
    len: usize,
) -> Result<SampleRun>
where
    F: Fn(usize) -> f64,
{
    validate(prior, beta, cfg)?;
    let proposal = WeightedIndex::new(prior.weights())
        .map_err(|e| Error::InvalidDistribution(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(block as u64);

    let mut samples = Vec::with_capacity(len);
    let mut proposals = 0u64;
    let mut evaluations = 0u64;
    for _ in 0..len {
        let mut attempts = 0u64;
        loop {
            if attempts == cfg.max_attempts_per_sample {
                return Err(Error::SamplerStalled { attempts });
            }
            attempts += 1;
            proposals += 1;
            let x = proposal.sample(&mut rng);
            let u = utility.evaluate(x);
            evaluations += 1;
            if u > cfg.utility_bound {
                return Err(Error::BoundViolated {
                    index: x,
                    utility: u,
                    bound: cfg.utility_bound,
                });
            }
            let accept = (beta * (u - cfg.utility_bound)).exp();
            if rng.random::<f64>() < accept {
                samples.push(x);
                break;
            }
        }
    }
    Ok(SampleRun {
        acceptances: samples.len() as u64,
        samples,
        proposals,
        utility_evaluations: evaluations,
    })
}
