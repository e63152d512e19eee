//! Probability-simplex numerics: validated policies and priors, KL divergence,
//! stable log-sum-exp, total variation and exhaustive grid enumeration.
//!
//! Natural logarithms are used throughout, with `0 · log 0 = 0`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance on the sum of a distribution. Inputs within it are
/// renormalized silently, inputs outside it are rejected.
pub const SIMPLEX_TOL: f64 = 1e-12;

/// A point on the probability simplex over a finite action set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Policy {
    weights: Vec<f64>,
}

impl Policy {
    /// Validates a distribution read from user input.
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        check_entries(&weights)?;
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::InvalidDistribution(format!(
                "entries sum to {sum}, not 1"
            )));
        }
        if sum == 1.0 {
            return Ok(Self { weights });
        }
        normalize(&weights)
    }

    pub fn uniform(n: usize) -> Self {
        assert!(n > 0, "uniform policy needs at least one action");
        Self {
            weights: vec![1.0 / n as f64; n],
        }
    }

    /// Point mass on `index`.
    pub fn delta(n: usize, index: usize) -> Self {
        assert!(index < n, "delta index out of range");
        let mut weights = vec![0.0; n];
        weights[index] = 1.0;
        Self { weights }
    }

    /// Builds a policy from weights already known to satisfy the invariants.
    pub(crate) fn from_raw(weights: Vec<f64>) -> Self {
        debug_assert!((weights.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        Self { weights }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn into_weights(self) -> Vec<f64> {
        self.weights
    }

    /// True when every entry is strictly positive.
    pub fn has_full_support(&self) -> bool {
        self.weights.iter().all(|&w| w > 0.0)
    }

    /// Shannon entropy in nats.
    pub fn entropy(&self) -> f64 {
        let h: f64 = self
            .weights
            .iter()
            .filter(|&&w| w > 0.0)
            .map(|&w| -w * w.ln())
            .sum();
        h.max(0.0) + 0.0
    }
}

impl TryFrom<Vec<f64>> for Policy {
    type Error = Error;

    fn try_from(weights: Vec<f64>) -> Result<Self> {
        Policy::new(weights)
    }
}

impl From<Policy> for Vec<f64> {
    fn from(p: Policy) -> Self {
        p.weights
    }
}

impl AsRef<[f64]> for Policy {
    fn as_ref(&self) -> &[f64] {
        &self.weights
    }
}

/// Reference distribution `p₀`. Same invariants as [`Policy`]; additionally
/// records whether every entry is strictly positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Prior {
    policy: Policy,
    strict: bool,
}

impl Prior {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        Ok(Self::from_policy(Policy::new(weights)?))
    }

    pub fn uniform(n: usize) -> Self {
        Self::from_policy(Policy::uniform(n))
    }

    pub fn from_policy(policy: Policy) -> Self {
        let strict = policy.has_full_support();
        Self { policy, strict }
    }

    /// True when every entry is strictly positive.
    pub fn is_strict(&self) -> bool {
        self.strict
    }

    pub fn weights(&self) -> &[f64] {
        self.policy.weights()
    }

    pub fn len(&self) -> usize {
        self.policy.len()
    }

    pub fn is_empty(&self) -> bool {
        self.policy.is_empty()
    }

    pub fn as_policy(&self) -> &Policy {
        &self.policy
    }

    pub fn min_weight(&self) -> f64 {
        self.weights().iter().copied().fold(f64::INFINITY, f64::min)
    }
}

impl TryFrom<Vec<f64>> for Prior {
    type Error = Error;

    fn try_from(weights: Vec<f64>) -> Result<Self> {
        Prior::new(weights)
    }
}

impl From<Prior> for Vec<f64> {
    fn from(p: Prior) -> Self {
        p.policy.weights
    }
}

fn check_entries(raw: &[f64]) -> Result<()> {
    if raw.is_empty() {
        return Err(Error::InvalidDistribution("empty vector".into()));
    }
    for (i, &v) in raw.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::InvalidDistribution(format!(
                "entry {i} is not finite ({v})"
            )));
        }
        if v < 0.0 {
            return Err(Error::InvalidDistribution(format!(
                "entry {i} is negative ({v})"
            )));
        }
    }
    Ok(())
}

/// Scales a nonnegative vector onto the simplex.
///
/// Vectors already summing to one within rounding are returned unchanged, so
/// `normalize(normalize(v)) == normalize(v)` holds bit for bit.
pub fn normalize(raw: &[f64]) -> Result<Policy> {
    check_entries(raw)?;
    let sum: f64 = raw.iter().sum();
    if sum <= 0.0 {
        return Err(Error::InvalidDistribution("all entries are zero".into()));
    }
    if !sum.is_finite() {
        return Err(Error::InvalidDistribution("sum overflows".into()));
    }
    let rounding = 4.0 * f64::EPSILON * raw.len() as f64;
    if (sum - 1.0).abs() <= rounding {
        return Ok(Policy {
            weights: raw.to_vec(),
        });
    }
    let mut weights: Vec<f64> = raw.iter().map(|v| v / sum).collect();
    let top = (0..weights.len()).fold(0, |a, i| if weights[i] > weights[a] { i } else { a });
    for _ in 0..4 {
        let s: f64 = weights.iter().sum();
        if s == 1.0 {
            break;
        }
        weights[top] = (weights[top] + (1.0 - s)).max(0.0);
    }
    Ok(Policy { weights })
}

/// `KL(p ‖ p₀) = Σ p log(p / p₀)` in nats.
pub fn kl_divergence(p: &Policy, p0: &Prior) -> Result<f64> {
    kl_raw(p.weights(), p0.weights())
}

pub(crate) fn kl_raw(p: &[f64], p0: &[f64]) -> Result<f64> {
    if p.len() != p0.len() {
        return Err(Error::DimensionMismatch {
            expected: p0.len(),
            found: p.len(),
        });
    }
    let mut total = 0.0;
    for (index, (&pi, &qi)) in p.iter().zip(p0).enumerate() {
        if pi == 0.0 {
            continue;
        }
        if qi == 0.0 {
            return Err(Error::AbsoluteContinuityViolation { index, mass: pi });
        }
        total += pi * (pi / qi).ln();
    }
    // Rounding can leave a tiny negative residue when p == p0.
    Ok(total.max(0.0))
}

/// `log Σ exp(v_i)`, shifted by the maximum. `-inf` entries are absent terms.
pub fn log_sum_exp(values: &[f64]) -> Result<f64> {
    let mut max = f64::NEG_INFINITY;
    for (index, &v) in values.iter().enumerate() {
        if v.is_nan() || v == f64::INFINITY {
            return Err(Error::NonFinite { index, value: v });
        }
        max = max.max(v);
    }
    if max == f64::NEG_INFINITY {
        return Err(Error::EmptySupport);
    }
    let sum: f64 = values.iter().map(|&v| (v - max).exp()).sum();
    Ok(max + sum.ln())
}

/// Total variation distance `½ Σ |p − q|`.
pub fn total_variation(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch {
            expected: p.len(),
            found: q.len(),
        });
    }
    Ok(0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>())
}

/// Number of steps `1/resolution`, validated to be integral.
pub fn grid_steps(resolution: f64) -> Result<u32> {
    if !(resolution > 0.0 && resolution <= 1.0) {
        return Err(Error::InvalidResolution(resolution));
    }
    let inv = 1.0 / resolution;
    let steps = inv.round();
    if (inv - steps).abs() > 1e-9 * steps || steps > u32::MAX as f64 {
        return Err(Error::InvalidResolution(resolution));
    }
    Ok(steps as u32)
}

/// `C(steps + n − 1, n − 1)`, saturating at `u64::MAX`.
pub fn grid_size(n: usize, steps: u32) -> u64 {
    let k = n.saturating_sub(1) as u64;
    let top = steps as u64 + k;
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (top - i) as u128 / (i + 1) as u128;
        if acc > u64::MAX as u128 {
            return u64::MAX;
        }
    }
    acc as u64
}

/// Iterator over the compositions of `steps` into `n` nonnegative parts, in
/// lexicographic order of the leading coordinates.
#[derive(Debug, Clone)]
pub struct Compositions {
    counts: Vec<u32>,
    steps: u32,
    done: bool,
}

impl Compositions {
    pub fn new(n: usize, steps: u32) -> Self {
        assert!(n >= 1, "at least one coordinate");
        let mut counts = vec![0; n];
        counts[n - 1] = steps;
        Self {
            counts,
            steps,
            done: false,
        }
    }

    fn advance(&mut self) {
        let n = self.counts.len();
        if n == 1 {
            self.done = true;
            return;
        }
        // Odometer over the first n-1 coordinates under sum <= steps.
        let mut used: u32 = self.counts[..n - 1].iter().sum();
        let mut i = n - 2;
        loop {
            if used < self.steps {
                self.counts[i] += 1;
                used += 1;
                break;
            }
            used -= self.counts[i];
            self.counts[i] = 0;
            if i == 0 {
                self.done = true;
                return;
            }
            i -= 1;
        }
        self.counts[n - 1] = self.steps - used;
    }
}

impl Iterator for Compositions {
    type Item = Vec<u32>;

    fn next(&mut self) -> Option<Vec<u32>> {
        if self.done {
            return None;
        }
        let out = self.counts.clone();
        self.advance();
        Some(out)
    }
}

/// Every policy whose entries are multiples of `resolution`.
pub fn grid_policies(n: usize, resolution: f64) -> Result<Vec<Policy>> {
    if n == 0 {
        return Err(Error::InvalidDistribution("zero actions".into()));
    }
    let steps = grid_steps(resolution)?;
    let m = steps as f64;
    Ok(Compositions::new(n, steps)
        .map(|c| Policy::from_raw(c.iter().map(|&k| k as f64 / m).collect()))
        .collect())
}
