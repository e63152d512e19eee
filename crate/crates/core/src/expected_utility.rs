//! The β-free baseline: expected utility over a matrix game, deterministic
//! argmax policies, the induced utility distribution, and the minmax / maxmax
//! decision rules for the fully adversarial and fully cooperative cases.
//!
//! The minmax and maxmax rules read the inner problem as
//! `min_q Σ_y q(y|x) U(x,y)` (resp. `max_q`). That objective is linear in `q`,
//! so it is attained at a point mass and reduces to a row minimum (maximum).

use serde::Serialize;

use crate::error::{Error, Result};
use crate::simplex::{Policy, SIMPLEX_TOL};

/// Tolerance used when merging utilities into atoms of the utility distribution.
pub const ATOM_TOL: f64 = 1e-12;

/// Actions × observations utility matrix with an optional environment channel.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatrixGame {
    actions: Vec<String>,
    observations: Vec<String>,
    utility: Vec<Vec<f64>>,
    channel: Option<Vec<Policy>>,
}

impl MatrixGame {
    pub fn new(
        actions: Vec<String>,
        observations: Vec<String>,
        utility: Vec<Vec<f64>>,
        channel: Option<Vec<Policy>>,
    ) -> Result<Self> {
        if actions.is_empty() || observations.is_empty() {
            return Err(Error::InvalidUtility(
                "empty action or observation set".into(),
            ));
        }
        if utility.len() != actions.len() {
            return Err(Error::DimensionMismatch {
                expected: actions.len(),
                found: utility.len(),
            });
        }
        for row in &utility {
            if row.len() != observations.len() {
                return Err(Error::DimensionMismatch {
                    expected: observations.len(),
                    found: row.len(),
                });
            }
            if let Some(v) = row.iter().find(|v| !v.is_finite()) {
                return Err(Error::InvalidUtility(format!("non-finite entry {v}")));
            }
        }
        if let Some(rows) = &channel {
            if rows.len() != actions.len() {
                return Err(Error::DimensionMismatch {
                    expected: actions.len(),
                    found: rows.len(),
                });
            }
            for row in rows {
                if row.len() != observations.len() {
                    return Err(Error::DimensionMismatch {
                        expected: observations.len(),
                        found: row.len(),
                    });
                }
            }
        }
        Ok(Self {
            actions,
            observations,
            utility,
            channel,
        })
    }

    /// Game with generated labels `x1..`, `y1..`.
    pub fn from_matrix(utility: Vec<Vec<f64>>, channel: Option<Vec<Policy>>) -> Result<Self> {
        let n = utility.len();
        let m = utility.first().map_or(0, Vec::len);
        Self::new(
            (1..=n).map(|i| format!("x{i}")).collect(),
            (1..=m).map(|j| format!("y{j}")).collect(),
            utility,
            channel,
        )
    }

    pub fn actions(&self) -> &[String] {
        &self.actions
    }

    pub fn observations(&self) -> &[String] {
        &self.observations
    }

    pub fn utility(&self) -> &[Vec<f64>] {
        &self.utility
    }

    pub fn channel(&self) -> Option<&[Policy]> {
        self.channel.as_deref()
    }

    pub fn n_actions(&self) -> usize {
        self.actions.len()
    }

    fn require_channel(&self) -> Result<&[Policy]> {
        self.channel.as_deref().ok_or(Error::ChannelRequired)
    }

    fn check_policy(&self, p: &Policy) -> Result<()> {
        if p.len() != self.n_actions() {
            return Err(Error::DimensionMismatch {
                expected: self.n_actions(),
                found: p.len(),
            });
        }
        Ok(())
    }
}

/// Distribution of the realized utility: strictly increasing support with masses.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UtilityDistribution {
    pub support: Vec<f64>,
    pub masses: Vec<f64>,
}

impl UtilityDistribution {
    pub fn mean(&self) -> f64 {
        self.support
            .iter()
            .zip(&self.masses)
            .map(|(u, m)| u * m)
            .sum()
    }
}

/// `E[U|x] = Σ_y q(y|x) U(x,y)` for every action.
pub fn conditional_expected_utilities(game: &MatrixGame) -> Result<Vec<f64>> {
    let channel = game.require_channel()?;
    Ok(game
        .utility
        .iter()
        .zip(channel)
        .map(|(row, q)| row.iter().zip(q.weights()).map(|(u, w)| u * w).sum())
        .collect())
}

/// `Σ_x p(x) Σ_y q(y|x) U(x,y)`.
pub fn expected_utility(game: &MatrixGame, p: &Policy) -> Result<f64> {
    game.check_policy(p)?;
    let cond = conditional_expected_utilities(game)?;
    Ok(p.weights().iter().zip(&cond).map(|(w, u)| w * u).sum())
}

/// Index of the largest entry, lowest index on ties. Entries must be finite.
pub fn argmax_index(values: &[f64]) -> Result<usize> {
    if values.is_empty() {
        return Err(Error::InvalidUtility("empty utility vector".into()));
    }
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::InvalidUtility(format!(
                "non-finite entry {v} at {i}"
            )));
        }
        if v > values[best] {
            best = i;
        }
    }
    Ok(best)
}

/// Kronecker-delta policy on the maximizing action (lowest index on ties).
pub fn argmax_policy(values: &[f64]) -> Result<Policy> {
    let i = argmax_index(values)?;
    Ok(Policy::delta(values.len(), i))
}

/// Mass of each distinct utility value under `p(x) q(y|x)`.
///
/// Outcomes of zero probability contribute no atom. Utilities within
/// [`ATOM_TOL`] of the smallest value of a run are merged into one atom.
pub fn utility_distribution(game: &MatrixGame, p: &Policy) -> Result<UtilityDistribution> {
    game.check_policy(p)?;
    let channel = game.require_channel()?;
    let mut outcomes: Vec<(f64, f64)> = Vec::new();
    for ((row, q), &px) in game.utility.iter().zip(channel).zip(p.weights()) {
        for (&u, &qy) in row.iter().zip(q.weights()) {
            let mass = px * qy;
            if mass > 0.0 {
                outcomes.push((u, mass));
            }
        }
    }
    outcomes.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut support: Vec<f64> = Vec::new();
    let mut masses: Vec<f64> = Vec::new();
    let mut anchor = f64::NEG_INFINITY;
    for (u, mass) in outcomes {
        if support.is_empty() || u - anchor > ATOM_TOL {
            anchor = u;
            support.push(u);
            masses.push(mass);
        } else {
            *masses.last_mut().expect("nonempty") += mass;
        }
    }
    debug_assert!((masses.iter().sum::<f64>() - 1.0).abs() <= 1e3 * SIMPLEX_TOL);
    Ok(UtilityDistribution { support, masses })
}

fn row_rule(game: &MatrixGame, pick: impl Fn(&[f64]) -> f64) -> (Policy, f64) {
    let worst: Vec<f64> = game.utility.iter().map(|row| pick(row)).collect();
    let i = argmax_index(&worst).expect("matrix entries are finite");
    (Policy::delta(worst.len(), i), worst[i])
}

/// Fully adversarial rule: maximize the row minimum.
pub fn minmax_rule(game: &MatrixGame) -> (Policy, f64) {
    row_rule(game, |row| {
        row.iter().copied().fold(f64::INFINITY, f64::min)
    })
}

/// Fully cooperative rule: maximize the row maximum.
pub fn maxmax_rule(game: &MatrixGame) -> (Policy, f64) {
    row_rule(game, |row| {
        row.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simplex::{grid_policies, normalize};
    use proptest::prelude::*;

    fn half() -> Policy {
        Policy::uniform(2)
    }

    fn game(u: Vec<Vec<f64>>, q: Option<Vec<Policy>>) -> MatrixGame {
        MatrixGame::from_matrix(u, q).unwrap()
    }

    #[test]
    fn expected_utility_examples() {
        let g = game(
            vec![vec![3.0, 1.0], vec![2.0, 2.0]],
            Some(vec![half(), half()]),
        );
        assert_eq!(expected_utility(&g, &half()).unwrap(), 2.0);

        let g = game(
            vec![vec![3.0, 1.0], vec![2.0, 7.0]],
            Some(vec![Policy::delta(2, 0), Policy::delta(2, 1)]),
        );
        assert_eq!(expected_utility(&g, &Policy::delta(2, 1)).unwrap(), 7.0);

        let g = game(vec![vec![4.5; 3]; 2], Some(vec![Policy::uniform(3); 2]));
        for p in grid_policies(2, 0.1).unwrap() {
            assert!((expected_utility(&g, &p).unwrap() - 4.5).abs() < 1e-12);
        }
    }

    #[test]
    fn missing_channel() {
        let g = game(vec![vec![1.0]], None);
        assert_eq!(
            expected_utility(&g, &Policy::uniform(1)),
            Err(Error::ChannelRequired)
        );
        assert_eq!(
            utility_distribution(&g, &Policy::uniform(1)),
            Err(Error::ChannelRequired)
        );
    }

    #[test]
    fn construction_errors() {
        assert!(MatrixGame::from_matrix(vec![vec![1.0, 2.0], vec![1.0]], None).is_err());
        assert!(MatrixGame::from_matrix(vec![vec![f64::NAN]], None).is_err());
        assert!(MatrixGame::from_matrix(vec![vec![1.0]], Some(vec![half()])).is_err());
    }

    #[test]
    fn argmax_examples() {
        assert_eq!(argmax_policy(&[1.0, 3.0]).unwrap().weights(), &[0.0, 1.0]);
        assert_eq!(argmax_policy(&[2.0, 2.0]).unwrap().weights(), &[1.0, 0.0]);
        assert_eq!(
            argmax_policy(&[0.0, -1.0, 5.0, 5.0]).unwrap().weights(),
            &[0.0, 0.0, 1.0, 0.0]
        );
        assert!(matches!(
            argmax_policy(&[1.0, f64::INFINITY]),
            Err(Error::InvalidUtility(_))
        ));
        assert!(matches!(argmax_policy(&[]), Err(Error::InvalidUtility(_))));
    }

    #[test]
    fn utility_distribution_examples() {
        let g = game(
            vec![vec![3.0, 1.0], vec![2.0, 2.0]],
            Some(vec![Policy::delta(2, 1), half()]),
        );
        let d = utility_distribution(&g, &Policy::delta(2, 0)).unwrap();
        assert_eq!(d.support, vec![1.0]);
        assert_eq!(d.masses, vec![1.0]);

        let g = game(
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            Some(vec![half(), half()]),
        );
        let d = utility_distribution(&g, &half()).unwrap();
        assert_eq!(d.support, vec![0.0, 1.0]);
        assert_eq!(d.masses, vec![0.5, 0.5]);

        let g = game(vec![vec![-2.0; 3]; 3], Some(vec![Policy::uniform(3); 3]));
        let d = utility_distribution(&g, &Policy::uniform(3)).unwrap();
        assert_eq!(d.support, vec![-2.0]);
        assert!((d.masses[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn near_equal_utilities_merge() {
        let g = game(
            vec![vec![1.0, 1.0 + 1e-13, 2.0]],
            Some(vec![Policy::uniform(3)]),
        );
        let d = utility_distribution(&g, &Policy::uniform(1)).unwrap();
        assert_eq!(d.support.len(), 2);
        assert!((d.masses[0] - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn decision_rules() {
        let g = game(vec![vec![3.0, 1.0], vec![2.0, 2.0]], None);
        let (p, v) = minmax_rule(&g);
        assert_eq!((p.weights(), v), (&[0.0, 1.0][..], 2.0));
        let (p, v) = maxmax_rule(&g);
        assert_eq!((p.weights(), v), (&[1.0, 0.0][..], 3.0));

        let g = game(vec![vec![1.0, -1.0], vec![-1.0, 1.0]], None);
        let (p, v) = minmax_rule(&g);
        assert_eq!((p.weights(), v), (&[1.0, 0.0][..], -1.0));

        let g = game(vec![vec![0.25]], None);
        assert_eq!(minmax_rule(&g).1, 0.25);
        assert_eq!(maxmax_rule(&g).1, 0.25);

        let g = game(vec![vec![6.0; 2]; 3], None);
        let (p, v) = maxmax_rule(&g);
        assert_eq!((p.weights(), v), (&[1.0, 0.0, 0.0][..], 6.0));

        let g = game(vec![vec![0.0, 5.0], vec![4.0, 4.0]], None);
        let (p, v) = maxmax_rule(&g);
        assert_eq!((p.weights(), v), (&[1.0, 0.0][..], 5.0));
    }

    fn game_strategy() -> impl Strategy<Value = MatrixGame> {
        (1usize..5, 1usize..5).prop_flat_map(|(n, m)| {
            (
                prop::collection::vec(prop::collection::vec(-10.0f64..10.0, m), n),
                prop::collection::vec(prop::collection::vec(0.01f64..1.0, m), n),
            )
                .prop_map(|(u, q)| {
                    let q = q.iter().map(|r| normalize(r).unwrap()).collect();
                    MatrixGame::from_matrix(u, Some(q)).unwrap()
                })
        })
    }

    fn policy_of(n: usize, raw: &[f64]) -> Policy {
        normalize(&raw[..n]).unwrap()
    }

    proptest! {
        #[test]
        fn linear_in_policy(
            g in game_strategy(),
            a in prop::collection::vec(0.01f64..1.0, 4),
            b in prop::collection::vec(0.01f64..1.0, 4),
            lambda in 0.0f64..=1.0,
        ) {
            let n = g.n_actions();
            let (p1, p2) = (policy_of(n, &a), policy_of(n, &b));
            let mix: Vec<f64> = p1.weights().iter().zip(p2.weights())
                .map(|(x, y)| lambda * x + (1.0 - lambda) * y).collect();
            let mix = Policy::new(mix).unwrap();
            let lhs = expected_utility(&g, &mix).unwrap();
            let rhs = lambda * expected_utility(&g, &p1).unwrap()
                + (1.0 - lambda) * expected_utility(&g, &p2).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0));
        }

        #[test]
        fn delta_policy_is_optimal(g in game_strategy()) {
            let cond = conditional_expected_utilities(&g).unwrap();
            let best = expected_utility(&g, &argmax_policy(&cond).unwrap()).unwrap();
            for p in grid_policies(g.n_actions(), 0.05).unwrap() {
                prop_assert!(expected_utility(&g, &p).unwrap() <= best + 1e-12);
            }
        }

        #[test]
        fn rules_bracket_expected_utility(g in game_strategy()) {
            let cond = conditional_expected_utilities(&g).unwrap();
            let eu = expected_utility(&g, &argmax_policy(&cond).unwrap()).unwrap();
            prop_assert!(minmax_rule(&g).1 <= eu + 1e-12);
            prop_assert!(eu <= maxmax_rule(&g).1 + 1e-12);
        }

        #[test]
        fn distribution_mean_is_expected_utility(g in game_strategy(), a in prop::collection::vec(0.0f64..1.0, 4)) {
            let n = g.n_actions();
            prop_assume!(a[..n].iter().any(|&v| v > 0.0));
            let p = policy_of(n, &a);
            let d = utility_distribution(&g, &p).unwrap();
            prop_assert!((d.masses.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            prop_assert!(d.support.windows(2).all(|w| w[0] < w[1]));
            let eu = expected_utility(&g, &p).unwrap();
            prop_assert!((d.mean() - eu).abs() <= 1e-12 * eu.abs().max(1.0));
        }
    }
}
