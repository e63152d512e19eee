use std::fs;
use std::path::Path;

use feg_core::expected_utility::{conditional_expected_utilities, MatrixGame};
use feg_core::{DecisionProblem, Policy, Prior};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// On-disk problem description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub actions: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub utilities: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub utility_matrix: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observations: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channel: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prior: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq)]
enum Payoffs {
    Vector(Vec<f64>),
    Matrix(MatrixGame),
}

/// A validated problem file.
#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    actions: Vec<String>,
    payoffs: Payoffs,
    prior: Prior,
    beta: Option<f64>,
    sigma: Option<Vec<Vec<f64>>>,
}

fn field(name: &str, err: impl std::fmt::Display) -> CliError {
    CliError::Input(format!("field `{name}`: {err}"))
}

impl Problem {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Input(msg) => CliError::Input(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let file: ProblemFile =
            serde_json::from_str(text).map_err(|e| CliError::Input(e.to_string()))?;
        Self::from_file(file)
    }

    pub fn from_file(file: ProblemFile) -> Result<Self, CliError> {
        let n = file.actions.len();
        if n == 0 {
            return Err(field("actions", "at least one action is required"));
        }
        if let Some(b) = file.beta {
            if !b.is_finite() {
                return Err(field("beta", "must be finite"));
            }
        }
        let payoffs = match (file.utilities, file.utility_matrix) {
            (Some(u), None) => {
                if u.len() != n {
                    return Err(field(
                        "utilities",
                        format!("expected {n} entries, found {}", u.len()),
                    ));
                }
                if file.observations.is_some() || file.channel.is_some() {
                    return Err(field(
                        "observations",
                        "only allowed together with utility_matrix",
                    ));
                }
                Payoffs::Vector(u)
            }
            (None, Some(matrix)) => {
                let m = matrix.first().map_or(0, Vec::len);
                let observations = match file.observations {
                    Some(o) => o,
                    None => (1..=m).map(|j| format!("y{j}")).collect(),
                };
                let channel = match file.channel {
                    Some(rows) => Some(
                        rows.into_iter()
                            .map(Policy::new)
                            .collect::<Result<Vec<_>, _>>()
                            .map_err(|e| field("channel", e))?,
                    ),
                    None => None,
                };
                let game = MatrixGame::new(file.actions.clone(), observations, matrix, channel)
                    .map_err(|e| field("utility_matrix", e))?;
                Payoffs::Matrix(game)
            }
            (Some(_), Some(_)) => {
                return Err(CliError::Input(
                    "give exactly one of `utilities` and `utility_matrix`".into(),
                ))
            }
            (None, None) => {
                return Err(CliError::Input(
                    "missing `utilities` (or `utility_matrix`)".into(),
                ))
            }
        };
        let prior = match file.prior {
            Some(w) if w.len() != n => {
                return Err(field(
                    "prior",
                    format!("expected {n} entries, found {}", w.len()),
                ))
            }
            Some(w) => Prior::new(w).map_err(|e| field("prior", e))?,
            None => Prior::uniform(n),
        };
        if let Some(s) = &file.sigma {
            if s.len() != n || s.iter().any(|row| row.len() != n) {
                return Err(field("sigma", format!("expected a {n}x{n} matrix")));
            }
        }
        Ok(Self {
            actions: file.actions,
            payoffs,
            prior,
            beta: file.beta,
            sigma: file.sigma,
        })
    }

    /// Fully explicit form of the problem; parses back to an identical value.
    pub fn canonical(&self) -> ProblemFile {
        let (utilities, utility_matrix, observations, channel) = match &self.payoffs {
            Payoffs::Vector(u) => (Some(u.clone()), None, None, None),
            Payoffs::Matrix(g) => (
                None,
                Some(g.utility().to_vec()),
                Some(g.observations().to_vec()),
                g.channel()
                    .map(|rows| rows.iter().map(|r| r.weights().to_vec()).collect()),
            ),
        };
        ProblemFile {
            actions: self.actions.clone(),
            utilities,
            utility_matrix,
            observations,
            channel,
            prior: Some(self.prior.weights().to_vec()),
            beta: self.beta,
            sigma: self.sigma.clone(),
        }
    }

    pub fn actions(&self) -> &[String] {
        &self.actions
    }

    pub fn prior(&self) -> &Prior {
        &self.prior
    }

    pub fn sigma(&self) -> Option<&[Vec<f64>]> {
        self.sigma.as_deref()
    }

    pub fn beta(&self, beta_override: Option<f64>) -> Result<f64, CliError> {
        beta_override
            .or(self.beta)
            .ok_or_else(|| field("beta", "required by this command (or pass --beta)"))
    }

    /// Utilities per action; for a matrix problem these are the conditional
    /// expected utilities under the channel.
    pub fn utilities(&self) -> Result<Vec<f64>, CliError> {
        match &self.payoffs {
            Payoffs::Vector(u) => Ok(u.clone()),
            Payoffs::Matrix(g) => conditional_expected_utilities(g)
                .map_err(|_| field("channel", "a utility_matrix problem needs a channel here")),
        }
    }

    pub fn decision_problem(
        &self,
        beta_override: Option<f64>,
    ) -> Result<DecisionProblem, CliError> {
        let beta = self.beta(beta_override)?;
        Ok(DecisionProblem::new(
            self.actions.clone(),
            self.utilities()?,
            self.prior.clone(),
            beta,
        )?)
    }

    pub fn game(&self) -> Result<&MatrixGame, CliError> {
        match &self.payoffs {
            Payoffs::Matrix(g) => Ok(g),
            Payoffs::Vector(_) => Err(field("utility_matrix", "required by this command")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_round_trip() {
        let text = r#"{"actions":["a","b","c"],"utilities":[1,0,0.5],"prior":[1,1,2],"beta":2}"#;
        assert!(Problem::parse(text).is_err());
        let text =
            r#"{"actions":["a","b","c"],"utilities":[1,0,0.5],"prior":[0.2,0.3,0.5],"beta":2}"#;
        let p = Problem::parse(text).unwrap();
        let again = serde_json::to_string(&p.canonical()).unwrap();
        assert_eq!(Problem::parse(&again).unwrap(), p);
    }

    #[test]
    fn matrix_defaults() {
        let text =
            r#"{"actions":["a","b"],"utility_matrix":[[1,0],[0,1]],"channel":[[0.5,0.5],[1,0]]}"#;
        let p = Problem::parse(text).unwrap();
        assert_eq!(p.game().unwrap().observations(), ["y1", "y2"]);
        assert_eq!(p.utilities().unwrap(), vec![0.5, 0.0]);
        assert!(p.beta(None).is_err());
        assert_eq!(p.beta(Some(3.0)).unwrap(), 3.0);
        let again = serde_json::to_string(&p.canonical()).unwrap();
        assert_eq!(Problem::parse(&again).unwrap(), p);
    }

    #[test]
    fn rejects_inconsistent_files() {
        for text in [
            r#"{"actions":["a"],"utilities":[1,2]}"#,
            r#"{"actions":["a","b"],"utilities":[1,2],"utility_matrix":[[1],[2]]}"#,
            r#"{"actions":["a","b"]}"#,
            r#"{"actions":["a","b"],"utilities":[1,2],"prior":[1]}"#,
            r#"{"actions":["a","b"],"utilities":[1,2],"extra":1}"#,
            r#"{"actions":["a","b"],"utility_matrix":[[1,2],[3]]}"#,
            r#"{"actions":["a","b"],"utilities":[1,2],"sigma":[[1,0]]}"#,
        ] {
            assert!(Problem::parse(text).is_err(), "{text}");
        }
    }
}
