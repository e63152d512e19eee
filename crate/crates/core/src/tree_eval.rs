//! Decision trees evaluated as nested certainty-equivalents.
//!
//! Every internal node aggregates its children's values with
//! `(1/β) log Σ p₀ e^{βV}`, so one operator covers maximization (β → +∞),
//! expectation (β = 0) and minimization (β → −∞). Infinite β is represented
//! by the proxy `±EXTREME_BETA`; the resulting error per node is at most
//! `(1/|β|) log(1 / min p₀)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expected_utility::MatrixGame;
use crate::free_energy::certainty_equivalent_raw;
use crate::simplex::{Policy, Prior};

/// Magnitude of the β proxy used for exact max / min nodes.
pub const EXTREME_BETA: f64 = 1e6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TreeRecord", into = "TreeRecord")]
pub enum DecisionTree {
    Leaf(f64),
    Node {
        prior: Prior,
        beta: f64,
        children: Vec<DecisionTree>,
    },
}

/// File representation: `{"utility": u}` or
/// `{"beta": b, "prior": [..], "children": [..]}` (prior defaults to uniform).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum TreeRecord {
    Leaf {
        utility: f64,
    },
    Node {
        beta: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        prior: Option<Vec<f64>>,
        children: Vec<TreeRecord>,
    },
}

impl TryFrom<TreeRecord> for DecisionTree {
    type Error = Error;

    fn try_from(record: TreeRecord) -> Result<Self> {
        match record {
            TreeRecord::Leaf { utility } => DecisionTree::leaf(utility),
            TreeRecord::Node {
                beta,
                prior,
                children,
            } => {
                let children = children
                    .into_iter()
                    .map(DecisionTree::try_from)
                    .collect::<Result<Vec<_>>>()?;
                let prior = match prior {
                    Some(w) => Prior::new(w).map_err(|e| Error::InvalidTree(e.to_string()))?,
                    None if children.is_empty() => {
                        return Err(Error::InvalidTree("internal node without children".into()))
                    }
                    None => Prior::uniform(children.len()),
                };
                DecisionTree::node(prior, beta, children)
            }
        }
    }
}

impl From<DecisionTree> for TreeRecord {
    fn from(tree: DecisionTree) -> Self {
        match tree {
            DecisionTree::Leaf(utility) => TreeRecord::Leaf { utility },
            DecisionTree::Node {
                prior,
                beta,
                children,
            } => TreeRecord::Node {
                beta,
                prior: Some(prior.into()),
                children: children.into_iter().map(TreeRecord::from).collect(),
            },
        }
    }
}

impl DecisionTree {
    pub fn leaf(utility: f64) -> Result<Self> {
        if utility.is_finite() {
            Ok(DecisionTree::Leaf(utility))
        } else {
            Err(Error::InvalidTree(format!(
                "leaf utility {utility} is not finite"
            )))
        }
    }

    pub fn node(prior: Prior, beta: f64, children: Vec<DecisionTree>) -> Result<Self> {
        if children.is_empty() {
            return Err(Error::InvalidTree("internal node without children".into()));
        }
        if prior.len() != children.len() {
            return Err(Error::InvalidTree(format!(
                "prior has {} entries for {} children",
                prior.len(),
                children.len()
            )));
        }
        if !beta.is_finite() {
            return Err(Error::InvalidTree(format!("beta {beta} is not finite")));
        }
        Ok(DecisionTree::Node {
            prior,
            beta,
            children,
        })
    }

    /// Node with a uniform prior over its children.
    pub fn uniform(beta: f64, children: Vec<DecisionTree>) -> Result<Self> {
        let prior = Prior::uniform(children.len().max(1));
        Self::node(prior, beta, children)
    }

    pub fn depth(&self) -> usize {
        match self {
            DecisionTree::Leaf(_) => 0,
            DecisionTree::Node { children, .. } => {
                1 + children.iter().map(DecisionTree::depth).max().unwrap_or(0)
            }
        }
    }

    /// Adds `c` to every leaf.
    pub fn shifted(&self, c: f64) -> Self {
        match self {
            DecisionTree::Leaf(u) => DecisionTree::Leaf(u + c),
            DecisionTree::Node {
                prior,
                beta,
                children,
            } => DecisionTree::Node {
                prior: prior.clone(),
                beta: *beta,
                children: children.iter().map(|t| t.shifted(c)).collect(),
            },
        }
    }
}

/// Bottom-up certainty-equivalent value of the tree.
pub fn evaluate(tree: &DecisionTree) -> f64 {
    match tree {
        DecisionTree::Leaf(u) => *u,
        DecisionTree::Node {
            prior,
            beta,
            children,
        } => {
            let values: Vec<f64> = children.iter().map(evaluate).collect();
            certainty_equivalent_raw(&values, prior.weights(), *beta)
        }
    }
}

/// The aggregation an extreme or zero β stands for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregator {
    Min,
    Expectation,
    Max,
}

impl Aggregator {
    /// `Some` for β = 0 and for |β| at least [`EXTREME_BETA`].
    pub fn from_beta(beta: f64) -> Option<Self> {
        if beta >= EXTREME_BETA {
            Some(Aggregator::Max)
        } else if beta <= -EXTREME_BETA {
            Some(Aggregator::Min)
        } else if beta == 0.0 {
            Some(Aggregator::Expectation)
        } else {
            None
        }
    }
}

/// Normal-form view of a depth-2 tree: root children become actions, their
/// leaves become observations, and each child's prior becomes the channel row.
pub fn flatten(tree: &DecisionTree) -> Result<MatrixGame> {
    let (root_beta, rows) = match tree {
        DecisionTree::Node { beta, children, .. } => (*beta, children),
        DecisionTree::Leaf(_) => {
            return Err(Error::UnsupportedShape("a leaf has no normal form".into()))
        }
    };
    if Aggregator::from_beta(root_beta).is_none() {
        return Err(Error::UnsupportedShape(format!(
            "root beta {root_beta} is neither 0 nor an extreme proxy"
        )));
    }
    let width = match &rows[0] {
        DecisionTree::Node { children, .. } => children.len(),
        DecisionTree::Leaf(_) => {
            return Err(Error::UnsupportedShape(
                "root children must be internal nodes".into(),
            ))
        }
    };
    let mut utility = Vec::with_capacity(rows.len());
    let mut channel = Vec::with_capacity(rows.len());
    for (i, row) in rows.iter().enumerate() {
        let DecisionTree::Node {
            prior,
            beta,
            children,
        } = row
        else {
            return Err(Error::UnsupportedShape(
                "root children must be internal nodes".into(),
            ));
        };
        if Aggregator::from_beta(*beta).is_none() {
            return Err(Error::UnsupportedShape(format!(
                "child {i} beta {beta} is neither 0 nor an extreme proxy"
            )));
        }
        if children.len() != width {
            return Err(Error::UnsupportedShape(format!(
                "child {i} has {} leaves, expected {width}",
                children.len()
            )));
        }
        let leaves = children
            .iter()
            .map(|c| match c {
                DecisionTree::Leaf(u) => Ok(*u),
                DecisionTree::Node { .. } => Err(Error::UnsupportedShape(
                    "only depth-2 trees can be flattened".into(),
                )),
            })
            .collect::<Result<Vec<f64>>>()?;
        utility.push(leaves);
        channel.push(Policy::new(prior.weights().to_vec())?);
    }
    MatrixGame::from_matrix(utility, Some(channel))
}
