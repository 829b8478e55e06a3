//! Gradient-boosted regression trees for binary classification under the
//! logistic loss, with exact greedy split finding.

mod auc;
mod model;
mod objective;
mod split;
mod tree;

pub use auc::auc;
pub use model::{train, train_with_trace, GbdtModel};
pub use objective::{logistic_grad_hess, logistic_nll, sigmoid};
pub use split::{best_split, SplitCandidate, GAIN_TIE_TOLERANCE};
pub use tree::{Node, RegressionTree};

use crate::config::KeyValues;
use crate::error::{Error, Result};

/// Booster hyperparameters. Defaults are eta=0.3, max_depth=15,
/// subsample=1, colsample_bytree=1, 200 rounds, lambda=1, gamma=0,
/// min_child_weight=1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainParams {
    pub eta: f64,
    pub max_depth: usize,
    pub subsample: f64,
    pub colsample_bytree: f64,
    pub num_boost_round: usize,
    pub lambda: f64,
    pub gamma: f64,
    pub min_child_weight: f64,
    pub seed: u64,
}

impl Default for TrainParams {
    fn default() -> Self {
        Self {
            eta: 0.3,
            max_depth: 15,
            subsample: 1.0,
            colsample_bytree: 1.0,
            num_boost_round: 200,
            lambda: 1.0,
            gamma: 0.0,
            min_child_weight: 1.0,
            seed: 0,
        }
    }
}

impl TrainParams {
    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, msg: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::Config(msg.to_string()))
            }
        };
        check(self.eta > 0.0 && self.eta <= 1.0, "eta must be in (0, 1]")?;
        check(self.max_depth >= 1, "max_depth must be at least 1")?;
        check(
            self.subsample > 0.0 && self.subsample <= 1.0,
            "subsample must be in (0, 1]",
        )?;
        check(
            self.colsample_bytree > 0.0 && self.colsample_bytree <= 1.0,
            "colsample_bytree must be in (0, 1]",
        )?;
        check(
            self.num_boost_round >= 1,
            "num_boost_round must be at least 1",
        )?;
        check(
            self.lambda >= 0.0 && self.lambda.is_finite(),
            "lambda must be finite and >= 0",
        )?;
        check(
            self.gamma >= 0.0 && self.gamma.is_finite(),
            "gamma must be finite and >= 0",
        )?;
        check(
            self.min_child_weight >= 0.0 && self.min_child_weight.is_finite(),
            "min_child_weight must be finite and >= 0",
        )
    }

    /// Applies `{prefix}eta`, `{prefix}max_depth`, ... overrides.
    pub fn with_overrides(mut self, kv: &KeyValues, prefix: &str) -> Result<Self> {
        let key = |name: &str| format!("{prefix}{name}");
        self.eta = kv.get_or(&key("eta"), self.eta)?;
        self.max_depth = kv.get_or(&key("max_depth"), self.max_depth)?;
        self.subsample = kv.get_or(&key("subsample"), self.subsample)?;
        self.colsample_bytree = kv.get_or(&key("colsample_bytree"), self.colsample_bytree)?;
        self.num_boost_round = kv.get_or(&key("num_boost_round"), self.num_boost_round)?;
        self.lambda = kv.get_or(&key("lambda"), self.lambda)?;
        self.gamma = kv.get_or(&key("gamma"), self.gamma)?;
        self.min_child_weight = kv.get_or(&key("min_child_weight"), self.min_child_weight)?;
        self.seed = kv.get_or(&key("seed"), self.seed)?;
        self.validate()?;
        Ok(self)
    }
}

/// Row-major dense feature matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    n_rows: usize,
    n_cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn new(n_rows: usize, n_cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n_rows * n_cols {
            return Err(Error::Dimension {
                expected: n_rows * n_cols,
                actual: data.len(),
            });
        }
        Ok(Self {
            n_rows,
            n_cols,
            data,
        })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let n_cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * n_cols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != n_cols {
                return Err(Error::Dimension {
                    expected: n_cols,
                    actual: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Self::new(rows.len(), n_cols, data)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n_cols..(i + 1) * self.n_cols]
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.n_cols + col]
    }
}
