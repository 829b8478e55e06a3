use std::fmt::Write as _;
use std::str::FromStr;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::objective::{logistic_grad_hess, logistic_nll, sigmoid};
use super::tree::{Node, RegressionTree, TreeBuilder};
use super::{DenseMatrix, TrainParams};
use crate::error::{Error, Result};

const FORMAT_HEADER: &str = "skippred-gbdt 1";

/// Additive tree ensemble; the margin is `base_score + eta * sum(leaves)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GbdtModel {
    pub params: TrainParams,
    pub feature_count: usize,
    /// Initial margin, the log-odds of the training prevalence.
    pub base_score: f64,
    pub trees: Vec<RegressionTree>,
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

impl GbdtModel {
    /// A tree-less model predicting `prior` everywhere. `prior` is clamped
    /// into `[1e-6, 1 - 1e-6]` so the margin stays finite.
    pub fn constant(prior: f64, feature_count: usize, params: TrainParams) -> Self {
        let p = prior.clamp(1e-6, 1.0 - 1e-6);
        Self {
            params,
            feature_count,
            base_score: logit(p),
            trees: Vec::new(),
        }
    }

    pub fn eta(&self) -> f64 {
        self.params.eta
    }

    fn margin_unchecked(&self, x: &[f64]) -> f64 {
        let leaves: f64 = self.trees.iter().map(|t| t.predict(x)).sum();
        self.base_score + self.params.eta * leaves
    }

    pub fn predict_margin(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.feature_count {
            return Err(Error::Dimension {
                expected: self.feature_count,
                actual: x.len(),
            });
        }
        if x.iter().any(|v| v.is_nan()) {
            return Err(Error::Domain("NaN feature value".into()));
        }
        Ok(self.margin_unchecked(x))
    }

    /// Skip probability, strictly inside (0, 1).
    pub fn predict_proba(&self, x: &[f64]) -> Result<f64> {
        let p = sigmoid(self.predict_margin(x)?);
        Ok(p.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON))
    }

    pub fn to_text(&self) -> String {
        let p = &self.params;
        let mut out = String::new();
        let _ = writeln!(out, "{FORMAT_HEADER}");
        let _ = writeln!(out, "feature_count {}", self.feature_count);
        let _ = writeln!(out, "eta {}", p.eta);
        let _ = writeln!(out, "max_depth {}", p.max_depth);
        let _ = writeln!(out, "subsample {}", p.subsample);
        let _ = writeln!(out, "colsample_bytree {}", p.colsample_bytree);
        let _ = writeln!(out, "num_boost_round {}", p.num_boost_round);
        let _ = writeln!(out, "lambda {}", p.lambda);
        let _ = writeln!(out, "gamma {}", p.gamma);
        let _ = writeln!(out, "min_child_weight {}", p.min_child_weight);
        let _ = writeln!(out, "seed {}", p.seed);
        let _ = writeln!(out, "base_score {}", self.base_score);
        let _ = writeln!(out, "trees {}", self.trees.len());
        for (i, tree) in self.trees.iter().enumerate() {
            let _ = writeln!(out, "tree {i} {}", tree.nodes().len());
            for node in tree.nodes() {
                match *node {
                    Node::Split {
                        feature, threshold, ..
                    } => {
                        let _ = writeln!(out, "split {feature} {threshold}");
                    }
                    Node::Leaf { value } => {
                        let _ = writeln!(out, "leaf {value}");
                    }
                }
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = Lines {
            inner: text.lines().enumerate(),
            line: 0,
        };
        if lines.next_line()? != FORMAT_HEADER {
            return Err(lines.error("unrecognized header"));
        }
        let feature_count = lines.field("feature_count")?;
        let params = TrainParams {
            eta: lines.field("eta")?,
            max_depth: lines.field("max_depth")?,
            subsample: lines.field("subsample")?,
            colsample_bytree: lines.field("colsample_bytree")?,
            num_boost_round: lines.field("num_boost_round")?,
            lambda: lines.field("lambda")?,
            gamma: lines.field("gamma")?,
            min_child_weight: lines.field("min_child_weight")?,
            seed: lines.field("seed")?,
        };
        params.validate().map_err(|e| lines.error(&e.to_string()))?;
        let base_score: f64 = lines.field("base_score")?;
        if !base_score.is_finite() {
            return Err(lines.error("base_score must be finite"));
        }
        let n_trees: usize = lines.field("trees")?;

        let mut trees = Vec::with_capacity(n_trees);
        for t in 0..n_trees {
            let header = lines.next_line()?;
            let mut parts = header.split_whitespace();
            let (Some("tree"), Some(idx), Some(count), None) =
                (parts.next(), parts.next(), parts.next(), parts.next())
            else {
                return Err(lines.error("expected `tree <index> <node_count>`"));
            };
            if idx.parse::<usize>().ok() != Some(t) {
                return Err(lines.error("tree index out of sequence"));
            }
            let count: usize = count.parse().map_err(|_| lines.error("bad node count"))?;
            let mut raw = Vec::with_capacity(count);
            for _ in 0..count {
                let line = lines.next_line()?;
                let parts: Vec<&str> = line.split_whitespace().collect();
                let node = match parts.as_slice() {
                    ["leaf", v] => Some(Raw::Leaf(lines.parse(v)?)),
                    ["split", f, thr] => Some(Raw::Split(lines.parse(f)?, lines.parse(thr)?)),
                    _ => None,
                }
                .ok_or_else(|| lines.error("expected `leaf <v>` or `split <f> <t>`"))?;
                raw.push(node);
            }
            let nodes = link_preorder(&raw).ok_or_else(|| lines.error("malformed tree"))?;
            let tree =
                RegressionTree::from_nodes(nodes).ok_or_else(|| lines.error("malformed tree"))?;
            if tree.max_feature().is_some_and(|f| f >= feature_count) {
                return Err(lines.error("split feature out of range"));
            }
            trees.push(tree);
        }
        if lines.inner.any(|(_, l)| !l.trim().is_empty()) {
            return Err(lines.error("trailing content"));
        }
        Ok(Self {
            params,
            feature_count,
            base_score,
            trees,
        })
    }
}

enum Raw {
    Leaf(f64),
    Split(usize, f64),
}

/// Recovers child indices from a preorder node dump.
fn link_preorder(raw: &[Raw]) -> Option<Vec<Node>> {
    fn go(raw: &[Raw], pos: &mut usize, out: &mut Vec<Node>) -> Option<usize> {
        let idx = *pos;
        let item = raw.get(idx)?;
        *pos += 1;
        out.push(Node::Leaf { value: 0.0 });
        match *item {
            Raw::Leaf(value) => out[idx] = Node::Leaf { value },
            Raw::Split(feature, threshold) => {
                let left = go(raw, pos, out)?;
                let right = go(raw, pos, out)?;
                out[idx] = Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                };
            }
        }
        Some(idx)
    }
    let mut pos = 0;
    let mut out = Vec::with_capacity(raw.len());
    go(raw, &mut pos, &mut out)?;
    (pos == raw.len()).then_some(out)
}

struct Lines<'a, I: Iterator<Item = (usize, &'a str)>> {
    inner: I,
    line: usize,
}

impl<'a, I: Iterator<Item = (usize, &'a str)>> Lines<'a, I> {
    fn error(&self, reason: &str) -> Error {
        Error::ModelFormat {
            line: self.line,
            reason: reason.to_string(),
        }
    }

    fn next_line(&mut self) -> Result<&'a str> {
        let (i, l) = self
            .inner
            .next()
            .ok_or_else(|| self.error("unexpected end of input"))?;
        self.line = i + 1;
        Ok(l.trim())
    }

    fn parse<T: FromStr>(&self, s: &str) -> Result<T> {
        s.parse()
            .map_err(|_| self.error(&format!("cannot parse {s:?}")))
    }

    fn field<T: FromStr>(&mut self, key: &str) -> Result<T> {
        let line = self.next_line()?;
        match line.split_once(' ') {
            Some((k, v)) if k == key => self.parse(v.trim()),
            _ => Err(self.error(&format!("expected `{key} <value>`"))),
        }
    }
}

fn validate_inputs(matrix: &DenseMatrix, labels: &[bool]) -> Result<f64> {
    if matrix.n_rows() != labels.len() {
        return Err(Error::Dimension {
            expected: matrix.n_rows(),
            actual: labels.len(),
        });
    }
    if matrix.n_rows() < 2 {
        return Err(Error::DegenerateLabels("need at least 2 examples".into()));
    }
    if matrix.n_cols() == 0 {
        return Err(Error::Precondition("feature matrix has no columns".into()));
    }
    if (0..matrix.n_rows()).any(|i| matrix.row(i).iter().any(|v| v.is_nan())) {
        return Err(Error::Domain("NaN feature value in training matrix".into()));
    }
    let positives = labels.iter().filter(|&&l| l).count();
    if positives == 0 || positives == labels.len() {
        return Err(Error::DegenerateLabels(format!(
            "all {} labels are {}",
            labels.len(),
            positives > 0
        )));
    }
    Ok(positives as f64 / labels.len() as f64)
}

pub fn train(matrix: &DenseMatrix, labels: &[bool], params: &TrainParams) -> Result<GbdtModel> {
    train_with_trace(matrix, labels, params).map(|(model, _)| model)
}

/// Like [`train`], also returning the mean training log-loss after each
/// round (over all rows, not just the sampled ones).
pub fn train_with_trace(
    matrix: &DenseMatrix,
    labels: &[bool],
    params: &TrainParams,
) -> Result<(GbdtModel, Vec<f64>)> {
    params.validate()?;
    let prevalence = validate_inputs(matrix, labels)?;
    let n = matrix.n_rows();
    let n_features = matrix.n_cols();

    let base_score = logit(prevalence);
    let mut margins = vec![base_score; n];
    let mut grads = vec![0.0; n];
    let mut hess = vec![0.0; n];
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);

    // Global (value, row) order per feature, filtered per tree.
    let presorted: Vec<Vec<usize>> = (0..n_features)
        .map(|f| {
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| {
                matrix
                    .get(a, f)
                    .total_cmp(&matrix.get(b, f))
                    .then(a.cmp(&b))
            });
            order
        })
        .collect();

    let n_sample_rows = ((params.subsample * n as f64).floor() as usize).clamp(1, n);
    let n_sample_cols =
        ((params.colsample_bytree * n_features as f64).floor() as usize).clamp(1, n_features);

    let mut trees = Vec::with_capacity(params.num_boost_round);
    let mut trace = Vec::with_capacity(params.num_boost_round);
    let mut in_sample = vec![true; n];
    for _ in 0..params.num_boost_round {
        for i in 0..n {
            (grads[i], hess[i]) = logistic_grad_hess(margins[i], labels[i]);
        }

        let rows: Vec<usize> = if n_sample_rows < n {
            let mut rows = index::sample(&mut rng, n, n_sample_rows).into_vec();
            rows.sort_unstable();
            in_sample.fill(false);
            for &r in &rows {
                in_sample[r] = true;
            }
            rows
        } else {
            (0..n).collect()
        };
        let features: Vec<usize> = if n_sample_cols < n_features {
            let mut cols = index::sample(&mut rng, n_features, n_sample_cols).into_vec();
            cols.sort_unstable();
            cols
        } else {
            (0..n_features).collect()
        };
        let sorted: Vec<Vec<usize>> = features
            .iter()
            .map(|&f| {
                if n_sample_rows < n {
                    presorted[f]
                        .iter()
                        .copied()
                        .filter(|&r| in_sample[r])
                        .collect()
                } else {
                    presorted[f].clone()
                }
            })
            .collect();

        let tree = TreeBuilder::new(matrix, &grads, &hess, params, &features).build(rows, sorted);
        for (i, m) in margins.iter_mut().enumerate() {
            *m += params.eta * tree.predict(matrix.row(i));
        }
        trees.push(tree);
        trace.push(mean_log_loss(&margins, labels));
    }

    Ok((
        GbdtModel {
            params: *params,
            feature_count: n_features,
            base_score,
            trees,
        },
        trace,
    ))
}

fn mean_log_loss(margins: &[f64], labels: &[bool]) -> f64 {
    margins
        .iter()
        .zip(labels)
        .map(|(&m, &y)| logistic_nll(m, y))
        .sum::<f64>()
        / margins.len() as f64
}
