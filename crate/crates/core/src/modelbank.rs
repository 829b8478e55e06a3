//! One boosted model per target position, plus the pooled grid search used
//! to pick hyperparameters.

use std::fmt::Write as _;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use csv::{ReaderBuilder, WriterBuilder};
use log::warn;
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::KeyValues;
use crate::datamodel::MAX_TARGETS;
use crate::error::{Error, Result};
use crate::features::{feature_schema_hash, TrainingExample, N_FEATURES};
use crate::gbdt::{auc, train, DenseMatrix, GbdtModel, TrainParams};

pub const N_POSITIONS: usize = MAX_TARGETS;

pub const MANIFEST: &str = "manifest.txt";

pub fn model_file_name(position: usize) -> String {
    format!("model_{position:02}.txt")
}

/// Why a position fell back to a constant model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FallbackReason {
    Empty,
    SingleClass,
}

impl FallbackReason {
    fn as_str(self) -> &'static str {
        match self {
            FallbackReason::Empty => "empty",
            FallbackReason::SingleClass => "single_class",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "empty" => Some(Self::Empty),
            "single_class" => Some(Self::SingleClass),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BankWarning {
    /// 1-indexed target position.
    pub position: usize,
    pub reason: FallbackReason,
    /// Constant probability the fallback model predicts.
    pub prior: f64,
}

/// Anything that maps a feature vector to the ten per-position skip
/// probabilities.
pub trait PositionPredictor {
    fn predict_positions(&self, x: &[f64]) -> Result<[f64; N_POSITIONS]>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelBank {
    pub params: TrainParams,
    /// `models[j - 1]` was trained on examples with target position `j`.
    models: Vec<GbdtModel>,
    pub warnings: Vec<BankWarning>,
}

/// Splits examples into the ten per-position datasets.
pub fn partition_by_position(examples: &[TrainingExample]) -> Result<Vec<Vec<&TrainingExample>>> {
    let mut out: Vec<Vec<&TrainingExample>> = vec![Vec::new(); N_POSITIONS];
    for ex in examples {
        if !(1..=N_POSITIONS).contains(&ex.target_position) {
            return Err(Error::Integrity(format!(
                "example from session `{}` has target position {} outside [1, {N_POSITIONS}]",
                ex.session_id, ex.target_position
            )));
        }
        out[ex.target_position - 1].push(ex);
    }
    Ok(out)
}

pub(crate) fn to_matrix(examples: &[&TrainingExample]) -> Result<(DenseMatrix, Vec<bool>)> {
    let mut data = Vec::with_capacity(examples.len() * N_FEATURES);
    for ex in examples {
        data.extend_from_slice(ex.features.as_slice());
    }
    let labels = examples.iter().map(|e| e.label).collect();
    Ok((DenseMatrix::new(examples.len(), N_FEATURES, data)?, labels))
}

fn prevalence(examples: &[&TrainingExample]) -> f64 {
    examples.iter().filter(|e| e.label).count() as f64 / examples.len() as f64
}

/// Trains model `j` on dataset `j` with seed `params.seed + j`. Empty or
/// single-class datasets get a constant model at their own prior (or the
/// pooled prior when empty) and a warning instead of an error.
pub fn train_bank(datasets: &[Vec<&TrainingExample>], params: &TrainParams) -> Result<ModelBank> {
    params.validate()?;
    if datasets.len() != N_POSITIONS {
        return Err(Error::Dimension {
            expected: N_POSITIONS,
            actual: datasets.len(),
        });
    }
    let total: usize = datasets.iter().map(Vec::len).sum();
    if total == 0 {
        return Err(Error::Precondition("no training examples".into()));
    }
    let positives: usize = datasets
        .iter()
        .flat_map(|d| d.iter())
        .filter(|e| e.label)
        .count();
    let global_prior = positives as f64 / total as f64;

    let trained = datasets
        .par_iter()
        .enumerate()
        .map(|(k, data)| {
            let position = k + 1;
            let model_params = TrainParams {
                seed: params.seed.wrapping_add(position as u64),
                ..*params
            };
            let fallback = |reason, prior| {
                let model = GbdtModel::constant(prior, N_FEATURES, model_params);
                let prior = model
                    .predict_proba(&[0.0; N_FEATURES])
                    .expect("fixed width");
                Ok((
                    model,
                    Some(BankWarning {
                        position,
                        reason,
                        prior,
                    }),
                ))
            };
            if data.is_empty() {
                return fallback(FallbackReason::Empty, global_prior);
            }
            let p = prevalence(data);
            if p == 0.0 || p == 1.0 || data.len() < 2 {
                return fallback(FallbackReason::SingleClass, p);
            }
            let (matrix, labels) = to_matrix(data)?;
            Ok((train(&matrix, &labels, &model_params)?, None))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut models = Vec::with_capacity(N_POSITIONS);
    let mut warnings = Vec::new();
    for (model, warning) in trained {
        if let Some(w) = warning {
            warn!(
                "position {} dataset is {}; using constant model at prior {:.6}",
                w.position,
                w.reason.as_str(),
                w.prior
            );
            warnings.push(w);
        }
        models.push(model);
    }
    Ok(ModelBank {
        params: *params,
        models,
        warnings,
    })
}

impl ModelBank {
    pub fn from_models(params: TrainParams, models: Vec<GbdtModel>) -> Result<Self> {
        if models.len() != N_POSITIONS {
            return Err(Error::Dimension {
                expected: N_POSITIONS,
                actual: models.len(),
            });
        }
        if let Some(m) = models.iter().find(|m| m.feature_count != N_FEATURES) {
            return Err(Error::Dimension {
                expected: N_FEATURES,
                actual: m.feature_count,
            });
        }
        Ok(Self {
            params,
            models,
            warnings: Vec::new(),
        })
    }

    /// Model for 1-indexed `position`.
    pub fn model(&self, position: usize) -> &GbdtModel {
        &self.models[position - 1]
    }

    pub fn models(&self) -> &[GbdtModel] {
        &self.models
    }

    fn manifest(&self, seed: u64) -> String {
        let p = &self.params;
        let mut kv = KeyValues::new();
        kv.set("format", "skippred-bank 1");
        kv.set("feature_schema_hash", feature_schema_hash());
        kv.set("feature_count", N_FEATURES);
        kv.set("positions", N_POSITIONS);
        kv.set("seed", seed);
        kv.set("eta", p.eta);
        kv.set("max_depth", p.max_depth);
        kv.set("subsample", p.subsample);
        kv.set("colsample_bytree", p.colsample_bytree);
        kv.set("num_boost_round", p.num_boost_round);
        kv.set("lambda", p.lambda);
        kv.set("gamma", p.gamma);
        kv.set("min_child_weight", p.min_child_weight);
        for w in &self.warnings {
            kv.set(
                &format!("fallback.{:02}", w.position),
                format!("{} {}", w.reason.as_str(), w.prior),
            );
        }
        kv.to_text()
    }

    /// Writes `model_01.txt` .. `model_10.txt` and `manifest.txt` into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        for (k, m) in self.models.iter().enumerate() {
            fs::write(dir.join(model_file_name(k + 1)), m.to_text())?;
        }
        fs::write(dir.join(MANIFEST), self.manifest(self.params.seed))?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let manifest_path = dir.join(MANIFEST);
        let text = fs::read_to_string(&manifest_path).map_err(|e| {
            Error::Io(std::io::Error::new(
                e.kind(),
                format!("{}: {e}", manifest_path.display()),
            ))
        })?;
        let kv = KeyValues::parse(&text)?;
        let hash = kv.get_str("feature_schema_hash").unwrap_or_default();
        if hash != feature_schema_hash() {
            return Err(Error::Integrity(format!(
                "model bank feature schema {hash:?} does not match this build"
            )));
        }
        let params = TrainParams::default().with_overrides(&kv, "")?;
        let mut models = Vec::with_capacity(N_POSITIONS);
        for position in 1..=N_POSITIONS {
            let text = fs::read_to_string(dir.join(model_file_name(position)))?;
            models.push(GbdtModel::from_text(&text)?);
        }
        let mut bank = Self::from_models(params, models)?;
        for position in 1..=N_POSITIONS {
            if let Some(v) = kv.get_str(&format!("fallback.{position:02}")) {
                let (reason, prior) = v
                    .split_once(' ')
                    .and_then(|(r, p)| Some((FallbackReason::parse(r)?, p.parse().ok()?)))
                    .ok_or_else(|| Error::Config(format!("bad fallback entry {v:?}")))?;
                bank.warnings.push(BankWarning {
                    position,
                    reason,
                    prior,
                });
            }
        }
        Ok(bank)
    }
}

impl PositionPredictor for ModelBank {
    /// `[M_1(x), ..., M_10(x)]`.
    fn predict_positions(&self, x: &[f64]) -> Result<[f64; N_POSITIONS]> {
        let mut out = [0.0; N_POSITIONS];
        for (o, m) in out.iter_mut().zip(&self.models) {
            *o = m.predict_proba(x)?;
        }
        Ok(out)
    }
}

/// Candidate values per tuned hyperparameter. Combinations enumerate eta
/// outermost, then max_depth, colsample_bytree and subsample.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGrid {
    pub eta: Vec<f64>,
    pub max_depth: Vec<usize>,
    pub colsample_bytree: Vec<f64>,
    pub subsample: Vec<f64>,
}

impl Default for ParamGrid {
    /// 3 x 3 x 2 x 3 = 54 combinations.
    fn default() -> Self {
        Self {
            eta: vec![0.1, 0.2, 0.3],
            max_depth: vec![6, 10, 15],
            colsample_bytree: vec![0.8, 1.0],
            subsample: vec![0.8, 0.9, 1.0],
        }
    }
}

impl ParamGrid {
    pub fn single(params: &TrainParams) -> Self {
        Self {
            eta: vec![params.eta],
            max_depth: vec![params.max_depth],
            colsample_bytree: vec![params.colsample_bytree],
            subsample: vec![params.subsample],
        }
    }

    pub fn len(&self) -> usize {
        self.eta.len() * self.max_depth.len() * self.colsample_bytree.len() * self.subsample.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn combinations(&self, base: &TrainParams) -> Vec<TrainParams> {
        let mut out = Vec::with_capacity(self.len());
        for &eta in &self.eta {
            for &max_depth in &self.max_depth {
                for &colsample_bytree in &self.colsample_bytree {
                    for &subsample in &self.subsample {
                        out.push(TrainParams {
                            eta,
                            max_depth,
                            colsample_bytree,
                            subsample,
                            ..*base
                        });
                    }
                }
            }
        }
        out
    }

    /// Reads comma-separated `grid.eta`, `grid.max_depth`,
    /// `grid.colsample_bytree` and `grid.subsample` lists.
    pub fn from_key_values(kv: &KeyValues) -> Result<Self> {
        fn list<T: std::str::FromStr>(
            kv: &KeyValues,
            key: &str,
            default: Vec<T>,
        ) -> Result<Vec<T>> {
            match kv.get_str(key) {
                None => Ok(default),
                Some(raw) => raw
                    .split(',')
                    .map(|s| {
                        s.trim()
                            .parse()
                            .map_err(|_| Error::Config(format!("invalid entry {s:?} in `{key}`")))
                    })
                    .collect(),
            }
        }
        let d = Self::default();
        Ok(Self {
            eta: list(kv, "grid.eta", d.eta)?,
            max_depth: list(kv, "grid.max_depth", d.max_depth)?,
            colsample_bytree: list(kv, "grid.colsample_bytree", d.colsample_bytree)?,
            subsample: list(kv, "grid.subsample", d.subsample)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridRow {
    pub params: TrainParams,
    pub auc: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSearchReport {
    pub rows: Vec<GridRow>,
    /// Index into `rows` of the highest validation AUC (earliest on ties).
    pub best: usize,
    pub n_train_sessions: usize,
    pub n_validation_sessions: usize,
}

impl GridSearchReport {
    pub fn best_params(&self) -> &TrainParams {
        &self.rows[self.best].params
    }

    pub fn write_csv<W: Write>(&self, output: W) -> Result<()> {
        let mut w = WriterBuilder::new().from_writer(output);
        w.write_record([
            "eta",
            "max_depth",
            "colsample_bytree",
            "subsample",
            "num_boost_round",
            "auc",
        ])?;
        for row in &self.rows {
            let p = &row.params;
            w.write_record([
                p.eta.to_string(),
                p.max_depth.to_string(),
                p.colsample_bytree.to_string(),
                p.subsample.to_string(),
                p.num_boost_round.to_string(),
                row.auc.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads rows written by [`Self::write_csv`], filling untuned fields
    /// from `base`.
    pub fn read_csv<R: Read>(input: R, base: &TrainParams) -> Result<Self> {
        let mut reader = ReaderBuilder::new().has_headers(true).from_reader(input);
        let mut rows = Vec::new();
        for (i, record) in reader.records().enumerate() {
            let record = record?;
            let field = |k: usize, name: &str| {
                record
                    .get(k)
                    .unwrap_or("")
                    .to_string()
                    .parse::<f64>()
                    .map_err(|_| Error::Parse {
                        row: i + 2,
                        column: name.to_string(),
                        value: record.get(k).unwrap_or("").to_string(),
                    })
            };
            let params = TrainParams {
                eta: field(0, "eta")?,
                max_depth: field(1, "max_depth")? as usize,
                colsample_bytree: field(2, "colsample_bytree")?,
                subsample: field(3, "subsample")?,
                num_boost_round: field(4, "num_boost_round")? as usize,
                ..*base
            };
            params.validate()?;
            rows.push(GridRow {
                params,
                auc: field(5, "auc")?,
            });
        }
        if rows.is_empty() {
            return Err(Error::Precondition("grid report has no rows".into()));
        }
        let best = argmax_first(rows.iter().map(|r| r.auc));
        Ok(Self {
            rows,
            best,
            n_train_sessions: 0,
            n_validation_sessions: 0,
        })
    }

    pub fn summary(&self) -> String {
        let p = self.best_params();
        let mut s = String::new();
        let _ = write!(
            s,
            "best of {} combinations: eta={} max_depth={} colsample_bytree={} subsample={} (validation AUC {:.4})",
            self.rows.len(),
            p.eta,
            p.max_depth,
            p.colsample_bytree,
            p.subsample,
            self.rows[self.best].auc
        );
        s
    }
}

fn argmax_first(values: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in values.enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best.0
}

/// Samples whole sessions at `sample_fraction`, splits them 80/20 into
/// train and validation, and scores every grid combination by the
/// validation AUC of one model trained on all positions pooled.
/// `base.num_boost_round` and `base.seed` stay fixed across the grid.
pub fn grid_search(
    examples: &[TrainingExample],
    sample_fraction: f64,
    grid: &ParamGrid,
    base: &TrainParams,
) -> Result<GridSearchReport> {
    if !(sample_fraction > 0.0 && sample_fraction <= 1.0) {
        return Err(Error::Config(format!(
            "sample fraction must be in (0, 1], got {sample_fraction}"
        )));
    }
    if grid.is_empty() {
        return Err(Error::Config("parameter grid is empty".into()));
    }

    // Distinct sessions in first-appearance order.
    let mut session_ids: Vec<&str> = Vec::new();
    let mut session_of = Vec::with_capacity(examples.len());
    for ex in examples {
        if session_ids.last() != Some(&ex.session_id.as_str()) {
            session_ids.push(&ex.session_id);
        }
        session_of.push(session_ids.len() - 1);
    }
    let n_sessions = session_ids.len();
    let n_sample = ((sample_fraction * n_sessions as f64).ceil() as usize).min(n_sessions);
    if n_sample < 2 {
        return Err(Error::DegenerateLabels(format!(
            "sample of {n_sample} session(s) cannot be split into train and validation"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(base.seed);
    let sampled = index::sample(&mut rng, n_sessions, n_sample).into_vec();
    let n_train = ((0.8 * n_sample as f64).floor() as usize).clamp(1, n_sample - 1);
    // 0 = not sampled, 1 = train, 2 = validation
    let mut role = vec![0u8; n_sessions];
    for (k, &s) in sampled.iter().enumerate() {
        role[s] = if k < n_train { 1 } else { 2 };
    }
    let pick = |r: u8| -> Vec<&TrainingExample> {
        examples
            .iter()
            .zip(&session_of)
            .filter(|(_, &s)| role[s] == r)
            .map(|(e, _)| e)
            .collect()
    };
    let (train_set, valid_set) = (pick(1), pick(2));
    for (name, set) in [("training", &train_set), ("validation", &valid_set)] {
        let pos = set.iter().filter(|e| e.label).count();
        if pos == 0 || pos == set.len() {
            return Err(Error::DegenerateLabels(format!(
                "{name} sample of {} examples lacks one of the classes",
                set.len()
            )));
        }
    }
    let (train_x, train_y) = to_matrix(&train_set)?;
    let (valid_x, valid_y) = to_matrix(&valid_set)?;

    let rows = grid
        .combinations(base)
        .into_par_iter()
        .map(|params| {
            let model = train(&train_x, &train_y, &params)?;
            let scores = (0..valid_x.n_rows())
                .map(|i| model.predict_proba(valid_x.row(i)))
                .collect::<Result<Vec<_>>>()?;
            Ok(GridRow {
                params,
                auc: auc(&scores, &valid_y)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let best = argmax_first(rows.iter().map(|r| r.auc));
    Ok(GridSearchReport {
        rows,
        best,
        n_train_sessions: n_train,
        n_validation_sessions: n_sample - n_train,
    })
}
