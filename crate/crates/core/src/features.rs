//! The 63-dimensional feature vector describing a target track in the
//! context of its session history.
//!
//! Layout:
//!
//! | indices | content |
//! |---------|---------|
//! | 0..16   | scalar features of the target track |
//! | 16..32  | mean scalar features over skipped history tracks |
//! | 32..48  | mean scalar features over listened history tracks |
//! | 48..53  | premium, shuffle, hour, day, month of the last history row |
//! | 53..55  | skip_1 and skip_2 ratios over the history |
//! | 55..58  | mean (target - skipped) difference in duration, year, popularity |
//! | 58..61  | the same against listened tracks |
//! | 61, 62  | mean acoustic dot product against skipped / listened tracks |
//!
//! "Skipped" means skip_2 is set. A group with no members contributes zeros.

use std::io::{Read, Write};
use std::sync::LazyLock;

use csv::{ReaderBuilder, WriterBuilder};
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::datamodel::{
    Session, SessionRow, TrackCatalog, TrackMetadata, MAX_TARGETS, N_SCALAR_FEATURES,
    SCALAR_FEATURE_NAMES,
};
use crate::error::{Error, Result};

pub const N_FEATURES: usize = 63;
pub const N_HISTORY_FEATURES: usize = 39;
pub const N_SESSION_TRACK_FEATURES: usize = 8;

pub const TRACK_OFFSET: usize = 0;
pub const SKIPPED_MEAN_OFFSET: usize = 16;
pub const LISTENED_MEAN_OFFSET: usize = 32;
pub const CONTEXT_OFFSET: usize = 48;
pub const RATIO_OFFSET: usize = 53;
pub const SESSION_TRACK_OFFSET: usize = 55;

static FEATURE_NAMES: LazyLock<Vec<String>> = LazyLock::new(|| {
    let mut names = Vec::with_capacity(N_FEATURES);
    for prefix in ["track", "skipped_mean", "listened_mean"] {
        names.extend(SCALAR_FEATURE_NAMES.iter().map(|f| format!("{prefix}_{f}")));
    }
    names.extend(["premium", "shuffle", "hour", "day", "month"].map(String::from));
    names.extend(["skip_1_ratio", "skip_2_ratio"].map(String::from));
    for group in ["skipped", "listened"] {
        names.extend(["duration", "year", "popularity"].map(|q| format!("{group}_diff_{q}")));
    }
    names.extend(["skipped_dot", "listened_dot"].map(String::from));
    debug_assert_eq!(names.len(), N_FEATURES);
    names
});

/// Canonical column names, in vector order.
pub fn feature_names() -> &'static [String] {
    &FEATURE_NAMES
}

/// Hex SHA-256 of the comma-joined canonical feature names.
pub fn feature_schema_hash() -> String {
    let digest = Sha256::digest(feature_names().join(",").as_bytes());
    hex::encode(digest)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureVector(pub [f64; N_FEATURES]);

impl FeatureVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

impl std::ops::Index<usize> for FeatureVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingExample {
    pub session_id: String,
    pub features: FeatureVector,
    /// skip_2 of the target row.
    pub label: bool,
    /// 1-indexed position within the target half, in `[1, 10]`.
    pub target_position: usize,
}

pub fn track_features(meta: &TrackMetadata) -> [f64; N_SCALAR_FEATURES] {
    meta.scalar_features
}

fn nonempty(history: &[SessionRow]) -> Result<()> {
    if history.is_empty() {
        Err(Error::Precondition("session history is empty".into()))
    } else {
        Ok(())
    }
}

fn flag(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

/// Skipped-group means, listened-group means, last-row context and the two
/// skip ratios.
pub fn session_history_features(
    history: &[SessionRow],
    catalog: &TrackCatalog,
) -> Result<[f64; N_HISTORY_FEATURES]> {
    nonempty(history)?;
    let mut sums = [[0.0; N_SCALAR_FEATURES]; 2];
    let mut counts = [0usize; 2];
    let mut skip_1 = 0usize;
    for row in history {
        let meta = lookup(catalog, row)?;
        let group = usize::from(!row.skip_2);
        counts[group] += 1;
        for (acc, v) in sums[group].iter_mut().zip(meta.scalar_features) {
            *acc += v;
        }
        skip_1 += usize::from(row.skip_1);
    }

    let mut out = [0.0; N_HISTORY_FEATURES];
    for group in 0..2 {
        if counts[group] == 0 {
            continue;
        }
        let n = counts[group] as f64;
        for k in 0..N_SCALAR_FEATURES {
            out[group * N_SCALAR_FEATURES + k] = sums[group][k] / n;
        }
    }
    let last = history.last().expect("non-empty");
    let ctx = 2 * N_SCALAR_FEATURES;
    out[ctx] = flag(last.premium);
    out[ctx + 1] = flag(last.shuffle);
    out[ctx + 2] = f64::from(last.hour);
    out[ctx + 3] = f64::from(last.day);
    out[ctx + 4] = f64::from(last.month);
    let n = history.len() as f64;
    out[ctx + 5] = skip_1 as f64 / n;
    out[ctx + 6] = counts[0] as f64 / n;
    Ok(out)
}

fn lookup<'c>(catalog: &'c TrackCatalog, row: &SessionRow) -> Result<&'c TrackMetadata> {
    catalog
        .get(&row.track_id)
        .ok_or_else(|| Error::UnknownTrack {
            track_id: row.track_id.clone(),
            row: row.position,
        })
}

fn dot(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Integrity(format!(
            "acoustic vector dimensions differ: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    Ok(a.iter().zip(b).map(|(x, y)| x * y).sum())
}

/// Mean differences in duration, year and popularity against each history
/// group, followed by the mean acoustic dot product against each group.
pub fn session_track_features(
    target: &TrackMetadata,
    history: &[SessionRow],
    catalog: &TrackCatalog,
) -> Result<[f64; N_SESSION_TRACK_FEATURES]> {
    nonempty(history)?;
    // [duration, year, popularity, dot] sums per group
    let mut sums = [[0.0; 4]; 2];
    let mut counts = [0usize; 2];
    for row in history {
        let meta = lookup(catalog, row)?;
        let group = usize::from(!row.skip_2);
        counts[group] += 1;
        let s = &mut sums[group];
        s[0] += target.duration_s - meta.duration_s;
        s[1] += f64::from(target.release_year - meta.release_year);
        s[2] += target.popularity() - meta.popularity();
        s[3] += dot(&target.acoustic_vector, &meta.acoustic_vector)?;
    }

    let mut out = [0.0; N_SESSION_TRACK_FEATURES];
    for group in 0..2 {
        if counts[group] == 0 {
            continue;
        }
        let n = counts[group] as f64;
        for q in 0..3 {
            out[group * 3 + q] = sums[group][q] / n;
        }
        out[6 + group] = sums[group][3] / n;
    }
    Ok(out)
}

pub fn assemble_example(
    target_row: &SessionRow,
    history: &[SessionRow],
    catalog: &TrackCatalog,
) -> Result<TrainingExample> {
    nonempty(history)?;
    let h = history.len();
    let target_position = target_row
        .position
        .checked_sub(h)
        .filter(|p| (1..=MAX_TARGETS).contains(p))
        .ok_or_else(|| {
            Error::Precondition(format!(
                "row at position {} is not in the target half (history length {h})",
                target_row.position
            ))
        })?;
    let target = lookup(catalog, target_row)?;

    let mut values = [0.0; N_FEATURES];
    values[TRACK_OFFSET..SKIPPED_MEAN_OFFSET].copy_from_slice(&track_features(target));
    values[SKIPPED_MEAN_OFFSET..SESSION_TRACK_OFFSET]
        .copy_from_slice(&session_history_features(history, catalog)?);
    values[SESSION_TRACK_OFFSET..]
        .copy_from_slice(&session_track_features(target, history, catalog)?);

    Ok(TrainingExample {
        session_id: target_row.session_id.clone(),
        features: FeatureVector(values),
        label: target_row.skip_2,
        target_position,
    })
}

/// One example per target row, in position order.
pub fn session_examples(session: &Session, catalog: &TrackCatalog) -> Result<Vec<TrainingExample>> {
    let split = session.split();
    split
        .targets
        .iter()
        .map(|row| assemble_example(row, split.history, catalog))
        .collect()
}

/// Examples for every session, ordered by session then position.
pub fn extract_examples(
    sessions: &[Session],
    catalog: &TrackCatalog,
) -> Result<Vec<TrainingExample>> {
    let per_session = sessions
        .par_iter()
        .map(|s| session_examples(s, catalog))
        .collect::<Result<Vec<_>>>()?;
    Ok(per_session.into_iter().flatten().collect())
}

/// Writes the feature matrix: 63 feature columns, then label, session_id
/// and target_position.
pub fn write_feature_matrix<W: Write>(output: W, examples: &[TrainingExample]) -> Result<()> {
    let mut writer = WriterBuilder::new().from_writer(output);
    let mut header: Vec<&str> = feature_names().iter().map(String::as_str).collect();
    header.extend(["label", "session_id", "target_position"]);
    writer.write_record(&header)?;
    let mut fields: Vec<String> = Vec::with_capacity(N_FEATURES + 3);
    for ex in examples {
        fields.clear();
        fields.extend(ex.features.0.iter().map(f64::to_string));
        fields.push(u8::from(ex.label).to_string());
        fields.push(ex.session_id.clone());
        fields.push(ex.target_position.to_string());
        writer.write_record(&fields)?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_feature_matrix<R: Read>(input: R) -> Result<Vec<TrainingExample>> {
    let mut reader = ReaderBuilder::new().has_headers(true).from_reader(input);
    let header = reader.headers()?.clone();
    let expected = feature_names().iter().map(String::as_str).chain([
        "label",
        "session_id",
        "target_position",
    ]);
    for (i, name) in expected.enumerate() {
        if header.get(i) != Some(name) {
            return Err(Error::MissingColumn {
                column: name.to_string(),
            });
        }
    }

    let mut out = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let row = record.position().map_or(i + 2, |p| p.line() as usize);
        let bad = |col: usize| Error::Parse {
            row,
            column: header.get(col).unwrap_or("?").to_string(),
            value: record.get(col).unwrap_or("").to_string(),
        };
        let mut values = [0.0; N_FEATURES];
        for (k, v) in values.iter_mut().enumerate() {
            *v = record
                .get(k)
                .and_then(|s| s.parse::<f64>().ok())
                .filter(|v| v.is_finite())
                .ok_or_else(|| bad(k))?;
        }
        let label = match record.get(N_FEATURES) {
            Some("1") => true,
            Some("0") => false,
            _ => return Err(bad(N_FEATURES)),
        };
        let session_id = record
            .get(N_FEATURES + 1)
            .ok_or_else(|| bad(N_FEATURES + 1))?;
        let target_position = record
            .get(N_FEATURES + 2)
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| bad(N_FEATURES + 2))?;
        out.push(TrainingExample {
            session_id: session_id.to_string(),
            features: FeatureVector(values),
            label,
            target_position,
        });
    }
    Ok(out)
}
