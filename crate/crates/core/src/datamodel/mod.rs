//! Session and track records, challenge-format CSV I/O and the synthetic
//! corpus generator.

mod io;
mod synth;

use std::collections::BTreeMap;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use io::{parse_session_log, parse_track_features, write_session_log, write_track_features};
pub use synth::{generate_synthetic_dataset, SynthConfig};

use crate::error::{Error, Result};

/// Number of scalar track features.
pub const N_SCALAR_FEATURES: usize = 16;

/// Canonical ordering of the scalar track features.
pub const SCALAR_FEATURE_NAMES: [&str; N_SCALAR_FEATURES] = [
    "popularity",
    "acousticness",
    "beat_strength",
    "bounciness",
    "danceability",
    "dyn_range_mean",
    "energy",
    "flatness",
    "instrumentalness",
    "liveness",
    "loudness",
    "mechanism",
    "tempo",
    "organism",
    "speechiness",
    "valence",
];

pub const POPULARITY: usize = 0;
pub const ENERGY: usize = 6;
pub const TEMPO: usize = 12;

pub const DEFAULT_ACOUSTIC_DIM: usize = 7;
pub const MIN_SESSION_LENGTH: usize = 2;
pub const MAX_SESSION_LENGTH: usize = 20;
/// Upper bound on target rows per session, `MAX_SESSION_LENGTH / 2`.
pub const MAX_TARGETS: usize = MAX_SESSION_LENGTH / 2;

#[derive(Debug, Clone, PartialEq)]
pub struct TrackMetadata {
    pub track_id: String,
    pub duration_s: f64,
    pub release_year: i32,
    pub scalar_features: [f64; N_SCALAR_FEATURES],
    pub acoustic_vector: Vec<f64>,
}

impl TrackMetadata {
    pub fn popularity(&self) -> f64 {
        self.scalar_features[POPULARITY]
    }
}

/// All tracks of a corpus, keyed by id. Every track carries an acoustic
/// vector of the same dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackCatalog {
    acoustic_dim: usize,
    tracks: BTreeMap<String, TrackMetadata>,
}

impl TrackCatalog {
    pub fn new(acoustic_dim: usize) -> Self {
        Self {
            acoustic_dim,
            tracks: BTreeMap::new(),
        }
    }

    pub fn acoustic_dim(&self) -> usize {
        self.acoustic_dim
    }

    pub fn insert(&mut self, track: TrackMetadata) -> Result<()> {
        if track.acoustic_vector.len() != self.acoustic_dim {
            return Err(Error::Dimension {
                expected: self.acoustic_dim,
                actual: track.acoustic_vector.len(),
            });
        }
        if self.tracks.contains_key(&track.track_id) {
            return Err(Error::DuplicateKey {
                key: track.track_id,
                row: self.tracks.len() + 1,
            });
        }
        self.tracks.insert(track.track_id.clone(), track);
        Ok(())
    }

    pub fn get(&self, track_id: &str) -> Option<&TrackMetadata> {
        self.tracks.get(track_id)
    }

    pub fn lookup(&self, track_id: &str) -> Result<&TrackMetadata> {
        self.tracks
            .get(track_id)
            .ok_or_else(|| Error::UnknownTrack {
                track_id: track_id.to_string(),
                row: 0,
            })
    }

    pub fn len(&self) -> usize {
        self.tracks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tracks.is_empty()
    }

    /// Tracks in ascending id order.
    pub fn iter(&self) -> impl Iterator<Item = &TrackMetadata> {
        self.tracks.values()
    }
}

/// One playback event.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionRow {
    pub session_id: String,
    /// 1-indexed position within the session.
    pub position: usize,
    pub session_length: usize,
    pub track_id: String,
    pub skip_1: bool,
    pub skip_2: bool,
    pub skip_3: bool,
    pub premium: bool,
    pub shuffle: bool,
    pub hour: u8,
    pub day: u8,
    pub month: u8,
}

impl SessionRow {
    /// skip_1 implies skip_2 implies skip_3.
    pub fn skip_flags_nested(&self) -> bool {
        (!self.skip_1 || self.skip_2) && (!self.skip_2 || self.skip_3)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Session {
    session_id: String,
    rows: Vec<SessionRow>,
}

impl Session {
    /// Validates positions, declared length, context ranges and skip nesting.
    pub fn new(session_id: impl Into<String>, rows: Vec<SessionRow>) -> Result<Self> {
        let session_id = session_id.into();
        let malformed = |reason: String| Error::MalformedSession {
            session_id: session_id.clone(),
            reason,
        };
        let n = rows.len();
        if !(MIN_SESSION_LENGTH..=MAX_SESSION_LENGTH).contains(&n) {
            return Err(malformed(format!(
                "length {n} outside [{MIN_SESSION_LENGTH}, {MAX_SESSION_LENGTH}]"
            )));
        }
        for (i, row) in rows.iter().enumerate() {
            if row.session_id != session_id {
                return Err(malformed(format!(
                    "row {} belongs to session `{}`",
                    i + 1,
                    row.session_id
                )));
            }
            if row.position != i + 1 {
                return Err(malformed(format!(
                    "expected position {}, found {}",
                    i + 1,
                    row.position
                )));
            }
            if row.session_length != n {
                return Err(malformed(format!(
                    "declared length {} but {n} rows present",
                    row.session_length
                )));
            }
            if !row.skip_flags_nested() {
                return Err(Error::Integrity(format!(
                    "session `{session_id}` position {}: skip flags not nested (skip_1={}, skip_2={}, skip_3={})",
                    row.position, row.skip_1 as u8, row.skip_2 as u8, row.skip_3 as u8
                )));
            }
            if row.hour > 23 || !(1..=31).contains(&row.day) || !(1..=12).contains(&row.month) {
                return Err(Error::Integrity(format!(
                    "session `{session_id}` position {}: time context out of range (hour={}, day={}, month={})",
                    row.position, row.hour, row.day, row.month
                )));
            }
        }
        Ok(Self { session_id, rows })
    }

    pub fn session_id(&self) -> &str {
        &self.session_id
    }

    pub fn rows(&self) -> &[SessionRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn split(&self) -> SessionSplit<'_> {
        split_session(self)
    }
}

/// History (skip flags known) and target halves of a session.
#[derive(Debug, Clone, Copy)]
pub struct SessionSplit<'a> {
    pub history: &'a [SessionRow],
    pub targets: &'a [SessionRow],
}

impl SessionSplit<'_> {
    pub fn history_len(&self) -> usize {
        self.history.len()
    }
}

/// History receives `ceil(len / 2)` rows, targets the remaining `floor(len / 2)`.
pub fn split_session(session: &Session) -> SessionSplit<'_> {
    let h = session.len().div_ceil(2);
    let (history, targets) = session.rows.split_at(h);
    SessionSplit { history, targets }
}

/// Marks `round(fraction * n_sessions)` sessions, drawn without replacement
/// from a generator seeded with `seed`, as held out. At least one session
/// stays on each side when `n_sessions >= 2` and `0 < fraction < 1`.
pub fn holdout_mask(n_sessions: usize, fraction: f64, seed: u64) -> Result<Vec<bool>> {
    if !(0.0..1.0).contains(&fraction) {
        return Err(Error::Config(format!(
            "holdout fraction must be in [0, 1), got {fraction}"
        )));
    }
    let mut k = (fraction * n_sessions as f64).round() as usize;
    if fraction > 0.0 && n_sessions >= 2 {
        k = k.clamp(1, n_sessions - 1);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mask = vec![false; n_sessions];
    for i in index::sample(&mut rng, n_sessions, k) {
        mask[i] = true;
    }
    Ok(mask)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn holdout_mask_is_seeded_and_sized() {
        let a = holdout_mask(100, 0.2, 3).unwrap();
        assert_eq!(a.iter().filter(|&&h| h).count(), 20);
        assert_eq!(a, holdout_mask(100, 0.2, 3).unwrap());
        assert_ne!(a, holdout_mask(100, 0.2, 4).unwrap());
        assert_eq!(
            holdout_mask(3, 0.01, 0)
                .unwrap()
                .iter()
                .filter(|&&h| h)
                .count(),
            1
        );
        assert!(holdout_mask(10, 1.0, 0).is_err());
        assert!(holdout_mask(10, 0.0, 0).unwrap().iter().all(|&h| !h));
    }

    pub(crate) fn row(session: &str, position: usize, length: usize, skip_2: bool) -> SessionRow {
        SessionRow {
            session_id: session.to_string(),
            position,
            session_length: length,
            track_id: format!("t{position}"),
            skip_1: false,
            skip_2,
            skip_3: skip_2,
            premium: true,
            shuffle: false,
            hour: 12,
            day: 3,
            month: 7,
        }
    }

    fn session(length: usize) -> Session {
        let rows = (1..=length)
            .map(|p| row("s", p, length, p % 2 == 0))
            .collect();
        Session::new("s", rows).unwrap()
    }

    #[test]
    fn split_even_and_odd_lengths() {
        for (len, h, t) in [(20, 10, 10), (5, 3, 2), (2, 1, 1), (19, 10, 9)] {
            let s = session(len);
            let split = split_session(&s);
            assert_eq!(split.history.len(), h, "len {len}");
            assert_eq!(split.targets.len(), t, "len {len}");
            assert_eq!(split.targets[0].position, h + 1);
        }
    }

    #[test]
    fn split_sizes_sum_to_length() {
        for len in MIN_SESSION_LENGTH..=MAX_SESSION_LENGTH {
            let s = session(len);
            let split = s.split();
            assert_eq!(split.history.len() + split.targets.len(), len);
            assert!(split.targets.len() <= MAX_TARGETS);
            assert!(!split.history.is_empty());
            assert!(!split.targets.is_empty());
        }
    }

    #[test]
    fn session_rejects_gaps_and_bad_lengths() {
        let rows = vec![row("s", 1, 2, false), row("s", 3, 2, false)];
        assert!(matches!(
            Session::new("s", rows),
            Err(Error::MalformedSession { .. })
        ));
        let rows = vec![row("s", 1, 1, false)];
        assert!(matches!(
            Session::new("s", rows),
            Err(Error::MalformedSession { .. })
        ));
        let rows = vec![row("s", 1, 3, false), row("s", 2, 3, false)];
        assert!(matches!(
            Session::new("s", rows),
            Err(Error::MalformedSession { .. })
        ));
    }

    #[test]
    fn session_rejects_unnested_skips() {
        let mut bad = row("s", 2, 2, false);
        bad.skip_1 = true;
        let rows = vec![row("s", 1, 2, false), bad];
        assert!(matches!(Session::new("s", rows), Err(Error::Integrity(_))));
    }

    #[test]
    fn catalog_rejects_wrong_dimension_and_duplicates() {
        let mut cat = TrackCatalog::new(2);
        let t = TrackMetadata {
            track_id: "a".into(),
            duration_s: 100.0,
            release_year: 2000,
            scalar_features: [0.0; N_SCALAR_FEATURES],
            acoustic_vector: vec![0.0, 1.0],
        };
        cat.insert(t.clone()).unwrap();
        assert!(matches!(
            cat.insert(t.clone()),
            Err(Error::DuplicateKey { .. })
        ));
        let mut wrong = t;
        wrong.track_id = "b".into();
        wrong.acoustic_vector.push(2.0);
        assert!(matches!(cat.insert(wrong), Err(Error::Dimension { .. })));
    }
}
