//! Seeded synthetic corpora with learnable skip behaviour.
//!
//! The skip_2 probability of a row follows a logistic rule
//!
//! ```text
//! logit p = bias + user + energy_coef * (energy - 0.5)
//!         + tempo_coef * tempo_z + prev_skip_coef * prev_skip_2
//!         + premium_coef * premium
//! ```
//!
//! where `user` is a per-session random effect, `tempo_z` is the track tempo
//! standardized over the catalog and `prev_skip_2` is the previous row's
//! skip_2 (0 for the first row). skip_1 and skip_3 are then drawn so that
//! skip_1 ⊂ skip_2 ⊂ skip_3.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{
    Session, SessionRow, TrackCatalog, TrackMetadata, ENERGY, MAX_SESSION_LENGTH,
    MIN_SESSION_LENGTH, N_SCALAR_FEATURES, TEMPO,
};
use crate::config::KeyValues;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub n_tracks: usize,
    pub n_sessions: usize,
    pub min_session_length: usize,
    pub max_session_length: usize,
    /// Probability that a session has exactly `max_session_length` rows;
    /// otherwise the length is uniform on `[min, max]`.
    pub full_length_prob: f64,
    pub acoustic_dim: usize,
    pub skip_bias: f64,
    pub energy_coef: f64,
    pub tempo_coef: f64,
    pub prev_skip_coef: f64,
    pub premium_coef: f64,
    pub user_effect_sd: f64,
    /// P(skip_1 | skip_2).
    pub very_brief_prob: f64,
    /// P(skip_3 | not skip_2).
    pub partial_play_prob: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_tracks: 500,
            n_sessions: 2000,
            min_session_length: MIN_SESSION_LENGTH,
            max_session_length: MAX_SESSION_LENGTH,
            full_length_prob: 0.5,
            acoustic_dim: super::DEFAULT_ACOUSTIC_DIM,
            skip_bias: -0.6,
            energy_coef: 3.0,
            tempo_coef: 0.5,
            prev_skip_coef: 2.0,
            premium_coef: 0.4,
            user_effect_sd: 0.8,
            very_brief_prob: 0.55,
            partial_play_prob: 0.25,
        }
    }
}

impl SynthConfig {
    /// Reads `synth.*` keys, falling back to defaults for absent ones.
    pub fn from_key_values(kv: &KeyValues) -> Result<Self> {
        let d = Self::default();
        let cfg = Self {
            n_tracks: kv.get_or("synth.n_tracks", d.n_tracks)?,
            n_sessions: kv.get_or("synth.n_sessions", d.n_sessions)?,
            min_session_length: kv.get_or("synth.min_session_length", d.min_session_length)?,
            max_session_length: kv.get_or("synth.max_session_length", d.max_session_length)?,
            full_length_prob: kv.get_or("synth.full_length_prob", d.full_length_prob)?,
            acoustic_dim: kv.get_or("synth.acoustic_dim", d.acoustic_dim)?,
            skip_bias: kv.get_or("synth.skip_bias", d.skip_bias)?,
            energy_coef: kv.get_or("synth.energy_coef", d.energy_coef)?,
            tempo_coef: kv.get_or("synth.tempo_coef", d.tempo_coef)?,
            prev_skip_coef: kv.get_or("synth.prev_skip_coef", d.prev_skip_coef)?,
            premium_coef: kv.get_or("synth.premium_coef", d.premium_coef)?,
            user_effect_sd: kv.get_or("synth.user_effect_sd", d.user_effect_sd)?,
            very_brief_prob: kv.get_or("synth.very_brief_prob", d.very_brief_prob)?,
            partial_play_prob: kv.get_or("synth.partial_play_prob", d.partial_play_prob)?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.n_tracks == 0 {
            return fail("n_tracks must be positive".into());
        }
        if self.n_sessions == 0 {
            return fail("n_sessions must be positive".into());
        }
        if self.min_session_length < MIN_SESSION_LENGTH
            || self.max_session_length > MAX_SESSION_LENGTH
            || self.min_session_length > self.max_session_length
        {
            return fail(format!(
                "session lengths [{}, {}] must lie within [{MIN_SESSION_LENGTH}, {MAX_SESSION_LENGTH}]",
                self.min_session_length, self.max_session_length
            ));
        }
        if self.acoustic_dim == 0 {
            return fail("acoustic_dim must be positive".into());
        }
        for (name, p) in [
            ("full_length_prob", self.full_length_prob),
            ("very_brief_prob", self.very_brief_prob),
            ("partial_play_prob", self.partial_play_prob),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return fail(format!("{name} must be in [0, 1], got {p}"));
            }
        }
        let coefs = [
            self.skip_bias,
            self.energy_coef,
            self.tempo_coef,
            self.prev_skip_coef,
            self.premium_coef,
        ];
        if coefs.iter().any(|c| !c.is_finite()) {
            return fail("behaviour coefficients must be finite".into());
        }
        if !(self.user_effect_sd.is_finite() && self.user_effect_sd >= 0.0) {
            return fail("user_effect_sd must be finite and non-negative".into());
        }
        Ok(())
    }
}

fn round6(x: f64) -> f64 {
    (x * 1e6).round() / 1e6
}

/// Scalar feature ranges `(low, high)` for uniform draws; tempo is drawn
/// from a clamped normal instead.
const SCALAR_RANGES: [(f64, f64); N_SCALAR_FEATURES] = [
    (0.0, 100.0), // popularity
    (0.0, 1.0),   // acousticness
    (0.0, 1.0),   // beat_strength
    (0.0, 1.0),   // bounciness
    (0.0, 1.0),   // danceability
    (2.0, 30.0),  // dyn_range_mean
    (0.0, 1.0),   // energy
    (0.7, 1.0),   // flatness
    (0.0, 1.0),   // instrumentalness
    (0.0, 1.0),   // liveness
    (-30.0, 0.0), // loudness
    (0.0, 1.0),   // mechanism
    (50.0, 220.0),
    (0.0, 1.0), // organism
    (0.0, 0.6), // speechiness
    (0.0, 1.0), // valence
];

fn generate_tracks(cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> Result<TrackCatalog> {
    let tempo = Normal::<f64>::new(120.0, 25.0).expect("valid normal");
    let unit = Normal::<f64>::new(0.0, 1.0).expect("valid normal");
    let mut catalog = TrackCatalog::new(cfg.acoustic_dim);
    for i in 0..cfg.n_tracks {
        let mut scalar_features = [0.0; N_SCALAR_FEATURES];
        for (k, &(lo, hi)) in SCALAR_RANGES.iter().enumerate() {
            let v = if k == TEMPO {
                tempo.sample(rng).clamp(lo, hi)
            } else {
                rng.random_range(lo..hi)
            };
            scalar_features[k] = round6(v);
        }
        let acoustic_vector = (0..cfg.acoustic_dim)
            .map(|_| round6(unit.sample(rng)))
            .collect();
        catalog.insert(TrackMetadata {
            track_id: format!("t{i:06}"),
            duration_s: round6(rng.random_range(90.0..420.0)),
            release_year: rng.random_range(1960..=2018),
            scalar_features,
            acoustic_vector,
        })?;
    }
    Ok(catalog)
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Deterministic for a fixed `(config, seed)`.
pub fn generate_synthetic_dataset(
    config: &SynthConfig,
    seed: u64,
) -> Result<(TrackCatalog, Vec<Session>)> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let catalog = generate_tracks(config, &mut rng)?;
    let tracks: Vec<&TrackMetadata> = catalog.iter().collect();

    let n = tracks.len() as f64;
    let tempo_mean = tracks.iter().map(|t| t.scalar_features[TEMPO]).sum::<f64>() / n;
    let tempo_var = tracks
        .iter()
        .map(|t| (t.scalar_features[TEMPO] - tempo_mean).powi(2))
        .sum::<f64>()
        / n;
    let tempo_sd = if tempo_var > 0.0 {
        tempo_var.sqrt()
    } else {
        1.0
    };

    let user = Normal::new(0.0, config.user_effect_sd.max(f64::MIN_POSITIVE))
        .map_err(|e| Error::Config(e.to_string()))?;

    let mut sessions = Vec::with_capacity(config.n_sessions);
    for s in 0..config.n_sessions {
        let session_id = format!("s{s:07}");
        let length = if rng.random_bool(config.full_length_prob) {
            config.max_session_length
        } else {
            rng.random_range(config.min_session_length..=config.max_session_length)
        };
        let premium = rng.random_bool(0.75);
        let shuffle = rng.random_bool(0.35);
        let hour: u8 = rng.random_range(0..24);
        // Days capped at 28 so every (day, month) pair is a real date.
        let day: u8 = rng.random_range(1..=28);
        let month: u8 = rng.random_range(1..=12);
        let user_effect = if config.user_effect_sd > 0.0 {
            user.sample(&mut rng)
        } else {
            0.0
        };

        let mut rows = Vec::with_capacity(length);
        let mut prev_skip = false;
        for position in 1..=length {
            let track = tracks.choose(&mut rng).expect("catalog non-empty");
            let energy = track.scalar_features[ENERGY];
            let tempo_z = (track.scalar_features[TEMPO] - tempo_mean) / tempo_sd;
            let logit = config.skip_bias
                + user_effect
                + config.energy_coef * (energy - 0.5)
                + config.tempo_coef * tempo_z
                + config.prev_skip_coef * f64::from(u8::from(prev_skip))
                + config.premium_coef * f64::from(u8::from(premium));
            let skip_2 = rng.random_bool(sigmoid(logit));
            let skip_1 = skip_2 && rng.random_bool(config.very_brief_prob);
            let skip_3 = skip_2 || rng.random_bool(config.partial_play_prob);
            rows.push(SessionRow {
                session_id: session_id.clone(),
                position,
                session_length: length,
                track_id: track.track_id.clone(),
                skip_1,
                skip_2,
                skip_3,
                premium,
                shuffle,
                hour,
                day,
                month,
            });
            prev_skip = skip_2;
        }
        sessions.push(Session::new(session_id, rows)?);
    }
    Ok((catalog, sessions))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datamodel::{write_session_log, write_track_features};

    fn small() -> SynthConfig {
        SynthConfig {
            n_tracks: 50,
            n_sessions: 100,
            ..SynthConfig::default()
        }
    }

    fn serialize(cat: &TrackCatalog, sessions: &[Session]) -> (Vec<u8>, Vec<u8>) {
        let mut t = Vec::new();
        let mut s = Vec::new();
        write_track_features(&mut t, cat).unwrap();
        write_session_log(&mut s, sessions).unwrap();
        (t, s)
    }

    #[test]
    fn same_seed_is_byte_identical() {
        let (c1, s1) = generate_synthetic_dataset(&small(), 42).unwrap();
        let (c2, s2) = generate_synthetic_dataset(&small(), 42).unwrap();
        assert_eq!(serialize(&c1, &s1), serialize(&c2, &s2));
        let (c3, s3) = generate_synthetic_dataset(&small(), 43).unwrap();
        assert_ne!(serialize(&c1, &s1), serialize(&c3, &s3));
    }

    #[test]
    fn rejects_out_of_bound_lengths() {
        let cfg = SynthConfig {
            max_session_length: 25,
            ..small()
        };
        assert!(matches!(
            generate_synthetic_dataset(&cfg, 1),
            Err(Error::Config(_))
        ));
        let cfg = SynthConfig {
            n_sessions: 0,
            ..small()
        };
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        let cfg = SynthConfig {
            min_session_length: 1,
            ..small()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn generated_rows_respect_invariants() {
        let (cat, sessions) = generate_synthetic_dataset(&small(), 7).unwrap();
        assert_eq!(cat.len(), 50);
        assert_eq!(sessions.len(), 100);
        for s in &sessions {
            assert!((2..=20).contains(&s.len()));
            for (i, r) in s.rows().iter().enumerate() {
                assert_eq!(r.position, i + 1);
                assert!(r.skip_flags_nested());
                assert!(cat.get(&r.track_id).is_some());
            }
        }
    }

    #[test]
    fn energy_coefficient_induces_positive_correlation() {
        let cfg = SynthConfig {
            n_tracks: 200,
            n_sessions: 400,
            energy_coef: 6.0,
            ..SynthConfig::default()
        };
        let (cat, sessions) = generate_synthetic_dataset(&cfg, 3).unwrap();
        let pairs: Vec<(f64, f64)> = sessions
            .iter()
            .flat_map(|s| s.rows())
            .map(|r| {
                let e = cat.get(&r.track_id).unwrap().scalar_features[ENERGY];
                (e, if r.skip_2 { 1.0 } else { 0.0 })
            })
            .collect();
        let n = pairs.len() as f64;
        let (mx, my) = pairs
            .iter()
            .fold((0.0, 0.0), |(a, b), (x, y)| (a + x / n, b + y / n));
        let cov: f64 = pairs.iter().map(|(x, y)| (x - mx) * (y - my)).sum::<f64>() / n;
        let sx = (pairs.iter().map(|(x, _)| (x - mx).powi(2)).sum::<f64>() / n).sqrt();
        let sy = (pairs.iter().map(|(_, y)| (y - my).powi(2)).sum::<f64>() / n).sqrt();
        let corr = cov / (sx * sy);
        assert!(corr > 0.1, "correlation {corr}");
    }

    #[test]
    fn key_values_override_defaults() {
        let kv = KeyValues::parse("synth.n_sessions=7\nsynth.acoustic_dim=3").unwrap();
        let cfg = SynthConfig::from_key_values(&kv).unwrap();
        assert_eq!(cfg.n_sessions, 7);
        assert_eq!(cfg.acoustic_dim, 3);
        assert_eq!(cfg.n_tracks, SynthConfig::default().n_tracks);
        let kv = KeyValues::parse("synth.max_session_length=25").unwrap();
        assert!(SynthConfig::from_key_values(&kv).is_err());
    }
}
