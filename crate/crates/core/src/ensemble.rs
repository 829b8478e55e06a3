//! Blending of position-dependent model outputs with the last known user
//! action into per-track skip scores.
//!
//! Notation: for a session with `n` target tracks, `M[i][j]` is the output
//! of the model for position `j` on target track `i` (both 1-indexed) and
//! `s0` is the last history action.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use csv::WriterBuilder;

use crate::config::KeyValues;
use crate::datamodel::SessionRow;
use crate::error::{Error, Result};
use crate::modelbank::N_POSITIONS;

/// Identifier of one of the twelve combination strategies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SolutionId(u8);

impl SolutionId {
    pub const MIN: u8 = 1;
    pub const MAX: u8 = 12;

    pub fn new(id: u8) -> Result<Self> {
        if (Self::MIN..=Self::MAX).contains(&id) {
            Ok(Self(id))
        } else {
            Err(Error::Domain(format!(
                "solution id {id} outside [{}, {}]",
                Self::MIN,
                Self::MAX
            )))
        }
    }

    pub fn get(self) -> u8 {
        self.0
    }

    pub fn all() -> Vec<SolutionId> {
        (Self::MIN..=Self::MAX).map(SolutionId).collect()
    }

    /// Uses the 0.6/0.4 last-action encoding.
    pub fn uses_soft_last_action(self) -> bool {
        matches!(self.0, 3 | 5)
    }

    /// Depends on previous scores within the session.
    pub fn is_chained(self) -> bool {
        matches!(self.0, 8 | 11)
    }
}

impl fmt::Display for SolutionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Solution {}", self.0)
    }
}

impl FromStr for SolutionId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let id = s
            .trim()
            .parse::<u8>()
            .map_err(|_| Error::Domain(format!("invalid solution id {s:?}")))?;
        Self::new(id)
    }
}

/// Parses `"1,3,5-7"` style lists, preserving order and dropping repeats.
pub fn parse_solution_list(s: &str) -> Result<Vec<SolutionId>> {
    let mut out: Vec<SolutionId> = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let ids = match part.split_once('-').or_else(|| part.split_once("..")) {
            Some((a, b)) => {
                let a: SolutionId = a.parse()?;
                let b: SolutionId = b.trim_start_matches('.').parse()?;
                if a > b {
                    return Err(Error::Domain(format!("empty solution range {part:?}")));
                }
                (a.0..=b.0).map(SolutionId).collect()
            }
            None => vec![part.parse()?],
        };
        for id in ids {
            if !out.contains(&id) {
                out.push(id);
            }
        }
    }
    if out.is_empty() {
        return Err(Error::Domain("no solutions selected".into()));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LastActionVariant {
    /// 1 after a skip, 0 otherwise.
    Hard,
    /// 0.6 after a skip, 0.4 otherwise.
    Soft,
}

/// The last history row's skip_2 encoded as a score.
pub fn last_action(history: &[SessionRow], variant: LastActionVariant) -> Result<f64> {
    let last = history
        .last()
        .ok_or_else(|| Error::Precondition("session history is empty".into()))?;
    Ok(match (variant, last.skip_2) {
        (LastActionVariant::Hard, true) => 1.0,
        (LastActionVariant::Hard, false) => 0.0,
        (LastActionVariant::Soft, true) => 0.6,
        (LastActionVariant::Soft, false) => 0.4,
    })
}

/// Both encodings of the last action.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LastAction {
    pub hard: f64,
    pub soft: f64,
}

impl LastAction {
    pub fn from_history(history: &[SessionRow]) -> Result<Self> {
        Ok(Self {
            hard: last_action(history, LastActionVariant::Hard)?,
            soft: last_action(history, LastActionVariant::Soft)?,
        })
    }

    /// Builds both encodings from the hard value.
    pub fn from_skip(skipped: bool) -> Self {
        if skipped {
            Self {
                hard: 1.0,
                soft: 0.6,
            }
        } else {
            Self {
                hard: 0.0,
                soft: 0.4,
            }
        }
    }

    fn for_solution(&self, solution: SolutionId) -> f64 {
        if solution.uses_soft_last_action() {
            self.soft
        } else {
            self.hard
        }
    }
}

/// Tunable constants of the distance-weighted solutions (9, 10, 12).
///
/// Solution 9 weights model `j` for track `i` by `linear_offset - |i - j|`
/// and gives the last action weight `decay_scale * (11 - i) / 10`.
/// Solution 10 fixes the last-action weight at `fixed_last_action_weight`.
/// Solution 12 weights models by `exp_base^(-|i - j|)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleWeights {
    pub linear_offset: f64,
    pub decay_scale: f64,
    pub fixed_last_action_weight: f64,
    pub exp_base: f64,
}

impl Default for EnsembleWeights {
    fn default() -> Self {
        Self {
            linear_offset: 11.0,
            decay_scale: 0.5,
            fixed_last_action_weight: 0.2,
            exp_base: 2.0,
        }
    }
}

impl EnsembleWeights {
    pub fn validate(&self) -> Result<()> {
        // positive kernel for every distance in 0..=9
        if !(self.linear_offset > (N_POSITIONS - 1) as f64 && self.linear_offset.is_finite()) {
            return Err(Error::Config(format!(
                "linear_offset must exceed {}, got {}",
                N_POSITIONS - 1,
                self.linear_offset
            )));
        }
        if !(0.0..=1.0).contains(&self.decay_scale) {
            return Err(Error::Config("decay_scale must be in [0, 1]".into()));
        }
        if !(0.0..=1.0).contains(&self.fixed_last_action_weight) {
            return Err(Error::Config(
                "fixed_last_action_weight must be in [0, 1]".into(),
            ));
        }
        if !(self.exp_base >= 1.0 && self.exp_base.is_finite()) {
            return Err(Error::Config("exp_base must be finite and >= 1".into()));
        }
        Ok(())
    }

    pub fn with_overrides(mut self, kv: &KeyValues) -> Result<Self> {
        self.linear_offset = kv.get_or("ensemble.linear_offset", self.linear_offset)?;
        self.decay_scale = kv.get_or("ensemble.decay_scale", self.decay_scale)?;
        self.fixed_last_action_weight = kv.get_or(
            "ensemble.fixed_last_action_weight",
            self.fixed_last_action_weight,
        )?;
        self.exp_base = kv.get_or("ensemble.exp_base", self.exp_base)?;
        self.validate()?;
        Ok(self)
    }

    /// Normalized linear-distance model weights for 1-indexed track `i`.
    pub fn linear_model_weights(&self, i: usize) -> [f64; N_POSITIONS] {
        self.normalized(i, |d| self.linear_offset - d)
    }

    /// Normalized exponential-distance model weights for 1-indexed track `i`.
    pub fn exponential_model_weights(&self, i: usize) -> [f64; N_POSITIONS] {
        self.normalized(i, |d| self.exp_base.powf(-d))
    }

    fn normalized(&self, i: usize, kernel: impl Fn(f64) -> f64) -> [f64; N_POSITIONS] {
        let mut w = [0.0; N_POSITIONS];
        for (k, wk) in w.iter_mut().enumerate() {
            let j = k + 1;
            *wk = kernel((i as f64 - j as f64).abs());
        }
        let total: f64 = w.iter().sum();
        for wk in &mut w {
            *wk /= total;
        }
        w
    }

    /// Last-action weight of Solutions 9 and 12 for 1-indexed track `i`.
    pub fn decaying_last_action_weight(&self, i: usize) -> f64 {
        self.decay_scale * (N_POSITIONS + 1 - i) as f64 / N_POSITIONS as f64
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn weighted(w: &[f64; N_POSITIONS], row: &[f64; N_POSITIONS]) -> f64 {
    w.iter().zip(row).map(|(a, b)| a * b).sum()
}

/// Solution 4's `Q(t_i)`: mean of the first `i` model outputs on track `i`.
pub fn leading_model_mean(row: &[f64; N_POSITIONS], i: usize) -> f64 {
    mean(&row[..i])
}

fn validate_inputs(model_matrix: &[[f64; N_POSITIONS]], s0: LastAction) -> Result<()> {
    let n = model_matrix.len();
    if !(1..=N_POSITIONS).contains(&n) {
        return Err(Error::Precondition(format!(
            "session must have 1..={N_POSITIONS} target tracks, got {n}"
        )));
    }
    let in_unit = |v: f64| (0.0..=1.0).contains(&v);
    if !model_matrix.iter().flatten().all(|&v| in_unit(v)) {
        return Err(Error::Domain("model outputs must lie in [0, 1]".into()));
    }
    if !in_unit(s0.hard) || !in_unit(s0.soft) {
        return Err(Error::Domain("last action must lie in [0, 1]".into()));
    }
    Ok(())
}

/// Continuous scores `S(t_1..t_n)` for one session under `solution`,
/// clamped to [0, 1].
pub fn combine(
    solution: SolutionId,
    model_matrix: &[[f64; N_POSITIONS]],
    s0: LastAction,
    weights: &EnsembleWeights,
) -> Result<Vec<f64>> {
    let mut scores = combine_unclamped(solution, model_matrix, s0, weights)?;
    for s in &mut scores {
        *s = s.clamp(0.0, 1.0);
    }
    Ok(scores)
}

/// [`combine`] without the final clamp. Every formula is a convex
/// combination, so outputs leave [0, 1] only by rounding. Chained
/// solutions feed the unclamped previous score forward.
pub fn combine_unclamped(
    solution: SolutionId,
    model_matrix: &[[f64; N_POSITIONS]],
    s0: LastAction,
    weights: &EnsembleWeights,
) -> Result<Vec<f64>> {
    validate_inputs(model_matrix, s0)?;
    let n = model_matrix.len();
    let a = s0.for_solution(solution);
    let mut scores = Vec::with_capacity(n);
    let mut prev = a;
    for (k, row) in model_matrix.iter().enumerate() {
        let i = k + 1;
        let s = match solution.0 {
            1 => row[k],
            2 | 3 => 0.5 * row[k] + 0.5 * a,
            4 | 5 => 0.5 * leading_model_mean(row, i) + 0.5 * a,
            6 | 7 => {
                let q = mean(&row[..5]);
                let w = mean(&row[5..]);
                if i <= 5 {
                    0.4 * a + 0.4 * q + 0.2 * w
                } else if solution.0 == 6 {
                    0.2 * a + 0.5 * q + 0.3 * w
                } else {
                    0.4 * a + 0.3 * q + 0.3 * w
                }
            }
            8 => 0.5 * mean(&row[..n]) + 0.5 * prev,
            9 => {
                let alpha = weights.decaying_last_action_weight(i);
                alpha * a + (1.0 - alpha) * weighted(&weights.linear_model_weights(i), row)
            }
            10 => {
                let alpha = weights.fixed_last_action_weight;
                alpha * a + (1.0 - alpha) * weighted(&weights.linear_model_weights(i), row)
            }
            11 => 0.4 * prev + 0.6 * mean(&row[..n]),
            12 => {
                let alpha = weights.decaying_last_action_weight(i);
                alpha * a + (1.0 - alpha) * weighted(&weights.exponential_model_weights(i), row)
            }
            _ => unreachable!("SolutionId is range-checked"),
        };
        scores.push(s);
        prev = s;
    }
    Ok(scores)
}

/// `score >= threshold`.
pub fn binarize(scores: &[f64], threshold: f64) -> Vec<bool> {
    scores.iter().map(|&s| s >= threshold).collect()
}

pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct SessionPrediction {
    pub session_id: String,
    pub model_matrix: Vec<[f64; N_POSITIONS]>,
    pub s0: LastAction,
    pub scores: Vec<f64>,
    pub decisions: Vec<bool>,
}

impl SessionPrediction {
    pub fn new(
        session_id: impl Into<String>,
        solution: SolutionId,
        model_matrix: Vec<[f64; N_POSITIONS]>,
        s0: LastAction,
        weights: &EnsembleWeights,
    ) -> Result<Self> {
        let scores = combine(solution, &model_matrix, s0, weights)?;
        let decisions = binarize(&scores, DEFAULT_THRESHOLD);
        Ok(Self {
            session_id: session_id.into(),
            model_matrix,
            s0,
            scores,
            decisions,
        })
    }
}

/// Submission file: one line per session, the id followed by its 0/1
/// decisions concatenated, e.g. `s0001 0110`.
pub fn write_submission<W: Write>(mut output: W, predictions: &[SessionPrediction]) -> Result<()> {
    for p in predictions {
        let bits: String = p
            .decisions
            .iter()
            .map(|&d| if d { '1' } else { '0' })
            .collect();
        writeln!(output, "{} {bits}", p.session_id)?;
    }
    output.flush()?;
    Ok(())
}

/// Companion CSV with the continuous scores: session_id, position, score,
/// decision.
pub fn write_scores<W: Write>(output: W, predictions: &[SessionPrediction]) -> Result<()> {
    let mut w = WriterBuilder::new().from_writer(output);
    w.write_record(["session_id", "position", "score", "decision"])?;
    for p in predictions {
        for (k, (&s, &d)) in p.scores.iter().zip(&p.decisions).enumerate() {
            w.write_record([
                p.session_id.clone(),
                (k + 1).to_string(),
                s.to_string(),
                u8::from(d).to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sol(id: u8) -> SolutionId {
        SolutionId::new(id).unwrap()
    }

    fn run(id: u8, m: &[[f64; N_POSITIONS]], skipped: bool) -> Vec<f64> {
        combine(
            sol(id),
            m,
            LastAction::from_skip(skipped),
            &EnsembleWeights::default(),
        )
        .unwrap()
    }

    fn hist_row(skip_2: bool) -> SessionRow {
        SessionRow {
            session_id: "s".into(),
            position: 1,
            session_length: 2,
            track_id: "t".into(),
            skip_1: false,
            skip_2,
            skip_3: skip_2,
            premium: false,
            shuffle: false,
            hour: 0,
            day: 1,
            month: 1,
        }
    }

    #[test]
    fn last_action_encodings() {
        let h = [hist_row(false), hist_row(true)];
        assert_eq!(last_action(&h, LastActionVariant::Hard).unwrap(), 1.0);
        assert_eq!(last_action(&h, LastActionVariant::Soft).unwrap(), 0.6);
        assert_eq!(last_action(&h[..1], LastActionVariant::Soft).unwrap(), 0.4);
        assert_eq!(last_action(&h[..1], LastActionVariant::Hard).unwrap(), 0.0);
        assert!(matches!(
            last_action(&[], LastActionVariant::Hard),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn solution_1_uses_diagonal() {
        let mut m = [[0.1; N_POSITIONS]];
        m[0][0] = 0.7;
        assert_eq!(run(1, &m, true), vec![0.7]);
    }

    #[test]
    fn solution_2_blends_with_hard_action() {
        let m = [[0.8; N_POSITIONS]];
        assert_eq!(run(2, &m, true), vec![0.9]);
        // soft variant: 0.5 * 0.8 + 0.5 * 0.6
        assert!((run(3, &m, true)[0] - 0.7).abs() < 1e-15);
    }

    #[test]
    fn solution_6_and_7_branches() {
        // Q = 0.6 from models 1..5, W = 0.2 from models 6..10
        let mut row = [0.2; N_POSITIONS];
        row[..5].fill(0.6);
        let m = vec![row; 7];
        let s6 = run(6, &m, true);
        assert!((s6[2] - 0.68).abs() < 1e-12);
        // i = 6: 0.2 + 0.3 + 0.06
        assert!((s6[5] - 0.56).abs() < 1e-12);
        let s7 = run(7, &m, true);
        assert!((s7[2] - 0.68).abs() < 1e-12);
        // i = 6: 0.4 + 0.18 + 0.06
        assert!((s7[5] - 0.64).abs() < 1e-12);
    }

    #[test]
    fn solution_8_recurrence() {
        // n = 2; row means over models 1..2 are 0.4 then 0.6
        let mut m = [[0.9; N_POSITIONS]; 2];
        m[0][..2].copy_from_slice(&[0.3, 0.5]);
        m[1][..2].copy_from_slice(&[0.6, 0.6]);
        let s = run(8, &m, true);
        // S1 = 0.5 * 0.4 + 0.5 * 1 = 0.7; S2 = 0.5 * 0.6 + 0.5 * 0.7 = 0.65
        assert!((s[0] - 0.7).abs() < 1e-15);
        assert!((s[1] - 0.65).abs() < 1e-15);
    }

    #[test]
    fn solution_11_recurrence() {
        let m = [[0.5; N_POSITIONS]; 2];
        let s = run(11, &m, false);
        // 0.4 * 0 + 0.6 * 0.5 = 0.3; 0.4 * 0.3 + 0.3 = 0.42
        assert!((s[0] - 0.3).abs() < 1e-15);
        assert!((s[1] - 0.42).abs() < 1e-15);
    }

    #[test]
    fn solution_4_averages_leading_models() {
        let mut row = [0.0; N_POSITIONS];
        row[..3].copy_from_slice(&[0.3, 0.6, 0.9]);
        row[3..].fill(1.0);
        let m = [row; 3];
        let s = run(4, &m, false);
        assert!((s[0] - 0.15).abs() < 1e-15);
        assert!((s[2] - 0.3).abs() < 1e-15);
        assert_eq!(leading_model_mean(&row, 1), row[0]);
    }

    #[test]
    fn distance_weights_normalized_and_peaked() {
        let w = EnsembleWeights::default();
        for i in 1..=N_POSITIONS {
            for ws in [w.linear_model_weights(i), w.exponential_model_weights(i)] {
                assert!((ws.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                let peak = ws.iter().cloned().fold(f64::MIN, f64::max);
                assert_eq!(ws[i - 1], peak);
            }
        }
        // 11 - |1 - j| for j = 1..10 sums to 11 + 10 + ... + 2 = 65
        assert!((w.linear_model_weights(1)[0] - 11.0 / 65.0).abs() < 1e-15);
        assert!((w.decaying_last_action_weight(1) - 0.5).abs() < 1e-15);
        assert!((w.decaying_last_action_weight(10) - 0.05).abs() < 1e-15);
    }

    #[test]
    fn constant_inputs_are_fixed_points() {
        for id in 1..=12 {
            for c in [0.0, 1.0] {
                let m = vec![[c; N_POSITIONS]; 6];
                let s0 = LastAction { hard: c, soft: c };
                let s = combine(sol(id), &m, s0, &EnsembleWeights::default()).unwrap();
                assert!(s.iter().all(|&v| (v - c).abs() < 1e-12), "solution {id}");
            }
        }
    }

    #[test]
    fn invalid_inputs() {
        assert!(SolutionId::new(0).is_err());
        assert!(SolutionId::new(13).is_err());
        let s0 = LastAction::from_skip(true);
        let w = EnsembleWeights::default();
        assert!(combine(sol(1), &[], s0, &w).is_err());
        assert!(combine(sol(1), &[[0.5; N_POSITIONS]; 11], s0, &w).is_err());
        assert!(combine(sol(1), &[[1.5; N_POSITIONS]], s0, &w).is_err());
    }

    #[test]
    fn binarize_uses_inclusive_threshold() {
        assert_eq!(binarize(&[0.5], 0.5), vec![true]);
        assert_eq!(binarize(&[0.4999], 0.5), vec![false]);
        assert_eq!(binarize(&[0.1, 0.9], 0.5), vec![false, true]);
    }

    #[test]
    fn solution_list_parsing() {
        let ids: Vec<u8> = parse_solution_list("1..3, 9,2,12")
            .unwrap()
            .into_iter()
            .map(SolutionId::get)
            .collect();
        assert_eq!(ids, vec![1, 2, 3, 9, 12]);
        assert_eq!(parse_solution_list("1-12").unwrap().len(), 12);
        assert!(parse_solution_list("13").is_err());
        assert!(parse_solution_list("").is_err());
        assert!(parse_solution_list("5-2").is_err());
    }

    #[test]
    fn weight_overrides_validated() {
        let kv =
            KeyValues::parse("ensemble.exp_base=3\nensemble.fixed_last_action_weight=0.3").unwrap();
        let w = EnsembleWeights::default().with_overrides(&kv).unwrap();
        assert_eq!(w.exp_base, 3.0);
        assert_eq!(w.fixed_last_action_weight, 0.3);
        let kv = KeyValues::parse("ensemble.linear_offset=5").unwrap();
        assert!(EnsembleWeights::default().with_overrides(&kv).is_err());
    }

    #[test]
    fn submission_format() {
        let p = SessionPrediction::new(
            "s1",
            sol(1),
            vec![[0.9; N_POSITIONS], [0.1; N_POSITIONS]],
            LastAction::from_skip(false),
            &EnsembleWeights::default(),
        )
        .unwrap();
        let mut out = Vec::new();
        write_submission(&mut out, &[p]).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "s1 10\n");
    }
}
