//! Challenge metrics: per-session average accuracy (AA), mean average
//! accuracy (MAA) over sessions, first prediction accuracy (FPA), and the
//! solution comparison report.

use std::cmp::Ordering;
use std::fmt::Write as _;
use std::io::Write;

use csv::WriterBuilder;
use rayon::prelude::*;

use crate::datamodel::{Session, TrackCatalog};
use crate::ensemble::{
    binarize, combine, EnsembleWeights, LastAction, SessionPrediction, SolutionId,
    DEFAULT_THRESHOLD,
};
use crate::error::{Error, Result};
use crate::features::session_examples;
use crate::modelbank::{PositionPredictor, N_POSITIONS};

/// `AA = (1/n) * sum_i A(i) * L(i)` where `L(i)` marks a correct prediction
/// at position `i` and `A(i)` is the accuracy over positions `1..=i`.
pub fn average_accuracy(decisions: &[bool], truth: &[bool]) -> Result<f64> {
    if decisions.len() != truth.len() {
        return Err(Error::Dimension {
            expected: truth.len(),
            actual: decisions.len(),
        });
    }
    if truth.is_empty() {
        return Err(Error::Precondition("no predictions to score".into()));
    }
    let mut correct = 0usize;
    let mut total = 0.0;
    for (i, (d, t)) in decisions.iter().zip(truth).enumerate() {
        if d == t {
            correct += 1;
            total += correct as f64 / (i + 1) as f64;
        }
    }
    Ok(total / truth.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionScore {
    pub session_id: String,
    pub aa: f64,
    pub first_correct: bool,
}

pub fn score_session(session_id: &str, decisions: &[bool], truth: &[bool]) -> Result<SessionScore> {
    Ok(SessionScore {
        session_id: session_id.to_string(),
        aa: average_accuracy(decisions, truth)?,
        first_correct: decisions[0] == truth[0],
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorpusScore {
    pub maa: f64,
    pub fpa: f64,
    pub n_sessions: usize,
}

/// Unweighted means over sessions, summed in input order.
pub fn aggregate(scores: &[SessionScore]) -> Result<CorpusScore> {
    if scores.is_empty() {
        return Err(Error::Precondition("no sessions to score".into()));
    }
    let n = scores.len() as f64;
    let maa = scores.iter().map(|s| s.aa).sum::<f64>() / n;
    let fpa = scores.iter().filter(|s| s.first_correct).count() as f64 / n;
    Ok(CorpusScore {
        maa,
        fpa,
        n_sessions: scores.len(),
    })
}

/// MAA and FPA over `(decisions, truth)` pairs, one per session.
pub fn corpus_scores<'a, I>(sessions: I) -> Result<CorpusScore>
where
    I: IntoIterator<Item = (&'a [bool], &'a [bool])>,
{
    let scores = sessions
        .into_iter()
        .map(|(d, t)| score_session("", d, t))
        .collect::<Result<Vec<_>>>()?;
    aggregate(&scores)
}

/// Leaderboard order: higher MAA first, exact MAA ties broken by higher
/// FPA. `Less` means `lhs` ranks above `rhs`.
pub fn compare(lhs: &CorpusScore, rhs: &CorpusScore) -> Ordering {
    rhs.maa
        .total_cmp(&lhs.maa)
        .then_with(|| rhs.fpa.total_cmp(&lhs.fpa))
}

/// Everything needed to score any solution on one held-out session.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalSession {
    pub session_id: String,
    pub model_matrix: Vec<[f64; N_POSITIONS]>,
    pub last_action: LastAction,
    pub truth: Vec<bool>,
}

/// Runs the bank over every target track of every session.
pub fn prepare_sessions<P: PositionPredictor + Sync>(
    predictor: &P,
    sessions: &[Session],
    catalog: &TrackCatalog,
) -> Result<Vec<EvalSession>> {
    sessions
        .par_iter()
        .map(|session| {
            let examples = session_examples(session, catalog)?;
            let model_matrix = examples
                .iter()
                .map(|e| predictor.predict_positions(e.features.as_slice()))
                .collect::<Result<Vec<_>>>()?;
            Ok(EvalSession {
                session_id: session.session_id().to_string(),
                model_matrix,
                last_action: LastAction::from_history(session.split().history)?,
                truth: examples.iter().map(|e| e.label).collect(),
            })
        })
        .collect()
}

pub fn predict_sessions(
    prepared: &[EvalSession],
    solution: SolutionId,
    weights: &EnsembleWeights,
) -> Result<Vec<SessionPrediction>> {
    prepared
        .par_iter()
        .map(|s| {
            SessionPrediction::new(
                s.session_id.clone(),
                solution,
                s.model_matrix.clone(),
                s.last_action,
                weights,
            )
        })
        .collect()
}

fn score_solution(
    prepared: &[EvalSession],
    solution: SolutionId,
    weights: &EnsembleWeights,
) -> Result<CorpusScore> {
    let scores = prepared
        .par_iter()
        .map(|s| {
            let scores = combine(solution, &s.model_matrix, s.last_action, weights)?;
            let decisions = binarize(&scores, DEFAULT_THRESHOLD);
            score_session(&s.session_id, &decisions, &s.truth)
        })
        .collect::<Result<Vec<_>>>()?;
    aggregate(&scores)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub label: String,
    pub score: CorpusScore,
}

/// Rows sorted by MAA ascending, best last.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionsReport {
    pub rows: Vec<ReportRow>,
}

impl SolutionsReport {
    pub fn new(mut rows: Vec<ReportRow>) -> Self {
        // stable: equal scores keep input order
        rows.sort_by(|a, b| compare(&b.score, &a.score));
        Self { rows }
    }

    pub fn best(&self) -> Option<&ReportRow> {
        self.rows.last()
    }

    pub fn get(&self, label: &str) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.label == label)
    }

    pub fn write_csv<W: Write>(&self, output: W) -> Result<()> {
        let mut w = WriterBuilder::new().from_writer(output);
        w.write_record(["solution", "maa", "first_prediction_accuracy"])?;
        for r in &self.rows {
            w.write_record([
                r.label.clone(),
                r.score.maa.to_string(),
                r.score.fpa.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_table(&self) -> String {
        let width = self
            .rows
            .iter()
            .map(|r| r.label.len())
            .chain(["Solution".len()])
            .max()
            .unwrap_or(0);
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<width$}  {:>6}  {:>25}",
            "Solution", "MAA", "First Prediction Accuracy"
        );
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{:<width$}  {:>6.3}  {:>25.3}",
                r.label, r.score.maa, r.score.fpa
            );
        }
        s
    }
}

/// Scores each solution on prepared sessions.
pub fn report_from_prepared(
    prepared: &[EvalSession],
    solutions: &[SolutionId],
    weights: &EnsembleWeights,
) -> Result<SolutionsReport> {
    let rows = solutions
        .iter()
        .map(|&id| {
            Ok(ReportRow {
                label: id.to_string(),
                score: score_solution(prepared, id, weights)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SolutionsReport::new(rows))
}

/// Full predict-and-score pipeline for each listed solution.
pub fn solutions_report<P: PositionPredictor + Sync>(
    predictor: &P,
    sessions: &[Session],
    catalog: &TrackCatalog,
    solutions: &[SolutionId],
    weights: &EnsembleWeights,
) -> Result<SolutionsReport> {
    let prepared = prepare_sessions(predictor, sessions, catalog)?;
    report_from_prepared(&prepared, solutions, weights)
}

/// Predicts `skip` for every target track.
pub fn constant_baseline(prepared: &[EvalSession], skip: bool) -> Result<CorpusScore> {
    let scores = prepared
        .iter()
        .map(|s| score_session(&s.session_id, &vec![skip; s.truth.len()], &s.truth))
        .collect::<Result<Vec<_>>>()?;
    aggregate(&scores)
}

/// Repeats the last history action for every target track.
pub fn last_action_baseline(prepared: &[EvalSession]) -> Result<CorpusScore> {
    let scores = prepared
        .iter()
        .map(|s| {
            let d = vec![s.last_action.hard >= 0.5; s.truth.len()];
            score_session(&s.session_id, &d, &s.truth)
        })
        .collect::<Result<Vec<_>>>()?;
    aggregate(&scores)
}
