//! One function per subcommand. Stages talk to each other only through
//! files in the work directory.

use std::collections::BTreeSet;
use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use log::info;
use skippred_core::datamodel::{
    generate_synthetic_dataset, holdout_mask, parse_session_log, parse_track_features,
    write_session_log, write_track_features,
};
use skippred_core::ensemble::{write_scores, write_submission};
use skippred_core::eval::{
    constant_baseline, last_action_baseline, predict_sessions, prepare_sessions,
    report_from_prepared, EvalSession,
};
use skippred_core::features::{extract_examples, read_feature_matrix, write_feature_matrix};
use skippred_core::modelbank::{
    grid_search, partition_by_position, train_bank, GridSearchReport, MANIFEST,
};
use skippred_core::{
    CorpusScore, Error, ModelBank, Result, Session, TrackCatalog, TrainingExample,
};

use crate::run_config::RunConfig;

pub const TRACKS: &str = "tracks.csv";
pub const SESSIONS: &str = "sessions.csv";
pub const FEATURES: &str = "features.csv";
pub const HOLDOUT: &str = "holdout.txt";
pub const GRID_REPORT: &str = "grid_report.csv";
pub const BANK_DIR: &str = "bank";
pub const SUBMISSION: &str = "submission.txt";
pub const SCORES: &str = "scores.csv";
pub const REPORT_TXT: &str = "report.txt";
pub const REPORT_CSV: &str = "report.csv";

fn with_path(path: &Path, e: io::Error) -> Error {
    Error::Io(io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| with_path(parent, e))?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| with_path(path, e))
}

/// Opens a stage input, turning absence into a pointer at the stage that
/// produces it.
fn open_artifact(path: &Path, stage: &str) -> Result<BufReader<File>> {
    if !path.exists() {
        return Err(Error::Precondition(format!(
            "{} not found; run {stage} first",
            path.display()
        )));
    }
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| with_path(path, e))
}

fn finish(mut w: BufWriter<File>) -> Result<()> {
    w.flush()?;
    Ok(())
}

fn load_corpus(config: &RunConfig) -> Result<(TrackCatalog, Vec<Session>)> {
    let catalog = parse_track_features(open_artifact(&config.tracks_path(), "synth")?)?;
    let sessions = parse_session_log(open_artifact(&config.sessions_path(), "synth")?, &catalog)?;
    Ok((catalog, sessions))
}

fn load_holdout(config: &RunConfig) -> Result<BTreeSet<String>> {
    let path = config.artifact(HOLDOUT);
    let text = io::read_to_string(open_artifact(&path, "extract")?)?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(String::from)
        .collect())
}

fn training_examples(config: &RunConfig) -> Result<Vec<TrainingExample>> {
    let holdout = load_holdout(config)?;
    let all = read_feature_matrix(open_artifact(&config.artifact(FEATURES), "extract")?)?;
    let examples: Vec<TrainingExample> = all
        .into_iter()
        .filter(|e| !holdout.contains(&e.session_id))
        .collect();
    if examples.is_empty() {
        return Err(Error::Precondition(
            "no training examples remain after removing held-out sessions".into(),
        ));
    }
    Ok(examples)
}

fn load_bank(config: &RunConfig) -> Result<ModelBank> {
    let dir = config.artifact(BANK_DIR);
    if !dir.join(MANIFEST).exists() {
        return Err(Error::Precondition(format!(
            "model bank not found in {}; run train first",
            dir.display()
        )));
    }
    ModelBank::load(&dir)
}

fn prepared_holdout(config: &RunConfig) -> Result<Vec<EvalSession>> {
    let bank = load_bank(config)?;
    let holdout = load_holdout(config)?;
    let (catalog, sessions) = load_corpus(config)?;
    let test: Vec<Session> = sessions
        .into_iter()
        .filter(|s| holdout.contains(s.session_id()))
        .collect();
    if test.is_empty() {
        return Err(Error::Precondition(
            "no held-out sessions; set holdout.fraction above 0 and run extract".into(),
        ));
    }
    prepare_sessions(&bank, &test, &catalog)
}

pub fn synth(config: &RunConfig) -> Result<()> {
    let synth = config.synth_config()?;
    let (catalog, sessions) = generate_synthetic_dataset(&synth, config.seed())?;
    let tracks_path = config.artifact(TRACKS);
    let sessions_path = config.artifact(SESSIONS);
    let mut w = create(&tracks_path)?;
    write_track_features(&mut w, &catalog)?;
    finish(w)?;
    let mut w = create(&sessions_path)?;
    write_session_log(&mut w, &sessions)?;
    finish(w)?;

    let rows: usize = sessions.iter().map(Session::len).sum();
    let skips: usize = sessions
        .iter()
        .flat_map(|s| s.rows())
        .filter(|r| r.skip_2)
        .count();
    println!(
        "synth: {} sessions, {rows} rows, {} tracks, skip prevalence {:.4}",
        sessions.len(),
        catalog.len(),
        skips as f64 / rows as f64
    );
    Ok(())
}

pub fn extract(config: &RunConfig) -> Result<()> {
    let (catalog, sessions) = load_corpus(config)?;
    let mask = holdout_mask(sessions.len(), config.holdout_fraction()?, config.seed())?;
    let examples = extract_examples(&sessions, &catalog)?;

    let mut w = create(&config.artifact(FEATURES))?;
    write_feature_matrix(&mut w, &examples)?;
    finish(w)?;
    let mut w = create(&config.artifact(HOLDOUT))?;
    for (s, _) in sessions.iter().zip(&mask).filter(|(_, &held)| held) {
        writeln!(w, "{}", s.session_id())?;
    }
    finish(w)?;

    let held = mask.iter().filter(|&&h| h).count();
    println!(
        "extract: {} examples from {} sessions ({held} held out)",
        examples.len(),
        sessions.len()
    );
    Ok(())
}

pub fn tune(config: &RunConfig) -> Result<()> {
    let examples = training_examples(config)?;
    let report = grid_search(
        &examples,
        config.tune_sample()?,
        &config.grid()?,
        &config.tune_params()?,
    )?;
    let mut w = create(&config.artifact(GRID_REPORT))?;
    report.write_csv(&mut w)?;
    finish(w)?;
    println!(
        "tune: {} train / {} validation sessions; {}",
        report.n_train_sessions,
        report.n_validation_sessions,
        report.summary()
    );
    Ok(())
}

pub fn train(config: &RunConfig) -> Result<()> {
    let mut params = config.train_params()?;
    let grid_path = config.artifact(GRID_REPORT);
    if config.use_tuned()? && grid_path.exists() {
        let report = GridSearchReport::read_csv(open_artifact(&grid_path, "tune")?, &params)?;
        let best = report.best_params();
        params.eta = best.eta;
        params.max_depth = best.max_depth;
        params.colsample_bytree = best.colsample_bytree;
        params.subsample = best.subsample;
        info!("using tuned parameters from {}", grid_path.display());
    }
    let examples = training_examples(config)?;
    let parts = partition_by_position(&examples)?;
    let bank = train_bank(&parts, &params)?;
    bank.save(&config.artifact(BANK_DIR))?;
    println!(
        "train: 10 models on {} examples (eta={} max_depth={} subsample={} colsample_bytree={} rounds={}), {} constant",
        examples.len(),
        params.eta,
        params.max_depth,
        params.subsample,
        params.colsample_bytree,
        params.num_boost_round,
        bank.warnings.len()
    );
    Ok(())
}

pub fn predict(config: &RunConfig) -> Result<()> {
    // the first listed solution produces the submission
    let solution = config.solutions("9")?[0];
    let prepared = prepared_holdout(config)?;
    let predictions = predict_sessions(&prepared, solution, &config.weights()?)?;
    let mut w = create(&config.artifact(SUBMISSION))?;
    write_submission(&mut w, &predictions)?;
    finish(w)?;
    let mut w = create(&config.artifact(SCORES))?;
    write_scores(&mut w, &predictions)?;
    finish(w)?;
    println!(
        "predict: {solution} on {} held-out sessions",
        predictions.len()
    );
    Ok(())
}

fn baseline_line(name: &str, score: &CorpusScore) -> String {
    format!(
        "{name}: MAA {:.3}, first prediction accuracy {:.3}",
        score.maa, score.fpa
    )
}

pub fn evaluate(config: &RunConfig) -> Result<()> {
    let solutions = config.solutions("1..12")?;
    let prepared = prepared_holdout(config)?;
    let report = report_from_prepared(&prepared, &solutions, &config.weights()?)?;

    let no_skip = constant_baseline(&prepared, false)?;
    let all_skip = constant_baseline(&prepared, true)?;
    let majority = if all_skip.maa > no_skip.maa {
        all_skip
    } else {
        no_skip
    };
    let mut text = report.to_table();
    text.push('\n');
    text.push_str(&baseline_line("Baseline (majority class)", &majority));
    text.push('\n');
    text.push_str(&baseline_line(
        "Baseline (repeat last action)",
        &last_action_baseline(&prepared)?,
    ));
    text.push('\n');
    text.push_str(&format!("Held-out sessions: {}\n", prepared.len()));

    let mut w = create(&config.artifact(REPORT_CSV))?;
    report.write_csv(&mut w)?;
    finish(w)?;
    let mut w = create(&config.artifact(REPORT_TXT))?;
    w.write_all(text.as_bytes())?;
    finish(w)?;
    print!("{text}");
    Ok(())
}

/// Synthesizes a corpus first unless `data.tracks` or `data.sessions`
/// point outside the work directory.
pub fn run_all(config: &RunConfig) -> Result<()> {
    let own_corpus = |p: PathBuf, name: &str| p == config.artifact(name);
    if own_corpus(config.tracks_path(), TRACKS) && own_corpus(config.sessions_path(), SESSIONS) {
        synth(config)?;
    }
    extract(config)?;
    tune(config)?;
    train(config)?;
    predict(config)?;
    evaluate(config)?;
    println!("run-all: artifacts in {}", config.workdir().display());
    Ok(())
}
