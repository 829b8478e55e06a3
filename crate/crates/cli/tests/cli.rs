use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn skippred(workdir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_skippred"))
        .args(args)
        .arg("--workdir")
        .arg(workdir)
        .output()
        .expect("binary runs")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("run.conf");
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = skippred(dir.path(), &["frobnicate"]);
    assert_eq!(out.status.code(), Some(1));
    let out = skippred(dir.path(), &["synth", "--seed", "minus-one"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn help_exits_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let out = skippred(dir.path(), &["--help"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("run-all"));
}

#[test]
fn zero_sessions_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "synth.n_sessions = 0\n");
    let out = skippred(dir.path(), &["synth", "--config", &config]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("n_sessions"), "{}", stderr(&out));
}

#[test]
fn synth_prints_summary_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "synth.n_sessions = 50\nsynth.n_tracks = 40\n");
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let out = skippred(&a, &["synth", "--config", &config, "--seed", "4"]);
    assert!(out.status.success());
    let summary = String::from_utf8_lossy(&out.stdout);
    assert!(summary.contains("50 sessions") && summary.contains("skip prevalence"));
    assert!(skippred(&b, &["synth", "--config", &config, "--seed", "4"])
        .status
        .success());
    for f in ["tracks.csv", "sessions.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap());
    }
}

#[test]
fn stages_name_their_missing_predecessor() {
    let dir = tempfile::tempdir().unwrap();
    let out = skippred(dir.path(), &["extract"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("run synth first"), "{}", stderr(&out));

    let config = write_config(dir.path(), "synth.n_sessions = 40\nsynth.n_tracks = 30\n");
    assert!(skippred(dir.path(), &["synth", "--config", &config])
        .status
        .success());
    let out = skippred(dir.path(), &["train", "--config", &config]);
    assert_eq!(out.status.code(), Some(2));
    assert!(
        stderr(&out).contains("run extract first"),
        "{}",
        stderr(&out)
    );

    assert!(skippred(dir.path(), &["extract", "--config", &config])
        .status
        .success());
    let out = skippred(dir.path(), &["predict", "--config", &config]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("run train first"), "{}", stderr(&out));
}

#[test]
fn extract_writes_one_row_per_target() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "synth.n_sessions = 100\nsynth.n_tracks = 50\nsynth.min_session_length = 20\nsynth.max_session_length = 20\n",
    );
    assert!(skippred(dir.path(), &["synth", "--config", &config])
        .status
        .success());
    assert!(skippred(dir.path(), &["extract", "--config", &config])
        .status
        .success());
    let text = fs::read_to_string(dir.path().join("features.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap().split(',').count(), 66);
    assert_eq!(lines.count(), 1000);
    let held = fs::read_to_string(dir.path().join("holdout.txt")).unwrap();
    assert_eq!(held.lines().count(), 20);
}

const SCALARS: [&str; 16] = [
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

/// The five-track fixture: history A (skipped), B (listened), C (skipped),
/// targets D and E. Scalar feature `f` of a track is `base + f`.
fn write_fixture(dir: &Path) {
    let mut tracks = format!(
        "track_id,duration,release_year,{},acoustic_vector_0,acoustic_vector_1\n",
        SCALARS.join(",")
    );
    for (id, base, duration, year, a0, a1) in [
        ("A", 0.0, 100.0, 1990, 1.0, 0.0),
        ("B", 50.0, 200.0, 1980, 0.0, 1.0),
        ("C", 20.0, 320.0, 2010, 1.0, 1.0),
        ("D", 30.0, 260.0, 2005, 2.0, 3.0),
        ("E", 40.0, 180.0, 2000, 0.5, 0.5),
    ] {
        let scalars: Vec<String> = (0..16).map(|f| (base + f64::from(f)).to_string()).collect();
        tracks.push_str(&format!(
            "{id},{duration},{year},{},{a0},{a1}\n",
            scalars.join(",")
        ));
    }
    fs::write(dir.join("tracks.csv"), tracks).unwrap();
    let sessions = "session_id,session_position,session_length,track_id,skip_1,skip_2,skip_3,premium,shuffle,hour_of_day,day,month\n\
x1,1,5,A,1,1,1,0,0,8,3,6\n\
x1,2,5,B,0,0,0,0,1,9,3,6\n\
x1,3,5,C,0,1,1,1,1,14,17,7\n\
x1,4,5,D,0,0,0,1,1,14,17,7\n\
x1,5,5,E,1,1,1,1,1,15,17,7\n";
    fs::write(dir.join("sessions.csv"), sessions).unwrap();
}

#[test]
fn extract_matches_hand_computed_fixture() {
    let dir = tempfile::tempdir().unwrap();
    write_fixture(dir.path());
    let config = write_config(dir.path(), "holdout.fraction = 0\n");
    let out = skippred(dir.path(), &["extract", "--config", &config]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = fs::read_to_string(dir.path().join("features.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 3);
    let d: Vec<&str> = lines[1].split(',').collect();
    let value = |k: usize| d[k].parse::<f64>().unwrap();

    let mut want = vec![0.0; 63];
    for f in 0..16 {
        want[f] = 30.0 + f as f64;
        want[16 + f] = 10.0 + f as f64;
        want[32 + f] = 50.0 + f as f64;
    }
    want[48..55].copy_from_slice(&[1.0, 1.0, 14.0, 17.0, 7.0, 1.0 / 3.0, 2.0 / 3.0]);
    want[55..63].copy_from_slice(&[50.0, 5.0, 20.0, 60.0, 25.0, -20.0, 3.5, 3.0]);
    for (k, w) in want.iter().enumerate() {
        assert!((value(k) - w).abs() < 1e-12, "column {k}: {} vs {w}", d[k]);
    }
    // label, session id, target position
    assert_eq!(&d[63..], ["0", "x1", "1"]);
}

#[test]
fn evaluate_reports_all_twelve_solutions() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "synth.n_sessions = 300\nsynth.n_tracks = 80\ntrain.num_boost_round = 20\ntrain.max_depth = 4\ntune.sample = 0.3\ntune.num_boost_round = 5\ngrid.eta = 0.3\ngrid.max_depth = 3,4\ngrid.colsample_bytree = 1.0\ngrid.subsample = 1.0\n",
    );
    let out = skippred(
        dir.path(),
        &["run-all", "--config", &config, "--solutions", "1..12"],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let csv = fs::read_to_string(dir.path().join("report.csv")).unwrap();
    assert_eq!(
        csv.lines().next().unwrap(),
        "solution,maa,first_prediction_accuracy"
    );
    assert_eq!(csv.lines().count(), 13);
    let grid = fs::read_to_string(dir.path().join("grid_report.csv")).unwrap();
    assert_eq!(grid.lines().count(), 3);
    let table = fs::read_to_string(dir.path().join("report.txt")).unwrap();
    assert!(table.contains("Solution 12") && table.contains("majority class"));

    // submission: one line per held-out session with 0/1 decisions
    let held = fs::read_to_string(dir.path().join("holdout.txt")).unwrap();
    let submission = fs::read_to_string(dir.path().join("submission.txt")).unwrap();
    assert_eq!(submission.lines().count(), held.lines().count());
    for line in submission.lines() {
        let (_, bits) = line.split_once(' ').unwrap();
        assert!(!bits.is_empty() && bits.len() <= 10 && bits.chars().all(|c| c == '0' || c == '1'));
    }

    // rerunning in place reproduces the artifacts
    let before = fs::read(dir.path().join("bank/model_03.txt")).unwrap();
    let out = skippred(
        dir.path(),
        &["run-all", "--config", &config, "--solutions", "1..12"],
    );
    assert!(out.status.success());
    assert_eq!(
        before,
        fs::read(dir.path().join("bank/model_03.txt")).unwrap()
    );
    assert_eq!(
        csv,
        fs::read_to_string(dir.path().join("report.csv")).unwrap()
    );
}
