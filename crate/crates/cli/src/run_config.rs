use std::fs;
use std::path::{Path, PathBuf};

use skippred_core::datamodel::SynthConfig;
use skippred_core::ensemble::parse_solution_list;
use skippred_core::modelbank::ParamGrid;
use skippred_core::{EnsembleWeights, Error, KeyValues, Result, SolutionId, TrainParams};

const DEFAULT_WORKDIR: &str = "skippred-work";
const DEFAULT_HOLDOUT_FRACTION: f64 = 0.2;
const DEFAULT_TUNE_SAMPLE: f64 = 0.05;
const DEFAULT_TUNE_ROUNDS: usize = 50;

/// Settings for one invocation: the config file with command-line flags
/// applied on top.
#[derive(Debug, Clone)]
pub struct RunConfig {
    kv: KeyValues,
    workdir: PathBuf,
    seed: u64,
}

impl RunConfig {
    pub fn load(
        path: Option<&Path>,
        seed: Option<u64>,
        workdir: Option<PathBuf>,
        solutions: Option<String>,
        sample: Option<f64>,
    ) -> Result<Self> {
        let mut kv = match path {
            Some(p) => {
                let text = fs::read_to_string(p).map_err(|e| {
                    Error::Config(format!("cannot read config {}: {e}", p.display()))
                })?;
                KeyValues::parse(&text)?
            }
            None => KeyValues::new(),
        };
        if let Some(s) = seed {
            kv.set("seed", s);
        }
        if let Some(w) = &workdir {
            kv.set("workdir", w.display());
        }
        if let Some(s) = solutions {
            kv.set("solutions", s);
        }
        if let Some(s) = sample {
            kv.set("tune.sample", s);
        }
        let seed = kv.get_or("seed", 0u64)?;
        let workdir = PathBuf::from(kv.get_str("workdir").unwrap_or(DEFAULT_WORKDIR));
        Ok(Self { kv, workdir, seed })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn workdir(&self) -> &Path {
        &self.workdir
    }

    fn input(&self, key: &str, default: &str) -> PathBuf {
        self.kv
            .get_str(key)
            .map(PathBuf::from)
            .unwrap_or_else(|| self.workdir.join(default))
    }

    pub fn tracks_path(&self) -> PathBuf {
        self.input("data.tracks", "tracks.csv")
    }

    pub fn sessions_path(&self) -> PathBuf {
        self.input("data.sessions", "sessions.csv")
    }

    pub fn artifact(&self, name: &str) -> PathBuf {
        self.workdir.join(name)
    }

    pub fn synth_config(&self) -> Result<SynthConfig> {
        SynthConfig::from_key_values(&self.kv)
    }

    pub fn holdout_fraction(&self) -> Result<f64> {
        self.kv.get_or("holdout.fraction", DEFAULT_HOLDOUT_FRACTION)
    }

    /// Booster parameters for the model bank: defaults, then `train.*`.
    pub fn train_params(&self) -> Result<TrainParams> {
        TrainParams {
            seed: self.seed,
            ..TrainParams::default()
        }
        .with_overrides(&self.kv, "train.")
    }

    /// Whether `train` should take eta, depth and sampling from the grid
    /// report when one exists.
    pub fn use_tuned(&self) -> Result<bool> {
        self.kv.get_or("train.use_tuned", true)
    }

    /// Base parameters for the grid: the training parameters with the
    /// cheaper `tune.num_boost_round`.
    pub fn tune_params(&self) -> Result<TrainParams> {
        let rounds = self
            .kv
            .get_or("tune.num_boost_round", DEFAULT_TUNE_ROUNDS)?;
        let params = TrainParams {
            num_boost_round: rounds,
            ..self.train_params()?
        };
        params.validate()?;
        Ok(params)
    }

    pub fn tune_sample(&self) -> Result<f64> {
        self.kv.get_or("tune.sample", DEFAULT_TUNE_SAMPLE)
    }

    pub fn grid(&self) -> Result<ParamGrid> {
        ParamGrid::from_key_values(&self.kv)
    }

    pub fn weights(&self) -> Result<EnsembleWeights> {
        EnsembleWeights::default().with_overrides(&self.kv)
    }

    pub fn solutions(&self, default: &str) -> Result<Vec<SolutionId>> {
        parse_solution_list(self.kv.get_str("solutions").unwrap_or(default))
    }
}
