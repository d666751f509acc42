use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::model::GatrConfig;
use crate::nbody::{sample_seed, MlpConfig, ModelKind, ModelSpec, Precision, SampleConfig, TrainConfig, TransformerConfig, Vec3};
use crate::verify::VerifyOptions;

use super::CliError;

pub const SEED_ENV: &str = "GATR_SEED";

/// Everything a run depends on. Missing sections and fields take their
/// defaults; unknown keys are rejected.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub dataset: DatasetSection,
    pub model: ModelSection,
    pub training: TrainConfig,
    pub eval: EvalSection,
    pub verify: VerifySection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetSection {
    pub seed: u64,
    pub train_samples: usize,
    pub eval_samples: usize,
    /// Base sampling regime for the `train` and `eval` splits.
    pub sample: SampleConfig,
    /// Planet count of the `eval-more-planets` split.
    pub more_planets: usize,
    /// Translation mean of the `eval-translated` split.
    pub translated_mean: Vec3,
}

impl Default for DatasetSection {
    fn default() -> Self {
        Self {
            seed: 0,
            train_samples: 1000,
            eval_samples: 500,
            sample: SampleConfig::default(),
            more_planets: 5,
            translated_mean: [200.0, 0.0, 0.0],
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub gatr: GatrConfig,
    pub transformer: TransformerConfig,
    /// `n_bodies` is taken from the training data.
    pub mlp: MlpConfig,
}

impl ModelSection {
    pub fn spec(&self, kind: ModelKind, n_bodies: usize) -> ModelSpec {
        match kind {
            ModelKind::Gatr => ModelSpec::Gatr(self.gatr.clone()),
            ModelKind::Transformer => ModelSpec::Transformer(self.transformer.clone()),
            ModelKind::Mlp => ModelSpec::Mlp(MlpConfig {
                n_bodies,
                ..self.mlp.clone()
            }),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalSection {
    pub precision: Precision,
    pub parallel: bool,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            precision: Precision::F32,
            parallel: true,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifySection {
    pub trials: Option<usize>,
    pub tolerance: Option<f64>,
    pub seed: u64,
}

impl VerifySection {
    pub fn options(&self) -> VerifyOptions {
        VerifyOptions {
            trials: self.trials,
            tolerance: self.tolerance,
            seed: self.seed,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Split {
    Train,
    Eval,
    EvalMorePlanets,
    EvalTranslated,
}

impl Split {
    pub const ALL: [Split; 4] = [Split::Train, Split::Eval, Split::EvalMorePlanets, Split::EvalTranslated];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Eval => "eval",
            Split::EvalMorePlanets => "eval-more-planets",
            Split::EvalTranslated => "eval-translated",
        }
    }

    fn index(self) -> u64 {
        Split::ALL.iter().position(|s| *s == self).unwrap_or(0) as u64
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let config: RunConfig =
            serde_json::from_str(text).map_err(|e| CliError::Usage(format!("invalid run config: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    /// Reads `path`, or returns the defaults when no path is given. The
    /// seed override from the environment is applied either way.
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let mut config = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", p.display())))?;
                Self::from_json(&text)?
            }
            None => Self::default(),
        };
        if let Ok(value) = std::env::var(SEED_ENV) {
            let seed = value
                .trim()
                .parse()
                .map_err(|_| CliError::Usage(format!("{SEED_ENV}={value:?} is not an unsigned integer")))?;
            config.set_seed(seed);
        }
        Ok(config)
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.dataset.seed = seed;
        self.training.seed = seed;
        self.verify.seed = seed;
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let usage = |e: crate::nbody::NBodyError| CliError::Usage(e.to_string());
        for kind in ModelKind::ALL {
            self.model.spec(kind, self.dataset.sample.n_planets + 1).validate().map_err(usage)?;
        }
        if self.training.batch_size == 0 {
            return Err(CliError::Usage("training.batch_size must be at least 1".into()));
        }
        if !(self.training.lr_start > 0.0 && self.training.lr_end > 0.0) {
            return Err(CliError::Usage("learning rates must be positive".into()));
        }
        if self.dataset.sample.n_planets == 0 || self.dataset.more_planets == 0 {
            return Err(CliError::Usage("planet counts must be at least 1".into()));
        }
        Ok(())
    }

    /// Sampling regime, sample count and stream seed of one split.
    pub fn split(&self, split: Split) -> (SampleConfig, usize, u64) {
        let d = &self.dataset;
        let mut sample = d.sample.clone();
        let mut n = d.eval_samples;
        match split {
            Split::Train => n = d.train_samples,
            Split::Eval => {}
            Split::EvalMorePlanets => sample.n_planets = d.more_planets,
            Split::EvalTranslated => sample.translation_mean = d.translated_mean,
        }
        (sample, n, sample_seed(d.seed, u64::MAX - split.index()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_json() {
        let config = RunConfig::default();
        let text = serde_json::to_string_pretty(&config).unwrap();
        assert_eq!(RunConfig::from_json(&text).unwrap(), config);
        assert_eq!(RunConfig::from_json("{}").unwrap(), config);
    }

    #[test]
    fn unknown_keys_and_bad_sizes_are_rejected() {
        assert!(RunConfig::from_json(r#"{"model": {"gatr": {"n_blokcs": 2}}}"#).is_err());
        assert!(RunConfig::from_json(r#"{"extra": {}}"#).is_err());
        let err = RunConfig::from_json(r#"{"model": {"transformer": {"width": 10, "n_heads": 3}}}"#).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn splits_switch_regimes_and_streams() {
        let config = RunConfig::default();
        let (train, n_train, s_train) = config.split(Split::Train);
        let (eval, n_eval, s_eval) = config.split(Split::Eval);
        let (more, _, _) = config.split(Split::EvalMorePlanets);
        let (far, _, _) = config.split(Split::EvalTranslated);
        assert_eq!((n_train, n_eval), (1000, 500));
        assert_eq!(train, eval);
        assert_ne!(s_train, s_eval);
        assert_eq!(more.n_planets, 5);
        assert_eq!(far.translation_mean, [200.0, 0.0, 0.0]);
    }

    #[test]
    fn seed_override_reaches_every_section() {
        let mut config = RunConfig::default();
        config.set_seed(9);
        assert_eq!((config.dataset.seed, config.training.seed, config.verify.seed), (9, 9, 9));
    }
}
