//! Run configuration: one JSON document per experiment.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dataio::{load_idx, make_synthetic, sample, subsample, Dataset, SyntheticTaskSpec};
use crate::error::{Error, Result};
use crate::generators::{Generator, NormPower};
use crate::netcore::NetworkSpec;
use crate::optim::{SgdConfig, StepMode};

use super::data::empirical_support;
use crate::bounds::FinitePD;

fn default_pearson_window() -> usize {
    20
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub task: TaskConfig,
    pub model: NetworkSpec,
    pub generator: GeneratorChoice,
    pub sgd: SgdSection,
    #[serde(default)]
    pub init: InitConfig,
    /// Output directory used when none is given on the command line.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outputs: Option<PathBuf>,
    #[serde(default = "default_pearson_window")]
    pub pearson_window: usize,
    #[serde(default)]
    pub bounds: BoundsConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TaskConfig {
    /// Samples `n_train` pairs from a generated finite distribution.
    Synthetic { distribution: SyntheticTaskSpec, n_train: usize, sample_seed: u64 },
    /// Balanced subset of an IDX image/label pair.
    Idx { images: PathBuf, labels: PathBuf, per_class: usize, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum GeneratorChoice {
    SquaredL2,
    NegEntropySimplex,
    NormPower(NormPower),
}

impl GeneratorChoice {
    pub fn build(&self, dim: usize) -> Generator {
        match *self {
            GeneratorChoice::SquaredL2 => Generator::SquaredL2 { dim },
            GeneratorChoice::NegEntropySimplex => Generator::NegEntropySimplex { dim },
            GeneratorChoice::NormPower(np) => Generator::NormPower { dim, np },
        }
    }
}

/// SGD settings; `eigen_every` defaults to one epoch of steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SgdSection {
    pub mode: StepMode,
    pub batch_size: usize,
    pub steps: usize,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eigen_every: Option<usize>,
}

impl SgdSection {
    pub fn resolve(&self, n_train: usize) -> SgdConfig {
        SgdConfig {
            mode: self.mode,
            batch_size: self.batch_size,
            steps: self.steps,
            seed: self.seed,
            eigen_every: self.eigen_every.unwrap_or((n_train / self.batch_size.max(1)).max(1)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitConfig {
    pub seed: u64,
    pub scale: f64,
}

impl Default for InitConfig {
    fn default() -> Self {
        Self { seed: 0, scale: 1.0 }
    }
}

fn default_trials() -> usize {
    1000
}

fn default_eps_grid() -> Vec<f64> {
    vec![0.05, 0.1, 0.2, 0.3, 0.5, 0.75, 1.0]
}

fn default_probe_radii() -> Vec<f64> {
    vec![1e-3, 1e-2, 1e-1]
}

fn default_probe_samples() -> usize {
    32
}

/// Settings for the bound report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsConfig {
    /// Sample size of each Monte Carlo trial; defaults to the training-set size.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_eps_grid")]
    pub eps_grid: Vec<f64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_probe_radii")]
    pub probe_radii: Vec<f64>,
    #[serde(default = "default_probe_samples")]
    pub probe_samples: usize,
}

impl Default for BoundsConfig {
    fn default() -> Self {
        Self {
            n: None,
            trials: default_trials(),
            eps_grid: default_eps_grid(),
            seed: 0,
            probe_radii: default_probe_radii(),
            probe_samples: default_probe_samples(),
        }
    }
}

fn cfg_err(path: &str, message: impl Into<String>) -> Error {
    Error::Config { path: path.to_string(), message: message.into() }
}

impl RunConfig {
    /// Parses and validates; errors name the offending field.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            cfg_err(&path, e.into_inner().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| cfg_err("<file>", format!("cannot read {}: {e}", path.as_ref().display())))?;
        let mut cfg = Self::from_json(&text)?;
        // data paths are relative to the config file
        if let (TaskConfig::Idx { images, labels, .. }, Some(base)) = (&mut cfg.task, path.as_ref().parent()) {
            *images = base.join(&*images);
            *labels = base.join(&*labels);
        }
        Ok(cfg)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Expected `(input_dim, output_dim)` implied by the task.
    pub fn task_dims(&self) -> (usize, usize) {
        match &self.task {
            TaskConfig::Synthetic { distribution, .. } => (distribution.embed_dim, distribution.card_y),
            TaskConfig::Idx { .. } => (784, 10),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (input, output) = self.task_dims();
        match &self.task {
            TaskConfig::Synthetic { distribution: d, n_train, .. } => {
                if d.card_x < 2 {
                    return Err(cfg_err("task.distribution.card_x", "must be at least 2"));
                }
                if d.card_y < 2 {
                    return Err(cfg_err("task.distribution.card_y", "must be at least 2"));
                }
                if d.embed_dim == 0 {
                    return Err(cfg_err("task.distribution.embed_dim", "must be positive"));
                }
                if !(d.conditional_sharpness >= 0.0) || !d.conditional_sharpness.is_finite() {
                    return Err(cfg_err("task.distribution.conditional_sharpness", "must be finite and >= 0"));
                }
                if *n_train == 0 {
                    return Err(cfg_err("task.n_train", "must be positive"));
                }
            }
            TaskConfig::Idx { per_class, .. } => {
                if *per_class == 0 {
                    return Err(cfg_err("task.per_class", "must be positive"));
                }
            }
        }
        if self.model.input_dim != input {
            return Err(cfg_err("model.input_dim", format!("is {}, task provides {input}", self.model.input_dim)));
        }
        if self.model.output_dim != output {
            return Err(cfg_err(
                "model.output_dim",
                format!("is {}, task has {output} labels", self.model.output_dim),
            ));
        }
        self.model.validate().map_err(|e| cfg_err("model", e.to_string()))?;
        if let GeneratorChoice::NormPower(np) = self.generator {
            NormPower::new(np.order, np.scale).map_err(|e| cfg_err("generator.norm_power", e.to_string()))?;
        }
        match self.sgd.mode {
            StepMode::FixedAlpha(a) if !(a >= 0.0) || !a.is_finite() => {
                return Err(cfg_err("sgd.mode.fixed_alpha", "must be finite and >= 0"));
            }
            StepMode::OptimalFromXi(xi) => {
                NormPower::new(xi.order, xi.scale).map_err(|e| cfg_err("sgd.mode.optimal_from_xi", e.to_string()))?;
            }
            _ => {}
        }
        if self.sgd.batch_size == 0 {
            return Err(cfg_err("sgd.batch_size", "must be positive"));
        }
        if let TaskConfig::Synthetic { n_train, .. } = &self.task {
            if self.sgd.batch_size > *n_train {
                return Err(cfg_err("sgd.batch_size", format!("exceeds n_train = {n_train}")));
            }
        }
        if self.sgd.eigen_every == Some(0) {
            return Err(cfg_err("sgd.eigen_every", "must be positive"));
        }
        if !(self.init.scale > 0.0) || !self.init.scale.is_finite() {
            return Err(cfg_err("init.scale", "must be finite and > 0"));
        }
        if self.pearson_window < 2 {
            return Err(cfg_err("pearson_window", "must be at least 2"));
        }
        if self.bounds.trials < 100 {
            return Err(cfg_err("bounds.trials", "must be at least 100"));
        }
        if self.bounds.n == Some(0) {
            return Err(cfg_err("bounds.n", "must be positive"));
        }
        if self.bounds.eps_grid.iter().any(|e| !(*e > 0.0)) {
            return Err(cfg_err("bounds.eps_grid", "entries must be positive"));
        }
        if self.bounds.probe_radii.is_empty() || self.bounds.probe_radii.iter().any(|r| !(*r > 0.0)) {
            return Err(cfg_err("bounds.probe_radii", "must be a non-empty list of positive radii"));
        }
        if self.bounds.probe_samples == 0 {
            return Err(cfg_err("bounds.probe_samples", "must be positive"));
        }
        Ok(())
    }

    /// Builds the training set and the finite distribution used for bounds.
    ///
    /// For synthetic tasks the distribution is the generating one; for IDX
    /// tasks it is the empirical distribution over the distinct training images.
    pub fn materialize(&self) -> Result<Task> {
        match &self.task {
            TaskConfig::Synthetic { distribution, n_train, sample_seed } => {
                let q = make_synthetic(distribution).map_err(|e| cfg_err("task.distribution", e.to_string()))?;
                let samples = sample(&q, *n_train, *sample_seed)?;
                let data = Dataset::from_samples(&q, &samples);
                Ok(Task { data, q, samples })
            }
            TaskConfig::Idx { images, labels, per_class, seed } => {
                let full = load_idx(images, labels)?;
                let sub = subsample(&full, *per_class, *seed).map_err(|e| cfg_err("task.per_class", e.to_string()))?;
                let data = Dataset::from_idx(&sub);
                let (q, samples) = empirical_support(&data)?;
                Ok(Task { data, q, samples })
            }
        }
    }
}

/// A materialized task: training data, its reference distribution, and the
/// feature/label index of every training example.
pub struct Task {
    pub data: Dataset,
    pub q: FinitePD,
    pub samples: Vec<(usize, usize)>,
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn demo_json() -> &'static str {
        r#"{
            "task": {"kind": "synthetic",
                     "distribution": {"card_x": 8, "card_y": 3, "embed_dim": 4,
                                      "conditional_sharpness": 1.0, "seed": 1},
                     "n_train": 32, "sample_seed": 2},
            "model": {"input_dim": 4, "output_dim": 3,
                      "blocks": [{"width": 6, "activation": "tanh", "skip": false}]},
            "generator": "neg_entropy_simplex",
            "sgd": {"mode": {"fixed_alpha": 0.1}, "batch_size": 8, "steps": 5, "seed": 3}
        }"#
    }

    #[test]
    fn parses_and_round_trips() {
        let cfg = RunConfig::from_json(demo_json()).unwrap();
        assert_eq!(cfg.pearson_window, 20);
        assert_eq!(cfg.sgd.resolve(32).eigen_every, 4);
        let again = RunConfig::from_json(&cfg.to_json().unwrap()).unwrap();
        assert_eq!(cfg, again);
    }

    #[test]
    fn norm_power_generator_round_trips() {
        let text = demo_json().replace(
            r#""neg_entropy_simplex""#,
            r#"{"norm_power": {"order": 3.0, "scale": 2.0}}"#,
        );
        let cfg = RunConfig::from_json(&text).unwrap();
        assert_eq!(cfg.generator, GeneratorChoice::NormPower(NormPower { order: 3.0, scale: 2.0 }));
        assert_eq!(RunConfig::from_json(&cfg.to_json().unwrap()).unwrap(), cfg);
    }

    fn err_path(text: &str) -> String {
        match RunConfig::from_json(text) {
            Err(Error::Config { path, .. }) => path,
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn errors_name_the_field() {
        assert_eq!(err_path(&demo_json().replace(r#""output_dim": 3"#, r#""output_dim": 4"#)), "model.output_dim");
        assert_eq!(err_path(&demo_json().replace(r#""batch_size": 8"#, r#""batch_size": -1"#)), "sgd.batch_size");
        assert_eq!(err_path(&demo_json().replace(r#""batch_size": 8"#, r#""batch_size": 0"#)), "sgd.batch_size");
        assert_eq!(
            err_path(&demo_json().replace(r#""fixed_alpha": 0.1"#, r#""fixed_alpha": -0.1"#)),
            "sgd.mode.fixed_alpha"
        );
        assert!(err_path(&demo_json().replace(r#""generator""#, r#""generatr""#)).starts_with("generat"));
    }

    #[test]
    fn synthetic_task_materializes() {
        let cfg = RunConfig::from_json(demo_json()).unwrap();
        let task = cfg.materialize().unwrap();
        assert_eq!(task.data.len(), 32);
        assert_eq!(task.q.card_x(), 8);
        assert_eq!(task.data.input_dim(), 4);
    }
}
