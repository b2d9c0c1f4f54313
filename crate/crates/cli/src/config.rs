use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use xmodal_core::label_model::LabelModelConfig;
use xmodal_core::synth::SynthConfig;
use xmodal_core::train::{DeviseConfig, IntermediateConfig, ModelKind, TrainConfig};
use xmodal_core::{GraphConfig, MinerConfig};

use crate::StageError;

/// Where the input datasets live. With `generated = true` they are the synth
/// stage outputs under `<out>/data`; otherwise every path used by a stage must
/// be set explicitly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataPaths {
    pub generated: bool,
    pub schema: Option<PathBuf>,
    pub text_labeled: Option<PathBuf>,
    pub text_dev: Option<PathBuf>,
    pub image_unlabeled: Option<PathBuf>,
    pub image_test: Option<PathBuf>,
    pub image_gold_pool: Option<PathBuf>,
    /// Latent labels of `image_unlabeled`, used only for weak-label diagnostics.
    pub image_unlabeled_truth: Option<PathBuf>,
}

impl Default for DataPaths {
    fn default() -> Self {
        DataPaths {
            generated: true,
            schema: None,
            text_labeled: None,
            text_dev: None,
            image_unlabeled: None,
            image_test: None,
            image_gold_pool: None,
            image_unlabeled_truth: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum DataRole {
    Schema,
    TextLabeled,
    TextDev,
    ImageUnlabeled,
    ImageTest,
    ImageGoldPool,
    ImageUnlabeledTruth,
}

impl DataRole {
    pub const ALL: [DataRole; 7] = [
        DataRole::Schema,
        DataRole::TextLabeled,
        DataRole::TextDev,
        DataRole::ImageUnlabeled,
        DataRole::ImageTest,
        DataRole::ImageGoldPool,
        DataRole::ImageUnlabeledTruth,
    ];

    pub fn field(self) -> &'static str {
        match self {
            DataRole::Schema => "schema",
            DataRole::TextLabeled => "text_labeled",
            DataRole::TextDev => "text_dev",
            DataRole::ImageUnlabeled => "image_unlabeled",
            DataRole::ImageTest => "image_test",
            DataRole::ImageGoldPool => "image_gold_pool",
            DataRole::ImageUnlabeledTruth => "image_unlabeled_truth",
        }
    }

    /// Path relative to the run directory when data is generated.
    pub fn generated_path(self) -> &'static str {
        match self {
            DataRole::Schema => "data/schema.json",
            DataRole::TextLabeled => "data/text_labeled.jsonl",
            DataRole::TextDev => "data/text_dev.jsonl",
            DataRole::ImageUnlabeled => "data/image_unlabeled.jsonl",
            DataRole::ImageTest => "data/image_test.jsonl",
            DataRole::ImageGoldPool => "data/image_gold_pool.jsonl",
            DataRole::ImageUnlabeledTruth => "data/image_unlabeled.truth.jsonl",
        }
    }
}

impl DataPaths {
    fn explicit(&self, role: DataRole) -> Option<&PathBuf> {
        match role {
            DataRole::Schema => self.schema.as_ref(),
            DataRole::TextLabeled => self.text_labeled.as_ref(),
            DataRole::TextDev => self.text_dev.as_ref(),
            DataRole::ImageUnlabeled => self.image_unlabeled.as_ref(),
            DataRole::ImageTest => self.image_test.as_ref(),
            DataRole::ImageGoldPool => self.image_gold_pool.as_ref(),
            DataRole::ImageUnlabeledTruth => self.image_unlabeled_truth.as_ref(),
        }
    }

    /// Resolves a dataset path. Explicit paths win; relative ones are taken
    /// as given (relative to the working directory).
    pub fn resolve(&self, role: DataRole, out: &Path) -> Option<PathBuf> {
        match self.explicit(role) {
            Some(p) => Some(p.clone()),
            None if self.generated => Some(out.join(role.generated_path())),
            None => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PropagationSettings {
    pub enabled: bool,
    /// Cap on gold text points clamped as seeds; 0 means all of them.
    pub max_seeds: usize,
    pub write_edges: bool,
}

impl Default for PropagationSettings {
    fn default() -> Self {
        PropagationSettings {
            enabled: true,
            max_seeds: 2_000,
            write_edges: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WeakLabelSettings {
    /// Abstention half-width around 0.5 for the weak-label P/R/F1 report.
    pub prf_epsilon: f64,
}

impl Default for WeakLabelSettings {
    fn default() -> Self {
        WeakLabelSettings { prf_epsilon: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Gold text only, applied to images.
    TextTransfer,
    /// Weak image labels only.
    WsImage,
    Early,
    Intermediate,
    Devise,
    /// Gold image labels from the gold pool; the relative-AUPRC baseline.
    Supervised,
}

impl Strategy {
    pub fn name(self) -> &'static str {
        match self {
            Strategy::TextTransfer => "text_transfer",
            Strategy::WsImage => "ws_image",
            Strategy::Early => "early",
            Strategy::Intermediate => "intermediate",
            Strategy::Devise => "devise",
            Strategy::Supervised => "supervised",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSettings {
    pub kind: ModelKind,
    pub strategies: Vec<Strategy>,
}

impl Default for ModelSettings {
    fn default() -> Self {
        ModelSettings {
            kind: ModelKind::Logreg,
            strategies: vec![
                Strategy::TextTransfer,
                Strategy::WsImage,
                Strategy::Early,
                Strategy::Intermediate,
                Strategy::Devise,
                Strategy::Supervised,
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateSettings {
    pub baseline: Strategy,
    /// Strategy whose test AUPRC the cross-over search must match.
    pub cross_modal: Strategy,
    pub crossover_sizes: Vec<usize>,
    pub crossover_repeats: usize,
    /// Ordered `[modality, feature_set]` pairs for the factor analysis.
    pub factor_sets: Vec<[String; 2]>,
}

impl Default for EvaluateSettings {
    fn default() -> Self {
        EvaluateSettings {
            baseline: Strategy::Supervised,
            cross_modal: Strategy::Early,
            crossover_sizes: vec![50, 100, 200, 500, 1_000, 2_000, 5_000, 10_000],
            crossover_repeats: 3,
            factor_sets: [("text", "A"), ("text", "B"), ("text", "C"), ("image", "N"), ("image", "E")]
                .into_iter()
                .map(|(m, t)| [m.to_string(), t.to_string()])
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Overrides every seed below.
    pub seed: u64,
    pub data: DataPaths,
    pub synth: SynthConfig,
    pub miner: MinerConfig,
    pub graph: GraphConfig,
    pub propagation: PropagationSettings,
    pub label_model: LabelModelConfig,
    pub weak_label: WeakLabelSettings,
    pub model: ModelSettings,
    pub train: TrainConfig,
    pub intermediate: IntermediateConfig,
    pub devise: DeviseConfig,
    pub evaluate: EvaluateSettings,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 7,
            data: DataPaths::default(),
            synth: SynthConfig::default(),
            miner: MinerConfig::default(),
            graph: GraphConfig::default(),
            propagation: PropagationSettings::default(),
            label_model: LabelModelConfig::default(),
            weak_label: WeakLabelSettings::default(),
            model: ModelSettings::default(),
            train: TrainConfig::default(),
            intermediate: IntermediateConfig::default(),
            devise: DeviseConfig::default(),
            evaluate: EvaluateSettings::default(),
        }
    }
}

fn config_err(e: impl std::fmt::Display) -> StageError {
    StageError::Config(e.to_string())
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self, StageError> {
        toml::from_str(text).map_err(config_err)
    }

    pub fn load(path: &Path) -> Result<Self, StageError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| StageError::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Copies the global seed into every seeded sub-config.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.synth.seed = seed;
        self.train.seed = seed;
        self.intermediate.member.seed = seed;
        self.intermediate.head.seed = seed;
        self.devise.existing.seed = seed;
        self.devise.new.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<(), StageError> {
        self.synth.validate().map_err(config_err)?;
        self.miner.validate().map_err(config_err)?;
        self.graph.validate().map_err(config_err)?;
        self.label_model.validate().map_err(config_err)?;
        for (name, t) in [
            ("train", &self.train),
            ("intermediate.member", &self.intermediate.member),
            ("intermediate.head", &self.intermediate.head),
            ("devise.existing", &self.devise.existing),
            ("devise.new", &self.devise.new),
        ] {
            t.validate().map_err(|e| StageError::Config(format!("{name}: {e}")))?;
        }
        if !(self.devise.ridge >= 0.0) {
            return Err(StageError::Config("devise.ridge must be >= 0".into()));
        }
        if !(self.weak_label.prf_epsilon >= 0.0 && self.weak_label.prf_epsilon < 0.5) {
            return Err(StageError::Config("weak_label.prf_epsilon must be in [0, 0.5)".into()));
        }
        if self.model.strategies.is_empty() {
            return Err(StageError::Config("model.strategies must not be empty".into()));
        }
        if self.evaluate.crossover_repeats == 0 {
            return Err(StageError::Config("evaluate.crossover_repeats must be >= 1".into()));
        }
        if self.evaluate.crossover_sizes.is_empty() {
            return Err(StageError::Config("evaluate.crossover_sizes must not be empty".into()));
        }
        if self.evaluate.factor_sets.is_empty() {
            return Err(StageError::Config("evaluate.factor_sets must not be empty".into()));
        }
        Ok(())
    }

    /// Fails with the field name when a stage needs a path that is not set.
    pub fn require(&self, role: DataRole, out: &Path) -> Result<PathBuf, StageError> {
        self.data
            .resolve(role, out)
            .ok_or_else(|| StageError::Config(format!("data.{} is not set", role.field())))
    }
}
