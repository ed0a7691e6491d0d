use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::generative::SamplingParams;
use super::trainer::OptimizerSettings;
use super::registry::MEMORIZER_ID;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Trainable,
    Generative,
    Lexical,
    Oracle,
}

impl fmt::Display for BackendKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BackendKind::Trainable => "trainable",
            BackendKind::Generative => "generative",
            BackendKind::Lexical => "lexical",
            BackendKind::Oracle => "oracle",
        })
    }
}

impl std::str::FromStr for BackendKind {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, ConfigError> {
        match s {
            "trainable" => Ok(BackendKind::Trainable),
            "generative" => Ok(BackendKind::Generative),
            "lexical" => Ok(BackendKind::Lexical),
            "oracle" => Ok(BackendKind::Oracle),
            other => Err(ConfigError(format!(
                "unknown backend kind {other:?} (expected trainable, generative, lexical or oracle)"
            ))),
        }
    }
}

/// Model selection is always by validation F1.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum SelectionMetric {
    #[default]
    #[serde(rename = "val_f1")]
    ValidationF1,
}

/// Where a generative backend gets its answer log-probabilities.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdapterConfig {
    /// JSONL file of precomputed `{response_id, rubric_item_id, lp_true, lp_false}`.
    pub replay_file: Option<PathBuf>,
    /// Base URL of an OpenAI-compatible API, e.g. `https://api.openai.com/v1`.
    pub endpoint: Option<String>,
    pub model: Option<String>,
    /// Name of the environment variable holding the API key.
    pub api_key_env: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{0}")]
pub struct ConfigError(pub String);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendConfig {
    pub kind: BackendKind,
    /// Row label in reports; derived from the kind when absent.
    pub name: Option<String>,
    /// Checkpoint the trainable runtime starts from (e.g. an MNLI
    /// fine-tuned model id). Resolved by the [`BackendRegistry`](super::BackendRegistry).
    pub initialization: String,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub optimizer_betas: [f64; 2],
    pub selection_metric: SelectionMetric,
    pub seed: u64,
    pub temperature: f64,
    pub frequency_penalty: f64,
    pub presence_penalty: f64,
    pub lexical_threshold: f64,
    pub prepend_question: bool,
    pub prompt_template: Option<String>,
    pub adapter: AdapterConfig,
}

impl Default for BackendConfig {
    fn default() -> Self {
        BackendConfig {
            kind: BackendKind::Trainable,
            name: None,
            initialization: MEMORIZER_ID.to_string(),
            learning_rate: 2e-5,
            batch_size: 16,
            max_epochs: 10,
            optimizer_betas: [0.9, 0.999],
            selection_metric: SelectionMetric::ValidationF1,
            seed: 0,
            temperature: 1.0,
            frequency_penalty: 0.0,
            presence_penalty: 0.0,
            lexical_threshold: 0.6,
            prepend_question: false,
            prompt_template: None,
            adapter: AdapterConfig::default(),
        }
    }
}

impl BackendConfig {
    pub fn of_kind(kind: BackendKind) -> Self {
        BackendConfig { kind, ..Default::default() }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(ConfigError(format!("learning_rate must be positive, got {}", self.learning_rate)));
        }
        if self.batch_size == 0 {
            return Err(ConfigError("batch_size must be at least 1".into()));
        }
        if self.max_epochs == 0 {
            return Err(ConfigError("max_epochs must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.lexical_threshold) {
            return Err(ConfigError(format!("lexical_threshold must lie in [0, 1], got {}", self.lexical_threshold)));
        }
        if self.optimizer_betas.iter().any(|b| !(0.0..1.0).contains(b)) {
            return Err(ConfigError(format!("optimizer_betas must lie in [0, 1), got {:?}", self.optimizer_betas)));
        }
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(ConfigError(format!("temperature must be non-negative, got {}", self.temperature)));
        }
        Ok(())
    }

    pub fn display_name(&self) -> String {
        if let Some(name) = &self.name {
            return name.clone();
        }
        match self.kind {
            BackendKind::Oracle => "oracle".to_string(),
            BackendKind::Lexical => format!("lexical(θ={})", self.lexical_threshold),
            BackendKind::Trainable => format!("trainable({})", self.initialization),
            BackendKind::Generative => {
                format!("generative({})", self.adapter.model.as_deref().unwrap_or("replay"))
            }
        }
    }

    pub fn optimizer(&self) -> OptimizerSettings {
        OptimizerSettings { learning_rate: self.learning_rate, betas: self.optimizer_betas }
    }

    pub fn sampling(&self) -> SamplingParams {
        SamplingParams {
            temperature: self.temperature,
            frequency_penalty: self.frequency_penalty,
            presence_penalty: self.presence_penalty,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_training_recipe() {
        let c = BackendConfig::default();
        assert_eq!(c.learning_rate, 2e-5);
        assert_eq!(c.batch_size, 16);
        assert_eq!(c.max_epochs, 10);
        assert_eq!(c.optimizer_betas, [0.9, 0.999]);
        assert_eq!(c.selection_metric, SelectionMetric::ValidationF1);
        assert_eq!((c.temperature, c.frequency_penalty, c.presence_penalty), (1.0, 0.0, 0.0));
        assert_eq!(c.lexical_threshold, 0.6);
        assert!(!c.prepend_question);
        c.validate().unwrap();
    }

    #[test]
    fn rejects_invalid_hyperparameters() {
        assert!(BackendConfig { learning_rate: 0.0, ..Default::default() }.validate().is_err());
        assert!(BackendConfig { batch_size: 0, ..Default::default() }.validate().is_err());
        assert!(BackendConfig { lexical_threshold: 1.2, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn unknown_keys_rejected() {
        let err = serde_json::from_str::<BackendConfig>(r#"{"kind":"oracle","lr":1}"#).unwrap_err();
        assert!(err.to_string().contains("unknown field"));
        let ok: BackendConfig = serde_json::from_str(r#"{"kind":"lexical","lexical_threshold":1.0}"#).unwrap();
        assert_eq!(ok.display_name(), "lexical(θ=1)");
    }
}
