//! The TOML run configuration and its merge with command-line flags.
//!
//! Precedence, highest first: flags, config file, built-in defaults.
//! Relative paths in a config file are resolved against the file's directory.

use std::fs;
use std::path::{Path, PathBuf};

use rubricnli::corpus::SynthParams;
use rubricnli::entailment::{BackendConfig, BackendKind};
use rubricnli::evaluation::{default_split_fractions, default_sweep_fractions, default_val_fraction, ReportFormat};
use rubricnli::points::{rational, rational_vec, Rational};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const DEFAULT_OUT: &str = "rubricnli-out";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Formulation {
    #[default]
    Rubric,
    Score,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProtocolSection {
    pub seeds: Option<Vec<u64>>,
    /// `[train, val, test]` fractions of each question's responses.
    #[serde(with = "rational_vec")]
    pub split: Vec<Rational>,
    /// Training fractions of the sweep.
    #[serde(with = "rational_vec")]
    pub fractions: Vec<Rational>,
    #[serde(with = "rational")]
    pub val_fraction: Rational,
    pub formulation: Formulation,
    /// `nearest-neighbor`, `gold` or `constant:<points>`.
    pub score_predictor: String,
}

impl Default for ProtocolSection {
    fn default() -> Self {
        ProtocolSection {
            seeds: None,
            split: default_split_fractions().to_vec(),
            fractions: default_sweep_fractions(),
            val_fraction: default_val_fraction(),
            formulation: Formulation::Rubric,
            score_predictor: "nearest-neighbor".to_string(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub corpus: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub formats: Option<Vec<String>>,
    pub backend: BackendConfig,
    pub protocol: ProtocolSection,
    pub synth: SynthParams,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut config: RunConfig = toml::from_str(&text)
            .map_err(|e| CliError::Config(format!("config {}: {}", path.display(), e.message())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        config.corpus = config.corpus.map(|p| base.join(p));
        config.out = config.out.map(|p| base.join(p));
        config.backend.adapter.replay_file = config.backend.adapter.replay_file.map(|p| base.join(p));
        for p in config.corpus.iter().chain(&config.backend.adapter.replay_file) {
            if !p.exists() {
                return Err(CliError::Config(format!("config {}: path {} does not exist", path.display(), p.display())));
            }
        }
        Ok(config)
    }
}

/// Flags shared by every verb.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub backend: Option<BackendKind>,
    pub format: Option<String>,
}

/// A config after flags are applied.
#[derive(Debug, Clone)]
pub struct Settings {
    pub corpus: Option<PathBuf>,
    pub out: PathBuf,
    pub formats: Vec<String>,
    pub backend: BackendConfig,
    pub protocol: ProtocolSection,
    pub synth: SynthParams,
    /// Seed of single-seed commands.
    pub seed: u64,
}

impl Settings {
    pub fn resolve(config: RunConfig, flags: Overrides) -> Result<Self, CliError> {
        let mut backend = config.backend;
        let mut protocol = config.protocol;
        if let Some(kind) = flags.backend {
            backend.kind = kind;
        }
        if let Some(seed) = flags.seed {
            backend.seed = seed;
            protocol.seeds = Some(vec![seed]);
        }
        backend.validate().map_err(|e| CliError::Config(format!("backend: {e}")))?;
        if protocol.split.len() != 3 {
            return Err(CliError::Config(format!(
                "protocol.split needs 3 fractions (train, val, test), got {}",
                protocol.split.len()
            )));
        }
        let formats = match (flags.format, config.formats) {
            (Some(f), _) => vec![f],
            (None, Some(fs)) => fs,
            (None, None) => vec!["markdown".into(), "csv".into(), "json".into()],
        };
        if formats.is_empty() {
            return Err(CliError::Config("formats must not be empty".into()));
        }
        Ok(Settings {
            corpus: config.corpus,
            out: flags.out.or(config.out).unwrap_or_else(|| PathBuf::from(DEFAULT_OUT)),
            formats,
            seed: backend.seed,
            backend,
            protocol,
            synth: config.synth,
        })
    }

    /// Seeds of seed-driven protocols, default `0..5`.
    pub fn seeds(&self) -> Result<Vec<u64>, CliError> {
        match &self.protocol.seeds {
            Some(s) if s.is_empty() => Err(CliError::Config("protocol.seeds must not be empty".into())),
            Some(s) => Ok(s.clone()),
            None => Ok((0..5).collect()),
        }
    }

    pub fn split_fractions(&self) -> [Rational; 3] {
        [self.protocol.split[0], self.protocol.split[1], self.protocol.split[2]]
    }

    pub fn report_formats(&self) -> Result<Vec<ReportFormat>, CliError> {
        self.formats.iter().map(|f| f.parse().map_err(CliError::from)).collect()
    }

    pub fn corpus_path(&self, positional: Option<&Path>) -> Result<PathBuf, CliError> {
        positional
            .map(Path::to_path_buf)
            .or_else(|| self.corpus.clone())
            .ok_or_else(|| CliError::Config("no corpus given (pass --corpus or set corpus in the config)".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_rejected() {
        let err = toml::from_str::<RunConfig>("corpus = \"a.json\"\nbogus = 1\n").unwrap_err();
        assert!(err.message().contains("unknown field"));
        let err = toml::from_str::<RunConfig>("[protocol]\nseed = 1\n").unwrap_err();
        assert!(err.message().contains("unknown field"));
    }

    #[test]
    fn flags_override_config() {
        let config: RunConfig = toml::from_str(
            "out = \"a\"\nformats = [\"csv\"]\n[backend]\nkind = \"lexical\"\nseed = 3\n[protocol]\nseeds = [1, 2]\n",
        )
        .unwrap();
        let s = Settings::resolve(config.clone(), Overrides::default()).unwrap();
        assert_eq!((s.seed, s.seeds().unwrap(), s.formats.clone()), (3, vec![1, 2], vec!["csv".to_string()]));
        assert_eq!(s.backend.kind, BackendKind::Lexical);
        let flags = Overrides {
            out: Some("b".into()),
            seed: Some(9),
            backend: Some(BackendKind::Oracle),
            format: Some("json".into()),
        };
        let s = Settings::resolve(config, flags).unwrap();
        assert_eq!(s.out, PathBuf::from("b"));
        assert_eq!((s.seed, s.seeds().unwrap()), (9, vec![9]));
        assert_eq!(s.backend.kind, BackendKind::Oracle);
        assert_eq!(s.formats, ["json"]);
    }

    #[test]
    fn fractions_accept_decimals_and_ratios() {
        let config: RunConfig =
            toml::from_str("[protocol]\nsplit = [0.8, \"1/10\", 0.1]\nfractions = [0.25, 1]\nval_fraction = 0.2\n").unwrap();
        assert_eq!(config.protocol.split, default_split_fractions().to_vec());
        assert_eq!(config.protocol.fractions, vec![Rational::new(1, 4), Rational::from_integer(1)]);
        assert_eq!(config.protocol.val_fraction, Rational::new(1, 5));
    }

    #[test]
    fn empty_seed_list_is_a_config_error() {
        let config: RunConfig = toml::from_str("[protocol]\nseeds = []\n").unwrap();
        let s = Settings::resolve(config, Overrides::default()).unwrap();
        assert_eq!(s.seeds().unwrap_err().exit_code(), 2);
    }

    #[test]
    fn missing_referenced_path_fails_at_load() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        fs::write(&path, "corpus = \"missing.json\"\n").unwrap();
        let err = RunConfig::load(&path).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.message().contains("missing.json"));
    }
}
