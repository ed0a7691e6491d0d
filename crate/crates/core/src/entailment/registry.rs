//! Resolves a [`BackendConfig`] to something that can predict.
//!
//! Trainable runtimes are looked up by initialization id. Only the built-in
//! memorizer is registered by default; bindings to real checkpoints (an
//! MNLI fine-tuned model served by some external runtime) are registered by
//! the embedding application.

use std::collections::BTreeMap;

use super::generative::{GenerativeBackend, LogProbAdapter, ReplayAdapter};
use super::memorizer::MemorizingRuntime;
use super::trainer::{ModelRuntime, SavedModel, TrainableBackend};
use super::{BackendConfig, BackendError, BackendKind, EntailmentBackend, LexicalBackend, OracleBackend};

pub const MEMORIZER_ID: &str = "builtin:memorizer";

/// Builds a fresh runtime from a full initialization id, which may carry a
/// `?options` suffix after the registered id.
pub type RuntimeConstructor = fn(&str) -> Result<Box<dyn ModelRuntime>, BackendError>;

pub enum Backend {
    /// Predicts as is.
    Ready(Box<dyn EntailmentBackend>),
    /// Must be fitted first.
    Trainable(Box<dyn ModelRuntime>),
}

#[derive(Clone)]
pub struct BackendRegistry {
    runtimes: BTreeMap<String, RuntimeConstructor>,
}

impl Default for BackendRegistry {
    fn default() -> Self {
        let mut registry = BackendRegistry::empty();
        registry.register(MEMORIZER_ID, |id| Ok(Box::new(MemorizingRuntime::from_initialization(id)?)));
        registry
    }
}

impl BackendRegistry {
    pub fn empty() -> Self {
        BackendRegistry { runtimes: BTreeMap::new() }
    }

    pub fn register(&mut self, id: &str, constructor: RuntimeConstructor) {
        self.runtimes.insert(id.to_string(), constructor);
    }

    pub fn registered(&self) -> impl Iterator<Item = &str> {
        self.runtimes.keys().map(String::as_str)
    }

    pub fn runtime(&self, initialization: &str) -> Result<Box<dyn ModelRuntime>, BackendError> {
        let base = initialization.split_once('?').map_or(initialization, |(b, _)| b);
        let constructor = self.runtimes.get(base).ok_or_else(|| {
            let known: Vec<&str> = self.registered().collect();
            BackendError::Config(format!(
                "no model runtime registered for initialization {initialization:?} (known: {})",
                known.join(", ")
            ))
        })?;
        constructor(initialization)
    }

    pub fn instantiate(&self, config: &BackendConfig) -> Result<Backend, BackendError> {
        config.validate().map_err(|e| BackendError::Config(e.0))?;
        Ok(match config.kind {
            BackendKind::Oracle => Backend::Ready(Box::new(OracleBackend)),
            BackendKind::Lexical => Backend::Ready(Box::new(LexicalBackend { threshold: config.lexical_threshold })),
            BackendKind::Generative => Backend::Ready(Box::new(GenerativeBackend::new(
                adapter(config)?,
                config.prompt_template.clone(),
                config.sampling(),
            )?)),
            BackendKind::Trainable => Backend::Trainable(self.runtime(&config.initialization)?),
        })
    }

    /// Rebuilds a backend saved with [`TrainableBackend::save`].
    pub fn load(&self, saved: &SavedModel) -> Result<TrainableBackend, BackendError> {
        let mut runtime = self.runtime(&saved.initialization)?;
        runtime.restore(&saved.state)?;
        Ok(TrainableBackend::new(runtime))
    }
}

fn adapter(config: &BackendConfig) -> Result<Box<dyn LogProbAdapter>, BackendError> {
    let a = &config.adapter;
    if let Some(path) = &a.replay_file {
        let replay = ReplayAdapter::load(path).map_err(|e| BackendError::Unavailable {
            backend: config.display_name(),
            first: 0,
            last: 0,
            reason: e.to_string(),
        })?;
        return Ok(Box::new(replay));
    }
    match (&a.endpoint, &a.model) {
        #[cfg(feature = "remote")]
        (Some(endpoint), Some(model)) => Ok(Box::new(super::generative::ChatCompletionsAdapter::new(
            endpoint.clone(),
            model.clone(),
            a.api_key_env.clone(),
        ))),
        #[cfg(not(feature = "remote"))]
        (Some(_), Some(_)) => Err(BackendError::Config("remote adapters need the `remote` feature".into())),
        _ => Err(BackendError::Config(
            "generative backend needs adapter.replay_file or adapter.endpoint and adapter.model".into(),
        )),
    }
}
