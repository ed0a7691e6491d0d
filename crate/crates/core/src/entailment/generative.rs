//! Zero-shot generative backend.
//!
//! Each pair is rendered into a prompt, an adapter returns the
//! log-probabilities of the `"True"` and `"False"` answer tokens, and
//! [`decide_from_logprobs`] turns them into a verdict. Exactly one surface
//! form per answer is compared; casing and whitespace variants are each
//! adapter's business.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{decide_from_logprobs, BackendError, EntailmentBackend, EntailmentPair, Prediction};

pub const DEFAULT_PROMPT_TEMPLATE: &str = "You are grading a student's answer against a single rubric item.\n\n\
Student response:\n{premise}\n\n\
Rubric item:\n{hypothesis}\n\n\
Does the student response satisfy the rubric item? Answer with True or False only.\n\
Answer:";

pub const TRUE_TOKEN: &str = "True";
pub const FALSE_TOKEN: &str = "False";

/// Substitutes `{premise}` and `{hypothesis}` in one pass, so placeholder
/// text inside the substituted values is left alone.
pub fn render_prompt(pair: &EntailmentPair, template: &str) -> Result<String, BackendError> {
    for placeholder in ["{premise}", "{hypothesis}"] {
        if !template.contains(placeholder) {
            return Err(BackendError::MissingPlaceholder(placeholder));
        }
    }
    let mut out = String::with_capacity(template.len() + pair.premise.len() + pair.hypothesis.len());
    let mut rest = template;
    while let Some(pos) = rest.find('{') {
        out.push_str(&rest[..pos]);
        let tail = &rest[pos..];
        if let Some(after) = tail.strip_prefix("{premise}") {
            out.push_str(&pair.premise);
            rest = after;
        } else if let Some(after) = tail.strip_prefix("{hypothesis}") {
            out.push_str(&pair.hypothesis);
            rest = after;
        } else {
            out.push('{');
            rest = &tail[1..];
        }
    }
    out.push_str(rest);
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingParams {
    pub temperature: f64,
    pub frequency_penalty: f64,
    pub presence_penalty: f64,
}

impl Default for SamplingParams {
    fn default() -> Self {
        SamplingParams { temperature: 1.0, frequency_penalty: 0.0, presence_penalty: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GenerationRequest {
    pub prompt: String,
    pub sampling: SamplingParams,
    pub candidates: [&'static str; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnswerLogProbs {
    pub lp_true: f64,
    pub lp_false: f64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AdapterError {
    #[error("unreachable: {0}")]
    Unreachable(String),
    #[error("no log-probabilities for {0}")]
    Missing(String),
    #[error("malformed response: {0}")]
    Malformed(String),
}

/// Source of answer log-probabilities for one rendered prompt.
pub trait LogProbAdapter: Send + Sync {
    fn name(&self) -> String;

    fn answer_logprobs(&self, pair: &EntailmentPair, request: &GenerationRequest) -> Result<AnswerLogProbs, AdapterError>;

    fn concurrent(&self) -> bool {
        true
    }
}

pub struct GenerativeBackend {
    adapter: Box<dyn LogProbAdapter>,
    template: String,
    sampling: SamplingParams,
}

impl GenerativeBackend {
    pub fn new(adapter: Box<dyn LogProbAdapter>, template: Option<String>, sampling: SamplingParams) -> Result<Self, BackendError> {
        let template = template.unwrap_or_else(|| DEFAULT_PROMPT_TEMPLATE.to_string());
        for placeholder in ["{premise}", "{hypothesis}"] {
            if !template.contains(placeholder) {
                return Err(BackendError::MissingPlaceholder(placeholder));
            }
        }
        Ok(GenerativeBackend { adapter, template, sampling })
    }
}

impl EntailmentBackend for GenerativeBackend {
    fn name(&self) -> String {
        format!("generative({})", self.adapter.name())
    }

    fn predict(&self, pairs: &[EntailmentPair]) -> Result<Vec<Prediction>, BackendError> {
        let mut out = Vec::with_capacity(pairs.len());
        for (i, pair) in pairs.iter().enumerate() {
            let request = GenerationRequest {
                prompt: render_prompt(pair, &self.template)?,
                sampling: self.sampling,
                candidates: [TRUE_TOKEN, FALSE_TOKEN],
            };
            let lp = self.adapter.answer_logprobs(pair, &request).map_err(|e| BackendError::Unavailable {
                backend: self.name(),
                first: i,
                last: i,
                reason: e.to_string(),
            })?;
            let (_, score) = decide_from_logprobs(lp.lp_true, lp.lp_false)?;
            out.push(Prediction::from_score(pair, score));
        }
        Ok(out)
    }

    fn concurrent(&self) -> bool {
        self.adapter.concurrent()
    }
}

/// One line of a replay file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogProbRecord {
    pub response_id: String,
    pub rubric_item_id: String,
    pub lp_true: f64,
    pub lp_false: f64,
}

/// Serves log-probabilities recorded from an earlier model run.
#[derive(Debug, Clone, Default)]
pub struct ReplayAdapter {
    records: HashMap<(String, String), AnswerLogProbs>,
}

impl ReplayAdapter {
    pub fn from_records(records: impl IntoIterator<Item = LogProbRecord>) -> Self {
        ReplayAdapter {
            records: records
                .into_iter()
                .map(|r| ((r.response_id, r.rubric_item_id), AnswerLogProbs { lp_true: r.lp_true, lp_false: r.lp_false }))
                .collect(),
        }
    }

    pub fn load(path: &Path) -> Result<Self, AdapterError> {
        let text = fs::read_to_string(path).map_err(|e| AdapterError::Unreachable(format!("{}: {e}", path.display())))?;
        let mut records = Vec::new();
        for (n, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            records.push(
                serde_json::from_str::<LogProbRecord>(line)
                    .map_err(|e| AdapterError::Malformed(format!("{}:{}: {e}", path.display(), n + 1)))?,
            );
        }
        Ok(Self::from_records(records))
    }
}

impl LogProbAdapter for ReplayAdapter {
    fn name(&self) -> String {
        "replay".into()
    }

    fn answer_logprobs(&self, pair: &EntailmentPair, _request: &GenerationRequest) -> Result<AnswerLogProbs, AdapterError> {
        self.records
            .get(&(pair.response_id.clone(), pair.rubric_item_id.clone()))
            .copied()
            .ok_or_else(|| AdapterError::Missing(format!("({}, {})", pair.response_id, pair.rubric_item_id)))
    }
}

/// OpenAI-compatible `/chat/completions` client.
///
/// Requests a single completion token with `top_logprobs` and reads the
/// entries whose token is exactly `"True"` or `"False"`. When only one of
/// the two appears, the other is assigned the lowest listed log-probability
/// (an upper bound on its true value). The API key is read from the named
/// environment variable on every request and never stored.
#[cfg(feature = "remote")]
pub struct ChatCompletionsAdapter {
    endpoint: String,
    model: String,
    api_key_env: Option<String>,
    agent: ureq::Agent,
}

#[cfg(feature = "remote")]
impl ChatCompletionsAdapter {
    pub const TOP_LOGPROBS: u32 = 20;

    pub fn new(endpoint: impl Into<String>, model: impl Into<String>, api_key_env: Option<String>) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(std::time::Duration::from_secs(120)))
            .build()
            .into();
        ChatCompletionsAdapter { endpoint: endpoint.into(), model: model.into(), api_key_env, agent }
    }

    fn body(&self, request: &GenerationRequest) -> serde_json::Value {
        serde_json::json!({
            "model": self.model,
            "messages": [{"role": "user", "content": request.prompt}],
            "temperature": request.sampling.temperature,
            "frequency_penalty": request.sampling.frequency_penalty,
            "presence_penalty": request.sampling.presence_penalty,
            "max_tokens": 1,
            "logprobs": true,
            "top_logprobs": Self::TOP_LOGPROBS,
        })
    }

    /// Extracts the answer log-probabilities from a response body.
    pub fn parse_response(body: &serde_json::Value) -> Result<AnswerLogProbs, AdapterError> {
        let top = body
            .pointer("/choices/0/logprobs/content/0/top_logprobs")
            .and_then(|v| v.as_array())
            .ok_or_else(|| AdapterError::Malformed("missing choices[0].logprobs.content[0].top_logprobs".into()))?;
        let mut lp_true = None;
        let mut lp_false = None;
        let mut lowest = f64::INFINITY;
        for entry in top {
            let (Some(token), Some(lp)) = (entry.get("token").and_then(|t| t.as_str()), entry.get("logprob").and_then(|l| l.as_f64()))
            else {
                return Err(AdapterError::Malformed(format!("bad top_logprobs entry {entry}")));
            };
            lowest = lowest.min(lp);
            match token {
                TRUE_TOKEN => lp_true = Some(lp),
                FALSE_TOKEN => lp_false = Some(lp),
                _ => {}
            }
        }
        match (lp_true, lp_false) {
            (None, None) => Err(AdapterError::Missing("both True and False tokens".into())),
            (t, f) => Ok(AnswerLogProbs { lp_true: t.unwrap_or(lowest), lp_false: f.unwrap_or(lowest) }),
        }
    }
}

#[cfg(feature = "remote")]
impl LogProbAdapter for ChatCompletionsAdapter {
    fn name(&self) -> String {
        self.model.clone()
    }

    fn answer_logprobs(&self, _pair: &EntailmentPair, request: &GenerationRequest) -> Result<AnswerLogProbs, AdapterError> {
        let url = format!("{}/chat/completions", self.endpoint.trim_end_matches('/'));
        let mut call = self.agent.post(&url);
        if let Some(var) = &self.api_key_env {
            let key = std::env::var(var)
                .map_err(|_| AdapterError::Unreachable(format!("environment variable {var} is not set")))?;
            call = call.header("Authorization", &format!("Bearer {key}"));
        }
        let mut response = call.send_json(self.body(request)).map_err(|e| AdapterError::Unreachable(e.to_string()))?;
        let body: serde_json::Value =
            response.body_mut().read_json().map_err(|e| AdapterError::Malformed(e.to_string()))?;
        Self::parse_response(&body)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair(premise: &str, hypothesis: &str) -> EntailmentPair {
        EntailmentPair {
            response_id: "r1".into(),
            rubric_item_id: "i1".into(),
            question_id: "q1".into(),
            premise: premise.into(),
            hypothesis: hypothesis.into(),
            gold: None,
        }
    }

    #[test]
    fn renders_placeholders_verbatim() {
        let out = render_prompt(&pair("a", "b"), "P: {premise} H: {hypothesis} True or False?").unwrap();
        assert_eq!(out, "P: a H: b True or False?");
    }

    #[test]
    fn placeholder_text_inside_values_is_not_expanded() {
        let out = render_prompt(&pair("{hypothesis}", "x"), "{premise}|{hypothesis}|{other}").unwrap();
        assert_eq!(out, "{hypothesis}|x|{other}");
    }

    #[test]
    fn missing_placeholder_is_an_error() {
        assert_eq!(
            render_prompt(&pair("a", "b"), "P: {premise} True or False?"),
            Err(BackendError::MissingPlaceholder("{hypothesis}"))
        );
    }

    #[test]
    fn replay_adapter_drives_decisions() {
        let adapter = ReplayAdapter::from_records([LogProbRecord {
            response_id: "r1".into(),
            rubric_item_id: "i1".into(),
            lp_true: -0.2,
            lp_false: -1.5,
        }]);
        let backend = GenerativeBackend::new(Box::new(adapter), None, SamplingParams::default()).unwrap();
        let preds = backend.predict(&[pair("x", "y")]).unwrap();
        assert!(preds[0].label);
        let mut missing = pair("x", "y");
        missing.rubric_item_id = "i2".into();
        let err = backend.predict(&[pair("x", "y"), missing]).unwrap_err();
        assert!(matches!(err, BackendError::Unavailable { first: 1, last: 1, .. }), "{err}");
    }

    #[cfg(feature = "remote")]
    #[test]
    fn parses_chat_completion_logprobs() {
        let body = serde_json::json!({"choices": [{"logprobs": {"content": [{"token": "True", "logprob": -0.1,
            "top_logprobs": [{"token": "True", "logprob": -0.1}, {"token": "False", "logprob": -2.4}, {"token": "true", "logprob": -5.0}]}]}}]});
        let lp = ChatCompletionsAdapter::parse_response(&body).unwrap();
        assert_eq!((lp.lp_true, lp.lp_false), (-0.1, -2.4));
        let only_false = serde_json::json!({"choices": [{"logprobs": {"content": [{"top_logprobs": [
            {"token": "False", "logprob": -0.3}, {"token": "Maybe", "logprob": -4.0}]}]}}]});
        let lp = ChatCompletionsAdapter::parse_response(&only_false).unwrap();
        assert_eq!((lp.lp_true, lp.lp_false), (-4.0, -0.3));
        assert!(ChatCompletionsAdapter::parse_response(&serde_json::json!({})).is_err());
    }
}
