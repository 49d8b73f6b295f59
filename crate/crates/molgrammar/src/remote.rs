//! Remote oracles and judges over [`JsonPost`].

use molgrammar_core::oracle::{
    ChatMessage, ChatTransport, Choice, Oracle, OracleError, Phase, SelectionKind, SelectionRequest,
    SelectionResponse,
};
use molgrammar_core::rank::{DesignStory, Judge, RankError};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::http::JsonPost;

/// Wire form of a selection request. Choices list 1-based motif numbers as
/// they appear in `encoded_context`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireRequest {
    pub request_id: String,
    pub phase: Phase,
    pub kind: SelectionKind,
    pub encoded_context: String,
    pub choices: Vec<Vec<usize>>,
    pub allow_refusal: bool,
}

impl WireRequest {
    pub fn from_request(req: &SelectionRequest) -> Self {
        let choices = req
            .choices
            .iter()
            .map(|c| match *c {
                Choice::Single(i) => vec![i + 1],
                Choice::Pair(i, j) => vec![i + 1, j + 1],
            })
            .collect();
        WireRequest {
            request_id: format!("{:016x}-{}", req.seed, req.step),
            phase: req.phase,
            kind: req.kind,
            encoded_context: req.context.clone(),
            choices,
            allow_refusal: req.allow_refusal,
        }
    }
}

/// `chosen` indexes `choices` (0-based); `null` refuses.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WireResponse {
    pub chosen: Option<usize>,
    #[serde(default)]
    pub reasoning: String,
    #[serde(default)]
    pub summarized: String,
}

/// Selection service speaking the JSON request/response protocol directly.
pub struct RemoteOracle<P> {
    pub client: P,
    pub endpoint: String,
}

impl<P: JsonPost> Oracle for RemoteOracle<P> {
    fn select(&self, req: &SelectionRequest) -> Result<SelectionResponse, OracleError> {
        req.validate()?;
        let body = serde_json::to_value(WireRequest::from_request(req))
            .map_err(|e| OracleError::InvalidRequest(e.to_string()))?;
        let reply = self.client.post_json(&self.endpoint, &body).map_err(|e| OracleError::Transport(e.to_string()))?;
        let wire: WireResponse =
            serde_json::from_value(reply).map_err(|e| OracleError::ParseFailure(e.to_string()))?;
        let resp = SelectionResponse { chosen: wire.chosen, reasoning: wire.reasoning, summarized: wire.summarized };
        resp.validate(req)?;
        Ok(resp)
    }
}

/// OpenAI-style chat completions endpoint used by
/// [`molgrammar_core::oracle::ChatOracle`].
pub struct ChatEndpoint<P> {
    pub client: P,
    pub endpoint: String,
    pub model: String,
}

impl<P: JsonPost> ChatTransport for ChatEndpoint<P> {
    fn complete(&self, messages: &[ChatMessage]) -> Result<String, OracleError> {
        let body = json!({ "model": self.model, "messages": messages, "temperature": 0 });
        let reply = self.client.post_json(&self.endpoint, &body).map_err(|e| OracleError::Transport(e.to_string()))?;
        reply
            .pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(str::to_owned)
            .ok_or_else(|| OracleError::ParseFailure(format!("no message content in {reply}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgeRequest {
    pub molecule: String,
    pub story_a: String,
    pub story_b: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgeReply {
    /// Probability that `story_a` is the better design.
    pub p_first: f64,
}

pub struct RemoteJudge<P> {
    pub client: P,
    pub endpoint: String,
}

impl<P: JsonPost> Judge for RemoteJudge<P> {
    fn p_first(&self, molecule: &str, first: &DesignStory, second: &DesignStory) -> Result<f64, RankError> {
        let body = JudgeRequest { molecule: molecule.to_owned(), story_a: first.render(), story_b: second.render() };
        let body = serde_json::to_value(body).map_err(|e| RankError::JudgeParseFailure(e.to_string()))?;
        let reply =
            self.client.post_json(&self.endpoint, &body).map_err(|e| RankError::JudgeTransport(e.to_string()))?;
        let r: JudgeReply = serde_json::from_value(reply).map_err(|e| RankError::JudgeParseFailure(e.to_string()))?;
        if !(0.0..=1.0).contains(&r.p_first) {
            return Err(RankError::JudgeParseFailure(format!("p_first {} outside [0, 1]", r.p_first)));
        }
        Ok(r.p_first)
    }
}
