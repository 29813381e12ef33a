use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::Scorer;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoreRequest {
    pub model_id: String,
    /// Access-log records, as JSON objects or as JSON-encoded strings.
    pub events: Vec<Value>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UserScore {
    pub user_id: String,
    pub score: f64,
    pub decision: i8,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreResponse {
    pub model_id: String,
    pub user_scores: Vec<UserScore>,
    pub events_accepted: usize,
    pub events_malformed: usize,
}

/// Loaded models by id.
#[derive(Clone, Debug, Default)]
pub struct ModelRegistry {
    models: BTreeMap<String, Scorer>,
}

impl ModelRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, id: impl Into<String>, scorer: Scorer) {
        self.models.insert(id.into(), scorer);
    }

    pub fn get(&self, id: &str) -> Option<&Scorer> {
        self.models.get(id)
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.models.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.models.len()
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }
}

fn error_body(status: u16, message: impl Into<String>) -> (u16, String) {
    let body = serde_json::json!({ "status": status, "error": message.into() });
    (status, body.to_string())
}

/// Handles one `POST /v1/score` body and returns the status code and JSON
/// response. Each request is scored on its own events only.
pub fn handle_score(registry: &ModelRegistry, body: &[u8]) -> (u16, String) {
    let req: ScoreRequest = match serde_json::from_slice(body) {
        Ok(r) => r,
        Err(e) => return error_body(400, format!("malformed request body: {e}")),
    };
    let Some(scorer) = registry.get(&req.model_id) else {
        return error_body(404, format!("unknown model_id {:?}", req.model_id));
    };
    let mut events = Vec::with_capacity(req.events.len());
    let mut malformed = 0;
    for v in &req.events {
        let line = match v {
            Value::String(s) => s.clone(),
            other => other.to_string(),
        };
        match scorer.parse_event(&line) {
            Ok(e) => events.push(e),
            Err(_) => malformed += 1,
        }
    }
    if events.is_empty() {
        let why = if req.events.is_empty() {
            "events list is empty"
        } else {
            "every event is malformed"
        };
        return error_body(422, why);
    }
    match scorer.score_batch(&events) {
        Ok(user_scores) => {
            let resp = ScoreResponse {
                model_id: req.model_id,
                user_scores,
                events_accepted: events.len(),
                events_malformed: malformed,
            };
            (200, serde_json::to_string(&resp).expect("response serializes"))
        }
        Err(e) => error_body(500, e.to_string()),
    }
}
