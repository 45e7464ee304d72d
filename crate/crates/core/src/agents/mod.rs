//! Agent backends: scripted policies with a privileged ground-truth channel
//! and a remote chat-completions client.

mod remote;
mod scripted;
pub mod stub;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::protocol::StepInput;
use crate::render::VisibilityReport;
use crate::world::{ScenarioConfig, WorldState};

pub use remote::{remote_step, RemoteClient, RemoteEndpointConfig, DEFAULT_API_KEY_ENV};
pub use scripted::{plan_turn_toward, ScriptedAgent, ScriptedKind};

/// Everything an agent may look at for one step. Only scripted backends
/// read the privileged fields.
#[derive(Debug, Clone, Copy)]
pub struct StepContext<'a> {
    pub t: u32,
    pub scenario: &'a ScenarioConfig,
    pub state: &'a WorldState,
    pub visibility: &'a VisibilityReport,
    pub input: &'a StepInput,
    pub system_text: &'a str,
    pub user_text: &'a str,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BackendError {
    #[error("backend unavailable after {attempts} attempt(s): {last_error}")]
    Unavailable { attempts: u32, last_error: String },
    #[error("backend configuration error: {0}")]
    Config(String),
}

/// A policy that turns one step's prompts into a raw text reply.
pub trait Agent: Send {
    fn act(&mut self, ctx: &StepContext<'_>) -> Result<String, BackendError>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BackendSpec {
    PerfectOracle,
    RandomWalker {
        #[serde(default = "default_done_prob")]
        done_prob: f64,
    },
    BlindGuesser,
    Confabulator {
        #[serde(default = "default_true")]
        force_wrong: bool,
    },
    MirrorStarer,
    Remote(RemoteEndpointConfig),
}

fn default_done_prob() -> f64 {
    0.05
}

fn default_true() -> bool {
    true
}

impl BackendSpec {
    pub fn random_walker() -> Self {
        BackendSpec::RandomWalker { done_prob: default_done_prob() }
    }

    pub fn confabulator() -> Self {
        BackendSpec::Confabulator { force_wrong: true }
    }

    /// All scripted kinds with default parameters.
    pub fn scripted_kinds() -> Vec<BackendSpec> {
        vec![
            BackendSpec::PerfectOracle,
            BackendSpec::random_walker(),
            BackendSpec::BlindGuesser,
            BackendSpec::confabulator(),
            BackendSpec::MirrorStarer,
        ]
    }

    /// Short identifier used in traces and report rows.
    pub fn id(&self) -> String {
        match self {
            BackendSpec::PerfectOracle => "perfect_oracle".into(),
            BackendSpec::RandomWalker { .. } => "random_walker".into(),
            BackendSpec::BlindGuesser => "blind_guesser".into(),
            BackendSpec::Confabulator { .. } => "confabulator".into(),
            BackendSpec::MirrorStarer => "mirror_starer".into(),
            BackendSpec::Remote(cfg) => format!("remote:{}", cfg.model_id),
        }
    }

    pub fn is_scripted(&self) -> bool {
        !matches!(self, BackendSpec::Remote(_))
    }

    pub fn temperature(&self) -> Option<f64> {
        match self {
            BackendSpec::Remote(cfg) => Some(cfg.temperature),
            _ => None,
        }
    }

    pub fn parse_kind(name: &str) -> Option<BackendSpec> {
        Self::scripted_kinds().into_iter().find(|k| k.id() == name)
    }
}

/// Creates one agent per episode. Remote agents share a client so the
/// in-flight bound holds across parallel episodes.
#[derive(Clone)]
pub struct BackendFactory {
    spec: BackendSpec,
    remote: Option<Arc<RemoteClient>>,
}

impl BackendFactory {
    /// Remote specs read their auth token from the environment here.
    pub fn new(spec: BackendSpec) -> Result<Self, BackendError> {
        let remote = match &spec {
            BackendSpec::Remote(cfg) => Some(Arc::new(RemoteClient::from_env(cfg.clone())?)),
            _ => None,
        };
        Ok(BackendFactory { spec, remote })
    }

    pub fn with_client(spec: BackendSpec, client: Arc<RemoteClient>) -> Self {
        BackendFactory { spec, remote: Some(client) }
    }

    pub fn spec(&self) -> &BackendSpec {
        &self.spec
    }

    pub fn agent_for(&self, scenario: &ScenarioConfig) -> Box<dyn Agent> {
        match (&self.spec, &self.remote) {
            (BackendSpec::Remote(_), Some(client)) => Box::new(RemoteAgent { client: Arc::clone(client) }),
            (BackendSpec::Remote(_), None) => unreachable!("remote factory without client"),
            (spec, _) => Box::new(ScriptedAgent::new(
                ScriptedKind::from_spec(spec).expect("scripted spec"),
                scenario,
            )),
        }
    }
}

struct RemoteAgent {
    client: Arc<RemoteClient>,
}

impl Agent for RemoteAgent {
    fn act(&mut self, ctx: &StepContext<'_>) -> Result<String, BackendError> {
        self.client.step(ctx.system_text, ctx.user_text, &ctx.input.frame)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn backend_spec_serde_shape() {
        let v = serde_json::to_value(BackendSpec::random_walker()).unwrap();
        assert_eq!(v, serde_json::json!({"kind": "random_walker", "done_prob": 0.05}));
        let spec: BackendSpec = serde_json::from_str(r#"{"kind":"confabulator"}"#).unwrap();
        assert_eq!(spec, BackendSpec::Confabulator { force_wrong: true });
    }

    #[test]
    fn parse_kind_by_id() {
        assert_eq!(BackendSpec::parse_kind("mirror_starer"), Some(BackendSpec::MirrorStarer));
        assert_eq!(BackendSpec::parse_kind("nope"), None);
    }
}
