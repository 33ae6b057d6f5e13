//! JSON-lines protocol for driving the ego vehicle from an external agent.
//!
//! The harness sends `init`, waits for `ready`, then alternates one
//! `tick_request` with one `control_reply` per tick and closes with
//! `shutdown`. Every message is a single line of UTF-8 JSON.

mod agent;
mod session;

pub use agent::serve_example_agent;
pub use session::{connect, session_label, AgentConfig, AgentSession, SessionRegistry, Transport};

use serde::{Deserialize, Serialize};

use crate::criticality::VistaContext;
use crate::dynamics::{AdProfile, KinematicCommand};
use crate::vista::Vista;

fn default_length() -> f64 {
    5.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum BridgeMessage {
    Init {
        context: VistaContext,
        profile: AdProfile,
        dt: f64,
        #[serde(default = "default_length")]
        vehicle_length: f64,
    },
    Ready {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        agent: Option<String>,
    },
    TickRequest {
        tick: u64,
        vista: Vista,
    },
    ControlReply {
        tick: u64,
        command: KinematicCommand,
        #[serde(default, skip_serializing_if = "std::ops::Not::not")]
        lane_change: bool,
    },
    Shutdown {
        reason: String,
    },
}

impl BridgeMessage {
    pub fn type_name(&self) -> &'static str {
        match self {
            BridgeMessage::Init { .. } => "init",
            BridgeMessage::Ready { .. } => "ready",
            BridgeMessage::TickRequest { .. } => "tick_request",
            BridgeMessage::ControlReply { .. } => "control_reply",
            BridgeMessage::Shutdown { .. } => "shutdown",
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum BridgeError {
    #[error("cannot decode message: {0}")]
    Decode(String),
    #[error("protocol violation: {0}")]
    Protocol(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

/// One newline-terminated line.
pub fn encode(msg: &BridgeMessage) -> String {
    let mut line = serde_json::to_string(msg).expect("bridge messages serialize");
    line.push('\n');
    line
}

pub fn decode(line: &str) -> Result<BridgeMessage, BridgeError> {
    serde_json::from_str(line.trim_end_matches(['\n', '\r'])).map_err(|e| BridgeError::Decode(e.to_string()))
}
