//! Wire format: one JSON envelope `{"type", "payload", "tick"}` per
//! WebSocket text message.

use deskbench::envs::socialnav::SocialNavEvent;
use deskbench::envs::RobotCommand;
use deskbench::record::Entity;
use serde::{Deserialize, Serialize};
use serde_json::Value;

pub const PROTOCOL_VERSION: u32 = 1;

/// The only subscription channel.
pub const SNAPSHOT_CHANNEL: &str = "snapshots";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    #[serde(rename = "type")]
    pub kind: String,
    #[serde(default)]
    pub payload: Value,
    #[serde(default)]
    pub tick: u64,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ProtocolError {
    #[error("malformed message: {0}")]
    Malformed(String),
    #[error("unknown message type {0:?}")]
    UnknownType(String),
    #[error("bad payload for {kind:?}: {message}")]
    Payload { kind: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TeleopPayload {
    pub v: f64,
    pub omega: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResetPayload {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatePayload {
    pub hz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubscribePayload {
    pub channel: String,
}

/// Client → server.
#[derive(Debug, Clone, PartialEq)]
pub enum ControlMsg {
    Teleop { v: f64, omega: f64 },
    Reset { seed: Option<u64> },
    Pause,
    Resume,
    SetRate { hz: f64 },
    Subscribe { channel: String },
}

fn payload<T: serde::de::DeserializeOwned>(kind: &str, v: &Value) -> Result<T, ProtocolError> {
    let v = if v.is_null() { Value::Object(Default::default()) } else { v.clone() };
    serde_json::from_value(v).map_err(|e| ProtocolError::Payload {
        kind: kind.to_string(),
        message: e.to_string(),
    })
}

fn to_value<T: Serialize>(t: &T) -> Value {
    serde_json::to_value(t).expect("protocol payloads serialize")
}

impl ControlMsg {
    pub fn parse(text: &str) -> Result<Self, ProtocolError> {
        let env: Envelope = serde_json::from_str(text).map_err(|e| ProtocolError::Malformed(e.to_string()))?;
        Self::from_envelope(&env)
    }

    pub fn from_envelope(env: &Envelope) -> Result<Self, ProtocolError> {
        let k = env.kind.as_str();
        Ok(match k {
            "teleop" => {
                let p: TeleopPayload = payload(k, &env.payload)?;
                ControlMsg::Teleop { v: p.v, omega: p.omega }
            }
            "reset" => ControlMsg::Reset {
                seed: payload::<ResetPayload>(k, &env.payload)?.seed,
            },
            "pause" => ControlMsg::Pause,
            "resume" => ControlMsg::Resume,
            "set_rate" => ControlMsg::SetRate {
                hz: payload::<RatePayload>(k, &env.payload)?.hz,
            },
            "subscribe" => ControlMsg::Subscribe {
                channel: payload::<SubscribePayload>(k, &env.payload)?.channel,
            },
            other => return Err(ProtocolError::UnknownType(other.to_string())),
        })
    }

    pub fn to_envelope(&self, tick: u64) -> Envelope {
        let (kind, payload) = match self {
            ControlMsg::Teleop { v, omega } => ("teleop", to_value(&TeleopPayload { v: *v, omega: *omega })),
            ControlMsg::Reset { seed } => ("reset", to_value(&ResetPayload { seed: *seed })),
            ControlMsg::Pause => ("pause", Value::Object(Default::default())),
            ControlMsg::Resume => ("resume", Value::Object(Default::default())),
            ControlMsg::SetRate { hz } => ("set_rate", to_value(&RatePayload { hz: *hz })),
            ControlMsg::Subscribe { channel } => ("subscribe", to_value(&SubscribePayload { channel: channel.clone() })),
        };
        Envelope {
            kind: kind.to_string(),
            payload,
            tick,
        }
    }

    pub fn to_text(&self, tick: u64) -> String {
        serde_json::to_string(&self.to_envelope(tick)).expect("envelopes serialize")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpisodeStatus {
    Running,
    Succeeded,
    Failed,
}

/// Scoring readouts kept current by the server.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LiveMetrics {
    pub collisions: u32,
    pub proxemics_samples: u32,
    pub type1_samples: u32,
    pub type2_samples: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub session_id: String,
    /// Snapshot sequence number; strictly increasing for the session.
    pub tick: u64,
    /// Simulation step within the current episode.
    pub sim_step: u64,
    pub sim_time: f64,
    pub episode: u32,
    pub seed: u64,
    pub entities: Vec<Entity>,
    pub events_since_last: Vec<SocialNavEvent>,
    pub episode_status: EpisodeStatus,
    pub paused: bool,
    /// Command the robot is executing.
    pub command: RobotCommand,
    pub goal: [f64; 2],
    pub metrics: LiveMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WelcomePayload {
    pub session_id: String,
    pub client_id: u64,
    pub protocol_version: u32,
    pub channels: Vec<String>,
}

/// Server → client.
#[derive(Debug, Clone, PartialEq)]
pub enum ServerMsg {
    Welcome(WelcomePayload),
    Snapshot(Box<Snapshot>),
    /// Whether the client now holds teleop authority.
    Authority { granted: bool },
    Error { message: String },
}

impl ServerMsg {
    pub fn to_envelope(&self, tick: u64) -> Envelope {
        let (kind, payload) = match self {
            ServerMsg::Welcome(w) => ("welcome", to_value(w)),
            ServerMsg::Snapshot(s) => ("snapshot", to_value(s)),
            ServerMsg::Authority { granted } => ("authority", serde_json::json!({ "granted": granted })),
            ServerMsg::Error { message } => ("error", serde_json::json!({ "message": message })),
        };
        Envelope {
            kind: kind.to_string(),
            payload,
            tick,
        }
    }

    pub fn to_text(&self, tick: u64) -> String {
        serde_json::to_string(&self.to_envelope(tick)).expect("envelopes serialize")
    }

    pub fn parse(text: &str) -> Result<Self, ProtocolError> {
        let env: Envelope = serde_json::from_str(text).map_err(|e| ProtocolError::Malformed(e.to_string()))?;
        let k = env.kind.as_str();
        Ok(match k {
            "welcome" => ServerMsg::Welcome(payload(k, &env.payload)?),
            "snapshot" => ServerMsg::Snapshot(Box::new(payload(k, &env.payload)?)),
            "authority" => {
                #[derive(Deserialize)]
                struct A {
                    granted: bool,
                }
                ServerMsg::Authority {
                    granted: payload::<A>(k, &env.payload)?.granted,
                }
            }
            "error" => {
                #[derive(Deserialize)]
                struct E {
                    message: String,
                }
                ServerMsg::Error {
                    message: payload::<E>(k, &env.payload)?.message,
                }
            }
            other => return Err(ProtocolError::UnknownType(other.to_string())),
        })
    }
}
