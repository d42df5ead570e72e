//! Wire schema: one JSON document per line, every document carrying
//! `"v": "multigen/1"` and a `type` tag.

use serde::de::DeserializeOwned;
use serde::ser::SerializeSeq;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::value::RawValue;
use serde_json::Value;
use thiserror::Error;
use worldmem_core::dynamics::DynamicsError;
use worldmem_core::level::MapDocument;
use worldmem_core::observation::SpriteProjection;
use worldmem_core::{Action, Event, MotionConfig, PlayerId};

pub const PROTOCOL_VERSION: &str = "multigen/1";

/// Longest accepted line in bytes.
pub const MAX_LINE_BYTES: usize = 1 << 20;

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("malformed message: {0}")]
    Malformed(String),
    #[error("missing protocol version")]
    MissingVersion,
    #[error("unsupported protocol version {0:?}")]
    Version(String),
    #[error("invalid action: {0}")]
    InvalidAction(#[from] DynamicsError),
}

impl ProtocolError {
    /// The `code` carried by the error message sent for this failure.
    pub fn code(&self) -> ErrorCode {
        match self {
            ProtocolError::Version(_) => ErrorCode::Version,
            _ => ErrorCode::Protocol,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    Full,
    Version,
    Protocol,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ClientMessage {
    Join {
        name: String,
    },
    Action {
        tick: u64,
        #[serde(rename = "move")]
        forward: i64,
        strafe: i64,
        turn: i64,
        attack: bool,
    },
    Bye,
}

impl ClientMessage {
    pub fn action(tick: u64, a: Action) -> Self {
        ClientMessage::Action {
            tick,
            forward: a.forward.into(),
            strafe: a.strafe.into(),
            turn: a.turn.into(),
            attack: a.attack,
        }
    }

    /// The validated action of an `action` message.
    pub fn to_action(&self) -> Result<Option<Action>, ProtocolError> {
        match *self {
            ClientMessage::Action {
                forward,
                strafe,
                turn,
                attack,
                ..
            } => Ok(Some(Action::new(forward, strafe, turn, attack)?)),
            _ => Ok(None),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WirePose {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WireStatus {
    Active,
    Dead,
}

/// Disparity columns written with exactly six fractional digits.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FixedDisparity(pub Vec<f64>);

impl Serialize for FixedDisparity {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(self.0.len()))?;
        for d in &self.0 {
            let raw = RawValue::from_string(format!("{d:.6}")).map_err(serde::ser::Error::custom)?;
            seq.serialize_element(&raw)?;
        }
        seq.end()
    }
}

impl<'de> Deserialize<'de> for FixedDisparity {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        Vec::<f64>::deserialize(d).map(FixedDisparity)
    }
}

/// Per-player readout for one post-advance tick. Dead players get their
/// last pose and empty readouts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TickUpdate {
    pub tick: u64,
    pub snapshot_hash: String,
    pub pose: WirePose,
    pub status: WireStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub respawn_tick: Option<u64>,
    pub disparity: FixedDisparity,
    pub sprites: Vec<SpriteProjection>,
    /// Every event of the tick except movement, which the poses convey.
    pub events: Vec<Event>,
    /// Base64 PPM of the reference rendering, in frames mode only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ServerMessage {
    Joined {
        player_id: PlayerId,
        tick_rate: f64,
        map: MapDocument,
        motion: MotionConfig,
        tick: u64,
    },
    Tick(TickUpdate),
    Error {
        code: ErrorCode,
        detail: String,
    },
    Bye,
}

impl ServerMessage {
    pub fn error(code: ErrorCode, detail: impl Into<String>) -> Self {
        ServerMessage::Error {
            code,
            detail: detail.into(),
        }
    }
}

#[derive(Serialize)]
struct Envelope<'a, T> {
    v: &'static str,
    #[serde(flatten)]
    msg: &'a T,
}

/// One wire line (without the trailing newline).
pub fn encode<T: Serialize>(msg: &T) -> String {
    serde_json::to_string(&Envelope { v: PROTOCOL_VERSION, msg }).expect("wire messages serialize")
}

/// Parses one wire line, checking the version before the payload.
pub fn decode<T: DeserializeOwned>(line: &str) -> Result<T, ProtocolError> {
    let mut value: Value = serde_json::from_str(line).map_err(|e| ProtocolError::Malformed(e.to_string()))?;
    let obj = value
        .as_object_mut()
        .ok_or_else(|| ProtocolError::Malformed("expected an object".into()))?;
    match obj.remove("v") {
        None => return Err(ProtocolError::MissingVersion),
        Some(Value::String(v)) if v == PROTOCOL_VERSION => {}
        Some(Value::String(v)) => return Err(ProtocolError::Version(v)),
        Some(other) => return Err(ProtocolError::Version(other.to_string())),
    }
    serde_json::from_value(value).map_err(|e| ProtocolError::Malformed(e.to_string()))
}
