//! Newline-delimited JSON frames exchanged with an external twin process.
//!
//! ```text
//! -> {"cmd":"init","x0":[...]}                 <- {"ok":true} | {"error":"..."}
//! -> {"cmd":"step","a":3,"raw":[...]}           <- {"x":[...]} | {"error":"..."}
//! -> {"cmd":"reset"}                            <- {"ok":true}
//! ```
//!
//! `raw` is optional. Every frame is one JSON object on one line; unknown
//! fields and unknown commands are rejected.

use serde_json::{Map, Value};
use thiserror::Error;

#[derive(Clone, Debug, PartialEq)]
pub enum Message {
    Init { x0: Vec<f64> },
    Step { a: usize, raw: Option<Vec<f64>> },
    Reset,
    Ok,
    Observation { x: Vec<f64> },
    Error { message: String },
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
#[error("{message}")]
pub struct FrameError {
    /// Byte offset within the frame where decoding failed, when known.
    pub offset: Option<usize>,
    pub message: String,
}

impl FrameError {
    fn new(message: impl Into<String>) -> Self {
        FrameError { offset: None, message: message.into() }
    }

    fn at(offset: usize, message: impl Into<String>) -> Self {
        FrameError { offset: Some(offset), message: message.into() }
    }
}

impl Message {
    pub fn is_command(&self) -> bool {
        matches!(self, Message::Init { .. } | Message::Step { .. } | Message::Reset)
    }

    /// One line of JSON, without the trailing newline. `cmd` comes first.
    pub fn encode(&self) -> String {
        match self {
            Message::Init { x0 } => format!(r#"{{"cmd":"init","x0":{}}}"#, floats(x0)),
            Message::Step { a, raw: None } => format!(r#"{{"cmd":"step","a":{a}}}"#),
            Message::Step { a, raw: Some(raw) } => {
                format!(r#"{{"cmd":"step","a":{a},"raw":{}}}"#, floats(raw))
            }
            Message::Reset => r#"{"cmd":"reset"}"#.to_string(),
            Message::Ok => r#"{"ok":true}"#.to_string(),
            Message::Observation { x } => format!(r#"{{"x":{}}}"#, floats(x)),
            Message::Error { message } => format!(r#"{{"error":{}}}"#, Value::from(message.as_str())),
        }
    }

    pub fn decode(frame: &str) -> Result<Message, FrameError> {
        let frame = frame.strip_suffix('\n').unwrap_or(frame);
        let frame = frame.strip_suffix('\r').unwrap_or(frame);
        if let Some(i) = frame.find('\n') {
            return Err(FrameError::at(i, "frame spans more than one line"));
        }
        let mut stream = serde_json::Deserializer::from_str(frame).into_iter::<Value>();
        let value = match stream.next() {
            None => return Err(FrameError::at(0, "empty frame")),
            Some(Err(e)) => return Err(FrameError::at(stream.byte_offset(), format!("malformed JSON: {e}"))),
            Some(Ok(v)) => v,
        };
        let end = stream.byte_offset();
        if let Some(k) = frame[end..].find(|c: char| !c.is_whitespace()) {
            return Err(FrameError::at(end + k, format!("trailing characters at byte offset {}", end + k)));
        }
        let Value::Object(obj) = value else {
            return Err(FrameError::at(0, "frame is not a JSON object"));
        };
        decode_object(&obj)
    }
}

fn floats(v: &[f64]) -> String {
    Value::Array(v.iter().map(|&f| Value::from(f)).collect()).to_string()
}

fn only(obj: &Map<String, Value>, allowed: &[&str]) -> Result<(), FrameError> {
    match obj.keys().find(|k| !allowed.contains(&k.as_str())) {
        Some(k) => Err(FrameError::new(format!("unknown field `{k}`"))),
        None => Ok(()),
    }
}

fn vector(obj: &Map<String, Value>, key: &str) -> Result<Vec<f64>, FrameError> {
    let arr = obj
        .get(key)
        .ok_or_else(|| FrameError::new(format!("missing field `{key}`")))?
        .as_array()
        .ok_or_else(|| FrameError::new(format!("`{key}` is not an array")))?;
    arr.iter()
        .map(|v| v.as_f64().ok_or_else(|| FrameError::new(format!("`{key}` holds non-number {v}"))))
        .collect()
}

fn decode_object(obj: &Map<String, Value>) -> Result<Message, FrameError> {
    if let Some(cmd) = obj.get("cmd") {
        let cmd = cmd.as_str().ok_or_else(|| FrameError::new("`cmd` is not a string"))?;
        return match cmd {
            "init" => {
                only(obj, &["cmd", "x0"])?;
                Ok(Message::Init { x0: vector(obj, "x0")? })
            }
            "step" => {
                only(obj, &["cmd", "a", "raw"])?;
                let a = obj
                    .get("a")
                    .ok_or_else(|| FrameError::new("missing field `a`"))?
                    .as_u64()
                    .ok_or_else(|| FrameError::new("`a` is not a nonnegative integer"))?;
                let raw = match obj.get("raw") {
                    None | Some(Value::Null) => None,
                    Some(_) => Some(vector(obj, "raw")?),
                };
                Ok(Message::Step { a: a as usize, raw })
            }
            "reset" => {
                only(obj, &["cmd"])?;
                Ok(Message::Reset)
            }
            other => Err(FrameError::new(format!("unknown command `{other}`"))),
        };
    }
    if obj.contains_key("ok") {
        only(obj, &["ok"])?;
        return match obj["ok"] {
            Value::Bool(true) => Ok(Message::Ok),
            _ => Err(FrameError::new("`ok` must be true")),
        };
    }
    if obj.contains_key("x") {
        only(obj, &["x"])?;
        return Ok(Message::Observation { x: vector(obj, "x")? });
    }
    if let Some(e) = obj.get("error") {
        only(obj, &["error"])?;
        let message = e.as_str().ok_or_else(|| FrameError::new("`error` is not a string"))?;
        return Ok(Message::Error { message: message.to_string() });
    }
    Err(FrameError::new("frame is neither a command nor a response"))
}
