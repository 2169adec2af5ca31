//! Wire messages. Both transports carry one JSON object per line.

use lexgaze_core::session::Detection;
use lexgaze_core::text::DocumentLayout;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClientMsg {
    Gaze { t_ms: f64, x: f64, y: f64 },
    OpenDoc { doc_id: String },
    /// Close every window the stream has reached without waiting for the
    /// clock (end of a recorded stream).
    Flush,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum State {
    /// Sent once per connection, lists the servable documents.
    Ready,
    /// A document was opened; carries its layout.
    Opened,
    /// Reply to `flush`.
    Flushed,
    /// The previous message was rejected; the connection stays usable.
    Error,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Status {
    pub state: State,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub doc_id: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub docs: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub layout: Option<DocumentLayout>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    /// Windows closed so far in this session.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub windows: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

impl Status {
    pub fn new(state: State) -> Self {
        Self {
            state,
            doc_id: None,
            docs: None,
            layout: None,
            threshold: None,
            windows: None,
            message: None,
        }
    }

    pub fn error(message: impl Into<String>) -> Self {
        Self {
            message: Some(message.into()),
            ..Self::new(State::Error)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectionEvent {
    pub word: String,
    pub word_index: usize,
    pub window: usize,
    pub p: f64,
    pub definition: Option<String>,
}

impl DetectionEvent {
    pub fn new(d: &Detection, definition: Option<String>) -> Self {
        Self {
            word: d.word.clone(),
            word_index: d.word_index,
            window: d.window,
            p: d.p,
            definition,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMsg {
    Detection(DetectionEvent),
    Status(Status),
}

impl ServerMsg {
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("server messages serialize")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn client_messages_parse() {
        let g: ClientMsg = serde_json::from_str(r#"{"type":"gaze","t_ms":12.5,"x":300,"y":140}"#).unwrap();
        assert_eq!(g, ClientMsg::Gaze { t_ms: 12.5, x: 300.0, y: 140.0 });
        let o: ClientMsg = serde_json::from_str(r#"{"type":"open_doc","doc_id":"d03"}"#).unwrap();
        assert_eq!(o, ClientMsg::OpenDoc { doc_id: "d03".into() });
        assert!(serde_json::from_str::<ClientMsg>(r#"{"type":"gaze","t_ms":1}"#).is_err());
    }

    #[test]
    fn detection_wire_shape() {
        let m = ServerMsg::Detection(DetectionEvent {
            word: "ferric".into(),
            word_index: 4,
            window: 2,
            p: 0.75,
            definition: None,
        });
        let v: serde_json::Value = serde_json::from_str(&m.to_line()).unwrap();
        assert_eq!(v["type"], "detection");
        assert_eq!(v["word_index"], 4);
        assert!(v["definition"].is_null());
        let s = ServerMsg::Status(Status::error("bad"));
        assert_eq!(s.to_line(), r#"{"type":"status","state":"error","message":"bad"}"#);
    }
}
