//! Wire formats: JSON control messages and binary position frames.
//!
//! A frame payload is `iteration: u64`, `stress: f64`, `count: u32`, then
//! `count` pairs of `f32` coordinates, all little-endian. Each payload is
//! preceded on the socket by a JSON text header describing it.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// Bytes before the coordinates in a frame payload.
pub const FRAME_PREFIX_LEN: usize = 8 + 8 + 4;

/// Payload length for `count` points.
pub fn frame_len(count: usize) -> usize {
    FRAME_PREFIX_LEN + 8 * count
}

pub fn encode_frame(iteration: u64, stress: f64, positions: &[[f64; 2]]) -> Vec<u8> {
    let mut out = Vec::with_capacity(frame_len(positions.len()));
    out.extend_from_slice(&iteration.to_le_bytes());
    out.extend_from_slice(&stress.to_le_bytes());
    out.extend_from_slice(&(positions.len() as u32).to_le_bytes());
    for p in positions {
        out.extend_from_slice(&(p[0] as f32).to_le_bytes());
        out.extend_from_slice(&(p[1] as f32).to_le_bytes());
    }
    out
}

/// A decoded payload.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodedFrame {
    pub iteration: u64,
    pub stress: f64,
    pub positions: Vec<[f32; 2]>,
}

/// Parses a payload, rejecting any whose length disagrees with its count.
pub fn decode_frame(bytes: &[u8]) -> Option<DecodedFrame> {
    if bytes.len() < FRAME_PREFIX_LEN {
        return None;
    }
    let iteration = u64::from_le_bytes(bytes[0..8].try_into().ok()?);
    let stress = f64::from_le_bytes(bytes[8..16].try_into().ok()?);
    let count = u32::from_le_bytes(bytes[16..20].try_into().ok()?) as usize;
    if bytes.len() != frame_len(count) {
        return None;
    }
    let positions = bytes[FRAME_PREFIX_LEN..]
        .chunks_exact(8)
        .map(|c| {
            [
                f32::from_le_bytes(c[0..4].try_into().expect("4 bytes")),
                f32::from_le_bytes(c[4..8].try_into().expect("4 bytes")),
            ]
        })
        .collect();
    Some(DecodedFrame {
        iteration,
        stress,
        positions,
    })
}

/// A steering command. Parameter changes take effect at the next iteration boundary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Control {
    /// Replaces the dataset and configuration; the session restarts paused.
    Load {
        config: BTreeMap<String, serde_json::Value>,
    },
    Start,
    Pause,
    Resume,
    /// One of `a`, `b`, `c`, `rn`, `stride`.
    SetParam {
        name: String,
        value: f64,
    },
    /// Original point ids to excise.
    RemovePoints {
        ids: Vec<u32>,
    },
    /// New random layout (and random edges) from `seed`, iteration back to 0.
    Restart {
        seed: u64,
    },
    /// Computes cf over the live points; attached to the ack and the next frame.
    RequestEval {
        #[serde(default)]
        nn_max: Option<usize>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamsView {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub rn: usize,
    pub stride: u64,
    pub use_nn: usize,
    pub max_iters: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalView {
    pub cf: f64,
    pub nn_max: usize,
    pub curve: Vec<f64>,
}

/// JSON header sent before every binary payload.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameHeader {
    pub iteration: u64,
    pub stress: f64,
    pub count: usize,
    pub running: bool,
    /// Sent while paused; positions are unchanged.
    pub heartbeat: bool,
    pub params: ParamsView,
    /// Bumped whenever the set of live points changes.
    pub ids_version: u64,
    /// Original ids of the points in payload order; present when `ids_version` changed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ids: Option<Vec<u32>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eval: Option<EvalView>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Reply to a control message.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ack {
    pub ok: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    pub iteration: u64,
    pub count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eval: Option<EvalView>,
}

/// Text messages the server sends on the frame socket.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerText {
    /// Describes the binary message that follows.
    Frame(FrameHeader),
    /// Reply to a control sent over the socket.
    Ack(Ack),
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frame_round_trip_and_length_check() {
        let bytes = encode_frame(7, 1.5, &[[0.5, -2.0], [3.0, 4.25]]);
        assert_eq!(bytes.len(), 36);
        let f = decode_frame(&bytes).unwrap();
        assert_eq!(f.iteration, 7);
        assert_eq!(f.stress, 1.5);
        assert_eq!(f.positions, vec![[0.5, -2.0], [3.0, 4.25]]);
        assert!(decode_frame(&bytes[..35]).is_none());
        assert!(decode_frame(&bytes[..10]).is_none());
    }

    #[test]
    fn seventy_thousand_points() {
        assert_eq!(frame_len(70_000), 16 + 4 + 560_000);
        let bytes = encode_frame(0, 0.0, &vec![[0.0; 2]; 70_000]);
        assert_eq!(bytes.len(), 560_020);
    }

    #[test]
    fn control_json_shapes() {
        let c: Control = serde_json::from_str(r#"{"kind":"set_param","name":"c","value":0.005}"#).unwrap();
        assert_eq!(
            c,
            Control::SetParam {
                name: "c".into(),
                value: 0.005
            }
        );
        let c: Control = serde_json::from_str(r#"{"kind":"request_eval"}"#).unwrap();
        assert_eq!(c, Control::RequestEval { nn_max: None });
        let c: Control = serde_json::from_str(r#"{"kind":"remove_points","ids":[]}"#).unwrap();
        assert_eq!(c, Control::RemovePoints { ids: vec![] });
        assert!(serde_json::from_str::<Control>(r#"{"kind":"explode"}"#).is_err());
    }
}
