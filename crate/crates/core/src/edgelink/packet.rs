//! Binary wire packets: weight snapshots (cloud→edge) and transition
//! batches (edge→cloud).
//!
//! Weight packet layout (little-endian):
//! `"CRLW" | version u16 | sequence u32 | layer_count u16 |
//!  per layer (rows u32, cols u32, weights f32*, bias f32*) | crc32 u32`.
//! The CRC covers every preceding byte.
//!
//! Buffer packet layout:
//! `"CRLB" | version u16 | step u64 | echo_send_s f64 | echo_rtt_s f64 |
//!  count u32 | transitions`.
//! A transition is `state 80×f32 | action 4×f32 | reward f32 |
//! next_state 80×f32 | next_action 4×f32 | source u8`.

use std::io::Cursor;

use thiserror::Error;

use crate::neural::io::{read_layer, write_layer, WeightIoError, WeightLayer, WEIGHT_MAGIC};
use crate::neural::Network;
use crate::rl_core::{ActionSource, StateVector, Transition, ACTION_LEN, STATE_LEN};

pub const BUFFER_MAGIC: &[u8; 4] = b"CRLB";
pub const WIRE_VERSION: u16 = 1;

#[derive(Debug, Error)]
pub enum CodecError {
    #[error("truncated packet")]
    Truncated,
    #[error("bad magic")]
    BadMagic,
    #[error("unsupported wire version {0}")]
    UnsupportedVersion(u16),
    #[error("crc mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    CrcMismatch { stored: u32, computed: u32 },
    #[error("implausible shape in layer {0}")]
    BadShape(usize),
    #[error("unknown action source tag {0}")]
    BadSource(u8),
}

impl From<WeightIoError> for CodecError {
    fn from(e: WeightIoError) -> Self {
        match e {
            WeightIoError::Io(_) => CodecError::Truncated,
            WeightIoError::BadMagic => CodecError::BadMagic,
            WeightIoError::UnsupportedVersion(v) => CodecError::UnsupportedVersion(v),
            WeightIoError::BadShape { layer, .. } => CodecError::BadShape(layer),
        }
    }
}

/// Versioned, checksummed actor-weight shipment.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightPacket {
    pub version: u16,
    pub sequence: u32,
    pub layers: Vec<WeightLayer>,
}

impl WeightPacket {
    pub fn from_network(net: &Network, sequence: u32) -> Self {
        Self {
            version: WIRE_VERSION,
            sequence,
            layers: net
                .layers
                .iter()
                .map(|l| WeightLayer {
                    rows: l.rows as u32,
                    cols: l.cols as u32,
                    weights: l.weights.clone(),
                    bias: l.bias.clone(),
                })
                .collect(),
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut bytes = Vec::with_capacity(self.payload_size_hint());
        bytes.extend_from_slice(WEIGHT_MAGIC);
        bytes.extend_from_slice(&self.version.to_le_bytes());
        bytes.extend_from_slice(&self.sequence.to_le_bytes());
        bytes.extend_from_slice(&(self.layers.len() as u16).to_le_bytes());
        for l in &self.layers {
            write_layer(&mut bytes, l).expect("vec write");
        }
        let crc = crc32fast::hash(&bytes);
        bytes.extend_from_slice(&crc.to_le_bytes());
        bytes
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, CodecError> {
        if bytes.len() < 4 + 2 + 4 + 2 + 4 {
            return Err(CodecError::Truncated);
        }
        let (body, crc_bytes) = bytes.split_at(bytes.len() - 4);
        let stored = u32::from_le_bytes(crc_bytes.try_into().unwrap());
        let computed = crc32fast::hash(body);
        if stored != computed {
            return Err(CodecError::CrcMismatch { stored, computed });
        }
        if &body[0..4] != WEIGHT_MAGIC {
            return Err(CodecError::BadMagic);
        }
        let version = u16::from_le_bytes(body[4..6].try_into().unwrap());
        if version != WIRE_VERSION {
            return Err(CodecError::UnsupportedVersion(version));
        }
        let sequence = u32::from_le_bytes(body[6..10].try_into().unwrap());
        let n_layers = u16::from_le_bytes(body[10..12].try_into().unwrap()) as usize;
        let mut cursor = Cursor::new(&body[12..]);
        let mut layers = Vec::with_capacity(n_layers);
        for i in 0..n_layers {
            layers.push(read_layer(&mut cursor, i)?);
        }
        if cursor.position() as usize != body.len() - 12 {
            return Err(CodecError::Truncated);
        }
        Ok(Self {
            version,
            sequence,
            layers,
        })
    }

    fn payload_size_hint(&self) -> usize {
        16 + self
            .layers
            .iter()
            .map(|l| 8 + 4 * (l.weights.len() + l.bias.len()))
            .sum::<usize>()
    }
}

/// A batch of executed transitions with the step counter and timing echoes.
#[derive(Debug, Clone, PartialEq)]
pub struct BufferPacket {
    pub version: u16,
    pub step: u64,
    /// Edge send timestamp (seconds on the edge clock).
    pub echo_send_s: f64,
    /// Last observed round-trip estimate, seconds.
    pub echo_rtt_s: f64,
    pub transitions: Vec<Transition>,
}

impl BufferPacket {
    pub fn new(step: u64, transitions: Vec<Transition>) -> Self {
        Self {
            version: WIRE_VERSION,
            step,
            echo_send_s: 0.0,
            echo_rtt_s: 0.0,
            transitions,
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut bytes =
            Vec::with_capacity(30 + self.transitions.len() * (4 * (2 * STATE_LEN + 2 * ACTION_LEN + 1) + 1));
        bytes.extend_from_slice(BUFFER_MAGIC);
        bytes.extend_from_slice(&self.version.to_le_bytes());
        bytes.extend_from_slice(&self.step.to_le_bytes());
        bytes.extend_from_slice(&self.echo_send_s.to_le_bytes());
        bytes.extend_from_slice(&self.echo_rtt_s.to_le_bytes());
        bytes.extend_from_slice(&(self.transitions.len() as u32).to_le_bytes());
        for t in &self.transitions {
            for v in t.state.as_slice() {
                bytes.extend_from_slice(&v.to_le_bytes());
            }
            for v in &t.action {
                bytes.extend_from_slice(&v.to_le_bytes());
            }
            bytes.extend_from_slice(&t.reward.to_le_bytes());
            for v in t.next_state.as_slice() {
                bytes.extend_from_slice(&v.to_le_bytes());
            }
            for v in &t.next_action {
                bytes.extend_from_slice(&v.to_le_bytes());
            }
            bytes.push(match t.source {
                ActionSource::Classical => 0,
                ActionSource::Rl => 1,
                ActionSource::Composer => 2,
            });
        }
        bytes
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, CodecError> {
        // header: magic 4 + version 2 + step 8 + echoes 16 + count 4
        if bytes.len() < 34 {
            return Err(CodecError::Truncated);
        }
        if &bytes[0..4] != BUFFER_MAGIC {
            return Err(CodecError::BadMagic);
        }
        let version = u16::from_le_bytes(bytes[4..6].try_into().unwrap());
        if version != WIRE_VERSION {
            return Err(CodecError::UnsupportedVersion(version));
        }
        let step = u64::from_le_bytes(bytes[6..14].try_into().unwrap());
        let echo_send_s = f64::from_le_bytes(bytes[14..22].try_into().unwrap());
        let echo_rtt_s = f64::from_le_bytes(bytes[22..30].try_into().unwrap());
        let count = u32::from_le_bytes(bytes[30..34].try_into().unwrap());
        let mut offset = 34;
        let per = 4 * (2 * STATE_LEN + 2 * ACTION_LEN + 1) + 1;
        if bytes.len() != offset + count as usize * per {
            return Err(CodecError::Truncated);
        }
        let mut transitions = Vec::with_capacity(count as usize);
        for _ in 0..count {
            let mut read_f32 = |off: &mut usize| {
                let v = f32::from_le_bytes(bytes[*off..*off + 4].try_into().unwrap());
                *off += 4;
                v
            };
            let mut state = StateVector::default();
            for v in state.0.iter_mut() {
                *v = read_f32(&mut offset);
            }
            let mut action = [0.0f32; ACTION_LEN];
            for v in action.iter_mut() {
                *v = read_f32(&mut offset);
            }
            let reward = read_f32(&mut offset);
            let mut next_state = StateVector::default();
            for v in next_state.0.iter_mut() {
                *v = read_f32(&mut offset);
            }
            let mut next_action = [0.0f32; ACTION_LEN];
            for v in next_action.iter_mut() {
                *v = read_f32(&mut offset);
            }
            let source = match bytes[offset] {
                0 => ActionSource::Classical,
                1 => ActionSource::Rl,
                2 => ActionSource::Composer,
                other => return Err(CodecError::BadSource(other)),
            };
            offset += 1;
            transitions.push(Transition {
                state,
                action,
                reward,
                next_state,
                next_action,
                source,
            });
        }
        Ok(Self {
            version,
            step,
            echo_send_s,
            echo_rtt_s,
            transitions,
        })
    }
}

/// Either wire packet, discriminated by its magic.
#[derive(Debug, Clone)]
pub enum Packet {
    Weights(WeightPacket),
    Buffer(BufferPacket),
}

pub fn decode_packet(bytes: &[u8]) -> Result<Packet, CodecError> {
    if bytes.len() < 4 {
        return Err(CodecError::Truncated);
    }
    match &bytes[0..4] {
        m if m == WEIGHT_MAGIC => Ok(Packet::Weights(WeightPacket::decode(bytes)?)),
        m if m == BUFFER_MAGIC => Ok(Packet::Buffer(BufferPacket::decode(bytes)?)),
        _ => Err(CodecError::BadMagic),
    }
}
