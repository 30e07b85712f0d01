//! Edge inference runtime and the cloud↔edge wire protocol.
//!
//! The edge holds a flattened actor snapshot and runs it as direct matrix
//! arithmetic with preallocated scratch — no tensor framework, no hot-path
//! allocation. Weight packets arrive over a reliable framed stream, are
//! CRC- and shape-validated, and are installed atomically during Mode-1
//! steps only, so inference steps never pay swap latency.

mod naive;
mod packet;
mod policy;
mod timing;
mod transport;

pub use naive::{NaivePolicy, NaiveStepTimings};
pub use packet::{
    decode_packet, BufferPacket, CodecError, Packet, WeightPacket, BUFFER_MAGIC, WIRE_VERSION,
};
pub use policy::{hot_swap, EdgePolicy, SwapOutcome, WeightReceiver};
pub use timing::{summarize, Stage, StageSummary, TimingRecord, TimingSummary};
pub use transport::{read_frame, write_frame, BoundedQueue, Shipper};
