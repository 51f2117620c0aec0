//! Host-side multi-layer Android tracing pipeline: attach-point
//! resolution, probe event decoding, filtering, and behavioral signatures
//! over replayed or simulated event streams.

pub mod address;
pub mod artifacts;
pub mod config;
pub mod dispatch;
pub mod event;
pub mod signatures;
pub mod source;
pub mod syscalls;
pub mod wire;
