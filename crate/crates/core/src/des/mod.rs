//! Deterministic discrete-event kernel: clock, event queue, seeded streams.

mod kernel;
mod rng;
mod time;

pub use kernel::{EventHandle, Kernel, Next, RunReport, StopReason, DEFAULT_MAX_EVENTS};
pub use rng::{node_rng, rng_stream, stream_id, RngStream, StreamPurpose};
pub use time::SimTime;
