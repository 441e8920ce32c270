use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// What a random stream is used for. Combined with a node id it selects an
/// independent ChaCha stream, so adding a node never shifts the draws seen by
/// any other node.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum StreamPurpose {
    Traffic = 1,
    Mac = 2,
    Phy = 3,
    Routing = 4,
    Mobility = 5,
    Environment = 6,
    MonteCarlo = 7,
}

pub fn stream_id(node: u16, purpose: StreamPurpose) -> u64 {
    ((node as u64) << 8) | purpose as u64
}

/// A reproducible random stream identified by `(seed, stream_id)`.
pub type RngStream = ChaCha8Rng;

pub fn rng_stream(seed: u64, stream_id: u64) -> RngStream {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id);
    rng
}

pub fn node_rng(seed: u64, node: u16, purpose: StreamPurpose) -> RngStream {
    rng_stream(seed, stream_id(node, purpose))
}
