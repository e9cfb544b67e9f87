use rand::Rng;

use super::{CodecError, DecoderState, Encoder, DEFAULT_PAYLOAD_BUDGET};
use crate::rng::{Purpose, RngStreams};

/// Outcome of pushing one object through an erasure channel.
#[derive(Debug, Clone, PartialEq)]
pub struct Roundtrip {
    pub k: usize,
    pub sent: usize,
    pub received: usize,
    pub complete: bool,
    /// Decoded bytes equal the input (false when incomplete).
    pub exact: bool,
}

impl Roundtrip {
    /// Received blocks beyond `k`, relative to `k`.
    pub fn overhead(&self) -> f64 {
        self.received as f64 / self.k as f64 - 1.0
    }
}

/// Encodes `data`, drops each block independently with probability
/// `loss` and feeds survivors to a decoder until it completes or
/// `max_sent` blocks have gone out.
pub fn roundtrip(
    data: &[u8],
    block_size: usize,
    loss: f64,
    seed: u64,
    max_sent: usize,
) -> Result<Roundtrip, CodecError> {
    let enc = Encoder::new(data, block_size, DEFAULT_PAYLOAD_BUDGET)?;
    let streams = RngStreams::new(seed);
    let mut tag_rng = streams.global(Purpose::Codec, 0);
    let mut loss_rng = streams.global(Purpose::Channel, 0);
    let mut dec = DecoderState::new(enc.meta());
    let (mut sent, mut received) = (0, 0);
    for b in enc.stream(&mut tag_rng).take(max_sent) {
        sent += 1;
        if loss_rng.gen::<f64>() < loss {
            continue;
        }
        received += 1;
        dec.ingest(&b);
        if dec.is_complete() {
            break;
        }
    }
    let complete = dec.is_complete();
    let exact = complete && dec.decoded_data()? == data;
    Ok(Roundtrip { k: enc.k(), sent, received, complete, exact })
}
