//! Rateless (LT-style fountain) coding of a bulk data object.
//!
//! Data is cut into `k` source blocks of `B` bytes. Each encoded block is
//! the XOR of a random subset of sources whose size follows a robust
//! soliton law; the subset is a pure function of a 16-bit seed tag, so
//! only the tag travels with the block. Every block carries a CRC-8 over
//! its payload and tag, and several blocks share one radio packet.

mod crc;
mod decoder;
mod encoder;
mod packet;
mod roundtrip;
mod soliton;

pub use crc::{crc8, crc8_update};
pub use decoder::{DecoderState, IngestOutcome};
pub use encoder::{
    BlockGraph, BlockSizeMenu, BlockStream, CodecError, EncodedBlock, Encoder, RoundMeta, DEFAULT_PAYLOAD_BUDGET,
    MAX_SOURCE_BLOCKS, PER_BLOCK_OVERHEAD,
};
pub use packet::{blocks_per_packet, pack_packet, RatelessPacket};
pub use roundtrip::{roundtrip, Roundtrip};
pub use soliton::RobustSoliton;
