use rand::seq::index;
use rand::{Rng, SeedableRng};
use thiserror::Error;

use super::crc::{crc8, crc8_update};
use super::soliton::RobustSoliton;
use crate::rng::{derive_seed, SimRng};

/// CRC byte plus two seed-tag bytes carried with every block.
pub const PER_BLOCK_OVERHEAD: usize = 3;
/// Payload bytes available to blocks in one packet.
pub const DEFAULT_PAYLOAD_BUDGET: usize = 100;
/// Largest number of source blocks the decoder accepts.
pub const MAX_SOURCE_BLOCKS: usize = 256;

#[derive(Debug, Error, PartialEq)]
pub enum CodecError {
    #[error("empty data")]
    EmptyData,
    #[error("block size must be positive")]
    ZeroBlockSize,
    #[error("block size {block_size} B does not fit a {budget} B payload")]
    BlockTooLarge { block_size: usize, budget: usize },
    #[error("{k} source blocks exceed the limit of {max}")]
    TooManySourceBlocks { k: usize, max: usize },
    #[error("packet would carry no blocks")]
    EmptyPacket,
    #[error("blocks of different sizes in one packet")]
    MixedBlockSizes,
    #[error("block size menu must be non-empty and strictly increasing")]
    InvalidMenu,
    #[error("decoding is not complete ({solved}/{k} sources)")]
    Incomplete { solved: usize, k: usize },
}

/// Ordered set of block sizes a sender may choose from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockSizeMenu {
    sizes: Vec<usize>,
}

impl Default for BlockSizeMenu {
    fn default() -> Self {
        BlockSizeMenu { sizes: vec![16, 32, 64] }
    }
}

impl BlockSizeMenu {
    /// Sizes that fill a 100-byte payload almost completely once the
    /// per-block overhead is counted (5, 3 and 2 blocks per packet).
    pub fn packed() -> Self {
        BlockSizeMenu { sizes: vec![16, 30, 47] }
    }

    pub fn new(sizes: Vec<usize>) -> Result<Self, CodecError> {
        if sizes.is_empty() || sizes[0] == 0 || sizes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(CodecError::InvalidMenu);
        }
        Ok(BlockSizeMenu { sizes })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn len(&self) -> usize {
        self.sizes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sizes.is_empty()
    }

    pub fn size(&self, class: usize) -> usize {
        self.sizes[class.min(self.sizes.len() - 1)]
    }

    pub fn class_of(&self, block_size: usize) -> Option<usize> {
        self.sizes.iter().position(|&s| s == block_size)
    }

    /// Index of the middle entry (lower middle for even lengths).
    pub fn middle(&self) -> usize {
        (self.sizes.len() - 1) / 2
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedBlock {
    pub block_size: usize,
    pub seed_tag: u16,
    /// Sorted, distinct source block indices.
    pub source_indices: Vec<u16>,
    pub payload: Vec<u8>,
    pub crc: u8,
}

impl EncodedBlock {
    pub fn degree(&self) -> usize {
        self.source_indices.len()
    }

    pub fn checksum(payload: &[u8], seed_tag: u16) -> u8 {
        crc8_update(crc8(payload), &seed_tag.to_le_bytes())
    }

    pub fn crc_ok(&self) -> bool {
        self.payload.len() == self.block_size && Self::checksum(&self.payload, self.seed_tag) == self.crc
    }
}

/// Source layout of one dissemination object.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RoundMeta {
    pub data_len: usize,
    pub block_size: usize,
    pub k: usize,
}

impl RoundMeta {
    pub fn new(data_len: usize, block_size: usize) -> Result<Self, CodecError> {
        if data_len == 0 {
            return Err(CodecError::EmptyData);
        }
        if block_size == 0 {
            return Err(CodecError::ZeroBlockSize);
        }
        let k = data_len.div_ceil(block_size);
        if k > MAX_SOURCE_BLOCKS {
            return Err(CodecError::TooManySourceBlocks { k, max: MAX_SOURCE_BLOCKS });
        }
        Ok(RoundMeta { data_len, block_size, k })
    }

    pub fn pad_len(&self) -> usize {
        self.k * self.block_size - self.data_len
    }
}

/// Maps seed tags to source index sets for a given `k`.
#[derive(Debug, Clone)]
pub struct BlockGraph {
    k: usize,
    soliton: RobustSoliton,
}

impl BlockGraph {
    pub fn new(k: usize) -> Self {
        BlockGraph { k, soliton: RobustSoliton::new(k) }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn indices(&self, seed_tag: u16) -> Vec<u16> {
        let mut rng = SimRng::seed_from_u64(derive_seed(seed_tag as u64, &[self.k as u64]));
        let degree = self.soliton.sample(&mut rng);
        let mut v: Vec<u16> = index::sample(&mut rng, self.k, degree).into_iter().map(|i| i as u16).collect();
        v.sort_unstable();
        v
    }
}

/// Rateless encoder over one data object.
#[derive(Debug, Clone)]
pub struct Encoder {
    meta: RoundMeta,
    sources: Vec<Vec<u8>>,
    graph: BlockGraph,
}

impl Encoder {
    pub fn new(data: &[u8], block_size: usize, budget: usize) -> Result<Self, CodecError> {
        let meta = RoundMeta::new(data.len(), block_size)?;
        if block_size + PER_BLOCK_OVERHEAD > budget {
            return Err(CodecError::BlockTooLarge { block_size, budget });
        }
        let sources = data
            .chunks(block_size)
            .map(|c| {
                let mut v = c.to_vec();
                v.resize(block_size, 0);
                v
            })
            .collect();
        Ok(Encoder { meta, sources, graph: BlockGraph::new(meta.k) })
    }

    pub fn meta(&self) -> RoundMeta {
        self.meta
    }

    pub fn k(&self) -> usize {
        self.meta.k
    }

    pub fn source(&self, i: usize) -> &[u8] {
        &self.sources[i]
    }

    /// XOR of the listed source blocks.
    pub fn combine(&self, indices: &[u16]) -> Vec<u8> {
        let mut out = vec![0u8; self.meta.block_size];
        for &i in indices {
            for (o, s) in out.iter_mut().zip(&self.sources[i as usize]) {
                *o ^= s;
            }
        }
        out
    }

    /// Block with explicit source indices (the tag only feeds the CRC).
    pub fn block_from_indices(&self, mut indices: Vec<u16>, seed_tag: u16) -> EncodedBlock {
        indices.sort_unstable();
        indices.dedup();
        let payload = self.combine(&indices);
        let crc = EncodedBlock::checksum(&payload, seed_tag);
        EncodedBlock { block_size: self.meta.block_size, seed_tag, source_indices: indices, payload, crc }
    }

    /// The block a receiver would reconstruct from `seed_tag`.
    pub fn block(&self, seed_tag: u16) -> EncodedBlock {
        self.block_from_indices(self.graph.indices(seed_tag), seed_tag)
    }

    /// Unbounded stream of blocks starting at a random tag.
    pub fn stream<R: Rng + ?Sized>(&self, rng: &mut R) -> BlockStream<'_> {
        BlockStream { enc: self, next_tag: rng.gen() }
    }
}

#[derive(Debug, Clone)]
pub struct BlockStream<'a> {
    enc: &'a Encoder,
    next_tag: u16,
}

impl Iterator for BlockStream<'_> {
    type Item = EncodedBlock;

    fn next(&mut self) -> Option<EncodedBlock> {
        let b = self.enc.block(self.next_tag);
        self.next_tag = self.next_tag.wrapping_add(1);
        Some(b)
    }
}
