use super::encoder::{CodecError, EncodedBlock, PER_BLOCK_OVERHEAD};
use crate::topology::NodeId;

/// Blocks of `block_size` bytes that fit a `budget`-byte payload.
pub fn blocks_per_packet(budget: usize, block_size: usize) -> usize {
    budget / (block_size + PER_BLOCK_OVERHEAD)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RatelessPacket {
    pub sender: NodeId,
    pub round: u64,
    pub block_size: usize,
    pub blocks: Vec<EncodedBlock>,
    pub header_bytes: usize,
}

impl RatelessPacket {
    /// Bytes of the payload section (blocks plus their CRC and tag bytes).
    pub fn payload_bytes(&self) -> usize {
        self.blocks.len() * (self.block_size + PER_BLOCK_OVERHEAD)
    }

    /// Non-data bytes in the payload section.
    pub fn overhead_bytes(&self) -> usize {
        self.blocks.len() * PER_BLOCK_OVERHEAD
    }

    /// Share of the payload section spent on per-block overhead.
    pub fn overhead_fraction(&self) -> f64 {
        self.overhead_bytes() as f64 / self.payload_bytes() as f64
    }
}

/// Packs as many leading `blocks` as the budget allows.
pub fn pack_packet(
    sender: NodeId,
    round: u64,
    blocks: &[EncodedBlock],
    budget: usize,
    header_bytes: usize,
) -> Result<RatelessPacket, CodecError> {
    let first = blocks.first().ok_or(CodecError::EmptyPacket)?;
    let block_size = first.block_size;
    if blocks.iter().any(|b| b.block_size != block_size) {
        return Err(CodecError::MixedBlockSizes);
    }
    let n = blocks_per_packet(budget, block_size);
    if n == 0 {
        return Err(CodecError::BlockTooLarge { block_size, budget });
    }
    Ok(RatelessPacket { sender, round, block_size, blocks: blocks.iter().take(n).cloned().collect(), header_bytes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rateless::Encoder;

    fn blocks(size: usize, n: u16) -> Vec<EncodedBlock> {
        let data = vec![3u8; 400];
        let enc = Encoder::new(&data, size.min(97), 100).unwrap();
        (0..n)
            .map(|t| {
                let mut b = enc.block(t);
                b.block_size = size;
                b
            })
            .collect()
    }

    #[test]
    fn packing_arithmetic() {
        assert_eq!(blocks_per_packet(100, 16), 5);
        assert_eq!(blocks_per_packet(100, 32), 2);
        assert_eq!(blocks_per_packet(100, 64), 1);
        let p = pack_packet(NodeId(0), 0, &blocks(16, 9), 100, 12).unwrap();
        assert_eq!(p.blocks.len(), 5);
        assert!(p.payload_bytes() <= 100);
    }

    #[test]
    fn oversize_block_rejected() {
        assert!(matches!(pack_packet(NodeId(0), 0, &blocks(128, 1), 100, 12), Err(CodecError::BlockTooLarge { .. })));
        assert_eq!(pack_packet(NodeId(0), 0, &[], 100, 12), Err(CodecError::EmptyPacket));
    }

    #[test]
    fn overhead_fraction_falls_with_block_size() {
        let f = |s| pack_packet(NodeId(0), 0, &blocks(s, 8), 100, 12).unwrap().overhead_fraction();
        assert!(f(16) > f(32));
        assert!(f(32) > f(64));
    }
}
