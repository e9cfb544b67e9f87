use crate::rateless::{EncodedBlock, RoundMeta, PER_BLOCK_OVERHEAD};
use crate::topology::NodeId;

/// On-air size of every control frame payload.
pub const CONTROL_BYTES: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub enum Control {
    /// Completion beacon: the sender has decoded the object.
    Beacon,
    /// "I hold the object." `count` carries the advertiser's reachable
    /// receiver count in sender-election schemes (zero otherwise).
    Advertise { count: u32, phase: u8 },
    /// Request `blocks` encoded blocks from `to`.
    Request { to: NodeId, blocks: u32 },
    /// Reply to an advertisement from `to`.
    Reply { to: NodeId },
}

#[derive(Debug, Clone, PartialEq)]
pub enum FrameBody {
    Data { meta: RoundMeta, blocks: Vec<EncodedBlock> },
    Control(Control),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub sender: NodeId,
    pub body: FrameBody,
}

impl Frame {
    pub fn data(sender: NodeId, meta: RoundMeta, blocks: Vec<EncodedBlock>) -> Self {
        Frame { sender, body: FrameBody::Data { meta, blocks } }
    }

    pub fn control(sender: NodeId, c: Control) -> Self {
        Frame { sender, body: FrameBody::Control(c) }
    }

    /// Payload bytes (header excluded).
    pub fn payload_bytes(&self) -> usize {
        match &self.body {
            FrameBody::Data { meta, blocks } => blocks.len() * (meta.block_size + PER_BLOCK_OVERHEAD),
            FrameBody::Control(_) => CONTROL_BYTES,
        }
    }

    pub fn is_data(&self) -> bool {
        matches!(self.body, FrameBody::Data { .. })
    }

    pub fn block_size(&self) -> Option<usize> {
        match &self.body {
            FrameBody::Data { meta, .. } => Some(meta.block_size),
            FrameBody::Control(_) => None,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match &self.body {
            FrameBody::Data { .. } => "data",
            FrameBody::Control(Control::Beacon) => "beacon",
            FrameBody::Control(Control::Advertise { .. }) => "adv",
            FrameBody::Control(Control::Request { .. }) => "req",
            FrameBody::Control(Control::Reply { .. }) => "reply",
        }
    }
}
