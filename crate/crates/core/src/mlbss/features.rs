use serde::{Deserialize, Serialize};

/// Inputs for block-size selection at a sender.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    /// Hop level in the dissemination tree; the root is 1.
    pub rank: u32,
    /// Mean packet delivery ratio over the sender's child links.
    pub pdr: f64,
    /// Worst child's transmissions per delivered packet.
    pub rnp: f64,
}

impl FeatureVector {
    pub fn new(rank: u32, pdr: f64, rnp: f64) -> Self {
        FeatureVector { rank, pdr, rnp }
    }

    pub fn raw(&self) -> [f64; 3] {
        [self.rank as f64, self.pdr, self.rnp]
    }
}

pub const FEATURE_NAMES: [&str; 3] = ["rank", "pdr", "rnp"];

/// `x' = (clamp(x, min, max) - offset) * factor` for one feature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Affine {
    pub min: f64,
    pub max: f64,
    pub offset: f64,
    pub factor: f64,
}

impl Affine {
    pub const IDENTITY: Affine = Affine { min: f64::NEG_INFINITY, max: f64::INFINITY, offset: 0.0, factor: 1.0 };

    pub fn apply(&self, x: f64) -> f64 {
        (x.clamp(self.min, self.max) - self.offset) * self.factor
    }
}

/// Per-feature scaling stored alongside a model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scaling(pub [Affine; 3]);

impl Default for Scaling {
    fn default() -> Self {
        Scaling::identity()
    }
}

impl Scaling {
    pub fn identity() -> Self {
        Scaling([Affine::IDENTITY; 3])
    }

    /// Rank over the network's maximum rank, PDR as is, RNP clamped to
    /// `[1, 10]` and mapped onto `[0, 1]`.
    pub fn standard(max_rank: u32) -> Self {
        let mr = max_rank.max(1) as f64;
        Scaling([
            Affine { min: 1.0, max: f64::INFINITY, offset: 0.0, factor: 1.0 / mr },
            Affine { min: 0.0, max: 1.0, offset: 0.0, factor: 1.0 },
            Affine { min: 1.0, max: 10.0, offset: 1.0, factor: 1.0 / 9.0 },
        ])
    }

    pub fn apply(&self, f: &FeatureVector) -> [f64; 3] {
        let r = f.raw();
        [self.0[0].apply(r[0]), self.0[1].apply(r[1]), self.0[2].apply(r[2])]
    }
}
