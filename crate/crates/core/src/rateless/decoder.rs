use super::encoder::{CodecError, EncodedBlock, RoundMeta};

/// GF(2) row over at most 256 unknowns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
struct Mask([u64; 4]);

impl Mask {
    fn from_indices(ix: &[u16]) -> Self {
        let mut m = Mask::default();
        for &i in ix {
            m.0[i as usize / 64] ^= 1 << (i % 64);
        }
        m
    }

    fn has(&self, i: usize) -> bool {
        self.0[i / 64] >> (i % 64) & 1 == 1
    }

    fn clear(&mut self, i: usize) {
        self.0[i / 64] &= !(1 << (i % 64));
    }

    fn xor(&mut self, o: &Mask) {
        for (a, b) in self.0.iter_mut().zip(o.0) {
            *a ^= b;
        }
    }

    fn count(&self) -> u32 {
        self.0.iter().map(|w| w.count_ones()).sum()
    }

    fn first(&self) -> Option<usize> {
        self.0.iter().enumerate().find(|(_, w)| **w != 0).map(|(i, w)| i * 64 + w.trailing_zeros() as usize)
    }
}

fn xor_into(dst: &mut [u8], src: &[u8]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d ^= s;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IngestOutcome {
    /// Block added; `newly_solved` sources were recovered by it.
    Accepted {
        newly_solved: usize,
    },
    Duplicate,
    CrcFailed,
    /// Block arrived after decoding finished.
    AlreadyComplete,
}

/// Receiver-side decoder: peeling with a GF(2) elimination fallback.
#[derive(Debug, Clone)]
pub struct DecoderState {
    meta: RoundMeta,
    solved: Vec<Option<Vec<u8>>>,
    n_solved: usize,
    pending: Vec<(Mask, Vec<u8>)>,
    seen: std::collections::BTreeSet<(u16, Vec<u16>)>,
    pub received: usize,
    pub duplicates: usize,
    pub crc_failures: usize,
}

impl DecoderState {
    pub fn new(meta: RoundMeta) -> Self {
        DecoderState {
            meta,
            solved: vec![None; meta.k],
            n_solved: 0,
            pending: Vec::new(),
            seen: Default::default(),
            received: 0,
            duplicates: 0,
            crc_failures: 0,
        }
    }

    pub fn meta(&self) -> RoundMeta {
        self.meta
    }

    pub fn k(&self) -> usize {
        self.meta.k
    }

    pub fn solved_count(&self) -> usize {
        self.n_solved
    }

    pub fn is_complete(&self) -> bool {
        self.n_solved == self.meta.k
    }

    pub fn solved(&self, i: usize) -> Option<&[u8]> {
        self.solved.get(i).and_then(|s| s.as_deref())
    }

    pub fn ingest(&mut self, b: &EncodedBlock) -> IngestOutcome {
        if b.block_size != self.meta.block_size || !b.crc_ok() {
            self.crc_failures += 1;
            return IngestOutcome::CrcFailed;
        }
        if b.source_indices.iter().any(|&i| i as usize >= self.meta.k) || b.source_indices.is_empty() {
            self.crc_failures += 1;
            return IngestOutcome::CrcFailed;
        }
        if !self.seen.insert((b.seed_tag, b.source_indices.clone())) {
            self.duplicates += 1;
            return IngestOutcome::Duplicate;
        }
        self.received += 1;
        if self.is_complete() {
            return IngestOutcome::AlreadyComplete;
        }
        let before = self.n_solved;
        let mut mask = Mask::from_indices(&b.source_indices);
        let mut payload = b.payload.clone();
        self.reduce_by_solved(&mut mask, &mut payload);
        if mask.count() > 0 {
            self.pending.push((mask, payload));
        }
        self.peel();
        if !self.is_complete() && self.pending.len() + self.n_solved >= self.meta.k {
            self.eliminate();
        }
        IngestOutcome::Accepted { newly_solved: self.n_solved - before }
    }

    fn reduce_by_solved(&self, mask: &mut Mask, payload: &mut [u8]) {
        for i in 0..self.meta.k {
            if mask.has(i) {
                if let Some(s) = &self.solved[i] {
                    xor_into(payload, s);
                    mask.clear(i);
                }
            }
        }
    }

    fn solve(&mut self, i: usize, payload: Vec<u8>) {
        if self.solved[i].is_none() {
            self.solved[i] = Some(payload);
            self.n_solved += 1;
        }
    }

    /// Repeatedly resolves degree-one equations and substitutes them.
    fn peel(&mut self) {
        while let Some(pos) = self.pending.iter().position(|(m, _)| m.count() == 1) {
            let (m, p) = self.pending.swap_remove(pos);
            let i = m.first().expect("degree one");
            if self.solved[i].is_some() {
                continue;
            }
            for (om, op) in self.pending.iter_mut() {
                if om.has(i) {
                    om.clear(i);
                    xor_into(op, &p);
                }
            }
            self.solve(i, p);
            self.pending.retain(|(m, _)| m.count() > 0);
        }
    }

    /// Gaussian elimination over the pending equations; solves everything
    /// determined by them and drops redundant rows.
    fn eliminate(&mut self) {
        let mut rows = std::mem::take(&mut self.pending);
        let mut pivots: Vec<(usize, usize)> = Vec::new();
        let mut r = 0;
        for col in 0..self.meta.k {
            if self.solved[col].is_some() {
                continue;
            }
            let Some(p) = (r..rows.len()).find(|&j| rows[j].0.has(col)) else {
                continue;
            };
            rows.swap(r, p);
            let (pm, pp) = rows[r].clone();
            for (j, (m, pl)) in rows.iter_mut().enumerate() {
                if j != r && m.has(col) {
                    m.xor(&pm);
                    xor_into(pl, &pp);
                }
            }
            pivots.push((r, col));
            r += 1;
        }
        rows.truncate(r);
        for &(row, col) in &pivots {
            if rows[row].0.count() == 1 {
                let p = rows[row].1.clone();
                self.solve(col, p);
            }
        }
        self.pending = rows.into_iter().filter(|(m, _)| m.count() > 1).collect();
        if !self.pending.is_empty() {
            let solved_now = self.solved.clone();
            for (m, p) in self.pending.iter_mut() {
                for (i, s) in solved_now.iter().enumerate() {
                    if let (true, Some(s)) = (m.has(i), s) {
                        m.clear(i);
                        xor_into(p, s);
                    }
                }
            }
            self.pending.retain(|(m, _)| m.count() > 0);
            self.peel();
        }
    }

    /// Rank of everything received so far (solved plus independent pending).
    pub fn rank(&self) -> usize {
        let mut rows: Vec<Mask> = self.pending.iter().map(|(m, _)| *m).collect();
        let mut rank = 0;
        for col in 0..self.meta.k {
            if let Some(p) = (rank..rows.len()).find(|&j| rows[j].has(col)) {
                rows.swap(rank, p);
                let pm = rows[rank];
                for (j, m) in rows.iter_mut().enumerate() {
                    if j != rank && m.has(col) {
                        m.xor(&pm);
                    }
                }
                rank += 1;
            }
        }
        self.n_solved + rank
    }

    /// Reassembled data with padding removed.
    pub fn decoded_data(&self) -> Result<Vec<u8>, CodecError> {
        if !self.is_complete() {
            return Err(CodecError::Incomplete { solved: self.n_solved, k: self.meta.k });
        }
        let mut out = Vec::with_capacity(self.meta.k * self.meta.block_size);
        for s in &self.solved {
            out.extend_from_slice(s.as_ref().expect("complete"));
        }
        out.truncate(self.meta.data_len);
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rateless::Encoder;

    fn enc(k: usize) -> Encoder {
        let data: Vec<u8> = (0..k * 8).map(|i| (i * 7 + 1) as u8).collect();
        Encoder::new(&data, 8, 100).unwrap()
    }

    #[test]
    fn two_source_peeling() {
        let e = enc(2);
        let mut d = DecoderState::new(e.meta());
        d.ingest(&e.block_from_indices(vec![0], 1));
        assert!(!d.is_complete());
        d.ingest(&e.block_from_indices(vec![0, 1], 2));
        assert!(d.is_complete());
        assert_eq!(d.solved(0).unwrap(), e.source(0));
        assert_eq!(d.solved(1).unwrap(), e.source(1));
    }

    #[test]
    fn duplicates_only_bump_counter() {
        let e = enc(3);
        let mut d = DecoderState::new(e.meta());
        let b = e.block_from_indices(vec![0, 2], 4);
        d.ingest(&b);
        let (rank, solved) = (d.rank(), d.solved_count());
        assert_eq!(d.ingest(&b), IngestOutcome::Duplicate);
        assert_eq!((d.rank(), d.solved_count(), d.duplicates), (rank, solved, 1));
    }

    #[test]
    fn cycle_of_pairs_is_rank_deficient() {
        let e = enc(3);
        let mut d = DecoderState::new(e.meta());
        for (t, ix) in [(1, vec![0, 1]), (2, vec![1, 2]), (3, vec![0, 2])] {
            d.ingest(&e.block_from_indices(ix, t));
        }
        assert!(!d.is_complete());
        assert_eq!(d.rank(), 2);
        assert!(matches!(d.decoded_data(), Err(CodecError::Incomplete { .. })));
    }

    #[test]
    fn elimination_solves_what_peeling_cannot() {
        let e = enc(3);
        let mut d = DecoderState::new(e.meta());
        for (t, ix) in [(1, vec![0, 1]), (2, vec![1, 2]), (3, vec![0, 1, 2])] {
            d.ingest(&e.block_from_indices(ix, t));
        }
        assert!(d.is_complete());
        assert_eq!(d.decoded_data().unwrap(), (0..24).map(|i| (i * 7 + 1) as u8).collect::<Vec<_>>());
    }

    #[test]
    fn corrupted_block_is_ignored() {
        let e = enc(2);
        let mut d = DecoderState::new(e.meta());
        let mut b = e.block_from_indices(vec![0], 1);
        b.payload[3] ^= 0x10;
        assert_eq!(d.ingest(&b), IngestOutcome::CrcFailed);
        assert_eq!((d.crc_failures, d.received), (1, 0));
    }
}
