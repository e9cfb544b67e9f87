use proptest::prelude::*;

use edrp_core::rateless::{roundtrip, BlockSizeMenu, Encoder, RoundMeta, DEFAULT_PAYLOAD_BUDGET};

fn menu_sizes() -> Vec<usize> {
    let mut sizes: Vec<usize> = BlockSizeMenu::default().sizes().to_vec();
    sizes.extend_from_slice(BlockSizeMenu::packed().sizes());
    sizes.sort_unstable();
    sizes.dedup();
    sizes
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn completed_decodes_are_byte_exact(
        data in prop::collection::vec(any::<u8>(), 1..=1200),
        block in prop::sample::select(menu_sizes()),
        loss in prop::sample::select(vec![0.0, 0.1, 0.3, 0.5]),
        seed in any::<u64>(),
    ) {
        let r = roundtrip(&data, block, loss, seed, 20_000).unwrap();
        prop_assert!(r.complete, "k {} not decoded after {} blocks", r.k, r.sent);
        prop_assert!(r.exact);
    }

    #[test]
    fn padding_never_exceeds_one_block(len in 1usize..=1200, block in prop::sample::select(menu_sizes())) {
        let meta = RoundMeta::new(len, block).unwrap();
        prop_assert!(meta.pad_len() < block);
    }
}

#[test]
fn blocks_needed_stay_within_a_quarter_of_k() {
    for (len, block) in [(512, 16), (1000, 16), (1000, 30), (2000, 47), (4000, 16)] {
        let k = Encoder::new(&vec![7u8; len], block, DEFAULT_PAYLOAD_BUDGET).unwrap().k();
        assert!(k >= 32);
        let runs: Vec<_> = (0..100u64).map(|s| roundtrip(&vec![0x5a; len], block, 0.0, s, 50 * k).unwrap()).collect();
        assert!(runs.iter().all(|r| r.complete && r.exact));
        let eps = runs.iter().map(|r| r.overhead()).sum::<f64>() / runs.len() as f64;
        assert!(eps <= 0.25, "k {k}: mean overhead {eps:.3}");
    }
}
