//! Per-game seed derivation.
//!
//! `derive_seed(master, cell, iteration)` runs three rounds of the SplitMix64
//! finalizer, absorbing one argument per round:
//!
//! ```text
//! h = mix(master    + GAMMA)
//! h = mix(h + cell      + GAMMA)
//! h = mix(h + iteration + GAMMA)
//! ```
//!
//! with wrapping arithmetic and `GAMMA = 0x9E3779B97F4A7C15`. Each step is a
//! bijection of the absorbed argument, so changing any single argument always
//! changes the result, and the value depends only on its inputs, never on the
//! order games are run in.

pub const GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(master_seed: u64, cell_index: u64, iteration_index: u64) -> u64 {
    let h = mix(master_seed.wrapping_add(GAMMA));
    let h = mix(h.wrapping_add(cell_index).wrapping_add(GAMMA));
    mix(h.wrapping_add(iteration_index).wrapping_add(GAMMA))
}

/// Tags for sub-streams split off a game seed.
#[derive(Debug, Clone, Copy)]
#[repr(u64)]
pub enum Stream {
    PlayerA = 1,
    PlayerB = 2,
}

/// Decoding seed for one model call in a game.
pub fn decode_seed(game_seed: u64, stream: Stream, round: u32, stage: u32) -> u64 {
    derive_seed(game_seed, stream as u64, (u64::from(round) << 8) | u64::from(stage))
}

#[cfg(test)]
mod tests {
    use super::*;

    // Frozen from an independent Python implementation of the same mixer.
    #[test]
    fn golden_values() {
        assert_eq!(derive_seed(0, 0, 0), GOLDEN_0_0_0);
        assert_eq!(derive_seed(42, 3, 7), GOLDEN_42_3_7);
    }

    const GOLDEN_0_0_0: u64 = 0x2382_75bc_38fc_be91;
    const GOLDEN_42_3_7: u64 = 0x07bd_fa5b_4a5f_0f15;

    #[test]
    fn each_argument_matters() {
        let base = derive_seed(7, 11, 13);
        assert_ne!(base, derive_seed(8, 11, 13));
        assert_ne!(base, derive_seed(7, 12, 13));
        assert_ne!(base, derive_seed(7, 11, 14));
    }

    #[test]
    fn no_collisions_over_a_large_grid() {
        let mut seen = std::collections::HashSet::new();
        for cell in 0..121 {
            for it in 0..100 {
                assert!(seen.insert(derive_seed(2024, cell, it)));
            }
        }
    }

    #[test]
    fn order_independent() {
        let forward: Vec<u64> = (0..50).map(|i| derive_seed(5, i % 7, i)).collect();
        let mut backward: Vec<u64> = (0..50).rev().map(|i| derive_seed(5, i % 7, i)).collect();
        backward.reverse();
        assert_eq!(forward, backward);
    }
}
