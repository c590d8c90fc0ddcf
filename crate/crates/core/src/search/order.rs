//! Keyed pseudo-random permutations of `[0, n)` for visiting a stratum in random order
//! without materialising it.

pub(crate) fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives an independent seed for purpose `k` from a user seed.
pub fn sub_seed(seed: u64, k: u64) -> u64 {
    splitmix(seed ^ splitmix(k.wrapping_add(0x5851_f42d_4c95_7f2d)))
}

const ROUNDS: u64 = 4;

/// Balanced Feistel network on the smallest even-width bit domain covering `n`, restricted
/// to `[0, n)` by cycle walking. The domain is under `4n`, so a walk takes fewer than four
/// steps on average.
#[derive(Debug, Clone, Copy)]
pub struct Feistel {
    n: u128,
    half: u32,
    key: u64,
}

impl Feistel {
    pub fn new(n: u128, key: u64) -> Feistel {
        let bits = if n <= 1 { 0 } else { 128 - (n - 1).leading_zeros() };
        Feistel { n, half: bits.div_ceil(2).max(1), key }
    }

    fn round(&self, x: u128) -> u128 {
        let mask = (1u128 << self.half) - 1;
        let (mut l, mut r) = (x >> self.half, x & mask);
        for k in 0..ROUNDS {
            let f = splitmix(self.key ^ splitmix(r as u64 ^ k.wrapping_mul(0xa076_1d64_78bd_642f))) as u128 & mask;
            (l, r) = (r, l ^ f);
        }
        (l << self.half) | r
    }

    /// Image of `x < n`.
    pub fn apply(&self, x: u128) -> u128 {
        debug_assert!(x < self.n);
        let mut y = self.round(x);
        while y >= self.n {
            y = self.round(y);
        }
        y
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn is_a_permutation(n in 1u128..3000, key: u64) {
            let f = Feistel::new(n, key);
            let mut seen = vec![false; n as usize];
            for x in 0..n {
                let y = f.apply(x);
                prop_assert!(y < n);
                prop_assert!(!seen[y as usize]);
                seen[y as usize] = true;
            }
        }
    }

    #[test]
    fn huge_domains() {
        let f = Feistel::new(u128::MAX - 5, 9);
        for x in [0, 1, u128::MAX - 6, 1 << 100] {
            assert!(f.apply(x) < u128::MAX - 5);
        }
    }

    #[test]
    fn keys_differ() {
        let a: alloc::vec::Vec<u128> = (0..100).map(|x| Feistel::new(100, 1).apply(x)).collect();
        let b: alloc::vec::Vec<u128> = (0..100).map(|x| Feistel::new(100, 2).apply(x)).collect();
        assert_ne!(a, b);
    }
}
