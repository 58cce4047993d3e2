//! Shared inputs for the benchmarks.

use emulate_core::Verdict;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Deterministic prediction and gold vectors of length `n`, roughly 3:1
/// True to False with about one disagreement in five.
pub fn label_vectors(n: usize, seed: u64) -> (Vec<Verdict>, Vec<Verdict>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut preds = Vec::with_capacity(n);
    let mut golds = Vec::with_capacity(n);
    for _ in 0..n {
        let gold = Verdict::from(rng.random_bool(0.75));
        let flip = rng.random_bool(0.2);
        golds.push(gold);
        preds.push(if flip { Verdict::from(gold == Verdict::False) } else { gold });
    }
    (preds, golds)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vectors_are_reproducible() {
        assert_eq!(label_vectors(100, 3), label_vectors(100, 3));
        let (p, g) = label_vectors(1000, 1);
        assert!(p.iter().zip(&g).any(|(a, b)| a != b));
        assert!(g.contains(&Verdict::False));
    }
}
