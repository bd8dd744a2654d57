use super::SimilarityState;
use crate::error::{Error, Result};

pub const MAX_BRUTE_FORCE: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct BruteForce {
    pub exemplars: Vec<usize>,
    pub net_similarity: f64,
}

/// Exhaustive search over exemplar subsets for the best net similarity.
///
/// Subsets are visited by size, then in lexicographic order, and only a
/// strictly better net replaces the incumbent, so ties go to the smaller
/// and then lexicographically first subset.
pub fn brute_force_exemplars(state: &SimilarityState) -> Result<BruteForce> {
    let n = state.n();
    if n > MAX_BRUTE_FORCE {
        return Err(Error::TooLarge(n));
    }
    let mut best = BruteForce {
        exemplars: Vec::new(),
        net_similarity: f64::NEG_INFINITY,
    };
    let mut is_exemplar = vec![false; n];
    for k in 1..=n {
        let mut combo: Vec<usize> = (0..k).collect();
        loop {
            is_exemplar.iter_mut().for_each(|e| *e = false);
            for &e in &combo {
                is_exemplar[e] = true;
            }
            let net: f64 = (0..n)
                .map(|i| {
                    if is_exemplar[i] {
                        state.s(i, i)
                    } else {
                        combo.iter().map(|&e| state.s(i, e)).fold(f64::NEG_INFINITY, f64::max)
                    }
                })
                .sum();
            if net > best.net_similarity {
                best = BruteForce {
                    exemplars: combo.clone(),
                    net_similarity: net,
                };
            }
            if !next_combination(&mut combo, n) {
                break;
            }
        }
    }
    Ok(best)
}

fn next_combination(combo: &mut [usize], n: usize) -> bool {
    let k = combo.len();
    let Some(pos) = (0..k).rev().find(|&i| combo[i] < n - k + i) else {
        return false;
    };
    combo[pos] += 1;
    for i in pos + 1..k {
        combo[i] = combo[i - 1] + 1;
    }
    true
}
