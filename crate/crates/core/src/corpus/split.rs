use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Acquisition indices assigned to each split, each list ascending.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub valid: Vec<usize>,
    pub test: Vec<usize>,
}

/// Sizes of the 80/10/10 partition: valid and test get `floor(n / 10)`
/// (at least one each), train takes the remainder.
pub fn split_sizes(n_acquisitions: usize) -> Result<(usize, usize, usize)> {
    if n_acquisitions < 3 {
        return Err(Error::CorpusTooSmall(n_acquisitions));
    }
    let held_out = (n_acquisitions / 10).max(1);
    Ok((n_acquisitions - 2 * held_out, held_out, held_out))
}

/// Seeded random partition of whole acquisitions.
pub fn split_by_acquisition(n_acquisitions: usize, seed: u64) -> Result<Split> {
    let (n_train, n_valid, _) = split_sizes(n_acquisitions)?;
    let mut order: Vec<usize> = (0..n_acquisitions).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let part = |range: std::ops::Range<usize>| {
        let mut v = order[range].to_vec();
        v.sort_unstable();
        v
    };
    Ok(Split {
        train: part(0..n_train),
        valid: part(n_train..n_train + n_valid),
        test: part(n_train + n_valid..n_acquisitions),
    })
}
