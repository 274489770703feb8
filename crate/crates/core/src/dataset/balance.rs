use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::au::AuId;
use crate::error::{Error, Result};

/// Selects every positive index plus an equally sized, uniformly sampled
/// subset of negatives. Returned indices are ascending.
///
/// When there are fewer negatives than positives all negatives are kept.
pub fn balance(labels: &[bool], au: AuId, seed: u64) -> Result<Vec<usize>> {
    let (positives, mut negatives): (Vec<usize>, Vec<usize>) =
        (0..labels.len()).partition(|&i| labels[i]);
    if positives.is_empty() {
        return Err(Error::NoPositives { au });
    }
    let keep = positives.len().min(negatives.len());

    // Partial Fisher-Yates: the first `keep` slots end up a uniform sample.
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in 0..keep {
        let j = rng.random_range(i..negatives.len());
        negatives.swap(i, j);
    }
    negatives.truncate(keep);

    let mut out = positives;
    out.extend(negatives);
    out.sort_unstable();
    Ok(out)
}
