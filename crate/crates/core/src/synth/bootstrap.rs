use crate::error::{Error, Result};
use crate::rng::rng_from;
use crate::tabular::{bootstrap_indices, Dataset, Provenance};

/// `n_prime` rows drawn with replacement. Each drawn row keeps the id of
/// the training row it copies.
pub fn bootstrap(train: &Dataset, n_prime: usize, seed: u64) -> Result<Dataset> {
    if train.is_empty() {
        return Err(Error::NoRows);
    }
    let idx = bootstrap_indices(train.len(), n_prime, &mut rng_from(seed));
    Ok(train.subset(&idx).with_provenance(Provenance::Resampled))
}
