use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ndcore::{permutation, seeded};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// Seeded 80/10/10 partition of `0..n`: validation and test each get
/// `round(n/10)` rows, training the rest.
pub fn split_811(n: usize, seed: u64) -> Result<Split> {
    if n < 10 {
        return Err(Error::InvalidArgument(format!("split_811 needs at least 10 rows, got {n}")));
    }
    let order = permutation(n, &mut seeded(seed));
    let tenth = (n + 5) / 10;
    Ok(Split {
        val: order[..tenth].to_vec(),
        test: order[tenth..2 * tenth].to_vec(),
        train: order[2 * tenth..].to_vec(),
    })
}
