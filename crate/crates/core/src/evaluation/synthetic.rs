//! Seeded synthetic vote matrices with known LF accuracies.

use alloc::format;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::labelmodel::LambdaMatrix;

/// `rows` items with balanced latent labels `y ∈ {−1, +1}`; LF `k` votes `y`
/// with probability `accuracies[k]` and `−y` otherwise, never abstaining.
///
/// Returns λ and, per row, whether the latent label is `+1` (the row's
/// value is correct).
pub fn synthetic_lambda(accuracies: &[f64], rows: usize, seed: u64) -> (LambdaMatrix, Vec<bool>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut truth = Vec::with_capacity(rows);
    let mut data = Vec::with_capacity(rows);
    for i in 0..rows {
        let y: i8 = if i % 2 == 0 { 1 } else { -1 };
        truth.push(y == 1);
        data.push(
            accuracies
                .iter()
                .map(|&a| if rng.gen_bool(a.clamp(0.0, 1.0)) { y } else { -y })
                .collect::<Vec<i8>>(),
        );
    }
    let ids = (0..accuracies.len()).map(|k| format!("lf{k}")).collect();
    let lambda = LambdaMatrix::from_rows("synthetic", ids, &data).expect("rows have equal length");
    (lambda, truth)
}
