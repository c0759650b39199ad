use rand::Rng;

use crate::scalar::Scalar;

/// Indices whose score is within tie tolerance of the maximum.
fn maximizers<T: Scalar>(scores: &[T; 4]) -> ([usize; 4], usize) {
    let best = crate::table::max4(scores);
    let tol = T::tie_tolerance() * best.abs().max(T::one());
    let mut idx = [0; 4];
    let mut n = 0;
    for (i, &x) in scores.iter().enumerate() {
        if best - x <= tol {
            idx[n] = i;
            n += 1;
        }
    }
    (idx, n)
}

/// Argmax with uniform random tie-breaking. Draws from `rng` only on a tie.
pub(crate) fn argmax_random<T: Scalar, R: Rng + ?Sized>(scores: &[T; 4], rng: &mut R) -> usize {
    let (idx, n) = maximizers(scores);
    if n == 1 {
        idx[0]
    } else {
        idx[rng.gen_range(0..n)]
    }
}

/// Argmax with lowest-index tie-breaking.
pub(crate) fn argmax_first<T: Scalar>(scores: &[T; 4]) -> usize {
    maximizers(scores).0[0]
}
