//! Order-fixed floating point reductions.
//!
//! Sums are split into fixed-size chunks, each chunk is summed left to right,
//! and the chunk totals are combined by pairwise summation. The tree shape
//! only depends on the input length, so results are bit-identical for any
//! number of worker threads.

use rayon::prelude::*;

pub const CHUNK: usize = 2048;

/// Pairwise (cascade) summation of a slice.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        2 => values[0] + values[1],
        n => {
            let mid = n / 2;
            pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
        }
    }
}

/// `Σ f(item)` with a thread-count independent evaluation order.
pub fn par_sum_by<T, F>(items: &[T], f: F) -> f64
where
    T: Sync,
    F: Fn(&T) -> f64 + Sync,
{
    let partial: Vec<f64> = items
        .par_chunks(CHUNK)
        .map(|chunk| chunk.iter().fold(0.0, |acc, item| acc + f(item)))
        .collect();
    pairwise_sum(&partial)
}

/// Several sums at once, same evaluation order as [`par_sum_by`].
pub fn par_sums_by<T, F, const K: usize>(items: &[T], f: F) -> [f64; K]
where
    T: Sync,
    F: Fn(&T) -> [f64; K] + Sync,
{
    let partial: Vec<[f64; K]> = items
        .par_chunks(CHUNK)
        .map(|chunk| {
            chunk.iter().fold([0.0; K], |mut acc, item| {
                let v = f(item);
                for (a, x) in acc.iter_mut().zip(v) {
                    *a += x;
                }
                acc
            })
        })
        .collect();
    std::array::from_fn(|k| {
        let column: Vec<f64> = partial.iter().map(|p| p[k]).collect();
        pairwise_sum(&column)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thread_count_does_not_change_bits() {
        let values: Vec<f64> = (0..100_003).map(|i| ((i as f64) * 0.37).sin() * 1e-3 + 1.0 / (1.0 + i as f64)).collect();
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = one.install(|| par_sum_by(&values, |v| *v));
        let b = four.install(|| par_sum_by(&values, |v| *v));
        assert_eq!(a.to_bits(), b.to_bits());
        let [c, d] = four.install(|| par_sums_by(&values, |v| [*v, v * v]));
        assert_eq!(c.to_bits(), a.to_bits());
        assert!(d > 0.0);
    }

    #[test]
    fn pairwise_small_cases() {
        assert_eq!(pairwise_sum(&[]), 0.0);
        assert_eq!(pairwise_sum(&[2.0]), 2.0);
        assert_eq!(pairwise_sum(&[1.0, 2.0, 3.0, 4.0, 5.0]), 15.0);
    }
}
