use crate::error::{Error, Result};

use super::matrix::{dot, Matrix};

/// Result of single-query attention pooling.
#[derive(Debug, Clone, PartialEq)]
pub struct Attention {
    /// Weighted average of the value rows, length `D`.
    pub pooled: Vec<f64>,
    /// Softmax weights over tokens, length `L`.
    pub weights: Vec<f64>,
}

/// Numerically stable softmax (max-subtracted).
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logits.iter().map(|v| (v - max).exp()).collect();
    let sum: f64 = out.iter().sum();
    for v in &mut out {
        *v /= sum;
    }
    out
}

/// `softmax(q K^T / sqrt(D)) V` where `D = q.len()`.
pub fn attend(query: &[f64], keys: &Matrix, values: &Matrix) -> Result<Attention> {
    if keys.rows() == 0 {
        return Err(Error::domain("attention over an empty token set"));
    }
    if keys.cols() != query.len() {
        return Err(Error::domain(format!(
            "query has {} dims but keys have {}",
            query.len(),
            keys.cols()
        )));
    }
    if values.rows() != keys.rows() {
        return Err(Error::domain(format!(
            "{} keys but {} values",
            keys.rows(),
            values.rows()
        )));
    }
    if !query.iter().all(|v| v.is_finite()) || !keys.is_finite() || !values.is_finite() {
        return Err(Error::domain("non-finite attention input"));
    }
    let scale = (query.len() as f64).sqrt();
    let scores: Vec<f64> = keys.iter_rows().map(|k| dot(k, query) / scale).collect();
    let weights = softmax(&scores);
    let pooled = values.vec_mul(&weights);
    Ok(Attention { pooled, weights })
}

/// Single-query cross-attention where the tokens serve as keys and values.
pub fn cross_attention(query: &[f64], tokens: &Matrix) -> Result<Attention> {
    attend(query, tokens, tokens)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn m(rows: &[&[f64]]) -> Matrix {
        Matrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn single_token() {
        let a = cross_attention(&[0.3, -7.0], &m(&[&[1.0, 2.0]])).unwrap();
        assert_eq!(a.pooled, vec![1.0, 2.0]);
        assert_eq!(a.weights, vec![1.0]);
    }

    #[test]
    fn identical_rows() {
        let a = cross_attention(&[5.0, -1.0], &m(&[&[3.0, 3.0], &[3.0, 3.0]])).unwrap();
        assert_eq!(a.pooled, vec![3.0, 3.0]);
    }

    #[test]
    fn two_by_two_by_hand() {
        // scores [1/sqrt(2), 0]; w0 = 1 / (1 + exp(-1/sqrt(2)))
        let a = cross_attention(&[1.0, 0.0], &m(&[&[1.0, 0.0], &[0.0, 1.0]])).unwrap();
        let w0 = 1.0 / (1.0 + (-1.0 / 2f64.sqrt()).exp());
        assert!((a.weights[0] - w0).abs() < 1e-15);
        assert!((a.weights[0] - 0.6697).abs() < 1e-4);
        assert!((a.weights[1] - 0.3303).abs() < 1e-4);
        assert!((a.pooled[0] - 0.6697).abs() < 1e-4);
        assert!((a.pooled[1] - 0.3303).abs() < 1e-4);
    }

    #[test]
    fn domain_errors() {
        assert!(cross_attention(&[1.0], &Matrix::zeros(0, 1)).is_err());
        assert!(cross_attention(&[1.0, 2.0], &m(&[&[1.0]])).is_err());
        assert!(cross_attention(&[f64::NAN], &m(&[&[1.0]])).is_err());
        assert!(cross_attention(&[1.0], &m(&[&[f64::INFINITY]])).is_err());
    }

    #[test]
    fn softmax_handles_large_logits() {
        let p = softmax(&[1000.0, 1000.0, -1000.0]);
        assert_eq!(p[0], 0.5);
        assert_eq!(p[2], 0.0);
    }

    fn tokens_strategy() -> impl Strategy<Value = (Vec<f64>, Matrix)> {
        (1usize..8, 1usize..10).prop_flat_map(|(d, l)| {
            (
                prop::collection::vec(-5.0f64..5.0, d),
                prop::collection::vec(-5.0f64..5.0, d * l),
            )
                .prop_map(move |(q, z)| (q, Matrix::from_vec(l, d, z).unwrap()))
        })
    }

    proptest! {
        #[test]
        fn weights_are_a_distribution((q, z) in tokens_strategy()) {
            let a = cross_attention(&q, &z).unwrap();
            prop_assert!(a.weights.iter().all(|w| *w >= 0.0));
            prop_assert!((a.weights.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }

        #[test]
        fn pooling_ignores_token_order((q, z) in tokens_strategy(), seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let mut perm: Vec<usize> = (0..z.rows()).collect();
            perm.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let a = cross_attention(&q, &z).unwrap();
            let b = cross_attention(&q, &z.permute_rows(&perm)).unwrap();
            for (x, y) in a.pooled.iter().zip(&b.pooled) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }

        #[test]
        fn softmax_shift_invariance(
            logits in prop::collection::vec(-50.0f64..50.0, 1..12),
            c in -100.0f64..100.0,
        ) {
            let shifted: Vec<f64> = logits.iter().map(|v| v + c).collect();
            for (x, y) in softmax(&logits).iter().zip(softmax(&shifted)) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }
    }
}
