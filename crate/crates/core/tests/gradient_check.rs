//! Analytic probe gradients against central finite differences.

mod common;

use common::{max_error, random_case};

#[test]
fn analytic_gradients_match_finite_differences() {
    let mut total = 0;
    for seed in 0..40 {
        let case = random_case(seed);
        let (err, checked) = max_error(&case);
        assert!(err < 1e-4, "seed {seed}: max relative error {err:e}");
        assert!(checked > 0);
        total += 1;
    }
    assert!(total >= 20);
}
