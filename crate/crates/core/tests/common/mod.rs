//! Finite-difference gradient check shared by the test targets.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use semv2x::probe::{probe_backward, Activation, Matrix, ProbeParams, ProbeShape};

const H: f64 = 1e-5;

/// Relative error with an absolute floor so exact zeros compare sanely.
fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

pub struct Case {
    pub params: ProbeParams,
    pub tokens: Matrix,
    pub label: usize,
}

pub fn random_case(seed: u64) -> Case {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = rng.gen_range(1..=8);
    let len = rng.gen_range(1..=6);
    let shape = ProbeShape {
        dim,
        hidden: rng.gen_range(1..=8),
        classes: rng.gen_range(2..=4),
        activation: if seed.is_multiple_of(2) {
            Activation::Relu
        } else {
            Activation::Gelu
        },
    };
    let mut params = ProbeParams::init(shape, rng.gen());
    // non-zero biases so every term of the gradient is exercised
    for b in [&mut params.b_mlp1, &mut params.b_mlp2, &mut params.b_cls] {
        for v in b.iter_mut() {
            *v = rng.gen_range(-0.5..0.5);
        }
    }
    let data = (0..len * dim).map(|_| rng.gen_range(-2.0..2.0)).collect();
    Case {
        tokens: Matrix::from_vec(len, dim, data).unwrap(),
        label: rng.gen_range(0..shape.classes),
        params,
    }
}

fn loss(params: &ProbeParams, case: &Case) -> f64 {
    probe_backward(params, &case.tokens, case.label).unwrap().0
}

/// Largest relative error over all parameters; entries whose difference
/// quotient straddles a ReLU kink are skipped.
pub fn max_error(case: &Case) -> (f64, usize) {
    let (_, grad) = probe_backward(&case.params, &case.tokens, case.label).unwrap();
    let analytic: Vec<f64> = grad
        .tensors()
        .iter()
        .flat_map(|(_, t)| t.to_vec())
        .collect();
    let mut worst = 0.0f64;
    let mut checked = 0;
    let mut k = 0;
    for t in 0..9 {
        let n = case.params.tensors()[t].1.len();
        for i in 0..n {
            let mut plus = case.params.clone();
            plus.tensors_mut()[t][i] += H;
            let mut minus = case.params.clone();
            minus.tensors_mut()[t][i] -= H;
            let fd = (loss(&plus, case) - loss(&minus, case)) / (2.0 * H);
            if !crosses_kink(case, &plus, &minus) {
                worst = worst.max(rel_err(analytic[k], fd));
                checked += 1;
            }
            k += 1;
        }
    }
    (worst, checked)
}

fn crosses_kink(case: &Case, plus: &ProbeParams, minus: &ProbeParams) -> bool {
    if case.params.activation != Activation::Relu {
        return false;
    }
    let pre = |p: &ProbeParams| {
        let pooled = p.pool(&case.tokens).unwrap().pooled;
        let mut out = p.b_mlp1.clone();
        for (j, o) in out.iter_mut().enumerate() {
            for (i, x) in pooled.iter().enumerate() {
                *o += x * p.w_mlp1.get(i, j);
            }
        }
        out
    };
    pre(plus)
        .iter()
        .zip(pre(minus))
        .any(|(a, b)| (*a > 0.0) != (b > 0.0))
}
