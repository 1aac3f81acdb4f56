use fbcode_core::RngStream;
use fbcode_neural::{Graph, NnError, Tensor, Var};
use proptest::prelude::*;

fn randn(rows: usize, cols: usize, stream: u64) -> Tensor<f64> {
    let mut rng = RngStream::new(17, stream);
    Tensor::from_fn(rows, cols, |_, _| rng.gaussian::<f64>())
}

/// Entries bounded away from zero so ReLU stays differentiable under the
/// finite-difference step.
fn away_from_zero(rows: usize, cols: usize, stream: u64) -> Tensor<f64> {
    randn(rows, cols, stream).map(|v| if v.abs() < 0.05 { v.signum() * 0.05 + v } else { v })
}

type Build = dyn Fn(&mut Graph<f64>, &[Var]) -> Var;

/// `sum(f(inputs) * R)` for a fixed random `R`, so every output entry gets a
/// distinct upstream gradient.
fn loss(g: &mut Graph<f64>, vars: &[Var], f: &Build) -> Var {
    let out = f(g, vars);
    let (r, c) = g.value(out).shape();
    let w = g.constant(randn(r, c, 999)).unwrap();
    let m = g.mul(out, w).unwrap();
    g.sum(m).unwrap()
}

fn eval(inputs: &[Tensor<f64>], f: &Build) -> f64 {
    let mut g = Graph::new();
    let vars: Vec<Var> = inputs.iter().map(|t| g.constant(t.clone()).unwrap()).collect();
    let l = loss(&mut g, &vars, f);
    g.value(l).item().unwrap()
}

/// Largest gap between backprop and central differences, relative to
/// `max(1, |numeric|)`.
fn grad_gap(inputs: Vec<Tensor<f64>>, f: &Build) -> f64 {
    let mut g = Graph::new();
    let vars: Vec<Var> = inputs.iter().map(|t| g.param(t.clone()).unwrap()).collect();
    let l = loss(&mut g, &vars, f);
    g.backward(l).unwrap();
    let eps = 1e-6;
    let mut worst: f64 = 0.0;
    for (i, v) in vars.iter().enumerate() {
        let analytic = g.grad(*v).expect("input gradient").clone();
        for j in 0..inputs[i].len() {
            let mut plus = inputs.clone();
            plus[i].data_mut()[j] += eps;
            let mut minus = inputs.clone();
            minus[i].data_mut()[j] -= eps;
            let numeric = (eval(&plus, f) - eval(&minus, f)) / (2.0 * eps);
            let gap = (analytic.data()[j] - numeric).abs() / numeric.abs().max(1.0);
            worst = worst.max(gap);
        }
    }
    worst
}

fn assert_grad(name: &str, inputs: Vec<Tensor<f64>>, f: &Build) {
    let gap = grad_gap(inputs, f);
    assert!(gap < 1e-6, "{name}: gradient gap {gap:e}");
}

#[test]
fn matmul_gradient() {
    assert_grad("matmul", vec![randn(5, 3, 1), randn(3, 4, 2)], &|g, v| g.matmul(v[0], v[1]).unwrap());
}

#[test]
fn add_bias_gradient() {
    assert_grad("add_bias", vec![randn(6, 3, 1), randn(1, 3, 2)], &|g, v| g.add_bias(v[0], v[1]).unwrap());
}

#[test]
fn mul_row_gradient() {
    assert_grad("mul_row", vec![randn(6, 3, 1), randn(1, 3, 2)], &|g, v| g.mul_row(v[0], v[1]).unwrap());
}

#[test]
fn elementwise_gradients() {
    assert_grad("add", vec![randn(4, 3, 1), randn(4, 3, 2)], &|g, v| g.add(v[0], v[1]).unwrap());
    assert_grad("mul", vec![randn(4, 3, 1), randn(4, 3, 2)], &|g, v| g.mul(v[0], v[1]).unwrap());
    assert_grad("relu", vec![away_from_zero(5, 4, 3)], &|g, v| g.relu(v[0]).unwrap());
    assert_grad("negate", vec![randn(3, 3, 4)], &|g, v| g.negate(v[0]).unwrap());
    assert_grad("scale", vec![randn(3, 2, 5)], &|g, v| g.scale(v[0], -2.5).unwrap());
}

#[test]
fn layout_gradients() {
    assert_grad("concat", vec![randn(4, 2, 1), randn(4, 3, 2), randn(4, 1, 3)], &|g, v| {
        g.concat_cols(v).unwrap()
    });
    assert_grad("slice", vec![randn(4, 5, 1)], &|g, v| g.slice_cols(v[0], 1, 4).unwrap());
}

#[test]
fn reduction_gradients() {
    assert_grad("mean", vec![randn(7, 3, 1)], &|g, v| g.reduce_mean(v[0]).unwrap());
    assert_grad("variance", vec![randn(7, 3, 2)], &|g, v| g.reduce_var(v[0]).unwrap());
    assert_grad("sum", vec![randn(7, 3, 3)], &|g, v| g.sum(v[0]).unwrap());
    assert_grad("standardize", vec![randn(9, 2, 4)], &|g, v| g.standardize(v[0]).unwrap());
}

#[test]
fn softmax_cross_entropy_gradient() {
    let labels = vec![0, 3, 1, 1, 2, 0];
    assert_grad("softmax_ce", vec![randn(6, 4, 1)], &move |g, v| {
        g.softmax_cross_entropy(v[0], &labels).unwrap()
    });
}

#[test]
fn chained_gradient() {
    assert_grad("chain", vec![randn(8, 3, 1), randn(3, 4, 2), randn(1, 4, 3)], &|g, v| {
        let h = g.matmul(v[0], v[1]).unwrap();
        let h = g.add_bias(h, v[2]).unwrap();
        let s = g.standardize(h).unwrap();
        let n = g.negate(s).unwrap();
        g.concat_cols(&[s, n]).unwrap()
    });
}

#[test]
fn concat_gradient_splits_back() {
    let mut g = Graph::new();
    let a = g.param(randn(3, 2, 1)).unwrap();
    let b = g.param(randn(3, 3, 2)).unwrap();
    let c = g.concat_cols(&[a, b]).unwrap();
    let w = g.constant(Tensor::from_fn(3, 5, |r, c| (10 * r + c) as f64)).unwrap();
    let m = g.mul(c, w).unwrap();
    let l = g.sum(m).unwrap();
    g.backward(l).unwrap();
    let ga = g.grad(a).unwrap();
    let gb = g.grad(b).unwrap();
    assert_eq!(ga.shape(), (3, 2));
    assert_eq!(gb.shape(), (3, 3));
    assert_eq!(ga.get(2, 1), 21.0);
    assert_eq!(gb.get(1, 0), 12.0);
    assert_eq!(gb.get(2, 2), 24.0);
}

#[test]
fn gradients_accumulate_over_reuse() {
    let mut g = Graph::new();
    let x = g.param(Tensor::scalar(3.0f64)).unwrap();
    let y = g.mul(x, x).unwrap();
    let z = g.add(y, x).unwrap();
    g.backward(z).unwrap();
    assert_eq!(g.grad(x).unwrap().item().unwrap(), 7.0);
}

#[test]
fn constants_get_no_gradient() {
    let mut g = Graph::new();
    let x = g.param(randn(2, 2, 1)).unwrap();
    let c = g.constant(randn(2, 2, 2)).unwrap();
    let m = g.mul(x, c).unwrap();
    let l = g.sum(m).unwrap();
    assert!(g.requires_grad(l) && !g.requires_grad(c));
    g.backward(l).unwrap();
    assert!(g.grad(c).is_none());
    assert_eq!(g.grad(x).unwrap(), g.value(c));
}

#[test]
fn backward_preconditions() {
    let mut g = Graph::new();
    let x = g.param(randn(2, 2, 1)).unwrap();
    assert!(matches!(g.backward(x), Err(NnError::Shape(_))));
    let c = g.constant(Tensor::scalar(1.0f64)).unwrap();
    assert!(matches!(g.backward(c), Err(NnError::Usage(_))));
}

#[test]
fn shape_mismatches_are_errors() {
    let mut g = Graph::new();
    let a = g.constant(randn(2, 3, 1)).unwrap();
    let b = g.constant(randn(2, 2, 2)).unwrap();
    assert!(matches!(g.matmul(a, b), Err(NnError::Shape(_))));
    assert!(matches!(g.add(a, b), Err(NnError::Shape(_))));
    assert!(g.slice_cols(a, 2, 5).is_err());
    assert!(g.softmax_cross_entropy(a, &[0, 3]).is_err());
    assert!(g.softmax_cross_entropy(a, &[0]).is_err());
}

#[test]
fn non_finite_values_are_rejected() {
    let mut g = Graph::new();
    assert!(matches!(g.param(Tensor::scalar(f64::NAN)), Err(NnError::Numeric(_))));
    let big = g.constant(Tensor::scalar(1e200f64)).unwrap();
    assert!(matches!(g.mul(big, big), Err(NnError::Numeric(_))));
}

#[test]
fn f32_matches_f64_forward() {
    let a = randn(6, 5, 1);
    let b = randn(5, 4, 2);
    let want = a.matmul(&b).unwrap();
    let got = a.cast::<f32>().matmul(&b.cast::<f32>()).unwrap();
    for (x, y) in want.data().iter().zip(got.data()) {
        assert!((x - *y as f64).abs() < 1e-5);
    }
}

proptest! {
    #[test]
    fn matmul_matches_naive(m in 1usize..6, k in 1usize..6, n in 1usize..6, s in 0u64..1000) {
        let a = randn(m, k, s);
        let b = randn(k, n, s + 1);
        let c = a.matmul(&b).unwrap();
        for i in 0..m {
            for j in 0..n {
                let want: f64 = (0..k).map(|t| a.get(i, t) * b.get(t, j)).sum();
                prop_assert!((c.get(i, j) - want).abs() < 1e-12);
            }
        }
        let ct = a.transpose().matmul_t(true, &b.transpose(), true).unwrap();
        prop_assert!(ct.zip_map(&c, |x, y| (x - y).abs()).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn standardize_is_zero_mean_unit_variance(rows in 2usize..40, s in 0u64..1000, scale in 0.1f64..100.0) {
        let mut g = Graph::new();
        let x = g.constant(randn(rows, 3, s).map(|v| scale * v + 5.0)).unwrap();
        let z = g.standardize(x).unwrap();
        let (mean, var) = g.value(z).column_moments();
        for (m, v) in mean.iter().zip(&var) {
            prop_assert!(m.abs() < 1e-9);
            prop_assert!((v - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn cross_entropy_is_nonnegative_and_uniform_logits_give_log_classes(
        rows in 1usize..10, cols in 2usize..9, s in 0u64..1000,
    ) {
        let mut g = Graph::new();
        let labels: Vec<usize> = (0..rows).map(|r| (r * 7 + s as usize) % cols).collect();
        let x = g.constant(randn(rows, cols, s).map(|v| 10.0 * v)).unwrap();
        let l = g.softmax_cross_entropy(x, &labels).unwrap();
        prop_assert!(g.value(l).item().unwrap() >= 0.0);
        let u = g.constant(Tensor::filled(rows, cols, 0.3)).unwrap();
        let l = g.softmax_cross_entropy(u, &labels).unwrap();
        prop_assert!((g.value(l).item().unwrap() - (cols as f64).ln()).abs() < 1e-12);
    }
}
