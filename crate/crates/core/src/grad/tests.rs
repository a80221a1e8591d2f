use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::check::finite_difference_check;
use super::*;

fn rand_tensor(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    Tensor::from_fn(shape, |_| rng.random_range(-1.0..1.0))
}

#[test]
fn matmul_identity_and_hand_product() {
    let g = Graph::new();
    let i = g.constant(Tensor::identity(2));
    let m = g.constant(Tensor::new(&[2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap());
    assert_eq!(i.matmul(m).unwrap().value().data(), &[1.0, 2.0, 3.0, 4.0]);

    let a = g.constant(Tensor::new(&[1, 2], vec![1.0, 2.0]).unwrap());
    let b = g.constant(Tensor::new(&[2, 1], vec![3.0, 4.0]).unwrap());
    assert_eq!(a.matmul(b).unwrap().value().data(), &[11.0]);
}

#[test]
fn matmul_shape_mismatch_names_both_shapes() {
    let g = Graph::new();
    let a = g.constant(Tensor::zeros(&[2, 3]));
    let b = g.constant(Tensor::zeros(&[2, 3]));
    let err = a.matmul(b).unwrap_err().to_string();
    assert!(err.contains("[2, 3]") && err.matches("[2, 3]").count() == 2, "{err}");
}

#[test]
fn matmul_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let inputs = [rand_tensor(&mut rng, &[3, 3]), rand_tensor(&mut rng, &[3, 3])];
    let check = finite_difference_check(&inputs, 1e-5, |_, v| Ok(v[0].matmul(v[1])?.sum())).unwrap();
    assert!(check.relative_error < 1e-6, "{}", check.relative_error);
}

#[test]
fn conv_zero_input_and_overlap_counts() {
    let g = Graph::new();
    let zero = g.constant(Tensor::zeros(&[2, 4, 5]));
    let k = g.constant(Tensor::from_fn(&[3, 2, 3, 3], |i| i as f64));
    assert!(zero.conv2d_zero_pad(k, None).unwrap().value().data().iter().all(|v| *v == 0.0));

    let ones = g.constant(Tensor::full(&[1, 3, 3], 1.0));
    let k1 = g.constant(Tensor::full(&[1, 1, 3, 3], 1.0));
    let out = ones.conv2d_zero_pad(k1, None).unwrap().value();
    assert_eq!(out.shape(), &[1, 3, 3]);
    assert_eq!(out.data()[4], 9.0);
    for corner in [0, 2, 6, 8] {
        assert_eq!(out.data()[corner], 4.0);
    }
    assert_eq!(out.data()[1], 6.0);
}

#[test]
fn conv_channel_mismatch_is_dimension_error() {
    let g = Graph::new();
    let x = g.constant(Tensor::zeros(&[2, 4, 4]));
    let k = g.constant(Tensor::zeros(&[1, 3, 3, 3]));
    assert!(matches!(x.conv2d_zero_pad(k, None), Err(GradError::Dimension(_))));
}

#[test]
fn conv_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let x = rand_tensor(&mut rng, &[2, 4, 5]);
    let k = rand_tensor(&mut rng, &[3, 2, 3, 3]);
    let b = rand_tensor(&mut rng, &[3]);
    let w = rand_tensor(&mut rng, &[3, 4, 5]);
    let check = finite_difference_check(&[x, k, b], 1e-5, |g, v| {
        let wv = g.constant(w.clone());
        Ok(v[0].conv2d_zero_pad(v[1], Some(v[2]))?.tanh().mul(wv)?.sum())
    })
    .unwrap();
    assert!(check.relative_error < 1e-5, "{}", check.relative_error);
}

#[test]
fn reverse_width_cases() {
    let g = Graph::new();
    let x = g.constant(Tensor::new(&[1, 1, 3], vec![1.0, 2.0, 3.0]).unwrap());
    assert_eq!(x.reverse_width(&[1.0]).unwrap().value().data(), &[3.0, 2.0, 1.0]);
    assert_eq!(x.reverse_width(&[-1.0]).unwrap().value().data(), &[-3.0, -2.0, -1.0]);

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let t = rand_tensor(&mut rng, &[2, 3, 4, 7]);
    let v = g.constant(t.clone());
    let mask = [1.0, -1.0, 1.0];
    let twice = v.reverse_width(&mask).unwrap().reverse_width(&mask).unwrap().value();
    assert_eq!(twice, t);
    assert!(matches!(v.reverse_width(&[1.0, 0.5, 1.0]), Err(GradError::Usage(_))));
}

#[test]
fn elementwise_examples() {
    let g = Graph::new();
    assert_eq!(g.constant(Tensor::scalar(0.0)).tanh().item(), 0.0);

    let x = g.param(Tensor::scalar(1.5));
    let c = x.clip(0.8, 1.2);
    assert_eq!(c.item(), 1.2);
    g.backward(c).unwrap();
    assert_eq!(g.grad(x).unwrap().item(), 0.0);

    let bad = g.constant(Tensor::new(&[2], vec![1.0, 0.0]).unwrap());
    assert!(matches!(bad.log(), Err(GradError::Domain(_))));
}

#[test]
fn min_pairwise_ties_route_to_first_operand() {
    let g = Graph::new();
    let a = g.param(Tensor::scalar(2.0));
    let b = g.param(Tensor::scalar(2.0));
    let m = a.min_pairwise(b).unwrap();
    g.backward(m).unwrap();
    assert_eq!(g.grad(a).unwrap().item(), 1.0);
    assert_eq!(g.grad_or_zeros(b).item(), 0.0);
}

#[test]
fn mean_tanh_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let x = rand_tensor(&mut rng, &[4, 5]);
    let check = finite_difference_check(&[x], 1e-5, |_, v| Ok(v[0].tanh().mean())).unwrap();
    assert!(check.relative_error < 1e-6, "{}", check.relative_error);
}

#[test]
fn gaussian_logpdf_reference_values() {
    let g = Graph::new();
    let x = g.constant(Tensor::scalar(0.3));
    let m = g.constant(Tensor::scalar(0.3));
    let zero = g.constant(Tensor::scalar(0.0));
    let half_ln_2pi = 0.5 * (2.0 * std::f64::consts::PI).ln();
    assert!((gaussian_logpdf(x, m, zero).unwrap().item() + half_ln_2pi).abs() < 1e-15);
    assert!((gaussian_logpdf(x, m, zero).unwrap().item() + 0.9189).abs() < 1e-4);
    let x1 = g.constant(Tensor::scalar(1.3));
    assert!((gaussian_logpdf(x1, m, zero).unwrap().item() - (-0.5 - half_ln_2pi)).abs() < 1e-15);
}

#[test]
fn gaussian_logpdf_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let inputs = [rand_tensor(&mut rng, &[6]), rand_tensor(&mut rng, &[6]), rand_tensor(&mut rng, &[6])];
    let check = finite_difference_check(&inputs, 1e-5, |_, v| Ok(gaussian_logpdf(v[0], v[1], v[2])?.sum())).unwrap();
    assert!(check.relative_error < 1e-6, "{}", check.relative_error);
}

#[test]
fn backward_on_sum_and_square() {
    let g = Graph::new();
    let x = g.param(Tensor::new(&[3], vec![1.0, -2.0, 4.0]).unwrap());
    g.backward(x.sum()).unwrap();
    assert_eq!(g.grad(x).unwrap().data(), &[1.0, 1.0, 1.0]);

    let g = Graph::new();
    let x = g.param(Tensor::scalar(3.0));
    g.backward(x.mul(x).unwrap().sum()).unwrap();
    assert_eq!(g.grad(x).unwrap().item(), 6.0);
}

#[test]
fn backward_rejects_non_scalar_root_and_accumulates() {
    let g = Graph::new();
    let x = g.param(Tensor::new(&[2], vec![1.0, 2.0]).unwrap());
    assert!(matches!(g.backward(x.tanh()), Err(GradError::Usage(_))));

    let s = x.scale(3.0).sum();
    g.backward(s).unwrap();
    g.backward(s).unwrap();
    assert_eq!(g.grad(x).unwrap().data(), &[6.0, 6.0]);
    g.zero_grad();
    assert!(g.grad(x).is_none());
}

#[test]
fn shared_subexpressions_accumulate_like_an_unshared_clone() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let t = rand_tensor(&mut rng, &[5]);

    let g = Graph::new();
    let x = g.param(t.clone());
    let h = x.tanh();
    let shared = h.mul(h).unwrap().add(h).unwrap().sum();
    g.backward(shared).unwrap();

    let g2 = Graph::new();
    let x2 = g2.param(t);
    let (h1, h2, h3) = (x2.tanh(), x2.tanh(), x2.tanh());
    let unshared = h1.mul(h2).unwrap().add(h3).unwrap().sum();
    g2.backward(unshared).unwrap();

    let a = g.grad(x).unwrap();
    let b = g2.grad(x2).unwrap();
    assert!(a.max_abs_diff(&b) < 1e-15);
}

#[test]
fn composite_dense_trunk_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let x = rand_tensor(&mut rng, &[4, 6]);
    let w1 = rand_tensor(&mut rng, &[6, 5]);
    let b1 = rand_tensor(&mut rng, &[5]);
    let w2 = rand_tensor(&mut rng, &[5, 1]);
    let target = rand_tensor(&mut rng, &[4, 1]);
    let check = finite_difference_check(&[w1, b1, w2], 1e-5, |g, v| {
        let xv = g.constant(x.clone());
        let tv = g.constant(target.clone());
        let h = xv.matmul(v[0])?.add_bias(v[1])?.tanh();
        Ok(h.matmul(v[2])?.sub(tv)?.square().mean())
    })
    .unwrap();
    assert!(check.relative_error < 1e-4, "{}", check.relative_error);
}

#[test]
fn softplus_exp_log_expand_pool_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let x = rand_tensor(&mut rng, &[2, 3, 4, 4]);
    let s = rand_tensor(&mut rng, &[1]);
    let check = finite_difference_check(&[x, s], 1e-5, |_, v| {
        let pooled = v[0].softplus().mean_spatial()?;
        let e = v[1].expand(&[2, 3])?.exp();
        Ok(pooled.mul(e)?.add_scalar(1.0).log()?.sum())
    })
    .unwrap();
    assert!(check.relative_error < 1e-6, "{}", check.relative_error);
}
