#![allow(dead_code)]

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rbcflow_core::nets::PolicyParams;
use rbcflow_core::solver::GlobalObservation;

/// Print the verdict line for one criterion, then fail the test if it did not hold.
pub fn verdict(criterion: u32, name: &str, ok: bool, detail: &str) {
    println!("criterion {criterion} ({name}): {} - {detail}", if ok { "PASS" } else { "FAIL" });
    assert!(ok, "criterion {criterion} ({name}) failed: {detail}");
}

/// Overwrite every tensor with fresh Gaussian values of fan-in scale so that
/// each draw is a generic network of the same architecture.
pub fn randomize(params: &mut PolicyParams, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for t in params.actor.iter_mut().chain(params.critic.iter_mut()) {
        let shape = t.shape().to_vec();
        let scale = match shape.len() {
            1 => 0.2,
            2 => 1.0 / (shape[0] as f64).sqrt(),
            _ => 1.0 / (shape[1..].iter().product::<usize>() as f64).sqrt(),
        };
        for v in t.data_mut() {
            let z: f64 = StandardNormal.sample(&mut rng);
            *v = scale * z;
        }
    }
    if let Some(log_std) = params.actor.last_mut() {
        log_std.data_mut()[0] = rng.random_range(-1.0..0.5);
    }
}

pub fn random_observation(rng: &mut ChaCha8Rng, columns: usize) -> GlobalObservation {
    GlobalObservation::from_data(columns, (0..24 * columns).map(|_| rng.random_range(-1.5..1.5)).collect()).unwrap()
}

fn sqrt_spd(m: &DMatrix<f64>) -> DMatrix<f64> {
    let e = SymmetricEigen::new(m.clone());
    let d = DMatrix::from_diagonal(&e.eigenvalues.map(f64::sqrt));
    &e.eigenvectors * d * e.eigenvectors.transpose()
}

/// Marginal Rayleigh number of wavenumber `a` between rigid isothermal plates,
/// from a second-order finite-difference discretization of
/// (D^2 - a^2)^2 W = Ra a^2 T, (D^2 - a^2) T = -W on `n` interior points.
pub fn marginal_rayleigh(a: f64, n: usize) -> f64 {
    let h = 1.0 / (n + 1) as f64;
    let (h2, h4) = (h * h, h.powi(4));
    let mut d2 = DMatrix::<f64>::zeros(n, n);
    let mut d4 = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        d2[(i, i)] = -2.0 / h2;
        d4[(i, i)] = 6.0 / h4;
        if i + 1 < n {
            d2[(i, i + 1)] = 1.0 / h2;
            d2[(i + 1, i)] = 1.0 / h2;
            d4[(i, i + 1)] = -4.0 / h4;
            d4[(i + 1, i)] = -4.0 / h4;
        }
        if i + 2 < n {
            d4[(i, i + 2)] = 1.0 / h4;
            d4[(i + 2, i)] = 1.0 / h4;
        }
    }
    // Zero slope at the walls reflects the ghost value onto the first interior point.
    d4[(0, 0)] = 7.0 / h4;
    d4[(n - 1, n - 1)] = 7.0 / h4;
    let eye = DMatrix::<f64>::identity(n, n);
    let s = -(&d2 - &eye * (a * a));
    let b = &d4 - &d2 * (2.0 * a * a) + &eye * a.powi(4);
    let root = sqrt_spd(&s);
    let c = &root * b * &root;
    let c = (&c + c.transpose()) * 0.5;
    SymmetricEigen::new(c).eigenvalues.min() / (a * a)
}

/// Richardson-extrapolated marginal Rayleigh number.
pub fn marginal_rayleigh_extrapolated(a: f64) -> f64 {
    let coarse = marginal_rayleigh(a, 99);
    let fine = marginal_rayleigh(a, 199);
    (4.0 * fine - coarse) / 3.0
}

/// Minimum of the marginal curve by golden-section search: `(a_c, Ra_c)`.
pub fn critical_rayleigh_oracle() -> (f64, f64) {
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut lo, mut hi) = (2.6, 3.6);
    let f = marginal_rayleigh_extrapolated;
    let mut x1 = hi - phi * (hi - lo);
    let mut x2 = lo + phi * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > 1e-4 {
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - phi * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + phi * (hi - lo);
            f2 = f(x2);
        }
    }
    let a = 0.5 * (lo + hi);
    (a, f(a))
}
