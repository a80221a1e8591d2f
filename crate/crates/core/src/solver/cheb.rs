//! Chebyshev-Gauss-Lobatto machinery for the wall-normal direction.
//!
//! Nodes are mapped to `y in [0, height]` with `y[0] = 0` (bottom wall) and
//! `y[n-1] = height` (top wall), both exact in floating point.

use std::f64::consts::PI;

/// Dense row-major square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Square {
    pub n: usize,
    pub data: Vec<f64>,
}

impl Square {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![0.0; n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut s = Self::zeros(n);
        for i in 0..n {
            s.data[i * n + i] = 1.0;
        }
        s
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn matmul(&self, other: &Square) -> Square {
        let n = self.n;
        let mut out = Square::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.at(i, k);
                if a == 0.0 {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] += a * other.at(k, j);
                }
            }
        }
        out
    }

    /// `out = self * x`.
    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.row(i).iter().zip(x).map(|(a, b)| a * b).sum();
        }
    }
}

/// Wall-normal grid with differentiation, quadrature and interpolation data.
#[derive(Debug, Clone)]
pub struct ChebGrid {
    pub height: f64,
    pub y: Vec<f64>,
    /// First derivative with respect to `y`.
    pub d1: Square,
    /// Second derivative with respect to `y`.
    pub d2: Square,
    /// Clenshaw-Curtis weights; they sum to `height`.
    pub weights: Vec<f64>,
}

impl ChebGrid {
    pub fn new(points: usize, height: f64) -> Self {
        assert!(points >= 3, "need at least three Chebyshev points");
        let n = points - 1;
        let y = nodes(points, height);

        // Trefethen's construction on xi = cos(pi m / n) (descending), with
        // trigonometric node differences and the negative-sum diagonal.
        let c = |i: usize| -> f64 {
            let base = if i == 0 || i == n { 2.0 } else { 1.0 };
            if i % 2 == 0 {
                base
            } else {
                -base
            }
        };
        let mut dxi = Square::zeros(points);
        for i in 0..points {
            let mut row_sum = 0.0;
            for j in 0..points {
                if i == j {
                    continue;
                }
                let diff = 2.0
                    * (PI * (i + j) as f64 / (2 * n) as f64).sin()
                    * (PI * (j as f64 - i as f64) / (2 * n) as f64).sin();
                let v = c(i) / c(j) / diff;
                dxi.data[i * points + j] = v;
                row_sum += v;
            }
            dxi.data[i * points + i] = -row_sum;
        }
        // y = height (1 - xi) / 2  =>  d/dy = -(2 / height) d/dxi
        let scale = -2.0 / height;
        let d1 = Square { n: points, data: dxi.data.iter().map(|v| v * scale).collect() };
        let d2 = d1.matmul(&d1);
        let weights = clenshaw_curtis(n).into_iter().map(|w| w * height / 2.0).collect();
        Self { height, y, d1, d2, weights }
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    /// Row of barycentric interpolation weights evaluating the nodal
    /// polynomial interpolant at `at`.
    pub fn interpolation_row(&self, at: f64) -> Vec<f64> {
        let points = self.y.len();
        let n = points - 1;
        if let Some(hit) = self.y.iter().position(|&yj| yj == at) {
            let mut row = vec![0.0; points];
            row[hit] = 1.0;
            return row;
        }
        let bary = |j: usize| -> f64 {
            let base = if j == 0 || j == n { 0.5 } else { 1.0 };
            if j % 2 == 0 {
                base
            } else {
                -base
            }
        };
        let terms: Vec<f64> = (0..points).map(|j| bary(j) / (at - self.y[j])).collect();
        let total: f64 = terms.iter().sum();
        terms.into_iter().map(|t| t / total).collect()
    }
}

/// Gauss-Lobatto heights `height * (1 - cos(pi m / n)) / 2`, bottom first.
pub fn nodes(points: usize, height: f64) -> Vec<f64> {
    let n = points - 1;
    (0..points)
        .map(|m| {
            let s = (PI * m as f64 / (2 * n) as f64).sin();
            height * s * s
        })
        .collect()
}

/// Clenshaw-Curtis weights on `cos(pi m / n)`, `m = 0..=n`, for `[-1, 1]`.
fn clenshaw_curtis(n: usize) -> Vec<f64> {
    let mut w = vec![0.0; n + 1];
    let theta = |m: usize| PI * m as f64 / n as f64;
    let interior = 1..n;
    let mut v = vec![1.0; n - 1];
    if n % 2 == 0 {
        let last = 1.0 / (n * n - 1) as f64;
        w[0] = last;
        w[n] = last;
        for k in 1..n / 2 {
            for (idx, m) in interior.clone().enumerate() {
                v[idx] -= 2.0 * (2.0 * k as f64 * theta(m)).cos() / (4 * k * k - 1) as f64;
            }
        }
        for (idx, m) in interior.clone().enumerate() {
            v[idx] -= (n as f64 * theta(m)).cos() / (n * n - 1) as f64;
        }
    } else {
        let last = 1.0 / (n * n) as f64;
        w[0] = last;
        w[n] = last;
        for k in 1..=(n - 1) / 2 {
            for (idx, m) in interior.clone().enumerate() {
                v[idx] -= 2.0 * (2.0 * k as f64 * theta(m)).cos() / (4 * k * k - 1) as f64;
            }
        }
    }
    for (idx, m) in interior.enumerate() {
        w[m] = 2.0 * v[idx] / n as f64;
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nodes_hit_walls_exactly() {
        let g = ChebGrid::new(33, 1.0);
        assert_eq!(g.y[0], 0.0);
        assert_eq!(g.y[32], 1.0);
        assert!(g.y.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn derivative_of_polynomials_is_exact() {
        let g = ChebGrid::new(17, 1.0);
        let f: Vec<f64> = g.y.iter().map(|y| y.powi(5) - 2.0 * y * y).collect();
        let mut d = vec![0.0; 17];
        g.d1.apply(&f, &mut d);
        for (y, dv) in g.y.iter().zip(&d) {
            assert!((dv - (5.0 * y.powi(4) - 4.0 * y)).abs() < 1e-11);
        }
        g.d2.apply(&f, &mut d);
        for (y, dv) in g.y.iter().zip(&d) {
            assert!((dv - (20.0 * y.powi(3) - 4.0)).abs() < 1e-9);
        }
    }

    #[test]
    fn quadrature_integrates_polynomials() {
        for pts in [17, 24, 33] {
            let g = ChebGrid::new(pts, 2.0);
            let total: f64 = g.weights.iter().sum();
            assert!((total - 2.0).abs() < 1e-13);
            let cubic: f64 = g.weights.iter().zip(&g.y).map(|(w, y)| w * y.powi(3)).sum();
            assert!((cubic - 4.0).abs() < 1e-12);
        }
    }

    #[test]
    fn interpolation_reproduces_polynomials() {
        let g = ChebGrid::new(17, 1.0);
        let f: Vec<f64> = g.y.iter().map(|y| (3.0 * y).sin()).collect();
        for at in [0.013, 0.5, 0.77] {
            let row = g.interpolation_row(at);
            let v: f64 = row.iter().zip(&f).map(|(a, b)| a * b).sum();
            assert!((v - (3.0 * at).sin()).abs() < 1e-12);
        }
    }
}
