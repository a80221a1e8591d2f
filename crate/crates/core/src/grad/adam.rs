use super::{GradError, Tensor};

/// Adam with bias correction.
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl Adam {
    /// Moment buffers sized for `params`.
    pub fn new(params: &[Tensor], lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            first: params.iter().map(|p| vec![0.0; p.len()]).collect(),
            second: params.iter().map(|p| vec![0.0; p.len()]).collect(),
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    pub fn step(&mut self, params: &mut [Tensor], grads: &[Tensor]) -> Result<(), GradError> {
        if params.len() != self.first.len() || grads.len() != params.len() {
            return Err(GradError::Usage(format!(
                "adam state holds {} tensors, got {} params and {} grads",
                self.first.len(),
                params.len(),
                grads.len()
            )));
        }
        for ((p, g), m) in params.iter().zip(grads).zip(&self.first) {
            if p.len() != g.len() || p.len() != m.len() {
                return Err(GradError::Dimension(format!(
                    "adam: param {:?} with grad {:?}",
                    p.shape(),
                    g.shape()
                )));
            }
        }
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for (i, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            let (m, v) = (&mut self.first[i], &mut self.second[i]);
            for (j, (w, &gj)) in p.data_mut().iter_mut().zip(g.data()).enumerate() {
                m[j] = self.beta1 * m[j] + (1.0 - self.beta1) * gj;
                v[j] = self.beta2 * v[j] + (1.0 - self.beta2) * gj * gj;
                let m_hat = m[j] / c1;
                let v_hat = v[j] / c2;
                *w -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_parameters_unchanged() {
        let mut params = vec![Tensor::new(&[3], vec![1.0, -2.0, 0.5]).unwrap()];
        let before = params.clone();
        let mut opt = Adam::new(&params, 0.1);
        opt.step(&mut params, &[Tensor::zeros(&[3])]).unwrap();
        assert_eq!(params, before);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        // m_hat = g, v_hat = g^2, so the step is lr * g / (|g| + eps).
        let mut params = vec![Tensor::scalar(0.0)];
        let mut opt = Adam::new(&params, 0.1);
        opt.step(&mut params, &[Tensor::scalar(1.0)]).unwrap();
        let expected = -0.1 / (1.0 + 1e-8);
        assert!((params[0].item() - expected).abs() < 1e-15);
    }

    #[test]
    fn constant_gradient_descends_monotonically() {
        let mut params = vec![Tensor::scalar(0.0)];
        let mut opt = Adam::new(&params, 0.1);
        let g = [Tensor::scalar(2.5)];
        opt.step(&mut params, &g).unwrap();
        let first = params[0].item();
        opt.step(&mut params, &g).unwrap();
        assert!(first < 0.0 && params[0].item() < first);
    }

    #[test]
    fn length_mismatch_is_a_usage_error() {
        let mut params = vec![Tensor::scalar(0.0)];
        let mut opt = Adam::new(&params, 0.1);
        let err = opt.step(&mut params, &[]).unwrap_err();
        assert!(matches!(err, GradError::Usage(_)));
    }
}
