use super::{BackboneError, Result};

/// Bias-corrected Adam over a flat parameter vector.
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    pub fn new(n_params: usize, lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(BackboneError::ShapeMismatch(format!(
                "adam state has {} slots, got {} params and {} grads",
                self.m.len(),
                params.len(),
                grads.len()
            )));
        }
        if grads.iter().any(|g| !g.is_finite()) {
            return Err(BackboneError::NonFiniteGradient);
        }
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for (((p, g), m), v) in params.iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_lr() {
        let mut adam = Adam::new(1, 0.001);
        let mut p = [0.0];
        adam.step(&mut p, &[1.0]).unwrap();
        assert!((p[0] + 0.001).abs() < 1e-10, "{}", p[0]);
    }

    #[test]
    fn zero_gradient_is_a_no_op() {
        let mut adam = Adam::new(3, 0.001);
        let mut p = [0.5, -1.0, 2.0];
        adam.step(&mut p, &[0.0; 3]).unwrap();
        assert_eq!(p, [0.5, -1.0, 2.0]);
    }

    #[test]
    fn alternating_steps_are_bounded() {
        let mut adam = Adam::new(1, 0.001);
        let mut p = [0.0];
        adam.step(&mut p, &[1.0]).unwrap();
        adam.step(&mut p, &[-1.0]).unwrap();
        assert!(p[0].abs() < 0.002);
        // second step reverses direction by m_hat/sqrt(v_hat) = -0.01/0.19
        assert!((p[0] - (-0.001 + 0.001 * 0.01 / 0.19)).abs() < 1e-9);
    }

    #[test]
    fn rejects_non_finite() {
        let mut adam = Adam::new(2, 0.1);
        let mut p = [0.0, 0.0];
        assert!(matches!(adam.step(&mut p, &[1.0, f64::NAN]), Err(BackboneError::NonFiniteGradient)));
        assert_eq!(p, [0.0, 0.0]);
        assert_eq!(adam.steps(), 0);
    }

    #[test]
    fn shape_mismatch() {
        let mut adam = Adam::new(2, 0.1);
        assert!(adam.step(&mut [0.0], &[1.0]).is_err());
    }
}
