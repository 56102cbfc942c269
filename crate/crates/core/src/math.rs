//! Scalar helpers shared by the losses.

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)` without overflow.
#[inline]
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// `-ln σ(x)`.
#[inline]
pub fn neg_log_sigmoid(x: f64) -> f64 {
    softplus(-x)
}

/// Numerically stable softmax.
pub fn softmax(xs: &[f64]) -> Vec<f64> {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = xs.iter().map(|x| (x - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_forms() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!((neg_log_sigmoid(0.0) - std::f64::consts::LN_2).abs() < 1e-15);
        assert!((softplus(-2.0) - (1.0 + (-2f64).exp()).ln()).abs() < 1e-15);
        assert!((softplus(800.0) - 800.0).abs() < 1e-12);
        assert!(softplus(-800.0) >= 0.0);
        assert!((sigmoid(-30.0) - 1.0 / (1.0 + 30f64.exp())).abs() < 1e-20);
    }

    #[test]
    fn softmax_two_point() {
        let w = softmax(&[1.0, -1.0]);
        assert!((w[0] - 0.880_797_077_977_882_3).abs() < 1e-12);
        assert!((w[0] + w[1] - 1.0).abs() < 1e-15);
        assert_eq!(softmax(&[3.0, 3.0]), vec![0.5, 0.5]);
    }
}
