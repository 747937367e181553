use crate::error::{Error, Result};

/// `log Σ exp(x)`, stabilized by max subtraction.
pub fn logsumexp(x: &[f64]) -> f64 {
    let m = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + x.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let lz = logsumexp(logits);
    logits.iter().map(|v| (v - lz).exp()).collect()
}

/// Returns `(−log p[label], p)`.
pub fn softmax_cross_entropy(logits: &[f64], label: usize) -> Result<(f64, Vec<f64>)> {
    if label >= logits.len() {
        return Err(Error::invalid(format!(
            "label {label} outside {} classes",
            logits.len()
        )));
    }
    if logits.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite logit"));
    }
    let lz = logsumexp(logits);
    let probs = logits.iter().map(|v| (v - lz).exp()).collect();
    Ok((lz - logits[label], probs))
}

/// Gradient of cross-entropy with respect to logits: `p − onehot(label)`.
pub fn cross_entropy_grad(probs: &[f64], label: usize) -> Vec<f64> {
    let mut g = probs.to_vec();
    g[label] -= 1.0;
    g
}

/// Pairwise logistic loss `log(1 + exp(−(s_pos − s_neg)))` and its derivative
/// with respect to `s_pos` (the derivative w.r.t. `s_neg` is the negation).
pub fn pairwise_logistic(s_pos: f64, s_neg: f64) -> (f64, f64) {
    let margin = s_pos - s_neg;
    let loss = if margin > 0.0 {
        (-margin).exp().ln_1p()
    } else {
        -margin + margin.exp().ln_1p()
    };
    let d_pos = -crate::nn::layers::sigmoid(-margin);
    (loss, d_pos)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_logits() {
        let (loss, p) = softmax_cross_entropy(&[0.7; 4], 2).unwrap();
        assert!((loss - 4f64.ln()).abs() < 1e-12);
        assert!(p.iter().all(|&x| (x - 0.25).abs() < 1e-12));
    }

    #[test]
    fn large_logits_do_not_overflow() {
        let (loss, p) = softmax_cross_entropy(&[1000.0, 0.0], 0).unwrap();
        assert!(loss.abs() < 1e-12);
        assert!((p[0] - 1.0).abs() < 1e-12 && p[1] < 1e-300);
    }

    #[test]
    fn small_example_matches_direct_arithmetic() {
        let (loss, _) = softmax_cross_entropy(&[1.0, 2.0, 3.0], 2).unwrap();
        let expected = (1f64.exp() + 2f64.exp() + 3f64.exp()).ln() - 3.0;
        assert!((loss - expected).abs() < 1e-12);
    }

    #[test]
    fn label_out_of_range_is_rejected() {
        assert!(softmax_cross_entropy(&[0.0, 1.0], 2).is_err());
    }

    #[test]
    fn pairwise_logistic_is_stable() {
        let (l, d) = pairwise_logistic(800.0, 0.0);
        assert!(l.abs() < 1e-12 && d.abs() < 1e-12);
        let (l, d) = pairwise_logistic(0.0, 800.0);
        assert!((l - 800.0).abs() < 1e-9 && (d + 1.0).abs() < 1e-12);
        let (l, d) = pairwise_logistic(1.0, 1.0);
        assert!((l - 2f64.ln()).abs() < 1e-12 && (d + 0.5).abs() < 1e-12);
    }
}
