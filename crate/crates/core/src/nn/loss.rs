use crate::error::{Error, Result};

use super::{Real, Tensor};

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Masked binary cross-entropy on logits.
///
/// Returns the mean loss over entries with `mask == 1` and its gradient with
/// respect to the logits. Masked entries get exactly zero gradient.
pub fn logistic_loss<T: Real>(logits: &Tensor<T>, labels: &Tensor<T>, mask: &Tensor<T>) -> Result<(f64, Tensor<T>)> {
    if logits.shape() != labels.shape() || logits.shape() != mask.shape() {
        return Err(Error::Shape(format!(
            "logits {:?}, labels {:?} and mask {:?} must match",
            logits.shape(),
            labels.shape(),
            mask.shape()
        )));
    }
    let count = mask.data().iter().filter(|&&m| m != T::zero()).count();
    if count == 0 {
        return Err(Error::InsufficientData("every entry of the batch is masked".into()));
    }
    let inv = 1.0 / count as f64;
    let mut loss = 0.0;
    let mut grad = Vec::with_capacity(logits.len());
    for ((&z, &y), &m) in logits.data().iter().zip(labels.data()).zip(mask.data()) {
        if m == T::zero() {
            grad.push(T::zero());
            continue;
        }
        let (z, y) = (z.as_f64(), y.as_f64());
        loss += z.max(0.0) - z * y + (-z.abs()).exp().ln_1p();
        grad.push(T::of((sigmoid(z) - y) * inv));
    }
    Ok((loss * inv, Tensor::new(logits.shape().to_vec(), grad)?))
}

/// Mean squared error and its gradient.
pub fn mse_loss<T: Real>(pred: &Tensor<T>, target: &Tensor<T>) -> Result<(f64, Tensor<T>)> {
    if pred.shape() != target.shape() || pred.is_empty() {
        return Err(Error::Shape(format!(
            "prediction {:?} and target {:?} must match and be non-empty",
            pred.shape(),
            target.shape()
        )));
    }
    let inv = 1.0 / pred.len() as f64;
    let mut loss = 0.0;
    let grad = pred
        .data()
        .iter()
        .zip(target.data())
        .map(|(&p, &t)| {
            let d = p.as_f64() - t.as_f64();
            loss += d * d;
            T::of(2.0 * d * inv)
        })
        .collect();
    Ok((loss * inv, Tensor::new(pred.shape().to_vec(), grad)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(v: &[f64]) -> Tensor<f64> {
        Tensor::from_f64(vec![1, v.len()], v).unwrap()
    }

    #[test]
    fn zero_logit_costs_ln2() {
        let (l, g) = logistic_loss(&t(&[0.0]), &t(&[1.0]), &t(&[1.0])).unwrap();
        assert!((l - std::f64::consts::LN_2).abs() < 1e-12);
        assert!((g.data()[0] + 0.5).abs() < 1e-12);
    }

    #[test]
    fn confident_correct_logit_costs_nothing() {
        let (l, _) = logistic_loss(&t(&[60.0]), &t(&[1.0]), &t(&[1.0])).unwrap();
        assert!(l < 1e-20);
        let (l, _) = logistic_loss(&t(&[-800.0]), &t(&[0.0]), &t(&[1.0])).unwrap();
        assert!(l.is_finite() && l < 1e-20);
    }

    #[test]
    fn masking_selects_single_entry() {
        let logits = t(&[1.5, -2.0, 0.3]);
        let labels = t(&[0.0, 1.0, 1.0]);
        let (l, g) = logistic_loss(&logits, &labels, &t(&[0.0, 1.0, 0.0])).unwrap();
        let (single, _) = logistic_loss(&t(&[-2.0]), &t(&[1.0]), &t(&[1.0])).unwrap();
        assert!((l - single).abs() < 1e-12);
        assert_eq!(g.data()[0], 0.0);
        assert_eq!(g.data()[2], 0.0);
        // Flipping a masked label changes nothing.
        let (l2, g2) = logistic_loss(&logits, &t(&[1.0, 1.0, 0.0]), &t(&[0.0, 1.0, 0.0])).unwrap();
        assert_eq!((l, g), (l2, g2));
    }

    #[test]
    fn all_masked_and_shape_errors() {
        assert!(logistic_loss(&t(&[1.0]), &t(&[1.0]), &t(&[0.0])).is_err());
        assert!(logistic_loss(&t(&[1.0, 2.0]), &t(&[1.0]), &t(&[1.0])).is_err());
    }

    #[test]
    fn logistic_gradient_matches_differences() {
        let labels = t(&[1.0, 0.0, 1.0]);
        let mask = t(&[1.0, 1.0, 1.0]);
        let z = [0.7, -1.3, 2.2];
        let (_, g) = logistic_loss(&t(&z), &labels, &mask).unwrap();
        for i in 0..3 {
            let h = 1e-6;
            let mut zp = z;
            let mut zm = z;
            zp[i] += h;
            zm[i] -= h;
            let lp = logistic_loss(&t(&zp), &labels, &mask).unwrap().0;
            let lm = logistic_loss(&t(&zm), &labels, &mask).unwrap().0;
            assert!(((lp - lm) / (2.0 * h) - g.data()[i]).abs() < 1e-8);
        }
    }

    #[test]
    fn mse_basics() {
        let (l, g) = mse_loss(&t(&[1.0, 3.0]), &t(&[0.0, 3.0])).unwrap();
        assert_eq!(l, 0.5);
        assert_eq!(g.data(), &[1.0, 0.0]);
    }
}
