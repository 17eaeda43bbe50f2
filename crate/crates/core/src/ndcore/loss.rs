//! Losses. Reduction: sum over feature dims, mean over batch rows.

use super::layer::sigmoid;
use super::matrix::Matrix;
use crate::error::{Error, Result};

/// Mean over rows of the squared L2 distance between `pred` and `target`;
/// returns the loss and its gradient with respect to `pred`.
pub fn mse_loss(pred: &Matrix, target: &Matrix) -> Result<(f64, Matrix)> {
    pred.check_same_shape("mse_loss", target)?;
    let n = pred.rows().max(1) as f64;
    let mut grad = pred.sub(target)?;
    let loss = grad.frobenius_sq() / n;
    grad.scale(2.0 / n);
    Ok((loss, grad))
}

/// Binary cross-entropy on logits, averaged over the batch.
///
/// Uses `max(x,0) − x·y + ln(1 + e^{−|x|})`, which never overflows.
pub fn bce_loss(logits: &[f64], labels: &[f64]) -> Result<(f64, Vec<f64>)> {
    if logits.len() != labels.len() {
        return Err(Error::shape("bce_loss", logits.len(), labels.len()));
    }
    if let Some(bad) = labels.iter().find(|&&y| y != 0.0 && y != 1.0) {
        return Err(Error::InvalidArgument(format!("label {bad} is not binary")));
    }
    let n = logits.len().max(1) as f64;
    let mut loss = 0.0;
    let mut grad = Vec::with_capacity(logits.len());
    for (&x, &y) in logits.iter().zip(labels) {
        loss += x.max(0.0) - x * y + (-x.abs()).exp().ln_1p();
        grad.push((sigmoid(x) - y) / n);
    }
    Ok((loss / n, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ndcore::gradcheck::finite_diff_check;
    use crate::ndcore::rng::seeded;
    use rand::Rng;

    #[test]
    fn mse_zero_on_equal() {
        let a = Matrix::from_fn(3, 4, |i, j| (i + j) as f64);
        assert_eq!(mse_loss(&a, &a).unwrap().0, 0.0);
    }

    #[test]
    fn mse_unit_offset_equals_dim() {
        let a = Matrix::zeros(5, 7);
        let b = Matrix::from_fn(5, 7, |_, _| 1.0);
        assert!((mse_loss(&b, &a).unwrap().0 - 7.0).abs() < 1e-12);
    }

    #[test]
    fn mse_grad_matches_finite_differences() {
        let mut rng = seeded(3);
        let p = Matrix::from_fn(4, 3, |_, _| rng.random_range(-1.0..1.0));
        let t = Matrix::from_fn(4, 3, |_, _| rng.random_range(-1.0..1.0));
        let (_, g) = mse_loss(&p, &t).unwrap();
        let err = finite_diff_check(
            |x| mse_loss(&Matrix::from_vec(4, 3, x.to_vec()).unwrap(), &t).unwrap().0,
            p.data(),
            g.data(),
            1e-5,
        );
        assert!(err < 1e-6, "{err}");
    }

    #[test]
    fn mse_shape_mismatch() {
        assert!(mse_loss(&Matrix::zeros(2, 2), &Matrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn bce_analytic_cases() {
        let (l, _) = bce_loss(&[0.0], &[1.0]).unwrap();
        assert!((l - std::f64::consts::LN_2).abs() < 1e-15);
        let (l, g) = bce_loss(&[30.0], &[1.0]).unwrap();
        assert!(l >= 0.0 && l < 1e-12 && l.is_finite());
        assert!(g[0].abs() < 1e-12);
        let (l, _) = bce_loss(&[-800.0], &[1.0]).unwrap();
        assert!((l - 800.0).abs() < 1e-9);
    }

    #[test]
    fn bce_rejects_non_binary() {
        assert!(matches!(bce_loss(&[0.0], &[0.5]), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn bce_grad_matches_finite_differences() {
        let mut rng = seeded(4);
        let x: Vec<f64> = (0..16).map(|_| rng.random_range(-4.0..4.0)).collect();
        let y: Vec<f64> = (0..16).map(|_| f64::from(rng.random_bool(0.5) as u8)).collect();
        let (_, g) = bce_loss(&x, &y).unwrap();
        let err = finite_diff_check(|p| bce_loss(p, &y).unwrap().0, &x, &g, 1e-5);
        assert!(err < 1e-6, "{err}");
    }
}
