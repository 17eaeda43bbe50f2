//! Residual bottleneck applied to the concatenated field embeddings:
//! `e' = e + e·W_down·W_up`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ndcore::{glorot, Matrix, SeededRng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionBottleneck {
    /// `D × D/r`
    pub w_down: Matrix,
    /// `D/r × D`
    pub w_up: Matrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusionCache {
    input: Matrix,
    hidden: Matrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusionGrads {
    pub w_down: Matrix,
    pub w_up: Matrix,
}

impl FusionBottleneck {
    pub fn new(w_down: Matrix, w_up: Matrix) -> Result<Self> {
        if w_down.cols() != w_up.rows() || w_up.cols() != w_down.rows() {
            return Err(Error::shape(
                "FusionBottleneck",
                format!("{0}xh and hx{0}", w_down.rows()),
                format!("{}x{} and {}x{}", w_down.rows(), w_down.cols(), w_up.rows(), w_up.cols()),
            ));
        }
        if w_down.cols() == 0 {
            return Err(Error::InvalidArgument("bottleneck width must be >= 1".into()));
        }
        Ok(Self { w_down, w_up })
    }

    /// Glorot-initialised bottleneck of width `max(1, dim / reduction)`.
    pub fn glorot(dim: usize, reduction: usize, rng: &mut SeededRng) -> Result<Self> {
        if reduction == 0 {
            return Err(Error::InvalidArgument("reduction ratio must be >= 1".into()));
        }
        if dim == 0 {
            return Err(Error::InvalidArgument("fusion input dim must be >= 1".into()));
        }
        let h = (dim / reduction).max(1);
        let w_down = glorot(dim, h, rng);
        let w_up = glorot(h, dim, rng);
        Self::new(w_down, w_up)
    }

    pub fn dim(&self) -> usize {
        self.w_down.rows()
    }

    pub fn width(&self) -> usize {
        self.w_down.cols()
    }

    pub fn forward(&self, e: &Matrix) -> Result<(Matrix, FusionCache)> {
        if e.cols() != self.dim() {
            return Err(Error::shape("fusion_forward", self.dim(), e.cols()));
        }
        let hidden = e.matmul(&self.w_down)?;
        let mut out = hidden.matmul(&self.w_up)?;
        out.add_assign(e)?;
        Ok((
            out,
            FusionCache {
                input: e.clone(),
                hidden,
            },
        ))
    }

    /// Gradient with respect to the input and both projections.
    pub fn backward(&self, cache: &FusionCache, grad: &Matrix) -> Result<(Matrix, FusionGrads)> {
        cache.input.check_same_shape("fusion_backward", grad)?;
        let w_up = cache.hidden.t_matmul(grad)?;
        let g_hidden = grad.matmul_t(&self.w_up)?;
        let w_down = cache.input.t_matmul(&g_hidden)?;
        let mut g_input = g_hidden.matmul_t(&self.w_down)?;
        g_input.add_assign(grad)?;
        Ok((g_input, FusionGrads { w_down, w_up }))
    }

    pub fn params_mut(&mut self) -> [&mut [f64]; 2] {
        [self.w_down.data_mut(), self.w_up.data_mut()]
    }
}

impl FusionGrads {
    pub fn slices(&self) -> [&[f64]; 2] {
        [self.w_down.data(), self.w_up.data()]
    }
}

/// Single-vector form of [`FusionBottleneck::forward`].
pub fn fusion_forward(e: &[f64], fb: &FusionBottleneck) -> Result<Vec<f64>> {
    let row = Matrix::from_vec(1, e.len(), e.to_vec())?;
    Ok(fb.forward(&row)?.0.into_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ndcore::{finite_diff_check, seeded};
    use rand::Rng;

    #[test]
    fn zero_up_projection_is_identity() {
        let mut rng = seeded(1);
        let mut fb = FusionBottleneck::glorot(12, 4, &mut rng).unwrap();
        fb.w_up = Matrix::zeros(3, 12);
        let e: Vec<f64> = (0..12).map(|_| rng.random_range(-2.0..2.0)).collect();
        assert_eq!(fusion_forward(&e, &fb).unwrap(), e);
    }

    #[test]
    fn hand_case() {
        let fb = FusionBottleneck::new(
            Matrix::from_rows(&[vec![1.0], vec![0.0]]).unwrap(),
            Matrix::from_rows(&[vec![1.0, 1.0]]).unwrap(),
        )
        .unwrap();
        assert_eq!(fusion_forward(&[3.0, -5.0], &fb).unwrap(), vec![6.0, -2.0]);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = seeded(7);
        let fb = FusionBottleneck::glorot(8, 2, &mut rng).unwrap();
        let e = Matrix::from_fn(5, 8, |_, _| rng.random_range(-1.0..1.0));
        let probe = Matrix::from_fn(5, 8, |_, _| rng.random_range(-1.0..1.0));
        let loss = |fb: &FusionBottleneck, e: &Matrix| {
            let out = fb.forward(e).unwrap().0;
            out.data().iter().zip(probe.data()).map(|(a, b)| a * b).sum::<f64>()
        };
        let (_, cache) = fb.forward(&e).unwrap();
        let (g_e, g) = fb.backward(&cache, &probe).unwrap();

        let err = finite_diff_check(
            |p| loss(&fb, &Matrix::from_vec(5, 8, p.to_vec()).unwrap()),
            e.data(),
            g_e.data(),
            1e-6,
        );
        assert!(err < 1e-6, "input {err}");
        let err = finite_diff_check(
            |p| {
                let mut f = fb.clone();
                f.w_down.data_mut().copy_from_slice(p);
                loss(&f, &e)
            },
            fb.w_down.data(),
            g.w_down.data(),
            1e-6,
        );
        assert!(err < 1e-6, "w_down {err}");
        let err = finite_diff_check(
            |p| {
                let mut f = fb.clone();
                f.w_up.data_mut().copy_from_slice(p);
                loss(&f, &e)
            },
            fb.w_up.data(),
            g.w_up.data(),
            1e-6,
        );
        assert!(err < 1e-6, "w_up {err}");
    }

    #[test]
    fn shape_errors() {
        let mut rng = seeded(2);
        let fb = FusionBottleneck::glorot(6, 3, &mut rng).unwrap();
        assert!(fusion_forward(&[1.0; 5], &fb).is_err());
        assert!(FusionBottleneck::new(Matrix::zeros(4, 2), Matrix::zeros(2, 3)).is_err());
        assert!(FusionBottleneck::glorot(6, 0, &mut rng).is_err());
    }
}
