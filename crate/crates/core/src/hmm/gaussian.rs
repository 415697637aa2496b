use crate::error::{Error, Result};
use crate::linalg::{forward_substitute, SymMatrix};
use crate::scalar::Scalar;

/// Multivariate normal with its Cholesky factor cached for repeated evaluation.
#[derive(Debug, Clone)]
pub struct Gaussian<T> {
    mean: Vec<T>,
    cov: SymMatrix<T>,
    chol: Vec<T>,
    log_norm: T,
}

impl<T: Scalar> Gaussian<T> {
    pub fn new(mean: Vec<T>, cov: SymMatrix<T>) -> Result<Self> {
        if mean.len() != cov.dim() {
            return Err(Error::DimensionMismatch {
                expected: cov.dim(),
                found: mean.len(),
            });
        }
        let chol = cov.cholesky().ok_or(Error::DegenerateCovariance)?;
        let d = cov.dim();
        let log_det_half: T = (0..d).map(|i| chol[i * d + i].ln()).sum();
        let log_norm = T::lit(0.5) * T::from_usize_lossy(d) * (T::lit(2.0) * T::PI()).ln() + log_det_half;
        Ok(Self {
            mean,
            cov,
            chol,
            log_norm,
        })
    }

    pub fn mean(&self) -> &[T] {
        &self.mean
    }

    pub fn cov(&self) -> &SymMatrix<T> {
        &self.cov
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Log density at `x`, evaluated around an arbitrary centre (used by
    /// autoregressive emissions whose mean depends on the previous step).
    pub(crate) fn log_pdf_centered(&self, x: &[T], centre: &[T]) -> T {
        let d = self.dim();
        let mut z = [T::zero(); 2];
        for i in 0..d {
            z[i] = x[i] - centre[i];
        }
        forward_substitute(&self.chol, d, &mut z[..d]);
        let q: T = z[..d].iter().map(|&v| v * v).sum();
        -T::lit(0.5) * q - self.log_norm
    }

    pub fn log_pdf(&self, x: &[T]) -> T {
        self.log_pdf_centered(x, &self.mean)
    }
}

/// Log density of N(mean, cov) at `x`; errors when `cov` is not symmetric
/// positive definite.
pub fn gaussian_logpdf<T: Scalar>(x: &[T], mean: &[T], cov: &SymMatrix<T>) -> Result<T> {
    if x.len() != mean.len() {
        return Err(Error::DimensionMismatch {
            expected: mean.len(),
            found: x.len(),
        });
    }
    Ok(Gaussian::new(mean.to_vec(), cov.clone())?.log_pdf(x))
}
