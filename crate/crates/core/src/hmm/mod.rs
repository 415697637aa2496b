//! Gaussian-emission hidden Markov models (dependent mixtures of K
//! multivariate Gaussians): log-space inference, Baum–Welch estimation and
//! Viterbi decoding.

mod em;
mod gaussian;
mod inference;

pub use em::{em_fit, initialize, EmConfig, FitFailure, FittedModel, RestartDiagnostics};
pub(crate) use em::{baum_welch, EmissionModel, RunOutcome};
pub use gaussian::{gaussian_logpdf, Gaussian};
pub use inference::{forward_backward, posterior_decode, viterbi, viterbi_with_score, Posteriors};
pub(crate) use inference::{forward_backward_log, viterbi_log};

use crate::error::{Error, Result};
use crate::linalg::SymMatrix;
use crate::scalar::Scalar;

fn stochastic_tolerance<T: Scalar>(n: usize) -> T {
    T::lit(1e-10).max(T::epsilon() * T::from_usize_lossy(8 * n.max(1)))
}

/// Initial distribution and transition matrix over K hidden states.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovChain<T> {
    initial: Vec<T>,
    /// Row-major K×K; row i is p(s_{t+1} = · | s_t = i).
    transition: Vec<T>,
}

impl<T: Scalar> MarkovChain<T> {
    pub fn new(initial: Vec<T>, transition: Vec<T>) -> Result<Self> {
        let k = initial.len();
        if k == 0 || transition.len() != k * k {
            return Err(Error::InvalidParams(format!(
                "{k} states need a {k}x{k} transition matrix, got {} entries",
                transition.len()
            )));
        }
        let tol = stochastic_tolerance::<T>(k);
        let check = |row: &[T], what: &str| -> Result<()> {
            if row.iter().any(|&p| !(p >= T::zero()) || !p.is_finite()) {
                return Err(Error::InvalidParams(format!("{what} has a negative or non-finite entry")));
            }
            let s: T = row.iter().copied().sum();
            if (s - T::one()).abs() > tol {
                return Err(Error::InvalidParams(format!("{what} sums to {s}, not 1")));
            }
            Ok(())
        };
        check(&initial, "initial distribution")?;
        for i in 0..k {
            check(&transition[i * k..(i + 1) * k], &format!("transition row {i}"))?;
        }
        Ok(Self { initial, transition })
    }

    /// Uniform initial distribution; `stay` on the diagonal and the rest spread evenly.
    pub fn sticky(k: usize, stay: T) -> Self {
        let uniform = T::one() / T::from_usize_lossy(k);
        let off = if k > 1 {
            (T::one() - stay) / T::from_usize_lossy(k - 1)
        } else {
            T::zero()
        };
        let mut transition = vec![off; k * k];
        for i in 0..k {
            transition[i * k + i] = if k > 1 { stay } else { T::one() };
        }
        Self {
            initial: vec![uniform; k],
            transition,
        }
    }

    pub fn k(&self) -> usize {
        self.initial.len()
    }

    pub fn initial(&self) -> &[T] {
        &self.initial
    }

    pub fn transition(&self) -> &[T] {
        &self.transition
    }

    pub fn p(&self, i: usize, j: usize) -> T {
        self.transition[i * self.k() + j]
    }

    pub fn row(&self, i: usize) -> &[T] {
        let k = self.k();
        &self.transition[i * k..(i + 1) * k]
    }

    /// Re-estimates from expected counts: the mean of per-sequence initial
    /// posteriors and row-normalised expected transition counts. Rows with no
    /// expected visits keep their previous value.
    pub(crate) fn reestimate(&mut self, initial_sum: &[T], n_sequences: usize, xi_sum: &[T]) {
        let k = self.k();
        if n_sequences > 0 {
            let total: T = initial_sum.iter().copied().sum();
            if total > T::zero() {
                for (p, &s) in self.initial.iter_mut().zip(initial_sum) {
                    *p = s / total;
                }
            }
        }
        for i in 0..k {
            let row = &xi_sum[i * k..(i + 1) * k];
            let total: T = row.iter().copied().sum();
            if total > T::zero() {
                for j in 0..k {
                    self.transition[i * k + j] = row[j] / total;
                }
            }
        }
    }
}

/// Mean and covariance of one Gaussian component.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianComponent<T> {
    pub mean: Vec<T>,
    pub cov: SymMatrix<T>,
}

/// Parameters of a K-state Gaussian-emission HMM.
#[derive(Debug, Clone, PartialEq)]
pub struct HmmParams<T> {
    chain: MarkovChain<T>,
    components: Vec<GaussianComponent<T>>,
}

impl<T: Scalar> HmmParams<T> {
    pub fn new(chain: MarkovChain<T>, components: Vec<GaussianComponent<T>>) -> Result<Self> {
        if components.len() != chain.k() {
            return Err(Error::InvalidParams(format!(
                "{} components for {} states",
                components.len(),
                chain.k()
            )));
        }
        let d = components[0].mean.len();
        if !(1..=2).contains(&d) {
            return Err(Error::InvalidParams(format!("observation dimension {d} not in {{1, 2}}")));
        }
        for c in &components {
            if c.mean.len() != d || c.cov.dim() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: c.mean.len(),
                });
            }
            if c.cov.cholesky().is_none() {
                return Err(Error::DegenerateCovariance);
            }
        }
        Ok(Self { chain, components })
    }

    pub fn k(&self) -> usize {
        self.chain.k()
    }

    pub fn dim(&self) -> usize {
        self.components[0].mean.len()
    }

    pub fn chain(&self) -> &MarkovChain<T> {
        &self.chain
    }

    pub fn components(&self) -> &[GaussianComponent<T>] {
        &self.components
    }

    pub(crate) fn densities(&self) -> Vec<Gaussian<T>> {
        self.components
            .iter()
            .map(|c| Gaussian::new(c.mean.clone(), c.cov.clone()).expect("validated covariance"))
            .collect()
    }

    /// T×K matrix of log emission densities; rows of invalid steps are zero.
    pub fn log_emissions(&self, obs: &ObservationSequence<T>) -> Result<Vec<T>> {
        if obs.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: obs.dim(),
            });
        }
        Ok(gaussian_log_emissions(&self.densities(), obs))
    }
}

pub(crate) fn gaussian_log_emissions<T: Scalar>(dens: &[Gaussian<T>], obs: &ObservationSequence<T>) -> Vec<T> {
    let k = dens.len();
    let mut out = vec![T::zero(); obs.len() * k];
    for t in 0..obs.len() {
        if obs.is_valid(t) {
            let x = obs.get(t);
            for (j, g) in dens.iter().enumerate() {
                out[t * k + j] = g.log_pdf(x);
            }
        }
    }
    out
}

/// Observation vectors x_1..x_T of a fixed dimension, each with a validity flag.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSequence<T> {
    dim: usize,
    data: Vec<T>,
    valid: Vec<bool>,
}

impl<T: Scalar> ObservationSequence<T> {
    pub fn new(dim: usize, data: Vec<T>, valid: Vec<bool>) -> Result<Self> {
        if dim == 0 || data.len() != dim * valid.len() {
            return Err(Error::InvalidParams(format!(
                "{} values do not form {} vectors of dimension {dim}",
                data.len(),
                valid.len()
            )));
        }
        if valid.is_empty() {
            return Err(Error::InvalidParams("empty observation sequence".into()));
        }
        let valid = valid
            .iter()
            .enumerate()
            .map(|(t, &v)| v && data[t * dim..(t + 1) * dim].iter().all(|x| x.is_finite()))
            .collect();
        Ok(Self { dim, data, valid })
    }

    /// All-valid univariate sequence.
    pub fn univariate(values: Vec<T>) -> Result<Self> {
        let n = values.len();
        Self::new(1, values, vec![true; n])
    }

    pub fn len(&self) -> usize {
        self.valid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.valid.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, t: usize) -> &[T] {
        &self.data[t * self.dim..(t + 1) * self.dim]
    }

    pub fn is_valid(&self, t: usize) -> bool {
        self.valid[t]
    }

    pub fn validity(&self) -> &[bool] {
        &self.valid
    }

    pub fn n_valid(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }

    /// Multiplies every observation by `factor`.
    pub fn scaled(&self, factor: T) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|&x| x * factor).collect(),
            valid: self.valid.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DecodeMethod {
    /// Joint maximum-a-posteriori path.
    #[default]
    Viterbi,
    /// Per-step argmax of the smoothed posteriors (diagnostics only).
    PosteriorMode,
}

/// Decoded component index per step (`None` = unestimated).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateSequence {
    pub states: Vec<Option<usize>>,
    pub decoded_by: DecodeMethod,
}

impl StateSequence {
    pub fn unestimated(len: usize, decoded_by: DecodeMethod) -> Self {
        Self {
            states: vec![None; len],
            decoded_by,
        }
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chain_validation() {
        assert!(MarkovChain::new(vec![0.5, 0.5], vec![0.9, 0.1, 0.2, 0.8]).is_ok());
        assert!(MarkovChain::new(vec![0.5, 0.6], vec![0.9, 0.1, 0.2, 0.8]).is_err());
        assert!(MarkovChain::new(vec![0.5, 0.5], vec![0.9, 0.2, 0.2, 0.8]).is_err());
        assert!(MarkovChain::new(vec![1.5, -0.5], vec![1.0, 0.0, 0.0, 1.0]).is_err());
        assert!(MarkovChain::new(vec![1.0], vec![1.0, 0.0]).is_err());
        let s = MarkovChain::<f64>::sticky(3, 0.8);
        for (a, b) in s.row(1).iter().zip([0.1, 0.8, 0.1]) {
            assert!((a - b).abs() < 1e-15);
        }
        assert_eq!(MarkovChain::<f64>::sticky(1, 0.8).transition(), &[1.0]);
    }

    #[test]
    fn params_reject_bad_covariance() {
        let chain = MarkovChain::<f64>::sticky(1, 0.8);
        let bad = GaussianComponent {
            mean: vec![0.0, 0.0],
            cov: SymMatrix::from_row_major(2, vec![1.0, 1.0, 1.0, 1.0]).unwrap(),
        };
        assert!(matches!(HmmParams::new(chain, vec![bad]), Err(Error::DegenerateCovariance)));
    }

    #[test]
    fn observation_sequence_shapes() {
        assert!(ObservationSequence::<f64>::new(2, vec![1.0, 2.0, 3.0], vec![true, true]).is_err());
        assert!(ObservationSequence::<f64>::univariate(vec![]).is_err());
        let s = ObservationSequence::new(1, vec![1.0, f64::NAN], vec![true, true]).unwrap();
        assert_eq!(s.n_valid(), 1);
    }
}
