use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::{DecodeMethod, HmmParams, MarkovChain, ObservationSequence, StateSequence};

/// Smoothed state posteriors of one sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct Posteriors<T> {
    k: usize,
    /// T×K, γ_t(k) = p(s_t = k | x_{1:T}).
    pub gamma: Vec<T>,
    /// (T−1)×K×K pairwise posteriors ξ_t(i, j); empty when not requested.
    pub xi: Vec<T>,
    /// Σ_t ξ_t(i, j), K×K.
    pub xi_sum: Vec<T>,
    pub log_likelihood: T,
}

impl<T: Scalar> Posteriors<T> {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.gamma.len() / self.k
    }

    pub fn is_empty(&self) -> bool {
        self.gamma.is_empty()
    }

    pub fn gamma_row(&self, t: usize) -> &[T] {
        &self.gamma[t * self.k..(t + 1) * self.k]
    }

    pub fn xi_at(&self, t: usize, i: usize, j: usize) -> T {
        self.xi[(t * self.k + i) * self.k + j]
    }
}

/// Scaled emission likelihoods: b_t(k) = exp(log_b_t(k) − m_t) with the
/// per-step offsets m_t returned separately.
fn scaled_emissions<T: Scalar>(log_b: &[T], present: &[bool], k: usize) -> (Vec<T>, Vec<T>) {
    let n = present.len();
    let mut b = vec![T::one(); n * k];
    let mut offset = vec![T::zero(); n];
    for t in 0..n {
        if !present[t] {
            continue;
        }
        let row = &log_b[t * k..(t + 1) * k];
        let m = row.iter().copied().fold(T::neg_infinity(), T::max);
        offset[t] = m;
        for j in 0..k {
            b[t * k + j] = (row[j] - m).exp();
        }
    }
    (b, offset)
}

/// Forward–backward with per-step scaling on a precomputed T×K log-emission
/// matrix. Steps with `present[t] == false` contribute no emission term.
pub(crate) fn forward_backward_log<T: Scalar>(
    chain: &MarkovChain<T>,
    log_b: &[T],
    present: &[bool],
    store_xi: bool,
) -> Result<Posteriors<T>> {
    let k = chain.k();
    let n = present.len();
    if n == 0 || log_b.len() != n * k {
        return Err(Error::InvalidParams("emission matrix does not match sequence".into()));
    }
    if !present.iter().any(|&p| p) {
        return Err(Error::NoUsableObservations);
    }
    let (b, offset) = scaled_emissions(log_b, present, k);
    let p = chain.transition();

    let mut alpha = vec![T::zero(); n * k];
    let mut scale = vec![T::zero(); n];
    for j in 0..k {
        alpha[j] = chain.initial()[j] * b[j];
    }
    for t in 0..n {
        if t > 0 {
            for j in 0..k {
                let mut s = T::zero();
                for i in 0..k {
                    s = s + alpha[(t - 1) * k + i] * p[i * k + j];
                }
                alpha[t * k + j] = s * b[t * k + j];
            }
        }
        let c: T = alpha[t * k..(t + 1) * k].iter().copied().sum();
        if !(c > T::zero()) || !c.is_finite() {
            return Err(Error::ZeroLikelihood);
        }
        scale[t] = c;
        for a in &mut alpha[t * k..(t + 1) * k] {
            *a = *a / c;
        }
    }
    let log_likelihood: T = scale
        .iter()
        .zip(&offset)
        .map(|(&c, &m)| c.ln() + m)
        .sum();

    let mut beta = vec![T::one(); n * k];
    for t in (0..n - 1).rev() {
        for i in 0..k {
            let mut s = T::zero();
            for j in 0..k {
                s = s + p[i * k + j] * b[(t + 1) * k + j] * beta[(t + 1) * k + j];
            }
            beta[t * k + i] = s / scale[t + 1];
        }
    }

    let mut gamma = vec![T::zero(); n * k];
    for t in 0..n {
        let row = &mut gamma[t * k..(t + 1) * k];
        let mut total = T::zero();
        for j in 0..k {
            row[j] = alpha[t * k + j] * beta[t * k + j];
            total = total + row[j];
        }
        for g in row.iter_mut() {
            *g = *g / total;
        }
    }

    let mut xi_sum = vec![T::zero(); k * k];
    let mut xi = if store_xi {
        vec![T::zero(); n.saturating_sub(1) * k * k]
    } else {
        Vec::new()
    };
    let mut cell = vec![T::zero(); k * k];
    for t in 0..n.saturating_sub(1) {
        let mut total = T::zero();
        for i in 0..k {
            for j in 0..k {
                let v = alpha[t * k + i] * p[i * k + j] * b[(t + 1) * k + j] * beta[(t + 1) * k + j];
                cell[i * k + j] = v;
                total = total + v;
            }
        }
        for (idx, v) in cell.iter().enumerate() {
            let v = *v / total;
            xi_sum[idx] = xi_sum[idx] + v;
            if store_xi {
                xi[t * k * k + idx] = v;
            }
        }
    }

    Ok(Posteriors {
        k,
        gamma,
        xi,
        xi_sum,
        log_likelihood,
    })
}

/// Posteriors γ, pairwise posteriors ξ and log p(x_{1:T}).
pub fn forward_backward<T: Scalar>(obs: &ObservationSequence<T>, params: &HmmParams<T>) -> Result<Posteriors<T>> {
    let log_b = params.log_emissions(obs)?;
    forward_backward_log(params.chain(), &log_b, obs.validity(), true)
}

/// Log-space Viterbi on a precomputed log-emission matrix. Ties resolve to
/// the lower state index. Returns the path and log p(path, x).
pub(crate) fn viterbi_log<T: Scalar>(chain: &MarkovChain<T>, log_b: &[T], present: &[bool]) -> Result<(Vec<usize>, T)> {
    let k = chain.k();
    let n = present.len();
    if n == 0 || log_b.len() != n * k {
        return Err(Error::InvalidParams("emission matrix does not match sequence".into()));
    }
    if !present.iter().any(|&p| p) {
        return Err(Error::NoUsableObservations);
    }
    let log_p: Vec<T> = chain.transition().iter().map(|p| p.ln()).collect();
    let emit = |t: usize, j: usize| if present[t] { log_b[t * k + j] } else { T::zero() };

    let mut delta: Vec<T> = (0..k).map(|j| chain.initial()[j].ln() + emit(0, j)).collect();
    let mut back = vec![0usize; n * k];
    let mut next = vec![T::zero(); k];
    for t in 1..n {
        for j in 0..k {
            let mut best = T::neg_infinity();
            let mut arg = 0;
            for i in 0..k {
                let v = delta[i] + log_p[i * k + j];
                if v > best {
                    best = v;
                    arg = i;
                }
            }
            back[t * k + j] = arg;
            next[j] = best + emit(t, j);
        }
        std::mem::swap(&mut delta, &mut next);
    }
    let mut best = T::neg_infinity();
    let mut last = 0;
    for (j, &v) in delta.iter().enumerate() {
        if v > best {
            best = v;
            last = j;
        }
    }
    if best == T::neg_infinity() || best.is_nan() {
        return Err(Error::ZeroLikelihood);
    }
    let mut path = vec![0; n];
    path[n - 1] = last;
    for t in (1..n).rev() {
        path[t - 1] = back[t * k + path[t]];
    }
    Ok((path, best))
}

pub fn viterbi_with_score<T: Scalar>(obs: &ObservationSequence<T>, params: &HmmParams<T>) -> Result<(StateSequence, T)> {
    let log_b = params.log_emissions(obs)?;
    let (path, score) = viterbi_log(params.chain(), &log_b, obs.validity())?;
    Ok((
        StateSequence {
            states: path.into_iter().map(Some).collect(),
            decoded_by: DecodeMethod::Viterbi,
        },
        score,
    ))
}

/// Maximum-a-posteriori joint state path.
pub fn viterbi<T: Scalar>(obs: &ObservationSequence<T>, params: &HmmParams<T>) -> Result<StateSequence> {
    viterbi_with_score(obs, params).map(|(s, _)| s)
}

/// Per-step argmax of γ_t (lowest index on ties).
pub fn posterior_decode<T: Scalar>(obs: &ObservationSequence<T>, params: &HmmParams<T>) -> Result<StateSequence> {
    let post = forward_backward(obs, params)?;
    let states = (0..post.len())
        .map(|t| {
            let row = post.gamma_row(t);
            let mut arg = 0;
            for j in 1..row.len() {
                if row[j] > row[arg] {
                    arg = j;
                }
            }
            Some(arg)
        })
        .collect();
    Ok(StateSequence {
        states,
        decoded_by: DecodeMethod::PosteriorMode,
    })
}
