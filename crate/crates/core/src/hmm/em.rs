use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::SymMatrix;
use crate::scalar::Scalar;
use crate::seeding::rng_for;

use super::inference::forward_backward_log;
use super::{gaussian_log_emissions, GaussianComponent, HmmParams, MarkovChain, ObservationSequence};

/// Baum–Welch settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmConfig<T> {
    pub max_iter: usize,
    /// Convergence when |ΔlogL| / |logL| falls below this.
    pub tol: T,
    pub n_restarts: usize,
    /// Eigenvalue floor applied to every covariance after each M-step.
    pub min_variance: T,
}

impl<T: Scalar> Default for EmConfig<T> {
    fn default() -> Self {
        Self {
            max_iter: 500,
            tol: T::lit(1e-6),
            n_restarts: 5,
            min_variance: T::lit(1e-4),
        }
    }
}

/// Consecutive floor-clamped M-steps after which a run is declared degenerate.
const DEGENERATE_STREAK: usize = 10;

/// Why a fit produced no usable parameters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FitFailure {
    SequenceTooShort,
    AllRestartsDegenerate,
    Numerical(String),
}

impl std::fmt::Display for FitFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FitFailure::SequenceTooShort => f.write_str("sequence too short"),
            FitFailure::AllRestartsDegenerate => f.write_str("all restarts degenerate"),
            FitFailure::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RestartDiagnostics<T> {
    /// Log-likelihood at the start of every iteration (parameters before each M-step).
    pub ll_trace: Vec<T>,
    pub converged: bool,
    pub degenerate: bool,
    pub error: Option<String>,
}

/// Result of [`em_fit`]: the best restart's parameters, or the failure reason.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedModel<T> {
    pub params: Option<HmmParams<T>>,
    pub log_likelihood: T,
    pub iterations: usize,
    pub converged: bool,
    /// Per-sequence T×K posteriors under the final parameters.
    pub posteriors: Vec<Vec<T>>,
    pub failure: Option<FitFailure>,
    pub restarts: Vec<RestartDiagnostics<T>>,
}

impl<T: Scalar> FittedModel<T> {
    pub(crate) fn failed(reason: FitFailure) -> Self {
        Self {
            params: None,
            log_likelihood: T::neg_infinity(),
            iterations: 0,
            converged: false,
            posteriors: Vec::new(),
            failure: Some(reason),
            restarts: Vec::new(),
        }
    }

    pub fn is_ok(&self) -> bool {
        self.failure.is_none()
    }

    /// Parameters, or the failure as an error.
    pub fn params(&self) -> Result<&HmmParams<T>> {
        match (&self.params, &self.failure) {
            (Some(p), None) => Ok(p),
            (_, Some(f)) => Err(Error::FitFailed(f.to_string())),
            (None, None) => Err(Error::FitFailed("no parameters".into())),
        }
    }
}

/// State-conditional emission law plugged into the Baum–Welch driver.
pub(crate) trait EmissionModel<T: Scalar>: Clone + Send + Sync {
    type Data: Sync;

    fn log_emissions(&self, data: &Self::Data) -> Result<Vec<T>>;

    fn present<'a>(&self, data: &'a Self::Data) -> &'a [bool];

    /// Maximises (or at least does not decrease) the expected complete-data
    /// log-likelihood given posteriors. Returns whether the variance floor bit.
    fn m_step(&mut self, data: &[Self::Data], gammas: &[Vec<T>], min_variance: T) -> Result<bool>;
}

pub(crate) struct RunOutcome<T, E> {
    pub chain: MarkovChain<T>,
    pub emissions: E,
    pub log_likelihood: T,
    pub iterations: usize,
    pub gammas: Vec<Vec<T>>,
    pub diagnostics: RestartDiagnostics<T>,
}

/// One Baum–Welch run from the given starting point. Sequences share the
/// parameters but keep their own initial-state term.
pub(crate) fn baum_welch<T: Scalar, E: EmissionModel<T>>(
    data: &[E::Data],
    mut chain: MarkovChain<T>,
    mut emissions: E,
    config: &EmConfig<T>,
) -> Result<RunOutcome<T, E>> {
    let k = chain.k();
    let mut trace = Vec::new();
    let mut converged = false;
    let mut degenerate = false;
    let mut clamp_streak = 0;
    let mut iterations = 0;

    loop {
        let posts = data
            .par_iter()
            .map(|seq| {
                let log_b = emissions.log_emissions(seq)?;
                forward_backward_log(&chain, &log_b, emissions.present(seq), false)
            })
            .collect::<Result<Vec<_>>>()?;
        let ll: T = posts.iter().map(|p| p.log_likelihood).sum();
        if !ll.is_finite() {
            return Err(Error::ZeroLikelihood);
        }
        if let Some(&prev) = trace.last() {
            let change: T = ll - prev;
            let denom = if prev == T::zero() { T::one() } else { prev.abs() };
            if (change / denom).abs() < config.tol {
                converged = true;
            }
        }
        trace.push(ll);
        if converged || iterations >= config.max_iter {
            return Ok(RunOutcome {
                chain,
                emissions,
                log_likelihood: ll,
                iterations,
                gammas: posts.into_iter().map(|p| p.gamma).collect(),
                diagnostics: RestartDiagnostics {
                    ll_trace: trace,
                    converged,
                    degenerate,
                    error: None,
                },
            });
        }

        let mut initial_sum = vec![T::zero(); k];
        let mut xi_sum = vec![T::zero(); k * k];
        for p in &posts {
            for j in 0..k {
                initial_sum[j] = initial_sum[j] + p.gamma[j];
            }
            for (acc, &v) in xi_sum.iter_mut().zip(&p.xi_sum) {
                *acc = *acc + v;
            }
        }
        chain.reestimate(&initial_sum, posts.len(), &xi_sum);
        let gammas: Vec<Vec<T>> = posts.into_iter().map(|p| p.gamma).collect();
        let clamped = emissions.m_step(data, &gammas, config.min_variance)?;
        iterations += 1;
        clamp_streak = if clamped { clamp_streak + 1 } else { 0 };
        if clamp_streak > DEGENERATE_STREAK {
            degenerate = true;
            return Ok(RunOutcome {
                chain,
                emissions,
                log_likelihood: T::neg_infinity(),
                iterations,
                gammas,
                diagnostics: RestartDiagnostics {
                    ll_trace: trace,
                    converged: false,
                    degenerate,
                    error: None,
                },
            });
        }
    }
}

/// Gaussian emissions: one (μ_k, Σ_k) per state.
#[derive(Debug, Clone)]
pub(crate) struct GaussianEmissions<T> {
    pub components: Vec<GaussianComponent<T>>,
}

impl<T: Scalar> EmissionModel<T> for GaussianEmissions<T> {
    type Data = ObservationSequence<T>;

    fn log_emissions(&self, data: &Self::Data) -> Result<Vec<T>> {
        let dens = self
            .components
            .iter()
            .map(|c| super::Gaussian::new(c.mean.clone(), c.cov.clone()))
            .collect::<Result<Vec<_>>>()?;
        Ok(gaussian_log_emissions(&dens, data))
    }

    fn present<'a>(&self, data: &'a Self::Data) -> &'a [bool] {
        data.validity()
    }

    fn m_step(&mut self, data: &[Self::Data], gammas: &[Vec<T>], min_variance: T) -> Result<bool> {
        let k = self.components.len();
        let d = self.components[0].mean.len();
        let mut weight = vec![T::zero(); k];
        let mut s1 = vec![T::zero(); k * d];
        let mut s2 = vec![T::zero(); k * d * d];
        for (seq, gamma) in data.iter().zip(gammas) {
            for t in 0..seq.len() {
                if !seq.is_valid(t) {
                    continue;
                }
                let x = seq.get(t);
                for j in 0..k {
                    let g = gamma[t * k + j];
                    weight[j] = weight[j] + g;
                    for a in 0..d {
                        s1[j * d + a] = s1[j * d + a] + g * x[a];
                        for b in 0..d {
                            let idx = (j * d + a) * d + b;
                            s2[idx] = s2[idx] + g * x[a] * x[b];
                        }
                    }
                }
            }
        }
        let mut clamped_any = false;
        for j in 0..k {
            // an abandoned component keeps its previous parameters
            if !(weight[j] > T::epsilon()) {
                continue;
            }
            let mean: Vec<T> = (0..d).map(|a| s1[j * d + a] / weight[j]).collect();
            let mut cov = vec![T::zero(); d * d];
            for a in 0..d {
                for b in 0..d {
                    cov[a * d + b] = s2[(j * d + a) * d + b] / weight[j] - mean[a] * mean[b];
                }
            }
            let (cov, clamped) = SymMatrix::from_accumulator(d, cov).clamp_eigenvalues(min_variance);
            clamped_any |= clamped;
            self.components[j] = GaussianComponent { mean, cov };
        }
        Ok(clamped_any)
    }
}

/// Total valid steps needed to identify K components in dimension d.
pub(crate) fn identifiability_floor(k: usize, d: usize) -> usize {
    k * (d + d * (d + 1) / 2 + 1)
}

/// Linear-interpolation quantile of sorted data.
pub(crate) fn quantile_sorted<T: Scalar>(sorted: &[T], p: T) -> T {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = p * T::from_usize_lossy(n - 1);
    let lo = h.floor().to_usize().unwrap_or(0).min(n - 1);
    let hi = (lo + 1).min(n - 1);
    let frac = h - T::from_usize_lossy(lo);
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// Pooled mean and population covariance over the valid steps of all sequences.
pub(crate) fn pooled_moments<T: Scalar>(sequences: &[ObservationSequence<T>]) -> (Vec<T>, SymMatrix<T>, usize) {
    let d = sequences[0].dim();
    let mut n = 0usize;
    let mut mean = vec![T::zero(); d];
    for s in sequences {
        for t in (0..s.len()).filter(|&t| s.is_valid(t)) {
            n += 1;
            for a in 0..d {
                mean[a] = mean[a] + s.get(t)[a];
            }
        }
    }
    let nf = T::from_usize_lossy(n.max(1));
    for m in &mut mean {
        *m = *m / nf;
    }
    let mut cov = vec![T::zero(); d * d];
    for s in sequences {
        for t in (0..s.len()).filter(|&t| s.is_valid(t)) {
            let x = s.get(t);
            for a in 0..d {
                for b in 0..d {
                    cov[a * d + b] = cov[a * d + b] + (x[a] - mean[a]) * (x[b] - mean[b]);
                }
            }
        }
    }
    for c in &mut cov {
        *c = *c / nf;
    }
    (mean, SymMatrix::from_accumulator(d, cov), n)
}

/// Starting point for restart `restart` (0 = deterministic quantile start).
///
/// Component means sit at the (k − 0.5)/K quantiles of the first coordinate
/// (speed), other coordinates at their sample mean; all covariances equal the
/// pooled covariance; transitions are 0.8 on the diagonal; π is uniform.
/// Restarts ≥ 1 jitter each mean coordinate by U(−0.5, 0.5) pooled standard
/// deviations drawn from a seeded stream.
pub fn initialize<T: Scalar>(
    sequences: &[ObservationSequence<T>],
    k: usize,
    restart: usize,
    seed: u64,
    min_variance: T,
) -> Result<HmmParams<T>> {
    if k == 0 {
        return Err(Error::InvalidParams("K must be at least 1".into()));
    }
    if sequences.is_empty() {
        return Err(Error::NoUsableObservations);
    }
    let (mean, pooled, n) = pooled_moments(sequences);
    if n == 0 {
        return Err(Error::NoUsableObservations);
    }
    let d = mean.len();
    let mut speeds: Vec<T> = sequences
        .iter()
        .flat_map(|s| (0..s.len()).filter(|&t| s.is_valid(t)).map(move |t| s.get(t)[0]))
        .collect();
    speeds.sort_by(|a, b| a.partial_cmp(b).expect("finite observations"));

    let (cov, _) = pooled.clamp_eigenvalues(min_variance);
    let sd: Vec<T> = (0..d).map(|a| cov.get(a, a).sqrt()).collect();
    let mut rng = rng_for(seed, restart as u64);
    let components = (0..k)
        .map(|j| {
            let mut m = mean.clone();
            if k > 1 {
                let level = (T::from_usize_lossy(j) + T::lit(0.5)) / T::from_usize_lossy(k);
                m[0] = quantile_sorted(&speeds, level);
            }
            if restart > 0 {
                for a in 0..d {
                    let u: f64 = rng.random_range(-0.5..0.5);
                    m[a] = m[a] + T::lit(u) * sd[a];
                }
            }
            GaussianComponent { mean: m, cov: cov.clone() }
        })
        .collect();
    HmmParams::new(MarkovChain::sticky(k, T::lit(0.8)), components)
}

/// Baum–Welch over one or more sequences sharing a parameter set; best of
/// `config.n_restarts` runs by final log-likelihood.
pub fn em_fit<T: Scalar>(
    sequences: &[ObservationSequence<T>],
    k: usize,
    config: &EmConfig<T>,
    seed: u64,
) -> Result<FittedModel<T>> {
    if k == 0 {
        return Err(Error::InvalidParams("K must be at least 1".into()));
    }
    if config.n_restarts == 0 {
        return Err(Error::Config("n_restarts must be at least 1".into()));
    }
    let Some(first) = sequences.first() else {
        return Ok(FittedModel::failed(FitFailure::SequenceTooShort));
    };
    let d = first.dim();
    if let Some(s) = sequences.iter().find(|s| s.dim() != d) {
        return Err(Error::DimensionMismatch { expected: d, found: s.dim() });
    }
    let n_valid: usize = sequences.iter().map(|s| s.n_valid()).sum();
    if n_valid < identifiability_floor(k, d) {
        return Ok(FittedModel::failed(FitFailure::SequenceTooShort));
    }

    let runs: Vec<Result<RunOutcome<T, GaussianEmissions<T>>>> = (0..config.n_restarts)
        .into_par_iter()
        .map(|r| {
            let init = initialize(sequences, k, r, seed, config.min_variance)?;
            let emissions = GaussianEmissions { components: init.components().to_vec() };
            baum_welch(sequences, init.chain().clone(), emissions, config)
        })
        .collect();

    let mut best: Option<RunOutcome<T, GaussianEmissions<T>>> = None;
    let mut restarts = Vec::with_capacity(runs.len());
    let mut last_error = None;
    for run in runs {
        match run {
            Ok(run) => {
                restarts.push(run.diagnostics.clone());
                let usable = !run.diagnostics.degenerate;
                if usable && best.as_ref().is_none_or(|b| run.log_likelihood > b.log_likelihood) {
                    best = Some(run);
                }
            }
            Err(e) => {
                last_error = Some(e.to_string());
                restarts.push(RestartDiagnostics {
                    ll_trace: Vec::new(),
                    converged: false,
                    degenerate: false,
                    error: Some(e.to_string()),
                });
            }
        }
    }
    let Some(best) = best else {
        let reason = if restarts.iter().any(|r| r.degenerate) {
            FitFailure::AllRestartsDegenerate
        } else {
            FitFailure::Numerical(last_error.unwrap_or_default())
        };
        return Ok(FittedModel { restarts, ..FittedModel::failed(reason) });
    };
    let params = HmmParams::new(best.chain, best.emissions.components)?;
    Ok(FittedModel {
        params: Some(params),
        log_likelihood: best.log_likelihood,
        iterations: best.iterations,
        converged: best.diagnostics.converged,
        posteriors: best.gammas,
        failure: None,
        restarts,
    })
}
