//! Two-state switching AR(1) model on persistence/rotational speed.
//!
//! In state k the observation x_t = (vp_t, vr_t) given x_{t−1} is
//! N(m_k + ρ_k ∘ (x_{t−1} − m_k), Σ_k). The first step of a sequence, and the
//! first step after an invalid one, use the stationary law
//! N(m_k, Σ_k ⊘ (1 − ρ_k ρ_kᵀ)).
//!
//! Fitting is generalized EM: the transition update is exact, and the
//! emission update improves the expected complete-data log-likelihood block
//! by block (mean, then ρ, then Σ). A block that would lower it is reverted.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hmm::{
    baum_welch, forward_backward_log, initialize, viterbi_log, DecodeMethod, EmConfig, EmissionModel, FitFailure,
    Gaussian, MarkovChain, ObservationSequence, Posteriors, RestartDiagnostics, RunOutcome, StateSequence,
};
use crate::linalg::SymMatrix;
use crate::scalar::Scalar;

const DIM: usize = 2;
const N_STATES: usize = 2;
/// Largest admissible |ρ|.
const RHO_BOUND: f64 = 1.0 - 1e-6;
const RHO_GRID: usize = 201;
const GOLDEN_ITERS: usize = 60;

/// How the AR coefficient is parameterised.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RhoMode<T> {
    /// One ρ per state shared by both coordinates.
    Shared,
    /// Separate ρ per state and coordinate.
    PerCoordinate,
    /// ρ held at the given value in every state.
    Fixed(T),
}

impl<T> RhoMode<T> {
    fn n_free(&self) -> usize {
        match self {
            RhoMode::Shared => 1,
            RhoMode::PerCoordinate => DIM,
            RhoMode::Fixed(_) => 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DmarpState<T> {
    /// Mean of (vp, vr), knots.
    pub mean: [T; DIM],
    /// AR coefficient per coordinate (equal entries in shared mode).
    pub rho: [T; DIM],
    /// Innovation covariance.
    pub cov: SymMatrix<T>,
}

impl<T: Scalar> DmarpState<T> {
    /// Covariance of the stationary law, Σ_ab / (1 − ρ_a ρ_b).
    pub fn stationary_cov(&self) -> SymMatrix<T> {
        stationary(&self.cov, &self.rho)
    }
}

fn stationary<T: Scalar>(cov: &SymMatrix<T>, rho: &[T; DIM]) -> SymMatrix<T> {
    let mut data = vec![T::zero(); DIM * DIM];
    for a in 0..DIM {
        for b in 0..DIM {
            data[a * DIM + b] = cov.get(a, b) / (T::one() - rho[a] * rho[b]);
        }
    }
    SymMatrix::from_accumulator(DIM, data)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DmarpParams<T> {
    chain: MarkovChain<T>,
    states: Vec<DmarpState<T>>,
}

impl<T: Scalar> DmarpParams<T> {
    pub fn new(chain: MarkovChain<T>, states: Vec<DmarpState<T>>) -> Result<Self> {
        if chain.k() != states.len() {
            return Err(Error::InvalidParams(format!(
                "chain has {} states but {} emission laws were given",
                chain.k(),
                states.len()
            )));
        }
        for s in &states {
            if s.cov.dim() != DIM {
                return Err(Error::DimensionMismatch { expected: DIM, found: s.cov.dim() });
            }
            if s.rho.iter().any(|r| !(r.abs() < T::one())) {
                return Err(Error::InvalidParams("AR coefficient must satisfy |ρ| < 1".into()));
            }
            if s.mean.iter().any(|m| !m.is_finite()) {
                return Err(Error::InvalidParams("non-finite mean".into()));
            }
            if s.cov.cholesky().is_none() {
                return Err(Error::DegenerateCovariance);
            }
        }
        Ok(Self { chain, states })
    }

    pub fn chain(&self) -> &MarkovChain<T> {
        &self.chain
    }

    pub fn states(&self) -> &[DmarpState<T>] {
        &self.states
    }

    pub fn k(&self) -> usize {
        self.states.len()
    }

    /// State with the lowest mean persistence speed (lower index on ties).
    pub fn fishing_state(&self) -> usize {
        let mut low = 0;
        for (j, s) in self.states.iter().enumerate().skip(1) {
            if s.mean[0] < self.states[low].mean[0] {
                low = j;
            }
        }
        low
    }

    /// T×K conditional log densities (0 at invalid steps).
    pub fn log_emissions(&self, obs: &ObservationSequence<T>) -> Result<Vec<T>> {
        log_emissions(&self.states, obs)
    }
}

fn check_dim<T: Scalar>(obs: &ObservationSequence<T>) -> Result<()> {
    if obs.dim() != DIM {
        return Err(Error::DimensionMismatch { expected: DIM, found: obs.dim() });
    }
    Ok(())
}

/// Whether step `t` is conditioned on step `t − 1`.
fn has_predecessor<T: Scalar>(obs: &ObservationSequence<T>, t: usize) -> bool {
    t > 0 && obs.is_valid(t - 1)
}

fn log_emissions<T: Scalar>(states: &[DmarpState<T>], obs: &ObservationSequence<T>) -> Result<Vec<T>> {
    check_dim(obs)?;
    let k = states.len();
    let laws = states
        .iter()
        .map(|s| {
            let mean = s.mean.to_vec();
            Ok((Gaussian::new(mean.clone(), s.cov.clone())?, Gaussian::new(mean, s.stationary_cov())?))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = vec![T::zero(); obs.len() * k];
    for t in 0..obs.len() {
        if !obs.is_valid(t) {
            continue;
        }
        let x = obs.get(t);
        for (j, (s, (innov, stat))) in states.iter().zip(&laws).enumerate() {
            out[t * k + j] = if has_predecessor(obs, t) {
                let y = obs.get(t - 1);
                let centre = [
                    s.mean[0] + s.rho[0] * (y[0] - s.mean[0]),
                    s.mean[1] + s.rho[1] * (y[1] - s.mean[1]),
                ];
                innov.log_pdf_centered(x, &centre)
            } else {
                stat.log_pdf(x)
            };
        }
    }
    Ok(out)
}

/// Row-major 2×2 helpers.
fn det2<T: Scalar>(m: &[T; 4]) -> T {
    m[0] * m[3] - m[1] * m[2]
}

fn inv2<T: Scalar>(m: &[T; 4]) -> Option<[T; 4]> {
    let d = det2(m);
    if !(d.abs() > T::min_positive_value()) || !d.is_finite() {
        return None;
    }
    Some([m[3] / d, -m[1] / d, -m[2] / d, m[0] / d])
}

fn as_array<T: Scalar>(s: &SymMatrix<T>) -> [T; 4] {
    [s.get(0, 0), s.get(0, 1), s.get(1, 0), s.get(1, 1)]
}

/// Weighted second moments of one state's residuals around a fixed mean.
#[derive(Debug, Clone, Copy)]
struct ResidualStats<T> {
    w_cond: T,
    w_stat: T,
    /// Σ w a aᵀ, Σ w a bᵀ, Σ w b bᵀ over conditioned steps, a = x − m, b = y − m.
    aa: [T; 4],
    ab: [T; 4],
    bb: [T; 4],
    /// Σ w u uᵀ over stationary steps, u = x − m.
    uu: [T; 4],
}

/// Sufficient sums for one state that do not depend on the parameters.
#[derive(Debug, Clone, Copy)]
struct RawStats<T> {
    w_cond: T,
    w_stat: T,
    sx: [T; 2],
    sy: [T; 2],
    sxx: [T; 4],
    sxy: [T; 4],
    syy: [T; 4],
    ux: [T; 2],
    uxx: [T; 4],
}

impl<T: Scalar> RawStats<T> {
    fn zero() -> Self {
        let z2 = [T::zero(); 2];
        let z4 = [T::zero(); 4];
        Self {
            w_cond: T::zero(),
            w_stat: T::zero(),
            sx: z2,
            sy: z2,
            sxx: z4,
            sxy: z4,
            syy: z4,
            ux: z2,
            uxx: z4,
        }
    }

    fn collect(data: &[ObservationSequence<T>], gammas: &[Vec<T>], j: usize, k: usize) -> Self {
        let mut s = Self::zero();
        for (seq, gamma) in data.iter().zip(gammas) {
            for t in 0..seq.len() {
                if !seq.is_valid(t) {
                    continue;
                }
                let w = gamma[t * k + j];
                let x = seq.get(t);
                if has_predecessor(seq, t) {
                    let y = seq.get(t - 1);
                    s.w_cond = s.w_cond + w;
                    for a in 0..DIM {
                        s.sx[a] = s.sx[a] + w * x[a];
                        s.sy[a] = s.sy[a] + w * y[a];
                        for b in 0..DIM {
                            s.sxx[a * 2 + b] = s.sxx[a * 2 + b] + w * x[a] * x[b];
                            s.sxy[a * 2 + b] = s.sxy[a * 2 + b] + w * x[a] * y[b];
                            s.syy[a * 2 + b] = s.syy[a * 2 + b] + w * y[a] * y[b];
                        }
                    }
                } else {
                    s.w_stat = s.w_stat + w;
                    for a in 0..DIM {
                        s.ux[a] = s.ux[a] + w * x[a];
                        for b in 0..DIM {
                            s.uxx[a * 2 + b] = s.uxx[a * 2 + b] + w * x[a] * x[b];
                        }
                    }
                }
            }
        }
        s
    }

    /// Centres the raw sums on `m`.
    fn residuals(&self, m: &[T; 2]) -> ResidualStats<T> {
        let mut r = ResidualStats {
            w_cond: self.w_cond,
            w_stat: self.w_stat,
            aa: [T::zero(); 4],
            ab: [T::zero(); 4],
            bb: [T::zero(); 4],
            uu: [T::zero(); 4],
        };
        for a in 0..DIM {
            for b in 0..DIM {
                let i = a * 2 + b;
                let wc = self.w_cond;
                r.aa[i] = self.sxx[i] - m[a] * self.sx[b] - m[b] * self.sx[a] + wc * m[a] * m[b];
                r.ab[i] = self.sxy[i] - m[a] * self.sy[b] - m[b] * self.sx[a] + wc * m[a] * m[b];
                r.bb[i] = self.syy[i] - m[a] * self.sy[b] - m[b] * self.sy[a] + wc * m[a] * m[b];
                r.uu[i] = self.uxx[i] - m[a] * self.ux[b] - m[b] * self.ux[a] + self.w_stat * m[a] * m[b];
            }
        }
        r
    }
}

impl<T: Scalar> ResidualStats<T> {
    /// Σ w r rᵀ with r = a − ρ ∘ b.
    fn innovation_scatter(&self, rho: &[T; 2]) -> [T; 4] {
        let mut out = [T::zero(); 4];
        for a in 0..DIM {
            for b in 0..DIM {
                let i = a * 2 + b;
                let ba = b * 2 + a;
                out[i] = self.aa[i] - rho[b] * self.ab[i] - rho[a] * self.ab[ba] + rho[a] * rho[b] * self.bb[i];
            }
        }
        out
    }

    /// Σ w Λ ∘ (u uᵀ) with Λ_ab = 1 − ρ_a ρ_b.
    fn damped_stationary_scatter(&self, rho: &[T; 2]) -> [T; 4] {
        let mut out = [T::zero(); 4];
        for a in 0..DIM {
            for b in 0..DIM {
                out[a * 2 + b] = (T::one() - rho[a] * rho[b]) * self.uu[a * 2 + b];
            }
        }
        out
    }

    /// Expected complete-data emission log-likelihood of one state.
    fn q(&self, rho: &[T; 2], cov: &[T; 4]) -> T {
        let half = T::lit(0.5);
        let ln2pi = (T::lit(2.0) * T::PI()).ln();
        let Some(inv) = inv2(cov) else {
            return T::neg_infinity();
        };
        let det = det2(cov);
        if !(det > T::zero()) {
            return T::neg_infinity();
        }
        let scatter = self.innovation_scatter(rho);
        let tr = |m: &[T; 4], s: &[T; 4]| m[0] * s[0] + m[1] * s[2] + m[2] * s[1] + m[3] * s[3];
        let mut q = -half * (self.w_cond * (T::lit(2.0) * ln2pi + det.ln()) + tr(&inv, &scatter));
        if self.w_stat > T::zero() {
            let st = as_array(&stationary(&SymMatrix::from_accumulator(DIM, cov.to_vec()), rho));
            let (Some(sinv), sdet) = (inv2(&st), det2(&st)) else {
                return T::neg_infinity();
            };
            if !(sdet > T::zero()) {
                return T::neg_infinity();
            }
            q = q - half * (self.w_stat * (T::lit(2.0) * ln2pi + sdet.ln()) + tr(&sinv, &self.uu));
        }
        q
    }
}

/// Maximises a unimodal-or-not function on [lo, hi]: grid, then golden section
/// between the best grid point's neighbours.
fn maximise_1d<T: Scalar>(f: impl Fn(T) -> T, lo: T, hi: T) -> (T, T) {
    let step = (hi - lo) / T::from_usize_lossy(RHO_GRID - 1);
    let mut best = (lo, f(lo));
    let mut best_i = 0;
    for i in 1..RHO_GRID {
        let x = lo + step * T::from_usize_lossy(i);
        let v = f(x);
        if v > best.1 {
            best = (x, v);
            best_i = i;
        }
    }
    let mut a = if best_i == 0 { lo } else { lo + step * T::from_usize_lossy(best_i - 1) };
    let mut b = if best_i + 1 >= RHO_GRID { hi } else { lo + step * T::from_usize_lossy(best_i + 1) };
    let g = T::lit(0.5) * (T::lit(5.0).sqrt() - T::one());
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..GOLDEN_ITERS {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    for (x, v) in [(c, fc), (d, fd)] {
        if v > best.1 {
            best = (x, v);
        }
    }
    best
}

#[derive(Debug, Clone)]
pub(crate) struct DmarpEmissions<T> {
    states: Vec<DmarpState<T>>,
    mode: RhoMode<T>,
    non_stationary: bool,
}

impl<T: Scalar> DmarpEmissions<T> {
    fn update_state(&mut self, j: usize, raw: &RawStats<T>, min_variance: T) -> bool {
        let s = &mut self.states[j];
        if !(raw.w_cond + raw.w_stat > T::epsilon()) {
            return false;
        }
        let bound = T::lit(RHO_BOUND);
        let cov = as_array(&s.cov);

        // mean: exact maximiser for fixed ρ and Σ
        let q_old = raw.residuals(&s.mean).q(&s.rho, &cov);
        if let Some(m) = solve_mean(raw, &s.rho, &cov) {
            if raw.residuals(&m).q(&s.rho, &cov) >= q_old {
                s.mean = m;
            }
        }
        let res = raw.residuals(&s.mean);

        // ρ: grid plus golden-section search on the exact objective
        match self.mode {
            RhoMode::Fixed(_) => {}
            RhoMode::Shared => {
                let q_here = res.q(&s.rho, &cov);
                let (r, v) = maximise_1d(|r| res.q(&[r, r], &cov), -bound, bound);
                if v > q_here {
                    s.rho = [r, r];
                }
            }
            RhoMode::PerCoordinate => {
                for _sweep in 0..2 {
                    for a in 0..DIM {
                        let q_here = res.q(&s.rho, &cov);
                        let base = s.rho;
                        let (r, v) = maximise_1d(
                            |r| {
                                let mut rho = base;
                                rho[a] = r;
                                res.q(&rho, &cov)
                            },
                            -bound,
                            bound,
                        );
                        if v > q_here {
                            s.rho[a] = r;
                        }
                    }
                }
            }
        }
        if s.rho.iter().any(|r| r.abs() >= bound * (T::one() - T::lit(1e-12))) {
            self.non_stationary = true;
        }

        // Σ: closed form under shared ρ, a guarded candidate otherwise
        let w = raw.w_cond + raw.w_stat;
        let inn = res.innovation_scatter(&s.rho);
        let sta = res.damped_stationary_scatter(&s.rho);
        let cand: Vec<T> = (0..4).map(|i| (inn[i] + sta[i]) / w).collect();
        let (cand, clamped) = SymMatrix::from_accumulator(DIM, cand).clamp_eigenvalues(min_variance);
        if res.q(&s.rho, &as_array(&cand)) >= res.q(&s.rho, &cov) || res.q(&s.rho, &cov) == T::neg_infinity() {
            s.cov = cand;
        }
        clamped
    }
}

/// Solves [W_C D Σ⁻¹ D + W_S Σ_s⁻¹] m = D Σ⁻¹ Z + Σ_s⁻¹ X, D = diag(1 − ρ).
fn solve_mean<T: Scalar>(raw: &RawStats<T>, rho: &[T; 2], cov: &[T; 4]) -> Option<[T; 2]> {
    let inv = inv2(cov)?;
    let sinv = if raw.w_stat > T::zero() {
        inv2(&as_array(&stationary(&SymMatrix::from_accumulator(DIM, cov.to_vec()), rho)))?
    } else {
        [T::zero(); 4]
    };
    let dd = [T::one() - rho[0], T::one() - rho[1]];
    let z = [raw.sx[0] - rho[0] * raw.sy[0], raw.sx[1] - rho[1] * raw.sy[1]];
    let mut lhs = [T::zero(); 4];
    let mut rhs = [T::zero(); 2];
    for a in 0..DIM {
        for b in 0..DIM {
            lhs[a * 2 + b] = raw.w_cond * dd[a] * inv[a * 2 + b] * dd[b] + raw.w_stat * sinv[a * 2 + b];
            rhs[a] = rhs[a] + dd[a] * inv[a * 2 + b] * z[b] + sinv[a * 2 + b] * raw.ux[b];
        }
    }
    let l = inv2(&lhs)?;
    let m = [l[0] * rhs[0] + l[1] * rhs[1], l[2] * rhs[0] + l[3] * rhs[1]];
    m.iter().all(|v| v.is_finite()).then_some(m)
}

impl<T: Scalar> EmissionModel<T> for DmarpEmissions<T> {
    type Data = ObservationSequence<T>;

    fn log_emissions(&self, data: &Self::Data) -> Result<Vec<T>> {
        log_emissions(&self.states, data)
    }

    fn present<'a>(&self, data: &'a Self::Data) -> &'a [bool] {
        data.validity()
    }

    fn m_step(&mut self, data: &[Self::Data], gammas: &[Vec<T>], min_variance: T) -> Result<bool> {
        let k = self.states.len();
        let raws: Vec<RawStats<T>> = (0..k).map(|j| RawStats::collect(data, gammas, j, k)).collect();
        let mut clamped = false;
        for (j, raw) in raws.iter().enumerate() {
            clamped |= self.update_state(j, raw, min_variance);
        }
        Ok(clamped)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DmarpConfig<T> {
    pub em: EmConfig<T>,
    pub rho_mode: RhoMode<T>,
}

impl<T: Scalar> Default for DmarpConfig<T> {
    fn default() -> Self {
        Self {
            em: EmConfig::default(),
            rho_mode: RhoMode::Shared,
        }
    }
}

/// Result of [`dmarp_fit`].
#[derive(Debug, Clone, PartialEq)]
pub struct DmarpFit<T> {
    pub params: Option<DmarpParams<T>>,
    pub log_likelihood: T,
    pub iterations: usize,
    pub converged: bool,
    /// Some |ρ| reached the admissible bound and was clamped.
    pub non_stationary: bool,
    pub failure: Option<FitFailure>,
    pub restarts: Vec<RestartDiagnostics<T>>,
}

impl<T: Scalar> DmarpFit<T> {
    fn failed(reason: FitFailure, restarts: Vec<RestartDiagnostics<T>>) -> Self {
        Self {
            params: None,
            log_likelihood: T::neg_infinity(),
            iterations: 0,
            converged: false,
            non_stationary: false,
            failure: Some(reason),
            restarts,
        }
    }

    pub fn is_ok(&self) -> bool {
        self.failure.is_none()
    }

    pub fn params(&self) -> Result<&DmarpParams<T>> {
        match (&self.params, &self.failure) {
            (Some(p), None) => Ok(p),
            (_, Some(f)) => Err(Error::FitFailed(f.to_string())),
            (None, None) => Err(Error::FitFailed("no parameters".into())),
        }
    }
}

/// Valid observations needed: two per free parameter.
pub fn dmarp_identifiability_floor<T>(mode: &RhoMode<T>) -> usize {
    let k = N_STATES;
    let per_state = DIM + mode.n_free() + DIM * (DIM + 1) / 2;
    2 * (k * per_state + k * (k - 1) + (k - 1))
}

/// Starting point for a restart: the Gaussian-HMM initialisation on (vp, vr)
/// with ρ at its fixed value, or 0.
pub fn dmarp_initialize<T: Scalar>(
    sequences: &[ObservationSequence<T>],
    mode: &RhoMode<T>,
    restart: usize,
    seed: u64,
    min_variance: T,
) -> Result<DmarpParams<T>> {
    let init = initialize(sequences, N_STATES, restart, seed, min_variance)?;
    let rho0 = match mode {
        RhoMode::Fixed(r) => *r,
        _ => T::zero(),
    };
    let states = init
        .components()
        .iter()
        .map(|c| DmarpState {
            mean: [c.mean[0], c.mean[1]],
            rho: [rho0, rho0],
            cov: c.cov.clone(),
        })
        .collect();
    DmarpParams::new(init.chain().clone(), states)
}

/// Generalized EM over sequences of (vp, vr) sharing one parameter set.
pub fn dmarp_fit<T: Scalar>(sequences: &[ObservationSequence<T>], config: &DmarpConfig<T>, seed: u64) -> Result<DmarpFit<T>> {
    if config.em.n_restarts == 0 {
        return Err(Error::Config("n_restarts must be at least 1".into()));
    }
    if let RhoMode::Fixed(r) = config.rho_mode {
        if !(r.abs() < T::one()) {
            return Err(Error::Config("fixed ρ must satisfy |ρ| < 1".into()));
        }
    }
    for s in sequences {
        check_dim(s)?;
    }
    let n_valid: usize = sequences.iter().map(|s| s.n_valid()).sum();
    if sequences.is_empty() || n_valid < dmarp_identifiability_floor(&config.rho_mode) {
        return Ok(DmarpFit::failed(FitFailure::SequenceTooShort, Vec::new()));
    }

    let runs: Vec<Result<RunOutcome<T, DmarpEmissions<T>>>> = (0..config.em.n_restarts)
        .into_par_iter()
        .map(|r| {
            let init = dmarp_initialize(sequences, &config.rho_mode, r, seed, config.em.min_variance)?;
            let emissions = DmarpEmissions {
                states: init.states,
                mode: config.rho_mode,
                non_stationary: false,
            };
            baum_welch(sequences, init.chain, emissions, &config.em)
        })
        .collect();

    let mut best: Option<RunOutcome<T, DmarpEmissions<T>>> = None;
    let mut restarts = Vec::with_capacity(runs.len());
    let mut last_error = None;
    for run in runs {
        match run {
            Ok(run) => {
                restarts.push(run.diagnostics.clone());
                if !run.diagnostics.degenerate && best.as_ref().is_none_or(|b| run.log_likelihood > b.log_likelihood) {
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
        return Ok(DmarpFit::failed(reason, restarts));
    };
    let non_stationary = best.emissions.non_stationary;
    let params = DmarpParams::new(best.chain, best.emissions.states)?;
    Ok(DmarpFit {
        params: Some(params),
        log_likelihood: best.log_likelihood,
        iterations: best.iterations,
        converged: best.diagnostics.converged,
        non_stationary,
        failure: None,
        restarts,
    })
}

/// Smoothed posteriors under DMARP parameters.
pub fn dmarp_posteriors<T: Scalar>(params: &DmarpParams<T>, obs: &ObservationSequence<T>) -> Result<Posteriors<T>> {
    let log_b = params.log_emissions(obs)?;
    forward_backward_log(params.chain(), &log_b, obs.validity(), true)
}

/// Viterbi path under DMARP parameters.
pub fn dmarp_viterbi<T: Scalar>(params: &DmarpParams<T>, obs: &ObservationSequence<T>) -> Result<StateSequence> {
    let log_b = params.log_emissions(obs)?;
    let (path, _) = viterbi_log(params.chain(), &log_b, obs.validity())?;
    Ok(StateSequence {
        states: path.into_iter().map(Some).collect(),
        decoded_by: DecodeMethod::Viterbi,
    })
}
