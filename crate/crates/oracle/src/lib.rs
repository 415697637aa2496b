//! Exhaustive reference implementations for small instances.
//!
//! Everything here works on plain `f64` slices and enumerates the whole
//! state or subset space, so it shares no code path with the library it
//! checks. Only suitable for tiny inputs (K^T paths, 2^K subsets).

use std::f64::consts::PI;

/// Log density of a 1- or 2-dimensional normal using the explicit inverse
/// and determinant. `cov` is row-major.
pub fn normal_logpdf(x: &[f64], mean: &[f64], cov: &[f64]) -> f64 {
    match x.len() {
        1 => {
            let var = cov[0];
            let r = x[0] - mean[0];
            -0.5 * (2.0 * PI * var).ln() - 0.5 * r * r / var
        }
        2 => {
            let (a, b, c, d) = (cov[0], cov[1], cov[2], cov[3]);
            let det = a * d - b * c;
            let (r0, r1) = (x[0] - mean[0], x[1] - mean[1]);
            let q = (d * r0 * r0 - (b + c) * r0 * r1 + a * r1 * r1) / det;
            -(2.0 * PI).ln() - 0.5 * det.ln() - 0.5 * q
        }
        n => panic!("oracle supports dimension 1 or 2, got {n}"),
    }
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Results of enumerating every state path of a small HMM.
#[derive(Debug, Clone)]
pub struct PathEnumeration {
    pub log_likelihood: f64,
    /// gamma[t][k]
    pub gamma: Vec<Vec<f64>>,
    /// xi[t][i][j] for t in 0..T-1
    pub xi: Vec<Vec<Vec<f64>>>,
    pub best_log_prob: f64,
    pub best_path: Vec<usize>,
}

/// Joint log-probability log p(path, x) of one path.
pub fn path_log_prob(pi: &[f64], trans: &[Vec<f64>], log_emis: &[Vec<f64>], path: &[usize]) -> f64 {
    let mut lp = pi[path[0]].ln() + log_emis[0][path[0]];
    for t in 1..path.len() {
        lp += trans[path[t - 1]][path[t]].ln() + log_emis[t][path[t]];
    }
    lp
}

/// Enumerates all K^T paths. `log_emis[t][k]` is the log emission density
/// (use 0 for a missing observation).
pub fn enumerate_paths(pi: &[f64], trans: &[Vec<f64>], log_emis: &[Vec<f64>]) -> PathEnumeration {
    let k = pi.len();
    let n = log_emis.len();
    let total = k.pow(n as u32);
    let mut paths = Vec::with_capacity(total);
    let mut scores = Vec::with_capacity(total);
    for code in 0..total {
        let mut c = code;
        let mut path = vec![0; n];
        // most significant digit first, so lower codes are lexicographically smaller paths
        for t in (0..n).rev() {
            path[t] = c % k;
            c /= k;
        }
        scores.push(path_log_prob(pi, trans, log_emis, &path));
        paths.push(path);
    }
    let log_likelihood = log_sum_exp(&scores);
    let mut gamma = vec![vec![0.0; k]; n];
    let mut xi = vec![vec![vec![0.0; k]; k]; n.saturating_sub(1)];
    let mut best = 0;
    for (idx, (path, &s)) in paths.iter().zip(&scores).enumerate() {
        let w = (s - log_likelihood).exp();
        for t in 0..n {
            gamma[t][path[t]] += w;
            if t + 1 < n {
                xi[t][path[t]][path[t + 1]] += w;
            }
        }
        if s > scores[best] {
            best = idx;
        }
    }
    PathEnumeration {
        log_likelihood,
        gamma,
        xi,
        best_log_prob: scores[best],
        best_path: paths[best].clone(),
    }
}

/// State marginals p(s_t = k) of a Markov chain by repeated vector–matrix products.
pub fn chain_marginals(pi: &[f64], trans: &[Vec<f64>], n: usize) -> Vec<Vec<f64>> {
    let k = pi.len();
    let mut out = vec![pi.to_vec()];
    for _ in 1..n {
        let prev = out.last().unwrap();
        let next = (0..k).map(|j| (0..k).map(|i| prev[i] * trans[i][j]).sum()).collect();
        out.push(next);
    }
    out
}

/// Mean and population variance of the values selected by `mask`.
pub fn masked_moments(values: &[f64], mask: impl Fn(usize) -> bool) -> Option<(f64, f64)> {
    let picked: Vec<f64> = values.iter().enumerate().filter(|(i, _)| mask(*i)).map(|(_, &v)| v).collect();
    if picked.is_empty() {
        return None;
    }
    let n = picked.len() as f64;
    let mean = picked.iter().sum::<f64>() / n;
    let var = picked.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    Some((mean, var))
}

/// Outcome of the exhaustive Fishing-subset search.
#[derive(Debug, Clone, PartialEq)]
pub struct SubsetChoice {
    /// Sorted component indices labelled Fishing.
    pub subset: Vec<usize>,
    pub fallback: bool,
}

/// Enumerates every non-empty proper subset of `0..k` as a bitmask, keeps
/// those whose assigned speeds have population variance below `v2`, and
/// returns the one whose mean is closest to `m2` (ties: fewer members, then
/// lexicographically smallest). Without candidates, the component with the
/// lowest `component_means` entry (lowest index on ties) is returned.
pub fn best_fishing_subset(
    speeds: &[f64],
    assignment: &[usize],
    k: usize,
    m2: f64,
    v2: f64,
    component_means: &[f64],
) -> SubsetChoice {
    let mut best: Option<(f64, Vec<usize>)> = None;
    for mask in 1u32..((1u32 << k) - 1) {
        let members: Vec<usize> = (0..k).filter(|j| mask & (1 << j) != 0).collect();
        let Some((mean, var)) = masked_moments(speeds, |i| mask & (1 << assignment[i]) != 0) else {
            continue;
        };
        if var >= v2 {
            continue;
        }
        let dist = (mean - m2).abs();
        let better = match &best {
            None => true,
            Some((bd, bm)) => {
                dist < *bd || (dist == *bd && (members.len() < bm.len() || (members.len() == bm.len() && members < *bm)))
            }
        };
        if better {
            best = Some((dist, members));
        }
    }
    match best {
        Some((_, subset)) => SubsetChoice { subset, fallback: false },
        None => {
            let mut low = 0;
            for j in 1..k {
                if component_means[j] < component_means[low] {
                    low = j;
                }
            }
            SubsetChoice { subset: vec![low], fallback: true }
        }
    }
}

/// Small deterministic generator (64-bit LCG) for building test instances
/// without pulling in an RNG crate.
#[derive(Debug, Clone)]
pub struct Lcg(u64);

impl Lcg {
    pub fn new(seed: u64) -> Self {
        Self(seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let x = self.0;
        (x ^ (x >> 33)).wrapping_mul(0xff51afd7ed558ccd) ^ (x >> 29)
    }

    /// Uniform in [0, 1).
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    pub fn below(&mut self, n: usize) -> usize {
        (self.next_u64() % n as u64) as usize
    }

    /// A random probability vector with entries bounded away from zero.
    pub fn simplex(&mut self, k: usize) -> Vec<f64> {
        let raw: Vec<f64> = (0..k).map(|_| 0.05 + self.uniform()).collect();
        let s: f64 = raw.iter().sum();
        raw.into_iter().map(|v| v / s).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn enumeration_normalises() {
        let pi = vec![0.6, 0.4];
        let trans = vec![vec![0.7, 0.3], vec![0.4, 0.6]];
        let le = vec![vec![-1.0, -2.0], vec![-0.5, -3.0], vec![-2.0, -0.1]];
        let e = enumerate_paths(&pi, &trans, &le);
        for row in &e.gamma {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        assert!(e.best_log_prob <= e.log_likelihood);
    }

    #[test]
    fn subset_search_example() {
        // component 0: {2.9 ± }, component 2 joins it for subset {0, 2}
        let speeds = vec![2.0, 3.0, 4.0, 9.0];
        let assignment = vec![0, 0, 0, 1];
        let c = best_fishing_subset(&speeds, &assignment, 2, 3.0, 2.0, &[3.0, 9.0]);
        assert_eq!(c, SubsetChoice { subset: vec![0], fallback: false });
    }
}
