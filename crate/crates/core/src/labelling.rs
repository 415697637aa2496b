//! Post-fit labelling of Gaussian components as Fishing or Steaming.
//!
//! A 2-component fit provides the reference: the empirical mean m₂ and
//! population variance V₂ of the speeds decoded into its low-speed
//! component. In a K-component fit, every non-empty proper subset of
//! components whose decoded speeds have variance below V₂ is a candidate;
//! the candidate whose mean is closest to m₂ is labelled Fishing.

use crate::activity::{Activity, ActivitySequence};
use crate::error::{Error, Result};
use crate::hmm::{viterbi, FittedModel, HmmParams, ObservationSequence, StateSequence};
use crate::scalar::Scalar;

/// Low-speed component of the 2-component reference fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceSummary {
    pub component: usize,
    /// Mean decoded speed, knots.
    pub mean: f64,
    /// Population variance of decoded speeds, knots².
    pub variance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabelMap {
    /// Activity per component index.
    pub activities: Vec<Activity>,
    pub reference: ReferenceSummary,
    /// Sorted component indices labelled Fishing.
    pub chosen_subset: Vec<usize>,
    /// No subset reduced the variance; the lowest-mean component was used.
    pub fallback: bool,
}

impl LabelMap {
    pub fn k(&self) -> usize {
        self.activities.len()
    }

    /// Builds a map from an explicit Fishing subset.
    pub fn from_subset(k: usize, subset: Vec<usize>, reference: ReferenceSummary, fallback: bool) -> Self {
        let activities = (0..k)
            .map(|j| if subset.contains(&j) { Activity::Fishing } else { Activity::Steaming })
            .collect();
        Self {
            activities,
            reference,
            chosen_subset: subset,
            fallback,
        }
    }
}

/// Two-pass mean and population variance of the speeds whose component is in `mask`.
fn subset_moments(speeds: &[f64], assignment: &[usize], mask: u32) -> Option<(f64, f64)> {
    let picked = || speeds.iter().zip(assignment).filter(|(_, &c)| mask & (1 << c) != 0).map(|(&v, _)| v);
    let n = picked().count();
    if n == 0 {
        return None;
    }
    let mean = picked().sum::<f64>() / n as f64;
    let var = picked().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
    Some((mean, var))
}

/// Exhaustive subset choice on decoded speeds (component indices 0-based).
///
/// Candidates are non-empty proper subsets with population variance
/// strictly below `reference.variance`; the winner minimises
/// |mean − reference.mean|, ties going to fewer members and then to the
/// lexicographically smallest index list. Without candidates the component
/// with the lowest entry of `component_means` is chosen (`fallback = true`).
pub fn choose_fishing_subset(
    speeds: &[f64],
    assignment: &[usize],
    k: usize,
    reference: &ReferenceSummary,
    component_means: &[f64],
) -> Result<(Vec<usize>, bool)> {
    if k < 2 {
        return Err(Error::SingleComponent);
    }
    if k > 20 {
        return Err(Error::InvalidParams(format!("K = {k} too large for subset enumeration")));
    }
    if let Some(&bad) = assignment.iter().find(|&&c| c >= k) {
        return Err(Error::UnknownComponent(bad));
    }
    let mut best: Option<(f64, Vec<usize>)> = None;
    for mask in 1u32..((1u32 << k) - 1) {
        let members: Vec<usize> = (0..k).filter(|j| mask & (1 << j) != 0).collect();
        let Some((mean, var)) = subset_moments(speeds, assignment, mask) else {
            continue;
        };
        if !(var < reference.variance) {
            continue;
        }
        let dist = (mean - reference.mean).abs();
        let better = match &best {
            None => true,
            Some((d, m)) => dist < *d || (dist == *d && (members.len(), &members) < (m.len(), m)),
        };
        if better {
            best = Some((dist, members));
        }
    }
    Ok(match best {
        Some((_, subset)) => (subset, false),
        None => (vec![lowest_index(component_means)], true),
    })
}

fn lowest_index(values: &[f64]) -> usize {
    let mut low = 0;
    for (j, &v) in values.iter().enumerate().skip(1) {
        if v < values[low] {
            low = j;
        }
    }
    low
}

/// Valid-step speeds paired with their decoded component.
fn decoded_speeds<T: Scalar>(params: &HmmParams<T>, obs: &[ObservationSequence<T>]) -> Result<(Vec<f64>, Vec<usize>)> {
    let mut speeds = Vec::new();
    let mut assignment = Vec::new();
    for seq in obs {
        let path = viterbi(seq, params)?;
        for (t, s) in path.states.iter().enumerate() {
            if let (true, Some(c)) = (seq.is_valid(t), s) {
                speeds.push(seq.get(t)[0].to_f64_lossy());
                assignment.push(*c);
            }
        }
    }
    Ok((speeds, assignment))
}

fn speed_means<T: Scalar>(params: &HmmParams<T>) -> Vec<f64> {
    params.components().iter().map(|c| c.mean[0].to_f64_lossy()).collect()
}

/// Decoded-speed mean and population variance of the 2-component fit's
/// low-speed component (lowest speed mean; lower index on ties).
pub fn low_speed_reference<T: Scalar>(model2: &FittedModel<T>, obs: &[ObservationSequence<T>]) -> Result<ReferenceSummary> {
    let params = model2.params()?;
    if params.k() != 2 {
        return Err(Error::InvalidParams(format!("reference fit must have K = 2, got {}", params.k())));
    }
    let component = lowest_index(&speed_means(params));
    let (speeds, assignment) = decoded_speeds(params, obs)?;
    let (mean, variance) = subset_moments(&speeds, &assignment, 1 << component).ok_or(Error::EmptyReferenceComponent)?;
    Ok(ReferenceSummary { component, mean, variance })
}

/// Labels the components of `model_k` using the reference from `model2`,
/// both evaluated on `obs`.
pub fn label_components<T: Scalar>(
    model_k: &FittedModel<T>,
    model2: &FittedModel<T>,
    obs: &[ObservationSequence<T>],
) -> Result<LabelMap> {
    let params = model_k.params()?;
    if params.k() < 2 {
        return Err(Error::SingleComponent);
    }
    let reference = low_speed_reference(model2, obs)?;
    let (speeds, assignment) = decoded_speeds(params, obs)?;
    let (subset, fallback) = choose_fishing_subset(&speeds, &assignment, params.k(), &reference, &speed_means(params))?;
    Ok(LabelMap::from_subset(params.k(), subset, reference, fallback))
}

/// Replaces component indices by their activity; unestimated steps pass through.
pub fn apply_labels(states: &StateSequence, labels: &LabelMap) -> Result<ActivitySequence> {
    states
        .states
        .iter()
        .map(|s| match s {
            None => Ok(Activity::Unestimated),
            Some(c) => labels.activities.get(*c).copied().ok_or(Error::UnknownComponent(*c)),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hmm::DecodeMethod;
    use vmsfish_oracle::{best_fishing_subset, masked_moments};

    fn reference(mean: f64, variance: f64) -> ReferenceSummary {
        ReferenceSummary { component: 0, mean, variance }
    }

    /// Speeds giving subset {0} (mean 2.9, var 0.5) and {0, 2} (mean 3.1, var 0.8).
    fn constructed() -> (Vec<f64>, Vec<usize>) {
        let s = 0.5f64.sqrt();
        let v3 = 1.02f64.sqrt();
        (
            vec![2.9 - s, 2.9 + s, 9.0, 11.0, 3.3 - v3, 3.3 + v3],
            vec![0, 0, 1, 1, 2, 2],
        )
    }

    #[test]
    fn constructed_subsets_have_stated_moments() {
        let (speeds, asg) = constructed();
        let (m, v) = masked_moments(&speeds, |i| asg[i] == 0).unwrap();
        assert!((m - 2.9).abs() < 1e-12 && (v - 0.5).abs() < 1e-12);
        let (m, v) = masked_moments(&speeds, |i| asg[i] != 1).unwrap();
        assert!((m - 3.1).abs() < 1e-12 && (v - 0.8).abs() < 1e-12);
    }

    #[test]
    fn closer_mean_wins_among_candidates() {
        let (speeds, asg) = constructed();
        let r = reference(3.05, 1.0);
        let means = [2.9, 10.0, 3.3];
        let (subset, fallback) = choose_fishing_subset(&speeds, &asg, 3, &r, &means).unwrap();
        assert_eq!(subset, vec![0, 2]);
        assert!(!fallback);
        let oracle = best_fishing_subset(&speeds, &asg, 3, 3.05, 1.0, &means);
        assert_eq!(oracle.subset, subset);
    }

    #[test]
    fn fallback_when_no_subset_reduces_variance() {
        let (speeds, asg) = constructed();
        let r = reference(3.05, 0.1);
        let means = [2.9, 10.0, 3.3];
        let (subset, fallback) = choose_fishing_subset(&speeds, &asg, 3, &r, &means).unwrap();
        assert_eq!((subset.clone(), fallback), (vec![0], true));
        let oracle = best_fishing_subset(&speeds, &asg, 3, 3.05, 0.1, &means);
        assert!(oracle.fallback);
        assert_eq!(oracle.subset, subset);
    }

    #[test]
    fn equidistant_singletons_prefer_lower_index() {
        // {0} mean 2.75 and {1} mean 3.25 are both 0.25 from m₂ = 3; their union is too dispersed
        let speeds = vec![2.5, 3.0, 3.0, 3.5, 20.0, 30.0];
        let asg = vec![0, 0, 1, 1, 2, 2];
        let means = [2.75, 3.25, 25.0];
        let (subset, fallback) = choose_fishing_subset(&speeds, &asg, 3, &reference(3.0, 0.1), &means).unwrap();
        assert_eq!((subset, fallback), (vec![0], false));
    }

    #[test]
    fn matches_oracle_on_dyadic_instances() {
        // Quarter-knot speeds make exact distance ties common
        let mut rng = vmsfish_oracle::Lcg::new(7);
        for _ in 0..400 {
            let k = 2 + rng.below(3);
            let n = 1 + rng.below(12);
            let speeds: Vec<f64> = (0..n).map(|_| rng.below(40) as f64 * 0.25).collect();
            let asg: Vec<usize> = (0..n).map(|_| rng.below(k)).collect();
            let means: Vec<f64> = (0..k).map(|_| rng.below(40) as f64 * 0.25).collect();
            let m2 = rng.below(40) as f64 * 0.25;
            let v2 = rng.below(16) as f64 * 0.25;
            let (subset, fallback) = choose_fishing_subset(&speeds, &asg, k, &reference(m2, v2), &means).unwrap();
            let oracle = best_fishing_subset(&speeds, &asg, k, m2, v2, &means);
            assert_eq!((subset, fallback), (oracle.subset, oracle.fallback));
        }
    }

    #[test]
    fn single_component_rejected() {
        assert!(matches!(
            choose_fishing_subset(&[1.0], &[0], 1, &reference(1.0, 1.0), &[1.0]),
            Err(Error::SingleComponent)
        ));
    }

    #[test]
    fn apply_labels_examples() {
        let labels = LabelMap::from_subset(3, vec![0, 2], reference(0.0, 0.0), false);
        let states = StateSequence {
            states: vec![Some(0), Some(0), Some(2), Some(1)],
            decoded_by: DecodeMethod::Viterbi,
        };
        use Activity::*;
        assert_eq!(apply_labels(&states, &labels).unwrap(), vec![Fishing, Fishing, Fishing, Steaming]);
        let none = StateSequence::unestimated(3, DecodeMethod::Viterbi);
        assert_eq!(apply_labels(&none, &labels).unwrap(), vec![Unestimated; 3]);
        let empty = StateSequence::unestimated(0, DecodeMethod::Viterbi);
        assert!(apply_labels(&empty, &labels).unwrap().is_empty());
        let bad = StateSequence { states: vec![Some(3)], decoded_by: DecodeMethod::Viterbi };
        assert!(matches!(apply_labels(&bad, &labels), Err(Error::UnknownComponent(3))));
    }
}
