//! End-to-end labelling on constructed fits. The second observation
//! coordinate is a tag that pins every step's Viterbi assignment, so the
//! decoded speed sets are known exactly and can be handed to the oracle.

use vmsfish::hmm::{FittedModel, GaussianComponent, HmmParams, MarkovChain, ObservationSequence};
use vmsfish::labelling::label_components;
use vmsfish::linalg::SymMatrix;
use vmsfish::Activity;
use vmsfish_oracle::{best_fishing_subset, masked_moments, Lcg};

const TAG_SPACING: f64 = 10.0;
/// Speed variance large enough that the tag alone decides the decoded state.
const SPEED_VAR: f64 = 1e6;

fn fitted(speed_means: &[f64], tag_means: &[f64]) -> FittedModel<f64> {
    let k = speed_means.len();
    let components = speed_means
        .iter()
        .zip(tag_means)
        .map(|(&m, &t)| GaussianComponent { mean: vec![m, t], cov: SymMatrix::diagonal(&[SPEED_VAR, 1.0]) })
        .collect();
    let uniform = 1.0 / k as f64;
    let chain = MarkovChain::new(vec![uniform; k], vec![uniform; k * k]).unwrap();
    FittedModel {
        params: Some(HmmParams::new(chain, components).unwrap()),
        log_likelihood: 0.0,
        iterations: 1,
        converged: true,
        posteriors: Vec::new(),
        failure: None,
        restarts: Vec::new(),
    }
}

/// Model-K components sit on tags 0, 10, 20, ...; the reference model's low
/// component covers component 0 alone (`wide = false`) or components 0 and 1.
fn instance(speeds: &[f64], assignment: &[usize], model_means: &[f64], wide: bool) -> (FittedModel<f64>, FittedModel<f64>, ObservationSequence<f64>) {
    let k = model_means.len();
    let tags: Vec<f64> = (0..k).map(|j| TAG_SPACING * j as f64).collect();
    let model_k = fitted(model_means, &tags);
    let reference_tags = if wide { [5.0, 25.0] } else { [0.0, 15.0] };
    let model2 = fitted(&[3.0, 9.0], &reference_tags);
    let data: Vec<f64> = speeds.iter().zip(assignment).flat_map(|(&v, &c)| [v, tags[c]]).collect();
    let obs = ObservationSequence::new(2, data, vec![true; speeds.len()]).unwrap();
    (model_k, model2, obs)
}

fn reference_moments(speeds: &[f64], assignment: &[usize], wide: bool) -> (f64, f64) {
    masked_moments(speeds, |i| assignment[i] == 0 || (wide && assignment[i] == 1)).unwrap()
}

fn fishing_components(activities: &[Activity]) -> Vec<usize> {
    activities.iter().enumerate().filter(|(_, a)| **a == Activity::Fishing).map(|(j, _)| j).collect()
}

#[test]
fn selects_enumeration_optimal_subset() {
    // {0}: mean 2.9, var 0.5; {0,2}: mean 3.1, var 0.8; reference {0,1}: mean 3.05, var 1
    let (a, b, c) = (0.5f64.sqrt(), 1.455f64.sqrt(), 1.02f64.sqrt());
    let speeds = [2.9 - a, 2.9 + a, 3.2 - b, 3.2 + b, 3.3 - c, 3.3 + c];
    let assignment = [0, 0, 1, 1, 2, 2];
    let (mk, m2, obs) = instance(&speeds, &assignment, &[2.9, 3.2, 3.3], true);
    let labels = label_components(&mk, &m2, &[obs]).unwrap();
    assert!((labels.reference.mean - 3.05).abs() < 1e-12);
    assert!((labels.reference.variance - 1.0).abs() < 1e-12);
    assert_eq!(labels.chosen_subset, vec![0, 2]);
    assert!(!labels.fallback);
    assert_eq!(labels.activities, vec![Activity::Fishing, Activity::Steaming, Activity::Fishing]);

    let (m, v) = reference_moments(&speeds, &assignment, true);
    let oracle = best_fishing_subset(&speeds, &assignment, 3, m, v, &[2.9, 3.2, 3.3]);
    assert_eq!(oracle.subset, labels.chosen_subset);
}

#[test]
fn tie_goes_to_lower_index() {
    // {0}: mean 2, {1}: mean 4, both zero variance and 1 knot from m₂ = 3
    let speeds = [2.0, 2.0, 4.0, 4.0, 10.0, 11.0];
    let assignment = [0, 0, 1, 1, 2, 2];
    let (mk, m2, obs) = instance(&speeds, &assignment, &[2.0, 4.0, 10.5], true);
    let labels = label_components(&mk, &m2, &[obs]).unwrap();
    assert_eq!(labels.chosen_subset, vec![0]);
    assert!(!labels.fallback);
    let oracle = best_fishing_subset(&speeds, &assignment, 3, 3.0, 1.0, &[2.0, 4.0, 10.5]);
    assert_eq!(oracle.subset, vec![0]);
}

#[test]
fn fallback_uses_lowest_model_mean() {
    // reference {0}: var 1; {1}: var 9; {2}: var 4; every union is wider
    let speeds = [2.0, 4.0, 0.0, 6.0, 10.0, 14.0];
    let assignment = [0, 0, 1, 1, 2, 2];
    let means = [5.0, 1.0, 9.0];
    let (mk, m2, obs) = instance(&speeds, &assignment, &means, false);
    let labels = label_components(&mk, &m2, &[obs]).unwrap();
    assert!(labels.fallback);
    assert_eq!(labels.chosen_subset, vec![1]);
    let oracle = best_fishing_subset(&speeds, &assignment, 3, 3.0, 1.0, &means);
    assert!(oracle.fallback);
    assert_eq!(oracle.subset, vec![1]);
}

#[test]
fn agrees_with_oracle_on_random_fits() {
    let mut rng = Lcg::new(42);
    let (mut fallbacks, mut chosen) = (0, 0);
    for case in 0..300 {
        let k = 2 + rng.below(3);
        let n = 2 * k + rng.below(20);
        // every component gets at least two steps; speeds are multiples of 1/8
        let mut assignment: Vec<usize> = (0..n).map(|i| if i < 2 * k { i / 2 } else { rng.below(k) }).collect();
        for i in (1..n).rev() {
            assignment.swap(i, rng.below(i + 1));
        }
        let speeds: Vec<f64> = (0..n).map(|_| rng.below(120) as f64 / 8.0).collect();
        let means: Vec<f64> = (0..k).map(|_| rng.range(0.0, 12.0)).collect();
        let wide = k > 2 && case % 2 == 0;
        let (mk, m2, obs) = instance(&speeds, &assignment, &means, wide);
        let labels = label_components(&mk, &m2, &[obs]).unwrap();
        let (m, v) = reference_moments(&speeds, &assignment, wide);
        let oracle = best_fishing_subset(&speeds, &assignment, k, m, v, &means);
        assert_eq!(labels.chosen_subset, oracle.subset, "case {case}");
        assert_eq!(labels.fallback, oracle.fallback, "case {case}");
        assert_eq!(fishing_components(&labels.activities), oracle.subset);
        if oracle.fallback {
            fallbacks += 1;
        } else {
            chosen += 1;
        }
    }
    assert!(fallbacks > 0 && chosen > 0, "fallback {fallbacks}, chosen {chosen}");
}
