use proptest::prelude::*;
use vmsfish::evaluation::{confusion_stats, run_comparison, sweep_k, LabelledDataset};
use vmsfish::pipeline::{GroupingMode, Method, PipelineConfig};
use vmsfish::simulator::{simulate_fleet, LabelledTrip, Scenario};
use vmsfish::trajectory::{ObservationVariant, Trip};
use vmsfish::Activity;
use vmsfish_oracle::Lcg;

use Activity::{Fishing as F, Steaming as S, Unestimated as U};

fn activity() -> impl Strategy<Value = Activity> {
    prop_oneof![Just(F), Just(S), Just(U)]
}

fn truth_activity() -> impl Strategy<Value = Activity> {
    prop_oneof![Just(F), Just(S)]
}

fn split(fleet: &[LabelledTrip]) -> (Vec<Trip>, Vec<Vec<Activity>>) {
    fleet.iter().map(|lt| (lt.trip.clone(), lt.truth.clone())).unzip()
}

fn dmkmg(k: usize) -> Method {
    Method::Dmkmg { k, variant: ObservationVariant::Speed }
}

#[test]
fn hand_built_counts() {
    // 4 F→F, 2 S→S, 1 F→S, 2 S→F, 1 F→U
    let truth = [F, F, F, F, S, S, F, S, S, F];
    let est = [F, F, F, F, S, S, S, F, F, U];
    let r = confusion_stats(&est, &truth).unwrap();
    assert_eq!((r.counts.matched, r.counts.f_as_s, r.counts.s_as_f, r.counts.unestimated, r.counts.total), (6, 1, 2, 1, 10));
    assert_eq!(r.global_match, 100.0 * 6.0 / 9.0);
    assert_eq!(r.f_as_s, 100.0 / 9.0);
    assert_eq!(r.s_as_f, 200.0 / 9.0);
    assert_eq!(r.unestimated, 10.0);
    assert_eq!(r.adjusted_global_match, 60.0);
    assert_eq!(r.adjusted_f_as_s, 10.0);
    assert_eq!(r.adjusted_s_as_f, 20.0);
}

#[test]
fn rates_over_all_steps_sum_to_100() {
    let mut rng = Lcg::new(7);
    let pick = |rng: &mut Lcg, n: usize| [F, S, U][rng.below(n)];
    for _ in 0..1000 {
        let n = 1 + rng.below(200);
        let truth: Vec<Activity> = (0..n).map(|_| pick(&mut rng, 2)).collect();
        let est: Vec<Activity> = (0..n).map(|_| pick(&mut rng, 3)).collect();
        let r = confusion_stats(&est, &truth).unwrap();
        let sum = r.adjusted_global_match + r.adjusted_f_as_s + r.adjusted_s_as_f + r.unestimated;
        assert!((sum - 100.0).abs() < 1e-9, "{sum}");
        if !r.plain_undefined {
            assert!((r.global_match + r.f_as_s + r.s_as_f - 100.0).abs() < 1e-9);
        }
        let c = r.counts;
        assert_eq!(c.matched + c.f_as_s + c.s_as_f + c.unestimated, c.total);
    }
}

proptest! {
    #[test]
    fn swapping_labels_swaps_error_rates(
        pairs in prop::collection::vec((activity(), truth_activity()), 1..100)
    ) {
        let (est, truth): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
        let a = confusion_stats(&est, &truth).unwrap();
        let est2: Vec<_> = est.iter().map(|x| x.swapped()).collect();
        let truth2: Vec<_> = truth.iter().map(|x| x.swapped()).collect();
        let b = confusion_stats(&est2, &truth2).unwrap();
        prop_assert_eq!(a.global_match, b.global_match);
        prop_assert_eq!(a.f_as_s, b.s_as_f);
        prop_assert_eq!(a.s_as_f, b.f_as_s);
        prop_assert_eq!(a.unestimated, b.unestimated);
    }
}

#[test]
fn two_state_fleet_is_classified_accurately() {
    let fleet = simulate_fleet(&Scenario::builtin("dmkmg2").unwrap(), 4, 5, 11).unwrap();
    let (trips, truth) = split(&fleet);
    let data = LabelledDataset { trips: &trips, truth: &truth };
    let table = run_comparison(data, &[dmkmg(2)], GroupingMode::AllData, &PipelineConfig::default(), 1).unwrap();
    assert_eq!(table.rows.len(), 1);
    let r = &table.rows[0].report;
    assert!(r.global_match >= 90.0, "{}", r.global_match);
    assert_eq!(r.unestimated, 0.0);
    assert!(table.rows[0].wall_seconds > 0.0);
}

#[test]
fn failed_trip_fits_are_unestimated() {
    let fleet = simulate_fleet(&Scenario::builtin("dmkmg2").unwrap(), 4, 5, 12).unwrap();
    let (mut trips, mut truth) = split(&fleet);
    // four pings leave three intervals, below the two-component floor of six
    for i in [0, 3, 7, 12, 19] {
        trips[i] = Trip::new(trips[i].vessel_id(), trips[i].trip_id(), trips[i].pings()[..4].to_vec()).unwrap();
        truth[i].truncate(3);
    }
    let short_steps = 5 * 3;
    let total: usize = truth.iter().map(Vec::len).sum();
    let data = LabelledDataset { trips: &trips, truth: &truth };
    let table = run_comparison(data, &[dmkmg(2)], GroupingMode::PerTrip, &PipelineConfig::default(), 1).unwrap();
    let row = &table.rows[0];
    assert_eq!(row.failed_units, 5);
    assert_eq!(row.report.counts.unestimated, short_steps);
    assert_eq!(row.report.unestimated, 100.0 * short_steps as f64 / total as f64);
}

#[test]
fn single_trip_grouping_modes_agree() {
    let fleet = simulate_fleet(&Scenario::builtin("dmkmg3").unwrap(), 1, 1, 5).unwrap();
    let (trips, truth) = split(&fleet);
    let data = LabelledDataset { trips: &trips, truth: &truth };
    let methods = [dmkmg(3), Method::Threshold { manual: None }, Method::Dmarp];
    let config = PipelineConfig::default();
    let all = run_comparison(data, &methods, GroupingMode::AllData, &config, 3).unwrap();
    let per_trip = run_comparison(data, &methods, GroupingMode::PerTrip, &config, 3).unwrap();
    assert_eq!(all.rows.len(), 3);
    for (a, b) in all.rows.iter().zip(&per_trip.rows) {
        assert_eq!(a.report, b.report, "{}", a.method.name());
    }
}

#[test]
fn sweep_over_single_k() {
    let fleet = simulate_fleet(&Scenario::builtin("dmkmg2").unwrap(), 2, 2, 3).unwrap();
    let (trips, truth) = split(&fleet);
    let data = LabelledDataset { trips: &trips, truth: &truth };
    let config = PipelineConfig::default();
    let sweep = sweep_k(data, &[2], ObservationVariant::Speed, GroupingMode::AllData, &config, 1).unwrap();
    assert_eq!(sweep.best_k, 2);
    assert_eq!(sweep.table.rows.len(), 1);
    assert!(sweep_k(data, &[1, 2], ObservationVariant::Speed, GroupingMode::AllData, &config, 1).is_err());
    assert!(sweep_k(data, &[], ObservationVariant::Speed, GroupingMode::AllData, &config, 1).is_err());
}

#[test]
fn mismatched_truth_is_rejected() {
    let fleet = simulate_fleet(&Scenario::builtin("dmkmg2").unwrap(), 1, 2, 3).unwrap();
    let (trips, mut truth) = split(&fleet);
    truth[1].pop();
    let data = LabelledDataset { trips: &trips, truth: &truth };
    assert!(run_comparison(data, &[dmkmg(2)], GroupingMode::AllData, &PipelineConfig::default(), 1).is_err());
}
