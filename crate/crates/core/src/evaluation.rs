//! Accuracy of estimated activity against ground truth.
//!
//! Plain rates divide by the number of estimated steps; adjusted rates
//! divide by all steps and so count Unestimated steps as errors. Scores are
//! computed once over the concatenation of all trips.

use std::io::Write;
use std::time::Instant;

use crate::activity::Activity;
use crate::error::{Error, Result};
use crate::pipeline::{fit_and_classify, prepare_kinematics, GroupingMode, Method, PipelineConfig};
use crate::trajectory::{ObservationVariant, Trip};

/// Raw step counts behind an [`AccuracyReport`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ConfusionCounts {
    pub matched: usize,
    /// True Fishing estimated as Steaming.
    pub f_as_s: usize,
    /// True Steaming estimated as Fishing.
    pub s_as_f: usize,
    pub unestimated: usize,
    pub total: usize,
}

impl ConfusionCounts {
    pub fn estimated(&self) -> usize {
        self.total - self.unestimated
    }
}

impl std::ops::Add for ConfusionCounts {
    type Output = Self;

    fn add(self, o: Self) -> Self {
        Self {
            matched: self.matched + o.matched,
            f_as_s: self.f_as_s + o.f_as_s,
            s_as_f: self.s_as_f + o.s_as_f,
            unestimated: self.unestimated + o.unestimated,
            total: self.total + o.total,
        }
    }
}

/// The four accuracy statistics, in percent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AccuracyReport {
    pub global_match: f64,
    pub f_as_s: f64,
    pub s_as_f: f64,
    pub unestimated: f64,
    pub adjusted_global_match: f64,
    pub adjusted_f_as_s: f64,
    pub adjusted_s_as_f: f64,
    pub counts: ConfusionCounts,
    /// No step was estimated; the plain rates are reported as 0.
    pub plain_undefined: bool,
}

impl AccuracyReport {
    pub fn from_counts(c: ConfusionCounts) -> Self {
        let pct = |num: usize, den: usize| if den == 0 { 0.0 } else { 100.0 * num as f64 / den as f64 };
        let est = c.estimated();
        Self {
            global_match: pct(c.matched, est),
            f_as_s: pct(c.f_as_s, est),
            s_as_f: pct(c.s_as_f, est),
            unestimated: pct(c.unestimated, c.total),
            adjusted_global_match: pct(c.matched, c.total),
            adjusted_f_as_s: pct(c.f_as_s, c.total),
            adjusted_s_as_f: pct(c.s_as_f, c.total),
            counts: c,
            plain_undefined: est == 0,
        }
    }
}

/// Step counts of `est` against `truth`.
pub fn confusion_counts(est: &[Activity], truth: &[Activity]) -> Result<ConfusionCounts> {
    if est.len() != truth.len() {
        return Err(Error::LengthMismatch { left: est.len(), right: truth.len() });
    }
    let mut c = ConfusionCounts { total: est.len(), ..Default::default() };
    for (t, (&e, &y)) in est.iter().zip(truth).enumerate() {
        match (e, y) {
            (_, Activity::Unestimated) => return Err(Error::UnestimatedTruth(t)),
            (Activity::Unestimated, _) => c.unestimated += 1,
            (e, y) if e == y => c.matched += 1,
            (Activity::Steaming, Activity::Fishing) => c.f_as_s += 1,
            _ => c.s_as_f += 1,
        }
    }
    Ok(c)
}

pub fn confusion_stats(est: &[Activity], truth: &[Activity]) -> Result<AccuracyReport> {
    confusion_counts(est, truth).map(AccuracyReport::from_counts)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub method: Method,
    pub grouping: GroupingMode,
    pub report: AccuracyReport,
    pub wall_seconds: f64,
    pub n_units: usize,
    pub failed_units: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ComparisonTable {
    pub rows: Vec<ComparisonRow>,
}

/// Trips with their ground truth, one activity per interval.
#[derive(Debug, Clone, Copy)]
pub struct LabelledDataset<'a> {
    pub trips: &'a [Trip],
    pub truth: &'a [Vec<Activity>],
}

impl LabelledDataset<'_> {
    fn check(&self) -> Result<()> {
        if self.trips.len() != self.truth.len() {
            return Err(Error::LengthMismatch { left: self.trips.len(), right: self.truth.len() });
        }
        for (trip, truth) in self.trips.iter().zip(self.truth) {
            if truth.len() != trip.n_intervals() {
                return Err(Error::LengthMismatch { left: trip.n_intervals(), right: truth.len() });
            }
            if let Some(t) = truth.iter().position(|a| !a.is_estimated()) {
                return Err(Error::UnestimatedTruth(t));
            }
        }
        Ok(())
    }
}

/// Fits, classifies and scores every method under one grouping mode.
pub fn run_comparison(
    data: LabelledDataset<'_>,
    methods: &[Method],
    grouping: GroupingMode,
    config: &PipelineConfig,
    seed: u64,
) -> Result<ComparisonTable> {
    data.check()?;
    let kins = prepare_kinematics(data.trips, &config.kinematics);
    let mut rows = Vec::with_capacity(methods.len());
    for method in methods {
        let start = Instant::now();
        let units = fit_and_classify(data.trips, &kins, method, grouping, config, seed)?;
        let mut estimates = vec![None; data.trips.len()];
        for u in &units {
            for (i, c) in &u.trips {
                estimates[*i] = Some(c.activities.clone());
            }
        }
        let mut counts = ConfusionCounts::default();
        for (est, truth) in estimates.iter().zip(data.truth) {
            let est = est.as_ref().expect("every trip belongs to a unit");
            counts = counts + confusion_counts(est, truth)?;
        }
        rows.push(ComparisonRow {
            method: *method,
            grouping,
            report: AccuracyReport::from_counts(counts),
            wall_seconds: start.elapsed().as_secs_f64(),
            n_units: units.len(),
            failed_units: units.iter().filter(|u| u.fit.model.is_none()).count(),
        });
    }
    Ok(ComparisonTable { rows })
}

#[derive(Debug, Clone, PartialEq)]
pub struct KSweep {
    pub table: ComparisonTable,
    pub best_k: usize,
}

/// DMKMG for every K in `k_range`; the best K maximises plain global match,
/// ties going to the smaller K.
pub fn sweep_k(
    data: LabelledDataset<'_>,
    k_range: &[usize],
    variant: ObservationVariant,
    grouping: GroupingMode,
    config: &PipelineConfig,
    seed: u64,
) -> Result<KSweep> {
    if k_range.is_empty() {
        return Err(Error::Config("empty K range".into()));
    }
    if let Some(&k) = k_range.iter().find(|&&k| k < 2) {
        return Err(Error::Config(format!("K must be at least 2, got {k}")));
    }
    let mut ks = k_range.to_vec();
    ks.sort_unstable();
    ks.dedup();
    let methods: Vec<Method> = ks.iter().map(|&k| Method::Dmkmg { k, variant }).collect();
    let table = run_comparison(data, &methods, grouping, config, seed)?;
    let best_k = best_k(&table);
    Ok(KSweep { table, best_k })
}

fn best_k(table: &ComparisonTable) -> usize {
    let mut best: Option<(usize, f64)> = None;
    for row in &table.rows {
        let k = row.method.k().unwrap_or(0);
        let score = row.report.global_match;
        if best.is_none_or(|(bk, bs)| score > bs || (score == bs && k < bk)) {
            best = Some((k, score));
        }
    }
    best.map(|(k, _)| k).unwrap_or(0)
}

pub const COMPARISON_HEADER: [&str; 9] = [
    "method",
    "grouping",
    "K",
    "global_match",
    "f_as_s",
    "s_as_f",
    "unestimated",
    "adj_global_match",
    "wall_s",
];

/// Writes the comparison table as CSV. With `include_wall_time = false`
/// the wall-time column is written as 0, so repeated runs compare equal.
pub fn write_comparison_csv<W: Write>(out: W, table: &ComparisonTable, include_wall_time: bool) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(COMPARISON_HEADER)?;
    for r in &table.rows {
        let f = |v: f64| format!("{v:.6}");
        let wall = if include_wall_time { format!("{:.3}", r.wall_seconds) } else { "0".into() };
        w.write_record([
            r.method.name().to_string(),
            r.grouping.as_str().to_string(),
            r.method.k().map(|k| k.to_string()).unwrap_or_default(),
            f(r.report.global_match),
            f(r.report.f_as_s),
            f(r.report.s_as_f),
            f(r.report.unestimated),
            f(r.report.adjusted_global_match),
            wall,
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Aligned plain-text rendering, one line per row.
pub fn format_comparison(table: &ComparisonTable, include_wall_time: bool) -> String {
    let mut s = format!(
        "{:<10} {:<8} {:>3} {:>13} {:>9} {:>9} {:>12} {:>10}\n",
        "method", "grouping", "K", "global_match", "f_as_s", "s_as_f", "unestimated", "wall_s"
    );
    for r in &table.rows {
        let gm = format!("{:.2} ({:.2})", r.report.global_match, r.report.adjusted_global_match);
        let wall = if include_wall_time { format!("{:.2}", r.wall_seconds) } else { "-".into() };
        s.push_str(&format!(
            "{:<10} {:<8} {:>3} {:>13} {:>9.2} {:>9.2} {:>12.2} {:>10}\n",
            r.method.name(),
            r.grouping.as_str(),
            r.method.k().map(|k| k.to_string()).unwrap_or_else(|| "-".into()),
            gm,
            r.report.f_as_s,
            r.report.s_as_f,
            r.report.unestimated,
            wall
        ));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use Activity::{Fishing as F, Steaming as S, Unestimated as U};

    #[test]
    fn perfect_agreement() {
        let truth: Vec<Activity> = (0..50).map(|i| if i % 3 == 0 { F } else { S }).collect();
        let r = confusion_stats(&truth, &truth).unwrap();
        assert_eq!((r.global_match, r.f_as_s, r.s_as_f, r.unestimated), (100.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn ten_step_example() {
        let truth = [F, F, F, S, S, S, F, S, S, F];
        let est = [F, F, F, S, S, S, S, F, F, U];
        let r = confusion_stats(&est, &truth).unwrap();
        assert_eq!(r.counts, ConfusionCounts { matched: 6, f_as_s: 1, s_as_f: 2, unestimated: 1, total: 10 });
        assert!((r.global_match - 200.0 / 3.0).abs() < 1e-12);
        assert!((r.adjusted_global_match - 60.0).abs() < 1e-12);
        assert!((r.f_as_s - 100.0 / 9.0).abs() < 1e-12);
        assert!((r.s_as_f - 200.0 / 9.0).abs() < 1e-12);
        assert!((r.unestimated - 10.0).abs() < 1e-12);
    }

    #[test]
    fn all_unestimated_flags_plain_rates() {
        let r = confusion_stats(&[U, U, U], &[F, S, F]).unwrap();
        assert_eq!(r.unestimated, 100.0);
        assert_eq!(r.adjusted_global_match, 0.0);
        assert_eq!(r.global_match, 0.0);
        assert!(r.plain_undefined);
    }

    #[test]
    fn errors() {
        assert!(matches!(confusion_stats(&[F], &[F, S]), Err(Error::LengthMismatch { .. })));
        assert!(matches!(confusion_stats(&[F, F], &[F, U]), Err(Error::UnestimatedTruth(1))));
    }

    #[test]
    fn best_k_prefers_smaller_on_ties() {
        let row = |k: usize, gm: f64| ComparisonRow {
            method: Method::Dmkmg { k, variant: ObservationVariant::Speed },
            grouping: GroupingMode::AllData,
            report: AccuracyReport { global_match: gm, ..AccuracyReport::from_counts(ConfusionCounts::default()) },
            wall_seconds: 0.0,
            n_units: 1,
            failed_units: 0,
        };
        assert_eq!(best_k(&ComparisonTable { rows: vec![row(2, 90.0)] }), 2);
        assert_eq!(best_k(&ComparisonTable { rows: vec![row(2, 90.0), row(3, 90.0)] }), 2);
        assert_eq!(best_k(&ComparisonTable { rows: vec![row(3, 90.0), row(2, 90.0)] }), 2);
        assert_eq!(best_k(&ComparisonTable { rows: vec![row(2, 90.0), row(3, 91.0)] }), 3);
    }
}
