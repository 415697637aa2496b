//! Per-unit fitting and per-trip classification shared by evaluation and the CLI.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use crate::activity::{Activity, ActivitySequence};
use crate::competitors::{
    dmarp_fit, dmarp_viterbi, estimate_thresholds, polar_speeds, threshold_classify, DmarpConfig, DmarpParams, RhoMode,
    ThresholdConfig,
};
use crate::error::{Error, Result};
use crate::hmm::{em_fit, posterior_decode, viterbi, DecodeMethod, EmConfig, HmmParams, ObservationSequence};
use crate::labelling::{apply_labels, label_components, LabelMap};
use crate::simulator::read_step_activities;
use crate::trajectory::{derive_kinematics, TIMESTAMP_FORMAT, KinematicOptions, KinematicSeries, ObservationVariant, Trip};

/// How trips are pooled into fitting units.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum GroupingMode {
    AllData,
    PerVessel,
    PerTrip,
}

impl GroupingMode {
    pub const ALL: [GroupingMode; 3] = [GroupingMode::AllData, GroupingMode::PerVessel, GroupingMode::PerTrip];

    pub fn as_str(self) -> &'static str {
        match self {
            GroupingMode::AllData => "all",
            GroupingMode::PerVessel => "vessel",
            GroupingMode::PerTrip => "trip",
        }
    }

    /// Unit a trip belongs to.
    pub fn unit_id(self, trip: &Trip) -> String {
        match self {
            GroupingMode::AllData => "all".into(),
            GroupingMode::PerVessel => trip.vessel_id().to_string(),
            GroupingMode::PerTrip => trip.trip_id().to_string(),
        }
    }

    /// Units in key order, each with the indices of its trips (input order).
    pub fn units(self, trips: &[Trip]) -> Vec<(String, Vec<usize>)> {
        let mut map: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (i, t) in trips.iter().enumerate() {
            map.entry(self.unit_id(t)).or_default().push(i);
        }
        map.into_iter().collect()
    }
}

impl fmt::Display for GroupingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GroupingMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "all" | "alldata" | "all-data" => Ok(GroupingMode::AllData),
            "vessel" | "pervessel" | "per-vessel" => Ok(GroupingMode::PerVessel),
            "trip" | "pertrip" | "per-trip" => Ok(GroupingMode::PerTrip),
            other => Err(Error::Config(format!("unknown grouping `{other}` (expected all, vessel or trip)"))),
        }
    }
}

impl FromStr for ObservationVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "speed" => Ok(ObservationVariant::Speed),
            "speed-angular" | "speed+angular" => Ok(ObservationVariant::SpeedAngular),
            other => Err(Error::Config(format!("unknown variant `{other}` (expected speed or speed-angular)"))),
        }
    }
}

/// A classification method with its settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    Dmkmg { k: usize, variant: ObservationVariant },
    /// Thresholds estimated per unit unless given.
    Threshold { manual: Option<ThresholdConfig> },
    Dmarp,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Dmkmg { .. } => "dmkmg",
            Method::Threshold { .. } => "threshold",
            Method::Dmarp => "dmarp",
        }
    }

    /// Number of hidden states, when the method has any.
    pub fn k(&self) -> Option<usize> {
        match self {
            Method::Dmkmg { k, .. } => Some(*k),
            Method::Threshold { .. } => None,
            Method::Dmarp => Some(2),
        }
    }

    /// Builds a method from its name with the shared settings.
    pub fn parse(name: &str, k: usize, variant: ObservationVariant, manual: Option<ThresholdConfig>) -> Result<Self> {
        match name.trim().to_ascii_lowercase().as_str() {
            "dmkmg" => {
                if k < 2 {
                    return Err(Error::Config(format!("K must be at least 2 for labelling, got {k}")));
                }
                Ok(Method::Dmkmg { k, variant })
            }
            "threshold" | "vmstools" => Ok(Method::Threshold { manual }),
            "dmarp" => Ok(Method::Dmarp),
            other => Err(Error::UnknownMethod(other.to_string())),
        }
    }
}

/// Settings shared by every method.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub kinematics: KinematicOptions,
    pub em: EmConfig<f64>,
    pub rho_mode: RhoMode<f64>,
    pub decode: DecodeMethod,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            kinematics: KinematicOptions::default(),
            em: EmConfig::default(),
            rho_mode: RhoMode::Shared,
            decode: DecodeMethod::Viterbi,
        }
    }
}

/// A fitted classifier for one unit.
#[derive(Debug, Clone, PartialEq)]
pub enum ActivityModel {
    Dmkmg {
        params: HmmParams<f64>,
        labels: LabelMap,
        variant: ObservationVariant,
    },
    Threshold(ThresholdConfig),
    Dmarp(DmarpParams<f64>),
}

impl ActivityModel {
    pub fn method_name(&self) -> &'static str {
        match self {
            ActivityModel::Dmkmg { .. } => "dmkmg",
            ActivityModel::Threshold(_) => "threshold",
            ActivityModel::Dmarp(_) => "dmarp",
        }
    }

    /// Errors when a DMKMG model was fitted on a different observation variant.
    pub fn check_variant(&self, variant: ObservationVariant) -> Result<()> {
        match self {
            ActivityModel::Dmkmg { variant: v, .. } if *v != variant => Err(Error::DimensionMismatch {
                expected: variant.dim(),
                found: v.dim(),
            }),
            _ => Ok(()),
        }
    }
}

/// Outcome of fitting one unit. A failed fit has no model.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitFit {
    pub unit_id: String,
    pub model: Option<ActivityModel>,
    pub log_likelihood: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub failure: Option<String>,
}

impl UnitFit {
    fn failed(unit_id: &str, reason: String) -> Self {
        Self {
            unit_id: unit_id.to_string(),
            model: None,
            log_likelihood: None,
            iterations: 0,
            converged: false,
            failure: Some(reason),
        }
    }
}

/// Kinematics per trip; trips too short or without a usable interval give `None`.
pub fn prepare_kinematics(trips: &[Trip], opts: &KinematicOptions) -> Vec<Option<KinematicSeries>> {
    use rayon::prelude::*;
    trips.par_iter().map(|t| derive_kinematics(t, opts).ok()).collect()
}

fn dmkmg_fit(unit_id: &str, obs: &[ObservationSequence<f64>], k: usize, variant: ObservationVariant, config: &PipelineConfig, seed: u64) -> Result<UnitFit> {
    let fit_k = em_fit(obs, k, &config.em, seed)?;
    if let Some(f) = &fit_k.failure {
        return Ok(UnitFit::failed(unit_id, f.to_string()));
    }
    let fit_2 = if k == 2 { fit_k.clone() } else { em_fit(obs, 2, &config.em, seed)? };
    if let Some(f) = &fit_2.failure {
        return Ok(UnitFit::failed(unit_id, format!("reference fit: {f}")));
    }
    let labels = match label_components(&fit_k, &fit_2, obs) {
        Ok(l) => l,
        Err(e) => return Ok(UnitFit::failed(unit_id, e.to_string())),
    };
    Ok(UnitFit {
        unit_id: unit_id.to_string(),
        log_likelihood: Some(fit_k.log_likelihood),
        iterations: fit_k.iterations,
        converged: fit_k.converged,
        model: Some(ActivityModel::Dmkmg {
            params: fit_k.params.expect("successful fit has parameters"),
            labels,
            variant,
        }),
        failure: None,
    })
}

/// Fits `method` on the given trips' kinematics (trips without kinematics
/// are skipped). Fitting failures are reported in the result, not as errors.
pub fn fit_unit(unit_id: &str, method: &Method, kins: &[&KinematicSeries], config: &PipelineConfig, seed: u64) -> Result<UnitFit> {
    if kins.is_empty() {
        return Ok(UnitFit::failed(unit_id, "no usable trips".into()));
    }
    match method {
        Method::Dmkmg { k, variant } => {
            if *k < 2 {
                return Err(Error::SingleComponent);
            }
            let obs: Vec<ObservationSequence<f64>> = kins.iter().map(|s| s.observations(*variant)).collect();
            dmkmg_fit(unit_id, &obs, *k, *variant, config, seed)
        }
        Method::Threshold { manual } => {
            let cfg = match manual {
                Some(c) => *c,
                None => {
                    let speeds: Vec<f64> = kins
                        .iter()
                        .flat_map(|s| s.speed.iter().zip(&s.valid).filter(|(_, &ok)| ok).map(|(&v, _)| v))
                        .collect();
                    match estimate_thresholds(&speeds) {
                        Ok(c) => c,
                        Err(e) => return Ok(UnitFit::failed(unit_id, e.to_string())),
                    }
                }
            };
            Ok(UnitFit {
                unit_id: unit_id.to_string(),
                model: Some(ActivityModel::Threshold(cfg)),
                log_likelihood: None,
                iterations: 0,
                converged: true,
                failure: None,
            })
        }
        Method::Dmarp => {
            let obs: Vec<ObservationSequence<f64>> = kins
                .iter()
                .filter_map(|s| polar_speeds(s).ok())
                .map(|p| p.observations())
                .collect();
            let dcfg = DmarpConfig { em: config.em, rho_mode: config.rho_mode };
            let fit = dmarp_fit(&obs, &dcfg, seed)?;
            match (fit.params, fit.failure) {
                (Some(p), None) => Ok(UnitFit {
                    unit_id: unit_id.to_string(),
                    model: Some(ActivityModel::Dmarp(p)),
                    log_likelihood: Some(fit.log_likelihood),
                    iterations: fit.iterations,
                    converged: fit.converged,
                    failure: None,
                }),
                (_, f) => Ok(UnitFit::failed(unit_id, f.map(|f| f.to_string()).unwrap_or_default())),
            }
        }
    }
}

/// Activities and decoded components of one trip.
#[derive(Debug, Clone, PartialEq)]
pub struct Classified {
    pub activities: ActivitySequence,
    /// Hidden state per step (none for the threshold method or unestimated steps).
    pub components: Vec<Option<usize>>,
}

impl Classified {
    pub fn unestimated(n: usize) -> Self {
        Self {
            activities: vec![Activity::Unestimated; n],
            components: vec![None; n],
        }
    }
}

/// Classifies one trip of `n_intervals` steps. Without a model or
/// kinematics every step is Unestimated; a decoding failure likewise.
pub fn classify_trip(model: Option<&ActivityModel>, kin: Option<&KinematicSeries>, n_intervals: usize, decode: DecodeMethod) -> Result<Classified> {
    let (Some(model), Some(kin)) = (model, kin) else {
        return Ok(Classified::unestimated(n_intervals));
    };
    match model {
        ActivityModel::Dmkmg { params, labels, variant } => {
            if params.dim() != variant.dim() {
                return Err(Error::DimensionMismatch { expected: variant.dim(), found: params.dim() });
            }
            let obs = kin.observations::<f64>(*variant);
            let decoded = match decode {
                DecodeMethod::Viterbi => viterbi(&obs, params),
                DecodeMethod::PosteriorMode => posterior_decode(&obs, params),
            };
            let Ok(states) = decoded else {
                return Ok(Classified::unestimated(n_intervals));
            };
            Ok(Classified {
                activities: apply_labels(&states, labels)?,
                components: states.states,
            })
        }
        ActivityModel::Threshold(cfg) => Ok(Classified {
            activities: threshold_classify(&kin.speed, &kin.valid, cfg),
            components: vec![None; n_intervals],
        }),
        ActivityModel::Dmarp(params) => {
            let Ok(polar) = polar_speeds(kin) else {
                return Ok(Classified::unestimated(n_intervals));
            };
            let Ok(states) = dmarp_viterbi(params, &polar.observations()) else {
                return Ok(Classified::unestimated(n_intervals));
            };
            let fishing = params.fishing_state();
            Ok(Classified {
                activities: states
                    .states
                    .iter()
                    .map(|s| match s {
                        Some(j) if *j == fishing => Activity::Fishing,
                        Some(_) => Activity::Steaming,
                        None => Activity::Unestimated,
                    })
                    .collect(),
                components: states.states,
            })
        }
    }
}

/// Fit and classification results of one unit.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitResult {
    pub fit: UnitFit,
    /// Trip indices of the unit with their classification.
    pub trips: Vec<(usize, Classified)>,
}

/// Groups trips, fits each unit in parallel and classifies its trips with
/// the unit's model. Results are in unit-key order.
pub fn fit_and_classify(
    trips: &[Trip],
    kins: &[Option<KinematicSeries>],
    method: &Method,
    grouping: GroupingMode,
    config: &PipelineConfig,
    seed: u64,
) -> Result<Vec<UnitResult>> {
    use rayon::prelude::*;
    grouping
        .units(trips)
        .into_par_iter()
        .map(|(unit_id, members)| {
            let unit_kins: Vec<&KinematicSeries> = members.iter().filter_map(|&i| kins[i].as_ref()).collect();
            let fit = fit_unit(&unit_id, method, &unit_kins, config, seed)?;
            let classified = members
                .iter()
                .map(|&i| {
                    let c = classify_trip(fit.model.as_ref(), kins[i].as_ref(), trips[i].n_intervals(), config.decode)?;
                    Ok((i, c))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(UnitResult { fit, trips: classified })
        })
        .collect()
}

pub const CLASSIFIED_HEADER: [&str; 6] = ["vessel_id", "trip_id", "step_index", "timestamp", "activity", "component"];

/// Writes one row per interval; the timestamp is the interval's start ping
/// and the component is 1-based (empty when there is none).
pub fn write_classified_csv<W: Write>(out: W, trips: &[Trip], classified: &[Classified]) -> Result<()> {
    if trips.len() != classified.len() {
        return Err(Error::LengthMismatch { left: trips.len(), right: classified.len() });
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CLASSIFIED_HEADER)?;
    for (trip, c) in trips.iter().zip(classified) {
        if c.activities.len() != trip.n_intervals() {
            return Err(Error::LengthMismatch { left: trip.n_intervals(), right: c.activities.len() });
        }
        for (t, (a, comp)) in c.activities.iter().zip(&c.components).enumerate() {
            w.write_record([
                trip.vessel_id(),
                trip.trip_id(),
                &t.to_string(),
                &trip.pings()[t].timestamp.format(TIMESTAMP_FORMAT).to_string(),
                a.as_str(),
                &comp.map(|j| (j + 1).to_string()).unwrap_or_default(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Activity sequences of a classified CSV keyed by (vessel_id, trip_id).
pub fn read_classified_csv<R: Read>(input: R) -> Result<BTreeMap<(String, String), ActivitySequence>> {
    read_step_activities(input, true)
}
