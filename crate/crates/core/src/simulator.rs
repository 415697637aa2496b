//! Synthetic VMS trips with known activity states.
//!
//! A scenario is a Markov chain over behavioural states. Each state carries a
//! speed law and a turning law. With independent-Gaussian emissions the
//! speed is drawn afresh every step and the turn after the step is a wrapped
//! Gaussian. With AR(1) emissions the (persistence, rotational) velocity
//! follows a state-specific AR(1) process and the turn is its polar angle.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use chrono::{DateTime, Duration, TimeZone, Utc};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::Deserialize;

use crate::activity::{Activity, ActivitySequence};
use crate::error::{Error, Result};
use crate::geo::{destination_point, normalize_bearing, KM_PER_NM};
use crate::seeding::rng_for;
use crate::trajectory::{Ping, Trip};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmissionKind {
    Gaussian,
    Ar1,
}

/// Behavioural state of a scenario.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateSpec {
    pub activity: Activity,
    /// Mean speed (Gaussian) or mean persistence speed (AR1), knots.
    pub speed_mean: f64,
    /// Speed standard deviation (Gaussian) or persistence innovation sd (AR1), knots.
    pub speed_sd: f64,
    /// Turning-angle standard deviation, degrees (Gaussian kind only).
    #[serde(default)]
    pub turn_sd: f64,
    /// AR coefficient (AR1 kind only).
    #[serde(default)]
    pub rho: f64,
    /// Rotational-speed innovation sd, knots (AR1 kind only).
    #[serde(default = "default_rotational_sd")]
    pub rotational_sd: f64,
}

fn default_rotational_sd() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub states: Vec<StateSpec>,
    /// Row-major K×K.
    pub transition: Vec<Vec<f64>>,
    pub initial: Vec<f64>,
    pub emission: EmissionKind,
    pub ping_interval_hours: f64,
    /// Each interval is perturbed by U(−jitter, jitter) minutes.
    pub ping_jitter_minutes: f64,
    /// Inclusive range of the number of intervals per trip.
    pub trip_intervals: (usize, usize),
    pub harbour: (f64, f64),
    pub start_time: DateTime<Utc>,
    /// Time in harbour between consecutive trips of a vessel.
    pub turnaround_hours: f64,
}

/// On-disk scenario layout (TOML).
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    name: Option<String>,
    emission: EmissionKind,
    transition: Vec<Vec<f64>>,
    initial: Vec<f64>,
    #[serde(default = "one")]
    ping_interval_hours: f64,
    #[serde(default)]
    ping_jitter_minutes: f64,
    trip_intervals_min: usize,
    trip_intervals_max: usize,
    harbour_lat: f64,
    harbour_lon: f64,
    #[serde(default = "default_turnaround")]
    turnaround_hours: f64,
    state: Vec<StateSpec>,
}

fn one() -> f64 {
    1.0
}

fn default_turnaround() -> f64 {
    24.0
}

fn base_time() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2009, 1, 1, 0, 0, 0).unwrap()
}

const HARBOUR: (f64, f64) = (57.7, 11.9);

impl Scenario {
    /// Names accepted by [`Scenario::builtin`].
    pub const BUILTIN: [&'static str; 3] = ["dmkmg2", "dmkmg3", "dmarp2"];

    pub fn builtin(name: &str) -> Result<Self> {
        let gaussian = |activity, speed_mean, speed_sd, turn_sd| StateSpec {
            activity,
            speed_mean,
            speed_sd,
            turn_sd,
            rho: 0.0,
            rotational_sd: 1.0,
        };
        let base = |name: &str, states, transition, initial, emission| Scenario {
            name: name.into(),
            states,
            transition,
            initial,
            emission,
            ping_interval_hours: 1.0,
            ping_jitter_minutes: 0.0,
            trip_intervals: (40, 200),
            harbour: HARBOUR,
            start_time: base_time(),
            turnaround_hours: 24.0,
        };
        let scn = match name {
            "dmkmg2" => base(
                name,
                vec![
                    gaussian(Activity::Fishing, 3.0, 1.0, 60.0),
                    gaussian(Activity::Steaming, 9.0, 1.0, 10.0),
                ],
                vec![vec![0.9, 0.1], vec![0.2, 0.8]],
                vec![0.5, 0.5],
                EmissionKind::Gaussian,
            ),
            // two slow regimes (trawling and slow transit) and fast transit
            "dmkmg3" => base(
                name,
                vec![
                    gaussian(Activity::Fishing, 3.0, 0.7, 60.0),
                    gaussian(Activity::Steaming, 6.0, 1.0, 30.0),
                    gaussian(Activity::Steaming, 10.5, 1.0, 10.0),
                ],
                vec![vec![0.9, 0.06, 0.04], vec![0.2, 0.7, 0.1], vec![0.1, 0.1, 0.8]],
                vec![0.0, 0.0, 1.0],
                EmissionKind::Gaussian,
            ),
            "dmarp2" => base(
                name,
                vec![
                    StateSpec {
                        activity: Activity::Fishing,
                        speed_mean: 3.0,
                        speed_sd: 1.0,
                        turn_sd: 0.0,
                        rho: 0.6,
                        rotational_sd: 1.0,
                    },
                    StateSpec {
                        activity: Activity::Steaming,
                        speed_mean: 10.0,
                        speed_sd: 1.0,
                        turn_sd: 0.0,
                        rho: 0.2,
                        rotational_sd: 1.0,
                    },
                ],
                vec![vec![0.9, 0.1], vec![0.2, 0.8]],
                vec![0.5, 0.5],
                EmissionKind::Ar1,
            ),
            other => {
                return Err(Error::InvalidScenario(format!(
                    "unknown built-in scenario `{other}` (expected one of {})",
                    Self::BUILTIN.join(", ")
                )))
            }
        };
        scn.validate()?;
        Ok(scn)
    }

    /// Parses a TOML scenario description.
    pub fn from_toml(text: &str) -> Result<Self> {
        let f: ScenarioFile = toml::from_str(text).map_err(|e| Error::InvalidScenario(e.to_string()))?;
        let scn = Scenario {
            name: f.name.unwrap_or_else(|| "custom".into()),
            states: f.state,
            transition: f.transition,
            initial: f.initial,
            emission: f.emission,
            ping_interval_hours: f.ping_interval_hours,
            ping_jitter_minutes: f.ping_jitter_minutes,
            trip_intervals: (f.trip_intervals_min, f.trip_intervals_max),
            harbour: (f.harbour_lat, f.harbour_lon),
            start_time: base_time(),
            turnaround_hours: f.turnaround_hours,
        };
        scn.validate()?;
        Ok(scn)
    }

    /// Same scenario with every trip exactly `n` intervals long.
    pub fn with_trip_intervals(mut self, n: usize) -> Self {
        self.trip_intervals = (n, n);
        self
    }

    pub fn k(&self) -> usize {
        self.states.len()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidScenario(m));
        let k = self.states.len();
        if k == 0 {
            return bad("no states".into());
        }
        let stochastic = |row: &[f64]| row.iter().all(|p| (0.0..=1.0).contains(p)) && (row.iter().sum::<f64>() - 1.0).abs() < 1e-9;
        if self.initial.len() != k || !stochastic(&self.initial) {
            return bad("initial distribution must have one probability per state and sum to 1".into());
        }
        if self.transition.len() != k || self.transition.iter().any(|r| r.len() != k || !stochastic(r)) {
            return bad("transition matrix must be K×K with rows summing to 1".into());
        }
        for (j, s) in self.states.iter().enumerate() {
            if s.activity == Activity::Unestimated {
                return bad(format!("state {}: activity must be fishing or steaming", j + 1));
            }
            if !(s.speed_sd > 0.0) || !s.speed_mean.is_finite() {
                return bad(format!("state {}: speed sd must be positive", j + 1));
            }
            match self.emission {
                EmissionKind::Gaussian if !(s.turn_sd >= 0.0) => {
                    return bad(format!("state {}: turning sd must be non-negative", j + 1));
                }
                EmissionKind::Ar1 if !(s.rho.abs() < 1.0) || !(s.rotational_sd > 0.0) => {
                    return bad(format!("state {}: need |rho| < 1 and positive rotational sd", j + 1));
                }
                _ => {}
            }
        }
        if !(self.ping_interval_hours > 0.0) {
            return bad("ping interval must be positive".into());
        }
        if !(self.ping_jitter_minutes >= 0.0 && self.ping_jitter_minutes < 30.0 * self.ping_interval_hours) {
            return bad("jitter must be below half the ping interval".into());
        }
        let (lo, hi) = self.trip_intervals;
        if lo < 2 || hi < lo {
            return bad("trip length range must satisfy 2 ≤ min ≤ max".into());
        }
        if !(-90.0..=90.0).contains(&self.harbour.0) || !(-180.0..=180.0).contains(&self.harbour.1) {
            return bad("harbour position out of range".into());
        }
        if !(self.turnaround_hours > 0.0) {
            return bad("turnaround must be positive".into());
        }
        Ok(())
    }
}

fn sample_index<R: Rng>(rng: &mut R, probs: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (j, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return j;
        }
    }
    // rounding left mass at the end: take the last state with positive probability
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

/// Path of hidden states of length `n`.
fn sample_path<R: Rng>(rng: &mut R, scn: &Scenario, n: usize) -> Vec<usize> {
    let mut path = Vec::with_capacity(n);
    let mut s = sample_index(rng, &scn.initial);
    for _ in 0..n {
        path.push(s);
        s = sample_index(rng, &scn.transition[s]);
    }
    path
}

/// Per-step (speed knots, turn after the step in degrees).
fn sample_kinematics<R: Rng>(rng: &mut R, scn: &Scenario, path: &[usize]) -> Vec<(f64, f64)> {
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut z = || std_normal.sample(rng);
    match scn.emission {
        EmissionKind::Gaussian => path
            .iter()
            .map(|&s| {
                let st = &scn.states[s];
                // reflected at zero so speeds stay non-negative
                let v = (st.speed_mean + st.speed_sd * z()).abs();
                let turn = st.turn_sd * z();
                (v, turn)
            })
            .collect(),
        EmissionKind::Ar1 => {
            let mut out = Vec::with_capacity(path.len());
            let mut prev: Option<(f64, f64)> = None;
            for &s in path {
                let st = &scn.states[s];
                let (vp, vr) = match prev {
                    None => {
                        let scale = (1.0 - st.rho * st.rho).sqrt();
                        (st.speed_mean + st.speed_sd / scale * z(), st.rotational_sd / scale * z())
                    }
                    Some((p, r)) => (
                        st.speed_mean + st.rho * (p - st.speed_mean) + st.speed_sd * z(),
                        st.rho * r + st.rotational_sd * z(),
                    ),
                };
                prev = Some((vp, vr));
                out.push((vp.hypot(vr), vr.atan2(vp).to_degrees()));
            }
            out
        }
    }
}

/// A simulated trip with its per-interval true activity.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelledTrip {
    pub trip: Trip,
    pub truth: ActivitySequence,
    /// True hidden state per interval.
    pub states: Vec<usize>,
}

/// One trip of `vessel_id` starting at `start`; deterministic in `seed`.
pub fn simulate_trip_at(
    scn: &Scenario,
    seed: u64,
    vessel_id: &str,
    trip_id: &str,
    start: DateTime<Utc>,
) -> Result<LabelledTrip> {
    scn.validate()?;
    // separate streams keep states, kinematics and timing independent of each other
    let mut rng_len = rng_for(seed, 0);
    let mut rng_path = rng_for(seed, 1);
    let mut rng_kin = rng_for(seed, 2);
    let mut rng_time = rng_for(seed, 3);

    let (lo, hi) = scn.trip_intervals;
    let n = rng_len.random_range(lo..=hi);
    let path = sample_path(&mut rng_path, scn, n);
    let kin = sample_kinematics(&mut rng_kin, scn, &path);
    let mut heading: f64 = rng_kin.random_range(0.0..360.0);

    let interval_ms = scn.ping_interval_hours * 3_600_000.0;
    let jitter_ms = scn.ping_jitter_minutes * 60_000.0;
    let mut time = start;
    let mut pos = scn.harbour;
    let ping = |time: DateTime<Utc>, (lat, lon): (f64, f64)| Ping {
        vessel_id: vessel_id.to_string(),
        trip_id: Some(trip_id.to_string()),
        timestamp: time,
        lat,
        lon,
        reported_speed: None,
        reported_heading: None,
    };
    let mut pings = Vec::with_capacity(n + 1);
    pings.push(ping(time, pos));
    for &(v, turn) in &kin {
        let jitter = if jitter_ms > 0.0 { rng_time.random_range(-jitter_ms..jitter_ms) } else { 0.0 };
        // whole seconds, as in the CSV timestamp format
        let step_s = ((interval_ms + jitter) / 1000.0).round() as i64;
        time += Duration::seconds(step_s);
        let dt_h = step_s as f64 / 3600.0;
        pos = destination_point(pos, heading, v * dt_h * KM_PER_NM);
        pings.push(ping(time, pos));
        heading = normalize_bearing(heading + turn);
    }
    let truth = path.iter().map(|&s| scn.states[s].activity).collect();
    Ok(LabelledTrip {
        trip: Trip::new(vessel_id, trip_id, pings)?,
        truth,
        states: path,
    })
}

/// Single trip from the scenario's start time and harbour.
pub fn simulate_trip(scn: &Scenario, seed: u64) -> Result<LabelledTrip> {
    simulate_trip_at(scn, seed, "V001", "V001-1", scn.start_time)
}

pub fn vessel_id(index: usize) -> String {
    format!("V{:03}", index + 1)
}

/// `n_vessels × trips_per_vessel` trips; each trip's seed is derived from
/// `seed` and its (vessel, trip) position. Output is ordered by vessel, then trip.
pub fn simulate_fleet(scn: &Scenario, n_vessels: usize, trips_per_vessel: usize, seed: u64) -> Result<Vec<LabelledTrip>> {
    if n_vessels == 0 || trips_per_vessel == 0 {
        return Err(Error::InvalidScenario("vessel and trip counts must be at least 1".into()));
    }
    scn.validate()?;
    // each trip occupies a fixed time slot long enough for the longest trip
    let slot_hours = scn.trip_intervals.1 as f64 * (scn.ping_interval_hours + scn.ping_jitter_minutes / 60.0) + scn.turnaround_hours;
    let slot = Duration::seconds((slot_hours * 3600.0).ceil() as i64);
    (0..n_vessels)
        .into_par_iter()
        .flat_map_iter(|v| (0..trips_per_vessel).map(move |t| (v, t)))
        .map(|(v, t)| {
            let vessel = vessel_id(v);
            let trip_id = format!("{vessel}-{}", t + 1);
            let stream = ((v as u64) << 32) | t as u64;
            let trip_seed = crate::seeding::derive_seed(seed, stream);
            simulate_trip_at(scn, trip_seed, &vessel, &trip_id, scn.start_time + slot * t as i32)
        })
        .collect()
}

/// Writes `vessel_id,trip_id,step_index,activity`.
pub fn write_truth_csv<W: Write>(out: W, trips: &[LabelledTrip]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["vessel_id", "trip_id", "step_index", "activity"])?;
    for lt in trips {
        for (i, a) in lt.truth.iter().enumerate() {
            w.write_record([lt.trip.vessel_id(), lt.trip.trip_id(), &i.to_string(), a.as_str()])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Truth sequences keyed by (vessel_id, trip_id). Step indices must run
/// 0, 1, 2, … within each trip.
pub fn read_truth_csv<R: Read>(input: R) -> Result<BTreeMap<(String, String), ActivitySequence>> {
    read_step_activities(input, false)
}

/// Reads `vessel_id,trip_id,step_index,activity` rows (other columns ignored).
pub(crate) fn read_step_activities<R: Read>(input: R, allow_unestimated: bool) -> Result<BTreeMap<(String, String), ActivitySequence>> {
    let mut r = csv::Reader::from_reader(input);
    let headers = r.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let (cv, ct, cs, ca) = (col("vessel_id")?, col("trip_id")?, col("step_index")?, col("activity")?);
    let mut out: BTreeMap<(String, String), ActivitySequence> = BTreeMap::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let row = i + 2;
        let field = |c: usize| rec.get(c).unwrap_or("").trim();
        let step: usize = field(cs).parse().map_err(|_| Error::Parse {
            row,
            field: "step_index".into(),
            reason: format!("`{}` is not a non-negative integer", field(cs)),
        })?;
        let activity: Activity = field(ca).parse().map_err(|_| Error::Parse {
            row,
            field: "activity".into(),
            reason: format!("unknown activity `{}`", field(ca)),
        })?;
        let seq = out.entry((field(cv).to_string(), field(ct).to_string())).or_default();
        if step != seq.len() {
            return Err(Error::Parse {
                row,
                field: "step_index".into(),
                reason: format!("expected step {}, found {step}", seq.len()),
            });
        }
        if activity == Activity::Unestimated && !allow_unestimated {
            return Err(Error::UnestimatedTruth(step));
        }
        seq.push(activity);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trajectory::{derive_kinematics, KinematicOptions};

    #[test]
    fn absorbing_chain_gives_constant_path() {
        let mut scn = Scenario::builtin("dmkmg2").unwrap();
        scn.transition = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        scn.initial = vec![1.0, 0.0];
        let lt = simulate_trip(&scn, 5).unwrap();
        assert!(lt.states.iter().all(|&s| s == 0));
        assert!(lt.truth.iter().all(|&a| a == Activity::Fishing));
    }

    #[test]
    fn same_seed_same_trip() {
        for name in Scenario::BUILTIN {
            let scn = Scenario::builtin(name).unwrap();
            assert_eq!(simulate_trip(&scn, 42).unwrap(), simulate_trip(&scn, 42).unwrap());
            assert_ne!(simulate_trip(&scn, 42).unwrap(), simulate_trip(&scn, 43).unwrap());
        }
    }

    #[test]
    fn transition_frequencies_follow_matrix() {
        let scn = Scenario::builtin("dmkmg2").unwrap().with_trip_intervals(20_000);
        let lt = simulate_trip(&scn, 2009).unwrap();
        let mut counts = [[0usize; 2]; 2];
        for w in lt.states.windows(2) {
            counts[w[0]][w[1]] += 1;
        }
        let p11 = counts[0][0] as f64 / (counts[0][0] + counts[0][1]) as f64;
        let p22 = counts[1][1] as f64 / (counts[1][0] + counts[1][1]) as f64;
        assert!((p11 - 0.9).abs() < 0.01, "p11 = {p11}");
        assert!((p22 - 0.8).abs() < 0.01, "p22 = {p22}");
    }

    #[test]
    fn derived_speeds_match_sampled() {
        for name in Scenario::BUILTIN {
            let mut scn = Scenario::builtin(name).unwrap();
            scn.ping_jitter_minutes = 5.0;
            let lt = simulate_trip(&scn, 3).unwrap();
            assert_eq!(lt.truth.len(), lt.trip.n_intervals());
            let mut rng = rng_for(3, 2);
            let path = sample_path(&mut rng_for(3, 1), &scn, lt.states.len());
            let kin = sample_kinematics(&mut rng, &scn, &path);
            let derived = derive_kinematics(&lt.trip, &KinematicOptions::default()).unwrap();
            for (t, &(v, _)) in kin.iter().enumerate() {
                assert!((derived.speed[t] - v).abs() <= 0.01 * v.max(1e-3), "{name} step {t}: {} vs {v}", derived.speed[t]);
            }
        }
    }

    #[test]
    fn harbour_moves_positions_only() {
        let scn = Scenario::builtin("dmkmg3").unwrap();
        let mut moved = scn.clone();
        moved.harbour = (55.0, 8.0);
        let a = simulate_trip(&scn, 9).unwrap();
        let b = simulate_trip(&moved, 9).unwrap();
        assert_eq!(a.truth, b.truth);
        assert_ne!(a.trip.pings()[1].lat, b.trip.pings()[1].lat);
        let ka = derive_kinematics(&a.trip, &KinematicOptions::default()).unwrap();
        let kb = derive_kinematics(&b.trip, &KinematicOptions::default()).unwrap();
        for t in 0..ka.len() {
            assert!((ka.speed[t] - kb.speed[t]).abs() < 1e-6 * ka.speed[t].max(1.0));
        }
        for t in 0..ka.len() - 1 {
            let da = crate::geo::wrap_angle(ka.heading[t + 1] - ka.heading[t]);
            let db = crate::geo::wrap_angle(kb.heading[t + 1] - kb.heading[t]);
            // meridian convergence differs slightly between the two tracks
            assert!(crate::geo::wrap_angle(da - db).abs() < 0.5, "step {t}: {da} vs {db}");
        }
    }

    #[test]
    fn fleet_identifiers_and_seeds() {
        let scn = Scenario::builtin("dmkmg2").unwrap();
        let one = simulate_fleet(&scn, 1, 1, 7).unwrap();
        assert_eq!(one.len(), 1);
        let fleet = simulate_fleet(&scn, 2, 3, 7).unwrap();
        let ids: Vec<_> = fleet.iter().map(|t| t.trip.trip_id().to_string()).collect();
        assert_eq!(ids, ["V001-1", "V001-2", "V001-3", "V002-1", "V002-2", "V002-3"]);
        assert_ne!(simulate_fleet(&scn, 2, 3, 8).unwrap(), fleet);
        assert!(simulate_fleet(&scn, 0, 3, 7).is_err());
    }

    #[test]
    fn truth_csv_round_trip() {
        let scn = Scenario::builtin("dmkmg2").unwrap();
        let fleet = simulate_fleet(&scn, 2, 2, 1).unwrap();
        let mut buf = Vec::new();
        write_truth_csv(&mut buf, &fleet).unwrap();
        let back = read_truth_csv(buf.as_slice()).unwrap();
        assert_eq!(back.len(), 4);
        for lt in &fleet {
            assert_eq!(back[&(lt.trip.vessel_id().to_string(), lt.trip.trip_id().to_string())], lt.truth);
        }
    }

    #[test]
    fn scenario_file_parses_and_validates() {
        let text = r#"
            name = "two-state"
            emission = "gaussian"
            transition = [[0.9, 0.1], [0.3, 0.7]]
            initial = [1.0, 0.0]
            trip_intervals_min = 10
            trip_intervals_max = 20
            harbour_lat = 56.0
            harbour_lon = 10.0

            [[state]]
            activity = "fishing"
            speed_mean = 3.0
            speed_sd = 0.5
            turn_sd = 45.0

            [[state]]
            activity = "steaming"
            speed_mean = 9.0
            speed_sd = 1.0
            turn_sd = 10.0
        "#;
        let scn = Scenario::from_toml(text).unwrap();
        assert_eq!(scn.k(), 2);
        assert_eq!(scn.trip_intervals, (10, 20));
        assert!(Scenario::from_toml(&text.replace("0.3, 0.7", "0.3, 0.8")).is_err());
        assert!(Scenario::builtin("nope").is_err());
    }
}
