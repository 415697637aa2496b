//! Trawling events and gridded fishing effort.
//!
//! Effort is accumulated as whole milliseconds per cell, so merging partial
//! grids and re-aggregating a refined grid are exact.

use std::io::Write;

use chrono::{DateTime, Utc};
use rayon::prelude::*;

use crate::activity::Activity;
use crate::error::{Error, Result};
use crate::trajectory::Trip;

/// A maximal run of Fishing steps.
#[derive(Debug, Clone, PartialEq)]
pub struct TrawlEvent {
    pub vessel_id: String,
    pub trip_id: String,
    /// First and last step (inclusive).
    pub start: usize,
    pub end: usize,
    pub start_time: DateTime<Utc>,
    /// Timestamp of the ping closing the last step.
    pub end_time: DateTime<Utc>,
    /// Start-ping position and duration of every step in the run.
    pub steps: Vec<EventStep>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventStep {
    pub lat: f64,
    pub lon: f64,
    pub millis: i64,
}

impl TrawlEvent {
    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn duration_millis(&self) -> i64 {
        self.steps.iter().map(|s| s.millis).sum()
    }

    pub fn duration_hours(&self) -> f64 {
        millis_to_hours(self.duration_millis())
    }
}

fn millis_to_hours(ms: i64) -> f64 {
    ms as f64 / 3_600_000.0
}

/// Maximal Fishing runs of a trip; Unestimated and Steaming both end a run.
pub fn extract_trawl_events(activity: &[Activity], trip: &Trip) -> Result<Vec<TrawlEvent>> {
    if activity.len() != trip.n_intervals() {
        return Err(Error::LengthMismatch { left: trip.n_intervals(), right: activity.len() });
    }
    let pings = trip.pings();
    let mut events = Vec::new();
    let mut t = 0;
    while t < activity.len() {
        if activity[t] != Activity::Fishing {
            t += 1;
            continue;
        }
        let start = t;
        while t + 1 < activity.len() && activity[t + 1] == Activity::Fishing {
            t += 1;
        }
        let steps = (start..=t)
            .map(|i| EventStep {
                lat: pings[i].lat,
                lon: pings[i].lon,
                millis: (pings[i + 1].timestamp - pings[i].timestamp).num_milliseconds(),
            })
            .collect();
        events.push(TrawlEvent {
            vessel_id: trip.vessel_id().to_string(),
            trip_id: trip.trip_id().to_string(),
            start,
            end: t,
            start_time: pings[start].timestamp,
            end_time: pings[t + 1].timestamp,
            steps,
        });
        t += 1;
    }
    Ok(events)
}

/// Latitude/longitude rectangle in degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox {
    pub min_lat: f64,
    pub max_lat: f64,
    pub min_lon: f64,
    pub max_lon: f64,
}

impl BoundingBox {
    pub fn new(min_lat: f64, max_lat: f64, min_lon: f64, max_lon: f64) -> Result<Self> {
        let b = Self { min_lat, max_lat, min_lon, max_lon };
        if !(min_lat < max_lat && min_lon < max_lon) || [min_lat, max_lat, min_lon, max_lon].iter().any(|v| !v.is_finite()) {
            return Err(Error::Config(format!("degenerate bounding box {b:?}")));
        }
        Ok(b)
    }

    /// Smallest box on the cell lattice through (0, 0) that contains every point.
    pub fn covering(points: impl IntoIterator<Item = (f64, f64)>, cell_lat: f64, cell_lon: f64) -> Result<Self> {
        let mut lo = (f64::INFINITY, f64::INFINITY);
        let mut hi = (f64::NEG_INFINITY, f64::NEG_INFINITY);
        for (lat, lon) in points {
            lo = (lo.0.min(lat), lo.1.min(lon));
            hi = (hi.0.max(lat), hi.1.max(lon));
        }
        if !lo.0.is_finite() {
            return Err(Error::Config("no positions to cover".into()));
        }
        let snap_lo = |v: f64, c: f64| (v / c).floor() * c;
        let snap_hi = |v: f64, c: f64| ((v / c).floor() + 1.0) * c;
        Self::new(snap_lo(lo.0, cell_lat), snap_hi(hi.0, cell_lat), snap_lo(lo.1, cell_lon), snap_hi(hi.1, cell_lon))
    }
}

/// Number of cells of size `cell` spanning `range`, treating near-exact multiples as exact.
fn cell_count(range: f64, cell: f64) -> usize {
    let r = range / cell;
    let n = if (r - r.round()).abs() < 1e-9 { r.round() } else { r.ceil() };
    n.max(1.0) as usize
}

/// Index of the half-open cell [min + i·cell, min + (i+1)·cell) containing `x`.
fn cell_index(x: f64, min: f64, cell: f64, n: usize) -> Option<usize> {
    if !(x >= min) {
        return None;
    }
    let mut i = ((x - min) / cell).floor() as i64;
    let edge = |i: i64| min + i as f64 * cell;
    while i > 0 && edge(i) > x {
        i -= 1;
    }
    while edge(i + 1) <= x {
        i += 1;
    }
    (i >= 0 && (i as usize) < n).then_some(i as usize)
}

/// Fishing hours per cell, rows by latitude index.
#[derive(Debug, Clone, PartialEq)]
pub struct EffortGrid {
    cell_lat: f64,
    cell_lon: f64,
    bbox: BoundingBox,
    n_lat: usize,
    n_lon: usize,
    millis: Vec<i64>,
    outside_millis: i64,
}

impl EffortGrid {
    pub fn new(cell_lat: f64, cell_lon: f64, bbox: BoundingBox) -> Result<Self> {
        if !(cell_lat > 0.0 && cell_lon > 0.0) || !cell_lat.is_finite() || !cell_lon.is_finite() {
            return Err(Error::Config("cell size must be positive".into()));
        }
        let bbox = BoundingBox::new(bbox.min_lat, bbox.max_lat, bbox.min_lon, bbox.max_lon)?;
        let n_lat = cell_count(bbox.max_lat - bbox.min_lat, cell_lat);
        let n_lon = cell_count(bbox.max_lon - bbox.min_lon, cell_lon);
        Ok(Self {
            cell_lat,
            cell_lon,
            bbox,
            n_lat,
            n_lon,
            millis: vec![0; n_lat * n_lon],
            outside_millis: 0,
        })
    }

    pub fn cell_size(&self) -> (f64, f64) {
        (self.cell_lat, self.cell_lon)
    }

    pub fn bbox(&self) -> BoundingBox {
        self.bbox
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n_lat, self.n_lon)
    }

    pub fn locate(&self, lat: f64, lon: f64) -> Option<(usize, usize)> {
        let i = cell_index(lat, self.bbox.min_lat, self.cell_lat, self.n_lat)?;
        let j = cell_index(lon, self.bbox.min_lon, self.cell_lon, self.n_lon)?;
        Some((i, j))
    }

    pub fn add(&mut self, lat: f64, lon: f64, millis: i64) {
        match self.locate(lat, lon) {
            Some((i, j)) => self.millis[i * self.n_lon + j] += millis,
            None => self.outside_millis += millis,
        }
    }

    /// Adds another grid of identical geometry.
    pub fn merge(&mut self, other: &EffortGrid) -> Result<()> {
        if (self.cell_lat, self.cell_lon, self.bbox, self.n_lat, self.n_lon) != (other.cell_lat, other.cell_lon, other.bbox, other.n_lat, other.n_lon) {
            return Err(Error::Config("cannot merge grids of different geometry".into()));
        }
        for (a, b) in self.millis.iter_mut().zip(&other.millis) {
            *a += b;
        }
        self.outside_millis += other.outside_millis;
        Ok(())
    }

    pub fn hours(&self, i: usize, j: usize) -> f64 {
        millis_to_hours(self.millis[i * self.n_lon + j])
    }

    pub fn cell_millis(&self, i: usize, j: usize) -> i64 {
        self.millis[i * self.n_lon + j]
    }

    pub fn total_hours(&self) -> f64 {
        millis_to_hours(self.millis.iter().sum())
    }

    pub fn outside_hours(&self) -> f64 {
        millis_to_hours(self.outside_millis)
    }

    pub fn cell_center(&self, i: usize, j: usize) -> (f64, f64) {
        (
            self.bbox.min_lat + (i as f64 + 0.5) * self.cell_lat,
            self.bbox.min_lon + (j as f64 + 0.5) * self.cell_lon,
        )
    }

    /// Sums `f × f` blocks into a grid with `f` times larger cells.
    pub fn coarsen(&self, f: usize) -> Result<EffortGrid> {
        if f == 0 || self.n_lat % f != 0 || self.n_lon % f != 0 {
            return Err(Error::Config(format!("grid shape {:?} is not divisible by {f}", self.shape())));
        }
        let mut out = EffortGrid {
            cell_lat: self.cell_lat * f as f64,
            cell_lon: self.cell_lon * f as f64,
            bbox: self.bbox,
            n_lat: self.n_lat / f,
            n_lon: self.n_lon / f,
            millis: vec![0; (self.n_lat / f) * (self.n_lon / f)],
            outside_millis: self.outside_millis,
        };
        for i in 0..self.n_lat {
            for j in 0..self.n_lon {
                out.millis[(i / f) * out.n_lon + j / f] += self.millis[i * self.n_lon + j];
            }
        }
        Ok(out)
    }

    /// Non-zero cells as (lat index, lon index, hours).
    pub fn nonzero_cells(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n_lat)
            .flat_map(move |i| (0..self.n_lon).map(move |j| (i, j)))
            .filter(move |&(i, j)| self.cell_millis(i, j) != 0)
            .map(move |(i, j)| (i, j, self.hours(i, j)))
    }
}

/// Credits each Fishing step's duration to the cell of its start ping.
pub fn grid_effort(events: &[TrawlEvent], cell_lat: f64, cell_lon: f64, bbox: BoundingBox) -> Result<EffortGrid> {
    let empty = EffortGrid::new(cell_lat, cell_lon, bbox)?;
    let grid = events
        .par_iter()
        .fold(
            || empty.clone(),
            |mut g, e| {
                for s in &e.steps {
                    g.add(s.lat, s.lon, s.millis);
                }
                g
            },
        )
        .reduce(
            || empty.clone(),
            |mut a, b| {
                a.merge(&b).expect("partial grids share geometry");
                a
            },
        );
    Ok(grid)
}

/// Writes `cell_lat_index,cell_lon_index,cell_center_lat,cell_center_lon,hours` for non-zero cells.
pub fn write_effort_csv<W: Write>(out: W, grid: &EffortGrid) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["cell_lat_index", "cell_lon_index", "cell_center_lat", "cell_center_lon", "hours"])?;
    for (i, j, h) in grid.nonzero_cells() {
        let (clat, clon) = grid.cell_center(i, j);
        w.write_record([i.to_string(), j.to_string(), clat.to_string(), clon.to_string(), h.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Sidecar description of a grid (TOML key = value lines).
pub fn write_effort_metadata<W: Write>(mut out: W, grid: &EffortGrid, events: &[TrawlEvent]) -> Result<()> {
    let b = grid.bbox();
    let (n_lat, n_lon) = grid.shape();
    let event_hours: f64 = millis_to_hours(events.iter().map(|e| e.duration_millis()).sum());
    writeln!(out, "format_version = 1")?;
    writeln!(out, "cell_lat = {:?}", grid.cell_lat)?;
    writeln!(out, "cell_lon = {:?}", grid.cell_lon)?;
    writeln!(out, "min_lat = {:?}", b.min_lat)?;
    writeln!(out, "max_lat = {:?}", b.max_lat)?;
    writeln!(out, "min_lon = {:?}", b.min_lon)?;
    writeln!(out, "max_lon = {:?}", b.max_lon)?;
    writeln!(out, "n_lat = {n_lat}")?;
    writeln!(out, "n_lon = {n_lon}")?;
    writeln!(out, "n_events = {}", events.len())?;
    writeln!(out, "event_hours = {event_hours:?}")?;
    writeln!(out, "total_hours = {:?}", grid.total_hours())?;
    writeln!(out, "outside_hours = {:?}", grid.outside_hours())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trajectory::Ping;
    use chrono::{Duration, TimeZone};
    use Activity::{Fishing as F, Steaming as S, Unestimated as U};

    fn trip(positions: &[(f64, f64)]) -> Trip {
        let t0 = Utc.with_ymd_and_hms(2009, 5, 1, 0, 0, 0).unwrap();
        let pings = positions
            .iter()
            .enumerate()
            .map(|(i, &(lat, lon))| Ping {
                vessel_id: "V".into(),
                trip_id: Some("T".into()),
                timestamp: t0 + Duration::hours(i as i64),
                lat,
                lon,
                reported_speed: None,
                reported_heading: None,
            })
            .collect();
        Trip::new("V", "T", pings).unwrap()
    }

    fn line(n: usize) -> Trip {
        trip(&(0..n).map(|i| (56.0 + 0.01 * i as f64, 11.0)).collect::<Vec<_>>())
    }

    #[test]
    fn runs_are_maximal() {
        let ev = extract_trawl_events(&[F, F, F, S, F, F], &line(7)).unwrap();
        assert_eq!(ev.iter().map(|e| (e.start, e.end)).collect::<Vec<_>>(), vec![(0, 2), (4, 5)]);
        assert_eq!(ev[0].duration_hours(), 3.0);
        assert!(extract_trawl_events(&[S; 4], &line(5)).unwrap().is_empty());
        let ev = extract_trawl_events(&[F, U, F], &line(4)).unwrap();
        assert_eq!(ev.iter().map(|e| e.len()).collect::<Vec<_>>(), vec![1, 1]);
        assert!(extract_trawl_events(&[F], &line(4)).is_err());
    }

    #[test]
    fn all_fishing_is_one_event() {
        let ev = extract_trawl_events(&[F; 9], &line(10)).unwrap();
        assert_eq!(ev.len(), 1);
        assert_eq!((ev[0].start, ev[0].end), (0, 8));
    }

    #[test]
    fn same_cell_accumulates() {
        let t = trip(&[(56.01, 11.01), (56.02, 11.02), (56.03, 11.03)]);
        let ev = extract_trawl_events(&[F, F], &t).unwrap();
        let bbox = BoundingBox::new(56.0, 57.0, 11.0, 12.0).unwrap();
        let g = grid_effort(&ev, 0.5, 0.5, bbox).unwrap();
        assert_eq!(g.hours(0, 0), 2.0);
        assert_eq!(g.total_hours(), 2.0);
        let empty = grid_effort(&[], 0.5, 0.5, bbox).unwrap();
        assert_eq!(empty.total_hours(), 0.0);
        assert_eq!(empty.nonzero_cells().count(), 0);
    }

    #[test]
    fn boundary_goes_to_higher_cell() {
        let bbox = BoundingBox::new(55.0, 56.0, 10.0, 11.0).unwrap();
        let g = EffortGrid::new(0.25, 0.25, bbox).unwrap();
        assert_eq!(g.locate(55.5, 10.25), Some((2, 1)));
        assert_eq!(g.locate(55.0, 10.0), Some((0, 0)));
        assert_eq!(g.locate(56.0, 10.5), None);
        // decimal cell sizes use the same lattice as the cell edges
        let g = EffortGrid::new(0.1, 0.1, bbox).unwrap();
        assert_eq!(g.shape(), (10, 10));
        let edge = 55.0 + 3.0 * 0.1;
        assert_eq!(g.locate(edge, 10.05).unwrap().0, 3);
    }

    #[test]
    fn outside_positions_are_counted() {
        let t = trip(&[(50.0, 11.0), (56.5, 11.5), (56.6, 11.6)]);
        let ev = extract_trawl_events(&[F, F], &t).unwrap();
        let g = grid_effort(&ev, 0.5, 0.5, BoundingBox::new(56.0, 57.0, 11.0, 12.0).unwrap()).unwrap();
        assert_eq!(g.outside_hours(), 1.0);
        assert_eq!(g.total_hours(), 1.0);
    }

    #[test]
    fn csv_lists_nonzero_cells() {
        let t = trip(&[(56.1, 11.1), (56.6, 11.6), (56.7, 11.7)]);
        let ev = extract_trawl_events(&[F, S], &t).unwrap();
        let g = grid_effort(&ev, 0.5, 0.5, BoundingBox::new(56.0, 57.0, 11.0, 12.0).unwrap()).unwrap();
        let mut buf = Vec::new();
        write_effort_csv(&mut buf, &g).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "cell_lat_index,cell_lon_index,cell_center_lat,cell_center_lon,hours\n0,0,56.25,11.25,1\n");
        let mut meta = Vec::new();
        write_effort_metadata(&mut meta, &g, &ev).unwrap();
        let meta: toml::Table = toml::from_str(std::str::from_utf8(&meta).unwrap()).unwrap();
        assert_eq!(meta["total_hours"].as_float(), Some(1.0));
        assert_eq!(meta["n_lat"].as_integer(), Some(2));
    }

    #[test]
    fn covering_box_contains_points() {
        let b = BoundingBox::covering([(56.03, 11.97), (57.2, 12.0)], 0.1, 0.1).unwrap();
        let g = EffortGrid::new(0.1, 0.1, b).unwrap();
        assert!(g.locate(56.03, 11.97).is_some());
        assert!(g.locate(57.2, 12.0).is_some());
    }
}
