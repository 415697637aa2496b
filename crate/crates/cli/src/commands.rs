use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use clap::Args;
use rayon::prelude::*;
use vmsfish::effort::{extract_trawl_events, grid_effort, write_effort_csv, write_effort_metadata, BoundingBox, TrawlEvent};
use vmsfish::evaluation::{format_comparison, run_comparison, sweep_k, write_comparison_csv, ComparisonTable, LabelledDataset};
use vmsfish::model_file::{read_model, write_model, ModelFile};
use vmsfish::pipeline::{
    classify_trip, fit_unit, prepare_kinematics, write_classified_csv, read_classified_csv, Classified, GroupingMode,
};
use vmsfish::simulator::{read_truth_csv, simulate_fleet, write_truth_csv, Scenario};
use vmsfish::trajectory::{parse_vms_csv, segment_trips, write_vms_csv, ObservationVariant, Trip};

use crate::config::{grouping_or, parse_decode, KinematicArgs, ModelArgs, RunConfig, Settings};
use crate::{Cli, Command};

pub const MODEL_EXTENSION: &str = "model";

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Built-in scenario (dmkmg2, dmkmg3, dmarp2) or path to a scenario TOML file
    #[arg(long, value_name = "NAME|PATH")]
    pub scenario: String,
    /// Number of vessels
    #[arg(long, value_name = "N", default_value_t = 1)]
    pub vessels: usize,
    /// Trips per vessel
    #[arg(long, value_name = "N", default_value_t = 1)]
    pub trips: usize,
    /// Fix every trip to this many intervals instead of the scenario's range
    #[arg(long, value_name = "N")]
    pub intervals: Option<usize>,
    /// Output ping CSV
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
    /// Output truth CSV (vessel_id,trip_id,step_index,activity)
    #[arg(long, value_name = "PATH")]
    pub truth: PathBuf,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Input ping CSV (vessel_id,trip_id,timestamp,lat,lon,speed,heading)
    #[arg(long, value_name = "PATH")]
    pub input: PathBuf,
    /// Classification method: dmkmg, threshold or dmarp [default: dmkmg]
    #[arg(long, value_name = "METHOD")]
    pub method: Option<String>,
    /// Fit one model for all data, per vessel or per trip: all, vessel or trip [default: all]
    #[arg(long, value_name = "MODE")]
    pub grouping: Option<String>,
    /// Directory receiving one model file per grouping unit
    #[arg(long, value_name = "DIR")]
    pub out_dir: PathBuf,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub kinematics: KinematicArgs,
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    /// Input ping CSV (vessel_id,trip_id,timestamp,lat,lon,speed,heading)
    #[arg(long, value_name = "PATH")]
    pub input: PathBuf,
    /// Directory of model files written by `fit`
    #[arg(long, value_name = "DIR")]
    pub models: PathBuf,
    /// Output CSV (vessel_id,trip_id,step_index,timestamp,activity,component)
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
    /// Observation variant of the pipeline; models fitted on another variant are rejected
    #[arg(long, value_name = "VARIANT")]
    pub variant: Option<String>,
    /// Hidden-state decoding: viterbi or posterior [default: viterbi]
    #[arg(long, value_name = "METHOD")]
    pub decode: Option<String>,
    #[command(flatten)]
    pub kinematics: KinematicArgs,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Input ping CSV (vessel_id,trip_id,timestamp,lat,lon,speed,heading)
    #[arg(long, value_name = "PATH")]
    pub input: PathBuf,
    /// Truth CSV (vessel_id,trip_id,step_index,activity)
    #[arg(long, value_name = "PATH")]
    pub truth: PathBuf,
    /// Comma-separated methods to compare [default: dmkmg,threshold,dmarp]
    #[arg(long, value_name = "LIST", value_delimiter = ',')]
    pub methods: Vec<String>,
    /// Comma-separated grouping modes (all, vessel, trip) [default: all]
    #[arg(long, value_name = "LIST", value_delimiter = ',')]
    pub grouping: Vec<String>,
    /// Sweep DMKMG over K = LO..=HI instead of comparing methods, e.g. 2..6
    #[arg(long, value_name = "LO..HI")]
    pub k_range: Option<String>,
    /// Output comparison CSV
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
    /// Write the wall-time column as 0 so repeated runs produce identical files
    #[arg(long)]
    pub no_wall_time: bool,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub kinematics: KinematicArgs,
}

#[derive(Debug, Args)]
pub struct EffortArgs {
    /// Input ping CSV (vessel_id,trip_id,timestamp,lat,lon,speed,heading)
    #[arg(long, value_name = "PATH")]
    pub input: PathBuf,
    /// Classified CSV written by `classify`
    #[arg(long, value_name = "PATH")]
    pub classified: PathBuf,
    /// Cell size in degrees (latitude, and longitude unless --cell-lon is given)
    #[arg(long, value_name = "DEG")]
    pub cell: f64,
    /// Longitude cell size in degrees
    #[arg(long, value_name = "DEG")]
    pub cell_lon: Option<f64>,
    /// Grid extent as MIN_LAT,MAX_LAT,MIN_LON,MAX_LON [default: cell-aligned box around all pings]
    #[arg(long, value_name = "BOX", value_delimiter = ',')]
    pub bbox: Vec<f64>,
    /// Output grid CSV (cell_lat_index,cell_lon_index,cell_center_lat,cell_center_lon,hours)
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
    /// Metadata sidecar [default: the output path with a .toml extension]
    #[arg(long, value_name = "PATH")]
    pub meta: Option<PathBuf>,
    #[command(flatten)]
    pub kinematics: KinematicArgs,
}

struct Session {
    file: RunConfig,
    seed: Option<u64>,
    quiet: bool,
}

impl Session {
    fn progress(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("{}", msg.as_ref());
        }
    }
}

pub fn run(cli: Cli) -> Result<ExitCode> {
    let file = RunConfig::load(cli.config.as_deref())?;
    let jobs = cli.jobs.or(file.jobs);
    if let Some(n) = jobs {
        if n == 0 {
            bail!("--jobs must be at least 1");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("cannot start worker threads")?;
    }
    let ctx = Session { file, seed: cli.seed, quiet: cli.quiet };
    match cli.command {
        Command::Simulate(a) => simulate(&ctx, a),
        Command::Fit(a) => fit(&ctx, a),
        Command::Classify(a) => classify(&ctx, a),
        Command::Evaluate(a) => evaluate(&ctx, a),
        Command::EffortMap(a) => effort_map(&ctx, a),
    }
}

/// Writes through a temporary file in the destination directory, renamed into place on success.
fn write_atomic(path: &Path, f: impl FnOnce(&mut BufWriter<&mut File>) -> Result<()>) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).with_context(|| format!("cannot write to {}", dir.display()))?;
    {
        let mut w = BufWriter::new(tmp.as_file_mut());
        f(&mut w)?;
        w.flush()?;
    }
    tmp.persist(path).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path).with_context(|| format!("cannot open {}", path.display()))?))
}

fn load_trips(path: &Path, settings: &Settings) -> Result<Vec<Trip>> {
    let pings = parse_vms_csv(open(path)?).with_context(|| format!("cannot parse {}", path.display()))?;
    let trips = segment_trips(pings, settings.trip_gap_hours).with_context(|| format!("cannot segment {}", path.display()))?;
    if trips.is_empty() {
        bail!("{} contains no pings", path.display());
    }
    Ok(trips)
}

fn simulate(ctx: &Session, a: SimulateArgs) -> Result<ExitCode> {
    let mut scn = if Scenario::BUILTIN.contains(&a.scenario.as_str()) {
        Scenario::builtin(&a.scenario)?
    } else {
        let text = std::fs::read_to_string(&a.scenario)
            .with_context(|| format!("`{}` is neither a built-in scenario ({}) nor a readable file", a.scenario, Scenario::BUILTIN.join(", ")))?;
        Scenario::from_toml(&text)?
    };
    if let Some(n) = a.intervals {
        scn = scn.with_trip_intervals(n);
        scn.validate()?;
    }
    if a.vessels == 0 || a.trips == 0 {
        bail!("--vessels and --trips must be at least 1");
    }
    let seed = ctx.seed.or(ctx.file.seed).unwrap_or(crate::config::DEFAULT_SEED);
    let fleet = simulate_fleet(&scn, a.vessels, a.trips, seed)?;
    let trips: Vec<Trip> = fleet.iter().map(|lt| lt.trip.clone()).collect();
    write_atomic(&a.out, |w| Ok(write_vms_csv(w, &trips)?))?;
    write_atomic(&a.truth, |w| Ok(write_truth_csv(w, &fleet)?))?;
    let steps: usize = fleet.iter().map(|lt| lt.truth.len()).sum();
    ctx.progress(format!("simulated {} trips ({steps} steps) from scenario {}", fleet.len(), scn.name));
    Ok(ExitCode::SUCCESS)
}

/// File name of a unit's model; characters outside [A-Za-z0-9._-] become `_`.
pub fn model_file_name(unit_id: &str) -> String {
    let safe: String = unit_id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-') { c } else { '_' })
        .collect();
    format!("{safe}.{MODEL_EXTENSION}")
}

fn fit(ctx: &Session, a: FitArgs) -> Result<ExitCode> {
    let settings = Settings::resolve(&ctx.file, ctx.seed, &a.kinematics, Some(&a.model))?;
    let method_name = a.method.as_deref().or(ctx.file.method.as_deref()).unwrap_or("dmkmg");
    let method = settings.method(method_name)?;
    let grouping = grouping_or(a.grouping.as_deref(), &ctx.file, GroupingMode::AllData)?;
    let trips = load_trips(&a.input, &settings)?;
    let kins = prepare_kinematics(&trips, &settings.pipeline.kinematics);
    let units = grouping.units(&trips);

    let mut names = BTreeMap::new();
    for (unit_id, _) in &units {
        if let Some(other) = names.insert(model_file_name(unit_id), unit_id) {
            bail!("units `{other}` and `{unit_id}` map to the same model file name");
        }
    }
    std::fs::create_dir_all(&a.out_dir).with_context(|| format!("cannot create {}", a.out_dir.display()))?;

    ctx.progress(format!("fitting {} on {} unit(s) of {} trip(s)", method_name, units.len(), trips.len()));
    let fits = units
        .par_iter()
        .map(|(unit_id, members)| {
            let start = Instant::now();
            let unit_kins: Vec<_> = members.iter().filter_map(|&i| kins[i].as_ref()).collect();
            let fit = fit_unit(unit_id, &method, &unit_kins, &settings.pipeline, settings.seed)?;
            Ok((fit, start.elapsed().as_secs_f64()))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut failed = 0;
    if !ctx.quiet {
        println!("{:<24} {:>8} {:>16} {:>10} {:>9}", "unit", "status", "log_likelihood", "iterations", "wall_s");
    }
    for (fit, secs) in &fits {
        let status = match &fit.model {
            Some(model) => {
                let file = ModelFile {
                    grouping,
                    unit_id: fit.unit_id.clone(),
                    model: model.clone(),
                    log_likelihood: fit.log_likelihood,
                };
                write_atomic(&a.out_dir.join(model_file_name(&fit.unit_id)), |w| Ok(write_model(w, &file)?))?;
                if fit.converged { "ok" } else { "maxiter" }
            }
            None => {
                failed += 1;
                "failed"
            }
        };
        if !ctx.quiet {
            let ll = fit.log_likelihood.map(|v| format!("{v:.4}")).unwrap_or_else(|| "-".into());
            println!("{:<24} {:>8} {:>16} {:>10} {:>9.3}", fit.unit_id, status, ll, fit.iterations, secs);
            if let Some(reason) = &fit.failure {
                println!("    {reason}");
            }
        }
    }
    ctx.progress(format!("{} of {} unit(s) fitted; models in {}", fits.len() - failed, fits.len(), a.out_dir.display()));
    if failed == fits.len() {
        eprintln!("error: every unit failed to fit");
        return Ok(ExitCode::FAILURE);
    }
    Ok(ExitCode::SUCCESS)
}

/// Reads every model file of a directory; all must share one grouping mode.
fn load_models(dir: &Path) -> Result<(GroupingMode, BTreeMap<String, ModelFile>)> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .with_context(|| format!("cannot read model directory {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == MODEL_EXTENSION))
        .collect();
    paths.sort();
    let mut grouping = None;
    let mut models = BTreeMap::new();
    for p in paths {
        let m = read_model(open(&p)?).with_context(|| format!("invalid model file {}", p.display()))?;
        match grouping {
            None => grouping = Some(m.grouping),
            Some(g) if g != m.grouping => bail!("{} uses grouping `{}` but earlier models use `{}`", p.display(), m.grouping.as_str(), g.as_str()),
            _ => {}
        }
        if models.contains_key(&m.unit_id) {
            bail!("two model files for unit `{}`", m.unit_id);
        }
        models.insert(m.unit_id.clone(), m);
    }
    let grouping = grouping.ok_or_else(|| anyhow!("no .{MODEL_EXTENSION} files in {}", dir.display()))?;
    Ok((grouping, models))
}

fn classify(ctx: &Session, a: ClassifyArgs) -> Result<ExitCode> {
    let settings = Settings::resolve(&ctx.file, ctx.seed, &a.kinematics, None)?;
    let decode = match a.decode.as_deref().or(ctx.file.decode.as_deref()) {
        Some(d) => parse_decode(d)?,
        None => settings.pipeline.decode,
    };
    let (grouping, models) = load_models(&a.models)?;
    if let Some(v) = a.variant.as_deref().or(ctx.file.variant.as_deref()) {
        let variant: ObservationVariant = v.parse()?;
        for m in models.values() {
            m.model.check_variant(variant).with_context(|| format!("model for unit `{}`", m.unit_id))?;
        }
    }
    let trips = load_trips(&a.input, &settings)?;
    let kins = prepare_kinematics(&trips, &settings.pipeline.kinematics);
    let classified = trips
        .par_iter()
        .zip(&kins)
        .map(|(trip, kin)| {
            let model = models.get(&grouping.unit_id(trip)).map(|m| &m.model);
            classify_trip(model, kin.as_ref(), trip.n_intervals(), decode)
                .with_context(|| format!("trip {}/{}", trip.vessel_id(), trip.trip_id()))
        })
        .collect::<Result<Vec<Classified>>>()?;
    write_atomic(&a.out, |w| Ok(write_classified_csv(w, &trips, &classified)?))?;
    let steps: usize = classified.iter().map(|c| c.activities.len()).sum();
    let unestimated: usize = classified.iter().map(|c| c.activities.iter().filter(|x| !x.is_estimated()).count()).sum();
    let missing = trips.iter().filter(|t| !models.contains_key(&grouping.unit_id(t))).count();
    ctx.progress(format!("classified {steps} steps of {} trips ({unestimated} unestimated, {missing} trips without a model)", trips.len()));
    Ok(ExitCode::SUCCESS)
}

fn parse_k_range(s: &str) -> Result<Vec<usize>> {
    let (lo, hi) = s.split_once("..").ok_or_else(|| anyhow!("K range must look like LO..HI, got `{s}`"))?;
    let hi = hi.strip_prefix('=').unwrap_or(hi);
    let (lo, hi): (usize, usize) = (lo.trim().parse()?, hi.trim().parse()?);
    if lo < 2 || hi < lo {
        bail!("K range {lo}..{hi} must satisfy 2 <= LO <= HI");
    }
    Ok((lo..=hi).collect())
}

fn evaluate(ctx: &Session, a: EvaluateArgs) -> Result<ExitCode> {
    let settings = Settings::resolve(&ctx.file, ctx.seed, &a.kinematics, Some(&a.model))?;
    let groupings: Vec<GroupingMode> = if a.grouping.is_empty() {
        vec![grouping_or(None, &ctx.file, GroupingMode::AllData)?]
    } else {
        a.grouping.iter().map(|g| g.parse()).collect::<vmsfish::Result<_>>()?
    };
    let trips = load_trips(&a.input, &settings)?;
    let truth_map = read_truth_csv(open(&a.truth)?).with_context(|| format!("cannot parse {}", a.truth.display()))?;
    let truth = trips
        .iter()
        .map(|t| {
            truth_map
                .get(&(t.vessel_id().to_string(), t.trip_id().to_string()))
                .cloned()
                .ok_or_else(|| anyhow!("no truth for trip {}/{}", t.vessel_id(), t.trip_id()))
        })
        .collect::<Result<Vec<_>>>()?;
    let data = LabelledDataset { trips: &trips, truth: &truth };

    let mut table = ComparisonTable::default();
    if let Some(range) = &a.k_range {
        let ks = parse_k_range(range)?;
        for g in groupings {
            let sweep = sweep_k(data, &ks, settings.variant, g, &settings.pipeline, settings.seed)?;
            ctx.progress(format!("grouping {}: best K = {}", g.as_str(), sweep.best_k));
            table.rows.extend(sweep.table.rows);
        }
    } else {
        let names: Vec<String> = if !a.methods.is_empty() {
            a.methods.clone()
        } else if let Some(m) = &ctx.file.methods {
            m.clone()
        } else {
            vec!["dmkmg".into(), "threshold".into(), "dmarp".into()]
        };
        let methods = names.iter().map(|n| settings.method(n)).collect::<Result<Vec<_>>>()?;
        for g in groupings {
            table.rows.extend(run_comparison(data, &methods, g, &settings.pipeline, settings.seed)?.rows);
        }
    }
    write_atomic(&a.out, |w| Ok(write_comparison_csv(w, &table, !a.no_wall_time)?))?;
    if !ctx.quiet {
        print!("{}", format_comparison(&table, !a.no_wall_time));
    }
    Ok(ExitCode::SUCCESS)
}

fn effort_map(ctx: &Session, a: EffortArgs) -> Result<ExitCode> {
    let settings = Settings::resolve(&ctx.file, ctx.seed, &a.kinematics, None)?;
    let cell_lon = a.cell_lon.unwrap_or(a.cell);
    if !(a.cell > 0.0 && cell_lon > 0.0) {
        bail!("cell sizes must be positive");
    }
    let trips = load_trips(&a.input, &settings)?;
    let classified = read_classified_csv(open(&a.classified)?).with_context(|| format!("cannot parse {}", a.classified.display()))?;
    let events: Vec<TrawlEvent> = trips
        .iter()
        .map(|t| {
            let key = (t.vessel_id().to_string(), t.trip_id().to_string());
            let activity = classified.get(&key).ok_or_else(|| anyhow!("trip {}/{} is not in {}", key.0, key.1, a.classified.display()))?;
            extract_trawl_events(activity, t).with_context(|| format!("trip {}/{}", key.0, key.1))
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    let bbox = match a.bbox.as_slice() {
        [] => BoundingBox::covering(trips.iter().flat_map(|t| t.pings().iter().map(|p| (p.lat, p.lon))), a.cell, cell_lon)?,
        [a0, a1, b0, b1] => BoundingBox::new(*a0, *a1, *b0, *b1)?,
        _ => bail!("--bbox needs four values"),
    };
    let grid = grid_effort(&events, a.cell, cell_lon, bbox)?;
    let meta = a.meta.clone().unwrap_or_else(|| a.out.with_extension("toml"));
    write_atomic(&a.out, |w| Ok(write_effort_csv(w, &grid)?))?;
    write_atomic(&meta, |w| Ok(write_effort_metadata(w, &grid, &events)?))?;
    ctx.progress(format!(
        "{} trawling events, {:.3} h in grid, {:.3} h outside",
        events.len(),
        grid.total_hours(),
        grid.outside_hours()
    ));
    Ok(ExitCode::SUCCESS)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn model_names_are_filesystem_safe() {
        assert_eq!(model_file_name("V001-3"), "V001-3.model");
        assert_eq!(model_file_name("a/b c"), "a_b_c.model");
    }

    #[test]
    fn k_ranges() {
        assert_eq!(parse_k_range("2..6").unwrap(), vec![2, 3, 4, 5, 6]);
        assert_eq!(parse_k_range("3..=3").unwrap(), vec![3]);
        assert!(parse_k_range("1..4").is_err());
        assert!(parse_k_range("5..4").is_err());
        assert!(parse_k_range("4").is_err());
    }
}
