//! Run configuration: built-in defaults, overridden by a TOML file, overridden by flags.

use std::path::Path;

use anyhow::{bail, Context, Result};
use clap::Args;
use serde::Deserialize;
use vmsfish::competitors::{RhoMode, ThresholdConfig};
use vmsfish::hmm::{DecodeMethod, EmConfig};
use vmsfish::pipeline::{GroupingMode, Method, PipelineConfig};
use vmsfish::trajectory::{KinematicOptions, ObservationVariant, SpeedSource};

pub const DEFAULT_SEED: u64 = 1;
pub const DEFAULT_K: usize = 3;
pub const DEFAULT_TRIP_GAP_HOURS: f64 = 24.0;

/// Contents of a `--config` file. Every key is optional.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    pub method: Option<String>,
    pub methods: Option<Vec<String>>,
    pub k: Option<usize>,
    pub grouping: Option<String>,
    pub variant: Option<String>,
    pub decode: Option<String>,
    pub rho_mode: Option<String>,
    pub lo: Option<f64>,
    pub hi: Option<f64>,
    pub max_gap_hours: Option<f64>,
    pub trip_gap_hours: Option<f64>,
    pub reported_speed: Option<bool>,
    #[serde(default)]
    pub em: EmSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmSection {
    pub max_iter: Option<usize>,
    pub tol: Option<f64>,
    pub restarts: Option<usize>,
    pub min_variance: Option<f64>,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("invalid config {}", path.display()))
    }
}

pub fn parse_k(s: &str) -> std::result::Result<usize, String> {
    let k: usize = s.parse().map_err(|_| format!("`{s}` is not a positive integer"))?;
    if k < 2 {
        return Err(format!("K must be at least 2 (labelling needs a reference and a second component), got {k}"));
    }
    Ok(k)
}

pub fn parse_rho_mode(s: &str) -> Result<RhoMode<f64>> {
    Ok(match s {
        "shared" => RhoMode::Shared,
        "per-coordinate" => RhoMode::PerCoordinate,
        other => match other.strip_prefix("fixed:").map(str::parse::<f64>) {
            Some(Ok(v)) if v.abs() < 1.0 => RhoMode::Fixed(v),
            _ => bail!("unknown rho mode `{other}` (expected shared, per-coordinate or fixed:<value in (-1, 1)>)"),
        },
    })
}

pub fn parse_decode(s: &str) -> Result<DecodeMethod> {
    Ok(match s {
        "viterbi" => DecodeMethod::Viterbi,
        "posterior" => DecodeMethod::PosteriorMode,
        other => bail!("unknown decode method `{other}` (expected viterbi or posterior)"),
    })
}

/// Kinematics and trip segmentation flags shared by every subcommand that reads pings.
#[derive(Debug, Args)]
pub struct KinematicArgs {
    /// Split a vessel's pings into trips at gaps longer than this when trip ids are absent [default: 24]
    #[arg(long, value_name = "HOURS")]
    pub trip_gap_hours: Option<f64>,
    /// Intervals longer than this are excluded from fitting and left unestimated [default: 4]
    #[arg(long, value_name = "HOURS")]
    pub max_gap_hours: Option<f64>,
    /// Use transponder-reported speeds instead of position-derived speeds
    #[arg(long)]
    pub reported_speed: bool,
}

/// Model and estimation flags shared by `fit` and `evaluate`.
#[derive(Debug, Args)]
pub struct ModelArgs {
    /// Number of Gaussian components of the DMKMG model [default: 3]
    #[arg(long, value_name = "K", value_parser = parse_k)]
    pub k: Option<usize>,
    /// Observation vector: speed or speed-angular [default: speed]
    #[arg(long, value_name = "VARIANT")]
    pub variant: Option<String>,
    /// Lower speed threshold for the threshold method, knots (requires --hi)
    #[arg(long, value_name = "KNOTS", requires = "hi")]
    pub lo: Option<f64>,
    /// Upper speed threshold for the threshold method, knots (requires --lo)
    #[arg(long, value_name = "KNOTS", requires = "lo")]
    pub hi: Option<f64>,
    /// Autoregressive coefficient structure of DMARP: shared, per-coordinate or fixed:<value> [default: shared]
    #[arg(long, value_name = "MODE")]
    pub rho_mode: Option<String>,
    /// Maximum EM iterations per restart [default: 500]
    #[arg(long, value_name = "N")]
    pub max_iter: Option<usize>,
    /// Relative log-likelihood change declaring convergence [default: 1e-6]
    #[arg(long, value_name = "TOL")]
    pub tol: Option<f64>,
    /// Random EM restarts per fit [default: 5]
    #[arg(long, value_name = "N")]
    pub restarts: Option<usize>,
    /// Variance floor for every covariance eigenvalue [default: 1e-4]
    #[arg(long, value_name = "VAR")]
    pub min_variance: Option<f64>,
}

/// Everything a subcommand needs after merging defaults, file and flags.
#[derive(Debug, Clone)]
pub struct Settings {
    pub seed: u64,
    pub pipeline: PipelineConfig,
    pub trip_gap_hours: f64,
    pub k: usize,
    pub variant: ObservationVariant,
    pub manual_thresholds: Option<ThresholdConfig>,
}

impl Settings {
    pub fn resolve(file: &RunConfig, seed: Option<u64>, kin: &KinematicArgs, model: Option<&ModelArgs>) -> Result<Self> {
        let pick = |flag: Option<f64>, cfg: Option<f64>| flag.or(cfg);
        let mut kinematics = KinematicOptions::default();
        if let Some(g) = pick(kin.max_gap_hours, file.max_gap_hours) {
            if !(g > 0.0) {
                bail!("--max-gap-hours must be positive");
            }
            kinematics.max_gap_hours = g;
        }
        if kin.reported_speed || file.reported_speed.unwrap_or(false) {
            kinematics.speed_source = SpeedSource::Reported;
        }
        let trip_gap_hours = pick(kin.trip_gap_hours, file.trip_gap_hours).unwrap_or(DEFAULT_TRIP_GAP_HOURS);

        let mut em = EmConfig::<f64>::default();
        let mut k = file.k.unwrap_or(DEFAULT_K);
        let mut variant_name = file.variant.clone();
        let mut rho_name = file.rho_mode.clone();
        let (mut lo, mut hi) = (file.lo, file.hi);
        em.max_iter = file.em.max_iter.unwrap_or(em.max_iter);
        em.tol = file.em.tol.unwrap_or(em.tol);
        em.n_restarts = file.em.restarts.unwrap_or(em.n_restarts);
        em.min_variance = file.em.min_variance.unwrap_or(em.min_variance);
        if let Some(m) = model {
            k = m.k.unwrap_or(k);
            variant_name = m.variant.clone().or(variant_name);
            rho_name = m.rho_mode.clone().or(rho_name);
            if m.lo.is_some() {
                (lo, hi) = (m.lo, m.hi);
            }
            em.max_iter = m.max_iter.unwrap_or(em.max_iter);
            em.tol = m.tol.unwrap_or(em.tol);
            em.n_restarts = m.restarts.unwrap_or(em.n_restarts);
            em.min_variance = m.min_variance.unwrap_or(em.min_variance);
        }
        if k < 2 {
            bail!("K must be at least 2 (labelling needs a reference and a second component), got {k}");
        }
        if em.max_iter == 0 || em.n_restarts == 0 || !(em.tol > 0.0) || !(em.min_variance > 0.0) {
            bail!("EM settings must be positive");
        }
        let variant = match variant_name {
            Some(v) => v.parse()?,
            None => ObservationVariant::default(),
        };
        let manual_thresholds = match (lo, hi) {
            (Some(lo), Some(hi)) => Some(ThresholdConfig::new(lo, hi)?),
            (None, None) => None,
            _ => bail!("thresholds need both lo and hi"),
        };
        let rho_mode = match rho_name {
            Some(r) => parse_rho_mode(&r)?,
            None => RhoMode::Shared,
        };
        let decode = match &file.decode {
            Some(d) => parse_decode(d)?,
            None => DecodeMethod::Viterbi,
        };
        Ok(Self {
            seed: seed.or(file.seed).unwrap_or(DEFAULT_SEED),
            pipeline: PipelineConfig { kinematics, em, rho_mode, decode },
            trip_gap_hours,
            k,
            variant,
            manual_thresholds,
        })
    }

    pub fn method(&self, name: &str) -> Result<Method> {
        Ok(Method::parse(name, self.k, self.variant, self.manual_thresholds)?)
    }
}

pub fn grouping_or(flag: Option<&str>, file: &RunConfig, default: GroupingMode) -> Result<GroupingMode> {
    match flag.or(file.grouping.as_deref()) {
        Some(g) => Ok(g.parse()?),
        None => Ok(default),
    }
}
