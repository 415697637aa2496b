//! Plain-text model files.
//!
//! A file starts with `vmsfish-model <version>` and ends with `end`. Each
//! line in between is a keyword followed by whitespace-separated values.
//! Component and state indices are 1-based. Floats are written in shortest
//! round-trip form (`Debug`), so reading a written model gives identical parameters.
//!
//! ```text
//! vmsfish-model 1
//! method dmkmg
//! grouping trip
//! unit V001-3
//! variant speed
//! k 2
//! log_likelihood -812.25
//! initial 0.5 0.5
//! transition 1 0.9 0.1
//! transition 2 0.2 0.8
//! component 1 mean 3.0 cov 1.0
//! component 2 mean 9.0 cov 1.0
//! reference 1 3.01 0.97
//! fishing 1
//! fallback true
//! label 1 fishing
//! label 2 steaming
//! end
//! ```

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use crate::activity::Activity;
use crate::competitors::{DmarpParams, DmarpState, ThresholdConfig};
use crate::error::{Error, Result};
use crate::hmm::{GaussianComponent, HmmParams, MarkovChain};
use crate::labelling::{LabelMap, ReferenceSummary};
use crate::linalg::SymMatrix;
use crate::pipeline::{ActivityModel, GroupingMode};
use crate::trajectory::ObservationVariant;

pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &str = "vmsfish-model";

/// A fitted model together with the unit it was fitted on.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelFile {
    pub grouping: GroupingMode,
    pub unit_id: String,
    pub model: ActivityModel,
    pub log_likelihood: Option<f64>,
}

fn join(values: &[f64]) -> String {
    values.iter().map(|v| format!("{v:?}")).collect::<Vec<_>>().join(" ")
}

fn write_chain(s: &mut String, chain: &MarkovChain<f64>) {
    let k = chain.k();
    let _ = writeln!(s, "k {k}");
    let _ = writeln!(s, "initial {}", join(chain.initial()));
    for i in 0..k {
        let _ = writeln!(s, "transition {} {}", i + 1, join(chain.row(i)));
    }
}

pub fn render_model(file: &ModelFile) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{MAGIC} {FORMAT_VERSION}");
    let _ = writeln!(s, "method {}", file.model.method_name());
    let _ = writeln!(s, "grouping {}", file.grouping.as_str());
    let _ = writeln!(s, "unit {}", file.unit_id);
    if let Some(ll) = file.log_likelihood {
        let _ = writeln!(s, "log_likelihood {ll:?}");
    }
    match &file.model {
        ActivityModel::Dmkmg { params, labels, variant } => {
            let _ = writeln!(s, "variant {}", variant.as_str());
            write_chain(&mut s, params.chain());
            for (j, c) in params.components().iter().enumerate() {
                let _ = writeln!(s, "component {} mean {} cov {}", j + 1, join(&c.mean), join(c.cov.as_slice()));
            }
            let r = &labels.reference;
            let _ = writeln!(s, "reference {} {:?} {:?}", r.component + 1, r.mean, r.variance);
            let subset: Vec<String> = labels.chosen_subset.iter().map(|j| (j + 1).to_string()).collect();
            let _ = writeln!(s, "fishing {}", subset.join(" "));
            let _ = writeln!(s, "fallback {}", labels.fallback);
            for (j, a) in labels.activities.iter().enumerate() {
                let _ = writeln!(s, "label {} {a}", j + 1);
            }
        }
        ActivityModel::Threshold(cfg) => {
            let _ = writeln!(s, "lo {:?}", cfg.lo());
            let _ = writeln!(s, "hi {:?}", cfg.hi());
        }
        ActivityModel::Dmarp(p) => {
            write_chain(&mut s, p.chain());
            for (j, st) in p.states().iter().enumerate() {
                let _ = writeln!(
                    s,
                    "state {} mean {} rho {} cov {}",
                    j + 1,
                    join(&st.mean),
                    join(&st.rho),
                    join(st.cov.as_slice())
                );
            }
        }
    }
    s.push_str("end\n");
    s
}

pub fn write_model<W: Write>(mut out: W, file: &ModelFile) -> Result<()> {
    out.write_all(render_model(file).as_bytes())?;
    Ok(())
}

struct Line {
    number: usize,
    key: String,
    rest: String,
}

impl Line {
    fn err(&self, reason: impl Into<String>) -> Error {
        Error::ModelFormat { line: self.number, reason: reason.into() }
    }

    fn floats(&self) -> Result<Vec<f64>> {
        self.rest
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|_| self.err(format!("`{t}` is not a number"))))
            .collect()
    }

    fn single<T: std::str::FromStr>(&self) -> Result<T> {
        self.rest.trim().parse().map_err(|_| self.err(format!("invalid value for `{}`", self.key)))
    }

    /// Splits `"<index> <label> v v v <label> v v"` into the 0-based index and labelled groups.
    fn indexed_groups(&self, labels: &[&str]) -> Result<(usize, Vec<Vec<f64>>)> {
        let mut tokens = self.rest.split_whitespace();
        let idx: usize = tokens
            .next()
            .and_then(|t| t.parse().ok())
            .filter(|&i: &usize| i >= 1)
            .ok_or_else(|| self.err("missing 1-based index"))?;
        let mut groups: Vec<Vec<f64>> = vec![Vec::new(); labels.len()];
        let mut current: Option<usize> = None;
        for t in tokens {
            if let Some(g) = labels.iter().position(|l| *l == t) {
                current = Some(g);
            } else {
                let g = current.ok_or_else(|| self.err(format!("value `{t}` before a label")))?;
                groups[g].push(t.parse().map_err(|_| self.err(format!("`{t}` is not a number")))?);
            }
        }
        Ok((idx - 1, groups))
    }
}

pub fn read_model<R: BufRead>(input: R) -> Result<ModelFile> {
    let mut lines = Vec::new();
    for (i, l) in input.lines().enumerate() {
        let l = l?;
        let trimmed = l.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let (key, rest) = trimmed.split_once(char::is_whitespace).unwrap_or((trimmed, ""));
        lines.push(Line { number: i + 1, key: key.to_string(), rest: rest.trim().to_string() });
    }
    let first = lines.first().ok_or(Error::ModelFormat { line: 1, reason: "empty model file".into() })?;
    if first.key != MAGIC {
        return Err(first.err(format!("expected `{MAGIC} <version>` header")));
    }
    let version: u32 = first.single()?;
    if version != FORMAT_VERSION {
        return Err(first.err(format!("unsupported format version {version} (this build reads {FORMAT_VERSION})")));
    }
    let last = lines.last().expect("non-empty");
    if last.key != "end" {
        return Err(last.err("missing `end` line (truncated file?)"));
    }
    let body = &lines[1..lines.len() - 1];
    let find = |key: &str| body.iter().find(|l| l.key == key);
    let need = |key: &str| find(key).ok_or(Error::ModelFormat { line: last.number, reason: format!("missing `{key}` line") });

    let method = need("method")?.rest.clone();
    let grouping: GroupingMode = need("grouping")?.rest.parse()?;
    let unit_id = need("unit")?.rest.clone();
    let log_likelihood = find("log_likelihood").map(|l| l.single::<f64>()).transpose()?;

    let read_chain = || -> Result<(usize, MarkovChain<f64>)> {
        let kl = need("k")?;
        let k: usize = kl.single()?;
        let initial = need("initial")?.floats()?;
        let mut rows = vec![None; k];
        for l in body.iter().filter(|l| l.key == "transition") {
            let vals = l.floats()?;
            let i = match vals.first() {
                Some(&x) if x >= 1.0 && x.fract() == 0.0 => x as usize - 1,
                _ => return Err(l.err("missing 1-based row index")),
            };
            let vals = vals[1..].to_vec();
            if i >= k || vals.len() != k {
                return Err(l.err(format!("transition row must have index ≤ {k} and {k} entries")));
            }
            rows[i] = Some(vals);
        }
        let transition: Vec<f64> = rows
            .into_iter()
            .enumerate()
            .map(|(i, r)| r.ok_or(Error::ModelFormat { line: kl.number, reason: format!("missing transition row {}", i + 1) }))
            .collect::<Result<Vec<_>>>()?
            .concat();
        let chain = MarkovChain::new(initial, transition).map_err(|e| kl.err(e.to_string()))?;
        Ok((k, chain))
    };

    let model = match method.as_str() {
        "dmkmg" => {
            let variant: ObservationVariant = need("variant")?.rest.parse()?;
            let d = variant.dim();
            let (k, chain) = read_chain()?;
            let mut comps = vec![None; k];
            for l in body.iter().filter(|l| l.key == "component") {
                let (j, g) = l.indexed_groups(&["mean", "cov"])?;
                if j >= k || g[0].len() != d || g[1].len() != d * d {
                    return Err(l.err(format!("component needs index ≤ {k}, {d} mean and {} cov values", d * d)));
                }
                let cov = SymMatrix::from_row_major(d, g[1].clone()).map_err(|e| l.err(e.to_string()))?;
                comps[j] = Some(GaussianComponent { mean: g[0].clone(), cov });
            }
            let components = comps
                .into_iter()
                .enumerate()
                .map(|(j, c)| c.ok_or(Error::ModelFormat { line: last.number, reason: format!("missing component {}", j + 1) }))
                .collect::<Result<Vec<_>>>()?;
            let params = HmmParams::new(chain, components)?;
            let rl = need("reference")?;
            let rv = rl.floats()?;
            if rv.len() != 3 || rv[0] < 1.0 || rv[0].fract() != 0.0 {
                return Err(rl.err("reference needs component, mean and variance"));
            }
            let reference = ReferenceSummary { component: rv[0] as usize - 1, mean: rv[1], variance: rv[2] };
            let fl = need("fishing")?;
            let subset = fl
                .rest
                .split_whitespace()
                .map(|t| match t.parse::<usize>() {
                    Ok(j) if (1..=k).contains(&j) => Ok(j - 1),
                    _ => Err(fl.err(format!("`{t}` is not a component index in 1..={k}"))),
                })
                .collect::<Result<Vec<_>>>()?;
            if subset.is_empty() {
                return Err(fl.err("empty fishing subset"));
            }
            let fallback: bool = need("fallback")?.single()?;
            let labels = LabelMap::from_subset(k, subset, reference, fallback);
            for l in body.iter().filter(|l| l.key == "label") {
                let (j, activity) = l.rest.split_once(char::is_whitespace).ok_or_else(|| l.err("expected `label <component> <activity>`"))?;
                let j: usize = j.parse().ok().filter(|j| (1..=k).contains(j)).ok_or_else(|| l.err(format!("`{j}` is not a component index in 1..={k}")))?;
                let activity: Activity = activity.trim().parse().map_err(|_| l.err(format!("unknown activity `{}`", activity.trim())))?;
                if labels.activities[j - 1] != activity {
                    return Err(l.err(format!("label of component {j} contradicts the fishing subset")));
                }
            }
            ActivityModel::Dmkmg { params, labels, variant }
        }
        "threshold" => {
            let lo: f64 = need("lo")?.single()?;
            let hi: f64 = need("hi")?.single()?;
            ActivityModel::Threshold(ThresholdConfig::new(lo, hi).map_err(|e| need("lo").map(|l| l.err(e.to_string())).unwrap_or(e))?)
        }
        "dmarp" => {
            let (k, chain) = read_chain()?;
            let mut states = vec![None; k];
            for l in body.iter().filter(|l| l.key == "state") {
                let (j, g) = l.indexed_groups(&["mean", "rho", "cov"])?;
                if j >= k || g[0].len() != 2 || g[1].len() != 2 || g[2].len() != 4 {
                    return Err(l.err("state needs 2 mean, 2 rho and 4 cov values"));
                }
                let cov = SymMatrix::from_row_major(2, g[2].clone()).map_err(|e| l.err(e.to_string()))?;
                states[j] = Some(DmarpState { mean: [g[0][0], g[0][1]], rho: [g[1][0], g[1][1]], cov });
            }
            let states = states
                .into_iter()
                .enumerate()
                .map(|(j, s)| s.ok_or(Error::ModelFormat { line: last.number, reason: format!("missing state {}", j + 1) }))
                .collect::<Result<Vec<_>>>()?;
            ActivityModel::Dmarp(DmarpParams::new(chain, states)?)
        }
        other => return Err(need("method")?.err(format!("unknown method `{other}`"))),
    };
    Ok(ModelFile { grouping, unit_id, model, log_likelihood })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dmkmg() -> ModelFile {
        let chain = MarkovChain::new(vec![0.25, 0.75], vec![0.9, 0.1, 0.2, 0.8]).unwrap();
        let comps = vec![
            GaussianComponent { mean: vec![3.0123456789, 12.5], cov: SymMatrix::from_row_major(2, vec![0.49, 0.1, 0.1, 900.0]).unwrap() },
            GaussianComponent { mean: vec![9.1, -1.0 / 3.0], cov: SymMatrix::from_row_major(2, vec![1.0, 0.0, 0.0, 50.0]).unwrap() },
        ];
        let reference = ReferenceSummary { component: 0, mean: 3.01, variance: 0.5 };
        ModelFile {
            grouping: GroupingMode::PerTrip,
            unit_id: "V001-3".into(),
            model: ActivityModel::Dmkmg {
                params: HmmParams::new(chain, comps).unwrap(),
                labels: LabelMap::from_subset(2, vec![0], reference, true),
                variant: ObservationVariant::SpeedAngular,
            },
            log_likelihood: Some(-1234.5678),
        }
    }

    fn round_trip(f: &ModelFile) -> ModelFile {
        read_model(render_model(f).as_bytes()).unwrap()
    }

    #[test]
    fn dmkmg_round_trip() {
        let f = dmkmg();
        assert_eq!(round_trip(&f), f);
    }

    #[test]
    fn threshold_and_dmarp_round_trip() {
        let t = ModelFile {
            grouping: GroupingMode::AllData,
            unit_id: "all".into(),
            model: ActivityModel::Threshold(ThresholdConfig::new(1.9, 4.2).unwrap()),
            log_likelihood: None,
        };
        assert_eq!(round_trip(&t), t);
        let chain = MarkovChain::new(vec![0.5, 0.5], vec![0.9, 0.1, 0.2, 0.8]).unwrap();
        let st = |m: f64, r: f64| DmarpState { mean: [m, 0.01], rho: [r, r], cov: SymMatrix::from_row_major(2, vec![1.0, 0.2, 0.2, 2.0]).unwrap() };
        let d = ModelFile {
            grouping: GroupingMode::PerVessel,
            unit_id: "V007".into(),
            model: ActivityModel::Dmarp(DmarpParams::new(chain, vec![st(3.0, 0.6), st(10.0, 0.2)]).unwrap()),
            log_likelihood: Some(-10.0),
        };
        assert_eq!(round_trip(&d), d);
    }

    #[test]
    fn rejects_bad_files() {
        let text = render_model(&dmkmg());
        assert!(matches!(read_model(text.replace("vmsfish-model 1", "vmsfish-model 9").as_bytes()), Err(Error::ModelFormat { line: 1, .. })));
        assert!(matches!(read_model(text.replace("end\n", "").as_bytes()), Err(Error::ModelFormat { .. })));
        assert!(read_model(text.replace("fishing 1", "fishing 3").as_bytes()).is_err());
        assert!(read_model(text.replace("cov 1.0 0.0 0.0 50.0", "cov 1.0 0.0").as_bytes()).is_err());
        assert!(read_model("".as_bytes()).is_err());
        assert!(read_model(text.replace("label 1 fishing", "label 1 steaming").as_bytes()).is_err());
    }
}
