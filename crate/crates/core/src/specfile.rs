//! On-disk problem format.
//!
//! A problem file is JSON (or TOML when the path ends in `.toml`) with the
//! top-level fields
//!
//! ```json
//! {
//!   "n_states": 2,
//!   "alpha": 0.5,
//!   "kind": "fh",            // or "fe" / "ih"
//!   "horizon": 3,            // fh only
//!   "terminal_states": [1],  // fe only
//!   "q": [0.0, 1.0],         // or [{"state": 0, "t": 0, "value": 0.0}, ...] (fh only)
//!   "q_final": [0.0, 2.0],   // optional, fh/fe
//!   "passive": [{"from": 0, "to": 1, "prob": 1.0}, ...],
//!   "labels": ["a", "b"],    // optional
//!   "grid": {"shape": [..], "low": [..], "high": [..]}  // optional
//! }
//! ```
//!
//! Unknown fields are rejected. Probabilities are used exactly as written;
//! rows must already sum to one unless renormalization is requested.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::model::{
    CostModel, GridInfo, HorizonKind, ProblemSpec, RunningCost, StateSpace,
};
use crate::sparse::SparseRowStochasticMatrix;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum KindName {
    Fh,
    Fe,
    Ih,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Triplet {
    from: usize,
    to: usize,
    prob: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CostTriplet {
    state: usize,
    t: usize,
    value: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum CostField {
    Dense(Vec<f64>),
    Triplets(Vec<CostTriplet>),
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridField {
    shape: Vec<usize>,
    low: Vec<f64>,
    high: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpecFile {
    n_states: usize,
    alpha: f64,
    kind: KindName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    horizon: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    terminal_states: Option<Vec<usize>>,
    q: CostField,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    q_final: Option<Vec<f64>>,
    passive: Vec<Triplet>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    labels: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    grid: Option<GridField>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpecFormat {
    Json,
    Toml,
}

impl SpecFormat {
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("toml") => SpecFormat::Toml,
            _ => SpecFormat::Json,
        }
    }
}

/// Reads and validates a problem file.
pub fn load_spec(path: impl AsRef<Path>, renormalize: bool) -> Result<ProblemSpec> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    parse_spec(&text, SpecFormat::from_path(path), renormalize)
        .map_err(|e| match e {
            Error::Parse(msg) => Error::Parse(format!("{}: {msg}", path.display())),
            other => other,
        })
}

pub fn parse_spec(text: &str, format: SpecFormat, renormalize: bool) -> Result<ProblemSpec> {
    let file: SpecFile = match format {
        SpecFormat::Json => serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?,
        SpecFormat::Toml => toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?,
    };
    file.into_spec(renormalize)
}

impl SpecFile {
    fn into_spec(self, renormalize: bool) -> Result<ProblemSpec> {
        let n = self.n_states;
        let kind = match self.kind {
            KindName::Fh => {
                let horizon = self
                    .horizon
                    .ok_or_else(|| Error::Parse("field `horizon` is required for kind fh".into()))?;
                if self.terminal_states.is_some() {
                    return Err(Error::Parse("`terminal_states` is only valid for kind fe".into()));
                }
                HorizonKind::FiniteHorizon { horizon }
            }
            KindName::Fe => {
                let terminal_states = self.terminal_states.ok_or_else(|| {
                    Error::Parse("field `terminal_states` is required for kind fe".into())
                })?;
                if self.horizon.is_some() {
                    return Err(Error::Parse("`horizon` is only valid for kind fh".into()));
                }
                HorizonKind::FirstExit { terminal_states }
            }
            KindName::Ih => {
                if self.horizon.is_some() || self.terminal_states.is_some() {
                    return Err(Error::Parse(
                        "kind ih takes neither `horizon` nor `terminal_states`".into(),
                    ));
                }
                HorizonKind::InfiniteHorizonAverage
            }
        };

        let running = match self.q {
            CostField::Dense(q) => RunningCost::Stationary(q),
            CostField::Triplets(entries) => {
                let HorizonKind::FiniteHorizon { horizon } = kind else {
                    return Err(Error::Parse(
                        "per-time cost triplets are only valid for kind fh".into(),
                    ));
                };
                let stages = if self.q_final.is_some() { horizon } else { horizon + 1 };
                let mut table: Vec<Vec<Option<f64>>> = vec![vec![None; n]; stages];
                for e in entries {
                    if e.t >= stages || e.state >= n {
                        return Err(Error::Parse(format!(
                            "cost triplet (state {}, t {}) is out of range",
                            e.state, e.t
                        )));
                    }
                    let slot = &mut table[e.t][e.state];
                    if slot.is_some() {
                        return Err(Error::Parse(format!(
                            "cost triplet (state {}, t {}) appears twice",
                            e.state, e.t
                        )));
                    }
                    *slot = Some(e.value);
                }
                let mut out = Vec::with_capacity(stages);
                for (t, row) in table.into_iter().enumerate() {
                    let mut stage = Vec::with_capacity(n);
                    for (s, v) in row.into_iter().enumerate() {
                        stage.push(v.ok_or_else(|| {
                            Error::Parse(format!("missing cost for state {s} at t {t}"))
                        })?);
                    }
                    out.push(stage);
                }
                RunningCost::TimeVarying(out)
            }
        };

        let passive = SparseRowStochasticMatrix::from_triplets(
            n,
            self.passive.into_iter().map(|t| (t.from, t.to, t.prob)),
            renormalize,
        )?;
        let spec = ProblemSpec::new(
            StateSpace::new(n, self.labels)?,
            passive,
            CostModel {
                running,
                final_cost: self.q_final,
            },
            self.alpha,
            kind,
        )?;
        match self.grid {
            Some(g) => spec.with_grid(GridInfo {
                shape: g.shape,
                low: g.low,
                high: g.high,
            }),
            None => Ok(spec),
        }
    }

    fn from_spec(spec: &ProblemSpec) -> Self {
        let (kind, horizon, terminal_states) = match spec.kind() {
            HorizonKind::FiniteHorizon { horizon } => (KindName::Fh, Some(*horizon), None),
            HorizonKind::FirstExit { terminal_states } => {
                (KindName::Fe, None, Some(terminal_states.clone()))
            }
            HorizonKind::InfiniteHorizonAverage => (KindName::Ih, None, None),
        };
        let q = match &spec.costs().running {
            RunningCost::Stationary(q) => CostField::Dense(q.clone()),
            RunningCost::TimeVarying(qs) => CostField::Triplets(
                qs.iter()
                    .enumerate()
                    .flat_map(|(t, q)| {
                        q.iter().enumerate().map(move |(state, &value)| CostTriplet {
                            state,
                            t,
                            value,
                        })
                    })
                    .collect(),
            ),
        };
        SpecFile {
            n_states: spec.n_states(),
            alpha: spec.alpha(),
            kind,
            horizon,
            terminal_states,
            q,
            q_final: spec.costs().final_cost.clone(),
            passive: spec
                .passive()
                .triplets()
                .map(|(from, to, prob)| Triplet { from, to, prob })
                .collect(),
            labels: spec.state_space().labels().map(|l| l.to_vec()),
            grid: spec.grid().map(|g| GridField {
                shape: g.shape.clone(),
                low: g.low.clone(),
                high: g.high.clone(),
            }),
        }
    }
}

/// Serializes a problem in the given format.
pub fn spec_to_string(spec: &ProblemSpec, format: SpecFormat) -> Result<String> {
    let file = SpecFile::from_spec(spec);
    match format {
        SpecFormat::Json => serde_json::to_string(&file).map_err(|e| Error::Parse(e.to_string())),
        SpecFormat::Toml => toml::to_string(&file).map_err(|e| Error::Parse(e.to_string())),
    }
}

pub fn save_spec(spec: &ProblemSpec, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, spec_to_string(spec, SpecFormat::from_path(path))?)?;
    Ok(())
}
