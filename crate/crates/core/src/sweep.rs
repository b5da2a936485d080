//! Hyperparameter grids over [`SamplerConfig`] fields.
//!
//! Grid specs have the form `param=values` where `values` is one of
//! - `start:step:end` — inclusive arithmetic range, e.g. `alpha=0.05:0.05:10.0`;
//! - `log:start:end:count` — `count` log-spaced points, ends included;
//! - `v1,v2,...` — an explicit list.
//!
//! Range points are rounded to 12 decimals so `0.05:0.05:10.0` yields
//! `0.15` rather than `0.15000000000000002`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{KfsError, Result};
use crate::samplers::{Method, SamplerConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridParam {
    Alpha,
    Tau,
    Gamma,
    Budget,
    Seed,
}

impl GridParam {
    fn as_str(self) -> &'static str {
        match self {
            GridParam::Alpha => "alpha",
            GridParam::Tau => "tau",
            GridParam::Gamma => "gamma",
            GridParam::Budget => "budget",
            GridParam::Seed => "seed",
        }
    }

    fn is_integer(self) -> bool {
        matches!(self, GridParam::Budget | GridParam::Seed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Grid {
    pub param: GridParam,
    pub values: Vec<f64>,
    spec: String,
}

fn round12(x: f64) -> f64 {
    (x * 1e12).round() / 1e12
}

fn number(s: &str, spec: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| KfsError::precondition(format!("grid `{spec}`: `{s}` is not a finite number")))
}

impl Grid {
    pub fn parse(spec: &str) -> Result<Self> {
        let bad = |reason: &str| KfsError::precondition(format!("grid `{spec}`: {reason}"));
        let (name, body) = spec.split_once('=').ok_or_else(|| bad("expected `param=values`"))?;
        let param = match name.trim() {
            "alpha" => GridParam::Alpha,
            "tau" => GridParam::Tau,
            "gamma" => GridParam::Gamma,
            "budget" => GridParam::Budget,
            "seed" => GridParam::Seed,
            other => return Err(bad(&format!("unknown parameter `{other}`"))),
        };
        let parts: Vec<&str> = body.split(':').collect();
        let values = match parts.as_slice() {
            ["log", start, end, count] => {
                let (a, b) = (number(start, spec)?, number(end, spec)?);
                let count: usize = count.trim().parse().map_err(|_| bad("log count must be an integer"))?;
                if !(a > 0.0 && b > 0.0) || count < 2 {
                    return Err(bad("log grids need positive ends and at least 2 points"));
                }
                let (la, lb) = (a.ln(), b.ln());
                (0..count)
                    .map(|i| match i {
                        0 => a,
                        i if i == count - 1 => b,
                        i => (la + (lb - la) * i as f64 / (count - 1) as f64).exp(),
                    })
                    .collect()
            }
            [start, step, end] => {
                let (a, h, b) = (number(start, spec)?, number(step, spec)?, number(end, spec)?);
                if !(h > 0.0) || b < a {
                    return Err(bad("ranges need step > 0 and start <= end"));
                }
                let count = ((b - a) / h + 1e-9).floor() as usize + 1;
                (0..count).map(|i| round12(a + i as f64 * h)).collect()
            }
            [list] => list.split(',').map(|v| number(v, spec)).collect::<Result<Vec<_>>>()?,
            _ => return Err(bad("expected start:step:end, log:start:end:count or a comma list")),
        };
        if values.is_empty() {
            return Err(bad("no values"));
        }
        if param.is_integer() && values.iter().any(|v| v.fract() != 0.0 || *v < 0.0) {
            return Err(bad("budget and seed values must be nonnegative integers"));
        }
        Ok(Grid {
            param,
            values,
            spec: spec.to_string(),
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `base` with the grid parameter set to each value; all validated.
    pub fn configs(&self, base: &SamplerConfig) -> Result<Vec<SamplerConfig>> {
        self.values
            .iter()
            .map(|&v| {
                let mut cfg = *base;
                match self.param {
                    GridParam::Alpha => cfg.alpha = v,
                    GridParam::Tau => cfg.tau = v,
                    GridParam::Gamma => cfg.gamma = v,
                    GridParam::Budget => cfg.budget = v as usize,
                    GridParam::Seed => cfg.seed = v as u64,
                }
                cfg.validate()?;
                Ok(cfg)
            })
            .collect()
    }
}

impl fmt::Display for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.spec)
    }
}

impl FromStr for Grid {
    type Err = KfsError;

    fn from_str(s: &str) -> Result<Self> {
        Grid::parse(s)
    }
}

impl TryFrom<String> for Grid {
    type Error = KfsError;

    fn try_from(s: String) -> Result<Self> {
        Grid::parse(&s)
    }
}

impl From<Grid> for String {
    fn from(g: Grid) -> String {
        g.spec
    }
}

/// A named grid over a base configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub name: String,
    pub base: SamplerConfig,
    pub grid: Grid,
}

impl Sweep {
    pub fn configs(&self) -> Result<Vec<SamplerConfig>> {
        self.grid.configs(&self.base)
    }
}

/// Frame budget of the default study.
pub const STUDY_BUDGET: usize = 32;
pub const ITS_ALPHA_GRID: &str = "alpha=0.05:0.05:10.0";
pub const ASCS_TAU_GRID: &str = "tau=log:0.01:10:20";

/// ITS over the 200-point alpha grid and ASCS over 20 log-spaced
/// temperatures (ASCS at the long-video alpha).
pub fn default_study_sweeps() -> Vec<Sweep> {
    vec![
        Sweep {
            name: "its-alpha".into(),
            base: SamplerConfig::new(Method::Its, STUDY_BUDGET),
            grid: Grid::parse(ITS_ALPHA_GRID).expect("valid grid"),
        },
        Sweep {
            name: "ascs-tau".into(),
            base: SamplerConfig {
                alpha: crate::samplers::LONG_VIDEO_ALPHA,
                ..SamplerConfig::new(Method::Ascs, STUDY_BUDGET)
            },
            grid: Grid::parse(ASCS_TAU_GRID).expect("valid grid"),
        },
    ]
}

impl fmt::Display for GridParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}
