//! Run configuration: a JSON file whose fields mirror the command line
//! flags, with flags taking precedence.

use std::path::{Path, PathBuf};

use ghzsim_core::analysis::{Axis, Param, Params, Regime};
use ghzsim_core::herald::Acceptance;
use serde::{Deserialize, Serialize};

use crate::Error;

/// Raw settings from a config file or from flags; every field optional.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    pub netlist: Option<String>,
    pub regime: Option<String>,
    pub ovl: Option<f64>,
    pub g2: Option<f64>,
    pub p_prep: Option<f64>,
    pub p_ops: Option<f64>,
    pub p_det: Option<f64>,
    pub p_l: Option<f64>,
    pub simplified_loss: Option<bool>,
    pub coverage: Option<f64>,
    pub acceptance: Option<String>,
    pub grid: Option<String>,
    pub out: Option<PathBuf>,
    pub cache: Option<PathBuf>,
    pub threads: Option<usize>,
    pub seed: Option<u64>,
}

impl Settings {
    pub fn load(path: &Path) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Fields of `self` win over those of `base`.
    pub fn over(self, base: Settings) -> Settings {
        Settings {
            netlist: self.netlist.or(base.netlist),
            regime: self.regime.or(base.regime),
            ovl: self.ovl.or(base.ovl),
            g2: self.g2.or(base.g2),
            p_prep: self.p_prep.or(base.p_prep),
            p_ops: self.p_ops.or(base.p_ops),
            p_det: self.p_det.or(base.p_det),
            p_l: self.p_l.or(base.p_l),
            simplified_loss: self.simplified_loss.or(base.simplified_loss),
            coverage: self.coverage.or(base.coverage),
            acceptance: self.acceptance.or(base.acceptance),
            grid: self.grid.or(base.grid),
            out: self.out.or(base.out),
            cache: self.cache.or(base.cache),
            threads: self.threads.or(base.threads),
            seed: self.seed.or(base.seed),
        }
    }
}

/// Where the parameter point comes from.
#[derive(Clone, Debug, PartialEq)]
pub enum PointSpec {
    /// Regime defaults, or the simplified-loss point `p_l` of the regime.
    Regime { regime: Regime, p_l: Option<f64> },
    Explicit(Params),
}

impl PointSpec {
    pub fn params(&self) -> Result<Params, Error> {
        match self {
            PointSpec::Regime { regime, p_l: Some(t) } => Ok(regime.simplified_point(regime.ovl.default, regime.g2.default, *t)?),
            PointSpec::Regime { regime, p_l: None } => Ok(regime.defaults()),
            PointSpec::Explicit(p) => Ok(*p),
        }
    }

    /// The regime, or a degenerate one pinned at the explicit point.
    pub fn regime(&self) -> Regime {
        match self {
            PointSpec::Regime { regime, .. } => regime.clone(),
            PointSpec::Explicit(p) => {
                let pin = |v: f64| ghzsim_core::analysis::Range::new(v, v, v);
                Regime {
                    name: "custom".to_string(),
                    ovl: pin(p.ovl),
                    g2: pin(p.g2),
                    p_prep: pin(p.p_prep),
                    p_ops: pin(p.p_ops),
                    p_det: pin(p.p_det),
                    simplified: false,
                }
            }
        }
    }

    pub fn simplified_loss(&self) -> bool {
        matches!(self, PointSpec::Regime { p_l: Some(_), .. })
    }
}

/// Values of one sweep axis.
#[derive(Clone, Debug, PartialEq)]
pub enum AxisValues {
    List(Vec<f64>),
    Linspace { min: f64, max: f64, n: usize },
    Stepped { min: f64, max: f64, step: f64 },
    /// `n` values over the regime's range of the parameter.
    Range(usize),
}

/// `axis:spec,...` with spec one of `v`, `v1|v2|...`, `lo..hi/n`,
/// `lo..hi@step` or `/n`. Values are fractions, not percent.
#[derive(Clone, Debug, PartialEq)]
pub struct GridSpec {
    pub axes: Vec<(Param, AxisValues)>,
}

fn number(s: &str, what: &str) -> Result<f64, Error> {
    s.trim().parse::<f64>().map_err(|_| Error::Config(format!("--grid: {what} {s:?} is not a number")))
}

impl GridSpec {
    pub fn parse(text: &str) -> Result<Self, Error> {
        let mut axes = Vec::new();
        for part in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (name, spec) =
                part.split_once(':').ok_or_else(|| Error::Config(format!("--grid: {part:?} needs the form axis:spec")))?;
            let param = Param::parse(name.trim()).ok_or_else(|| Error::Config(format!("--grid: unknown axis {name:?}")))?;
            let spec = spec.trim();
            let values = if let Some(n) = spec.strip_prefix('/') {
                AxisValues::Range(n.parse().map_err(|_| Error::Config(format!("--grid: bad count {n:?}")))?)
            } else if let Some((lo, rest)) = spec.split_once("..") {
                if let Some((hi, n)) = rest.split_once('/') {
                    let n = n.parse().map_err(|_| Error::Config(format!("--grid: bad count {n:?}")))?;
                    AxisValues::Linspace { min: number(lo, "lower end")?, max: number(hi, "upper end")?, n }
                } else if let Some((hi, step)) = rest.split_once('@') {
                    AxisValues::Stepped { min: number(lo, "lower end")?, max: number(hi, "upper end")?, step: number(step, "step")? }
                } else {
                    return Err(Error::Config(format!("--grid: range {spec:?} needs /n or @step")));
                }
            } else {
                AxisValues::List(spec.split('|').map(|v| number(v, "value")).collect::<Result<_, _>>()?)
            };
            axes.push((param, values));
        }
        if axes.is_empty() {
            return Err(Error::Config("--grid: no axes".into()));
        }
        Ok(GridSpec { axes })
    }

    pub fn resolve(&self, regime: &Regime) -> Result<Vec<Axis>, Error> {
        let mut out = Vec::new();
        for (p, v) in &self.axes {
            let axis = match v {
                AxisValues::List(xs) => Axis::new(*p, xs.clone())?,
                AxisValues::Linspace { min, max, n } => Axis::linspace(*p, *min, *max, *n)?,
                AxisValues::Stepped { min, max, step } => Axis::stepped(*p, *min, *max, *step)?,
                AxisValues::Range(n) => {
                    let r = regime.range(*p);
                    Axis::linspace(*p, r.min, r.max, *n)?
                }
            };
            out.push(axis);
        }
        Ok(out)
    }
}

/// A validated configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    /// `"canonical"` or a netlist file path.
    pub netlist: String,
    pub point: PointSpec,
    pub coverage: f64,
    pub acceptance: Acceptance,
    pub grid: Option<GridSpec>,
    pub out: Option<PathBuf>,
    pub cache: Option<PathBuf>,
    pub threads: Option<usize>,
    /// Seed of the randomized validation checks; the simulation itself is
    /// deterministic.
    pub seed: u64,
}

pub const DEFAULT_SEED: u64 = 2024;

fn prob(name: &str, v: Option<f64>) -> Result<Option<f64>, Error> {
    match v {
        Some(x) if !(0.0..=1.0).contains(&x) => Err(Error::Config(format!("{name}: {x} outside [0, 1]"))),
        _ => Ok(v),
    }
}

impl RunConfig {
    /// Checks a merged [`Settings`]. `ideal` selects the error-free point.
    pub fn resolve(s: Settings, ideal: bool) -> Result<Self, Error> {
        let ovl = prob("ovl", s.ovl)?;
        let g2 = prob("g2", s.g2)?;
        let p_prep = prob("p_prep", s.p_prep)?;
        let p_ops = prob("p_ops", s.p_ops)?;
        let p_det = prob("p_det", s.p_det)?;
        let p_l = prob("p_l", s.p_l)?;
        let explicit = [ovl, g2, p_prep, p_ops, p_det].iter().any(Option::is_some);
        let point = match (&s.regime, explicit || ideal) {
            (Some(_), true) => {
                return Err(Error::Config(
                    "give either a regime or explicit parameters (ovl, g2, p_prep, p_ops, p_det), not both".into(),
                ))
            }
            (Some(name), false) => {
                let regime = Regime::by_name(name).ok_or_else(|| {
                    Error::Config(format!("regime: unknown {name:?} (spdc, solid-state, close-to-optimal)"))
                })?;
                let simplified = s.simplified_loss.unwrap_or(false) || p_l.is_some();
                PointSpec::Regime { regime, p_l: if simplified { Some(p_l.unwrap_or(0.5)) } else { None } }
            }
            (None, true) => {
                if s.simplified_loss == Some(true) || p_l.is_some() {
                    return Err(Error::Config("simplified loss needs a regime for its loss ranges".into()));
                }
                let d = Params::IDEAL;
                PointSpec::Explicit(Params {
                    ovl: ovl.unwrap_or(d.ovl),
                    g2: g2.unwrap_or(d.g2),
                    p_prep: p_prep.unwrap_or(d.p_prep),
                    p_ops: p_ops.unwrap_or(d.p_ops),
                    p_det: p_det.unwrap_or(d.p_det),
                })
            }
            (None, false) => {
                return Err(Error::Config("no parameters: give --regime, --ideal or explicit parameters".into()))
            }
        };
        let coverage = s.coverage.unwrap_or(ghzsim_core::analysis::DEFAULT_COVERAGE);
        if !(coverage > 0.0 && coverage <= 1.0) {
            return Err(Error::Config(format!("coverage: {coverage} outside (0, 1]")));
        }
        let acceptance = match s.acceptance.as_deref() {
            None | Some("six-fold") => Acceptance::SixFold,
            Some("herald") => Acceptance::Herald,
            Some(a) => return Err(Error::Config(format!("acceptance: unknown {a:?} (six-fold, herald)"))),
        };
        let grid = s.grid.as_deref().map(GridSpec::parse).transpose()?;
        if s.threads == Some(0) {
            return Err(Error::Config("threads: must be at least 1".into()));
        }
        Ok(RunConfig {
            netlist: s.netlist.unwrap_or_else(|| "canonical".to_string()),
            point,
            coverage,
            acceptance,
            grid,
            out: s.out,
            cache: s.cache,
            threads: s.threads,
            seed: s.seed.unwrap_or(DEFAULT_SEED),
        })
    }

    pub fn cache(&self) -> Option<crate::BranchCache> {
        match &self.cache {
            Some(dir) => Some(crate::BranchCache::new(dir.clone())),
            None => crate::BranchCache::from_env(),
        }
    }
}
