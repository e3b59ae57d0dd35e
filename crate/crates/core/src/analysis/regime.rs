use alloc::string::{String, ToString};
use core::fmt;

use super::AnalysisError;

/// Error parameter of the model. `PL` is the simplified loss coefficient
/// that moves all three loss rates together.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Param {
    Ovl,
    G2,
    PPrep,
    POps,
    PDet,
    PL,
}

impl Param {
    pub const FULL: [Param; 5] = [Param::Ovl, Param::G2, Param::PPrep, Param::POps, Param::PDet];
    pub const SIMPLIFIED: [Param; 3] = [Param::Ovl, Param::G2, Param::PL];
    pub const LOSSES: [Param; 3] = [Param::PPrep, Param::POps, Param::PDet];

    pub fn name(self) -> &'static str {
        match self {
            Param::Ovl => "ovl",
            Param::G2 => "g2",
            Param::PPrep => "p_prep",
            Param::POps => "p_ops",
            Param::PDet => "p_det",
            Param::PL => "p_L",
        }
    }

    pub fn parse(s: &str) -> Option<Param> {
        let p = match s {
            "ovl" => Param::Ovl,
            "g2" => Param::G2,
            "p_prep" | "p-prep" => Param::PPrep,
            "p_ops" | "p-ops" => Param::POps,
            "p_det" | "p-det" => Param::PDet,
            "p_L" | "p_l" | "p-l" | "pl" => Param::PL,
            _ => return None,
        };
        Some(p)
    }

    /// Loss and higher-order parameters are reported against `1 - p`.
    pub fn is_error_rate(self) -> bool {
        self != Param::Ovl
    }
}

impl fmt::Display for Param {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Range {
    pub min: f64,
    pub max: f64,
    pub default: f64,
}

impl Range {
    pub const fn new(min: f64, max: f64, default: f64) -> Self {
        Range { min, max, default }
    }

    fn check(&self, p: Param) -> Result<(), AnalysisError> {
        let ok = [self.min, self.max, self.default].iter().all(|x| (0.0..=1.0).contains(x))
            && self.min <= self.default
            && self.default <= self.max;
        if ok {
            Ok(())
        } else {
            Err(AnalysisError::BadRange(p))
        }
    }

    /// `t max + (1 - t) min`.
    pub fn interpolate(&self, t: f64) -> f64 {
        t * self.max + (1.0 - t) * self.min
    }
}

/// A point of the full five-parameter model.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Params {
    pub ovl: f64,
    pub g2: f64,
    pub p_prep: f64,
    pub p_ops: f64,
    pub p_det: f64,
}

impl Params {
    pub const IDEAL: Params = Params { ovl: 1.0, g2: 0.0, p_prep: 0.0, p_ops: 0.0, p_det: 0.0 };

    pub fn losses(&self) -> [f64; 3] {
        [self.p_prep, self.p_ops, self.p_det]
    }

    pub fn get(&self, p: Param) -> Option<f64> {
        match p {
            Param::Ovl => Some(self.ovl),
            Param::G2 => Some(self.g2),
            Param::PPrep => Some(self.p_prep),
            Param::POps => Some(self.p_ops),
            Param::PDet => Some(self.p_det),
            Param::PL => None,
        }
    }

    pub fn set(&mut self, p: Param, v: f64) {
        match p {
            Param::Ovl => self.ovl = v,
            Param::G2 => self.g2 = v,
            Param::PPrep => self.p_prep = v,
            Param::POps => self.p_ops = v,
            Param::PDet => self.p_det = v,
            Param::PL => {}
        }
    }

    pub fn validate(&self) -> Result<(), AnalysisError> {
        for p in Param::FULL {
            let v = self.get(p).unwrap_or(0.0);
            if !(0.0..=1.0).contains(&v) {
                return Err(AnalysisError::ParamOutOfRange(p, v));
            }
        }
        Ok(())
    }
}

/// Parameter ranges and defaults of one technology scenario.
#[derive(Clone, Debug, PartialEq)]
pub struct Regime {
    pub name: String,
    pub ovl: Range,
    pub g2: Range,
    pub p_prep: Range,
    pub p_ops: Range,
    pub p_det: Range,
    /// Whether the scenario's reference numbers use the simplified loss
    /// model.
    pub simplified: bool,
}

impl Regime {
    pub fn spdc() -> Regime {
        Regime {
            name: "spdc".to_string(),
            ovl: Range::new(0.9725, 0.995, 0.99),
            g2: Range::new(0.01, 0.02, 0.015),
            p_prep: Range::new(0.05, 0.15, 0.10),
            p_ops: Range::new(0.01, 0.02, 0.015),
            p_det: Range::new(0.05, 0.15, 0.10),
            simplified: false,
        }
    }

    pub fn solid_state() -> Regime {
        Regime {
            name: "solid-state".to_string(),
            ovl: Range::new(0.8825, 0.9925, 0.94),
            g2: Range::new(0.000075, 0.021, 0.0025),
            p_prep: Range::new(0.026, 0.114, 0.07),
            p_ops: Range::new(0.01, 0.02, 0.015),
            p_det: Range::new(0.05, 0.15, 0.10),
            simplified: false,
        }
    }

    pub fn close_to_optimal() -> Regime {
        Regime {
            name: "close-to-optimal".to_string(),
            ovl: Range::new(0.99, 1.0, 0.995),
            g2: Range::new(0.0, 0.02, 0.01),
            p_prep: Range::new(0.0, 0.04, 0.02),
            p_ops: Range::new(0.0, 0.005, 0.0025),
            p_det: Range::new(0.0, 0.04, 0.02),
            simplified: true,
        }
    }

    pub fn builtin() -> [Regime; 3] {
        [Regime::spdc(), Regime::solid_state(), Regime::close_to_optimal()]
    }

    pub fn by_name(name: &str) -> Option<Regime> {
        Regime::builtin().into_iter().find(|r| r.name == name)
    }

    pub fn validate(&self) -> Result<(), AnalysisError> {
        for p in Param::FULL {
            self.range(p).check(p)?;
        }
        Ok(())
    }

    /// Range of a parameter; `PL` spans `[0, 1]` with default `1/2`.
    pub fn range(&self, p: Param) -> Range {
        match p {
            Param::Ovl => self.ovl,
            Param::G2 => self.g2,
            Param::PPrep => self.p_prep,
            Param::POps => self.p_ops,
            Param::PDet => self.p_det,
            Param::PL => Range::new(0.0, 1.0, 0.5),
        }
    }

    pub fn defaults(&self) -> Params {
        Params {
            ovl: self.ovl.default,
            g2: self.g2.default,
            p_prep: self.p_prep.default,
            p_ops: self.p_ops.default,
            p_det: self.p_det.default,
        }
    }

    /// Full-model point of a simplified-model point.
    pub fn simplified_point(&self, ovl: f64, g2: f64, p_l: f64) -> Result<Params, AnalysisError> {
        let [p_prep, p_ops, p_det] = simplified_loss(p_l, self)?;
        Ok(Params { ovl, g2, p_prep, p_ops, p_det })
    }
}

/// Loss rates `p_L max + (1 - p_L) min` per loss type.
pub fn simplified_loss(p_l: f64, r: &Regime) -> Result<[f64; 3], AnalysisError> {
    if !(0.0..=1.0).contains(&p_l) {
        return Err(AnalysisError::ParamOutOfRange(Param::PL, p_l));
    }
    Ok([r.p_prep.interpolate(p_l), r.p_ops.interpolate(p_l), r.p_det.interpolate(p_l)])
}
