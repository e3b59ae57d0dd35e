use alloc::vec::Vec;

use super::engine::{BranchTable, Demand, Engine, Sequential, TaskRunner, WeightedSums};
use super::regime::{simplified_loss, Param, Params, Regime};
use super::AnalysisError;
use crate::circuit::Netlist;
use crate::herald::{Acceptance, MixtureMeasures};
use crate::sources::Selection;

/// Coverage used by the analysis unless configured otherwise.
pub const DEFAULT_COVERAGE: f64 = 0.98;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvalSettings {
    pub coverage: f64,
    pub acceptance: Acceptance,
}

impl Default for EvalSettings {
    fn default() -> Self {
        EvalSettings { coverage: DEFAULT_COVERAGE, acceptance: Acceptance::SixFold }
    }
}

impl EvalSettings {
    pub fn with_coverage(coverage: f64) -> Self {
        EvalSettings { coverage, ..EvalSettings::default() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Measure {
    Fidelity,
    /// Normalized success probability.
    Success,
}

impl Measure {
    pub const ALL: [Measure; 2] = [Measure::Fidelity, Measure::Success];

    pub fn name(self) -> &'static str {
        match self {
            Measure::Fidelity => "fidelity",
            Measure::Success => "success",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PointMeasures {
    pub fidelity: f64,
    pub success: f64,
    pub success_normalized: f64,
    pub covered_mass: f64,
}

impl PointMeasures {
    pub fn get(&self, m: Measure) -> f64 {
        match m {
            Measure::Fidelity => self.fidelity,
            Measure::Success => self.success_normalized,
        }
    }

    fn from_mixture(m: MixtureMeasures) -> Result<Self, AnalysisError> {
        PointMeasures::try_from(m)
    }
}

impl TryFrom<MixtureMeasures> for PointMeasures {
    type Error = AnalysisError;

    /// Fails when nothing was accepted and the fidelity is undefined.
    fn try_from(m: MixtureMeasures) -> Result<Self, AnalysisError> {
        let fidelity = m.fidelity.ok_or(AnalysisError::UndefinedFidelity)?;
        Ok(PointMeasures {
            fidelity,
            success: m.success,
            success_normalized: m.success_normalized,
            covered_mass: m.covered_mass,
        })
    }
}

/// Sorted values of one parameter.
#[derive(Clone, Debug, PartialEq)]
pub struct Axis {
    pub param: Param,
    pub values: Vec<f64>,
}

impl Axis {
    pub fn new(param: Param, mut values: Vec<f64>) -> Result<Self, AnalysisError> {
        if values.is_empty() {
            return Err(AnalysisError::EmptyAxis(param));
        }
        if let Some(&v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(AnalysisError::ParamOutOfRange(param, v));
        }
        values.sort_by(f64::total_cmp);
        values.dedup();
        Ok(Axis { param, values })
    }

    pub fn fixed(param: Param, value: f64) -> Result<Self, AnalysisError> {
        Axis::new(param, alloc::vec![value])
    }

    /// `n` evenly spaced values from `min` to `max` inclusive.
    pub fn linspace(param: Param, min: f64, max: f64, n: usize) -> Result<Self, AnalysisError> {
        let values = match n {
            0 => Vec::new(),
            1 => alloc::vec![min],
            _ => (0..n).map(|k| if k + 1 == n { max } else { min + (max - min) * k as f64 / (n - 1) as f64 }).collect(),
        };
        Axis::new(param, values)
    }

    /// `min, min + step, ...` up to `max` (within a rounding tolerance).
    pub fn stepped(param: Param, min: f64, max: f64, step: f64) -> Result<Self, AnalysisError> {
        if !(step > 0.0) {
            return Err(AnalysisError::EmptyAxis(param));
        }
        let n = libm::floor((max - min) / step + 1e-9) as usize + 1;
        Axis::new(param, (0..n).map(|k| min + step * k as f64).collect())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Cartesian grid over some parameters of a regime; the others stay at the
/// regime defaults. An axis on `PL` selects the simplified loss model.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepSpec {
    pub regime: Regime,
    pub axes: Vec<Axis>,
}

impl SweepSpec {
    pub fn new(regime: Regime, axes: Vec<Axis>) -> Result<Self, AnalysisError> {
        regime.validate()?;
        for (i, a) in axes.iter().enumerate() {
            if axes[..i].iter().any(|b| b.param == a.param) {
                return Err(AnalysisError::DuplicateAxis(a.param));
            }
        }
        let simplified = axes.iter().any(|a| a.param == Param::PL);
        if simplified {
            if let Some(a) = axes.iter().find(|a| Param::LOSSES.contains(&a.param)) {
                return Err(AnalysisError::MixedLossModels(a.param));
            }
        }
        Ok(SweepSpec { regime, axes })
    }

    pub fn is_simplified(&self) -> bool {
        self.axes.iter().any(|a| a.param == Param::PL)
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(Axis::len).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Points in lexicographic axis order, the last axis varying fastest.
    pub fn points(&self) -> Result<Vec<(Params, Option<f64>)>, AnalysisError> {
        let n = self.len();
        let mut out = Vec::with_capacity(n);
        let mut idx = alloc::vec![0usize; self.axes.len()];
        for _ in 0..n {
            let mut params = self.regime.defaults();
            let mut p_l = if self.is_simplified() { Some(0.5) } else { None };
            for (a, &i) in self.axes.iter().zip(&idx) {
                let v = a.values[i];
                if a.param == Param::PL {
                    p_l = Some(v);
                } else {
                    params.set(a.param, v);
                }
            }
            if let Some(t) = p_l {
                let [pp, po, pd] = simplified_loss(t, &self.regime)?;
                params.p_prep = pp;
                params.p_ops = po;
                params.p_det = pd;
            }
            out.push((params, p_l));
            for k in (0..idx.len()).rev() {
                idx[k] += 1;
                if idx[k] < self.axes[k].len() {
                    break;
                }
                idx[k] = 0;
            }
        }
        Ok(out)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridPoint {
    pub params: Params,
    pub p_l: Option<f64>,
    pub measures: PointMeasures,
}

impl GridPoint {
    pub fn value(&self, p: Param) -> Option<f64> {
        match p {
            Param::PL => self.p_l,
            _ => self.params.get(p),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MeasureGrid {
    pub axes: Vec<Axis>,
    pub points: Vec<GridPoint>,
}

impl MeasureGrid {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn axis(&self, p: Param) -> Option<&Axis> {
        self.axes.iter().find(|a| a.param == p)
    }

    /// Row-major index of a coordinate vector (one index per axis).
    pub fn index_of(&self, coords: &[usize]) -> usize {
        coords.iter().zip(&self.axes).fold(0, |acc, (&i, a)| acc * a.len() + i)
    }

    pub fn range_of(&self, m: Measure) -> (f64, f64) {
        self.points.iter().map(|p| p.measures.get(m)).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| {
            (lo.min(x), hi.max(x))
        })
    }

    pub fn min_covered_mass(&self) -> f64 {
        self.points.iter().map(|p| p.measures.covered_mass).fold(1.0, f64::min)
    }
}

/// Selections of a sweep, and the demand they put on a branch table.
#[derive(Clone, Debug)]
pub struct SweepPlan {
    pub spec: SweepSpec,
    points: Vec<(Params, Option<f64>)>,
    // per point: index into `selections`
    selection_of: Vec<usize>,
    selections: Vec<Selection>,
    demand: Demand,
}

impl SweepPlan {
    pub fn new<R: TaskRunner>(
        engine: &Engine<'_>,
        spec: SweepSpec,
        settings: &EvalSettings,
        runner: &R,
    ) -> Result<Self, AnalysisError> {
        let points = spec.points()?;
        // the selection depends on g2 and the loss rates only
        let mut keys: Vec<[u64; 4]> = Vec::new();
        let mut selection_of = Vec::with_capacity(points.len());
        for (p, _) in &points {
            p.validate()?;
            let k = [p.g2.to_bits(), p.p_prep.to_bits(), p.p_ops.to_bits(), p.p_det.to_bits()];
            let i = match keys.iter().rposition(|x| *x == k) {
                Some(i) => i,
                None => {
                    keys.push(k);
                    keys.len() - 1
                }
            };
            selection_of.push(i);
        }
        let selections: Result<Vec<Selection>, AnalysisError> = runner
            .map(keys.len(), |i| {
                let k = keys[i].map(f64::from_bits);
                engine.select(k[0], [k[1], k[2], k[3]], settings.coverage)
            })
            .into_iter()
            .collect();
        let selections = selections?;
        let mut demand = Demand::new();
        for s in &selections {
            demand.add(s);
        }
        Ok(SweepPlan { spec, points, selection_of, selections, demand })
    }

    pub fn demand(&self) -> &Demand {
        &self.demand
    }

    pub fn evaluate<R: TaskRunner>(&self, table: &BranchTable, runner: &R) -> Result<MeasureGrid, AnalysisError> {
        let sums: Result<Vec<WeightedSums>, AnalysisError> =
            runner.map(self.selections.len(), |i| table.weighted(&self.selections[i])).into_iter().collect();
        let sums = sums?;
        let mut points = Vec::with_capacity(self.points.len());
        for (&(params, p_l), &s) in self.points.iter().zip(&self.selection_of) {
            let measures = PointMeasures::from_mixture(sums[s].at_overlap(params.ovl))?;
            points.push(GridPoint { params, p_l, measures });
        }
        Ok(MeasureGrid { axes: self.spec.axes.clone(), points })
    }
}

/// Evaluates a grid, simulating each selected event once for all points.
pub fn sweep<R: TaskRunner>(
    engine: &Engine<'_>,
    spec: SweepSpec,
    settings: &EvalSettings,
    runner: &R,
) -> Result<MeasureGrid, AnalysisError> {
    let plan = SweepPlan::new(engine, spec, settings, runner)?;
    let table = engine.build(plan.demand().clone(), runner)?;
    plan.evaluate(&table, runner)
}

/// Fidelity and success probability at one parameter point.
pub fn evaluate_point(
    netlist: &Netlist,
    params: &Params,
    settings: &EvalSettings,
) -> Result<PointMeasures, AnalysisError> {
    let engine = Engine::new(netlist, settings.acceptance)?;
    evaluate_with(&engine, params, settings.coverage, &Sequential)
}

pub fn evaluate_with<R: TaskRunner>(
    engine: &Engine<'_>,
    params: &Params,
    coverage: f64,
    runner: &R,
) -> Result<PointMeasures, AnalysisError> {
    params.validate()?;
    let sel = engine.select(params.g2, params.losses(), coverage)?;
    let mut demand = Demand::new();
    demand.add(&sel);
    let table = engine.build(demand, runner)?;
    PointMeasures::from_mixture(table.measures(&sel, params.ovl)?)
}
