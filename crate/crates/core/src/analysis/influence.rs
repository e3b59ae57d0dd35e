use alloc::string::String;
use alloc::vec::Vec;

use super::engine::{Demand, Engine, TaskRunner};
use super::grid::{Axis, EvalSettings, Measure, MeasureGrid, PointMeasures, SweepPlan, SweepSpec};
use super::regime::{Param, Regime};
use super::AnalysisError;
use crate::math::sqrt;

/// Whether the correlation is taken with the parameter or with `1 - p`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Orientation {
    P,
    OneMinusP,
}

impl Orientation {
    /// The orientation used in the reports: `1 - p` for error rates.
    pub fn reported(p: Param) -> Orientation {
        if p.is_error_rate() {
            Orientation::OneMinusP
        } else {
            Orientation::P
        }
    }
}

/// Pearson correlation of a parameter and a measure over all grid points,
/// with uniform weights.
pub fn correlation_coefficient(
    grid: &MeasureGrid,
    param: Param,
    measure: Measure,
    orient: Orientation,
) -> Result<f64, AnalysisError> {
    let n = grid.len();
    if n == 0 {
        return Err(AnalysisError::ZeroVariance(param));
    }
    let mut xs = Vec::with_capacity(n);
    for p in &grid.points {
        xs.push(p.value(param).ok_or(AnalysisError::MissingAxis(param))?);
    }
    let ys: Vec<f64> = grid.points.iter().map(|p| p.measures.get(measure)).collect();
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let (mut cov, mut vx, mut vy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(&ys) {
        cov += (x - mx) * (y - my);
        vx += (x - mx) * (x - mx);
        vy += (y - my) * (y - my);
    }
    if vx == 0.0 {
        return Err(AnalysisError::ZeroVariance(param));
    }
    if vy == 0.0 {
        return Err(AnalysisError::ConstantMeasure(measure));
    }
    let r = cov / sqrt(vx * vy);
    Ok(match orient {
        Orientation::P => r,
        Orientation::OneMinusP => -r,
    })
}

/// Range of the measure along the default line of `param` divided by its
/// range over the whole grid. Extrema are taken over grid points.
///
/// `line` must vary only `param`; every other axis it carries has to sit at
/// the regime default.
pub fn relative_image_range(
    line: &MeasureGrid,
    full: &MeasureGrid,
    regime: &Regime,
    param: Param,
    measure: Measure,
) -> Result<f64, AnalysisError> {
    if line.axis(param).is_none() {
        return Err(AnalysisError::MissingAxis(param));
    }
    for a in &line.axes {
        if a.param == param {
            continue;
        }
        let d = regime.range(a.param).default;
        if a.values.len() != 1 || (a.values[0] - d).abs() > 1e-12 {
            return Err(AnalysisError::NotDefaultSlice(a.param));
        }
    }
    let (lo, hi) = line.range_of(measure);
    let (glo, ghi) = full.range_of(measure);
    let den = ghi - glo;
    if !(den > 0.0) {
        return Err(AnalysisError::ConstantMeasure(measure));
    }
    Ok((hi - lo) / den)
}

/// Grid resolution of an influence analysis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InfluenceSpec {
    /// Overlap step; `None` uses `ovl_points` evenly spaced values.
    pub ovl_step: Option<f64>,
    pub ovl_points: usize,
    pub g2_points: usize,
    pub pl_points: usize,
    /// Values per loss type on the default lines of the full model.
    pub loss_points: usize,
}

impl InfluenceSpec {
    /// 0.25% overlap steps and 201 values for `g2` and `p_L`.
    pub fn full() -> Self {
        InfluenceSpec { ovl_step: Some(0.0025), ovl_points: 0, g2_points: 201, pl_points: 201, loss_points: 201 }
    }

    /// At most `n` values per axis: 0.25% overlap steps when they fit,
    /// otherwise `n` evenly spaced overlaps.
    pub fn coarse(n: usize) -> Self {
        InfluenceSpec { ovl_step: Some(0.0025), ovl_points: n, g2_points: n, pl_points: n, loss_points: n }
    }

    fn ovl_axis(&self, r: &Regime) -> Result<Axis, AnalysisError> {
        let (lo, hi) = (r.ovl.min, r.ovl.max);
        if let Some(step) = self.ovl_step {
            let a = Axis::stepped(Param::Ovl, lo, hi, step)?;
            if self.ovl_points == 0 || a.len() <= self.ovl_points {
                return Ok(a);
            }
        }
        Axis::linspace(Param::Ovl, lo, hi, self.ovl_points)
    }

    fn axis(&self, r: &Regime, p: Param) -> Result<Axis, AnalysisError> {
        let n = match p {
            Param::Ovl => return self.ovl_axis(r),
            Param::G2 => self.g2_points,
            Param::PL => self.pl_points,
            _ => self.loss_points,
        };
        let range = r.range(p);
        Axis::linspace(p, range.min, range.max, n)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Entry {
    pub param: Param,
    pub measure: Measure,
    pub value: f64,
}

/// Influence of the error parameters on fidelity and success probability.
#[derive(Clone, Debug, PartialEq)]
pub struct InfluenceReport {
    pub regime: String,
    /// Correlation with `ovl`, `1 - g2`, `1 - p_L` (simplified loss).
    pub corr: Vec<Entry>,
    /// Relative image ranges of `ovl`, `g2`, `p_L` (simplified loss).
    pub delta: Vec<Entry>,
    /// Relative image ranges of the three loss types (full model).
    pub loss_delta: Vec<Entry>,
    pub defaults: PointMeasures,
    /// `(min, max)` of each measure over the regime's parameter corners.
    pub corner_extremes: [(f64, f64); 2],
    /// `(min, max)` of each measure over the simplified-loss grid.
    pub grid_extremes: [(f64, f64); 2],
    pub min_covered_mass: f64,
    pub grid_points: usize,
    pub live_events: usize,
}

impl InfluenceReport {
    pub fn get(&self, param: Param, measure: Measure) -> (Option<f64>, Option<f64>) {
        let find = |v: &[Entry]| v.iter().find(|e| e.param == param && e.measure == measure).map(|e| e.value);
        let delta = find(&self.delta).or_else(|| find(&self.loss_delta));
        (find(&self.corr), delta)
    }
}

/// Grids of an influence analysis: the simplified-loss grid with its
/// default lines, and the full-model corner grid with the per-loss-type
/// default lines.
pub struct InfluencePlan {
    pub regime: Regime,
    simplified: SweepPlan,
    lines: Vec<(Param, SweepPlan)>,
    corners: SweepPlan,
    extremes: SweepPlan,
    default_point: SweepPlan,
    loss_lines: Vec<(Param, SweepPlan)>,
    demand: Demand,
}

impl InfluencePlan {
    pub fn new<R: TaskRunner>(
        engine: &Engine<'_>,
        regime: &Regime,
        spec: &InfluenceSpec,
        settings: &EvalSettings,
        runner: &R,
    ) -> Result<Self, AnalysisError> {
        let plan = |axes: Vec<Axis>| SweepPlan::new(engine, SweepSpec::new(regime.clone(), axes)?, settings, runner);
        let mut simple_axes = Vec::new();
        for p in Param::SIMPLIFIED {
            simple_axes.push(spec.axis(regime, p)?);
        }
        let simplified = plan(simple_axes)?;
        let mut lines = Vec::new();
        for p in Param::SIMPLIFIED {
            lines.push((p, plan(alloc::vec![spec.axis(regime, p)?])?));
        }
        let three = |p: Param| {
            let r = regime.range(p);
            Axis::new(p, alloc::vec![r.min, r.default, r.max])
        };
        let mut corner_axes = Vec::new();
        for p in Param::FULL {
            corner_axes.push(three(p)?);
        }
        let corners = plan(corner_axes)?;
        let two = |p: Param| {
            let r = regime.range(p);
            Axis::new(p, alloc::vec![r.min, r.max])
        };
        let extremes = if regime.simplified {
            plan(alloc::vec![two(Param::Ovl)?, two(Param::G2)?, two(Param::PL)?])?
        } else {
            let mut axes = Vec::new();
            for p in Param::FULL {
                axes.push(two(p)?);
            }
            plan(axes)?
        };
        let mut loss_lines = Vec::new();
        for p in Param::LOSSES {
            loss_lines.push((p, plan(alloc::vec![spec.axis(regime, p)?])?));
        }
        let default_point = plan(Vec::new())?;
        let mut demand = simplified.demand().clone();
        for (_, l) in lines.iter().chain(&loss_lines) {
            demand.merge(l.demand());
        }
        demand.merge(corners.demand());
        demand.merge(extremes.demand());
        demand.merge(default_point.demand());
        Ok(InfluencePlan { regime: regime.clone(), simplified, lines, corners, extremes, default_point, loss_lines, demand })
    }

    pub fn demand(&self) -> &Demand {
        &self.demand
    }

    pub fn evaluate<R: TaskRunner>(
        &self,
        table: &super::engine::BranchTable,
        runner: &R,
    ) -> Result<(InfluenceReport, MeasureGrid), AnalysisError> {
        let grid = self.simplified.evaluate(table, runner)?;
        let corners = self.corners.evaluate(table, runner)?;
        let extremes = self.extremes.evaluate(table, runner)?;
        let mut corr = Vec::new();
        let mut delta = Vec::new();
        for (p, line) in &self.lines {
            let line = line.evaluate(table, runner)?;
            for m in Measure::ALL {
                let value = correlation_coefficient(&grid, *p, m, Orientation::reported(*p))?;
                corr.push(Entry { param: *p, measure: m, value });
                let value = relative_image_range(&line, &grid, &self.regime, *p, m)?;
                delta.push(Entry { param: *p, measure: m, value });
            }
        }
        let mut loss_delta = Vec::new();
        for (p, line) in &self.loss_lines {
            let line = line.evaluate(table, runner)?;
            for m in Measure::ALL {
                let value = relative_image_range(&line, &corners, &self.regime, *p, m)?;
                loss_delta.push(Entry { param: *p, measure: m, value });
            }
        }
        let defaults = self.default_point.evaluate(table, runner)?.points[0].measures;
        let report = InfluenceReport {
            regime: self.regime.name.clone(),
            corr,
            delta,
            loss_delta,
            defaults,
            corner_extremes: [extremes.range_of(Measure::Fidelity), extremes.range_of(Measure::Success)],
            grid_extremes: [grid.range_of(Measure::Fidelity), grid.range_of(Measure::Success)],
            min_covered_mass: grid.min_covered_mass().min(corners.min_covered_mass()),
            grid_points: grid.len(),
            live_events: table.events().len(),
        };
        Ok((report, grid))
    }
}

/// Builds the branch table for all grids of the analysis and evaluates it.
pub fn influence_report<R: TaskRunner>(
    engine: &Engine<'_>,
    regime: &Regime,
    spec: &InfluenceSpec,
    settings: &EvalSettings,
    runner: &R,
) -> Result<InfluenceReport, AnalysisError> {
    let plan = InfluencePlan::new(engine, regime, spec, settings, runner)?;
    let table = engine.build(plan.demand().clone(), runner)?;
    Ok(plan.evaluate(&table, runner)?.0)
}
