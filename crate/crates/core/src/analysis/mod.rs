//! Parameter regimes, measure grids and the influence of each error
//! parameter on fidelity and success probability.

mod engine;
mod grid;
mod influence;
mod regime;

use thiserror::Error;

pub use engine::{BranchTable, Demand, Engine, GroupKey, LiveEvent, Sequential, TaskRunner, WeightedSums};
pub use grid::{
    evaluate_point, evaluate_with, sweep, Axis, EvalSettings, GridPoint, Measure, MeasureGrid,
    PointMeasures, SweepPlan, SweepSpec, DEFAULT_COVERAGE,
};
pub use influence::{
    correlation_coefficient, influence_report, relative_image_range, Entry, InfluencePlan,
    InfluenceReport, InfluenceSpec, Orientation,
};
pub use regime::{simplified_loss, Param, Params, Range, Regime};

use crate::circuit::{CircuitError, Violation};
use crate::fock::FockError;
use crate::herald::HeraldError;
use crate::sources::SourceError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("invalid netlist: {0}")]
    InvalidNetlist(Violation),
    #[error("selection needs count vector {0:?}, which the branch table was not built for")]
    NotCovered(GroupKey),
    #[error("no accepted events; fidelity undefined")]
    UndefinedFidelity,
    #[error("{0} = {1} outside [0, 1]")]
    ParamOutOfRange(Param, f64),
    #[error("range of {0} must satisfy 0 <= min <= default <= max <= 1")]
    BadRange(Param),
    #[error("axis {0} has no values")]
    EmptyAxis(Param),
    #[error("axis {0} given twice")]
    DuplicateAxis(Param),
    #[error("axis {0} cannot be combined with the simplified loss axis")]
    MixedLossModels(Param),
    #[error("grid has no {0} axis")]
    MissingAxis(Param),
    #[error("line grid has {0} away from its default")]
    NotDefaultSlice(Param),
    #[error("{} is constant over the grid; relative quantities undefined", .0.name())]
    ConstantMeasure(Measure),
    #[error("{0} has zero variance over the grid")]
    ZeroVariance(Param),
    #[error(transparent)]
    Herald(#[from] HeraldError),
    #[error(transparent)]
    Source(#[from] SourceError),
    #[error(transparent)]
    Circuit(#[from] CircuitError),
    #[error(transparent)]
    Fock(#[from] FockError),
}
