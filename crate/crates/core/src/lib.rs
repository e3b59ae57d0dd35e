//! Fock-space simulation of heralded three-photon GHZ state generation with
//! imperfect sources, lossy optics and partially distinguishable photons.
//!
//! The crate is `no_std` (it needs `alloc`). File formats, the command line
//! front end and parallel execution live in the `ghzsim` crate.

#![no_std]

extern crate alloc;

pub mod analysis;
pub mod circuit;
pub mod fock;
pub mod herald;
mod math;
pub mod sources;

pub use analysis::{
    correlation_coefficient, evaluate_point, influence_report, relative_image_range,
    simplified_loss, sweep, AnalysisError, Axis, Engine, EvalSettings, InfluenceReport,
    InfluenceSpec, Measure, MeasureGrid, Orientation, Param, Params, PointMeasures, Regime,
    SweepSpec,
};
pub use circuit::{
    canonical_ghz_netlist, lossless_mode_unitary, oracle_amplitude, run, validate_netlist,
    DetectorId, Element, LossCategory, Netlist, SiteId,
};
pub use fock::{
    apply_loss, apply_pbs, apply_polarization_rotation, inner_product, make_basis_state, Channel,
    FockBasisState, ModeKey, Polarization, PureState,
};
pub use herald::{
    branch_measures, classify, derive_sign_table, mixture_measures, Acceptance, BranchMeasures,
    MixtureMeasures, SignTable,
};
pub use sources::{
    build_input_state, enumerate_events, event_probability, gram_coefficients, EmissionEvent,
    Event, GramCoefficients, LossSet,
};
