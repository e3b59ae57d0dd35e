//! Source model: internal-mode expansion of partially distinguishable
//! photons, emission events, and the weighted event space of the mixture.

mod events;
mod gram;
mod input;
mod selection;

use thiserror::Error;

pub use events::{enumerate_events, event_probability, Event, EventKey, EventList, LossSet};
pub use gram::{gram_coefficients, GramCoefficients};
pub use input::{build_input_state, shared_private_input, EmissionEvent, SHARED_INDEX};
pub use selection::{Categories, GroupStatus, Selection};


#[derive(Debug, Clone, PartialEq, Error)]
pub enum SourceError {
    #[error("overlap {0} outside [0, 1]")]
    OverlapOutOfRange(f64),
    #[error("probability {0} outside [0, 1)")]
    ProbabilityOutOfRange(f64),
    #[error("coverage {0} outside (0, 1]")]
    CoverageOutOfRange(f64),
    #[error("gram coefficients cover {got} photons but the netlist has {expected} sources")]
    SourceMismatch { expected: usize, got: usize },
    #[error("emission counts must be 1 or 2, got {0}")]
    InvalidEmission(u8),
    #[error("{0} loss sites exceed the supported maximum")]
    TooManySites(usize),
    #[error(transparent)]
    Fock(#[from] crate::fock::FockError),
}
