//! Executable form of abstract, stochastic and causal systems.
//!
//! A system is observed on a finite, strictly ordered [`TimeBase`] through a
//! set of attributes ([`AttributeSet`]). A [`Trajectory`] assigns one value to
//! every (instant, attribute) cell. [`Event`]s are finite conjunctions of point
//! constraints on trajectories; their probability under a stochastic system is
//! estimated by seeded Monte Carlo ([`estimate_event_probability`]).
//!
//! Causal structure is described by a [`CausalDecomposition`]: an ordered
//! partition of the attributes into inertial and non-inertial blocks, plus a
//! map from each consequence cell `D(k, l)` to its complete immediate cause.
//! [`validate_causality`] checks such a decomposition, and [`cut_bonds`]
//! splits a [`SystemGraph`] into sub-systems with classified ports.

use alloc::string::String;

mod bonds;
mod causality;
mod event;
mod system;

pub use bonds::{cut_bonds, Bond, PortClassification, SubSystem, SystemGraph};
pub use causality::{validate_causality, Block, CausalDecomposition, CausalityReport, CauseEntry, Cell, Violation};
pub use event::{
    estimate_event_probabilities, estimate_event_probability, event_occurred, sample_stream, Constraint, Event,
    TrajectorySampler, ValueSet,
};
pub use system::{make_timebase, Attribute, AttributeSet, Domain, TimeBase, Trajectory, Value};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum KernelError {
    #[error("time base must contain at least one instant")]
    Empty,
    #[error("instants must be strictly increasing; violated at index {index}")]
    NonStrictOrder { index: usize },
    #[error("attribute set must contain at least one attribute")]
    NoAttributes,
    #[error("attribute {index} has an empty value domain")]
    EmptyDomain { index: usize },
    #[error("cell (k={instant}, i={attribute}) is outside the trajectory")]
    CellOutOfRange { instant: usize, attribute: usize },
    #[error("value for attribute {attribute} is outside its domain")]
    DomainViolation { attribute: usize },
    #[error("trajectory is not total: cell (k={instant}, i={attribute}) has no value")]
    IncompleteTrajectory { instant: usize, attribute: usize },
    #[error("event constraint {index} is invalid for this system")]
    InvalidEvent { index: usize },
    #[error("sample count must be positive")]
    NoSamples,
    #[error("trajectory generator failed: {0}")]
    Generator(String),
    #[error("bond {0} is not part of the system")]
    UnknownBond(usize),
    #[error("bond {bond} references attribute {attribute}, but the system has {n_attributes}")]
    BondAttributeOutOfRange { bond: usize, attribute: usize, n_attributes: usize },
    #[error("bond {bond} connects attribute {attribute} to itself")]
    SelfBond { bond: usize, attribute: usize },
    #[error("attribute {attribute} is the target of bonds {first} and {second}; an input takes exactly one bond")]
    InputBoundTwice { attribute: usize, first: usize, second: usize },
}
