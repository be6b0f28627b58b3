//! Aggregation-convergecast scheduling for multi-channel wireless sensor
//! networks with bounded packet capacity.
//!
//! - [`wsn`]: topology, deployment and hop structure
//! - [`collision`]: forwarding graph, conflict relation and precedence
//! - [`dcas`]: the distributed scheduler
//! - [`baselines`]: exact and centralized reference schedulers
//! - [`validator`]: independent schedule checker
//! - [`harness`]: experiment sweeps and CSV output

pub mod baselines;
pub mod collision;
pub mod dcas;
pub mod harness;
pub mod schedule;
pub mod validator;
pub mod wsn;

pub use collision::{Channel, ExtendedCollisionGraph, ForwardingGraph, Link, TransmissionCandidate};
pub use dcas::{DcasConfig, DcasError, DcasOutcome, Interleaving};
pub use schedule::{Schedule, ScheduleEntry};
pub use validator::{validate, Rule, ValidationReport};
pub use wsn::{HopMap, NodeId, TopologyError, Wsn};
