//! Probabilistic inference computed symbolically over an assumption-based
//! truth maintenance system.
//!
//! Layers, bottom up:
//!
//! - [`atms`]: nodes, justifications, minimal labels and nogoods.
//! - [`probability`]: choose sets and exact evaluation of labels.
//! - [`model`]: variable classes, relation schemas, marginals, instances.
//! - [`structure`]: evidence independence decisions, monitors, retraction.
//! - [`oracle`]: brute-force world enumeration for cross-checking.
//! - [`command`] and [`session`]: the command language and transcripts.

pub mod atms;
pub mod command;
pub mod model;
pub mod oracle;
pub mod probability;
pub mod session;
pub mod structure;
pub mod term;

pub use atms::{Antecedent, AssumptionId, AssumptionKind, Atms, AtmsError, Environment, Label, NodeId};
pub use command::{parse_command, Command, Fact};
pub use model::{MarginalWeights, Model, ModelError, RuleSpec, StructureEvent};
pub use probability::{ChooseSetId, Network, ProbabilityError};
pub use session::{Event, Outcome, Session, SessionConfig, SessionError, Transcript};
pub use term::{ParseError, Symbol, Term};
