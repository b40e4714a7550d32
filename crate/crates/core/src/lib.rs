//! Modeling core for simulated-physical systems: the entity model, the
//! `.spsys` text format, well-formedness rules, integration factors, setup
//! composition, traceability and design advice.

pub mod advisor;
pub mod composer;
pub mod diagnostic;
pub mod metrics;
pub mod model;
pub mod parser;
pub mod tracer;
#[cfg(feature = "test-support")]
pub mod testing;
pub mod validate;

pub use diagnostic::{ParseDiagnostic, Severity, SourceSpan};
pub use model::*;
pub use parser::{parse, serialize, ParseOutcome};
pub use validate::{diagnose, resolve_config, validate, RuleDiagnostic, ValidatedModel, ValidationFailure};
pub use metrics::{compute_all, FactorSet, MirrorFactor, Ratio};
