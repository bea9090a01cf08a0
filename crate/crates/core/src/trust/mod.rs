//! The trust models at three refinement levels and a direct query API.
//!
//! Level 0 grants trust on ability alone, level 1 adds the trustor's
//! knowledge of the trustees, level 2 adds the trustees' commitment.

pub mod models;
pub mod query;
pub mod state;

pub use models::{build_model, build_mutant, build_variant, TrustLevel, Variant};
pub use query::{trust_query, TrustDecision};
pub use state::{Agent, Group, Task, Triple, TrustError, TrustState, Universe};
