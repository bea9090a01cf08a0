//! Bounded Event-B modelling of agent trust.
//!
//! A finite set-theoretic kernel, a parser and printer for a textual
//! Event-B subset, a typechecker, a state-machine runtime, a bounded proof
//! obligation engine, and the built-in trust models with a direct trust
//! query used to cross-check them.

pub mod ast;
pub mod discharge;
pub mod dsl;
pub mod enumerate;
pub mod eval;
pub mod po;
pub mod runtime;
pub mod trust;
pub mod types;
pub mod value;

pub use ast::{Context, Document, Event, Expr, Machine, Pred};
pub use discharge::{DischargeReport, Discharger, Verdict};
pub use dsl::{parse_context, parse_document, parse_machine, parse_value, pretty_print};
pub use enumerate::{BoundSpec, StateSource};
pub use eval::{Env, Evaluator};
pub use po::{generate_pos, PoKind, ProofObligation};
pub use runtime::{Instantiation, Runtime, State};
pub use types::{typecheck_model, Ty, TypeError, TypedModel};
pub use value::{EvalError, Name, SetV, Value};
