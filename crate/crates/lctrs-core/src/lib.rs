//! Logically constrained term rewriting on existentially constrained
//! terms, with both partial and most general rewrite steps, instance
//! interpretations, and an executable property harness for the
//! characterization theorems relating them.

pub mod ect;
pub mod engine;
pub mod harness;
pub mod interp;
pub mod logic;
pub mod pretty;
pub mod rules;
pub mod signature;
pub mod smt;
pub mod term;
pub mod trace;

pub use ect::{ECTerm, TriVerdict};
pub use engine::{Mode, RedexInfo, StepRecord, Strategy};
pub use logic::{
    ConstraintBackend, EnumBackend, ExConstraint, IntSearchBackend, LogicError, SolverVerdict,
    TheoryMode, TheoryModel, ValidityVerdict, Valuation,
};
pub use rules::{ConstrainedRule, Lctrs, RuleFlags, RuleOrigin};
pub use signature::Signature;
pub use term::{FunSym, Kind, Position, Sort, Subst, Term, TermError, Value, Var};
