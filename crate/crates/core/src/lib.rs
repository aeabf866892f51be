//! Regression-fault detection pipeline: infer likely properties from test
//! traces of a base program version, keep only the ones a bounded model
//! checker can prove, drop the ones a change intentionally invalidates, and
//! report violations of the survivors in the upgraded version with
//! step-by-step counterexamples.

pub mod bmc;
pub mod change;
pub mod frontend;
pub mod inference;
pub mod pipeline;
pub mod point;
pub mod property;
pub mod tracer;
