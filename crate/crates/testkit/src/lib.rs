//! Deterministic stand-ins for the model endpoint and the system under test,
//! plus the fixture corpus shared by the workspace's tests.

pub mod fixtures;
pub mod responder;
pub mod sample_service;
pub mod synthetic;

pub use responder::{BindingPredicate, CallRecord, Fallback, RoutingTable, Rule, ScriptedResponder};
pub use sample_service::{Fault, FaultPlan, FaultRule, SampleService};
