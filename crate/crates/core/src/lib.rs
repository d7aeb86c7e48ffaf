//! Core of a human-in-the-loop workbench for black-box REST API testing.

pub mod agents;
pub mod executor;
pub mod llm;
pub mod metrics;
pub mod spec_model;
pub mod workflow;
