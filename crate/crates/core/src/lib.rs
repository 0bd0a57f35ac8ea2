//! Resource-aware statechart guideline models.
//!
//! Medical guideline charts raise events for clinical actions (a CT scan,
//! giving tPA). This crate annotates those actions with the resources they
//! need, synthesizes availability charts from a schedule, strengthens the
//! guideline's transition guards so they block while resources are missing,
//! and then simulates and checks the composed system minute by minute.

pub mod export;
pub mod model;
pub mod pipeline;
pub mod resgen;
pub mod sim;
pub mod verify;
pub mod weaver;
