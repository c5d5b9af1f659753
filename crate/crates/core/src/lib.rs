//! Core of the tracer: the traced language, the tracing interpreter, the
//! trace tree, persistence, selector queries and the textual rendering.

pub mod minilang;
pub mod tracer;
pub mod model;
pub mod store;
pub mod query;
pub mod render;
