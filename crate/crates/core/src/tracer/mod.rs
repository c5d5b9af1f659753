//! Tracing interpreter: runs a linked [`Program`] and emits the complete event
//! stream of the run.

mod event;
mod interp;
mod ops;
mod value;

use std::io;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use event::{Binding, EventBody, EventKind, RunOutcome, TraceEvent};
pub use value::{format_float, snapshot, Callable, ListObject, Value, ValueSnapshot};


use crate::minilang::{Program, SourceSpan};

/// Resource caps for one run.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutionLimits {
    /// Total events including the final `error`/`run_end` pair.
    pub max_events: u64,
    pub max_snapshot_depth: usize,
    pub max_snapshot_elems: usize,
    /// Total bytes of `print` output recorded; longer output is cut.
    pub max_output_bytes: usize,
    /// Deepest allowed user call nesting.
    pub max_call_depth: usize,
}

impl Default for ExecutionLimits {
    fn default() -> Self {
        Self {
            max_events: 10_000_000,
            max_snapshot_depth: 8,
            max_snapshot_elems: 64,
            max_output_bytes: 1 << 20,
            max_call_depth: 1000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("invalid limit: {0}")]
pub struct LimitsError(pub String);

impl ExecutionLimits {
    pub fn validate(&self) -> Result<(), LimitsError> {
        if self.max_events < 3 {
            return Err(LimitsError("max_events must be at least 3".into()));
        }
        for (name, v) in [
            ("max_snapshot_depth", self.max_snapshot_depth),
            ("max_snapshot_elems", self.max_snapshot_elems),
            ("max_output_bytes", self.max_output_bytes),
            ("max_call_depth", self.max_call_depth),
        ] {
            if v == 0 {
                return Err(LimitsError(format!("{name} must be positive")));
            }
        }
        if self.max_call_depth > 100_000 {
            return Err(LimitsError("max_call_depth must be at most 100000".into()));
        }
        Ok(())
    }
}

/// External inputs of a run.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Environment {
    /// Integers returned by `read_from_file()`; calling it without data is a
    /// runtime error.
    pub data: Option<Arc<[i64]>>,
}

impl Environment {
    pub fn with_data(data: Vec<i64>) -> Self {
        Self {
            data: Some(data.into()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("line {line}: expected an integer, found '{text}'")]
pub struct DataFileError {
    pub line: usize,
    pub text: String,
}

/// Parses a data file: one integer per line, blank lines ignored.
pub fn parse_data_file(text: &str) -> Result<Vec<i64>, DataFileError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.trim().parse().map_err(|_| DataFileError {
                line: i + 1,
                text: l.trim().to_string(),
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ExitStatus {
    Completed,
    Errored { message: String, span: SourceSpan },
    BudgetExhausted,
}

impl ExitStatus {
    pub fn outcome(&self) -> RunOutcome {
        match self {
            ExitStatus::Completed => RunOutcome::Completed,
            ExitStatus::Errored { .. } => RunOutcome::Errored,
            ExitStatus::BudgetExhausted => RunOutcome::BudgetExhausted,
        }
    }
}

/// Append-only consumer of events.
pub trait EventSink {
    fn accept(&mut self, event: TraceEvent) -> io::Result<()>;
}

impl EventSink for Vec<TraceEvent> {
    fn accept(&mut self, event: TraceEvent) -> io::Result<()> {
        self.push(event);
        Ok(())
    }
}

impl<S: EventSink + ?Sized> EventSink for &mut S {
    fn accept(&mut self, event: TraceEvent) -> io::Result<()> {
        (**self).accept(event)
    }
}

/// Message of the `error` event emitted when the event budget runs out.
pub const BUDGET_MESSAGE: &str = "event budget exhausted";

const INTERPRETER_STACK: usize = 512 << 20;

/// Runs `program` to completion, a runtime error, or budget exhaustion,
/// feeding every event to `sink`. Only sink failures are returned as errors.
///
/// # Panics
///
/// Panics if `limits` does not pass [`ExecutionLimits::validate`].
pub fn execute<S: EventSink + Send + ?Sized>(
    program: &Program,
    limits: &ExecutionLimits,
    env: &Environment,
    sink: &mut S,
) -> io::Result<ExitStatus> {
    if let Err(e) = limits.validate() {
        panic!("{e}");
    }
    std::thread::scope(|scope| {
        std::thread::Builder::new()
            .name("tracer".into())
            .stack_size(INTERPRETER_STACK)
            .spawn_scoped(scope, || interp::run(program, limits, env, sink))
            .expect("spawn interpreter thread")
            .join()
            .unwrap_or_else(|panic| std::panic::resume_unwind(panic))
    })
}

/// Convenience wrapper collecting the stream in memory.
pub fn execute_to_vec(
    program: &Program,
    limits: &ExecutionLimits,
    env: &Environment,
) -> (Vec<TraceEvent>, ExitStatus) {
    let mut events = Vec::new();
    let status = execute(program, limits, env, &mut events).expect("in-memory sink cannot fail");
    (events, status)
}
