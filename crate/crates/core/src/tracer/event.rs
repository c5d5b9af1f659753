//! Trace events and their JSON encoding.
//!
//! One event is one JSON object:
//! `{"seq":N,"ev":KIND,"span":{"f","l","c","el","ec"},"p":{...}}` where `span`
//! is omitted only for `run_begin`/`run_end` and `p` holds the kind-specific
//! payload under the short keys `name`, `args`, `var`, `expr`, `val`, `idx`,
//! `msg` and `txt`.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::de::Error as _;
use serde::ser::SerializeStruct;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::value::ValueSnapshot;
use crate::minilang::SourceSpan;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    RunBegin,
    CallEnter,
    CallExit,
    StmtBegin,
    StmtEnd,
    LoopEnter,
    LoopExit,
    IterBegin,
    IterEnd,
    Eval,
    Bind,
    Ret,
    Output,
    Error,
    RunEnd,
}

impl EventKind {
    pub const ALL: [EventKind; 15] = [
        EventKind::RunBegin,
        EventKind::CallEnter,
        EventKind::CallExit,
        EventKind::StmtBegin,
        EventKind::StmtEnd,
        EventKind::LoopEnter,
        EventKind::LoopExit,
        EventKind::IterBegin,
        EventKind::IterEnd,
        EventKind::Eval,
        EventKind::Bind,
        EventKind::Ret,
        EventKind::Output,
        EventKind::Error,
        EventKind::RunEnd,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::RunBegin => "run_begin",
            EventKind::CallEnter => "call_enter",
            EventKind::CallExit => "call_exit",
            EventKind::StmtBegin => "stmt_begin",
            EventKind::StmtEnd => "stmt_end",
            EventKind::LoopEnter => "loop_enter",
            EventKind::LoopExit => "loop_exit",
            EventKind::IterBegin => "iter_begin",
            EventKind::IterEnd => "iter_end",
            EventKind::Eval => "eval",
            EventKind::Bind => "bind",
            EventKind::Ret => "ret",
            EventKind::Output => "output",
            EventKind::Error => "error",
            EventKind::RunEnd => "run_end",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EventKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        EventKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown event kind '{s}'"))
    }
}

/// How a run ended.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunOutcome {
    Completed,
    Errored,
    BudgetExhausted,
}

impl RunOutcome {
    pub fn as_str(self) -> &'static str {
        match self {
            RunOutcome::Completed => "completed",
            RunOutcome::Errored => "errored",
            RunOutcome::BudgetExhausted => "budget_exhausted",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        [RunOutcome::Completed, RunOutcome::Errored, RunOutcome::BudgetExhausted]
            .into_iter()
            .find(|o| o.as_str() == s)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Binding {
    pub var: Arc<str>,
    pub value: ValueSnapshot,
}

/// Kind-specific content of an event.
#[derive(Clone, Debug, PartialEq)]
pub enum EventBody {
    RunBegin {
        entry: Arc<str>,
    },
    CallEnter {
        name: Arc<str>,
        /// Call-site text, e.g. `compute(args)`.
        expr: Arc<str>,
        args: Vec<Binding>,
    },
    CallExit,
    StmtBegin {
        text: Arc<str>,
    },
    StmtEnd,
    LoopEnter {
        text: Arc<str>,
    },
    LoopExit,
    IterBegin {
        index: u64,
    },
    IterEnd,
    Eval {
        expr: Arc<str>,
        value: ValueSnapshot,
        /// Set when the expression was a call to a builtin.
        builtin: Option<Arc<str>>,
    },
    Bind {
        var: Arc<str>,
        value: ValueSnapshot,
    },
    Ret {
        value: ValueSnapshot,
    },
    Output {
        text: Arc<str>,
    },
    Error {
        message: Arc<str>,
    },
    RunEnd {
        outcome: RunOutcome,
    },
}

impl EventBody {
    pub fn kind(&self) -> EventKind {
        match self {
            EventBody::RunBegin { .. } => EventKind::RunBegin,
            EventBody::CallEnter { .. } => EventKind::CallEnter,
            EventBody::CallExit => EventKind::CallExit,
            EventBody::StmtBegin { .. } => EventKind::StmtBegin,
            EventBody::StmtEnd => EventKind::StmtEnd,
            EventBody::LoopEnter { .. } => EventKind::LoopEnter,
            EventBody::LoopExit => EventKind::LoopExit,
            EventBody::IterBegin { .. } => EventKind::IterBegin,
            EventBody::IterEnd => EventKind::IterEnd,
            EventBody::Eval { .. } => EventKind::Eval,
            EventBody::Bind { .. } => EventKind::Bind,
            EventBody::Ret { .. } => EventKind::Ret,
            EventBody::Output { .. } => EventKind::Output,
            EventBody::Error { .. } => EventKind::Error,
            EventBody::RunEnd { .. } => EventKind::RunEnd,
        }
    }

    /// Every value snapshot carried by the payload.
    pub fn values(&self) -> Vec<&ValueSnapshot> {
        match self {
            EventBody::CallEnter { args, .. } => args.iter().map(|b| &b.value).collect(),
            EventBody::Eval { value, .. } | EventBody::Bind { value, .. } | EventBody::Ret { value } => {
                vec![value]
            }
            _ => Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceEvent {
    pub seq: u64,
    pub span: Option<SourceSpan>,
    pub body: EventBody,
}

impl TraceEvent {
    pub fn kind(&self) -> EventKind {
        self.body.kind()
    }
}

#[derive(Serialize)]
struct ArgRef<'a> {
    var: &'a str,
    val: &'a ValueSnapshot,
}

#[derive(Default)]
struct PayloadRef<'a> {
    name: Option<&'a str>,
    args: Option<&'a [Binding]>,
    var: Option<&'a str>,
    expr: Option<&'a str>,
    val: Option<&'a ValueSnapshot>,
    idx: Option<u64>,
    msg: Option<&'a str>,
    txt: Option<&'a str>,
}

impl Serialize for PayloadRef<'_> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let len = [
            self.name.is_some(),
            self.args.is_some(),
            self.var.is_some(),
            self.expr.is_some(),
            self.val.is_some(),
            self.idx.is_some(),
            self.msg.is_some(),
            self.txt.is_some(),
        ]
        .into_iter()
        .filter(|x| *x)
        .count();
        let mut st = s.serialize_struct("p", len)?;
        if let Some(name) = self.name {
            st.serialize_field("name", name)?;
        }
        if let Some(args) = self.args {
            let args: Vec<ArgRef<'_>> = args.iter().map(|b| ArgRef { var: &b.var, val: &b.value }).collect();
            st.serialize_field("args", &args)?;
        }
        if let Some(var) = self.var {
            st.serialize_field("var", var)?;
        }
        if let Some(expr) = self.expr {
            st.serialize_field("expr", expr)?;
        }
        if let Some(val) = self.val {
            st.serialize_field("val", val)?;
        }
        if let Some(idx) = self.idx {
            st.serialize_field("idx", &idx)?;
        }
        if let Some(msg) = self.msg {
            st.serialize_field("msg", msg)?;
        }
        if let Some(txt) = self.txt {
            st.serialize_field("txt", txt)?;
        }
        st.end()
    }
}

impl Serialize for TraceEvent {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut p = PayloadRef::default();
        match &self.body {
            EventBody::RunBegin { entry } => p.name = Some(entry),
            EventBody::CallEnter { name, expr, args } => {
                p.name = Some(name);
                p.args = Some(args);
                p.expr = Some(expr);
            }
            EventBody::StmtBegin { text } | EventBody::LoopEnter { text } => p.txt = Some(text),
            EventBody::IterBegin { index } => p.idx = Some(*index),
            EventBody::Eval { expr, value, builtin } => {
                p.name = builtin.as_deref();
                p.expr = Some(expr);
                p.val = Some(value);
            }
            EventBody::Bind { var, value } => {
                p.var = Some(var);
                p.val = Some(value);
            }
            EventBody::Ret { value } => p.val = Some(value),
            EventBody::Output { text } => p.txt = Some(text),
            EventBody::Error { message } => p.msg = Some(message),
            EventBody::RunEnd { outcome } => p.txt = Some(outcome.as_str()),
            EventBody::CallExit | EventBody::StmtEnd | EventBody::LoopExit | EventBody::IterEnd => {}
        }
        let has_payload = !matches!(
            self.body,
            EventBody::CallExit | EventBody::StmtEnd | EventBody::LoopExit | EventBody::IterEnd
        );
        let len = 2 + usize::from(self.span.is_some()) + usize::from(has_payload);
        let mut st = s.serialize_struct("TraceEvent", len)?;
        st.serialize_field("seq", &self.seq)?;
        st.serialize_field("ev", self.kind().as_str())?;
        if let Some(span) = &self.span {
            st.serialize_field("span", span)?;
        }
        if has_payload {
            st.serialize_field("p", &p)?;
        }
        st.end()
    }
}

#[derive(Deserialize)]
struct ArgWire {
    var: Arc<str>,
    val: ValueSnapshot,
}

#[derive(Default, Deserialize)]
struct PayloadWire {
    name: Option<Arc<str>>,
    args: Option<Vec<ArgWire>>,
    var: Option<Arc<str>>,
    expr: Option<Arc<str>>,
    val: Option<ValueSnapshot>,
    idx: Option<u64>,
    msg: Option<Arc<str>>,
    txt: Option<Arc<str>>,
}

#[derive(Deserialize)]
struct EventWire {
    seq: u64,
    ev: EventKind,
    #[serde(default)]
    span: Option<SourceSpan>,
    #[serde(default)]
    p: Option<PayloadWire>,
}

impl<'de> Deserialize<'de> for TraceEvent {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let wire = EventWire::deserialize(d)?;
        let mut p = wire.p.unwrap_or_default();
        let kind = wire.ev;
        let missing = |field: &str| D::Error::custom(format!("{kind} event without payload field '{field}'"));
        let body = match kind {
            EventKind::RunBegin => EventBody::RunBegin {
                entry: p.name.take().ok_or_else(|| missing("name"))?,
            },
            EventKind::CallEnter => EventBody::CallEnter {
                name: p.name.take().ok_or_else(|| missing("name"))?,
                expr: p.expr.take().ok_or_else(|| missing("expr"))?,
                args: p
                    .args
                    .take()
                    .ok_or_else(|| missing("args"))?
                    .into_iter()
                    .map(|a| Binding { var: a.var, value: a.val })
                    .collect(),
            },
            EventKind::CallExit => EventBody::CallExit,
            EventKind::StmtBegin => EventBody::StmtBegin {
                text: p.txt.take().ok_or_else(|| missing("txt"))?,
            },
            EventKind::StmtEnd => EventBody::StmtEnd,
            EventKind::LoopEnter => EventBody::LoopEnter {
                text: p.txt.take().ok_or_else(|| missing("txt"))?,
            },
            EventKind::LoopExit => EventBody::LoopExit,
            EventKind::IterBegin => EventBody::IterBegin {
                index: p.idx.ok_or_else(|| missing("idx"))?,
            },
            EventKind::IterEnd => EventBody::IterEnd,
            EventKind::Eval => EventBody::Eval {
                expr: p.expr.take().ok_or_else(|| missing("expr"))?,
                value: p.val.take().ok_or_else(|| missing("val"))?,
                builtin: p.name.take(),
            },
            EventKind::Bind => EventBody::Bind {
                var: p.var.take().ok_or_else(|| missing("var"))?,
                value: p.val.take().ok_or_else(|| missing("val"))?,
            },
            EventKind::Ret => EventBody::Ret {
                value: p.val.take().ok_or_else(|| missing("val"))?,
            },
            EventKind::Output => EventBody::Output {
                text: p.txt.take().ok_or_else(|| missing("txt"))?,
            },
            EventKind::Error => EventBody::Error {
                message: p.msg.take().ok_or_else(|| missing("msg"))?,
            },
            EventKind::RunEnd => {
                let txt = p.txt.take().ok_or_else(|| missing("txt"))?;
                EventBody::RunEnd {
                    outcome: RunOutcome::parse(&txt)
                        .ok_or_else(|| D::Error::custom(format!("unknown run outcome '{txt}'")))?,
                }
            }
        };
        let needs_span = !matches!(kind, EventKind::RunBegin | EventKind::RunEnd);
        if needs_span && wire.span.is_none() {
            return Err(D::Error::custom(format!("{kind} event without span")));
        }
        Ok(TraceEvent {
            seq: wire.seq,
            span: wire.span,
            body,
        })
    }
}
