//! Structural queries over a trace tree and text search over rendered lines.
//!
//! A selector is a chain of steps joined by combinators:
//!
//! ```text
//! selector   := step (combinator step)*
//! combinator := whitespace        descendant
//!             | ">"               child
//!             | "/"               descendant in the same frame (no call in between)
//! step       := (kind | "*")? filter*
//! kind       := call | loop | iter | stmt | bind | eval | ret | output | error
//! filter     := "[" attr "=" literal "]" | ":first" | ":last" | ":nth(" k ")"
//!             | ":has(" combinator? selector ")"
//! attr       := name | var | func | file | line | idx | value | oid | expr
//! literal    := null | true | false | integer | "string" | identifier
//! ```
//!
//! Filters apply left to right. Positional filters (`:first`, `:last`,
//! `:nth`) pick from the candidates of one anchor node in time order.

mod eval;
mod grep;
mod parse;

use std::fmt;

use thiserror::Error;

use crate::model::NodeKind;

pub use eval::{evaluate, matches_predicate};
pub use grep::{grep, BadPattern, GrepMatch};
pub use parse::parse_selector;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Combinator {
    Descendant,
    Child,
    SameFrame,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Attr {
    Name,
    Var,
    Func,
    File,
    Line,
    Idx,
    Value,
    Oid,
    Expr,
}

impl Attr {
    pub const ALL: [Attr; 9] = [
        Attr::Name,
        Attr::Var,
        Attr::Func,
        Attr::File,
        Attr::Line,
        Attr::Idx,
        Attr::Value,
        Attr::Oid,
        Attr::Expr,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Attr::Name => "name",
            Attr::Var => "var",
            Attr::Func => "func",
            Attr::File => "file",
            Attr::Line => "line",
            Attr::Idx => "idx",
            Attr::Value => "value",
            Attr::Oid => "oid",
            Attr::Expr => "expr",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Literal {
    Null,
    Bool(bool),
    Int(i64),
    Str(String),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Filter {
    Attr { attr: Attr, value: Literal },
    First,
    Last,
    Nth(usize),
    Has { combinator: Combinator, selector: Box<Selector> },
}

impl Filter {
    pub fn is_positional(&self) -> bool {
        matches!(self, Filter::First | Filter::Last | Filter::Nth(_))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Step {
    /// `None` matches every kind.
    pub kind: Option<NodeKind>,
    pub filters: Vec<Filter>,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Selector {
    pub first: Step,
    pub rest: Vec<(Combinator, Step)>,
}

impl Selector {
    pub fn steps(&self) -> impl Iterator<Item = &Step> {
        std::iter::once(&self.first).chain(self.rest.iter().map(|(_, s)| s))
    }
}

/// Position is a character offset into the selector text.
#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("selector syntax error at position {position}: expected {expected}")]
pub struct SelectorSyntaxError {
    pub position: usize,
    pub expected: String,
}

fn write_combinator(f: &mut fmt::Formatter<'_>, c: Combinator) -> fmt::Result {
    match c {
        Combinator::Descendant => f.write_str(" "),
        Combinator::Child => f.write_str(" > "),
        Combinator::SameFrame => f.write_str(" / "),
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Literal::Null => f.write_str("null"),
            Literal::Bool(b) => write!(f, "{b}"),
            Literal::Int(i) => write!(f, "{i}"),
            Literal::Str(s) => {
                f.write_str("\"")?;
                for c in s.chars() {
                    match c {
                        '"' => f.write_str("\\\"")?,
                        '\\' => f.write_str("\\\\")?,
                        '\n' => f.write_str("\\n")?,
                        c => write!(f, "{c}")?,
                    }
                }
                f.write_str("\"")
            }
        }
    }
}

impl fmt::Display for Step {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            Some(kind) => f.write_str(kind.as_str())?,
            None => f.write_str("*")?,
        }
        for filter in &self.filters {
            match filter {
                Filter::Attr { attr, value } => write!(f, "[{}={value}]", attr.as_str())?,
                Filter::First => f.write_str(":first")?,
                Filter::Last => f.write_str(":last")?,
                Filter::Nth(k) => write!(f, ":nth({k})")?,
                Filter::Has { combinator, selector } => {
                    f.write_str(":has(")?;
                    match combinator {
                        Combinator::Descendant => {}
                        Combinator::Child => f.write_str("> ")?,
                        Combinator::SameFrame => f.write_str("/ ")?,
                    }
                    write!(f, "{selector})")?;
                }
            }
        }
        Ok(())
    }
}

/// Canonical text: re-parses to an equal selector.
impl fmt::Display for Selector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.first)?;
        for (c, step) in &self.rest {
            write_combinator(f, *c)?;
            write!(f, "{step}")?;
        }
        Ok(())
    }
}
