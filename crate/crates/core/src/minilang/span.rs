use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

/// A region of one source file.
///
/// Lines and columns are 1-based and count characters, not bytes. `end_col` is
/// exclusive: the identifier `x` at column 5 spans `5..6`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SourceSpan {
    #[serde(rename = "f")]
    pub file: Arc<str>,
    #[serde(rename = "l")]
    pub line: u32,
    #[serde(rename = "c")]
    pub col: u32,
    #[serde(rename = "el")]
    pub end_line: u32,
    #[serde(rename = "ec")]
    pub end_col: u32,
}

impl SourceSpan {
    pub fn new(file: Arc<str>, line: u32, col: u32, end_line: u32, end_col: u32) -> Self {
        debug_assert!((line, col) <= (end_line, end_col));
        Self {
            file,
            line,
            col,
            end_line,
            end_col,
        }
    }

    /// Smallest span covering both `self` and `other` (same file assumed).
    pub fn to(&self, other: &SourceSpan) -> SourceSpan {
        let (line, col) = (self.line, self.col).min((other.line, other.col));
        let (end_line, end_col) = (self.end_line, self.end_col).max((other.end_line, other.end_col));
        SourceSpan {
            file: self.file.clone(),
            line,
            col,
            end_line,
            end_col,
        }
    }

    pub fn contains(&self, other: &SourceSpan) -> bool {
        self.file == other.file
            && (self.line, self.col) <= (other.line, other.col)
            && (other.end_line, other.end_col) <= (self.end_line, self.end_col)
    }
}

impl fmt::Display for SourceSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.file, self.line, self.col)
    }
}
