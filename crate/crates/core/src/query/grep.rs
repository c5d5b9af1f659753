use regex::Regex;
use serde::Serialize;
use thiserror::Error;

use crate::model::NodeId;
use crate::render::RenderedLine;

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("bad pattern: {0}")]
pub struct BadPattern(pub String);

/// First match of the pattern on one rendered line; `start..end` are byte
/// offsets into the line text.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct GrepMatch {
    pub line_index: usize,
    pub node_id: NodeId,
    pub start: usize,
    pub end: usize,
}

/// Lines matching `pattern` (a regular expression), in order, stopping after
/// `max_matches` when given.
pub fn grep<'a>(
    lines: impl IntoIterator<Item = &'a RenderedLine>,
    pattern: &str,
    max_matches: Option<usize>,
) -> Result<Vec<GrepMatch>, BadPattern> {
    let re = Regex::new(pattern).map_err(|e| BadPattern(e.to_string()))?;
    let limit = max_matches.unwrap_or(usize::MAX);
    let mut out = Vec::new();
    if limit == 0 {
        return Ok(out);
    }
    for line in lines {
        if let Some(m) = re.find(&line.text) {
            out.push(GrepMatch {
                line_index: line.index,
                node_id: line.node_id,
                start: m.start(),
                end: m.end(),
            });
            if out.len() >= limit {
                break;
            }
        }
    }
    Ok(out)
}
