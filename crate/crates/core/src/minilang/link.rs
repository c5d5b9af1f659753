use std::collections::BTreeMap;
use std::sync::Arc;

use thiserror::Error;

use super::ast::{FunctionDef, SourceFile, Stmt};
use super::SourceSpan;

/// Names available to every program without a definition.
pub const BUILTINS: [&str; 5] = ["sum", "len", "range", "print", "read_from_file"];

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum LinkError {
    #[error("function '{name}' is defined twice ({first} and {second})")]
    DuplicateFunction {
        name: String,
        first: SourceSpan,
        second: SourceSpan,
    },
    #[error("entry function '{0}' is not defined")]
    UnknownEntry(String),
    #[error("entry function '{name}' must take no parameters (takes {count})")]
    EntryTakesParameters { name: String, count: usize },
}

/// A set of source files sharing one global function namespace.
///
/// When any file has top-level statements, running the program executes them
/// in file order; otherwise it calls the entry function.
#[derive(Clone, Debug)]
pub struct Program {
    files: Vec<Arc<SourceFile>>,
    functions: BTreeMap<Arc<str>, Arc<FunctionDef>>,
    entry: Arc<str>,
}

/// What a global name refers to.
#[derive(Clone, Debug, PartialEq)]
pub enum Global<'p> {
    Function(&'p Arc<FunctionDef>),
    Builtin(&'static str),
}

pub fn link(files: Vec<SourceFile>, entry: &str) -> Result<Program, LinkError> {
    let mut functions: BTreeMap<Arc<str>, Arc<FunctionDef>> = BTreeMap::new();
    for file in &files {
        for def in file.functions() {
            if let Some(prev) = functions.get(&def.name) {
                return Err(LinkError::DuplicateFunction {
                    name: def.name.to_string(),
                    first: prev.header.clone(),
                    second: def.header.clone(),
                });
            }
            functions.insert(def.name.clone(), def.clone());
        }
    }
    let Some(entry_def) = functions.get(entry) else {
        return Err(LinkError::UnknownEntry(entry.to_string()));
    };
    if !entry_def.params.is_empty() {
        return Err(LinkError::EntryTakesParameters {
            name: entry.to_string(),
            count: entry_def.params.len(),
        });
    }
    Ok(Program {
        files: files.into_iter().map(Arc::new).collect(),
        functions,
        entry: Arc::from(entry),
    })
}

impl Program {
    pub fn files(&self) -> &[Arc<SourceFile>] {
        &self.files
    }

    pub fn file(&self, name: &str) -> Option<&Arc<SourceFile>> {
        self.files.iter().find(|f| &*f.name == name)
    }

    pub fn entry(&self) -> &str {
        &self.entry
    }

    pub fn entry_function(&self) -> &Arc<FunctionDef> {
        &self.functions[&self.entry]
    }

    pub fn function(&self, name: &str) -> Option<&Arc<FunctionDef>> {
        self.functions.get(name)
    }

    pub fn functions(&self) -> impl Iterator<Item = &Arc<FunctionDef>> {
        self.functions.values()
    }

    /// User functions shadow builtins of the same name.
    pub fn resolve(&self, name: &str) -> Option<Global<'_>> {
        if let Some(def) = self.functions.get(name) {
            return Some(Global::Function(def));
        }
        BUILTINS.iter().find(|b| **b == name).map(|b| Global::Builtin(b))
    }

    pub fn top_level_statements(&self) -> impl Iterator<Item = &Stmt> {
        self.files.iter().flat_map(|f| f.top_level_statements())
    }

    pub fn has_top_level_statements(&self) -> bool {
        self.top_level_statements().next().is_some()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::minilang::parse;

    #[test]
    fn duplicate_function_in_one_file() {
        let file = parse("a.py", "def f():\n  pass\ndef f():\n  pass\ndef main():\n  f()\n").unwrap();
        match link(vec![file], "main") {
            Err(LinkError::DuplicateFunction { name, first, second }) => {
                assert_eq!(name, "f");
                assert_eq!((first.line, second.line), (1, 3));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn duplicate_across_files() {
        let a = parse("a.py", "def f():\n  pass\n").unwrap();
        let b = parse("b.py", "def f():\n  pass\n").unwrap();
        assert!(matches!(link(vec![a, b], "f"), Err(LinkError::DuplicateFunction { .. })));
    }

    #[test]
    fn unknown_entry() {
        let a = parse("a.py", "def main():\n  pass\n").unwrap();
        assert_eq!(link(vec![a], "nope").unwrap_err(), LinkError::UnknownEntry("nope".into()));
    }

    #[test]
    fn entry_with_parameters_is_rejected() {
        let a = parse("a.py", "def main(x):\n  pass\n").unwrap();
        assert!(matches!(link(vec![a], "main"), Err(LinkError::EntryTakesParameters { count: 1, .. })));
    }

    #[test]
    fn builtins_resolve_unless_shadowed() {
        let a = parse("a.py", "def main():\n  pass\ndef len(x):\n  return 0\n").unwrap();
        let program = link(vec![a], "main").unwrap();
        assert_eq!(program.resolve("sum"), Some(Global::Builtin("sum")));
        assert!(matches!(program.resolve("len"), Some(Global::Function(_))));
        assert_eq!(program.resolve("missing"), None);
    }
}
