//! The traced language: a small, indentation-based, Python-like imperative
//! language.
//!
//! Supported: `def`, `return`, `if`/`elif`/`else`, `while`, `for x in ...`,
//! `pass`, assignment with tuple destructuring, expression statements,
//! int/float/bool/str/None/list/tuple literals, `+ - * / // %`, comparisons,
//! `and`/`or`/`not`, indexing and calls. Builtins are `sum`, `len`, `range`,
//! `print` and `read_from_file`.

pub mod ast;
mod lexer;
mod link;
mod parser;
mod span;

use thiserror::Error;

pub use ast::SourceFile;
pub use link::{link, Global, LinkError, Program, BUILTINS};
pub use parser::parse;
pub use span::SourceSpan;


#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("{span}: syntax error: {message}")]
pub struct SyntaxError {
    pub span: SourceSpan,
    pub message: String,
}

#[cfg(test)]
mod tests {
    use super::ast::*;
    use super::*;

    fn stmts(src: &str) -> Vec<Stmt> {
        parse("t.py", src)
            .unwrap()
            .body
            .into_iter()
            .map(|item| match item {
                Item::Stmt(s) => s,
                Item::Function(_) => panic!("unexpected def"),
            })
            .collect()
    }

    #[test]
    fn empty_input_has_empty_body() {
        assert!(parse("e.py", "").unwrap().body.is_empty());
    }

    #[test]
    fn malformed_header_reports_line_one() {
        let err = parse("bad.py", "def f(:").unwrap_err();
        assert_eq!(err.span.line, 1);
    }

    #[test]
    fn one_line_function_body() {
        let file = parse("m.py", "def main(): return 0\n").unwrap();
        let def = file.functions().next().unwrap();
        assert_eq!(&*def.name, "main");
        assert!(matches!(def.body[0].kind, StmtKind::Return(Some(_))));
    }

    #[test]
    fn tuple_destructuring_target() {
        let s = &stmts("result, _ = do_it()\n")[0];
        let StmtKind::Assign { target, value } = &s.kind else { panic!() };
        let names: Vec<_> = target.names().iter().map(|i| i.name.to_string()).collect();
        assert_eq!(names, ["result", "_"]);
        assert_eq!(&*value.text, "do_it()");
        assert_eq!(&*s.text, "result, _ = do_it()");
    }

    #[test]
    fn precedence_and_spans() {
        let s = &stmts("x = 1 + 2 * y\n")[0];
        let StmtKind::Assign { value, .. } = &s.kind else { panic!() };
        let ExprKind::BinOp { op, rhs, .. } = &value.kind else { panic!() };
        assert_eq!(*op, BinOp::Add);
        assert_eq!(&*rhs.text, "2 * y");
        assert_eq!((rhs.span.col, rhs.span.end_col), (9, 14));
    }

    #[test]
    fn if_elif_else_and_loops() {
        let src = "\
if a:
  x = 1
elif b:
  x = 2
else:
  x = 3
while x < 4:
  x = x + 1
for i, j in pairs:
  pass
";
        let s = stmts(src);
        assert_eq!(s.len(), 3);
        assert_eq!(&*s[0].text, "if a:");
        assert_eq!((s[0].span.line, s[0].span.end_line), (1, 6));
        assert_eq!(&*s[1].text, "while x < 4:");
        let StmtKind::For { target, .. } = &s[2].kind else { panic!() };
        assert_eq!(target.names().len(), 2);
    }

    #[test]
    fn return_outside_function_is_rejected() {
        assert!(parse("t.py", "return 1\n").is_err());
    }

    #[test]
    fn nested_def_is_rejected() {
        assert!(parse("t.py", "def f():\n  def g():\n    pass\n").is_err());
    }

    #[test]
    fn cannot_assign_to_call() {
        let err = parse("t.py", "f() = 1\n").unwrap_err();
        assert!(err.message.contains("cannot assign"));
    }

    #[test]
    fn literal_classification() {
        let s = stmts("a = [1, (2, 'x')]\nb = [1, y]\n");
        let value = |s: &Stmt| match &s.kind {
            StmtKind::Assign { value, .. } => value.clone(),
            _ => panic!(),
        };
        assert!(value(&s[0]).is_literal());
        assert!(!value(&s[1]).is_literal());
    }
}
