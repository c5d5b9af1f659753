//! Syntax tree of the traced language.
//!
//! Every node carries the [`SourceSpan`] of its exact source extent. Compound
//! statements additionally keep the text of their header line, which is what
//! the trace shows for them.

use std::sync::Arc;

use super::SourceSpan;

/// One parsed source file.
#[derive(Clone, Debug, PartialEq)]
pub struct SourceFile {
    pub name: Arc<str>,
    pub text: String,
    pub body: Vec<Item>,
}

impl SourceFile {
    pub fn functions(&self) -> impl Iterator<Item = &Arc<FunctionDef>> {
        self.body.iter().filter_map(|item| match item {
            Item::Function(def) => Some(def),
            Item::Stmt(_) => None,
        })
    }

    pub fn top_level_statements(&self) -> impl Iterator<Item = &Stmt> {
        self.body.iter().filter_map(|item| match item {
            Item::Stmt(stmt) => Some(stmt),
            Item::Function(_) => None,
        })
    }
}

/// A top-level item, in source order.
#[derive(Clone, Debug, PartialEq)]
pub enum Item {
    Function(Arc<FunctionDef>),
    Stmt(Stmt),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Ident {
    pub name: Arc<str>,
    pub span: SourceSpan,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FunctionDef {
    pub name: Arc<str>,
    pub params: Vec<Ident>,
    pub body: Vec<Stmt>,
    /// The whole definition, header through the last body line.
    pub span: SourceSpan,
    /// The `def name(params):` header only.
    pub header: SourceSpan,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Stmt {
    pub kind: StmtKind,
    /// Full extent, including nested blocks.
    pub span: SourceSpan,
    /// Span of the first line of the statement (the whole statement for
    /// simple statements).
    pub header: SourceSpan,
    /// Source text covered by `header`.
    pub text: Arc<str>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum StmtKind {
    Assign { target: Target, value: Expr },
    Expr(Expr),
    Return(Option<Expr>),
    Pass,
    If { arms: Vec<IfArm>, else_body: Option<Vec<Stmt>> },
    While { cond: Expr, body: Vec<Stmt> },
    For { target: Target, iterable: Expr, body: Vec<Stmt> },
}

#[derive(Clone, Debug, PartialEq)]
pub struct IfArm {
    pub cond: Expr,
    pub body: Vec<Stmt>,
}

/// Assignment or loop target: a name, or a tuple pattern of names.
#[derive(Clone, Debug, PartialEq)]
pub enum Target {
    Name(Ident),
    Tuple { names: Vec<Ident>, span: SourceSpan },
}

impl Target {
    pub fn span(&self) -> &SourceSpan {
        match self {
            Target::Name(ident) => &ident.span,
            Target::Tuple { span, .. } => span,
        }
    }

    pub fn names(&self) -> &[Ident] {
        match self {
            Target::Name(ident) => std::slice::from_ref(ident),
            Target::Tuple { names, .. } => names,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Expr {
    pub kind: ExprKind,
    pub span: SourceSpan,
    /// Source text covered by `span`.
    pub text: Arc<str>,
}

impl Expr {
    /// Literals produce no evaluation record in the trace. A list or tuple
    /// display counts as a literal only when all of its elements do.
    pub fn is_literal(&self) -> bool {
        match &self.kind {
            ExprKind::Int(_)
            | ExprKind::Float(_)
            | ExprKind::Str(_)
            | ExprKind::Bool(_)
            | ExprKind::None => true,
            ExprKind::List(items) | ExprKind::Tuple(items) => items.iter().all(Expr::is_literal),
            _ => false,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ExprKind {
    Int(i64),
    Float(f64),
    Str(Arc<str>),
    Bool(bool),
    None,
    List(Vec<Expr>),
    Tuple(Vec<Expr>),
    Name(Arc<str>),
    Unary { op: UnaryOp, operand: Box<Expr> },
    BinOp { op: BinOp, lhs: Box<Expr>, rhs: Box<Expr> },
    BoolOp { op: BoolOp, lhs: Box<Expr>, rhs: Box<Expr> },
    Compare { first: Box<Expr>, rest: Vec<(CmpOp, Expr)> },
    Call { callee: Box<Expr>, args: Vec<Expr> },
    Index { target: Box<Expr>, index: Box<Expr> },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UnaryOp {
    Neg,
    Pos,
    Not,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    FloorDiv,
    Mod,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::FloorDiv => "//",
            BinOp::Mod => "%",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoolOp {
    And,
    Or,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

/// Visits every statement of a block in source order, descending into nested
/// blocks.
pub fn walk_stmts<'a>(stmts: &'a [Stmt], visit: &mut dyn FnMut(&'a Stmt)) {
    for stmt in stmts {
        visit(stmt);
        match &stmt.kind {
            StmtKind::If { arms, else_body } => {
                for arm in arms {
                    walk_stmts(&arm.body, visit);
                }
                if let Some(body) = else_body {
                    walk_stmts(body, visit);
                }
            }
            StmtKind::While { body, .. } | StmtKind::For { body, .. } => walk_stmts(body, visit),
            _ => {}
        }
    }
}
