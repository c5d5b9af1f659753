//! A second interpreter for the traced language that records nothing and
//! only counts what it executes.

use std::collections::HashMap;
use std::rc::Rc;
use std::sync::Arc;

use tracer_core::minilang::ast::{BinOp, BoolOp, CmpOp, Expr, ExprKind, FunctionDef, Stmt, StmtKind, Target, UnaryOp};
use tracer_core::minilang::{Program, BUILTINS};

/// Execution counts of one run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Counts {
    /// Non-loop statements started.
    pub stmts: u64,
    pub loops: u64,
    pub iterations: u64,
    /// User function calls entered.
    pub calls: u64,
    pub outputs: u64,
    pub completed: bool,
}

#[derive(Clone, Debug)]
enum V {
    Int(i64),
    Float(f64),
    Bool(bool),
    Str(Rc<str>),
    None,
    List(Rc<Vec<V>>),
    Tuple(Rc<Vec<V>>),
    User(Arc<FunctionDef>),
    Builtin(&'static str),
}

impl V {
    fn truthy(&self) -> bool {
        match self {
            V::Int(i) => *i != 0,
            V::Float(f) => *f != 0.0,
            V::Bool(b) => *b,
            V::Str(s) => !s.is_empty(),
            V::None => false,
            V::List(x) | V::Tuple(x) => !x.is_empty(),
            V::User(_) | V::Builtin(_) => true,
        }
    }

    fn int(&self) -> Option<i64> {
        match self {
            V::Int(i) => Some(*i),
            V::Bool(b) => Some(*b as i64),
            _ => None,
        }
    }

    fn float(&self) -> Option<f64> {
        match self {
            V::Float(f) => Some(*f),
            other => other.int().map(|i| i as f64),
        }
    }
}

struct Stop;

enum Flow {
    Next,
    Return(V),
}

struct Counter<'p> {
    program: &'p Program,
    data: Option<&'p [i64]>,
    globals: HashMap<Arc<str>, V>,
    frames: Vec<HashMap<Arc<str>, V>>,
    max_depth: usize,
    counts: Counts,
}

/// Runs `program` the way the tracer would and returns what it executed.
/// `max_depth` is the call depth limit.
pub fn count(program: &Program, data: Option<&[i64]>, max_depth: usize) -> Counts {
    let mut c = Counter {
        program,
        data,
        globals: HashMap::new(),
        frames: Vec::new(),
        max_depth,
        counts: Counts::default(),
    };
    let result = if program.has_top_level_statements() {
        let stmts: Vec<&Stmt> = program.top_level_statements().collect();
        stmts.into_iter().try_for_each(|s| c.stmt(s).map(|_| ()))
    } else {
        let def = program.entry_function().clone();
        c.call(&def, Vec::new()).map(|_| ())
    };
    c.counts.completed = result.is_ok();
    c.counts
}

impl Counter<'_> {
    fn block(&mut self, stmts: &[Stmt]) -> Result<Flow, Stop> {
        for s in stmts {
            if let Flow::Return(v) = self.stmt(s)? {
                return Ok(Flow::Return(v));
            }
        }
        Ok(Flow::Next)
    }

    fn stmt(&mut self, s: &Stmt) -> Result<Flow, Stop> {
        match &s.kind {
            StmtKind::While { cond, body } => {
                self.counts.loops += 1;
                while self.expr(cond)?.truthy() {
                    self.counts.iterations += 1;
                    if let Flow::Return(v) = self.block(body)? {
                        return Ok(Flow::Return(v));
                    }
                }
                Ok(Flow::Next)
            }
            StmtKind::For { target, iterable, body } => {
                self.counts.loops += 1;
                let items = match self.expr(iterable)? {
                    V::List(x) | V::Tuple(x) => x.to_vec(),
                    V::Str(s) => s.chars().map(|c| V::Str(Rc::from(c.to_string()))).collect(),
                    _ => return Err(Stop),
                };
                for item in items {
                    self.counts.iterations += 1;
                    self.bind(target, item)?;
                    if let Flow::Return(v) = self.block(body)? {
                        return Ok(Flow::Return(v));
                    }
                }
                Ok(Flow::Next)
            }
            StmtKind::Assign { target, value } => {
                self.counts.stmts += 1;
                let v = self.expr(value)?;
                self.bind(target, v)?;
                Ok(Flow::Next)
            }
            StmtKind::Expr(e) => {
                self.counts.stmts += 1;
                self.expr(e)?;
                Ok(Flow::Next)
            }
            StmtKind::Pass => {
                self.counts.stmts += 1;
                Ok(Flow::Next)
            }
            StmtKind::Return(e) => {
                self.counts.stmts += 1;
                let v = match e {
                    Some(e) => self.expr(e)?,
                    None => V::None,
                };
                Ok(Flow::Return(v))
            }
            StmtKind::If { arms, else_body } => {
                self.counts.stmts += 1;
                for arm in arms {
                    if self.expr(&arm.cond)?.truthy() {
                        return self.block(&arm.body);
                    }
                }
                match else_body {
                    Some(b) => self.block(b),
                    None => Ok(Flow::Next),
                }
            }
        }
    }

    fn bind(&mut self, target: &Target, v: V) -> Result<(), Stop> {
        match target {
            Target::Name(id) => {
                self.set(id.name.clone(), v);
                Ok(())
            }
            Target::Tuple { names, .. } => {
                let items = match v {
                    V::List(x) | V::Tuple(x) => x,
                    _ => return Err(Stop),
                };
                if items.len() != names.len() {
                    return Err(Stop);
                }
                for (id, item) in names.iter().zip(items.iter()) {
                    self.set(id.name.clone(), item.clone());
                }
                Ok(())
            }
        }
    }

    fn set(&mut self, name: Arc<str>, v: V) {
        match self.frames.last_mut() {
            Some(f) => f.insert(name, v),
            None => self.globals.insert(name, v),
        };
    }

    fn get(&self, name: &str) -> Result<V, Stop> {
        if let Some(v) = self.frames.last().and_then(|f| f.get(name)).or_else(|| self.globals.get(name)) {
            return Ok(v.clone());
        }
        if let Some(def) = self.program.function(name) {
            return Ok(V::User(def.clone()));
        }
        BUILTINS.iter().find(|b| **b == name).map(|b| V::Builtin(b)).ok_or(Stop)
    }

    fn call(&mut self, def: &Arc<FunctionDef>, args: Vec<V>) -> Result<V, Stop> {
        if args.len() != def.params.len() || self.frames.len() >= self.max_depth {
            return Err(Stop);
        }
        self.counts.calls += 1;
        self.frames
            .push(def.params.iter().map(|p| p.name.clone()).zip(args).collect());
        let flow = self.block(&def.body);
        self.frames.pop();
        Ok(match flow? {
            Flow::Return(v) => v,
            Flow::Next => V::None,
        })
    }

    fn expr(&mut self, e: &Expr) -> Result<V, Stop> {
        Ok(match &e.kind {
            ExprKind::Int(i) => V::Int(*i),
            ExprKind::Float(f) => V::Float(*f),
            ExprKind::Str(s) => V::Str(Rc::from(&**s)),
            ExprKind::Bool(b) => V::Bool(*b),
            ExprKind::None => V::None,
            ExprKind::List(items) => V::List(Rc::new(self.exprs(items)?)),
            ExprKind::Tuple(items) => V::Tuple(Rc::new(self.exprs(items)?)),
            ExprKind::Name(n) => self.get(n)?,
            ExprKind::Unary { op, operand } => {
                let v = self.expr(operand)?;
                match op {
                    UnaryOp::Not => V::Bool(!v.truthy()),
                    UnaryOp::Neg => match v {
                        V::Float(f) => V::Float(-f),
                        other => V::Int(other.int().ok_or(Stop)?.checked_neg().ok_or(Stop)?),
                    },
                    UnaryOp::Pos => match v {
                        V::Float(f) => V::Float(f),
                        other => V::Int(other.int().ok_or(Stop)?),
                    },
                }
            }
            ExprKind::BinOp { op, lhs, rhs } => {
                let l = self.expr(lhs)?;
                let r = self.expr(rhs)?;
                arith(*op, &l, &r)?
            }
            ExprKind::BoolOp { op, lhs, rhs } => {
                let l = self.expr(lhs)?;
                match (op, l.truthy()) {
                    (BoolOp::And, false) | (BoolOp::Or, true) => l,
                    _ => self.expr(rhs)?,
                }
            }
            ExprKind::Compare { first, rest } => {
                let mut left = self.expr(first)?;
                for (op, rhs) in rest {
                    let right = self.expr(rhs)?;
                    if !compare(*op, &left, &right)? {
                        return Ok(V::Bool(false));
                    }
                    left = right;
                }
                V::Bool(true)
            }
            ExprKind::Index { target, index } => {
                let t = self.expr(target)?;
                let i = self.expr(index)?.int().ok_or(Stop)?;
                let items = match t {
                    V::List(x) | V::Tuple(x) => x,
                    _ => return Err(Stop),
                };
                let n = items.len() as i64;
                let k = if i < 0 { i + n } else { i };
                if k < 0 || k >= n {
                    return Err(Stop);
                }
                items[k as usize].clone()
            }
            ExprKind::Call { callee, args } => {
                let f = self.expr(callee)?;
                let args = self.exprs(args)?;
                match f {
                    V::User(def) => self.call(&def, args)?,
                    V::Builtin(b) => self.builtin(b, args)?,
                    _ => return Err(Stop),
                }
            }
        })
    }

    fn exprs(&mut self, items: &[Expr]) -> Result<Vec<V>, Stop> {
        items.iter().map(|e| self.expr(e)).collect()
    }

    fn builtin(&mut self, name: &str, args: Vec<V>) -> Result<V, Stop> {
        match (name, args.as_slice()) {
            ("print", _) => {
                self.counts.outputs += 1;
                Ok(V::None)
            }
            ("len", [V::List(x) | V::Tuple(x)]) => Ok(V::Int(x.len() as i64)),
            ("len", [V::Str(s)]) => Ok(V::Int(s.chars().count() as i64)),
            ("sum", [V::List(x) | V::Tuple(x)]) => {
                x.iter().try_fold(V::Int(0), |acc, v| arith(BinOp::Add, &acc, v))
            }
            ("range", _) => {
                let ints: Vec<i64> = args.iter().map(|a| a.int().ok_or(Stop)).collect::<Result<_, _>>()?;
                let (start, stop, step) = match ints[..] {
                    [b] => (0, b, 1),
                    [a, b] => (a, b, 1),
                    [a, b, c] if c != 0 => (a, b, c),
                    _ => return Err(Stop),
                };
                let mut out = Vec::new();
                let mut k = start;
                while (step > 0 && k < stop) || (step < 0 && k > stop) {
                    out.push(V::Int(k));
                    if out.len() > 10_000_000 {
                        return Err(Stop);
                    }
                    k += step;
                }
                Ok(V::List(Rc::new(out)))
            }
            ("read_from_file", []) => {
                let data = self.data.ok_or(Stop)?;
                Ok(V::List(Rc::new(data.iter().map(|i| V::Int(*i)).collect())))
            }
            _ => Err(Stop),
        }
    }
}

fn arith(op: BinOp, l: &V, r: &V) -> Result<V, Stop> {
    match (op, l, r) {
        (BinOp::Add, V::List(a), V::List(b)) => return Ok(V::List(Rc::new([a.to_vec(), b.to_vec()].concat()))),
        (BinOp::Add, V::Tuple(a), V::Tuple(b)) => return Ok(V::Tuple(Rc::new([a.to_vec(), b.to_vec()].concat()))),
        (BinOp::Add, V::Str(a), V::Str(b)) => return Ok(V::Str(Rc::from(format!("{a}{b}")))),
        _ => {}
    }
    if let (Some(a), Some(b)) = (l.int(), r.int()) {
        return match op {
            BinOp::Add => a.checked_add(b).map(V::Int).ok_or(Stop),
            BinOp::Sub => a.checked_sub(b).map(V::Int).ok_or(Stop),
            BinOp::Mul => a.checked_mul(b).map(V::Int).ok_or(Stop),
            BinOp::Div if b == 0 => Err(Stop),
            BinOp::Div => Ok(V::Float(a as f64 / b as f64)),
            BinOp::FloorDiv | BinOp::Mod if b == 0 => Err(Stop),
            BinOp::FloorDiv => {
                let q = a.checked_div(b).ok_or(Stop)?;
                Ok(V::Int(if (a % b != 0) && ((a < 0) != (b < 0)) { q - 1 } else { q }))
            }
            BinOp::Mod => {
                let m = a.checked_rem(b).ok_or(Stop)?;
                Ok(V::Int(if m != 0 && ((m < 0) != (b < 0)) { m + b } else { m }))
            }
        };
    }
    let (a, b) = (l.float().ok_or(Stop)?, r.float().ok_or(Stop)?);
    match op {
        BinOp::Add => Ok(V::Float(a + b)),
        BinOp::Sub => Ok(V::Float(a - b)),
        BinOp::Mul => Ok(V::Float(a * b)),
        _ if b == 0.0 => Err(Stop),
        BinOp::Div => Ok(V::Float(a / b)),
        BinOp::FloorDiv => Ok(V::Float((a / b).floor())),
        BinOp::Mod => Ok(V::Float(a - b * (a / b).floor())),
    }
}

fn compare(op: CmpOp, l: &V, r: &V) -> Result<bool, Stop> {
    let ord = match (l, r) {
        (V::Str(a), V::Str(b)) => a.cmp(b),
        _ => match (l.float(), r.float()) {
            (Some(a), Some(b)) => a.partial_cmp(&b).ok_or(Stop)?,
            _ => {
                return match op {
                    CmpOp::Eq => Ok(equal(l, r)),
                    CmpOp::Ne => Ok(!equal(l, r)),
                    _ => Err(Stop),
                }
            }
        },
    };
    Ok(match op {
        CmpOp::Eq => ord.is_eq(),
        CmpOp::Ne => ord.is_ne(),
        CmpOp::Lt => ord.is_lt(),
        CmpOp::Le => ord.is_le(),
        CmpOp::Gt => ord.is_gt(),
        CmpOp::Ge => ord.is_ge(),
    })
}

fn equal(l: &V, r: &V) -> bool {
    match (l, r) {
        (V::List(a), V::List(b)) | (V::Tuple(a), V::Tuple(b)) => {
            a.len() == b.len() && a.iter().zip(b.iter()).all(|(x, y)| equal(x, y))
        }
        (V::None, V::None) => true,
        (V::Str(a), V::Str(b)) => a == b,
        (V::User(a), V::User(b)) => Arc::ptr_eq(a, b),
        (V::Builtin(a), V::Builtin(b)) => a == b,
        _ => match (l.float(), r.float()) {
            (Some(a), Some(b)) => a == b,
            _ => false,
        },
    }
}
