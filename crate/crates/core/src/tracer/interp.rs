use std::collections::HashMap;
use std::io;
use std::rc::Rc;
use std::sync::Arc;

use super::event::{Binding, EventBody, TraceEvent};
use super::ops::{self, Oids, MAX_BUILT_LEN};
use super::value::{snapshot, Callable, Value, ValueSnapshot};
use super::{Environment, EventSink, ExecutionLimits, ExitStatus, BUDGET_MESSAGE};
use crate::minilang::ast::{Expr, ExprKind, FunctionDef, Ident, Stmt, StmtKind, Target};
use crate::minilang::{Global, Program, SourceSpan};

type Scope = HashMap<Arc<str>, Value>;

enum Abort {
    Error { message: String, span: SourceSpan },
    Budget { span: SourceSpan },
    Sink(io::Error),
}

type Exec<T> = Result<T, Abort>;

fn fail<T>(message: impl Into<String>, span: &SourceSpan) -> Exec<T> {
    Err(Abort::Error {
        message: message.into(),
        span: span.clone(),
    })
}

enum Flow {
    Next,
    Return(Value),
}

struct Interp<'a, S: ?Sized> {
    program: &'a Program,
    limits: &'a ExecutionLimits,
    data: Option<&'a [i64]>,
    sink: &'a mut S,
    seq: u64,
    oids: Oids,
    globals: Scope,
    frames: Vec<Scope>,
    output_bytes: usize,
}

pub(super) fn run<S: EventSink + ?Sized>(
    program: &Program,
    limits: &ExecutionLimits,
    env: &Environment,
    sink: &mut S,
) -> io::Result<ExitStatus> {
    let mut it = Interp {
        program,
        limits,
        data: env.data.as_deref(),
        sink,
        seq: 0,
        oids: Oids::new(),
        globals: Scope::new(),
        frames: Vec::new(),
        output_bytes: 0,
    };
    it.push(
        None,
        EventBody::RunBegin {
            entry: Arc::from(program.entry()),
        },
    )?;
    let result = if program.has_top_level_statements() {
        program
            .top_level_statements()
            .try_for_each(|stmt| it.exec_stmt(stmt).map(|_| ()))
    } else {
        it.call_entry()
    };
    let status = match result {
        Ok(()) => ExitStatus::Completed,
        Err(Abort::Error { message, span }) => {
            it.push(
                Some(span.clone()),
                EventBody::Error {
                    message: Arc::from(message.as_str()),
                },
            )?;
            ExitStatus::Errored { message, span }
        }
        Err(Abort::Budget { span }) => {
            it.push(
                Some(span),
                EventBody::Error {
                    message: Arc::from(BUDGET_MESSAGE),
                },
            )?;
            ExitStatus::BudgetExhausted
        }
        Err(Abort::Sink(e)) => return Err(e),
    };
    it.push(
        None,
        EventBody::RunEnd {
            outcome: status.outcome(),
        },
    )?;
    Ok(status)
}

impl<S: EventSink + ?Sized> Interp<'_, S> {
    fn push(&mut self, span: Option<SourceSpan>, body: EventBody) -> io::Result<()> {
        let seq = self.seq;
        self.seq += 1;
        self.sink.accept(TraceEvent { seq, span, body })
    }

    /// Emits an event unless that would leave no room for the closing
    /// `error`/`run_end` pair.
    fn emit(&mut self, span: &SourceSpan, body: EventBody) -> Exec<()> {
        if self.seq + 2 >= self.limits.max_events {
            return Err(Abort::Budget { span: span.clone() });
        }
        self.push(Some(span.clone()), body).map_err(Abort::Sink)
    }

    fn snap(&self, v: &Value) -> ValueSnapshot {
        snapshot(v, self.limits)
    }

    fn scope(&mut self) -> &mut Scope {
        self.frames.last_mut().unwrap_or(&mut self.globals)
    }

    fn variable(&self, name: &str) -> Option<&Value> {
        self.frames
            .last()
            .and_then(|f| f.get(name))
            .or_else(|| self.globals.get(name))
    }

    fn lookup(&self, name: &Arc<str>, span: &SourceSpan) -> Exec<Value> {
        if let Some(v) = self.variable(name) {
            return Ok(v.clone());
        }
        match self.program.resolve(name) {
            Some(Global::Function(def)) => Ok(Value::Func(Callable::User(def.clone()))),
            Some(Global::Builtin(b)) => Ok(Value::Func(Callable::Builtin(b))),
            None => fail(format!("name '{name}' is not defined"), span),
        }
    }

    fn call_entry(&mut self) -> Exec<()> {
        let def = self.program.entry_function().clone();
        let expr: Arc<str> = Arc::from(format!("{}()", def.name));
        self.invoke(&def, Vec::new(), &def.header, expr)?;
        Ok(())
    }

    fn invoke(&mut self, def: &Arc<FunctionDef>, args: Vec<Value>, site: &SourceSpan, expr: Arc<str>) -> Exec<Value> {
        if args.len() != def.params.len() {
            let n = def.params.len();
            return fail(
                format!(
                    "{}() takes {n} positional argument{} but {} {} given",
                    def.name,
                    if n == 1 { "" } else { "s" },
                    args.len(),
                    if args.len() == 1 { "was" } else { "were" }
                ),
                site,
            );
        }
        if self.frames.len() >= self.limits.max_call_depth {
            return fail("maximum recursion depth exceeded", site);
        }
        let bindings = def
            .params
            .iter()
            .zip(&args)
            .map(|(p, v)| Binding {
                var: p.name.clone(),
                value: self.snap(v),
            })
            .collect();
        self.emit(
            site,
            EventBody::CallEnter {
                name: def.name.clone(),
                expr,
                args: bindings,
            },
        )?;
        let frame: Scope = def.params.iter().map(|p| p.name.clone()).zip(args).collect();
        self.frames.push(frame);
        let flow = self.exec_block(&def.body);
        self.frames.pop();
        let value = match flow? {
            Flow::Return(v) => v,
            Flow::Next => Value::None,
        };
        self.emit(site, EventBody::CallExit)?;
        Ok(value)
    }

    fn exec_block(&mut self, stmts: &[Stmt]) -> Exec<Flow> {
        for stmt in stmts {
            if let Flow::Return(v) = self.exec_stmt(stmt)? {
                return Ok(Flow::Return(v));
            }
        }
        Ok(Flow::Next)
    }

    fn exec_stmt(&mut self, stmt: &Stmt) -> Exec<Flow> {
        let header = &stmt.header;
        match &stmt.kind {
            StmtKind::While { cond, body } => {
                self.emit(header, EventBody::LoopEnter { text: stmt.text.clone() })?;
                let mut index = 0;
                let mut flow = Flow::Next;
                while self.eval(cond)?.truthy() {
                    index += 1;
                    flow = self.iteration(header, index, None, body)?;
                    if matches!(flow, Flow::Return(_)) {
                        break;
                    }
                }
                self.emit(header, EventBody::LoopExit)?;
                return Ok(flow);
            }
            StmtKind::For { target, iterable, body } => {
                self.emit(header, EventBody::LoopEnter { text: stmt.text.clone() })?;
                let seq = self.eval(iterable)?;
                let items = ops::iterate(&seq).or_else(|m| fail(m, &iterable.span))?;
                let mut flow = Flow::Next;
                for (i, item) in items.into_iter().enumerate() {
                    flow = self.iteration(header, i as u64 + 1, Some((target, item)), body)?;
                    if matches!(flow, Flow::Return(_)) {
                        break;
                    }
                }
                self.emit(header, EventBody::LoopExit)?;
                return Ok(flow);
            }
            _ => {}
        }
        self.emit(header, EventBody::StmtBegin { text: stmt.text.clone() })?;
        let flow = match &stmt.kind {
            StmtKind::Assign { target, value } => {
                let v = self.eval(value)?;
                self.bind_target(target, v)?;
                Flow::Next
            }
            StmtKind::Expr(e) => {
                self.eval(e)?;
                Flow::Next
            }
            StmtKind::Pass => Flow::Next,
            StmtKind::Return(e) => {
                let v = match e {
                    Some(e) => self.eval(e)?,
                    None => Value::None,
                };
                self.emit(header, EventBody::StmtEnd)?;
                let value = self.snap(&v);
                self.emit(header, EventBody::Ret { value })?;
                return Ok(Flow::Return(v));
            }
            StmtKind::If { arms, else_body } => {
                let mut taken = None;
                for arm in arms {
                    if self.eval(&arm.cond)?.truthy() {
                        taken = Some(&arm.body);
                        break;
                    }
                }
                match taken.or(else_body.as_ref()) {
                    Some(body) => self.exec_block(body)?,
                    None => Flow::Next,
                }
            }
            StmtKind::While { .. } | StmtKind::For { .. } => unreachable!("loops handled above"),
        };
        self.emit(header, EventBody::StmtEnd)?;
        Ok(flow)
    }

    fn iteration(
        &mut self,
        header: &SourceSpan,
        index: u64,
        binding: Option<(&Target, Value)>,
        body: &[Stmt],
    ) -> Exec<Flow> {
        self.emit(header, EventBody::IterBegin { index })?;
        if let Some((target, item)) = binding {
            self.bind_target(target, item)?;
        }
        let flow = self.exec_block(body)?;
        self.emit(header, EventBody::IterEnd)?;
        Ok(flow)
    }

    fn bind_target(&mut self, target: &Target, value: Value) -> Exec<()> {
        match target {
            Target::Name(ident) => self.assign(ident, value),
            Target::Tuple { names, span } => {
                let items = match &value {
                    Value::List(l) => l.items.clone(),
                    Value::Tuple(t) => t.to_vec(),
                    other => {
                        return fail(format!("cannot unpack non-iterable {} object", other.type_name()), span);
                    }
                };
                if items.len() > names.len() {
                    return fail(format!("too many values to unpack (expected {})", names.len()), span);
                }
                if items.len() < names.len() {
                    return fail(
                        format!("not enough values to unpack (expected {}, got {})", names.len(), items.len()),
                        span,
                    );
                }
                names.iter().zip(items).try_for_each(|(ident, v)| self.assign(ident, v))
            }
        }
    }

    fn assign(&mut self, ident: &Ident, value: Value) -> Exec<()> {
        if &*ident.name != "_" {
            let snap = self.snap(&value);
            self.emit(
                &ident.span,
                EventBody::Bind {
                    var: ident.name.clone(),
                    value: snap,
                },
            )?;
        }
        self.scope().insert(ident.name.clone(), value);
        Ok(())
    }

    fn record(&mut self, expr: &Expr, value: &Value, builtin: Option<&'static str>) -> Exec<()> {
        let snap = self.snap(value);
        self.emit(
            &expr.span,
            EventBody::Eval {
                expr: expr.text.clone(),
                value: snap,
                builtin: builtin.map(Arc::from),
            },
        )
    }

    fn eval(&mut self, e: &Expr) -> Exec<Value> {
        let v = match &e.kind {
            ExprKind::Int(i) => return Ok(Value::Int(*i)),
            ExprKind::Float(f) => return Ok(Value::Float(*f)),
            ExprKind::Bool(b) => return Ok(Value::Bool(*b)),
            ExprKind::Str(s) => return Ok(Value::Str(Rc::from(&**s))),
            ExprKind::None => return Ok(Value::None),
            ExprKind::List(items) => {
                let values = self.eval_all(items)?;
                let v = self.oids.list(values);
                if e.is_literal() {
                    return Ok(v);
                }
                v
            }
            ExprKind::Tuple(items) => {
                let v = Value::Tuple(self.eval_all(items)?.into());
                if e.is_literal() {
                    return Ok(v);
                }
                v
            }
            ExprKind::Name(name) => self.lookup(name, &e.span)?,
            ExprKind::Unary { op, operand } => {
                let x = self.eval(operand)?;
                ops::unary(*op, &x).or_else(|m| fail(m, &e.span))?
            }
            ExprKind::BinOp { op, lhs, rhs } => {
                let l = self.eval(lhs)?;
                let r = self.eval(rhs)?;
                ops::binary(*op, &l, &r, &mut self.oids).or_else(|m| fail(m, &e.span))?
            }
            ExprKind::BoolOp { op, lhs, rhs } => {
                let l = self.eval(lhs)?;
                let short = match op {
                    crate::minilang::ast::BoolOp::And => !l.truthy(),
                    crate::minilang::ast::BoolOp::Or => l.truthy(),
                };
                if short {
                    l
                } else {
                    self.eval(rhs)?
                }
            }
            ExprKind::Compare { first, rest } => {
                let mut left = self.eval(first)?;
                let mut result = true;
                for (op, rhs) in rest {
                    let right = self.eval(rhs)?;
                    if !ops::compare(*op, &left, &right).or_else(|m| fail(m, &e.span))? {
                        result = false;
                        break;
                    }
                    left = right;
                }
                Value::Bool(result)
            }
            ExprKind::Index { target, index } => {
                let t = self.eval(target)?;
                let i = self.eval(index)?;
                ops::index(&t, &i).or_else(|m| fail(m, &e.span))?
            }
            ExprKind::Call { callee, args } => return self.eval_call(e, callee, args),
        };
        self.record(e, &v, None)?;
        Ok(v)
    }

    fn eval_all(&mut self, items: &[Expr]) -> Exec<Vec<Value>> {
        items.iter().map(|item| self.eval(item)).collect()
    }

    fn eval_call(&mut self, e: &Expr, callee: &Expr, args: &[Expr]) -> Exec<Value> {
        let func = match &callee.kind {
            ExprKind::Name(name) => self.lookup(name, &callee.span)?,
            _ => self.eval(callee)?,
        };
        let Value::Func(func) = func else {
            return fail(format!("'{}' object is not callable", func.type_name()), &e.span);
        };
        let values = self.eval_all(args)?;
        match func {
            Callable::User(def) => {
                let v = self.invoke(&def, values, &e.span, e.text.clone())?;
                self.record(e, &v, None)?;
                Ok(v)
            }
            Callable::Builtin("print") => {
                self.print(&values, &e.span)?;
                Ok(Value::None)
            }
            Callable::Builtin(name) => {
                let v = self.builtin(name, values).or_else(|m| fail(m, &e.span))?;
                self.record(e, &v, Some(name))?;
                Ok(v)
            }
        }
    }

    fn print(&mut self, values: &[Value], span: &SourceSpan) -> Exec<()> {
        let mut text = values.iter().map(Value::to_display).collect::<Vec<_>>().join(" ");
        let room = self.limits.max_output_bytes.saturating_sub(self.output_bytes);
        if text.len() > room {
            let mut cut = room;
            while !text.is_char_boundary(cut) {
                cut -= 1;
            }
            text.truncate(cut);
            text.push('…');
        }
        self.output_bytes += text.len().min(room);
        self.emit(span, EventBody::Output { text: Arc::from(text) })
    }

    fn builtin(&mut self, name: &str, args: Vec<Value>) -> Result<Value, String> {
        match name {
            "len" => {
                let [v] = exactly::<1>(name, args)?;
                let n = match &v {
                    Value::List(l) => l.items.len(),
                    Value::Tuple(t) => t.len(),
                    Value::Str(s) => s.chars().count(),
                    other => return Err(format!("object of type '{}' has no len()", other.type_name())),
                };
                Ok(Value::Int(n as i64))
            }
            "sum" => {
                if args.is_empty() || args.len() > 2 {
                    return Err(format!("sum() takes 1 or 2 arguments ({} given)", args.len()));
                }
                let mut args = args.into_iter();
                let items = ops::iterate(&args.next().expect("checked length"))?;
                let mut acc = args.next().unwrap_or(Value::Int(0));
                for item in &items {
                    acc = ops::binary(crate::minilang::ast::BinOp::Add, &acc, item, &mut self.oids)?;
                }
                Ok(acc)
            }
            "range" => {
                let ints = args
                    .iter()
                    .map(|v| match v {
                        Value::Int(i) => Ok(*i),
                        Value::Bool(b) => Ok(i64::from(*b)),
                        other => Err(format!("'{}' object cannot be interpreted as an integer", other.type_name())),
                    })
                    .collect::<Result<Vec<i64>, String>>()?;
                let (start, stop, step) = match ints[..] {
                    [stop] => (0, stop, 1),
                    [start, stop] => (start, stop, 1),
                    [start, stop, step] => (start, stop, step),
                    _ => return Err(format!("range() takes 1 to 3 arguments ({} given)", ints.len())),
                };
                if step == 0 {
                    return Err("range() arg 3 must not be zero".into());
                }
                let span = if step > 0 {
                    (stop as i128 - start as i128).max(0)
                } else {
                    (start as i128 - stop as i128).max(0)
                };
                let len = (span + step.unsigned_abs() as i128 - 1) / step.unsigned_abs() as i128;
                if len > MAX_BUILT_LEN as i128 {
                    return Err("range() result too large".into());
                }
                let items = (0..len as i64).map(|k| Value::Int(start + k * step)).collect();
                Ok(self.oids.list(items))
            }
            "read_from_file" => {
                let [] = exactly::<0>(name, args)?;
                let data = self.data.ok_or("read_from_file() has no data file configured")?;
                let items = data.iter().map(|i| Value::Int(*i)).collect();
                Ok(self.oids.list(items))
            }
            other => unreachable!("unknown builtin {other}"),
        }
    }
}

fn exactly<const N: usize>(name: &str, args: Vec<Value>) -> Result<[Value; N], String> {
    let given = args.len();
    args.try_into().map_err(|_| {
        format!(
            "{name}() takes exactly {N} argument{} ({given} given)",
            if N == 1 { "" } else { "s" }
        )
    })
}
