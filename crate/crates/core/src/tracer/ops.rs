//! Operators of the language on runtime values. Errors are the messages of
//! the resulting runtime error.

use std::cmp::Ordering;
use std::rc::Rc;

use super::value::{Callable, ListObject, Value};
use crate::minilang::ast::{BinOp, CmpOp, UnaryOp};

/// Largest container a single operation may build.
pub(super) const MAX_BUILT_LEN: usize = 10_000_000;

/// Hands out list object ids in creation order, starting at 1.
#[derive(Debug)]
pub(super) struct Oids(u64);

impl Oids {
    pub(super) fn new() -> Self {
        Oids(0)
    }

    pub(super) fn list(&mut self, items: Vec<Value>) -> Value {
        self.0 += 1;
        Value::List(Rc::new(ListObject { oid: self.0, items }))
    }
}

#[derive(Clone, Copy)]
enum Num {
    I(i64),
    F(f64),
}

fn num(v: &Value) -> Option<Num> {
    match v {
        Value::Int(i) => Some(Num::I(*i)),
        Value::Bool(b) => Some(Num::I(i64::from(*b))),
        Value::Float(f) => Some(Num::F(*f)),
        _ => None,
    }
}

fn as_f64(n: Num) -> f64 {
    match n {
        Num::I(i) => i as f64,
        Num::F(f) => f,
    }
}

const OVERFLOW: &str = "integer overflow";
const DIV_ZERO: &str = "division by zero";

pub(super) fn binary(op: BinOp, l: &Value, r: &Value, oids: &mut Oids) -> Result<Value, String> {
    match (op, l, r) {
        (BinOp::Add, Value::Str(a), Value::Str(b)) => {
            return Ok(Value::Str(Rc::from(format!("{a}{b}"))));
        }
        (BinOp::Add, Value::List(a), Value::List(b)) => {
            let mut items = a.items.clone();
            items.extend(b.items.iter().cloned());
            return Ok(oids.list(items));
        }
        (BinOp::Add, Value::Tuple(a), Value::Tuple(b)) => {
            return Ok(Value::Tuple(a.iter().chain(b.iter()).cloned().collect()));
        }
        (BinOp::Mul, seq @ (Value::Str(_) | Value::List(_) | Value::Tuple(_)), Value::Int(_) | Value::Bool(_))
        | (BinOp::Mul, Value::Int(_) | Value::Bool(_), seq @ (Value::Str(_) | Value::List(_) | Value::Tuple(_))) => {
            let count = match (num(l), num(r)) {
                (Some(Num::I(n)), _) | (_, Some(Num::I(n))) => n.max(0) as usize,
                _ => unreachable!("one operand is an int"),
            };
            return repeat(seq, count, oids);
        }
        _ => {}
    }
    let (Some(a), Some(b)) = (num(l), num(r)) else {
        return Err(format!(
            "unsupported operand type(s) for {}: '{}' and '{}'",
            op.symbol(),
            l.type_name(),
            r.type_name()
        ));
    };
    match (a, b) {
        (Num::I(a), Num::I(b)) => int_arith(op, a, b),
        _ => Ok(Value::Float(float_arith(op, as_f64(a), as_f64(b))?)),
    }
}

fn repeat(seq: &Value, count: usize, oids: &mut Oids) -> Result<Value, String> {
    let len = match seq {
        Value::Str(s) => s.chars().count(),
        Value::List(l) => l.items.len(),
        Value::Tuple(t) => t.len(),
        _ => unreachable!("sequence operand"),
    };
    if len.saturating_mul(count) > MAX_BUILT_LEN {
        return Err("repetition result too large".into());
    }
    Ok(match seq {
        Value::Str(s) => Value::Str(Rc::from(s.repeat(count))),
        Value::List(l) => {
            let items = (0..count).flat_map(|_| l.items.iter().cloned()).collect();
            oids.list(items)
        }
        Value::Tuple(t) => Value::Tuple((0..count).flat_map(|_| t.iter().cloned()).collect()),
        _ => unreachable!("sequence operand"),
    })
}

fn int_arith(op: BinOp, a: i64, b: i64) -> Result<Value, String> {
    let checked = |r: Option<i64>| r.map(Value::Int).ok_or_else(|| OVERFLOW.to_string());
    match op {
        BinOp::Add => checked(a.checked_add(b)),
        BinOp::Sub => checked(a.checked_sub(b)),
        BinOp::Mul => checked(a.checked_mul(b)),
        BinOp::Div => {
            if b == 0 {
                Err(DIV_ZERO.into())
            } else {
                Ok(Value::Float(a as f64 / b as f64))
            }
        }
        BinOp::FloorDiv => {
            if b == 0 {
                return Err(DIV_ZERO.into());
            }
            let q = a.checked_div(b).ok_or_else(|| OVERFLOW.to_string())?;
            let adjust = a % b != 0 && ((a < 0) != (b < 0));
            Ok(Value::Int(if adjust { q - 1 } else { q }))
        }
        BinOp::Mod => {
            if b == 0 {
                return Err(DIV_ZERO.into());
            }
            let r = a.wrapping_rem(b);
            Ok(Value::Int(if r != 0 && ((r < 0) != (b < 0)) { r + b } else { r }))
        }
    }
}

fn float_arith(op: BinOp, a: f64, b: f64) -> Result<f64, String> {
    match op {
        BinOp::Add => Ok(a + b),
        BinOp::Sub => Ok(a - b),
        BinOp::Mul => Ok(a * b),
        BinOp::Div | BinOp::FloorDiv | BinOp::Mod if b == 0.0 => Err(DIV_ZERO.into()),
        BinOp::Div => Ok(a / b),
        BinOp::FloorDiv => Ok((a / b).floor()),
        BinOp::Mod => {
            let r = a % b;
            Ok(if r != 0.0 && ((r < 0.0) != (b < 0.0)) { r + b } else { r })
        }
    }
}

pub(super) fn unary(op: UnaryOp, v: &Value) -> Result<Value, String> {
    match (op, num(v)) {
        (UnaryOp::Not, _) => Ok(Value::Bool(!v.truthy())),
        (UnaryOp::Neg, Some(Num::I(i))) => i.checked_neg().map(Value::Int).ok_or_else(|| OVERFLOW.into()),
        (UnaryOp::Neg, Some(Num::F(f))) => Ok(Value::Float(-f)),
        (UnaryOp::Pos, Some(Num::I(i))) => Ok(Value::Int(i)),
        (UnaryOp::Pos, Some(Num::F(f))) => Ok(Value::Float(f)),
        (UnaryOp::Neg | UnaryOp::Pos, None) => Err(format!(
            "bad operand type for unary {}: '{}'",
            if op == UnaryOp::Neg { "-" } else { "+" },
            v.type_name()
        )),
    }
}

pub(super) fn equal(l: &Value, r: &Value) -> bool {
    if let (Some(a), Some(b)) = (num(l), num(r)) {
        return match (a, b) {
            (Num::I(a), Num::I(b)) => a == b,
            _ => as_f64(a) == as_f64(b),
        };
    }
    match (l, r) {
        (Value::Str(a), Value::Str(b)) => a == b,
        (Value::None, Value::None) => true,
        (Value::List(a), Value::List(b)) => seq_equal(&a.items, &b.items),
        (Value::Tuple(a), Value::Tuple(b)) => seq_equal(a, b),
        (Value::Func(Callable::User(a)), Value::Func(Callable::User(b))) => std::sync::Arc::ptr_eq(a, b),
        (Value::Func(Callable::Builtin(a)), Value::Func(Callable::Builtin(b))) => a == b,
        _ => false,
    }
}

fn seq_equal(a: &[Value], b: &[Value]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| equal(x, y))
}

/// `Ok(None)` means the operands are unordered (a NaN is involved).
fn order(l: &Value, r: &Value) -> Result<Option<Ordering>, ()> {
    if let (Some(a), Some(b)) = (num(l), num(r)) {
        return Ok(match (a, b) {
            (Num::I(a), Num::I(b)) => Some(a.cmp(&b)),
            _ => as_f64(a).partial_cmp(&as_f64(b)),
        });
    }
    match (l, r) {
        (Value::Str(a), Value::Str(b)) => Ok(Some(a.cmp(b))),
        (Value::List(a), Value::List(b)) => seq_order(&a.items, &b.items),
        (Value::Tuple(a), Value::Tuple(b)) => seq_order(a, b),
        _ => Err(()),
    }
}

fn seq_order(a: &[Value], b: &[Value]) -> Result<Option<Ordering>, ()> {
    for (x, y) in a.iter().zip(b) {
        if !equal(x, y) {
            return order(x, y);
        }
    }
    Ok(Some(a.len().cmp(&b.len())))
}

pub(super) fn compare(op: CmpOp, l: &Value, r: &Value) -> Result<bool, String> {
    let symbol = match op {
        CmpOp::Eq => return Ok(equal(l, r)),
        CmpOp::Ne => return Ok(!equal(l, r)),
        CmpOp::Lt => "<",
        CmpOp::Le => "<=",
        CmpOp::Gt => ">",
        CmpOp::Ge => ">=",
    };
    let ord = order(l, r).map_err(|()| {
        format!(
            "'{symbol}' not supported between instances of '{}' and '{}'",
            l.type_name(),
            r.type_name()
        )
    })?;
    Ok(match ord {
        None => false,
        Some(o) => match op {
            CmpOp::Lt => o.is_lt(),
            CmpOp::Le => o.is_le(),
            CmpOp::Gt => o.is_gt(),
            CmpOp::Ge => o.is_ge(),
            CmpOp::Eq | CmpOp::Ne => unreachable!("handled above"),
        },
    })
}

pub(super) fn index(target: &Value, index: &Value) -> Result<Value, String> {
    let kind = match target {
        Value::List(_) => "list",
        Value::Tuple(_) => "tuple",
        Value::Str(_) => "string",
        other => return Err(format!("'{}' object is not subscriptable", other.type_name())),
    };
    let i = match index {
        Value::Int(i) => *i,
        Value::Bool(b) => i64::from(*b),
        other => {
            return Err(format!("{kind} indices must be integers, not {}", other.type_name()));
        }
    };
    let resolve = |len: usize| -> Result<usize, String> {
        let len = len as i64;
        let j = if i < 0 { i + len } else { i };
        if (0..len).contains(&j) {
            Ok(j as usize)
        } else {
            Err(format!("{kind} index out of range"))
        }
    };
    Ok(match target {
        Value::List(l) => l.items[resolve(l.items.len())?].clone(),
        Value::Tuple(t) => t[resolve(t.len())?].clone(),
        Value::Str(s) => {
            let chars: Vec<char> = s.chars().collect();
            Value::Str(Rc::from(chars[resolve(chars.len())?].to_string()))
        }
        _ => unreachable!("checked above"),
    })
}

/// Elements visited by `for` over `v`.
pub(super) fn iterate(v: &Value) -> Result<Vec<Value>, String> {
    match v {
        Value::List(l) => Ok(l.items.clone()),
        Value::Tuple(t) => Ok(t.to_vec()),
        Value::Str(s) => Ok(s.chars().map(|c| Value::Str(Rc::from(c.to_string()))).collect()),
        other => Err(format!("'{}' object is not iterable", other.type_name())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn int(v: i64) -> Value {
        Value::Int(v)
    }

    fn eval(op: BinOp, a: i64, b: i64) -> Result<i64, String> {
        match binary(op, &int(a), &int(b), &mut Oids::new())? {
            Value::Int(v) => Ok(v),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn floor_semantics() {
        assert_eq!(eval(BinOp::FloorDiv, 7, 2), Ok(3));
        assert_eq!(eval(BinOp::FloorDiv, -7, 2), Ok(-4));
        assert_eq!(eval(BinOp::FloorDiv, 7, -2), Ok(-4));
        assert_eq!(eval(BinOp::Mod, -7, 2), Ok(1));
        assert_eq!(eval(BinOp::Mod, 7, -2), Ok(-1));
        assert_eq!(eval(BinOp::Mod, i64::MIN, -1), Ok(0));
    }

    #[test]
    fn arithmetic_errors() {
        assert_eq!(eval(BinOp::Mod, 1, 0), Err(DIV_ZERO.into()));
        assert_eq!(eval(BinOp::Add, i64::MAX, 1), Err(OVERFLOW.into()));
        assert_eq!(eval(BinOp::FloorDiv, i64::MIN, -1), Err(OVERFLOW.into()));
        let err = binary(BinOp::Div, &int(1), &int(0), &mut Oids::new()).unwrap_err();
        assert_eq!(err, "division by zero");
        let err = binary(BinOp::Add, &int(1), &Value::None, &mut Oids::new()).unwrap_err();
        assert_eq!(err, "unsupported operand type(s) for +: 'int' and 'NoneType'");
    }

    #[test]
    fn true_division_is_float() {
        let v = binary(BinOp::Div, &int(1), &int(2), &mut Oids::new()).unwrap();
        assert!(matches!(v, Value::Float(f) if f == 0.5));
    }

    #[test]
    fn comparisons() {
        assert_eq!(compare(CmpOp::Lt, &int(1), &Value::Float(1.5)), Ok(true));
        assert_eq!(compare(CmpOp::Eq, &int(2), &Value::Float(2.0)), Ok(true));
        assert_eq!(compare(CmpOp::Lt, &Value::Float(f64::NAN), &int(1)), Ok(false));
        assert!(compare(CmpOp::Lt, &int(1), &Value::None).is_err());
    }

    #[test]
    fn indexing() {
        let mut oids = Oids::new();
        let list = oids.list(vec![int(1), int(2)]);
        assert!(matches!(index(&list, &int(-1)), Ok(Value::Int(2))));
        assert_eq!(index(&list, &int(2)).unwrap_err(), "list index out of range");
    }

    #[test]
    fn oids_count_from_one() {
        let mut oids = Oids::new();
        let Value::List(a) = oids.list(vec![]) else { panic!() };
        let Value::List(b) = oids.list(vec![]) else { panic!() };
        assert_eq!((a.oid, b.oid), (1, 2));
    }
}
