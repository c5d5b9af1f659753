//! Runtime values of the interpreter and their recorded snapshots.

use std::fmt::{self, Write as _};
use std::rc::Rc;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::ExecutionLimits;
use crate::minilang::ast::FunctionDef;

/// A live value. Lists carry an object id assigned when they are created.
#[derive(Clone, Debug)]
pub enum Value {
    Int(i64),
    Float(f64),
    Bool(bool),
    Str(Rc<str>),
    None,
    List(Rc<ListObject>),
    Tuple(Rc<[Value]>),
    Func(Callable),
}

#[derive(Debug)]
pub struct ListObject {
    pub oid: u64,
    pub items: Vec<Value>,
}

#[derive(Clone, Debug)]
pub enum Callable {
    User(Arc<FunctionDef>),
    Builtin(&'static str),
}

impl Callable {
    pub fn name(&self) -> &str {
        match self {
            Callable::User(def) => &def.name,
            Callable::Builtin(name) => name,
        }
    }
}

impl Value {
    pub fn type_name(&self) -> &'static str {
        match self {
            Value::Int(_) => "int",
            Value::Float(_) => "float",
            Value::Bool(_) => "bool",
            Value::Str(_) => "str",
            Value::None => "NoneType",
            Value::List(_) => "list",
            Value::Tuple(_) => "tuple",
            Value::Func(_) => "function",
        }
    }

    pub fn truthy(&self) -> bool {
        match self {
            Value::Int(v) => *v != 0,
            Value::Float(v) => *v != 0.0,
            Value::Bool(b) => *b,
            Value::Str(s) => !s.is_empty(),
            Value::None => false,
            Value::List(l) => !l.items.is_empty(),
            Value::Tuple(t) => !t.is_empty(),
            Value::Func(_) => true,
        }
    }

    /// `print`-style formatting: strings bare, everything else as `repr`.
    pub fn to_display(&self) -> String {
        match self {
            Value::Str(s) => s.to_string(),
            other => {
                let mut out = String::new();
                other.write_repr(&mut out);
                out
            }
        }
    }

    fn write_repr(&self, out: &mut String) {
        match self {
            Value::Int(v) => {
                let _ = write!(out, "{v}");
            }
            Value::Float(v) => out.push_str(&format_float(*v)),
            Value::Bool(b) => out.push_str(if *b { "True" } else { "False" }),
            Value::Str(s) => write_str_repr(s, out),
            Value::None => out.push_str("None"),
            Value::List(l) => {
                out.push('[');
                for (i, item) in l.items.iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    item.write_repr(out);
                }
                out.push(']');
            }
            Value::Tuple(items) => {
                out.push('(');
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    item.write_repr(out);
                }
                if items.len() == 1 {
                    out.push(',');
                }
                out.push(')');
            }
            Value::Func(f) => {
                let _ = write!(out, "<function {}>", f.name());
            }
        }
    }
}

/// Python-style `repr` of a float: shortest round-trip digits, always with a
/// decimal point or exponent.
pub fn format_float(v: f64) -> String {
    if v.is_nan() {
        return "nan".to_string();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf" } else { "-inf" }.to_string();
    }
    let abs = v.abs();
    if abs != 0.0 && !(1e-4..1e16).contains(&abs) {
        let s = format!("{v:e}");
        let (mantissa, exp) = s.split_once('e').expect("exponent form");
        let exp: i32 = exp.parse().expect("integer exponent");
        let sign = if exp < 0 { '-' } else { '+' };
        return format!("{mantissa}e{sign}{:02}", exp.abs());
    }
    let s = format!("{v}");
    if s.contains('.') {
        s
    } else {
        s + ".0"
    }
}

pub(crate) fn write_str_repr(s: &str, out: &mut String) {
    out.push('\'');
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\'' => out.push_str("\\'"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out.push('\'');
}

/// Immutable deep copy of a value as it was at one instant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "k", rename_all = "lowercase")]
pub enum ValueSnapshot {
    Int {
        #[serde(rename = "v")]
        value: i64,
    },
    Float {
        #[serde(rename = "v", with = "float_repr")]
        value: f64,
    },
    Bool {
        #[serde(rename = "v")]
        value: bool,
    },
    Str {
        #[serde(rename = "v")]
        value: Arc<str>,
    },
    None,
    List {
        oid: u64,
        #[serde(rename = "e")]
        elems: Vec<ValueSnapshot>,
    },
    Tuple {
        #[serde(rename = "e")]
        elems: Vec<ValueSnapshot>,
    },
    Func {
        name: Arc<str>,
    },
    /// Stands in for content cut off by the depth or length caps.
    #[serde(rename = "trunc")]
    Truncated,
}

impl ValueSnapshot {
    pub fn int(value: i64) -> Self {
        ValueSnapshot::Int { value }
    }

    /// Calls `visit` with every list oid reachable from this snapshot.
    pub fn for_each_oid(&self, visit: &mut impl FnMut(u64)) {
        match self {
            ValueSnapshot::List { oid, elems } => {
                visit(*oid);
                elems.iter().for_each(|e| e.for_each_oid(visit));
            }
            ValueSnapshot::Tuple { elems } => elems.iter().for_each(|e| e.for_each_oid(visit)),
            _ => {}
        }
    }

    pub fn contains_oid(&self, target: u64) -> bool {
        let mut found = false;
        self.for_each_oid(&mut |oid| found |= oid == target);
        found
    }

    /// Nesting depth of containers; scalars have depth 0.
    pub fn depth(&self) -> usize {
        match self {
            ValueSnapshot::List { elems, .. } | ValueSnapshot::Tuple { elems } => {
                1 + elems.iter().map(ValueSnapshot::depth).max().unwrap_or(0)
            }
            _ => 0,
        }
    }
}

impl fmt::Display for ValueSnapshot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut out = String::new();
        write_snapshot(self, &mut out);
        f.write_str(&out)
    }
}

pub(crate) fn write_snapshot(snap: &ValueSnapshot, out: &mut String) {
    match snap {
        ValueSnapshot::Int { value } => {
            let _ = write!(out, "{value}");
        }
        ValueSnapshot::Float { value } => out.push_str(&format_float(*value)),
        ValueSnapshot::Bool { value } => out.push_str(if *value { "True" } else { "False" }),
        ValueSnapshot::Str { value } => write_str_repr(value, out),
        ValueSnapshot::None => out.push_str("None"),
        ValueSnapshot::List { elems, .. } => {
            out.push('[');
            write_elems(elems, out);
            out.push(']');
        }
        ValueSnapshot::Tuple { elems } => {
            out.push('(');
            write_elems(elems, out);
            if elems.len() == 1 {
                out.push(',');
            }
            out.push(')');
        }
        ValueSnapshot::Func { name } => {
            let _ = write!(out, "<function {name}>");
        }
        ValueSnapshot::Truncated => out.push('…'),
    }
}

pub(crate) fn write_elems(elems: &[ValueSnapshot], out: &mut String) {
    for (i, e) in elems.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        write_snapshot(e, out);
    }
}

/// Deep-copies `value`, replacing containers nested `max_snapshot_depth`
/// levels down with a truncation marker and keeping at most
/// `max_snapshot_elems` entries per container (the last one being the marker
/// when elements were dropped).
pub fn snapshot(value: &Value, limits: &ExecutionLimits) -> ValueSnapshot {
    snapshot_at(value, 0, limits)
}

fn snapshot_at(value: &Value, level: usize, limits: &ExecutionLimits) -> ValueSnapshot {
    match value {
        Value::Int(v) => ValueSnapshot::Int { value: *v },
        Value::Float(v) => ValueSnapshot::Float { value: *v },
        Value::Bool(v) => ValueSnapshot::Bool { value: *v },
        Value::Str(s) => ValueSnapshot::Str { value: Arc::from(&**s) },
        Value::None => ValueSnapshot::None,
        Value::Func(f) => ValueSnapshot::Func { name: Arc::from(f.name()) },
        Value::List(list) => {
            if level >= limits.max_snapshot_depth {
                return ValueSnapshot::Truncated;
            }
            ValueSnapshot::List {
                oid: list.oid,
                elems: snapshot_elems(&list.items, level + 1, limits),
            }
        }
        Value::Tuple(items) => {
            if level >= limits.max_snapshot_depth {
                return ValueSnapshot::Truncated;
            }
            ValueSnapshot::Tuple {
                elems: snapshot_elems(items, level + 1, limits),
            }
        }
    }
}

fn snapshot_elems(items: &[Value], level: usize, limits: &ExecutionLimits) -> Vec<ValueSnapshot> {
    let cap = limits.max_snapshot_elems;
    if items.len() <= cap {
        return items.iter().map(|v| snapshot_at(v, level, limits)).collect();
    }
    let mut elems: Vec<ValueSnapshot> = items[..cap - 1]
        .iter()
        .map(|v| snapshot_at(v, level, limits))
        .collect();
    elems.push(ValueSnapshot::Truncated);
    elems
}

mod float_repr {
    use serde::de::{self, Deserializer, Visitor};
    use serde::Serializer;
    use std::fmt;

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if v.is_nan() {
            s.serialize_str("nan")
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        struct FloatVisitor;
        impl Visitor<'_> for FloatVisitor {
            type Value = f64;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a number or one of \"inf\", \"-inf\", \"nan\"")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> Result<f64, E> {
                Ok(v)
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> Result<f64, E> {
                Ok(v as f64)
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> Result<f64, E> {
                Ok(v as f64)
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<f64, E> {
                match v {
                    "inf" => Ok(f64::INFINITY),
                    "-inf" => Ok(f64::NEG_INFINITY),
                    "nan" => Ok(f64::NAN),
                    other => Err(E::invalid_value(de::Unexpected::Str(other), &self)),
                }
            }
        }
        d.deserialize_any(FloatVisitor)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn list(oid: u64, items: Vec<Value>) -> Value {
        Value::List(Rc::new(ListObject { oid, items }))
    }

    #[test]
    fn int_snapshot() {
        let limits = ExecutionLimits::default();
        assert_eq!(snapshot(&Value::Int(10), &limits), ValueSnapshot::int(10));
    }

    #[test]
    fn list_snapshot_keeps_oid() {
        let limits = ExecutionLimits::default();
        let v = list(1, vec![Value::Int(2), Value::Int(3), Value::Int(5)]);
        assert_eq!(
            snapshot(&v, &limits),
            ValueSnapshot::List {
                oid: 1,
                elems: vec![ValueSnapshot::int(2), ValueSnapshot::int(3), ValueSnapshot::int(5)]
            }
        );
    }

    #[test]
    fn deep_nesting_is_truncated_at_the_cap() {
        let limits = ExecutionLimits::default();
        assert_eq!(limits.max_snapshot_depth, 8);
        let mut v = Value::Int(0);
        for oid in (1..=10).rev() {
            v = list(oid, vec![v]);
        }
        let snap = snapshot(&v, &limits);
        let mut level = 0;
        let mut cursor = &snap;
        while let ValueSnapshot::List { elems, oid } = cursor {
            assert_eq!(*oid, level as u64 + 1);
            cursor = &elems[0];
            level += 1;
        }
        assert_eq!(level, 8);
        assert_eq!(*cursor, ValueSnapshot::Truncated);
        assert_eq!(snap.depth(), 8);
    }

    #[test]
    fn long_lists_are_capped() {
        let limits = ExecutionLimits {
            max_snapshot_elems: 4,
            ..ExecutionLimits::default()
        };
        let v = list(7, (0..10).map(Value::Int).collect());
        let ValueSnapshot::List { elems, .. } = snapshot(&v, &limits) else { panic!() };
        assert_eq!(elems.len(), 4);
        assert_eq!(elems[3], ValueSnapshot::Truncated);
    }

    #[test]
    fn json_encoding() {
        let snap = ValueSnapshot::List {
            oid: 1,
            elems: vec![ValueSnapshot::int(10), ValueSnapshot::None, ValueSnapshot::Truncated],
        };
        assert_eq!(
            serde_json::to_string(&snap).unwrap(),
            r#"{"k":"list","oid":1,"e":[{"k":"int","v":10},{"k":"none"},{"k":"trunc"}]}"#
        );
        let inf = ValueSnapshot::Float { value: f64::INFINITY };
        let json = serde_json::to_string(&inf).unwrap();
        assert_eq!(json, r#"{"k":"float","v":"inf"}"#);
        assert_eq!(serde_json::from_str::<ValueSnapshot>(&json).unwrap(), inf);
    }

    #[test]
    fn python_style_repr() {
        assert_eq!(format_float(2.0), "2.0");
        assert_eq!(format_float(0.1), "0.1");
        assert_eq!(format_float(1e20), "1e+20");
        assert_eq!(format_float(1.5e-7), "1.5e-07");
        let t = ValueSnapshot::Tuple {
            elems: vec![ValueSnapshot::Str { value: "it's".into() }],
        };
        assert_eq!(t.to_string(), r"('it\'s',)");
    }
}
