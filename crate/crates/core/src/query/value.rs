use std::cmp::Ordering;

use crate::scene_graph::{EdgeId, NodeId, Point3, PropValue};

/// Runtime value of a query expression.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Null,
    Bool(bool),
    Int(i64),
    Float(f64),
    Str(String),
    Point(Point3),
    List(Vec<Value>),
    Node(NodeId),
    Edge(EdgeId),
}

impl Value {
    pub fn type_name(&self) -> &'static str {
        match self {
            Value::Null => "null",
            Value::Bool(_) => "boolean",
            Value::Int(_) => "integer",
            Value::Float(_) => "float",
            Value::Str(_) => "string",
            Value::Point(_) => "point",
            Value::List(_) => "list",
            Value::Node(_) => "node",
            Value::Edge(_) => "relationship",
        }
    }

    pub fn is_null(&self) -> bool {
        matches!(self, Value::Null)
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Int(i) => Some(*i as f64),
            Value::Float(x) => Some(*x),
            _ => None,
        }
    }

    /// Rank of the value kind in ORDER BY; nulls sort last ascending.
    fn kind_rank(&self) -> u8 {
        match self {
            Value::Node(_) => 0,
            Value::Edge(_) => 1,
            Value::List(_) => 2,
            Value::Str(_) => 3,
            Value::Bool(_) => 4,
            Value::Int(_) | Value::Float(_) => 5,
            Value::Point(_) => 6,
            Value::Null => 7,
        }
    }

    /// Total order used for sorting and min/max.
    pub fn sort_cmp(&self, other: &Value) -> Ordering {
        let rank = self.kind_rank().cmp(&other.kind_rank());
        if rank != Ordering::Equal {
            return rank;
        }
        match (self, other) {
            (Value::Node(a), Value::Node(b)) => a.cmp(b),
            (Value::Edge(a), Value::Edge(b)) => a.cmp(b),
            (Value::List(a), Value::List(b)) => {
                for (x, y) in a.iter().zip(b) {
                    let c = x.sort_cmp(y);
                    if c != Ordering::Equal {
                        return c;
                    }
                }
                a.len().cmp(&b.len())
            }
            (Value::Str(a), Value::Str(b)) => a.cmp(b),
            (Value::Bool(a), Value::Bool(b)) => a.cmp(b),
            (Value::Int(a), Value::Int(b)) => a.cmp(b),
            (Value::Point(a), Value::Point(b)) => a
                .coords()
                .iter()
                .zip(b.coords().iter())
                .map(|(x, y)| x.total_cmp(y))
                .find(|c| *c != Ordering::Equal)
                .unwrap_or(Ordering::Equal),
            (a, b) => match (a.as_f64(), b.as_f64()) {
                (Some(x), Some(y)) => x.partial_cmp(&y).unwrap_or_else(|| x.is_nan().cmp(&y.is_nan())),
                _ => Ordering::Equal,
            },
        }
    }

    /// Equality as seen by `=`: `None` when either side is null.
    pub fn equals(&self, other: &Value) -> Option<bool> {
        match (self, other) {
            (Value::Null, _) | (_, Value::Null) => None,
            (Value::List(a), Value::List(b)) => {
                if a.len() != b.len() {
                    return Some(false);
                }
                let mut unknown = false;
                for (x, y) in a.iter().zip(b) {
                    match x.equals(y) {
                        Some(false) => return Some(false),
                        None => unknown = true,
                        Some(true) => {}
                    }
                }
                if unknown {
                    None
                } else {
                    Some(true)
                }
            }
            (a, b) => match (a.as_f64(), b.as_f64()) {
                (Some(x), Some(y)) => Some(x == y),
                _ => Some(a == b),
            },
        }
    }

    /// Hashable identity used for grouping and DISTINCT.
    pub fn key(&self) -> ValueKey {
        match self {
            Value::Null => ValueKey::Null,
            Value::Bool(b) => ValueKey::Bool(*b),
            Value::Int(i) => ValueKey::Int(*i),
            Value::Float(x) => {
                if x.fract() == 0.0 && x.abs() < 9.0e15 {
                    ValueKey::Int(*x as i64)
                } else if x.is_nan() {
                    ValueKey::Float(f64::NAN.to_bits())
                } else {
                    ValueKey::Float(x.to_bits())
                }
            }
            Value::Str(s) => ValueKey::Str(s.clone()),
            Value::Point(p) => ValueKey::Point(p.coords().map(|c| (c + 0.0).to_bits())),
            Value::List(items) => ValueKey::List(items.iter().map(Value::key).collect()),
            Value::Node(n) => ValueKey::Node(*n),
            Value::Edge(e) => ValueKey::Edge(*e),
        }
    }

    pub(crate) fn from_prop(p: &PropValue) -> Value {
        match p {
            PropValue::Bool(b) => Value::Bool(*b),
            PropValue::Int(i) => Value::Int(*i),
            PropValue::Float(x) => Value::Float(*x),
            PropValue::Str(s) => Value::Str(s.clone()),
            PropValue::Point(p) => Value::Point(*p),
            PropValue::List(items) => Value::List(items.iter().map(Value::from_prop).collect()),
        }
    }

    /// Conversion for storage as a node property; `Ok(None)` for null.
    pub(crate) fn to_prop(&self) -> Result<Option<PropValue>, &'static str> {
        Ok(Some(match self {
            Value::Null => return Ok(None),
            Value::Bool(b) => PropValue::Bool(*b),
            Value::Int(i) => PropValue::Int(*i),
            Value::Float(x) => PropValue::Float(*x),
            Value::Str(s) => PropValue::Str(s.clone()),
            Value::Point(p) => PropValue::Point(*p),
            Value::List(items) => {
                let mut out = Vec::with_capacity(items.len());
                for i in items {
                    out.push(i.to_prop()?.ok_or("null list element")?);
                }
                PropValue::List(out)
            }
            Value::Node(_) | Value::Edge(_) => return Err("graph element"),
        }))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ValueKey {
    Null,
    Bool(bool),
    Int(i64),
    Float(u64),
    Str(String),
    Point([u64; 3]),
    List(Vec<ValueKey>),
    Node(NodeId),
    Edge(EdgeId),
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numeric_equality_crosses_int_and_float() {
        assert_eq!(Value::Int(2).equals(&Value::Float(2.0)), Some(true));
        assert_eq!(Value::Int(2).key(), Value::Float(2.0).key());
        assert_eq!(Value::Null.equals(&Value::Null), None);
        assert_eq!(Value::Str("a".into()).equals(&Value::Int(1)), Some(false));
    }

    #[test]
    fn nulls_sort_last() {
        let mut v = vec![Value::Null, Value::Int(3), Value::Float(1.5), Value::Str("z".into())];
        v.sort_by(|a, b| a.sort_cmp(b));
        assert_eq!(
            v,
            vec![Value::Str("z".into()), Value::Float(1.5), Value::Int(3), Value::Null]
        );
    }
}
