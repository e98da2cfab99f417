//! Runtime values of the DSL. All values are immutable.

use std::fmt;

use crate::grid::{Color, Loc, Region};
use crate::types::{self, Concrete, TypeExpr};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Connectivity {
    N4,
    N8,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Direction {
    Cw,
    Ccw,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Orientation {
    Horizontal,
    Vertical,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Value {
    Int(i64),
    Bool(bool),
    Color(Color),
    Loc(Loc),
    Connectivity(Connectivity),
    Direction(Direction),
    Orientation(Orientation),
    Region(Region),
    /// Homogeneous list; `elem` records the element type so empty lists
    /// stay typed.
    List { elem: TypeExpr, items: Vec<Value> },
    Pair(Box<Value>, Box<Value>),
}

impl Value {
    pub fn list(elem: TypeExpr, items: Vec<Value>) -> Value {
        Value::List { elem, items }
    }

    pub fn pair(a: Value, b: Value) -> Value {
        Value::Pair(Box::new(a), Box::new(b))
    }

    pub fn type_of(&self) -> TypeExpr {
        match self {
            Value::Int(_) => types::INT,
            Value::Bool(_) => types::BOOL,
            Value::Color(_) => types::COLOR,
            Value::Loc(_) => types::LOC,
            Value::Connectivity(_) => types::CONNECTIVITY,
            Value::Direction(_) => types::DIRECTION,
            Value::Orientation(_) => types::ORIENTATION,
            Value::Region(_) => types::REGION,
            Value::List { elem, .. } => types::list(elem.clone()),
            Value::Pair(a, b) => types::pair(a.type_of(), b.type_of()),
        }
    }

    pub fn type_name(&self) -> String {
        self.type_of().canon_string()
    }

    pub fn as_region(&self) -> Option<&Region> {
        match self {
            Value::Region(r) => Some(r),
            _ => None,
        }
    }

    pub fn as_int(&self) -> Option<i64> {
        match self {
            Value::Int(n) => Some(*n),
            _ => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(n) => write!(f, "{n}"),
            Value::Bool(b) => write!(f, "{b}"),
            Value::Color(c) => write!(f, "{c}"),
            Value::Loc(l) => write!(f, "{l}"),
            Value::Connectivity(Connectivity::N4) => f.write_str("N4"),
            Value::Connectivity(Connectivity::N8) => f.write_str("N8"),
            Value::Direction(Direction::Cw) => f.write_str("Cw"),
            Value::Direction(Direction::Ccw) => f.write_str("Ccw"),
            Value::Orientation(Orientation::Horizontal) => f.write_str("Horizontal"),
            Value::Orientation(Orientation::Vertical) => f.write_str("Vertical"),
            Value::Region(r) => write!(f, "Region({} px)", r.len()),
            Value::List { items, .. } => {
                f.write_str("[")?;
                for (i, v) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{v}")?;
                }
                f.write_str("]")
            }
            Value::Pair(a, b) => write!(f, "({a}, {b})"),
        }
    }
}

/// The dynamic type of a value always matches one of the concrete DSL
/// types; used by the debug-mode soundness check in the evaluator.
pub fn concrete_of(value: &Value) -> Option<Concrete> {
    match value {
        Value::Int(_) => Some(Concrete::Int),
        Value::Bool(_) => Some(Concrete::Bool),
        Value::Color(_) => Some(Concrete::Color),
        Value::Loc(_) => Some(Concrete::Loc),
        Value::Connectivity(_) => Some(Concrete::Connectivity),
        Value::Direction(_) => Some(Concrete::Direction),
        Value::Orientation(_) => Some(Concrete::Orientation),
        Value::Region(_) => Some(Concrete::Region),
        _ => None,
    }
}
