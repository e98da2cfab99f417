//! Per-task symbol templates and per-demonstration bindings.
//!
//! A [`WorkspaceTemplate`] lists the symbol keys a task exposes: the eight
//! constants that are always present, one key per color occurring anywhere
//! in the task, and `Scene`. A [`Workspace`] instantiates the template for
//! one demonstration input.

use std::collections::BTreeSet;

use crate::grid::{Color, Raster};
use crate::task::Task;
use crate::types::{self, TypeExpr};
use crate::value::{Connectivity, Direction, Orientation, Value};

/// Every symbol key the language knows.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SymbolName {
    Zero,
    One,
    Horizontal,
    Vertical,
    N4,
    N8,
    Cw,
    Ccw,
    Color(Color),
    Scene,
    FunctionalInput,
}

/// Availability class of a symbol.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SymbolScope {
    /// Always present.
    Constant,
    /// Present iff the color appears somewhere in the task.
    TaskConditional,
    /// Bound separately for each demonstration.
    PerDemonstration,
    /// Exists only inside a higher-order subprogram; never stored.
    Functional,
}

impl SymbolName {
    pub const CONSTANTS: [SymbolName; 8] = [
        SymbolName::Zero,
        SymbolName::One,
        SymbolName::Horizontal,
        SymbolName::Vertical,
        SymbolName::N4,
        SymbolName::N8,
        SymbolName::Cw,
        SymbolName::Ccw,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SymbolName::Zero => "Zero",
            SymbolName::One => "One",
            SymbolName::Horizontal => "Horizontal",
            SymbolName::Vertical => "Vertical",
            SymbolName::N4 => "N4",
            SymbolName::N8 => "N8",
            SymbolName::Cw => "Cw",
            SymbolName::Ccw => "Ccw",
            SymbolName::Color(c) => c.name(),
            SymbolName::Scene => "Scene",
            SymbolName::FunctionalInput => "FunctionalInput",
        }
    }

    pub fn parse(s: &str) -> Option<SymbolName> {
        match s {
            "Zero" => Some(SymbolName::Zero),
            "One" => Some(SymbolName::One),
            "Horizontal" => Some(SymbolName::Horizontal),
            "Vertical" => Some(SymbolName::Vertical),
            "N4" => Some(SymbolName::N4),
            "N8" => Some(SymbolName::N8),
            "Cw" => Some(SymbolName::Cw),
            "Ccw" => Some(SymbolName::Ccw),
            "Scene" => Some(SymbolName::Scene),
            "FunctionalInput" => Some(SymbolName::FunctionalInput),
            other => Color::ALL
                .into_iter()
                .find(|c| c.name() == other)
                .map(SymbolName::Color),
        }
    }

    pub fn scope(self) -> SymbolScope {
        match self {
            SymbolName::Color(_) => SymbolScope::TaskConditional,
            SymbolName::Scene => SymbolScope::PerDemonstration,
            SymbolName::FunctionalInput => SymbolScope::Functional,
            _ => SymbolScope::Constant,
        }
    }

    /// Static type of the symbol. `FunctionalInput` has no fixed type; it
    /// takes the element type of the enclosing higher-order call.
    pub fn type_of(self) -> Option<TypeExpr> {
        match self {
            SymbolName::Zero | SymbolName::One => Some(types::INT),
            SymbolName::Horizontal | SymbolName::Vertical => Some(types::ORIENTATION),
            SymbolName::N4 | SymbolName::N8 => Some(types::CONNECTIVITY),
            SymbolName::Cw | SymbolName::Ccw => Some(types::DIRECTION),
            SymbolName::Color(_) => Some(types::COLOR),
            SymbolName::Scene => Some(types::REGION),
            SymbolName::FunctionalInput => None,
        }
    }

    /// Fixed value of a constant or color key.
    fn constant_value(self) -> Option<Value> {
        match self {
            SymbolName::Zero => Some(Value::Int(0)),
            SymbolName::One => Some(Value::Int(1)),
            SymbolName::Horizontal => Some(Value::Orientation(Orientation::Horizontal)),
            SymbolName::Vertical => Some(Value::Orientation(Orientation::Vertical)),
            SymbolName::N4 => Some(Value::Connectivity(Connectivity::N4)),
            SymbolName::N8 => Some(Value::Connectivity(Connectivity::N8)),
            SymbolName::Cw => Some(Value::Direction(Direction::Cw)),
            SymbolName::Ccw => Some(Value::Direction(Direction::Ccw)),
            SymbolName::Color(c) => Some(Value::Color(c)),
            SymbolName::Scene | SymbolName::FunctionalInput => None,
        }
    }
}

impl std::fmt::Display for SymbolName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Ordered key set valid across all demonstrations of one task.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WorkspaceTemplate {
    keys: Vec<SymbolName>,
}

impl WorkspaceTemplate {
    /// Template for a task: the constants, one key per color occurring in
    /// any of the task's rasters (inputs, outputs, and test inputs), and
    /// `Scene`.
    pub fn for_task(task: &Task) -> WorkspaceTemplate {
        let mut colors: BTreeSet<Color> = BTreeSet::new();
        let mut scan = |r: &Raster| colors.extend(r.cells().iter().copied());
        for demo in &task.demonstrations {
            scan(&demo.input);
            scan(&demo.output);
        }
        for test in &task.tests {
            scan(&test.input);
            if let Some(out) = &test.output {
                scan(out);
            }
        }
        WorkspaceTemplate::with_colors(&colors)
    }

    /// Template exposing all ten color keys; used when no task is at hand.
    pub fn maximal() -> WorkspaceTemplate {
        WorkspaceTemplate::with_colors(&Color::ALL.into_iter().collect())
    }

    fn with_colors(colors: &BTreeSet<Color>) -> WorkspaceTemplate {
        let mut keys: Vec<SymbolName> = SymbolName::CONSTANTS.to_vec();
        keys.extend(colors.iter().map(|c| SymbolName::Color(*c)));
        keys.push(SymbolName::Scene);
        WorkspaceTemplate { keys }
    }

    pub fn keys(&self) -> &[SymbolName] {
        &self.keys
    }

    pub fn contains(&self, key: SymbolName) -> bool {
        self.keys.contains(&key)
    }

    /// Keys with their types, in template order; the shape consumed by
    /// candidate selection.
    pub fn symbol_types(&self) -> Vec<(SymbolName, TypeExpr)> {
        self.keys
            .iter()
            .map(|k| (*k, k.type_of().expect("template keys are typed")))
            .collect()
    }

    /// Binds the template for one demonstration input: constants to their
    /// fixed values and `Scene` to the input raster's region form.
    pub fn instantiate(&self, input: &Raster) -> Workspace {
        let bindings = self
            .keys
            .iter()
            .map(|k| {
                let v = match k {
                    SymbolName::Scene => Value::Region(input.to_region()),
                    other => other.constant_value().expect("non-scene keys are constant"),
                };
                (*k, v)
            })
            .collect();
        Workspace { bindings }
    }
}

/// Concrete bindings for one demonstration.
#[derive(Clone, Debug)]
pub struct Workspace {
    bindings: Vec<(SymbolName, Value)>,
}

impl Workspace {
    pub fn lookup(&self, key: SymbolName) -> Option<&Value> {
        self.bindings
            .iter()
            .find(|(k, _)| *k == key)
            .map(|(_, v)| v)
    }

    pub fn keys(&self) -> impl Iterator<Item = SymbolName> + '_ {
        self.bindings.iter().map(|(k, _)| *k)
    }
}
