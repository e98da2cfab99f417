//! Evaluator for typed expression trees and implementations of all forty
//! builtins.
//!
//! Evaluation is strict, deterministic, and total: every run yields either
//! a [`Value`] or one [`RuntimeError`]. A step budget bounds pathological
//! intermediate blowups (deeply scaled regions, huge rectangles) and turns
//! them into `DivergentValue` rather than unbounded work.

use std::fmt;

use thiserror::Error;

use crate::grid::{Color, GridError, Loc, Raster, Region};
use crate::program::{AstNode, Program};
use crate::types::{self, op, OpId, TypeExpr};
use crate::value::{Connectivity, Direction, Orientation, Value};
use crate::workspace::{SymbolName, Workspace, WorkspaceTemplate};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum RuntimeErrorKind {
    EmptyListAccess,
    EmptyRegion,
    OutOfCanvas,
    DivergentValue,
    ArityMismatch,
    UnboundSymbol,
}

impl fmt::Display for RuntimeErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            RuntimeErrorKind::EmptyListAccess => "EmptyListAccess",
            RuntimeErrorKind::EmptyRegion => "EmptyRegion",
            RuntimeErrorKind::OutOfCanvas => "OutOfCanvas",
            RuntimeErrorKind::DivergentValue => "DivergentValue",
            RuntimeErrorKind::ArityMismatch => "ArityMismatch",
            RuntimeErrorKind::UnboundSymbol => "UnboundSymbol",
        };
        f.write_str(s)
    }
}

/// Failure of one evaluation; `node` is the pre-order index of the node
/// that raised it.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("{kind} at node {node}: {message}")]
pub struct RuntimeError {
    pub kind: RuntimeErrorKind,
    pub message: String,
    pub node: u32,
}

/// Builtin-level failure, before the evaluator attaches a node index.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("{kind}: {message}")]
pub struct OpError {
    pub kind: RuntimeErrorKind,
    pub message: String,
}

fn op_err(kind: RuntimeErrorKind, message: impl Into<String>) -> OpError {
    OpError {
        kind,
        message: message.into(),
    }
}

/// Remaining primitive-step allowance for one evaluation.
#[derive(Clone, Copy, Debug)]
pub struct StepBudget {
    remaining: u64,
}

impl StepBudget {
    pub fn new(limit: u64) -> StepBudget {
        StepBudget { remaining: limit }
    }

    pub fn charge(&mut self, steps: u64) -> Result<(), OpError> {
        if steps > self.remaining {
            self.remaining = 0;
            return Err(op_err(
                RuntimeErrorKind::DivergentValue,
                "step budget exhausted",
            ));
        }
        self.remaining -= steps;
        Ok(())
    }
}

#[derive(Clone, Copy, Debug)]
pub struct EvalOptions {
    pub step_budget: u64,
    /// Re-check every produced value against the node's resolved type.
    pub check_types: bool,
}

impl Default for EvalOptions {
    fn default() -> EvalOptions {
        EvalOptions {
            step_budget: 1_000_000,
            check_types: false,
        }
    }
}

struct EvalCtx<'a> {
    ws: &'a Workspace,
    functional: Vec<Value>,
    budget: StepBudget,
    check_types: bool,
}

/// Number of nodes in a subtree, subprogram bodies included; used to give
/// every node a stable pre-order index for error reporting.
fn subtree_size(node: &AstNode) -> u32 {
    match node {
        AstNode::Symbol { .. } => 1,
        AstNode::Subprogram { body, .. } => 1 + subtree_size(body),
        AstNode::Op { args, .. } => 1 + args.iter().map(subtree_size).sum::<u32>(),
    }
}

/// Evaluates a program against one demonstration workspace.
pub fn evaluate(p: &Program, ws: &Workspace, opts: &EvalOptions) -> Result<Value, RuntimeError> {
    evaluate_expr(p.root(), ws, opts)
}

/// Evaluates a bare expression tree; useful for fragments that do not
/// return Region.
pub fn evaluate_expr(
    node: &AstNode,
    ws: &Workspace,
    opts: &EvalOptions,
) -> Result<Value, RuntimeError> {
    let mut ctx = EvalCtx {
        ws,
        functional: Vec::new(),
        budget: StepBudget::new(opts.step_budget),
        check_types: opts.check_types,
    };
    eval(node, &mut ctx, 0)
}

/// Runs a top-level program as a raster transformation: binds `Scene` to
/// the input, evaluates, and rasterizes the resulting region.
pub fn apply_program_to_raster(
    p: &Program,
    input: &Raster,
    opts: &EvalOptions,
) -> Result<Raster, RuntimeError> {
    // Bind every color so any well-formed program can run; which colors a
    // program may mention was already decided at generation time.
    let ws = WorkspaceTemplate::maximal().instantiate(input);
    let value = evaluate(p, &ws, opts)?;
    let Value::Region(region) = value else {
        return Err(RuntimeError {
            kind: RuntimeErrorKind::ArityMismatch,
            message: format!("program produced {}, expected Region", value.type_name()),
            node: 0,
        });
    };
    region.to_raster().map_err(|e| RuntimeError {
        kind: match e {
            GridError::EmptyRegion => RuntimeErrorKind::EmptyRegion,
            _ => RuntimeErrorKind::OutOfCanvas,
        },
        message: e.to_string(),
        node: 0,
    })
}

fn eval(node: &AstNode, ctx: &mut EvalCtx, index: u32) -> Result<Value, RuntimeError> {
    let at = |e: OpError| RuntimeError {
        kind: e.kind,
        message: e.message,
        node: index,
    };
    ctx.budget.charge(1).map_err(at)?;

    let value = match node {
        AstNode::Symbol {
            key: SymbolName::FunctionalInput,
            ..
        } => ctx.functional.last().cloned().ok_or_else(|| RuntimeError {
            kind: RuntimeErrorKind::UnboundSymbol,
            message: "FunctionalInput outside a subprogram".into(),
            node: index,
        })?,
        AstNode::Symbol { key, .. } => ctx.ws.lookup(*key).cloned().ok_or_else(|| RuntimeError {
            kind: RuntimeErrorKind::UnboundSymbol,
            message: format!("symbol {key} not bound in workspace"),
            node: index,
        })?,
        AstNode::Subprogram { .. } => {
            return Err(RuntimeError {
                kind: RuntimeErrorKind::ArityMismatch,
                message: "subprogram outside a higher-order call".into(),
                node: index,
            })
        }
        AstNode::Op { id, args, ty } => {
            if op(*id).is_higher_order() {
                eval_higher_order(*id, args, ty, ctx, index)?
            } else {
                let mut values = Vec::with_capacity(args.len());
                let mut child_index = index + 1;
                for arg in args {
                    values.push(eval(arg, ctx, child_index)?);
                    child_index += subtree_size(arg);
                }
                apply_op(*id, values, &mut ctx.budget).map_err(at)?
            }
        }
    };

    if ctx.check_types {
        let expected = node.ty();
        let got = value.type_of();
        if !matches!(node, AstNode::Subprogram { .. }) && got != expected {
            return Err(RuntimeError {
                kind: RuntimeErrorKind::ArityMismatch,
                message: format!(
                    "dynamic type {} does not match resolved type {}",
                    got.canon_string(),
                    expected.canon_string()
                ),
                node: index,
            });
        }
    }
    Ok(value)
}

fn eval_higher_order(
    id: OpId,
    args: &[AstNode],
    node_ty: &TypeExpr,
    ctx: &mut EvalCtx,
    index: u32,
) -> Result<Value, RuntimeError> {
    let name = op(id).name;
    let here = |e: OpError| RuntimeError {
        kind: e.kind,
        message: e.message,
        node: index,
    };
    let list_index = index + 1;
    let list_value = eval(&args[0], ctx, list_index)?;
    let Value::List { elem, items } = list_value else {
        return Err(here(op_err(
            RuntimeErrorKind::ArityMismatch,
            format!("{name} expects a list argument"),
        )));
    };
    let AstNode::Subprogram { body, ret_ty, .. } = &args[1] else {
        return Err(here(op_err(
            RuntimeErrorKind::ArityMismatch,
            format!("{name} expects a subprogram argument"),
        )));
    };
    let body_index = list_index + subtree_size(&args[0]) + 1;
    ho_apply(
        name,
        elem,
        items,
        body,
        ret_ty,
        node_ty,
        ctx,
        index,
        body_index,
    )
}

/// Shared semantics of the higher-order family, applied to an already
/// evaluated element list.
#[allow(clippy::too_many_arguments)]
fn ho_apply(
    name: &str,
    elem: TypeExpr,
    items: Vec<Value>,
    body: &AstNode,
    ret_ty: &TypeExpr,
    node_ty: &TypeExpr,
    ctx: &mut EvalCtx,
    index: u32,
    body_index: u32,
) -> Result<Value, RuntimeError> {
    let here = |e: OpError| RuntimeError {
        kind: e.kind,
        message: e.message,
        node: index,
    };
    let mut run = |ctx: &mut EvalCtx, item: Value| -> Result<Value, RuntimeError> {
        ctx.functional.push(item);
        let out = eval(body, ctx, body_index);
        ctx.functional.pop();
        out
    };

    match name {
        "Map" => {
            let mut out = Vec::with_capacity(items.len());
            for item in items {
                out.push(run(ctx, item)?);
            }
            Ok(Value::list(ret_ty.clone(), out))
        }
        "Filter" => {
            let mut out = Vec::new();
            for item in items {
                match run(ctx, item.clone())? {
                    Value::Bool(true) => out.push(item),
                    Value::Bool(false) => {}
                    other => {
                        return Err(here(op_err(
                            RuntimeErrorKind::ArityMismatch,
                            format!("Filter subprogram produced {}", other.type_name()),
                        )))
                    }
                }
            }
            Ok(Value::list(elem, out))
        }
        "Sort" => {
            let mut keyed = Vec::with_capacity(items.len());
            for item in items {
                let key = match run(ctx, item.clone())? {
                    Value::Int(k) => k,
                    other => {
                        return Err(here(op_err(
                            RuntimeErrorKind::ArityMismatch,
                            format!("Sort key produced {}", other.type_name()),
                        )))
                    }
                };
                keyed.push((key, item));
            }
            // Stable: equal keys keep their input order.
            keyed.sort_by_key(|(k, _)| *k);
            Ok(Value::list(elem, keyed.into_iter().map(|(_, v)| v).collect()))
        }
        "GroupBy" => {
            let mut groups: Vec<(Value, Vec<Value>)> = Vec::new();
            for item in items {
                let key = run(ctx, item.clone())?;
                match groups.iter_mut().find(|(k, _)| *k == key) {
                    Some((_, members)) => members.push(item),
                    None => groups.push((key, vec![item])),
                }
            }
            let TypeExpr::List(group_ty) = node_ty else {
                return Err(here(op_err(
                    RuntimeErrorKind::ArityMismatch,
                    "GroupBy result type is not a list",
                )));
            };
            let out = groups
                .into_iter()
                .map(|(k, members)| Value::pair(k, Value::list(elem.clone(), members)))
                .collect();
            Ok(Value::list((**group_ty).clone(), out))
        }
        "MostCommon" => {
            if items.is_empty() {
                return Err(here(op_err(
                    RuntimeErrorKind::EmptyListAccess,
                    "MostCommon on an empty list",
                )));
            }
            // Counts per distinct key, first-occurrence order for ties.
            let mut counts: Vec<(Value, usize)> = Vec::new();
            for item in items {
                let key = run(ctx, item)?;
                match counts.iter_mut().find(|(k, _)| *k == key) {
                    Some((_, n)) => *n += 1,
                    None => counts.push((key, 1)),
                }
            }
            let best = counts
                .into_iter()
                .max_by_key(|(_, n)| *n)
                .map(|(k, _)| k)
                .expect("non-empty");
            Ok(best)
        }
        other => Err(here(op_err(
            RuntimeErrorKind::ArityMismatch,
            format!("{other} is not a higher-order operation"),
        ))),
    }
}

/// Applies a first-order builtin to fully evaluated arguments.
pub fn apply_op(id: OpId, args: Vec<Value>, budget: &mut StepBudget) -> Result<Value, OpError> {
    let sig = op(id);
    if args.len() != sig.arity() {
        return Err(op_err(
            RuntimeErrorKind::ArityMismatch,
            format!("{} expects {} arguments, got {}", sig.name, sig.arity(), args.len()),
        ));
    }
    let mut args = args;
    match sig.name {
        "Add" => arith2(&args, "Add", |a, b| a.checked_add(b)),
        "Sub" => arith2(&args, "Sub", |a, b| a.checked_sub(b)),
        "Neg" => match &args[0] {
            Value::Int(n) => n
                .checked_neg()
                .map(Value::Int)
                .ok_or_else(|| op_err(RuntimeErrorKind::DivergentValue, "integer overflow")),
            Value::Bool(b) => Ok(Value::Bool(!b)),
            other => type_mismatch("Neg", other),
        },
        "Equals" => Ok(Value::Bool(args[0] == args[1])),
        "Len" => Ok(Value::Int(expect_list(&args[0], "Len")?.1.len() as i64)),
        "Head" => {
            let (_, items) = expect_list(&args[0], "Head")?;
            items.first().cloned().ok_or_else(|| {
                op_err(RuntimeErrorKind::EmptyListAccess, "Head of an empty list")
            })
        }
        "Tail" => {
            let (_, items) = expect_list(&args[0], "Tail")?;
            items.last().cloned().ok_or_else(|| {
                op_err(RuntimeErrorKind::EmptyListAccess, "Tail of an empty list")
            })
        }
        "Reverse" => {
            let (elem, items) = take_list(args.remove(0), "Reverse")?;
            Ok(Value::list(elem, items.into_iter().rev().collect()))
        }
        "Deduplicate" => {
            let (elem, items) = take_list(args.remove(0), "Deduplicate")?;
            budget.charge(items.len() as u64)?;
            let mut out: Vec<Value> = Vec::new();
            for item in items {
                if !out.contains(&item) {
                    out.push(item);
                }
            }
            Ok(Value::list(elem, out))
        }
        "Diff" => {
            let second = args.pop().expect("arity checked");
            let (elem, items) = take_list(args.remove(0), "Diff")?;
            let (_, exclude) = take_list(second, "Diff")?;
            budget.charge(items.len() as u64)?;
            Ok(Value::list(
                elem,
                items.into_iter().filter(|v| !exclude.contains(v)).collect(),
            ))
        }
        "Intersection" => {
            let second = args.pop().expect("arity checked");
            let (elem, items) = take_list(args.remove(0), "Intersection")?;
            let (_, keep) = take_list(second, "Intersection")?;
            budget.charge(items.len() as u64)?;
            Ok(Value::list(
                elem,
                items.into_iter().filter(|v| keep.contains(v)).collect(),
            ))
        }
        "Union" => {
            let second = args.pop().expect("arity checked");
            let (elem, mut items) = take_list(args.remove(0), "Union")?;
            let (_, mut rest) = take_list(second, "Union")?;
            items.append(&mut rest);
            Ok(Value::list(elem, items))
        }
        "Zip" => {
            let second = args.pop().expect("arity checked");
            let (ea, a) = take_list(args.remove(0), "Zip")?;
            let (eb, b) = take_list(second, "Zip")?;
            let items = a
                .into_iter()
                .zip(b)
                .map(|(x, y)| Value::pair(x, y))
                .collect();
            Ok(Value::list(types::pair(ea, eb), items))
        }
        "Pair" => {
            let b = args.pop().expect("arity checked");
            let a = args.remove(0);
            Ok(Value::pair(a, b))
        }
        "First" => match args.remove(0) {
            Value::Pair(a, _) => Ok(*a),
            other => type_mismatch("First", &other),
        },
        "Second" => match args.remove(0) {
            Value::Pair(_, b) => Ok(*b),
            other => type_mismatch("Second", &other),
        },
        "Loc" => {
            let (a, b) = (expect_int(&args[0], "Loc")?, expect_int(&args[1], "Loc")?);
            Ok(Value::Loc(Loc::new(a, b)))
        }
        "Width" => {
            let (lt, rb) = bbox(&args[0], "Width")?;
            Ok(Value::Int(rb.col - lt.col + 1))
        }
        "Height" => {
            let (lt, rb) = bbox(&args[0], "Height")?;
            Ok(Value::Int(rb.row - lt.row + 1))
        }
        "Area" => Ok(Value::Int(expect_region(&args[0], "Area")?.len() as i64)),
        "LTC" => bbox(&args[0], "LTC").map(|(lt, _)| Value::Loc(lt)),
        "RBC" => bbox(&args[0], "RBC").map(|(_, rb)| Value::Loc(rb)),
        "RTC" => bbox(&args[0], "RTC").map(|(lt, rb)| Value::Loc(Loc::new(lt.row, rb.col))),
        "LBC" => bbox(&args[0], "LBC").map(|(lt, rb)| Value::Loc(Loc::new(rb.row, lt.col))),
        "Pixels" => {
            let reg = expect_region(&args[0], "Pixels")?;
            budget.charge(reg.len() as u64)?;
            let items = reg
                .iter()
                .map(|(loc, color)| Value::Region(Region::from_pixels([(loc, color)])))
                .collect();
            Ok(Value::list(types::REGION, items))
        }
        "Paint" => {
            let color = expect_color(&args[1], "Paint")?;
            let reg = expect_region(&args[0], "Paint")?;
            budget.charge(reg.len() as u64)?;
            Ok(Value::Region(
                reg.iter().map(|(loc, _)| (loc, color)).collect(),
            ))
        }
        "FloodFill" => flood_fill(&args, budget),
        "Rotate" => rotate(&args),
        "Flip" => flip(&args),
        "Scale" => scale(&args, budget),
        "Shift" => shift(&args),
        "Draw" => draw(args, budget),
        "Crop" => crop(&args),
        "Rect" => rect(&args, budget),
        "Line" => line(&args, budget),
        other => Err(op_err(
            RuntimeErrorKind::ArityMismatch,
            format!("{other} must be evaluated as a higher-order call"),
        )),
    }
}

fn type_mismatch<T>(name: &str, got: &Value) -> Result<T, OpError> {
    Err(op_err(
        RuntimeErrorKind::ArityMismatch,
        format!("{name} applied to {}", got.type_name()),
    ))
}

fn arith2(
    args: &[Value],
    name: &str,
    f: impl Fn(i64, i64) -> Option<i64>,
) -> Result<Value, OpError> {
    match (&args[0], &args[1]) {
        (Value::Int(a), Value::Int(b)) => f(*a, *b)
            .map(Value::Int)
            .ok_or_else(|| op_err(RuntimeErrorKind::DivergentValue, "integer overflow")),
        (Value::Loc(a), Value::Loc(b)) => {
            let row = f(a.row, b.row);
            let col = f(a.col, b.col);
            match (row, col) {
                (Some(r), Some(c)) => Ok(Value::Loc(Loc::new(r, c))),
                _ => Err(op_err(RuntimeErrorKind::DivergentValue, "integer overflow")),
            }
        }
        (a, _) => type_mismatch(name, a),
    }
}

fn expect_int(v: &Value, name: &str) -> Result<i64, OpError> {
    v.as_int().ok_or(()).or_else(|_| type_mismatch(name, v))
}

fn expect_color(v: &Value, name: &str) -> Result<Color, OpError> {
    match v {
        Value::Color(c) => Ok(*c),
        other => type_mismatch(name, other),
    }
}

fn expect_region<'a>(v: &'a Value, name: &str) -> Result<&'a Region, OpError> {
    v.as_region().ok_or(()).or_else(|_| type_mismatch(name, v))
}

fn expect_loc(v: &Value, name: &str) -> Result<Loc, OpError> {
    match v {
        Value::Loc(l) => Ok(*l),
        other => type_mismatch(name, other),
    }
}

fn expect_list<'a>(v: &'a Value, name: &str) -> Result<(&'a TypeExpr, &'a [Value]), OpError> {
    match v {
        Value::List { elem, items } => Ok((elem, items)),
        other => type_mismatch(name, other),
    }
}

fn take_list(v: Value, name: &str) -> Result<(TypeExpr, Vec<Value>), OpError> {
    match v {
        Value::List { elem, items } => Ok((elem, items)),
        other => type_mismatch(name, &other),
    }
}

fn bbox(v: &Value, name: &str) -> Result<(Loc, Loc), OpError> {
    expect_region(v, name)?.bounding_box().map_err(|_| {
        op_err(
            RuntimeErrorKind::EmptyRegion,
            format!("{name} of an empty region"),
        )
    })
}

/// Segmentation into connected components: background-colored pixels are
/// discarded, the rest is partitioned by 4- or 8-neighborhood over
/// positions alone, so components may be multicolored. Components are
/// ordered by their minimal pixel, row-major.
fn flood_fill(args: &[Value], budget: &mut StepBudget) -> Result<Value, OpError> {
    let reg = expect_region(&args[0], "FloodFill")?;
    let background = expect_color(&args[1], "FloodFill")?;
    let conn = match &args[2] {
        Value::Connectivity(c) => *c,
        other => return type_mismatch("FloodFill", other),
    };
    budget.charge(reg.len() as u64)?;

    let foreground: std::collections::BTreeMap<Loc, Color> = reg
        .iter()
        .filter(|(_, color)| *color != background)
        .collect();
    let neighbors: &[(i64, i64)] = match conn {
        Connectivity::N4 => &[(-1, 0), (0, -1), (0, 1), (1, 0)],
        Connectivity::N8 => &[
            (-1, -1),
            (-1, 0),
            (-1, 1),
            (0, -1),
            (0, 1),
            (1, -1),
            (1, 0),
            (1, 1),
        ],
    };

    let mut visited: std::collections::BTreeSet<Loc> = std::collections::BTreeSet::new();
    let mut components = Vec::new();
    for (&start, _) in &foreground {
        if visited.contains(&start) {
            continue;
        }
        let mut component = Region::empty();
        let mut queue = std::collections::VecDeque::from([start]);
        visited.insert(start);
        while let Some(loc) = queue.pop_front() {
            budget.charge(1)?;
            component.insert(loc, foreground[&loc]);
            for (dr, dc) in neighbors {
                let next = Loc::new(loc.row + dr, loc.col + dc);
                if foreground.contains_key(&next) && visited.insert(next) {
                    queue.push_back(next);
                }
            }
        }
        components.push(Value::Region(component));
    }
    Ok(Value::list(types::REGION, components))
}

/// Quarter-turn about the region's own bounding box, re-anchored so the
/// box's top-left corner stays in place.
fn rotate(args: &[Value]) -> Result<Value, OpError> {
    let reg = expect_region(&args[0], "Rotate")?;
    let dir = match &args[1] {
        Value::Direction(d) => *d,
        other => return type_mismatch("Rotate", other),
    };
    let (lt, rb) = bbox(&args[0], "Rotate")?;
    let h = rb.row - lt.row + 1;
    let w = rb.col - lt.col + 1;
    let rotated = reg
        .iter()
        .map(|(loc, color)| {
            let (i, j) = (loc.row - lt.row, loc.col - lt.col);
            let (ni, nj) = match dir {
                Direction::Cw => (j, h - 1 - i),
                Direction::Ccw => (w - 1 - j, i),
            };
            (Loc::new(lt.row + ni, lt.col + nj), color)
        })
        .collect();
    Ok(Value::Region(rotated))
}

/// Mirror within the bounding box, anchored in place. Horizontal mirrors
/// columns (left-right), Vertical mirrors rows (top-bottom).
fn flip(args: &[Value]) -> Result<Value, OpError> {
    let reg = expect_region(&args[0], "Flip")?;
    let orientation = match &args[1] {
        Value::Orientation(o) => *o,
        other => return type_mismatch("Flip", other),
    };
    let (lt, rb) = bbox(&args[0], "Flip")?;
    let flipped = reg
        .iter()
        .map(|(loc, color)| {
            let new = match orientation {
                Orientation::Horizontal => Loc::new(loc.row, rb.col - (loc.col - lt.col)),
                Orientation::Vertical => Loc::new(rb.row - (loc.row - lt.row), loc.col),
            };
            (new, color)
        })
        .collect();
    Ok(Value::Region(flipped))
}

/// Block replication: each source pixel becomes a kr-by-kc block, with the
/// bounding box anchored at its original top-left corner.
fn scale(args: &[Value], budget: &mut StepBudget) -> Result<Value, OpError> {
    let reg = expect_region(&args[0], "Scale")?;
    let (kr, kc) = match &args[1] {
        Value::Int(f) => (*f, *f),
        Value::Pair(a, b) => (expect_int(a, "Scale")?, expect_int(b, "Scale")?),
        other => return type_mismatch("Scale", other),
    };
    if kr < 1 || kc < 1 {
        return Err(op_err(
            RuntimeErrorKind::DivergentValue,
            format!("scale factor ({kr}, {kc}) below 1"),
        ));
    }
    let (lt, _) = bbox(&args[0], "Scale")?;
    let out_pixels = (reg.len() as u64)
        .checked_mul(kr as u64)
        .and_then(|n| n.checked_mul(kc as u64))
        .ok_or_else(|| op_err(RuntimeErrorKind::DivergentValue, "scale blowup"))?;
    budget.charge(out_pixels)?;

    let mut out = Region::empty();
    for (loc, color) in reg.iter() {
        let (i, j) = (loc.row - lt.row, loc.col - lt.col);
        let base = Loc::new(lt.row + i * kr, lt.col + j * kc);
        for di in 0..kr {
            for dj in 0..kc {
                out.insert(Loc::new(base.row + di, base.col + dj), color);
            }
        }
    }
    Ok(Value::Region(out))
}

fn shift(args: &[Value]) -> Result<Value, OpError> {
    let reg = expect_region(&args[0], "Shift")?;
    let (dr, dc) = match &args[1] {
        Value::Loc(l) => (l.row, l.col),
        Value::Pair(a, b) => (expect_int(a, "Shift")?, expect_int(b, "Shift")?),
        other => return type_mismatch("Shift", other),
    };
    let mut out = Region::empty();
    for (loc, color) in reg.iter() {
        let row = loc.row.checked_add(dr);
        let col = loc.col.checked_add(dc);
        match (row, col) {
            (Some(r), Some(c)) => out.insert(Loc::new(r, c), color),
            _ => return Err(op_err(RuntimeErrorKind::DivergentValue, "integer overflow")),
        }
    }
    Ok(Value::Region(out))
}

/// Overlays written in sequence over the base; later writes win.
fn draw(mut args: Vec<Value>, budget: &mut StepBudget) -> Result<Value, OpError> {
    let over = args.pop().expect("arity checked");
    let base = match args.remove(0) {
        Value::Region(r) => r,
        other => return type_mismatch("Draw", &other),
    };
    let overlays: Vec<Region> = match over {
        Value::Region(r) => vec![r],
        Value::List { items, .. } => items
            .into_iter()
            .map(|v| match v {
                Value::Region(r) => Ok(r),
                other => type_mismatch("Draw", &other),
            })
            .collect::<Result<_, _>>()?,
        other => return type_mismatch("Draw", &other),
    };
    let mut out = base;
    for overlay in overlays {
        budget.charge(overlay.len() as u64)?;
        for (loc, color) in overlay.iter() {
            out.insert(loc, color);
        }
    }
    Ok(Value::Region(out))
}

/// Keeps pixels inside the inclusive window; absolute positions are
/// preserved, so the result is not re-anchored.
fn crop(args: &[Value]) -> Result<Value, OpError> {
    let reg = expect_region(&args[0], "Crop")?;
    let lt = expect_loc(&args[1], "Crop")?;
    let rb = expect_loc(&args[2], "Crop")?;
    if lt.row > rb.row || lt.col > rb.col {
        return Err(op_err(
            RuntimeErrorKind::DivergentValue,
            format!("crop window {lt}..{rb} is inverted"),
        ));
    }
    let out = reg
        .iter()
        .filter(|(loc, _)| {
            loc.row >= lt.row && loc.row <= rb.row && loc.col >= lt.col && loc.col <= rb.col
        })
        .collect();
    Ok(Value::Region(out))
}

fn rect(args: &[Value], budget: &mut StepBudget) -> Result<Value, OpError> {
    let lt = expect_loc(&args[0], "Rect")?;
    let rb = expect_loc(&args[1], "Rect")?;
    let color = expect_color(&args[2], "Rect")?;
    if lt.row > rb.row || lt.col > rb.col {
        return Err(op_err(
            RuntimeErrorKind::DivergentValue,
            format!("rectangle corners {lt}..{rb} are inverted"),
        ));
    }
    let area = (rb.row - lt.row + 1)
        .checked_mul(rb.col - lt.col + 1)
        .filter(|a| *a >= 0)
        .ok_or_else(|| op_err(RuntimeErrorKind::DivergentValue, "rectangle blowup"))?;
    budget.charge(area as u64)?;
    let mut out = Region::empty();
    for row in lt.row..=rb.row {
        for col in lt.col..=rb.col {
            out.insert(Loc::new(row, col), color);
        }
    }
    Ok(Value::Region(out))
}

/// Integer midpoint line walk, inclusive of both endpoints. Axis-aligned
/// and 45-degree lines are exact.
fn line(args: &[Value], budget: &mut StepBudget) -> Result<Value, OpError> {
    let a = expect_loc(&args[0], "Line")?;
    let b = expect_loc(&args[1], "Line")?;
    let color = expect_color(&args[2], "Line")?;

    let dr = b
        .row
        .checked_sub(a.row)
        .ok_or_else(|| op_err(RuntimeErrorKind::DivergentValue, "integer overflow"))?;
    let dc = b
        .col
        .checked_sub(a.col)
        .ok_or_else(|| op_err(RuntimeErrorKind::DivergentValue, "integer overflow"))?;
    budget.charge(dr.unsigned_abs().max(dc.unsigned_abs()) + 1)?;

    let dx = dr.abs();
    let sx = if a.row < b.row { 1 } else { -1 };
    let dy = -dc.abs();
    let sy = if a.col < b.col { 1 } else { -1 };
    let mut err = dx + dy;
    let (mut row, mut col) = (a.row, a.col);
    let mut out = Region::empty();
    loop {
        out.insert(Loc::new(row, col), color);
        if row == b.row && col == b.col {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            row += sx;
        }
        if e2 <= dx {
            err += dx;
            col += sy;
        }
    }
    Ok(Value::Region(out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::program::GenLimits;
    use crate::types::{op_by_name, REGION};

    fn raster(rows: &[&[u8]]) -> Raster {
        Raster::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    fn budget() -> StepBudget {
        StepBudget::new(1_000_000)
    }

    fn run_op(name: &str, args: Vec<Value>) -> Result<Value, OpError> {
        let (id, _) = op_by_name(name).unwrap();
        apply_op(id, args, &mut budget())
    }

    fn region(pixels: &[(i64, i64, Color)]) -> Value {
        Value::Region(Region::from_pixels(
            pixels.iter().map(|(r, c, col)| (Loc::new(*r, *c), *col)),
        ))
    }

    fn int_list(values: &[i64]) -> Value {
        Value::list(types::INT, values.iter().map(|v| Value::Int(*v)).collect())
    }

    #[test]
    fn identity_program_reproduces_input() {
        let p = Program::new(
            AstNode::symbol(SymbolName::Scene, REGION),
            &GenLimits::default(),
        )
        .unwrap();
        let input = raster(&[&[1, 2], &[3, 0]]);
        let out = apply_program_to_raster(&p, &input, &EvalOptions::default()).unwrap();
        assert_eq!(out, input);
    }

    #[test]
    fn paint_recolors_every_pixel() {
        let (paint, _) = op_by_name("Paint").unwrap();
        let p = Program::new(
            AstNode::op(
                paint,
                vec![
                    AstNode::symbol(SymbolName::Scene, REGION),
                    AstNode::symbol(SymbolName::Color(Color::Red), types::COLOR),
                ],
                REGION,
            ),
            &GenLimits::default(),
        )
        .unwrap();
        let out =
            apply_program_to_raster(&p, &raster(&[&[0, 1], &[3, 4]]), &EvalOptions::default())
                .unwrap();
        assert_eq!(out, raster(&[&[2, 2], &[2, 2]]));
    }

    #[test]
    fn head_of_empty_flood_fill_is_empty_list_access() {
        // All-black scene segments to nothing when black is background.
        let (head, _) = op_by_name("Head").unwrap();
        let (ff, _) = op_by_name("FloodFill").unwrap();
        let tree = AstNode::op(
            head,
            vec![AstNode::op(
                ff,
                vec![
                    AstNode::symbol(SymbolName::Scene, REGION),
                    AstNode::symbol(SymbolName::Color(Color::Black), types::COLOR),
                    AstNode::symbol(SymbolName::N4, types::CONNECTIVITY),
                ],
                types::list(REGION),
            )],
            REGION,
        );
        let p = Program::new(tree, &GenLimits::default()).unwrap();
        let err =
            apply_program_to_raster(&p, &raster(&[&[0, 0]]), &EvalOptions::default()).unwrap_err();
        assert_eq!(err.kind, RuntimeErrorKind::EmptyListAccess);
    }

    #[test]
    fn shift_above_canvas_fails_at_rasterization() {
        let (shift_op, _) = op_by_name("Shift").unwrap();
        let (loc_op, _) = op_by_name("Loc").unwrap();
        let (neg, _) = op_by_name("Neg").unwrap();
        let minus_one = AstNode::op(
            neg,
            vec![AstNode::symbol(SymbolName::One, types::INT)],
            types::INT,
        );
        let tree = AstNode::op(
            shift_op,
            vec![
                AstNode::symbol(SymbolName::Scene, REGION),
                AstNode::op(
                    loc_op,
                    vec![minus_one, AstNode::symbol(SymbolName::Zero, types::INT)],
                    types::LOC,
                ),
            ],
            REGION,
        );
        let p = Program::new(tree, &GenLimits::default()).unwrap();
        let err =
            apply_program_to_raster(&p, &raster(&[&[1, 2]]), &EvalOptions::default()).unwrap_err();
        assert_eq!(err.kind, RuntimeErrorKind::OutOfCanvas);
    }

    #[test]
    fn add_is_componentwise_on_locations() {
        let out = run_op(
            "Add",
            vec![Value::Loc(Loc::new(1, 2)), Value::Loc(Loc::new(3, 4))],
        )
        .unwrap();
        assert_eq!(out, Value::Loc(Loc::new(4, 6)));
    }

    #[test]
    fn tail_returns_last_element() {
        assert_eq!(run_op("Tail", vec![int_list(&[1, 2, 3])]).unwrap(), Value::Int(3));
        let err = run_op("Tail", vec![int_list(&[])]).unwrap_err();
        assert_eq!(err.kind, RuntimeErrorKind::EmptyListAccess);
    }

    #[test]
    fn list_ops_reference_semantics() {
        let a = int_list(&[1, 2, 2, 3]);
        let b = int_list(&[2, 4]);
        assert_eq!(
            run_op("Deduplicate", vec![a.clone()]).unwrap(),
            int_list(&[1, 2, 3])
        );
        assert_eq!(
            run_op("Diff", vec![a.clone(), b.clone()]).unwrap(),
            int_list(&[1, 3])
        );
        assert_eq!(
            run_op("Intersection", vec![a.clone(), b.clone()]).unwrap(),
            int_list(&[2, 2])
        );
        assert_eq!(
            run_op("Union", vec![a.clone(), b.clone()]).unwrap(),
            int_list(&[1, 2, 2, 3, 2, 4])
        );
        let zipped = run_op("Zip", vec![a, b]).unwrap();
        let Value::List { items, .. } = &zipped else {
            panic!()
        };
        assert_eq!(items.len(), 2);
        assert_eq!(items[0], Value::pair(Value::Int(1), Value::Int(2)));
    }

    #[test]
    fn corner_ops_and_dimensions() {
        let reg = region(&[(1, 2, Color::Red), (3, 5, Color::Blue)]);
        assert_eq!(run_op("LTC", vec![reg.clone()]).unwrap(), Value::Loc(Loc::new(1, 2)));
        assert_eq!(run_op("RBC", vec![reg.clone()]).unwrap(), Value::Loc(Loc::new(3, 5)));
        assert_eq!(run_op("RTC", vec![reg.clone()]).unwrap(), Value::Loc(Loc::new(1, 5)));
        assert_eq!(run_op("LBC", vec![reg.clone()]).unwrap(), Value::Loc(Loc::new(3, 2)));
        assert_eq!(run_op("Width", vec![reg.clone()]).unwrap(), Value::Int(4));
        assert_eq!(run_op("Height", vec![reg.clone()]).unwrap(), Value::Int(3));
        assert_eq!(run_op("Area", vec![reg]).unwrap(), Value::Int(2));
        let err = run_op("Width", vec![region(&[])]).unwrap_err();
        assert_eq!(err.kind, RuntimeErrorKind::EmptyRegion);
    }

    #[test]
    fn flood_fill_connectivity_difference() {
        let diag = region(&[(0, 0, Color::Blue), (1, 1, Color::Red)]);
        let n4 = run_op(
            "FloodFill",
            vec![
                diag.clone(),
                Value::Color(Color::Black),
                Value::Connectivity(Connectivity::N4),
            ],
        )
        .unwrap();
        let n8 = run_op(
            "FloodFill",
            vec![
                diag,
                Value::Color(Color::Black),
                Value::Connectivity(Connectivity::N8),
            ],
        )
        .unwrap();
        let count = |v: &Value| match v {
            Value::List { items, .. } => items.len(),
            _ => panic!(),
        };
        assert_eq!(count(&n4), 2);
        assert_eq!(count(&n8), 1);
    }

    #[test]
    fn flood_fill_all_background_is_empty_list() {
        let reg = region(&[(0, 0, Color::Black), (0, 1, Color::Black)]);
        let out = run_op(
            "FloodFill",
            vec![
                reg,
                Value::Color(Color::Black),
                Value::Connectivity(Connectivity::N4),
            ],
        )
        .unwrap();
        assert_eq!(out, Value::list(types::REGION, vec![]));
    }

    #[test]
    fn rotate_half_widths() {
        // A 2x3 region becomes 3x2 under a quarter turn.
        let reg = region(&[
            (0, 0, Color::Red),
            (0, 1, Color::Blue),
            (0, 2, Color::Green),
            (1, 0, Color::Grey),
            (1, 1, Color::Teal),
            (1, 2, Color::Brown),
        ]);
        let out = run_op("Rotate", vec![reg, Value::Direction(Direction::Cw)]).unwrap();
        let outr = out.as_region().unwrap();
        let (lt, rb) = outr.bounding_box().unwrap();
        assert_eq!((rb.row - lt.row + 1, rb.col - lt.col + 1), (3, 2));
        // Top-left of the source column becomes the top-right.
        assert_eq!(outr.color_at(Loc::new(0, 1)), Some(Color::Red));
    }

    #[test]
    fn flip_horizontal_mirrors_columns() {
        let reg = region(&[(0, 0, Color::Blue), (0, 1, Color::Red)]);
        let out = run_op("Flip", vec![reg, Value::Orientation(Orientation::Horizontal)]).unwrap();
        let outr = out.as_region().unwrap();
        assert_eq!(outr.color_at(Loc::new(0, 0)), Some(Color::Red));
        assert_eq!(outr.color_at(Loc::new(0, 1)), Some(Color::Blue));
    }

    #[test]
    fn scale_three_makes_a_block() {
        let reg = region(&[(0, 0, Color::Red)]);
        let out = run_op("Scale", vec![reg, Value::Int(3)]).unwrap();
        let outr = out.as_region().unwrap();
        assert_eq!(outr.len(), 9);
        let (lt, rb) = outr.bounding_box().unwrap();
        assert_eq!((lt, rb), (Loc::new(0, 0), Loc::new(2, 2)));
        let err = run_op("Scale", vec![region(&[(0, 0, Color::Red)]), Value::Int(0)]).unwrap_err();
        assert_eq!(err.kind, RuntimeErrorKind::DivergentValue);
    }

    #[test]
    fn draw_later_overlays_win() {
        let base = region(&[(0, 0, Color::Black)]);
        let a = region(&[(0, 0, Color::Red), (0, 1, Color::Red)]);
        let b = region(&[(0, 1, Color::Blue)]);
        let out = run_op(
            "Draw",
            vec![base, Value::list(types::REGION, vec![a, b])],
        )
        .unwrap();
        let outr = out.as_region().unwrap();
        assert_eq!(outr.color_at(Loc::new(0, 0)), Some(Color::Red));
        assert_eq!(outr.color_at(Loc::new(0, 1)), Some(Color::Blue));
    }

    #[test]
    fn crop_keeps_absolute_positions() {
        let reg = region(&[(1, 1, Color::Red), (4, 4, Color::Blue)]);
        let out = run_op(
            "Crop",
            vec![reg, Value::Loc(Loc::new(0, 0)), Value::Loc(Loc::new(2, 2))],
        )
        .unwrap();
        let outr = out.as_region().unwrap();
        assert_eq!(outr.len(), 1);
        assert_eq!(outr.color_at(Loc::new(1, 1)), Some(Color::Red));
        let err = run_op(
            "Crop",
            vec![
                region(&[(0, 0, Color::Red)]),
                Value::Loc(Loc::new(2, 2)),
                Value::Loc(Loc::new(0, 0)),
            ],
        )
        .unwrap_err();
        assert_eq!(err.kind, RuntimeErrorKind::DivergentValue);
    }

    #[test]
    fn rect_and_line_basics() {
        let px = run_op(
            "Rect",
            vec![
                Value::Loc(Loc::new(0, 0)),
                Value::Loc(Loc::new(0, 0)),
                Value::Color(Color::Red),
            ],
        )
        .unwrap();
        assert_eq!(px.as_region().unwrap().len(), 1);

        let horizontal = run_op(
            "Line",
            vec![
                Value::Loc(Loc::new(0, 0)),
                Value::Loc(Loc::new(0, 3)),
                Value::Color(Color::Blue),
            ],
        )
        .unwrap();
        let reg = horizontal.as_region().unwrap();
        assert_eq!(reg.len(), 4);
        for col in 0..4 {
            assert_eq!(reg.color_at(Loc::new(0, col)), Some(Color::Blue));
        }
    }

    #[test]
    fn step_budget_turns_blowup_into_divergent_value() {
        let reg = region(&[(0, 0, Color::Red)]);
        let (id, _) = op_by_name("Scale").unwrap();
        let mut small = StepBudget::new(100);
        let err = apply_op(id, vec![reg, Value::Int(1000)], &mut small).unwrap_err();
        assert_eq!(err.kind, RuntimeErrorKind::DivergentValue);
    }

    #[test]
    fn higher_order_family_over_pixels() {
        // Map each pixel of the scene to a repaint, then merge by Draw.
        let (map_id, _) = op_by_name("Map").unwrap();
        let (pixels, _) = op_by_name("Pixels").unwrap();
        let (paint, _) = op_by_name("Paint").unwrap();
        let body = AstNode::op(
            paint,
            vec![
                AstNode::symbol(SymbolName::FunctionalInput, REGION),
                AstNode::symbol(SymbolName::Color(Color::Green), types::COLOR),
            ],
            REGION,
        );
        let tree = AstNode::op(
            map_id,
            vec![
                AstNode::op(
                    pixels,
                    vec![AstNode::symbol(SymbolName::Scene, REGION)],
                    types::list(REGION),
                ),
                AstNode::subprogram(body, REGION, REGION),
            ],
            types::list(REGION),
        );
        let ws = WorkspaceTemplate::maximal().instantiate(&raster(&[&[1, 2]]));
        let out = evaluate_expr(&tree, &ws, &EvalOptions::default()).unwrap();
        let Value::List { items, .. } = out else {
            panic!()
        };
        assert_eq!(items.len(), 2);
        for item in items {
            let reg = item.as_region().unwrap();
            assert!(reg.iter().all(|(_, c)| c == Color::Green));
        }
    }

    /// Runs one higher-order op over a literal item list with an
    /// identity-style body (the functional input itself).
    fn run_ho(name: &str, elem: TypeExpr, items: Vec<Value>) -> Result<Value, RuntimeError> {
        let body = AstNode::symbol(SymbolName::FunctionalInput, elem.clone());
        let ws = WorkspaceTemplate::maximal().instantiate(&raster(&[&[0]]));
        let mut ctx = EvalCtx {
            ws: &ws,
            functional: Vec::new(),
            budget: StepBudget::new(1_000_000),
            check_types: false,
        };
        let node_ty = types::list(elem.clone());
        ho_apply(name, elem.clone(), items, &body, &elem, &node_ty, &mut ctx, 0, 2)
    }

    #[test]
    fn most_common_returns_key_with_first_occurrence_ties() {
        let ints = |vals: &[i64]| vals.iter().map(|v| Value::Int(*v)).collect::<Vec<_>>();
        assert_eq!(
            run_ho("MostCommon", types::INT, ints(&[2, 1, 2, 1, 1])).unwrap(),
            Value::Int(1)
        );
        // Tie between 3 and 7: first occurrence wins.
        assert_eq!(
            run_ho("MostCommon", types::INT, ints(&[3, 7, 7, 3])).unwrap(),
            Value::Int(3)
        );
        let err = run_ho("MostCommon", types::INT, vec![]).unwrap_err();
        assert_eq!(err.kind, RuntimeErrorKind::EmptyListAccess);
    }

    #[test]
    fn sort_is_stable_ascending() {
        let items = vec![Value::Int(3), Value::Int(1), Value::Int(2), Value::Int(1)];
        let out = run_ho("Sort", types::INT, items).unwrap();
        assert_eq!(
            out,
            Value::list(
                types::INT,
                vec![Value::Int(1), Value::Int(1), Value::Int(2), Value::Int(3)]
            )
        );
    }

    #[test]
    fn group_by_orders_groups_by_first_occurrence() {
        let items = vec![Value::Int(5), Value::Int(9), Value::Int(5)];
        let body = AstNode::symbol(SymbolName::FunctionalInput, types::INT);
        let ws = WorkspaceTemplate::maximal().instantiate(&raster(&[&[0]]));
        let mut ctx = EvalCtx {
            ws: &ws,
            functional: Vec::new(),
            budget: StepBudget::new(1_000_000),
            check_types: false,
        };
        let node_ty = types::list(types::pair(types::INT, types::list(types::INT)));
        let out = ho_apply(
            "GroupBy",
            types::INT,
            items,
            &body,
            &types::INT,
            &node_ty,
            &mut ctx,
            0,
            2,
        )
        .unwrap();
        let Value::List { items: groups, .. } = out else {
            panic!()
        };
        assert_eq!(groups.len(), 2);
        assert_eq!(
            groups[0],
            Value::pair(
                Value::Int(5),
                Value::list(types::INT, vec![Value::Int(5), Value::Int(5)])
            )
        );
    }

    #[test]
    fn map_and_filter_on_empty_lists() {
        assert_eq!(
            run_ho("Map", types::INT, vec![]).unwrap(),
            Value::list(types::INT, vec![])
        );
        let out = run_ho("Filter", types::BOOL, vec![Value::Bool(true), Value::Bool(false)])
            .unwrap();
        // Identity body doubles as the predicate for Bool elements.
        assert_eq!(out, Value::list(types::BOOL, vec![Value::Bool(true)]));
    }
}
