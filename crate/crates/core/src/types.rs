//! DSL types, operation signatures, and unification.
//!
//! Generation never emits an ill-typed tree: every hole carries a required
//! type, and [`candidates_for`] offers only operations and symbols whose
//! (instantiated) type unifies with it.

use std::collections::HashMap;
use std::fmt;
use std::sync::LazyLock;

use thiserror::Error;

use crate::workspace::SymbolName;

/// Ground base types of the DSL.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Concrete {
    Int,
    Bool,
    Color,
    Loc,
    Connectivity,
    Direction,
    Orientation,
    Region,
}

impl Concrete {
    pub fn name(self) -> &'static str {
        match self {
            Concrete::Int => "Int",
            Concrete::Bool => "Bool",
            Concrete::Color => "Color",
            Concrete::Loc => "Loc",
            Concrete::Connectivity => "Connectivity",
            Concrete::Direction => "Direction",
            Concrete::Orientation => "Orientation",
            Concrete::Region => "Region",
        }
    }
}

/// Constraint carried by a type variable. `Arithmetic` admits the types
/// with addition and subtraction (Int and Loc); `Comparable` admits the
/// orderable ones (Int).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum VarConstraint {
    None,
    Arithmetic,
    Comparable,
}

impl VarConstraint {
    fn admits(self, t: &TypeExpr) -> bool {
        match self {
            VarConstraint::None => true,
            VarConstraint::Arithmetic => matches!(
                t,
                TypeExpr::Concrete(Concrete::Int) | TypeExpr::Concrete(Concrete::Loc)
            ),
            VarConstraint::Comparable => matches!(t, TypeExpr::Concrete(Concrete::Int)),
        }
    }

    /// Intersection of the admitted sets. Comparable is a subset of
    /// Arithmetic, so the stronger of the two always wins.
    fn merge(self, other: VarConstraint) -> VarConstraint {
        use VarConstraint::*;
        match (self, other) {
            (None, c) | (c, None) => c,
            (Comparable, _) | (_, Comparable) => Comparable,
            (Arithmetic, Arithmetic) => Arithmetic,
        }
    }
}

pub type VarId = u32;

/// A type expression. Function types appear only as higher-order operation
/// parameters; unions appear only where an operation accepts alternative
/// argument shapes and are committed to a single member during generation.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum TypeExpr {
    Concrete(Concrete),
    List(Box<TypeExpr>),
    Pair(Box<TypeExpr>, Box<TypeExpr>),
    Function(Box<TypeExpr>, Box<TypeExpr>),
    Union(Vec<TypeExpr>),
    Var(VarId, VarConstraint),
}

pub const INT: TypeExpr = TypeExpr::Concrete(Concrete::Int);
pub const BOOL: TypeExpr = TypeExpr::Concrete(Concrete::Bool);
pub const COLOR: TypeExpr = TypeExpr::Concrete(Concrete::Color);
pub const LOC: TypeExpr = TypeExpr::Concrete(Concrete::Loc);
pub const CONNECTIVITY: TypeExpr = TypeExpr::Concrete(Concrete::Connectivity);
pub const DIRECTION: TypeExpr = TypeExpr::Concrete(Concrete::Direction);
pub const ORIENTATION: TypeExpr = TypeExpr::Concrete(Concrete::Orientation);
pub const REGION: TypeExpr = TypeExpr::Concrete(Concrete::Region);

pub fn list(t: TypeExpr) -> TypeExpr {
    TypeExpr::List(Box::new(t))
}

pub fn pair(a: TypeExpr, b: TypeExpr) -> TypeExpr {
    TypeExpr::Pair(Box::new(a), Box::new(b))
}

pub fn func(arg: TypeExpr, ret: TypeExpr) -> TypeExpr {
    TypeExpr::Function(Box::new(arg), Box::new(ret))
}

pub fn union(members: Vec<TypeExpr>) -> TypeExpr {
    debug_assert!(members.len() >= 2);
    TypeExpr::Union(members)
}

impl TypeExpr {
    pub fn is_function(&self) -> bool {
        matches!(self, TypeExpr::Function(..))
    }

    pub fn is_ground(&self) -> bool {
        match self {
            TypeExpr::Concrete(_) => true,
            TypeExpr::List(t) => t.is_ground(),
            TypeExpr::Pair(a, b) | TypeExpr::Function(a, b) => a.is_ground() && b.is_ground(),
            TypeExpr::Union(_) | TypeExpr::Var(..) => false,
        }
    }

    fn contains_var(&self, id: VarId) -> bool {
        match self {
            TypeExpr::Var(v, _) => *v == id,
            TypeExpr::Concrete(_) => false,
            TypeExpr::List(t) => t.contains_var(id),
            TypeExpr::Pair(a, b) | TypeExpr::Function(a, b) => {
                a.contains_var(id) || b.contains_var(id)
            }
            TypeExpr::Union(ms) => ms.iter().any(|m| m.contains_var(id)),
        }
    }

    /// Printable form with variables renamed by first appearance, so that
    /// structurally identical types print identically regardless of the
    /// fresh ids they were instantiated with.
    pub fn canon_string(&self) -> String {
        let mut names = HashMap::new();
        let mut out = String::new();
        self.write_canon(&mut names, &mut out);
        out
    }

    fn write_canon(&self, names: &mut HashMap<VarId, usize>, out: &mut String) {
        match self {
            TypeExpr::Concrete(c) => out.push_str(c.name()),
            TypeExpr::List(t) => {
                out.push_str("List[");
                t.write_canon(names, out);
                out.push(']');
            }
            TypeExpr::Pair(a, b) => {
                out.push_str("Pair[");
                a.write_canon(names, out);
                out.push_str(", ");
                b.write_canon(names, out);
                out.push(']');
            }
            TypeExpr::Function(a, b) => {
                out.push('(');
                a.write_canon(names, out);
                out.push_str(" -> ");
                b.write_canon(names, out);
                out.push(')');
            }
            TypeExpr::Union(ms) => {
                out.push_str("Union[");
                for (i, m) in ms.iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    m.write_canon(names, out);
                }
                out.push(']');
            }
            TypeExpr::Var(id, c) => {
                let n = names.len();
                let n = *names.entry(*id).or_insert(n);
                out.push('?');
                out.push((b'a' + (n % 26) as u8) as char);
                match c {
                    VarConstraint::None => {}
                    VarConstraint::Arithmetic => out.push_str(":Arithmetic"),
                    VarConstraint::Comparable => out.push_str(":Comparable"),
                }
            }
        }
    }
}

impl fmt::Display for TypeExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.canon_string())
    }
}

/// Mapping from type-variable ids to type expressions.
#[derive(Clone, Debug, Default)]
pub struct Substitution {
    map: HashMap<VarId, TypeExpr>,
}

impl Substitution {
    pub fn new() -> Substitution {
        Substitution::default()
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// Follows top-level variable links without descending into children.
    fn walk(&self, t: &TypeExpr) -> TypeExpr {
        let mut cur = t.clone();
        while let TypeExpr::Var(id, _) = &cur {
            match self.map.get(id) {
                Some(next) => cur = next.clone(),
                None => break,
            }
        }
        cur
    }

    /// Fully applies the substitution. Idempotent: resolving a resolved
    /// type is the identity.
    pub fn resolve(&self, t: &TypeExpr) -> TypeExpr {
        match self.walk(t) {
            TypeExpr::Concrete(c) => TypeExpr::Concrete(c),
            TypeExpr::List(t) => list(self.resolve(&t)),
            TypeExpr::Pair(a, b) => pair(self.resolve(&a), self.resolve(&b)),
            TypeExpr::Function(a, b) => func(self.resolve(&a), self.resolve(&b)),
            TypeExpr::Union(ms) => TypeExpr::Union(ms.iter().map(|m| self.resolve(m)).collect()),
            v @ TypeExpr::Var(..) => v,
        }
    }

    fn bind(&mut self, id: VarId, t: TypeExpr) {
        self.map.insert(id, t);
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("cannot unify {left} with {right}")]
pub struct UnificationFailure {
    pub left: String,
    pub right: String,
}

fn fail(a: &TypeExpr, b: &TypeExpr) -> UnificationFailure {
    UnificationFailure {
        left: a.canon_string(),
        right: b.canon_string(),
    }
}

/// Extends `s` so that `a` and `b` become equal, or fails leaving `s`
/// untouched in an unspecified-but-consistent state only on the success
/// path (callers retry on a clone).
///
/// A union unifies with a type iff some member does; the first matching
/// member is committed. Constrained variables bind only within their
/// constraint set.
pub fn unify(a: &TypeExpr, b: &TypeExpr, s: &mut Substitution) -> Result<(), UnificationFailure> {
    let ra = s.walk(a);
    let rb = s.walk(b);
    match (&ra, &rb) {
        (TypeExpr::Union(ms), t) | (t, TypeExpr::Union(ms)) => {
            for m in ms {
                let mut trial = s.clone();
                if unify(m, t, &mut trial).is_ok() {
                    *s = trial;
                    return Ok(());
                }
            }
            Err(fail(&ra, &rb))
        }
        (TypeExpr::Var(ia, _), TypeExpr::Var(ib, _)) if ia == ib => Ok(()),
        (TypeExpr::Var(ia, ca), TypeExpr::Var(ib, cb)) => {
            // Bind the weaker-constrained variable to the stronger one so
            // the merged constraint keeps holding.
            let merged = ca.merge(*cb);
            if merged == *cb {
                s.bind(*ia, TypeExpr::Var(*ib, *cb));
            } else {
                s.bind(*ib, TypeExpr::Var(*ia, *ca));
            }
            Ok(())
        }
        (TypeExpr::Var(id, c), t) | (t, TypeExpr::Var(id, c)) => {
            let resolved = s.resolve(t);
            if resolved.contains_var(*id) {
                return Err(fail(&ra, &rb));
            }
            if !c.admits(&resolved) {
                return Err(fail(&ra, &rb));
            }
            s.bind(*id, resolved);
            Ok(())
        }
        (TypeExpr::Concrete(x), TypeExpr::Concrete(y)) if x == y => Ok(()),
        (TypeExpr::List(x), TypeExpr::List(y)) => unify(x, y, s),
        (TypeExpr::Pair(x1, x2), TypeExpr::Pair(y1, y2))
        | (TypeExpr::Function(x1, x2), TypeExpr::Function(y1, y2)) => {
            unify(x1, y1, s)?;
            unify(x2, y2, s)
        }
        _ => Err(fail(&ra, &rb)),
    }
}

/// Operation family, mirroring how the language groups its builtins.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OpCategory {
    DataComposing,
    PropertyRetrieving,
    StructureManipulating,
    Arithmetic,
    RegionSpecific,
    HigherOrder,
}

/// A builtin's typed signature. Variables in the static table use small
/// fixed ids; [`instantiate`] alpha-renames them before use.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OpSignature {
    pub name: &'static str,
    pub params: Vec<TypeExpr>,
    pub ret: TypeExpr,
    pub category: OpCategory,
}

impl OpSignature {
    pub fn arity(&self) -> usize {
        self.params.len()
    }

    pub fn is_higher_order(&self) -> bool {
        self.params.iter().any(TypeExpr::is_function)
    }
}

pub type OpId = usize;

fn var_a() -> TypeExpr {
    TypeExpr::Var(0, VarConstraint::None)
}

fn var_b() -> TypeExpr {
    TypeExpr::Var(1, VarConstraint::None)
}

fn var_arith() -> TypeExpr {
    TypeExpr::Var(0, VarConstraint::Arithmetic)
}

fn var_comp() -> TypeExpr {
    TypeExpr::Var(1, VarConstraint::Comparable)
}

static OP_TABLE: LazyLock<Vec<OpSignature>> = LazyLock::new(|| {
    use OpCategory::*;
    let sig = |name, params, ret, category| OpSignature {
        name,
        params,
        ret,
        category,
    };
    vec![
        sig("Add", vec![var_arith(), var_arith()], var_arith(), Arithmetic),
        sig("Area", vec![REGION], INT, PropertyRetrieving),
        sig("Crop", vec![REGION, LOC, LOC], REGION, RegionSpecific),
        sig("Deduplicate", vec![list(var_a())], list(var_a()), StructureManipulating),
        sig("Diff", vec![list(var_a()), list(var_a())], list(var_a()), StructureManipulating),
        sig(
            "Draw",
            vec![REGION, union(vec![REGION, list(REGION)])],
            REGION,
            RegionSpecific,
        ),
        sig("Equals", vec![var_a(), var_a()], BOOL, Arithmetic),
        sig(
            "Filter",
            vec![list(var_a()), func(var_a(), BOOL)],
            list(var_a()),
            HigherOrder,
        ),
        sig("First", vec![pair(var_a(), var_b())], var_a(), StructureManipulating),
        sig("Flip", vec![REGION, ORIENTATION], REGION, RegionSpecific),
        sig(
            "FloodFill",
            vec![REGION, COLOR, CONNECTIVITY],
            list(REGION),
            RegionSpecific,
        ),
        sig(
            "GroupBy",
            vec![list(var_a()), func(var_a(), var_b())],
            list(pair(var_b(), list(var_a()))),
            HigherOrder,
        ),
        sig("Head", vec![list(var_a())], var_a(), StructureManipulating),
        sig("Height", vec![REGION], INT, PropertyRetrieving),
        sig(
            "Intersection",
            vec![list(var_a()), list(var_a())],
            list(var_a()),
            StructureManipulating,
        ),
        sig("LBC", vec![REGION], LOC, PropertyRetrieving),
        sig("LTC", vec![REGION], LOC, PropertyRetrieving),
        sig("Len", vec![list(var_a())], INT, PropertyRetrieving),
        sig("Line", vec![LOC, LOC, COLOR], REGION, DataComposing),
        sig("Loc", vec![INT, INT], LOC, DataComposing),
        sig(
            "Map",
            vec![list(var_a()), func(var_a(), var_b())],
            list(var_b()),
            HigherOrder,
        ),
        sig(
            "MostCommon",
            vec![list(var_a()), func(var_a(), var_b())],
            var_b(),
            HigherOrder,
        ),
        sig("Neg", vec![union(vec![INT, BOOL])], union(vec![INT, BOOL]), Arithmetic),
        sig("Paint", vec![REGION, COLOR], REGION, RegionSpecific),
        sig("Pair", vec![var_a(), var_b()], pair(var_a(), var_b()), DataComposing),
        sig("Pixels", vec![REGION], list(REGION), RegionSpecific),
        sig("RBC", vec![REGION], LOC, PropertyRetrieving),
        sig("RTC", vec![REGION], LOC, PropertyRetrieving),
        sig("Rect", vec![LOC, LOC, COLOR], REGION, DataComposing),
        sig("Reverse", vec![list(var_a())], list(var_a()), StructureManipulating),
        sig("Rotate", vec![REGION, DIRECTION], REGION, RegionSpecific),
        sig(
            "Scale",
            vec![REGION, union(vec![INT, pair(INT, INT)])],
            REGION,
            RegionSpecific,
        ),
        sig("Second", vec![pair(var_a(), var_b())], var_b(), StructureManipulating),
        sig(
            "Shift",
            vec![REGION, union(vec![LOC, pair(INT, INT)])],
            REGION,
            RegionSpecific,
        ),
        sig(
            "Sort",
            vec![list(var_a()), func(var_a(), var_comp())],
            list(var_a()),
            HigherOrder,
        ),
        sig("Sub", vec![var_arith(), var_arith()], var_arith(), Arithmetic),
        sig("Tail", vec![list(var_a())], var_a(), StructureManipulating),
        sig("Union", vec![list(var_a()), list(var_a())], list(var_a()), StructureManipulating),
        sig("Width", vec![REGION], INT, PropertyRetrieving),
        sig(
            "Zip",
            vec![list(var_a()), list(var_b())],
            list(pair(var_a(), var_b())),
            DataComposing,
        ),
    ]
});

/// The full builtin signature table, in canonical (table) order.
pub fn op_table() -> &'static [OpSignature] {
    &OP_TABLE
}

pub fn op(id: OpId) -> &'static OpSignature {
    &OP_TABLE[id]
}

pub fn op_by_name(name: &str) -> Option<(OpId, &'static OpSignature)> {
    OP_TABLE.iter().enumerate().find(|(_, s)| s.name == name)
}

/// Machine-readable listing of the signature table, one op per line:
/// `name <TAB> (param, ...) <TAB> ret`.
pub fn export_table() -> String {
    let mut out = String::new();
    for sig in op_table() {
        let params: Vec<String> = sig.params.iter().map(TypeExpr::canon_string).collect();
        out.push_str(&format!(
            "{}\t({})\t{}\n",
            sig.name,
            params.join(", "),
            sig.ret.canon_string()
        ));
    }
    out
}

/// Returns a copy of `sig` with every type variable replaced by a fresh id
/// drawn from `fresh`. Repeated instantiations never alias.
pub fn instantiate(sig: &OpSignature, fresh: &mut VarId) -> OpSignature {
    let mut mapping: HashMap<VarId, VarId> = HashMap::new();
    let mut rename = |t: &TypeExpr| rename_vars(t, &mut mapping, fresh);
    OpSignature {
        name: sig.name,
        params: sig.params.iter().map(&mut rename).collect(),
        ret: rename(&sig.ret),
        category: sig.category,
    }
}

fn rename_vars(t: &TypeExpr, mapping: &mut HashMap<VarId, VarId>, fresh: &mut VarId) -> TypeExpr {
    match t {
        TypeExpr::Var(id, c) => {
            let new = *mapping.entry(*id).or_insert_with(|| {
                let v = *fresh;
                *fresh += 1;
                v
            });
            TypeExpr::Var(new, *c)
        }
        TypeExpr::Concrete(c) => TypeExpr::Concrete(*c),
        TypeExpr::List(x) => list(rename_vars(x, mapping, fresh)),
        TypeExpr::Pair(a, b) => pair(
            rename_vars(a, mapping, fresh),
            rename_vars(b, mapping, fresh),
        ),
        TypeExpr::Function(a, b) => func(
            rename_vars(a, mapping, fresh),
            rename_vars(b, mapping, fresh),
        ),
        TypeExpr::Union(ms) => {
            TypeExpr::Union(ms.iter().map(|m| rename_vars(m, mapping, fresh)).collect())
        }
    }
}

/// When an operation's return type contains a union, generation commits to
/// one member up front so the resulting tree stays monomorphic. The commit
/// substitutes the member for the union throughout the signature, which
/// keeps linked occurrences (as in a `T -> T` shape) consistent.
fn ret_union_branches(sig: &OpSignature) -> Vec<OpSignature> {
    fn find_union(t: &TypeExpr) -> Option<&TypeExpr> {
        match t {
            TypeExpr::Union(_) => Some(t),
            TypeExpr::List(x) => find_union(x),
            TypeExpr::Pair(a, b) | TypeExpr::Function(a, b) => {
                find_union(a).or_else(|| find_union(b))
            }
            _ => None,
        }
    }
    fn replace(t: &TypeExpr, target: &TypeExpr, with: &TypeExpr) -> TypeExpr {
        if t == target {
            return with.clone();
        }
        match t {
            TypeExpr::List(x) => list(replace(x, target, with)),
            TypeExpr::Pair(a, b) => pair(replace(a, target, with), replace(b, target, with)),
            TypeExpr::Function(a, b) => func(replace(a, target, with), replace(b, target, with)),
            other => other.clone(),
        }
    }
    let Some(u) = find_union(&sig.ret) else {
        return vec![sig.clone()];
    };
    let u = u.clone();
    let TypeExpr::Union(members) = &u else {
        unreachable!()
    };
    members
        .iter()
        .map(|m| OpSignature {
            name: sig.name,
            params: sig.params.iter().map(|p| replace(p, &u, m)).collect(),
            ret: replace(&sig.ret, &u, m),
            category: sig.category,
        })
        .collect()
}

/// What fills a hole: an operation (with a committed return-union branch,
/// if any) or a workspace symbol.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Pick {
    Op { id: OpId, branch: Option<usize> },
    Symbol(SymbolName),
}

impl fmt::Display for Pick {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Pick::Op { id, branch: None } => f.write_str(op(*id).name),
            Pick::Op {
                id,
                branch: Some(b),
            } => write!(f, "{}#{}", op(*id).name, b),
            Pick::Symbol(k) => write!(f, "${}", k.name()),
        }
    }
}

/// One admissible filling for a typed hole, with the substitution extended
/// by unifying its type against the goal.
#[derive(Clone, Debug)]
pub struct Candidate {
    pub pick: Pick,
    /// Instantiated parameter types (empty for symbols).
    pub params: Vec<TypeExpr>,
    pub ret: TypeExpr,
    pub subst: Substitution,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("no candidate produces type {goal}")]
pub struct NoCandidates {
    pub goal: String,
}

/// Every operation whose instantiated return type unifies with `goal` and
/// every symbol whose type does, in deterministic order: operations in
/// table order (union branches adjacent), then symbols in key order.
pub fn candidates_for(
    goal: &TypeExpr,
    s: &Substitution,
    symbols: &[(SymbolName, TypeExpr)],
    fresh: &mut VarId,
) -> Result<Vec<Candidate>, NoCandidates> {
    let mut out = Vec::new();
    for (id, sig) in op_table().iter().enumerate() {
        let branches = ret_union_branches(sig);
        let branched = branches.len() > 1;
        for (bi, bsig) in branches.iter().enumerate() {
            let inst = instantiate(bsig, fresh);
            let mut trial = s.clone();
            if unify(&inst.ret, goal, &mut trial).is_ok() {
                out.push(Candidate {
                    pick: Pick::Op {
                        id,
                        branch: branched.then_some(bi),
                    },
                    params: inst.params,
                    ret: inst.ret,
                    subst: trial,
                });
            }
        }
    }
    for (key, ty) in symbols {
        let mut trial = s.clone();
        if unify(ty, goal, &mut trial).is_ok() {
            out.push(Candidate {
                pick: Pick::Symbol(*key),
                params: Vec::new(),
                ret: ty.clone(),
                subst: trial,
            });
        }
    }
    if out.is_empty() {
        Err(NoCandidates {
            goal: s.resolve(goal).canon_string(),
        })
    } else {
        Ok(out)
    }
}
