//! Typed expression trees.
//!
//! A [`Program`] is a pure expression tree: operation calls over workspace
//! symbols and constants, with subprogram arguments for the higher-order
//! operations. Each nesting level is its own unit and must independently
//! respect the node, depth, and nesting limits.

use thiserror::Error;

use crate::types::{OpId, TypeExpr};
use crate::workspace::SymbolName;

/// Structural limits on generated programs, applied per (sub)program unit,
/// plus the evaluator's step budget.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GenLimits {
    pub max_nodes: usize,
    pub max_depth: usize,
    pub max_nesting: usize,
    pub step_budget: u64,
    pub backtracks: usize,
}

impl Default for GenLimits {
    fn default() -> GenLimits {
        GenLimits {
            max_nodes: 64,
            max_depth: 8,
            max_nesting: 2,
            step_budget: 1_000_000,
            backtracks: 32,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AstNode {
    /// Operation call; `ty` is the resolved (ground) return type.
    Op {
        id: OpId,
        args: Vec<AstNode>,
        ty: TypeExpr,
    },
    /// Workspace symbol leaf.
    Symbol { key: SymbolName, ty: TypeExpr },
    /// Function-typed argument of a higher-order operation. The body is a
    /// separate program unit; `FunctionalInput` leaves inside it take
    /// `input_ty`.
    Subprogram {
        body: Box<AstNode>,
        input_ty: TypeExpr,
        ret_ty: TypeExpr,
    },
}

impl AstNode {
    pub fn op(id: OpId, args: Vec<AstNode>, ty: TypeExpr) -> AstNode {
        AstNode::Op { id, args, ty }
    }

    pub fn symbol(key: SymbolName, ty: TypeExpr) -> AstNode {
        AstNode::Symbol { key, ty }
    }

    pub fn subprogram(body: AstNode, input_ty: TypeExpr, ret_ty: TypeExpr) -> AstNode {
        AstNode::Subprogram {
            body: Box::new(body),
            input_ty,
            ret_ty,
        }
    }

    /// Resolved type of the expression this node produces. For subprogram
    /// nodes this is the function type.
    pub fn ty(&self) -> TypeExpr {
        match self {
            AstNode::Op { ty, .. } | AstNode::Symbol { ty, .. } => ty.clone(),
            AstNode::Subprogram {
                input_ty, ret_ty, ..
            } => crate::types::func(input_ty.clone(), ret_ty.clone()),
        }
    }

    pub fn args(&self) -> &[AstNode] {
        match self {
            AstNode::Op { args, .. } => args,
            _ => &[],
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ProgramError {
    #[error("program unit at nesting {nesting} has {count} nodes (limit {max})")]
    TooManyNodes {
        nesting: usize,
        count: usize,
        max: usize,
    },
    #[error("program unit at nesting {nesting} has depth {depth} (limit {max})")]
    TooDeep {
        nesting: usize,
        depth: usize,
        max: usize,
    },
    #[error("subprograms nest {nesting} deep (limit {max})")]
    TooNested { nesting: usize, max: usize },
    #[error("top-level program returns {ty}, expected Region")]
    RootNotRegion { ty: String },
}

/// Size and depth of one program unit; subprogram bodies are counted in
/// their own units, the wrapper node in the parent's.
fn unit_stats(node: &AstNode, depth: usize) -> (usize, usize) {
    match node {
        AstNode::Symbol { .. } | AstNode::Subprogram { .. } => (1, depth),
        AstNode::Op { args, .. } => {
            let mut count = 1;
            let mut max_depth = depth;
            for arg in args {
                let (c, d) = unit_stats(arg, depth + 1);
                count += c;
                max_depth = max_depth.max(d);
            }
            (count, max_depth)
        }
    }
}

fn collect_subprograms<'a>(node: &'a AstNode, out: &mut Vec<&'a AstNode>) {
    match node {
        AstNode::Op { args, .. } => args.iter().for_each(|a| collect_subprograms(a, out)),
        AstNode::Subprogram { body, .. } => out.push(body),
        AstNode::Symbol { .. } => {}
    }
}

/// A validated program. `node_count` and `depth` describe the top unit;
/// `nesting` is the deepest subprogram level anywhere in the tree.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Program {
    root: AstNode,
    node_count: usize,
    depth: usize,
    nesting: usize,
}

impl Program {
    /// Validates the Region root contract and the structural limits for
    /// every unit, and records the stats.
    pub fn new(root: AstNode, limits: &GenLimits) -> Result<Program, ProgramError> {
        if root.ty() != crate::types::REGION {
            return Err(ProgramError::RootNotRegion {
                ty: root.ty().canon_string(),
            });
        }
        let mut node_count = 0;
        let mut depth = 0;
        let mut nesting = 0;

        let mut frontier = vec![(&root, 0usize)];
        while let Some((unit_root, level)) = frontier.pop() {
            if level > limits.max_nesting {
                return Err(ProgramError::TooNested {
                    nesting: level,
                    max: limits.max_nesting,
                });
            }
            let (count, d) = unit_stats(unit_root, 1);
            if count > limits.max_nodes {
                return Err(ProgramError::TooManyNodes {
                    nesting: level,
                    count,
                    max: limits.max_nodes,
                });
            }
            if d > limits.max_depth {
                return Err(ProgramError::TooDeep {
                    nesting: level,
                    depth: d,
                    max: limits.max_depth,
                });
            }
            if level == 0 {
                node_count = count;
                depth = d;
            }
            nesting = nesting.max(level);
            let mut subs = Vec::new();
            collect_subprograms(unit_root, &mut subs);
            frontier.extend(subs.into_iter().map(|b| (b, level + 1)));
        }

        Ok(Program {
            root,
            node_count,
            depth,
            nesting,
        })
    }

    pub fn root(&self) -> &AstNode {
        &self.root
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn nesting(&self) -> usize {
        self.nesting
    }

    pub fn return_type(&self) -> TypeExpr {
        self.root.ty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{self, op_by_name, REGION};

    fn scene() -> AstNode {
        AstNode::symbol(SymbolName::Scene, REGION)
    }

    fn paint_scene() -> AstNode {
        let (paint, _) = op_by_name("Paint").unwrap();
        AstNode::op(
            paint,
            vec![
                scene(),
                AstNode::symbol(
                    SymbolName::Color(crate::grid::Color::Red),
                    types::COLOR,
                ),
            ],
            REGION,
        )
    }

    #[test]
    fn stats_for_simple_tree() {
        let p = Program::new(paint_scene(), &GenLimits::default()).unwrap();
        assert_eq!(p.node_count(), 3);
        assert_eq!(p.depth(), 2);
        assert_eq!(p.nesting(), 0);
    }

    #[test]
    fn node_limit_is_enforced() {
        let limits = GenLimits {
            max_nodes: 2,
            ..GenLimits::default()
        };
        assert!(matches!(
            Program::new(paint_scene(), &limits),
            Err(ProgramError::TooManyNodes { count: 3, .. })
        ));
    }

    #[test]
    fn depth_limit_is_enforced() {
        let (flip, _) = op_by_name("Flip").unwrap();
        let mut node = scene();
        for _ in 0..8 {
            node = AstNode::op(
                flip,
                vec![
                    node,
                    AstNode::symbol(SymbolName::Horizontal, types::ORIENTATION),
                ],
                REGION,
            );
        }
        assert!(matches!(
            Program::new(node, &GenLimits::default()),
            Err(ProgramError::TooDeep { depth: 9, .. })
        ));
    }

    fn map_over_pixels(body: AstNode) -> AstNode {
        let (map, _) = op_by_name("Map").unwrap();
        let (pixels, _) = op_by_name("Pixels").unwrap();
        AstNode::op(
            map,
            vec![
                AstNode::op(pixels, vec![scene()], types::list(REGION)),
                AstNode::subprogram(body, REGION, REGION),
            ],
            types::list(REGION),
        )
    }

    fn head(node: AstNode) -> AstNode {
        let (head, _) = op_by_name("Head").unwrap();
        AstNode::op(head, vec![node], REGION)
    }

    #[test]
    fn subprogram_nodes_count_in_their_own_unit() {
        let tree = head(map_over_pixels(paint_scene()));
        let p = Program::new(tree, &GenLimits::default()).unwrap();
        // Head + Map + Pixels + Scene + wrapper = 5 nodes at the top; the
        // 3-node body lives in its own unit.
        assert_eq!(p.node_count(), 5);
        assert_eq!(p.nesting(), 1);
    }

    #[test]
    fn nesting_limit_is_enforced() {
        let mut body = scene();
        for _ in 0..3 {
            body = head(map_over_pixels(body));
        }
        assert!(matches!(
            Program::new(body, &GenLimits::default()),
            Err(ProgramError::TooNested { nesting: 3, .. })
        ));
    }

    #[test]
    fn non_region_root_is_rejected() {
        let node = AstNode::symbol(SymbolName::Zero, types::INT);
        assert!(matches!(
            Program::new(node, &GenLimits::default()),
            Err(ProgramError::RootNotRegion { .. })
        ));
    }
}
