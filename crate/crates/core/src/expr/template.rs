use serde::{Deserialize, Serialize};

use super::ops::Operator;
use crate::error::{Error, Result};

/// Kind of operator a template slot accepts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SlotKind {
    Unary,
    Binary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum NodeShape {
    /// Unary node; `None` means the node reads the input state directly.
    Unary {
        child: Option<usize>,
    },
    Binary {
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct TemplateNode {
    pub shape: NodeShape,
    /// Index into the operator sequence.
    pub slot: usize,
    /// Index among unary slots, used to locate the node's affine parameters.
    pub unary_index: usize,
}

/// Shape of a binary expression tree.
///
/// Nodes are stored in post-order so every child precedes its parent and the root
/// is last. Operator slots are numbered unary nodes first (in post-order), then
/// binary nodes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeTemplate {
    depth: u32,
    nodes: Vec<TemplateNode>,
    slots: Vec<SlotKind>,
}

impl TreeTemplate {
    /// Builds the tree of the given depth: a single unary node at depth 1, a binary
    /// node over two depth-1 trees at depth 2, and a unary node over that at depth 3.
    pub fn new(depth: u32) -> Result<Self> {
        if !(1..=3).contains(&depth) {
            return Err(Error::config(format!(
                "unsupported tree depth {depth}; expected 1, 2 or 3"
            )));
        }
        let mut shapes = Vec::new();
        build(depth, &mut shapes);

        let unary: Vec<usize> = (0..shapes.len())
            .filter(|&i| matches!(shapes[i], NodeShape::Unary { .. }))
            .collect();
        let binary: Vec<usize> = (0..shapes.len())
            .filter(|&i| matches!(shapes[i], NodeShape::Binary { .. }))
            .collect();

        let mut nodes: Vec<TemplateNode> = shapes
            .iter()
            .map(|&shape| TemplateNode {
                shape,
                slot: 0,
                unary_index: usize::MAX,
            })
            .collect();
        let mut slots = Vec::with_capacity(nodes.len());
        for (k, &i) in unary.iter().enumerate() {
            nodes[i].slot = slots.len();
            nodes[i].unary_index = k;
            slots.push(SlotKind::Unary);
        }
        for &i in &binary {
            nodes[i].slot = slots.len();
            slots.push(SlotKind::Binary);
        }
        Ok(TreeTemplate {
            depth,
            nodes,
            slots,
        })
    }

    /// Parses the compact shape string used in expression files.
    pub fn from_shape(shape: &str) -> Result<Self> {
        let depth = match shape {
            "u" => 1,
            "b(u,u)" => 2,
            "u(b(u,u))" => 3,
            other => return Err(Error::Parse(format!("unknown template `{other}`"))),
        };
        TreeTemplate::new(depth)
    }

    pub fn shape(&self) -> &'static str {
        match self.depth {
            1 => "u",
            2 => "b(u,u)",
            _ => "u(b(u,u))",
        }
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn slots(&self) -> &[SlotKind] {
        &self.slots
    }

    pub fn slot_count(&self) -> usize {
        self.slots.len()
    }

    pub fn unary_count(&self) -> usize {
        self.slots.iter().filter(|s| **s == SlotKind::Unary).count()
    }

    pub fn binary_count(&self) -> usize {
        self.slot_count() - self.unary_count()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub(crate) fn nodes(&self) -> &[TemplateNode] {
        &self.nodes
    }

    /// Number of trainable parameters for an input of dimension `dim`.
    pub fn param_count(&self, dim: usize) -> usize {
        3 * self.unary_count() + dim + 1
    }
}

fn build(depth: u32, shapes: &mut Vec<NodeShape>) -> usize {
    let shape = if depth == 1 {
        NodeShape::Unary { child: None }
    } else if depth % 2 == 0 {
        let left = build(depth - 1, shapes);
        let right = build(depth - 1, shapes);
        NodeShape::Binary { left, right }
    } else {
        let child = build(depth - 1, shapes);
        NodeShape::Unary { child: Some(child) }
    };
    shapes.push(shape);
    shapes.len() - 1
}

/// One operator per template slot, each matching its slot's arity.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct OperatorSequence(Vec<Operator>);

impl OperatorSequence {
    pub fn new(template: &TreeTemplate, ops: Vec<Operator>) -> Result<Self> {
        if ops.len() != template.slot_count() {
            return Err(Error::Shape {
                expected: template.slot_count(),
                actual: ops.len(),
            });
        }
        for (i, (op, slot)) in ops.iter().zip(template.slots()).enumerate() {
            let ok = match slot {
                SlotKind::Unary => op.is_unary(),
                SlotKind::Binary => !op.is_unary(),
            };
            if !ok {
                return Err(Error::config(format!(
                    "operator `{op}` does not fit {slot:?} slot {i}"
                )));
            }
        }
        Ok(OperatorSequence(ops))
    }

    pub fn ops(&self) -> &[Operator] {
        &self.0
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.0.iter().map(|o| o.name()).collect()
    }
}

impl std::fmt::Display for OperatorSequence {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "[{}]", self.names().join(","))
    }
}
