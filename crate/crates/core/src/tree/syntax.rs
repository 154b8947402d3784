//! Arena-backed ordered labeled trees with byte spans.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};

/// Index of a node inside its tree's arena. Stable for the tree's lifetime.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize,
)]
pub struct NodeId(pub usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Half-open byte range into the source text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Span { start, end }
    }

    pub fn contains(&self, other: &Span) -> bool {
        self.start <= other.start && other.end <= self.end
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct NodeData {
    node_type: String,
    label: Option<String>,
    span: Span,
    parent: Option<NodeId>,
    children: Vec<NodeId>,
}

/// Structural problems detected by [`SyntaxTree::validate`].
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TreeError {
    #[error("node {0:?} has a child span escaping its parent span")]
    SpanNotNested(NodeId),
    #[error("node {0:?} has sibling spans out of order or overlapping")]
    SiblingOverlap(NodeId),
    #[error("node {child:?} disagrees with parent link of {parent:?}")]
    BrokenLink { parent: NodeId, child: NodeId },
}

/// An ordered tree of typed, optionally labeled nodes.
///
/// Node ids are arena indices; the root is always `NodeId(0)`. Trees are
/// immutable once built.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SyntaxTree {
    nodes: Vec<NodeData>,
}

impl SyntaxTree {
    pub fn root(&self) -> NodeId {
        NodeId(0)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node_type(&self, id: NodeId) -> &str {
        &self.nodes[id.0].node_type
    }

    pub fn label(&self, id: NodeId) -> Option<&str> {
        self.nodes[id.0].label.as_deref()
    }

    pub fn span(&self, id: NodeId) -> Span {
        self.nodes[id.0].span
    }

    pub fn parent(&self, id: NodeId) -> Option<NodeId> {
        self.nodes[id.0].parent
    }

    pub fn children(&self, id: NodeId) -> &[NodeId] {
        &self.nodes[id.0].children
    }

    pub fn is_leaf(&self, id: NodeId) -> bool {
        self.nodes[id.0].children.is_empty()
    }

    /// Index of `id` in its parent's child list; `None` for the root.
    pub fn child_index(&self, id: NodeId) -> Option<usize> {
        let parent = self.parent(id)?;
        self.children(parent).iter().position(|&c| c == id)
    }

    /// All node ids in preorder (root first).
    pub fn preorder(&self) -> Vec<NodeId> {
        let mut out = Vec::with_capacity(self.len());
        let mut stack = vec![self.root()];
        while let Some(id) = stack.pop() {
            out.push(id);
            for &child in self.children(id).iter().rev() {
                stack.push(child);
            }
        }
        out
    }

    /// All node ids in postorder (root last).
    pub fn postorder(&self) -> Vec<NodeId> {
        let mut out = Vec::with_capacity(self.len());
        self.postorder_into(self.root(), &mut out);
        out
    }

    fn postorder_into(&self, id: NodeId, out: &mut Vec<NodeId>) {
        for &child in self.children(id) {
            self.postorder_into(child, out);
        }
        out.push(id);
    }

    /// Nodes of the subtree rooted at `id`, in preorder, `id` included.
    pub fn subtree(&self, id: NodeId) -> Vec<NodeId> {
        let mut out = Vec::new();
        let mut stack = vec![id];
        while let Some(n) = stack.pop() {
            out.push(n);
            for &child in self.children(n).iter().rev() {
                stack.push(child);
            }
        }
        out
    }

    /// Number of nodes in the subtree rooted at `id`, `id` included.
    pub fn subtree_size(&self, id: NodeId) -> usize {
        let mut size = 0usize;
        let mut stack = vec![id];
        while let Some(n) = stack.pop() {
            size += 1;
            stack.extend_from_slice(self.children(n));
        }
        size
    }

    /// Height of the subtree at `id`; a leaf has height 1.
    pub fn height(&self, id: NodeId) -> usize {
        1 + self
            .children(id)
            .iter()
            .map(|&c| self.height(c))
            .max()
            .unwrap_or(0)
    }

    /// Checks parent links, span nesting, and sibling span ordering.
    pub fn validate(&self) -> Result<(), TreeError> {
        for (i, node) in self.nodes.iter().enumerate() {
            let id = NodeId(i);
            let mut prev_end: Option<usize> = None;
            for &child in &node.children {
                if self.parent(child) != Some(id) {
                    return Err(TreeError::BrokenLink { parent: id, child });
                }
                let cspan = self.span(child);
                if !node.span.contains(&cspan) {
                    return Err(TreeError::SpanNotNested(id));
                }
                if let Some(end) = prev_end {
                    if cspan.start < end {
                        return Err(TreeError::SiblingOverlap(id));
                    }
                }
                prev_end = Some(cspan.end);
            }
        }
        Ok(())
    }

    /// Structural equality on types, labels, and child order; spans ignored.
    pub fn isomorphic_to(&self, other: &SyntaxTree) -> bool {
        self.len() == other.len() && self.subtrees_isomorphic(self.root(), other, other.root())
    }

    /// Same check for a pair of subtrees, one from each tree.
    pub fn subtrees_isomorphic(&self, a: NodeId, other: &SyntaxTree, b: NodeId) -> bool {
        if self.node_type(a) != other.node_type(b)
            || self.label(a) != other.label(b)
            || self.children(a).len() != other.children(b).len()
        {
            return false;
        }
        self.children(a)
            .iter()
            .zip(other.children(b))
            .all(|(&x, &y)| self.subtrees_isomorphic(x, other, y))
    }

    /// Hash of the subtree's shape, types, and labels. Equal hashes are a
    /// cheap prefilter; callers confirm with [`Self::subtrees_isomorphic`].
    pub fn structure_hashes(&self) -> Vec<u64> {
        let mut hashes = vec![0u64; self.len()];
        for id in self.postorder() {
            let mut hasher = DefaultHasher::new();
            self.node_type(id).hash(&mut hasher);
            self.label(id).hash(&mut hasher);
            self.children(id).len().hash(&mut hasher);
            for &child in self.children(id) {
                hashes[child.0].hash(&mut hasher);
            }
            hashes[id.0] = hasher.finish();
        }
        hashes
    }
}

/// Incremental construction of a [`SyntaxTree`].
///
/// Spans may be supplied per node (parsers do) or left out entirely, in
/// which case [`TreeBuilder::build`] synthesizes nested spans from leaf
/// positions so the tree still validates.
pub struct TreeBuilder {
    nodes: Vec<NodeData>,
    explicit_spans: bool,
}

impl TreeBuilder {
    /// Starts a tree whose root has the given type and no label.
    pub fn new(root_type: impl Into<String>) -> Self {
        TreeBuilder {
            nodes: vec![NodeData {
                node_type: root_type.into(),
                label: None,
                span: Span::new(0, 0),
                parent: None,
                children: Vec::new(),
            }],
            explicit_spans: false,
        }
    }

    pub fn root(&self) -> NodeId {
        NodeId(0)
    }

    /// Appends a child under `parent`; returns its id.
    pub fn push(
        &mut self,
        parent: NodeId,
        node_type: impl Into<String>,
        label: Option<String>,
    ) -> NodeId {
        let id = NodeId(self.nodes.len());
        self.nodes.push(NodeData {
            node_type: node_type.into(),
            label,
            span: Span::new(0, 0),
            parent: Some(parent),
            children: Vec::new(),
        });
        self.nodes[parent.0].children.push(id);
        id
    }

    /// Sets an explicit byte span. Once any span is set explicitly, `build`
    /// no longer synthesizes spans and trusts the parser's values (nodes the
    /// parser skipped keep their parent-supplied span).
    pub fn set_span(&mut self, id: NodeId, span: Span) {
        self.nodes[id.0].span = span;
        self.explicit_spans = true;
    }

    pub fn set_label(&mut self, id: NodeId, label: Option<String>) {
        self.nodes[id.0].label = label;
    }

    pub fn build(mut self) -> SyntaxTree {
        if !self.explicit_spans {
            self.synthesize_spans();
        }
        SyntaxTree { nodes: self.nodes }
    }

    /// Gives every leaf a width-one slot in left-to-right order and every
    /// inner node the hull of its children, keeping spans nested and
    /// siblings ordered.
    fn synthesize_spans(&mut self) {
        let mut next = 0usize;
        self.assign_span(NodeId(0), &mut next);
    }

    fn assign_span(&mut self, id: NodeId, next: &mut usize) -> Span {
        let children = self.nodes[id.0].children.clone();
        let span = if children.is_empty() {
            let s = Span::new(*next, *next + 1);
            *next += 1;
            s
        } else {
            let mut start = usize::MAX;
            let mut end = 0usize;
            for child in children {
                let cs = self.assign_span(child, next);
                start = start.min(cs.start);
                end = end.max(cs.end);
            }
            Span::new(start, end)
        };
        self.nodes[id.0].span = span;
        span
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> SyntaxTree {
        let mut b = TreeBuilder::new("translation_unit");
        let f = b.push(b.root(), "function_definition", Some("main".into()));
        let body = b.push(f, "compound_statement", None);
        b.push(body, "return_statement", None);
        b.push(body, "expression_statement", None);
        b.build()
    }

    #[test]
    fn traversals_cover_all_nodes() {
        let t = sample();
        assert_eq!(t.len(), 5);
        assert_eq!(t.preorder().len(), 5);
        assert_eq!(t.postorder().len(), 5);
        assert_eq!(t.preorder()[0], t.root());
        assert_eq!(*t.postorder().last().unwrap(), t.root());
    }

    #[test]
    fn synthesized_spans_validate() {
        let t = sample();
        t.validate().unwrap();
        let root_span = t.span(t.root());
        assert_eq!(root_span, Span::new(0, 2));
    }

    #[test]
    fn heights_and_sizes() {
        let t = sample();
        assert_eq!(t.height(t.root()), 4);
        assert_eq!(t.subtree_size(t.root()), 5);
        let f = t.children(t.root())[0];
        assert_eq!(t.subtree_size(f), 4);
        assert_eq!(t.height(f), 3);
    }

    #[test]
    fn isomorphism_ignores_spans_but_not_labels() {
        let a = sample();
        let b = sample();
        assert!(a.isomorphic_to(&b));

        let mut c = TreeBuilder::new("translation_unit");
        let f = c.push(c.root(), "function_definition", Some("other".into()));
        let body = c.push(f, "compound_statement", None);
        c.push(body, "return_statement", None);
        c.push(body, "expression_statement", None);
        let c = c.build();
        assert!(!a.isomorphic_to(&c));
    }

    #[test]
    fn structure_hash_matches_isomorphic_subtrees() {
        let a = sample();
        let b = sample();
        let ha = a.structure_hashes();
        let hb = b.structure_hashes();
        assert_eq!(ha[a.root().0], hb[b.root().0]);
    }

    #[test]
    fn validate_rejects_overlapping_siblings() {
        let mut b = TreeBuilder::new("translation_unit");
        let x = b.push(b.root(), "declaration", None);
        let y = b.push(b.root(), "declaration", None);
        b.set_span(b.root(), Span::new(0, 10));
        b.set_span(x, Span::new(0, 6));
        b.set_span(y, Span::new(5, 10));
        let t = b.build();
        assert_eq!(t.validate(), Err(TreeError::SiblingOverlap(NodeId(0))));
    }
}
