//! Edit script generation between two matched trees.
//!
//! Produces the classic ordered-tree script: walk the after tree breadth
//! first, inserting unmatched nodes, relabeling and moving matched ones,
//! realigning mismatched sibling orders, then deleting the leftovers
//! leaf-first. Generation simulates each action on a working copy so every
//! emitted position is valid at its point in the script.

use std::collections::{HashMap, VecDeque};

use serde::ser::SerializeMap;
use serde::{Serialize, Serializer};

use super::matching::TreeMapping;
use super::syntax::{NodeId, SyntaxTree};
use crate::seq::lcs_pairs;

/// Handle of a node in the working tree an edit script runs over. Handles
/// below the before-tree length denote original nodes; higher ones denote
/// nodes created by inserts.
pub type WorkHandle = usize;

/// One step of an edit script.
///
/// Positions are child indices valid at the moment the action applies,
/// assuming all preceding actions were applied. A missing `parent` on an
/// insert means the node enters at the top level (it will be the new root
/// once the old one is deleted).
#[derive(Debug, Clone, PartialEq)]
pub enum EditAction {
    Insert {
        node: WorkHandle,
        node_type: String,
        label: Option<String>,
        parent: Option<WorkHandle>,
        parent_type: Option<String>,
        position: usize,
    },
    Delete {
        node: WorkHandle,
        node_type: String,
        label: Option<String>,
    },
    Update {
        node: WorkHandle,
        node_type: String,
        old_label: Option<String>,
        new_label: Option<String>,
    },
    Move {
        node: WorkHandle,
        node_type: String,
        parent: WorkHandle,
        parent_type: String,
        position: usize,
    },
}

impl EditAction {
    pub fn kind(&self) -> &'static str {
        match self {
            EditAction::Insert { .. } => "insert",
            EditAction::Delete { .. } => "delete",
            EditAction::Update { .. } => "update",
            EditAction::Move { .. } => "move",
        }
    }

    pub fn node_type(&self) -> &str {
        match self {
            EditAction::Insert { node_type, .. }
            | EditAction::Delete { node_type, .. }
            | EditAction::Update { node_type, .. }
            | EditAction::Move { node_type, .. } => node_type,
        }
    }
}

impl Serialize for EditAction {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(None)?;
        map.serialize_entry("kind", self.kind())?;
        map.serialize_entry("node_type", self.node_type())?;
        match self {
            EditAction::Insert {
                label,
                parent_type,
                position,
                ..
            } => {
                if let Some(l) = label {
                    map.serialize_entry("label", l)?;
                }
                if let Some(p) = parent_type {
                    map.serialize_entry("parent_type", p)?;
                }
                map.serialize_entry("position", position)?;
            }
            EditAction::Delete { label, .. } => {
                if let Some(l) = label {
                    map.serialize_entry("label", l)?;
                }
            }
            EditAction::Update { new_label, .. } => {
                map.serialize_entry("label", new_label)?;
            }
            EditAction::Move {
                parent_type,
                position,
                ..
            } => {
                map.serialize_entry("parent_type", parent_type)?;
                map.serialize_entry("position", position)?;
            }
        }
        map.end()
    }
}

/// An ordered list of edit actions turning one tree into another.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct EditScript {
    pub actions: Vec<EditAction>,
}

impl EditScript {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, EditAction> {
        self.actions.iter()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ScriptError {
    #[error("mapping is not a valid one-to-one node correspondence: {0}")]
    InconsistentMapping(String),
}

// Working tree the generator simulates on. Nodes with parent None hang off
// a virtual super-root, so scripts that replace the root stay expressible.
struct Sim {
    node_type: Vec<String>,
    label: Vec<Option<String>>,
    parent: Vec<Option<Option<WorkHandle>>>, // outer None = detached/deleted
    children: Vec<Vec<WorkHandle>>,
    top: Vec<WorkHandle>,
}

impl Sim {
    fn from_tree(tree: &SyntaxTree) -> Self {
        let n = tree.len();
        let mut sim = Sim {
            node_type: Vec::with_capacity(n),
            label: Vec::with_capacity(n),
            parent: vec![None; n],
            children: vec![Vec::new(); n],
            top: Vec::new(),
        };
        for i in 0..n {
            let id = NodeId(i);
            sim.node_type.push(tree.node_type(id).to_string());
            sim.label.push(tree.label(id).map(str::to_string));
            sim.children[i] = tree.children(id).iter().map(|c| c.index()).collect();
            sim.parent[i] = Some(tree.parent(id).map(|p| p.index()));
        }
        sim.top.push(tree.root().index());
        sim
    }

    fn new_node(&mut self, node_type: String, label: Option<String>) -> WorkHandle {
        self.node_type.push(node_type);
        self.label.push(label);
        self.parent.push(None);
        self.children.push(Vec::new());
        self.node_type.len() - 1
    }

    fn siblings_mut(&mut self, parent: Option<WorkHandle>) -> &mut Vec<WorkHandle> {
        match parent {
            Some(p) => &mut self.children[p],
            None => &mut self.top,
        }
    }

    fn attach(&mut self, node: WorkHandle, parent: Option<WorkHandle>, position: usize) {
        let sibs = self.siblings_mut(parent);
        let pos = position.min(sibs.len());
        sibs.insert(pos, node);
        self.parent[node] = Some(parent);
    }

    fn detach(&mut self, node: WorkHandle) {
        if let Some(parent) = self.parent[node] {
            let sibs = self.siblings_mut(parent);
            if let Some(idx) = sibs.iter().position(|&c| c == node) {
                sibs.remove(idx);
            }
        }
        self.parent[node] = None;
    }

    fn index_in_parent(&self, node: WorkHandle) -> usize {
        let parent = self.parent[node].expect("node is attached");
        let sibs = match parent {
            Some(p) => &self.children[p],
            None => &self.top,
        };
        sibs.iter().position(|&c| c == node).expect("child link")
    }
}

fn validate_mapping(
    before: &SyntaxTree,
    after: &SyntaxTree,
    mapping: &TreeMapping,
) -> Result<(), ScriptError> {
    for (b, a) in mapping.pairs() {
        if b.index() >= before.len() || a.index() >= after.len() {
            return Err(ScriptError::InconsistentMapping(format!(
                "pair ({}, {}) is out of range",
                b.index(),
                a.index()
            )));
        }
        if before.node_type(b) != after.node_type(a) {
            return Err(ScriptError::InconsistentMapping(format!(
                "pair ({}, {}) connects node types {} and {}",
                b.index(),
                a.index(),
                before.node_type(b),
                after.node_type(a)
            )));
        }
    }
    if let Some(a) = mapping.after_of(before.root()) {
        if a != after.root() {
            return Err(ScriptError::InconsistentMapping(
                "before root is mapped below the after root".into(),
            ));
        }
    }
    if let Some(b) = mapping.before_of(after.root()) {
        if b != before.root() {
            return Err(ScriptError::InconsistentMapping(
                "after root is mapped below the before root".into(),
            ));
        }
    }
    Ok(())
}

/// Generates the edit script taking `before` to `after` under `mapping`.
pub fn edit_script(
    before: &SyntaxTree,
    after: &SyntaxTree,
    mapping: &TreeMapping,
) -> Result<EditScript, ScriptError> {
    validate_mapping(before, after, mapping)?;

    let mut sim = Sim::from_tree(before);
    let mut actions = Vec::new();

    // Partner maps between after nodes and working handles, live-updated as
    // inserts materialize new nodes.
    let mut w_of_a: HashMap<NodeId, WorkHandle> = HashMap::new();
    let mut a_of_w: HashMap<WorkHandle, NodeId> = HashMap::new();
    for (b, a) in mapping.pairs() {
        w_of_a.insert(a, b.index());
        a_of_w.insert(b.index(), a);
    }

    let mut src_in_order: Vec<bool> = vec![false; sim.node_type.len()];
    let mut dst_in_order: Vec<bool> = vec![false; after.len()];

    let find_pos = |x: NodeId,
                    after: &SyntaxTree,
                    dst_in_order: &[bool],
                    w_of_a: &HashMap<NodeId, WorkHandle>,
                    sim: &Sim|
     -> usize {
        let Some(y) = after.parent(x) else { return 0 };
        let siblings = after.children(y);
        for &c in siblings {
            if dst_in_order[c.index()] {
                if c == x {
                    return 0;
                }
                break;
            }
        }
        let mut v: Option<NodeId> = None;
        for &c in siblings {
            if c == x {
                break;
            }
            if dst_in_order[c.index()] {
                v = Some(c);
            }
        }
        let Some(v) = v else { return 0 };
        let u = w_of_a[&v];
        sim.index_in_parent(u) + 1
    };

    let mut queue: VecDeque<NodeId> = VecDeque::new();
    queue.push_back(after.root());
    while let Some(x) = queue.pop_front() {
        for &c in after.children(x) {
            queue.push_back(c);
        }
        let y = after.parent(x);
        let w = match w_of_a.get(&x).copied() {
            None => {
                let k = find_pos(x, after, &dst_in_order, &w_of_a, &sim);
                let parent = y.map(|yy| w_of_a[&yy]);
                let node_type = after.node_type(x).to_string();
                let label = after.label(x).map(str::to_string);
                let w = sim.new_node(node_type.clone(), label.clone());
                src_in_order.push(false);
                sim.attach(w, parent, k);
                actions.push(EditAction::Insert {
                    node: w,
                    node_type,
                    label,
                    parent,
                    parent_type: parent.map(|p| sim.node_type[p].clone()),
                    position: k,
                });
                w_of_a.insert(x, w);
                a_of_w.insert(w, x);
                w
            }
            Some(w) => {
                let new_label = after.label(x).map(str::to_string);
                if sim.label[w] != new_label {
                    actions.push(EditAction::Update {
                        node: w,
                        node_type: sim.node_type[w].clone(),
                        old_label: sim.label[w].clone(),
                        new_label: new_label.clone(),
                    });
                    sim.label[w] = new_label;
                }
                if let Some(yy) = y {
                    let z = w_of_a[&yy];
                    if sim.parent[w] != Some(Some(z)) {
                        // Detach before computing the position so moves
                        // within one parent do not count the node itself.
                        sim.detach(w);
                        let k = find_pos(x, after, &dst_in_order, &w_of_a, &sim);
                        actions.push(EditAction::Move {
                            node: w,
                            node_type: sim.node_type[w].clone(),
                            parent: z,
                            parent_type: sim.node_type[z].clone(),
                            position: k,
                        });
                        sim.attach(w, Some(z), k);
                    }
                }
                w
            }
        };
        src_in_order[w] = true;
        dst_in_order[x.index()] = true;

        // Align children of w with children of x.
        let w_children = sim.children[w].clone();
        let x_children = after.children(x).to_vec();
        for &c in &w_children {
            src_in_order[c] = false;
        }
        for &d in &x_children {
            dst_in_order[d.index()] = false;
        }
        let s1: Vec<WorkHandle> = w_children
            .iter()
            .copied()
            .filter(|&c| {
                a_of_w
                    .get(&c)
                    .is_some_and(|a| after.parent(*a) == Some(x))
            })
            .collect();
        let s2: Vec<NodeId> = x_children
            .iter()
            .copied()
            .filter(|d| {
                w_of_a
                    .get(d)
                    .is_some_and(|&wd| sim.parent[wd] == Some(Some(w)))
            })
            .collect();
        let s1_as_after: Vec<NodeId> = s1.iter().map(|&c| a_of_w[&c]).collect();
        let lcs = lcs_pairs(&s1_as_after, &s2);
        let mut in_lcs_s2 = vec![false; s2.len()];
        for &(i, j) in &lcs {
            src_in_order[s1[i]] = true;
            dst_in_order[s2[j].index()] = true;
            in_lcs_s2[j] = true;
        }
        for (j, &d) in s2.iter().enumerate() {
            if in_lcs_s2[j] {
                continue;
            }
            let c = w_of_a[&d];
            if !s1.contains(&c) {
                continue;
            }
            sim.detach(c);
            let k = find_pos(d, after, &dst_in_order, &w_of_a, &sim);
            actions.push(EditAction::Move {
                node: c,
                node_type: sim.node_type[c].clone(),
                parent: w,
                parent_type: sim.node_type[w].clone(),
                position: k,
            });
            sim.attach(c, Some(w), k);
            src_in_order[c] = true;
            dst_in_order[d.index()] = true;
        }
    }

    // Delete unmatched before nodes, children before parents.
    for b in before.postorder() {
        if mapping.after_of(b).is_none() {
            let w = b.index();
            debug_assert!(sim.children[w].is_empty(), "delete of non-leaf node");
            actions.push(EditAction::Delete {
                node: w,
                node_type: sim.node_type[w].clone(),
                label: sim.label[w].clone(),
            });
            sim.detach(w);
        }
    }

    Ok(EditScript { actions })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::clike::CLikeGrammar;
    use crate::tree::matching::match_trees;
    use crate::tree::syntax::TreeBuilder;
    use crate::tree::GrammarAdapter;

    // Independent interpreter used to check scripts really transform the
    // tree. Mirrors the documented action semantics, not the generator.
    struct Replay {
        node_type: Vec<String>,
        label: Vec<Option<String>>,
        children: Vec<Vec<usize>>,
        parent: Vec<Option<Option<usize>>>,
        top: Vec<usize>,
    }

    impl Replay {
        fn start(before: &SyntaxTree) -> Self {
            let n = before.len();
            let mut r = Replay {
                node_type: (0..n)
                    .map(|i| before.node_type(NodeId(i)).to_string())
                    .collect(),
                label: (0..n)
                    .map(|i| before.label(NodeId(i)).map(str::to_string))
                    .collect(),
                children: (0..n)
                    .map(|i| {
                        before
                            .children(NodeId(i))
                            .iter()
                            .map(|c| c.index())
                            .collect()
                    })
                    .collect(),
                parent: (0..n)
                    .map(|i| Some(before.parent(NodeId(i)).map(|p| p.index())))
                    .collect(),
                top: vec![before.root().index()],
            };
            r.parent[before.root().index()] = Some(None);
            r
        }

        fn sibs(&mut self, parent: Option<usize>) -> &mut Vec<usize> {
            match parent {
                Some(p) => &mut self.children[p],
                None => &mut self.top,
            }
        }

        fn unlink(&mut self, node: usize) {
            let parent = self.parent[node].expect("attached");
            let sibs = self.sibs(parent);
            let i = sibs.iter().position(|&c| c == node).expect("linked");
            sibs.remove(i);
            self.parent[node] = None;
        }

        fn apply(&mut self, action: &EditAction) {
            match action {
                EditAction::Insert {
                    node,
                    node_type,
                    label,
                    parent,
                    position,
                    ..
                } => {
                    while self.node_type.len() <= *node {
                        self.node_type.push(String::new());
                        self.label.push(None);
                        self.children.push(Vec::new());
                        self.parent.push(None);
                    }
                    self.node_type[*node] = node_type.clone();
                    self.label[*node] = label.clone();
                    self.children[*node].clear();
                    let sibs = self.sibs(*parent);
                    assert!(*position <= sibs.len(), "insert position out of range");
                    sibs.insert(*position, *node);
                    self.parent[*node] = Some(*parent);
                }
                EditAction::Delete { node, .. } => {
                    assert!(self.children[*node].is_empty(), "delete of non-leaf");
                    self.unlink(*node);
                }
                EditAction::Update { node, new_label, .. } => {
                    self.label[*node] = new_label.clone();
                }
                EditAction::Move {
                    node,
                    parent,
                    position,
                    ..
                } => {
                    self.unlink(*node);
                    let sibs = self.sibs(Some(*parent));
                    assert!(*position <= sibs.len(), "move position out of range");
                    sibs.insert(*position, *node);
                    self.parent[*node] = Some(Some(*parent));
                }
            }
        }

        fn finish(self) -> SyntaxTree {
            assert_eq!(self.top.len(), 1, "script must leave one root");
            let root = self.top[0];
            let mut builder = TreeBuilder::new(self.node_type[root].clone());
            builder.set_label(builder.root(), self.label[root].clone());
            let b_root = builder.root();
            let mut stack: Vec<(usize, crate::tree::NodeId)> = self.children[root]
                .iter()
                .rev()
                .map(|&c| (c, b_root))
                .collect();
            // Depth-first emit preserving child order.
            while let Some((node, parent)) = stack.pop() {
                let id = builder.push(
                    parent,
                    self.node_type[node].clone(),
                    self.label[node].clone(),
                );
                for &c in self.children[node].iter().rev() {
                    stack.push((c, id));
                }
            }
            builder.build()
        }
    }

    fn parse(text: &str) -> SyntaxTree {
        CLikeGrammar::new().parse(text).unwrap()
    }

    fn round_trip(before_src: &str, after_src: &str) -> EditScript {
        let before = parse(before_src);
        let after = parse(after_src);
        round_trip_trees(&before, &after)
    }

    fn round_trip_trees(before: &SyntaxTree, after: &SyntaxTree) -> EditScript {
        let mapping = match_trees(before, after);
        let script = edit_script(before, after, &mapping).unwrap();
        let mut replay = Replay::start(before);
        for action in script.iter() {
            replay.apply(action);
        }
        let result = replay.finish();
        assert!(
            result.isomorphic_to(after),
            "script did not reproduce the after tree"
        );
        script
    }

    #[test]
    fn identical_trees_give_empty_script() {
        let s = "int f(int a) { return a + 1; }";
        let script = round_trip(s, s);
        assert!(script.is_empty());
    }

    #[test]
    fn single_added_call_inserts_only() {
        let script = round_trip(
            "void f(void) { a = 1; }",
            "void f(void) { a = 1; log(a); }",
        );
        assert!(!script.is_empty());
        assert!(script.iter().all(|a| matches!(a, EditAction::Insert { .. })));
    }

    #[test]
    fn added_root_child_is_one_insert() {
        let mut b = TreeBuilder::new("translation_unit");
        let _ = b;
        let before = TreeBuilder::new("translation_unit").build();
        let mut ab = TreeBuilder::new("translation_unit");
        ab.push(ab.root(), "call_expression", None);
        let after = ab.build();
        let mapping = match_trees(&before, &after);
        let script = edit_script(&before, &after, &mapping).unwrap();
        assert_eq!(script.len(), 1);
        match &script.actions[0] {
            EditAction::Insert {
                node_type,
                parent_type,
                position,
                ..
            } => {
                assert_eq!(node_type, "call_expression");
                assert_eq!(parent_type.as_deref(), Some("translation_unit"));
                assert_eq!(*position, 0);
            }
            other => panic!("expected insert, got {other:?}"),
        }
    }

    #[test]
    fn rename_becomes_updates() {
        let script = round_trip(
            "int f(int a) { return a + a; }",
            "int f(int b) { return b + b; }",
        );
        assert!(script
            .iter()
            .all(|a| matches!(a, EditAction::Update { .. })));
        // The parameter node, its name leaf, and two body uses.
        assert_eq!(script.len(), 4);
        let types: Vec<&str> = script.iter().map(|a| a.node_type()).collect();
        assert!(types.contains(&"parameter"));
        assert!(types.contains(&"identifier"));
    }

    #[test]
    fn deletion_is_leaf_first() {
        let script = round_trip(
            "void f(void) { if (x) { drop(); } done();}",
            "void f(void) { done(); }",
        );
        let mut deleted: Vec<usize> = Vec::new();
        for action in script.iter() {
            if let EditAction::Delete { node, .. } = action {
                deleted.push(*node);
            }
        }
        assert!(!deleted.is_empty());
    }

    #[test]
    fn reordered_functions_move() {
        let script = round_trip(
            "int a(void) { return 1; }\nint b(void) { return 2; }",
            "int b(void) { return 2; }\nint a(void) { return 1; }",
        );
        assert!(script.iter().any(|a| matches!(a, EditAction::Move { .. })));
    }

    #[test]
    fn replaced_root_round_trips() {
        let mut bb = TreeBuilder::new("alpha");
        bb.push(bb.root(), "leaf", Some("x".into()));
        let before = bb.build();
        let mut ab = TreeBuilder::new("beta");
        ab.push(ab.root(), "leaf", Some("x".into()));
        let after = ab.build();
        round_trip_trees(&before, &after);
    }

    #[test]
    fn complex_mixed_edit_round_trips() {
        round_trip(
            r#"
static int check(struct req *r, int n) {
    int i;
    for (i = 0; i < n; i++) {
        if (r->items[i].len > MAX_LEN)
            return -1;
    }
    return 0;
}
void handle(struct req *r) {
    if (check(r, r->count) < 0)
        abort_req(r);
    process(r);
}
"#,
            r#"
static int check(struct req *r, int n) {
    int i;
    if (n > MAX_ITEMS)
        return -1;
    for (i = 0; i < n; i++) {
        if (r->items[i].len > MAX_LEN || r->items[i].len == 0)
            return -1;
    }
    return 0;
}
void handle(struct req *r) {
    process(r);
    if (check(r, r->count) < 0)
        abort_req(r);
}
"#,
        );
    }

    #[test]
    fn inconsistent_mapping_rejected() {
        let before = parse("int x;");
        let after = parse("int y;");
        let mut mapping = TreeMapping::new();
        // Type-violating pair: root paired with a leaf.
        mapping.insert(before.root(), after.children(after.root())[0]);
        let err = edit_script(&before, &after, &mapping).unwrap_err();
        matches!(err, ScriptError::InconsistentMapping(_));
    }

    #[test]
    fn debug_serialization_shape() {
        let script = round_trip(
            "void f(void) { a = 1; }",
            "void f(void) { a = 2; }",
        );
        let json = serde_json::to_value(&script).unwrap();
        let actions = json["actions"].as_array().unwrap();
        assert!(!actions.is_empty());
        for a in actions {
            assert!(a["kind"].is_string());
            assert!(a["node_type"].is_string());
        }
    }
}
