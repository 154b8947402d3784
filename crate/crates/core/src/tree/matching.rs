//! Two-phase tree matching.
//!
//! Phase one greedily pairs isomorphic subtrees top-down, largest first.
//! Phase two walks the remaining unmatched nodes bottom-up and pairs
//! containers whose mapped descendants overlap enough, then recovers
//! leftover pairs inside each newly matched container with an exact
//! tree-edit-distance pass when the container is small enough.

use std::collections::{BTreeMap, HashMap, HashSet};

use super::syntax::{NodeId, SyntaxTree};

/// Tuning knobs for [`match_trees_with`].
#[derive(Debug, Clone)]
pub struct MatchConfig {
    /// Minimum subtree height considered by the top-down phase.
    pub min_height: usize,
    /// Minimum descendant-overlap dice for the bottom-up phase.
    pub min_dice: f64,
    /// Containers at most this large (in nodes) get the exact recovery pass.
    pub max_recovery_size: usize,
}

impl Default for MatchConfig {
    fn default() -> Self {
        MatchConfig {
            min_height: 2,
            min_dice: 0.5,
            max_recovery_size: 100,
        }
    }
}

/// One-to-one correspondence between nodes of two trees.
///
/// Pairs always connect nodes of equal `node_type`, each node appears in at
/// most one pair, and a root is only ever paired with the other root.
#[derive(Debug, Clone, Default)]
pub struct TreeMapping {
    b2a: HashMap<NodeId, NodeId>,
    a2b: HashMap<NodeId, NodeId>,
}

impl TreeMapping {
    pub fn new() -> Self {
        TreeMapping::default()
    }

    /// Adds a pair unless either side is already taken.
    pub fn insert(&mut self, before: NodeId, after: NodeId) -> bool {
        if self.b2a.contains_key(&before) || self.a2b.contains_key(&after) {
            return false;
        }
        self.b2a.insert(before, after);
        self.a2b.insert(after, before);
        true
    }

    pub fn remove_before(&mut self, before: NodeId) {
        if let Some(after) = self.b2a.remove(&before) {
            self.a2b.remove(&after);
        }
    }

    pub fn after_of(&self, before: NodeId) -> Option<NodeId> {
        self.b2a.get(&before).copied()
    }

    pub fn before_of(&self, after: NodeId) -> Option<NodeId> {
        self.a2b.get(&after).copied()
    }

    pub fn len(&self) -> usize {
        self.b2a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.b2a.is_empty()
    }

    /// All pairs ordered by before-side node id.
    pub fn pairs(&self) -> Vec<(NodeId, NodeId)> {
        let mut v: Vec<_> = self.b2a.iter().map(|(&b, &a)| (b, a)).collect();
        v.sort();
        v
    }
}

struct TreeInfo {
    pre_rank: Vec<usize>,
    size: Vec<usize>,
    height: Vec<usize>,
    hash: Vec<u64>,
}

impl TreeInfo {
    fn compute(tree: &SyntaxTree) -> Self {
        let n = tree.len();
        let mut pre_rank = vec![0usize; n];
        for (rank, id) in tree.preorder().into_iter().enumerate() {
            pre_rank[id.index()] = rank;
        }
        let mut size = vec![1usize; n];
        let mut height = vec![1usize; n];
        for id in tree.postorder() {
            let mut s = 1;
            let mut h = 0;
            for &c in tree.children(id) {
                s += size[c.index()];
                h = h.max(height[c.index()]);
            }
            size[id.index()] = s;
            height[id.index()] = h + 1;
        }
        TreeInfo {
            pre_rank,
            size,
            height,
            hash: tree.structure_hashes(),
        }
    }

    /// True when `node` lies strictly inside the subtree of `anc`.
    fn is_descendant(&self, anc: NodeId, node: NodeId) -> bool {
        let a = self.pre_rank[anc.index()];
        let x = self.pre_rank[node.index()];
        a < x && x < a + self.size[anc.index()]
    }
}

/// Matches `before` against `after` with default settings.
pub fn match_trees(before: &SyntaxTree, after: &SyntaxTree) -> TreeMapping {
    match_trees_with(before, after, &MatchConfig::default())
}

pub fn match_trees_with(
    before: &SyntaxTree,
    after: &SyntaxTree,
    config: &MatchConfig,
) -> TreeMapping {
    let binfo = TreeInfo::compute(before);
    let ainfo = TreeInfo::compute(after);
    let mut mapping = TreeMapping::new();

    top_down(before, after, &binfo, &ainfo, config, &mut mapping);

    // Roots may only pair with each other; a root greedily matched into the
    // middle of the other tree would leave no way to express the remainder.
    if let Some(a) = mapping.after_of(before.root()) {
        if a != after.root() {
            mapping.remove_before(before.root());
        }
    }
    if let Some(b) = mapping.before_of(after.root()) {
        if b != before.root() {
            mapping.remove_before(b);
        }
    }

    bottom_up(before, after, &binfo, &ainfo, config, &mut mapping);

    if mapping.after_of(before.root()).is_none()
        && mapping.before_of(after.root()).is_none()
        && before.node_type(before.root()) == after.node_type(after.root())
    {
        mapping.insert(before.root(), after.root());
        recover(before, after, before.root(), after.root(), config, &mut mapping);
    }

    mapping
}

fn map_isomorphic(
    before: &SyntaxTree,
    after: &SyntaxTree,
    b: NodeId,
    a: NodeId,
    mapping: &mut TreeMapping,
) {
    mapping.insert(b, a);
    for (&cb, &ca) in before.children(b).iter().zip(after.children(a)) {
        map_isomorphic(before, after, cb, ca, mapping);
    }
}

fn top_down(
    before: &SyntaxTree,
    after: &SyntaxTree,
    binfo: &TreeInfo,
    ainfo: &TreeInfo,
    config: &MatchConfig,
    mapping: &mut TreeMapping,
) {
    let mut by_height_b: BTreeMap<usize, Vec<NodeId>> = BTreeMap::new();
    for id in before.preorder() {
        let h = binfo.height[id.index()];
        if h >= config.min_height {
            by_height_b.entry(h).or_default().push(id);
        }
    }
    let mut by_height_a: BTreeMap<usize, HashMap<u64, Vec<NodeId>>> = BTreeMap::new();
    for id in after.preorder() {
        let h = ainfo.height[id.index()];
        if h >= config.min_height {
            by_height_a
                .entry(h)
                .or_default()
                .entry(ainfo.hash[id.index()])
                .or_default()
                .push(id);
        }
    }

    for (&h, bs) in by_height_b.iter().rev() {
        let Some(buckets) = by_height_a.get(&h) else { continue };
        for &b in bs {
            if mapping.after_of(b).is_some() {
                continue;
            }
            let Some(cands) = buckets.get(&binfo.hash[b.index()]) else { continue };
            for &a in cands {
                if mapping.before_of(a).is_some() {
                    continue;
                }
                if before.subtrees_isomorphic(b, after, a) {
                    map_isomorphic(before, after, b, a, mapping);
                    break;
                }
            }
        }
    }
}

fn dice(
    before: &SyntaxTree,
    binfo: &TreeInfo,
    ainfo: &TreeInfo,
    mapping: &TreeMapping,
    b: NodeId,
    a: NodeId,
) -> f64 {
    let db = binfo.size[b.index()] - 1;
    let da = ainfo.size[a.index()] - 1;
    if db + da == 0 {
        return 0.0;
    }
    let mut common = 0usize;
    let mut stack: Vec<NodeId> = before.children(b).to_vec();
    while let Some(x) = stack.pop() {
        if let Some(y) = mapping.after_of(x) {
            if ainfo.is_descendant(a, y) {
                common += 1;
            }
        }
        stack.extend_from_slice(before.children(x));
    }
    2.0 * common as f64 / (db + da) as f64
}

fn bottom_up(
    before: &SyntaxTree,
    after: &SyntaxTree,
    binfo: &TreeInfo,
    ainfo: &TreeInfo,
    config: &MatchConfig,
    mapping: &mut TreeMapping,
) {
    let n = before.len();
    let mut has_mapped_desc = vec![false; n];
    for b in before.postorder() {
        for &c in before.children(b) {
            if has_mapped_desc[c.index()] || mapping.after_of(c).is_some() {
                has_mapped_desc[b.index()] = true;
                break;
            }
        }
        if mapping.after_of(b).is_some() {
            continue;
        }
        let is_root = b == before.root();
        if !has_mapped_desc[b.index()] && !is_root {
            continue;
        }

        // Candidates: unmatched same-type ancestors of the partners of b's
        // mapped descendants.
        let mut seen: HashSet<NodeId> = HashSet::new();
        let mut cands: Vec<NodeId> = Vec::new();
        let mut stack: Vec<NodeId> = before.children(b).to_vec();
        while let Some(x) = stack.pop() {
            stack.extend_from_slice(before.children(x));
            let Some(y) = mapping.after_of(x) else { continue };
            let mut up = after.parent(y);
            while let Some(anc) = up {
                if !seen.insert(anc) {
                    break;
                }
                if mapping.before_of(anc).is_none()
                    && after.node_type(anc) == before.node_type(b)
                    && (anc != after.root() || is_root)
                {
                    cands.push(anc);
                }
                up = after.parent(anc);
            }
        }
        let mut best: Option<(f64, usize, NodeId)> = None;
        for a in cands {
            let d = dice(before, binfo, ainfo, mapping, b, a);
            if d < config.min_dice {
                continue;
            }
            let rank = ainfo.pre_rank[a.index()];
            match best {
                Some((bd, br, _)) if (d, std::cmp::Reverse(rank)) <= (bd, std::cmp::Reverse(br)) => {}
                _ => best = Some((d, rank, a)),
            }
        }
        if let Some((_, _, a)) = best {
            mapping.insert(b, a);
            recover(before, after, b, a, config, mapping);
        }
    }
}

/// Exact-recovery pass inside a freshly matched container pair.
fn recover(
    before: &SyntaxTree,
    after: &SyntaxTree,
    b: NodeId,
    a: NodeId,
    config: &MatchConfig,
    mapping: &mut TreeMapping,
) {
    let sb = before.subtree_size(b);
    let sa = after.subtree_size(a);
    if sb.max(sa) > config.max_recovery_size {
        return;
    }
    for (x, y) in zs_pairs(before, b, after, a) {
        if before.node_type(x) == after.node_type(y)
            && mapping.after_of(x).is_none()
            && mapping.before_of(y).is_none()
        {
            mapping.insert(x, y);
        }
    }
}

// Zhang-Shasha minimal edit mapping between two subtrees. Unit costs for
// insert and delete; relabel is free on identical type and label, costs one
// within a type, and is forbidden across types.

struct ZsTree {
    po: Vec<NodeId>,
    lld: Vec<usize>,
    keyroots: Vec<usize>,
}

fn zs_prepare(tree: &SyntaxTree, root: NodeId) -> ZsTree {
    let mut po = Vec::new();
    fn walk(tree: &SyntaxTree, id: NodeId, po: &mut Vec<NodeId>) {
        for &c in tree.children(id) {
            walk(tree, c, po);
        }
        po.push(id);
    }
    walk(tree, root, &mut po);
    let index_of: HashMap<NodeId, usize> =
        po.iter().enumerate().map(|(i, &id)| (id, i + 1)).collect();
    let n = po.len();
    let mut lld = vec![0usize; n + 1];
    for (i, &id) in po.iter().enumerate() {
        let mut cur = id;
        while let Some(&first) = tree.children(cur).first() {
            cur = first;
        }
        lld[i + 1] = index_of[&cur];
    }
    let mut keyroots = Vec::new();
    for i in 1..=n {
        let is_keyroot = (i + 1..=n).all(|j| lld[j] != lld[i]);
        if is_keyroot {
            keyroots.push(i);
        }
    }
    ZsTree { po, lld, keyroots }
}

const ZS_FORBIDDEN: u64 = 1 << 32;

fn relabel_cost(before: &SyntaxTree, x: NodeId, after: &SyntaxTree, y: NodeId) -> u64 {
    if before.node_type(x) != after.node_type(y) {
        ZS_FORBIDDEN
    } else if before.label(x) == after.label(y) {
        0
    } else {
        1
    }
}

fn zs_pairs(
    before: &SyntaxTree,
    broot: NodeId,
    after: &SyntaxTree,
    aroot: NodeId,
) -> Vec<(NodeId, NodeId)> {
    let t1 = zs_prepare(before, broot);
    let t2 = zs_prepare(after, aroot);
    let n = t1.po.len();
    let m = t2.po.len();
    let mut td = vec![vec![0u64; m + 1]; n + 1];

    let forest = |i: usize, j: usize, td: &Vec<Vec<u64>>| -> Vec<Vec<u64>> {
        let li = t1.lld[i];
        let lj = t2.lld[j];
        let mut fd = vec![vec![0u64; m + 2]; n + 2];
        fd[li - 1][lj - 1] = 0;
        for di in li..=i {
            fd[di][lj - 1] = fd[di - 1][lj - 1] + 1;
        }
        for dj in lj..=j {
            fd[li - 1][dj] = fd[li - 1][dj - 1] + 1;
        }
        for di in li..=i {
            for dj in lj..=j {
                if t1.lld[di] == li && t2.lld[dj] == lj {
                    let rel = relabel_cost(before, t1.po[di - 1], after, t2.po[dj - 1]);
                    fd[di][dj] = (fd[di - 1][dj] + 1)
                        .min(fd[di][dj - 1] + 1)
                        .min(fd[di - 1][dj - 1] + rel);
                } else {
                    let (pi, pj) = (t1.lld[di] - 1, t2.lld[dj] - 1);
                    let pi = pi.max(li - 1);
                    let pj = pj.max(lj - 1);
                    fd[di][dj] = (fd[di - 1][dj] + 1)
                        .min(fd[di][dj - 1] + 1)
                        .min(fd[pi][pj] + td[di][dj]);
                }
            }
        }
        fd
    };

    for &kb in &t1.keyroots {
        for &ka in &t2.keyroots {
            let fd = forest(kb, ka, &td);
            let li = t1.lld[kb];
            let lj = t2.lld[ka];
            for di in li..=kb {
                for dj in lj..=ka {
                    if t1.lld[di] == li && t2.lld[dj] == lj {
                        td[di][dj] = fd[di][dj];
                    }
                }
            }
        }
    }

    let mut pairs = Vec::new();
    let mut jobs = vec![(n, m)];
    while let Some((i, j)) = jobs.pop() {
        if i == 0 || j == 0 {
            continue;
        }
        let fd = forest(i, j, &td);
        let li = t1.lld[i];
        let lj = t2.lld[j];
        let mut x = i;
        let mut y = j;
        while x >= li || y >= lj {
            if x >= li && fd[x][y] == fd[x - 1][y] + 1 {
                x -= 1;
            } else if y >= lj && fd[x][y] == fd[x][y - 1] + 1 {
                y -= 1;
            } else if t1.lld[x] == li && t2.lld[y] == lj {
                if relabel_cost(before, t1.po[x - 1], after, t2.po[y - 1]) < ZS_FORBIDDEN {
                    pairs.push((t1.po[x - 1], t2.po[y - 1]));
                }
                x -= 1;
                y -= 1;
            } else {
                jobs.push((x, y));
                x = t1.lld[x] - 1;
                y = t2.lld[y] - 1;
                if x < li - 1 {
                    x = li - 1;
                }
                if y < lj - 1 {
                    y = lj - 1;
                }
            }
            if x < li && y < lj {
                break;
            }
            if x + 1 == li && y + 1 == lj {
                break;
            }
        }
    }
    pairs
}
