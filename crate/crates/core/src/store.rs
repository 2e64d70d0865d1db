//! The persistent enumeration structure.
//!
//! A node holds a payload `(L, i, prod)` and two union links. The node
//! represents `{ν_{L,i} ⊕ ν_1 ⊕ ... ⊕ ν_k : ν_j ∈ ⟦prod_j⟧}` together with
//! everything its union children represent. Nodes are immutable and shared
//! through [`Arc`], so every node handed out stays valid and unchanged
//! (full persistence); a union copies only the path it rewrites.
//!
//! Union trees are heaps on `max_start` (the largest `min(ν)` over the
//! node's own product), so a subtree whose root is out of the window holds
//! nothing in the window and is pruned at constant cost.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::sync::Arc;

use crate::pcea::LabelId;

pub type NodeRef = Arc<DsNode>;

/// One `(label, position)` pair of an output valuation.
pub type Mark = (LabelId, usize);

#[derive(Debug)]
pub struct Payload {
    pub labels: Arc<[LabelId]>,
    pub position: usize,
    pub prod: Box<[NodeRef]>,
    /// `min(position, max_start of every product factor)`.
    pub max_start: usize,
}

impl Payload {
    fn priority(&self) -> (usize, usize) {
        (self.max_start, self.position)
    }
}

#[derive(Debug)]
pub struct DsNode {
    payload: Arc<Payload>,
    left: Option<NodeRef>,
    right: Option<NodeRef>,
    /// Next insertion goes right when set.
    dir: bool,
    /// Union-tree height in edges.
    height: u32,
    /// Root bookkeeping: live payload count at the last rebuild, and
    /// insertions since then.
    rebuild_hint: u32,
    inserts: u32,
}

impl DsNode {
    fn leaf(payload: Arc<Payload>) -> Self {
        DsNode {
            payload,
            left: None,
            right: None,
            dir: false,
            height: 0,
            rebuild_hint: 1,
            inserts: 0,
        }
    }

    /// Union-tree height in edges.
    pub fn height(&self) -> usize {
        self.height as usize
    }

    pub fn payload(&self) -> &Payload {
        &self.payload
    }

    pub fn max_start(&self) -> usize {
        self.payload.max_start
    }

    pub fn position(&self) -> usize {
        self.payload.position
    }

    pub fn left(&self) -> Option<&NodeRef> {
        self.left.as_ref()
    }

    pub fn right(&self) -> Option<&NodeRef> {
        self.right.as_ref()
    }
}

// Run DAGs can be as deep as the stream is long; drop them without recursion.
impl Drop for DsNode {
    fn drop(&mut self) {
        let mut stack: Vec<NodeRef> = Vec::new();
        take_children(self, &mut stack);
        while let Some(n) = stack.pop() {
            if let Ok(mut inner) = Arc::try_unwrap(n) {
                take_children(&mut inner, &mut stack);
            }
        }
    }
}

fn take_children(n: &mut DsNode, stack: &mut Vec<NodeRef>) {
    stack.extend(n.left.take());
    stack.extend(n.right.take());
    if let Some(p) = Arc::get_mut(&mut n.payload) {
        stack.extend(std::mem::take(&mut p.prod).into_vec());
    }
}

/// Lowest `min(ν)` still inside the window at `now`.
pub fn window_floor(now: usize, window: Option<usize>) -> usize {
    window.map_or(0, |w| now.saturating_sub(w))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct StoreStats {
    pub extends: u64,
    pub unions: u64,
    /// Nodes created or inspected by unions, rebuilds included.
    pub union_steps: u64,
    pub rebuilds: u64,
}

/// Creates nodes; holds the window and operation counters.
#[derive(Debug)]
pub struct Store {
    window: Option<usize>,
    stats: StoreStats,
}

impl Store {
    pub fn new(window: Option<usize>) -> Self {
        Store {
            window,
            stats: StoreStats::default(),
        }
    }

    pub fn window(&self) -> Option<usize> {
        self.window
    }

    pub fn stats(&self) -> StoreStats {
        self.stats
    }

    /// A fresh node for `{{ν_{L,i}}} ⊕ ⊕_{n ∈ prod} ⟦n⟧`.
    pub fn extend(&mut self, labels: Arc<[LabelId]>, position: usize, prod: Vec<NodeRef>) -> NodeRef {
        assert!(!labels.is_empty(), "extend needs a non-empty label set");
        let mut max_start = position;
        for n in &prod {
            assert!(n.position() < position, "extend: product node is not earlier");
            max_start = max_start.min(n.max_start());
        }
        self.stats.extends += 1;
        Arc::new(DsNode::leaf(Arc::new(Payload {
            labels,
            position,
            prod: prod.into_boxed_slice(),
            max_start,
        })))
    }

    /// A fresh node for `⟦n1⟧ ∪ ⟦n2⟧`, where `n2` comes from [`extend`] and
    /// `now` is the current position. Parts of `n1` that can no longer reach
    /// the window may be dropped.
    ///
    /// [`extend`]: Store::extend
    pub fn union(&mut self, n1: &NodeRef, n2: &NodeRef, now: usize) -> NodeRef {
        assert!(
            n2.left.is_none() && n2.right.is_none(),
            "union: second operand must be a fresh extend node"
        );
        debug_assert!(n1.position() <= n2.position());
        self.stats.unions += 1;
        let floor = window_floor(now, self.window);
        let p = n2.payload.clone();
        if n1.max_start() < floor {
            self.stats.union_steps += 1;
            return Arc::new(DsNode::leaf(p));
        }
        let inserts = n1.inserts + 1;
        if inserts > n1.rebuild_hint {
            return self.rebuild(n1, p, floor);
        }
        let mut root = self.insert(Some(n1), p, floor);
        let r = Arc::get_mut(&mut root).expect("fresh node");
        r.rebuild_hint = n1.rebuild_hint;
        r.inserts = inserts;
        root
    }

    fn insert(&mut self, t: Option<&NodeRef>, p: Arc<Payload>, floor: usize) -> NodeRef {
        self.stats.union_steps += 1;
        let t = match t {
            Some(t) if t.max_start() >= floor => t,
            _ => return Arc::new(DsNode::leaf(p)),
        };
        let (top, down) = if p.priority() > t.payload.priority() {
            (p, t.payload.clone())
        } else {
            (t.payload.clone(), p)
        };
        let live = |c: &Option<NodeRef>| c.as_ref().filter(|c| c.max_start() >= floor).cloned();
        let (mut left, mut right) = (live(&t.left), live(&t.right));
        if t.dir {
            right = Some(self.insert(right.as_ref(), down, floor));
        } else {
            left = Some(self.insert(left.as_ref(), down, floor));
        }
        Arc::new(DsNode {
            height: height_of(&left, &right),
            payload: top,
            left,
            right,
            dir: !t.dir,
            rebuild_hint: 1,
            inserts: 0,
        })
    }

    /// Rebuilds from the live payloads as a complete heap in level order.
    fn rebuild(&mut self, n1: &NodeRef, p: Arc<Payload>, floor: usize) -> NodeRef {
        self.stats.rebuilds += 1;
        let mut live = vec![p];
        let mut stack = vec![n1];
        while let Some(n) = stack.pop() {
            self.stats.union_steps += 1;
            if n.max_start() < floor {
                continue;
            }
            live.push(n.payload.clone());
            stack.extend(n.left.iter().chain(n.right.iter()));
        }
        live.sort_by_key(|p| std::cmp::Reverse(p.priority()));
        self.stats.union_steps += live.len() as u64;
        let mut root = build_heap(&live, 0);
        let r = Arc::get_mut(&mut root).expect("fresh node");
        r.rebuild_hint = u32::try_from(live.len()).unwrap_or(u32::MAX);
        r.inserts = 0;
        root
    }
}

fn build_heap(sorted: &[Arc<Payload>], i: usize) -> NodeRef {
    let child = |c: usize| (c < sorted.len()).then(|| build_heap(sorted, c));
    let (left, right) = (child(2 * i + 1), child(2 * i + 2));
    let size = |c: usize| subtree_size(sorted.len(), c);
    Arc::new(DsNode {
        payload: sorted[i].clone(),
        dir: size(2 * i + 1) > size(2 * i + 2),
        height: height_of(&left, &right),
        left,
        right,
        rebuild_hint: 1,
        inserts: 0,
    })
}

fn height_of(left: &Option<NodeRef>, right: &Option<NodeRef>) -> u32 {
    left.iter().chain(right.iter()).map(|c| c.height + 1).max().unwrap_or(0)
}

/// Nodes in the level-order subtree rooted at index `i` of an `n`-node heap.
fn subtree_size(n: usize, i: usize) -> usize {
    let (mut lo, mut hi, mut count) = (i, i, 0);
    while lo < n {
        count += hi.min(n - 1) - lo + 1;
        lo = 2 * lo + 1;
        hi = 2 * hi + 2;
    }
    count
}

/// Enumerates `⟦n⟧^w_now`: valuations of `n` whose least position is at
/// least `now - w`, as lists of marks.
pub fn enumerate(n: &NodeRef, now: usize, window: Option<usize>) -> Enumeration<'_> {
    Enumeration {
        root: n,
        floor: window_floor(now, window),
        cursor: None,
        started: false,
        steps: 0,
    }
}

/// Output-linear-delay iterator; `steps` counts the work done so far.
pub struct Enumeration<'a> {
    root: &'a DsNode,
    floor: usize,
    cursor: Option<Cursor<'a>>,
    started: bool,
    steps: u64,
}

impl Enumeration<'_> {
    pub fn steps(&self) -> u64 {
        self.steps
    }
}

impl Iterator for Enumeration<'_> {
    type Item = Vec<Mark>;

    fn next(&mut self) -> Option<Vec<Mark>> {
        self.steps += 1;
        if !self.started {
            self.started = true;
            if self.root.max_start() < self.floor {
                return None;
            }
            self.cursor = Some(Cursor::new(self.root, self.floor, &mut self.steps));
        } else {
            let c = self.cursor.as_mut()?;
            if !c.has_next() {
                self.cursor = None;
                return None;
            }
            c.advance(self.floor, &mut self.steps);
        }
        let mut out = Vec::new();
        self.cursor.as_ref()?.emit(&mut out, &mut self.steps);
        Some(out)
    }
}

/// Position in the enumeration of one union tree: the payload being
/// expanded, one cursor per product factor, and the live union nodes left.
struct Cursor<'a> {
    pending: Vec<&'a DsNode>,
    current: &'a Payload,
    factors: Vec<Cursor<'a>>,
    /// Rightmost factor that can still advance.
    movable: Option<usize>,
}

impl<'a> Cursor<'a> {
    fn new(root: &'a DsNode, floor: usize, steps: &mut u64) -> Self {
        let mut c = Cursor {
            pending: Vec::new(),
            current: &root.payload,
            factors: Vec::new(),
            movable: None,
        };
        c.visit(root, floor, steps);
        c
    }

    fn visit(&mut self, node: &'a DsNode, floor: usize, steps: &mut u64) {
        *steps += 1;
        self.current = &node.payload;
        for child in [&node.right, &node.left].into_iter().flatten() {
            if child.max_start() >= floor {
                self.pending.push(child);
            }
        }
        self.factors = node.payload.prod.iter().map(|f| Cursor::new(f, floor, steps)).collect();
        self.movable = self.factors.iter().rposition(Cursor::has_next);
    }

    fn has_next(&self) -> bool {
        self.movable.is_some() || !self.pending.is_empty()
    }

    fn advance(&mut self, floor: usize, steps: &mut u64) {
        *steps += 1;
        match self.movable {
            Some(k) => {
                self.factors[k].advance(floor, steps);
                for j in k + 1..self.factors.len() {
                    self.factors[j] = Cursor::new(&self.current.prod[j], floor, steps);
                }
                *steps += self.factors.len() as u64;
                self.movable = self.factors.iter().rposition(Cursor::has_next);
            }
            None => {
                let next = self.pending.pop().expect("advance past the end");
                self.visit(next, floor, steps);
            }
        }
    }

    fn emit(&self, out: &mut Vec<Mark>, steps: &mut u64) {
        *steps += self.current.labels.len() as u64;
        out.extend(self.current.labels.iter().map(|&l| (l, self.current.position)));
        for f in &self.factors {
            f.emit(out, steps);
        }
    }
}

/// Brute-force expansion of `⟦n⟧` as a bag, each valuation as sorted marks.
pub fn expand(n: &NodeRef) -> Vec<Vec<Mark>> {
    let mut memo = HashMap::new();
    expand_memo(n, &mut memo)
}

fn expand_memo(n: &NodeRef, memo: &mut HashMap<*const DsNode, Vec<Vec<Mark>>>) -> Vec<Vec<Mark>> {
    let key = Arc::as_ptr(n);
    if let Some(v) = memo.get(&key) {
        return v.clone();
    }
    let own: Vec<Mark> = n.payload.labels.iter().map(|&l| (l, n.payload.position)).collect();
    let mut prod = vec![own];
    for f in n.payload.prod.iter() {
        let fs = expand_memo(f, memo);
        prod = prod
            .iter()
            .flat_map(|a| {
                fs.iter().map(move |b| {
                    let mut v = a.clone();
                    v.extend_from_slice(b);
                    v
                })
            })
            .collect();
    }
    for v in &mut prod {
        v.sort_unstable();
    }
    for c in n.left.iter().chain(n.right.iter()) {
        prod.extend(expand_memo(c, memo));
    }
    memo.insert(key, prod.clone());
    prod
}

/// Union-tree depth in edges (product links are not followed).
pub fn union_depth(n: &DsNode) -> usize {
    let mut best = 0;
    let mut stack = vec![(n, 0)];
    while let Some((m, d)) = stack.pop() {
        best = best.max(d);
        for c in m.left.iter().chain(m.right.iter()) {
            stack.push((c, d + 1));
        }
    }
    best
}

/// The heap condition on every union tree reachable from `n`, and every
/// cached `max_start` against its definition.
pub fn check_heap(n: &NodeRef) -> bool {
    let mut seen = std::collections::HashSet::new();
    let mut stack = vec![n];
    while let Some(m) = stack.pop() {
        if !seen.insert(Arc::as_ptr(m)) {
            continue;
        }
        let p = &m.payload;
        let expected = p.prod.iter().map(|f| f.max_start()).fold(p.position, usize::min);
        if p.max_start != expected {
            return false;
        }
        for c in m.left.iter().chain(m.right.iter()) {
            if c.max_start() > m.max_start() {
                return false;
            }
            stack.push(c);
        }
        stack.extend(p.prod.iter());
    }
    true
}

/// Every product combination reachable from `n` is simple: no mark occurs
/// twice in an expanded valuation.
pub fn check_simple(n: &NodeRef) -> bool {
    expand(n).iter().all(|v| v.windows(2).all(|w| w[0] != w[1]))
}

/// A text rendering of the DAG below `n`, one node per line.
pub fn dump(n: &NodeRef) -> String {
    let mut ids: HashMap<*const DsNode, usize> = HashMap::new();
    let mut order = Vec::new();
    let mut stack = vec![n];
    while let Some(m) = stack.pop() {
        if ids.contains_key(&Arc::as_ptr(m)) {
            continue;
        }
        ids.insert(Arc::as_ptr(m), ids.len());
        order.push(m);
        stack.extend(m.payload.prod.iter());
        stack.extend(m.left.iter().chain(m.right.iter()));
    }
    let mut out = String::new();
    let id = |m: &NodeRef| ids[&Arc::as_ptr(m)];
    for m in order {
        let labels: Vec<u32> = m.payload.labels.iter().map(|l| l.0).collect();
        let prod: Vec<usize> = m.payload.prod.iter().map(id).collect();
        let link = |c: &Option<NodeRef>| c.as_ref().map_or("-".to_string(), |c| id(c).to_string());
        let _ = writeln!(
            out,
            "n{} L={labels:?} i={} max_start={} prod={prod:?} left={} right={}",
            id(m),
            m.payload.position,
            m.payload.max_start,
            link(&m.left),
            link(&m.right)
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(ids: &[u32]) -> Arc<[LabelId]> {
        ids.iter().map(|&i| LabelId(i)).collect()
    }

    fn sorted(mut v: Vec<Vec<Mark>>) -> Vec<Vec<Mark>> {
        for x in &mut v {
            x.sort_unstable();
        }
        v.sort();
        v
    }

    #[test]
    fn extend_max_start() {
        let mut s = Store::new(Some(10));
        let nt = s.extend(labels(&[0]), 1, vec![]);
        let ns = s.extend(labels(&[0]), 3, vec![]);
        let ne = s.extend(labels(&[0]), 5, vec![nt, ns]);
        assert_eq!(ne.max_start(), 1);
        let lone = s.extend(labels(&[0]), 0, vec![]);
        assert_eq!(lone.max_start(), 0);
        assert_eq!(expand(&lone), vec![vec![(LabelId(0), 0)]]);
        assert!(check_heap(&ne));
    }

    #[test]
    fn example_valuations() {
        // T at 1, S at 0 and 3 (joined by a union), R at 5.
        let mut s = Store::new(Some(10));
        let t = s.extend(labels(&[0]), 1, vec![]);
        let s0 = s.extend(labels(&[0]), 0, vec![]);
        let s3 = s.extend(labels(&[0]), 3, vec![]);
        let ss = s.union(&s0, &s3, 3);
        let r = s.extend(labels(&[0]), 5, vec![t, ss]);
        let b = LabelId(0);
        let all = sorted(enumerate(&r, 5, Some(10)).collect());
        assert_eq!(all, vec![vec![(b, 0), (b, 1), (b, 5)], vec![(b, 1), (b, 3), (b, 5)]]);
        assert_eq!(all, sorted(expand(&r)));
        let w4 = sorted(enumerate(&r, 5, Some(4)).collect());
        assert_eq!(w4, vec![vec![(b, 1), (b, 3), (b, 5)]]);
        assert_eq!(enumerate(&r, 5, Some(3)).count(), 0);
    }

    #[test]
    fn union_is_persistent() {
        let mut s = Store::new(None);
        let mut root = s.extend(labels(&[0]), 0, vec![]);
        let mut snapshots = Vec::new();
        for i in 1..40 {
            let before = sorted(enumerate(&root, i, None).collect());
            let n = s.extend(labels(&[0]), i, vec![]);
            let next = s.union(&root, &n, i);
            assert_eq!(sorted(enumerate(&root, i, None).collect()), before);
            snapshots.push((root, before));
            root = next;
            assert!(check_heap(&root));
        }
        for (node, seen) in snapshots {
            assert_eq!(sorted(enumerate(&node, 100, None).collect()), seen);
        }
        assert_eq!(enumerate(&root, 40, None).count(), 40);
    }

    #[test]
    fn expired_operand_is_replaced() {
        let mut s = Store::new(Some(2));
        let old = s.extend(labels(&[0]), 0, vec![]);
        let new = s.extend(labels(&[0]), 5, vec![]);
        let u = s.union(&old, &new, 5);
        assert!(u.left().is_none() && u.right().is_none());
        assert_eq!(expand(&u), vec![vec![(LabelId(0), 5)]]);
    }

    #[test]
    fn depth_stays_logarithmic() {
        for w in [0usize, 1, 3, 8, 64, 500] {
            let mut s = Store::new(Some(w));
            let mut root: Option<NodeRef> = None;
            let k = 3;
            for i in 0..2000 {
                for _ in 0..k {
                    let n = s.extend(labels(&[0]), i, vec![]);
                    root = Some(match &root {
                        None => n,
                        Some(r) => s.union(r, &n, i),
                    });
                    let r = root.as_ref().unwrap();
                    assert_eq!(r.height(), union_depth(r));
                    let d = r.height() as f64;
                    assert!(d <= 2.0 * ((k * (w + 1) + 1) as f64).log2(), "w={w} i={i} depth={d}");
                }
            }
        }
    }

    #[test]
    fn heap_violation_detected() {
        let low = Arc::new(DsNode::leaf(Arc::new(Payload {
            labels: labels(&[0]),
            position: 1,
            prod: Box::new([]),
            max_start: 1,
        })));
        let high = Arc::new(DsNode::leaf(Arc::new(Payload {
            labels: labels(&[0]),
            position: 4,
            prod: Box::new([]),
            max_start: 4,
        })));
        let bad = Arc::new(DsNode {
            payload: low.payload.clone(),
            left: Some(high),
            right: None,
            dir: false,
            height: 1,
            rebuild_hint: 1,
            inserts: 0,
        });
        assert!(!check_heap(&bad));
    }

    #[test]
    fn simplicity_check() {
        let mut s = Store::new(None);
        let a = s.extend(labels(&[0]), 0, vec![]);
        let b = s.extend(labels(&[0]), 1, vec![a.clone()]);
        assert!(check_simple(&b));
        let dup = s.extend(labels(&[1]), 2, vec![a.clone(), b]);
        assert!(!check_simple(&dup));
        assert!(dump(&dup).lines().count() == 3);
    }

    #[test]
    fn deep_chain_drops_without_overflow() {
        let mut s = Store::new(None);
        let mut n = s.extend(labels(&[0]), 0, vec![]);
        for i in 1..300_000 {
            n = s.extend(labels(&[0]), i, vec![n]);
        }
        drop(n);
    }

    #[test]
    fn subtree_sizes() {
        assert_eq!(subtree_size(7, 0), 7);
        assert_eq!(subtree_size(7, 1), 3);
        assert_eq!(subtree_size(6, 2), 2);
        assert_eq!(subtree_size(4, 1), 2);
        assert_eq!(subtree_size(4, 3), 1);
    }
}
