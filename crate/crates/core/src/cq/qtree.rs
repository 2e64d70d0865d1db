use std::collections::BTreeSet;
use std::fmt;

use super::Cq;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum QLabel {
    Var(String),
    Atom(usize),
}

impl fmt::Display for QLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            QLabel::Var(x) => f.write_str(x),
            QLabel::Atom(i) => write!(f, "{i}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QNode {
    pub label: QLabel,
    /// Variables of nodes removed by compaction, folded into this node.
    pub absorbed: Vec<String>,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
}

impl QNode {
    pub fn is_leaf(&self) -> bool {
        matches!(self.label, QLabel::Atom(_))
    }

    pub fn var(&self) -> Option<&str> {
        match &self.label {
            QLabel::Var(x) => Some(x),
            QLabel::Atom(_) => None,
        }
    }
}

/// A q-tree stored as an arena; node 0 is the root.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QTree {
    nodes: Vec<QNode>,
}

impl QTree {
    pub fn root(&self) -> usize {
        0
    }

    pub fn node(&self, id: usize) -> &QNode {
        &self.nodes[id]
    }

    pub fn nodes(&self) -> &[QNode] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn find(&self, label: &QLabel) -> Option<usize> {
        self.nodes.iter().position(|n| n.label == *label)
    }

    pub fn leaf(&self, atom: usize) -> Option<usize> {
        self.find(&QLabel::Atom(atom))
    }

    pub fn var_node(&self, x: &str) -> Option<usize> {
        self.find(&QLabel::Var(x.to_string()))
    }

    /// Node ids from the root down to `id`, inclusive.
    pub fn path(&self, id: usize) -> Vec<usize> {
        let mut path = vec![id];
        let mut cur = id;
        while let Some(p) = self.nodes[cur].parent {
            path.push(p);
            cur = p;
        }
        path.reverse();
        path
    }

    /// Whether `id` lies in the subtree of `ancestor` (itself included).
    pub fn is_descendant(&self, id: usize, ancestor: usize) -> bool {
        let mut cur = Some(id);
        while let Some(c) = cur {
            if c == ancestor {
                return true;
            }
            cur = self.nodes[c].parent;
        }
        false
    }

    /// Variables labeling inner nodes, in node order.
    pub fn variables(&self) -> Vec<&str> {
        self.nodes.iter().filter_map(QNode::var).collect()
    }

    pub fn is_compact(&self) -> bool {
        self.nodes.iter().enumerate().all(|(id, n)| {
            n.is_leaf() || n.children.len() != 1 || (id == 0 && self.nodes[n.children[0]].is_leaf())
        })
    }

    /// The leaf-path invariant: for every atom, the variables on its root
    /// path (absorbed ones included) are exactly the atom's variables, and
    /// each variable and atom labels exactly one node.
    pub fn check_leaf_paths(&self, q: &Cq) -> bool {
        let mut vars_seen = BTreeSet::new();
        for n in &self.nodes {
            for v in n.var().into_iter().chain(n.absorbed.iter().map(String::as_str)) {
                if !vars_seen.insert(v) {
                    return false;
                }
            }
        }
        if vars_seen != q.variables() {
            return false;
        }
        (0..q.body.len()).all(|i| {
            let Some(leaf) = self.leaf(i) else {
                return false;
            };
            let on_path: BTreeSet<&str> = self
                .path(leaf)
                .into_iter()
                .flat_map(|id| {
                    let n = &self.nodes[id];
                    n.var().into_iter().chain(n.absorbed.iter().map(String::as_str))
                })
                .collect();
            self.nodes.iter().filter(|n| n.label == QLabel::Atom(i)).count() == 1
                && on_path == q.body[i].vars()
        })
    }

    fn fmt_node(&self, id: usize, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let n = &self.nodes[id];
        write!(f, "{}", n.label)?;
        if !n.absorbed.is_empty() {
            write!(f, "[{}]", n.absorbed.join(","))?;
        }
        if !n.children.is_empty() {
            f.write_str("(")?;
            for (k, &c) in n.children.iter().enumerate() {
                if k > 0 {
                    f.write_str(",")?;
                }
                self.fmt_node(c, f)?;
            }
            f.write_str(")")?;
        }
        Ok(())
    }
}

/// Renders as nested terms, e.g. `x(0,y(1,2))`; absorbed variables appear
/// in brackets after the label.
impl fmt::Display for QTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_node(0, f)
    }
}

enum Shape {
    Leaf(usize, Vec<String>),
    Inner(String, Vec<String>, Vec<Shape>),
}

impl Shape {
    fn label(&self) -> QLabel {
        match self {
            Shape::Leaf(i, _) => QLabel::Atom(*i),
            Shape::Inner(x, _, _) => QLabel::Var(x.clone()),
        }
    }
}

fn into_tree(shape: Shape) -> QTree {
    fn push(nodes: &mut Vec<QNode>, shape: Shape, parent: Option<usize>) -> usize {
        let id = nodes.len();
        let label = shape.label();
        let (absorbed, children) = match shape {
            Shape::Leaf(_, absorbed) => (absorbed, Vec::new()),
            Shape::Inner(_, absorbed, children) => (absorbed, children),
        };
        nodes.push(QNode {
            label,
            absorbed,
            parent,
            children: Vec::new(),
        });
        let kids = children.into_iter().map(|c| push(nodes, c, Some(id))).collect();
        nodes[id].children = kids;
        id
    }
    let mut nodes = Vec::new();
    push(&mut nodes, shape, None);
    QTree { nodes }
}

fn to_shape(t: &QTree, id: usize) -> Shape {
    let n = &t.nodes[id];
    match &n.label {
        QLabel::Atom(i) => Shape::Leaf(*i, n.absorbed.clone()),
        QLabel::Var(x) => Shape::Inner(
            x.clone(),
            n.absorbed.clone(),
            n.children.iter().map(|&c| to_shape(t, c)).collect(),
        ),
    }
}

/// Builds a q-tree by recursive variable nesting: each connected group of
/// atoms is rooted at the least variable common to all of them. Returns
/// `None` iff the query is not full, not hierarchical or not connected.
pub fn build_q_tree(q: &Cq) -> Option<QTree> {
    if !super::classify(q).full {
        return None;
    }
    let all: Vec<usize> = (0..q.body.len()).collect();
    let mut groups = components(q, &all, &BTreeSet::new());
    if groups.len() != 1 {
        return None;
    }
    let shape = build(q, &groups.pop()?, &mut BTreeSet::new())?;
    Some(into_tree(shape))
}

fn build<'q>(q: &'q Cq, atoms: &[usize], bound: &mut BTreeSet<&'q str>) -> Option<Shape> {
    let remaining = |i: usize| -> BTreeSet<&'q str> {
        q.body[i].vars().into_iter().filter(|v| !bound.contains(v)).collect()
    };
    if let [i] = atoms {
        if remaining(*i).is_empty() {
            return Some(Shape::Leaf(*i, Vec::new()));
        }
    }
    let common = atoms
        .iter()
        .map(|&i| remaining(i))
        .reduce(|a, b| a.intersection(&b).copied().collect())?;
    let x = *common.first()?;
    bound.insert(x);
    let children = components(q, atoms, bound)
        .iter()
        .map(|group| build(q, group, bound))
        .collect::<Option<Vec<_>>>();
    bound.remove(x);
    Some(Shape::Inner(x.to_string(), Vec::new(), children?))
}

/// Splits `atoms` into groups connected through variables outside `bound`,
/// ordered by least atom id.
fn components(q: &Cq, atoms: &[usize], bound: &BTreeSet<&str>) -> Vec<Vec<usize>> {
    let free = |i: usize| -> BTreeSet<&str> {
        q.body[i].vars().into_iter().filter(|v| !bound.contains(v)).collect()
    };
    let mut groups: Vec<(BTreeSet<&str>, Vec<usize>)> = Vec::new();
    for &i in atoms {
        let vars = free(i);
        let mut merged = (vars, vec![i]);
        let mut k = 0;
        while k < groups.len() {
            if groups[k].0.iter().any(|v| merged.0.contains(v)) {
                let (vs, ids) = groups.remove(k);
                merged.0.extend(vs);
                merged.1.extend(ids);
            } else {
                k += 1;
            }
        }
        groups.push(merged);
    }
    let mut out: Vec<Vec<usize>> = groups
        .into_iter()
        .map(|(_, mut ids)| {
            ids.sort_unstable();
            ids
        })
        .collect();
    out.sort();
    out
}

/// Removes inner nodes with a single child. A chain of single-child inner
/// nodes keeps its topmost label; a chain ending in a leaf is replaced by the
/// leaf, except at the root. Removed variables are recorded as absorbed.
pub fn compact_q_tree(t: &QTree) -> QTree {
    let shape = match compact(to_shape(t, 0)) {
        leaf @ Shape::Leaf(..) if !t.nodes[0].is_leaf() => {
            let x = t.nodes[0].var().expect("inner root").to_string();
            let absorbed = t.nodes[0].absorbed.clone();
            match leaf {
                Shape::Leaf(i, mut below) => {
                    below.retain(|v| *v != x && !absorbed.contains(v));
                    Shape::Inner(x, absorbed, vec![Shape::Leaf(i, below)])
                }
                inner => inner,
            }
        }
        other => other,
    };
    into_tree(shape)
}

fn compact(shape: Shape) -> Shape {
    match shape {
        leaf @ Shape::Leaf(..) => leaf,
        Shape::Inner(x, mut absorbed, children) => {
            let mut children: Vec<Shape> = children.into_iter().map(compact).collect();
            if children.len() != 1 {
                return Shape::Inner(x, absorbed, children);
            }
            match children.pop().expect("one child") {
                Shape::Leaf(i, below) => {
                    absorbed.insert(0, x);
                    absorbed.extend(below);
                    Shape::Leaf(i, absorbed)
                }
                Shape::Inner(y, below, grandchildren) => {
                    absorbed.push(y);
                    absorbed.extend(below);
                    Shape::Inner(x, absorbed, grandchildren)
                }
            }
        }
    }
}
