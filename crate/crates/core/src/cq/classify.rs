use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use super::Cq;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Classification {
    pub full: bool,
    pub connected: bool,
    pub has_self_joins: bool,
    pub acyclic: bool,
    pub hierarchical: bool,
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "full={}", self.full)?;
        writeln!(f, "connected={}", self.connected)?;
        writeln!(f, "self_joins={}", self.has_self_joins)?;
        writeln!(f, "acyclic={}", self.acyclic)?;
        writeln!(f, "hierarchical={}", self.hierarchical)
    }
}

/// Why a query is not hierarchical.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    /// Body variables missing from the head.
    NotFull(Vec<String>),
    /// `atoms(x)` and `atoms(y)` overlap without one containing the other;
    /// the witnesses are atoms in `atoms(x) \ atoms(y)`, the intersection,
    /// and `atoms(y) \ atoms(x)`.
    Pair {
        x: String,
        y: String,
        only_x: usize,
        both: usize,
        only_y: usize,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NotFull(vars) => write!(f, "variables {} do not occur in the head", vars.join(",")),
            Violation::Pair {
                x,
                y,
                only_x,
                both,
                only_y,
            } => write!(
                f,
                "variables {x} and {y}: atom {only_x} has only {x}, atom {both} has both, atom {only_y} has only {y}"
            ),
        }
    }
}

pub fn classify(q: &Cq) -> Classification {
    Classification {
        full: q.head_vars_missing_from_body().is_empty() && not_in_head(q).is_empty(),
        connected: is_connected(q),
        has_self_joins: has_self_joins(q),
        acyclic: is_acyclic(q),
        hierarchical: hierarchy_violation(q).is_none(),
    }
}

fn not_in_head(q: &Cq) -> Vec<String> {
    let head: BTreeSet<&str> = q.head.iter().map(String::as_str).collect();
    q.variables()
        .into_iter()
        .filter(|v| !head.contains(v))
        .map(str::to_string)
        .collect()
}

/// The first obstruction to being hierarchical, or `None` for an HCQ.
/// Non-full queries are never hierarchical.
pub fn hierarchy_violation(q: &Cq) -> Option<Violation> {
    let missing = not_in_head(q);
    if !missing.is_empty() {
        return Some(Violation::NotFull(missing));
    }
    let atoms: BTreeMap<&str, BTreeSet<usize>> = q.variables().into_iter().map(|x| (x, q.atoms_of(x))).collect();
    for (x, ax) in &atoms {
        for (y, ay) in atoms.range::<&str, _>((std::ops::Bound::Excluded(x), std::ops::Bound::Unbounded)) {
            let (Some(&only_x), Some(&only_y), Some(&both)) =
                (ax.difference(ay).next(), ay.difference(ax).next(), ax.intersection(ay).next())
            else {
                continue;
            };
            return Some(Violation::Pair {
                x: x.to_string(),
                y: y.to_string(),
                only_x,
                both,
                only_y,
            });
        }
    }
    None
}

fn has_self_joins(q: &Cq) -> bool {
    let mut seen = BTreeSet::new();
    q.body.iter().any(|a| !seen.insert(a.relation.as_str()))
}

/// Connectivity of the graph whose nodes are atoms and whose edges join
/// atoms sharing a variable.
fn is_connected(q: &Cq) -> bool {
    let m = q.body.len();
    let mut reached = vec![false; m];
    let mut stack = vec![0];
    reached[0] = true;
    while let Some(i) = stack.pop() {
        let vars = q.body[i].vars();
        for (j, seen) in reached.iter_mut().enumerate() {
            if !*seen && q.body[j].vars().iter().any(|v| vars.contains(v)) {
                *seen = true;
                stack.push(j);
            }
        }
    }
    reached.into_iter().all(|r| r)
}

/// GYO reduction: repeatedly drop variables that occur in a single edge and
/// edges contained in another edge. Acyclic iff nothing is left.
pub fn is_acyclic(q: &Cq) -> bool {
    let mut edges: Vec<BTreeSet<&str>> = q.body.iter().map(|a| a.vars()).collect();
    loop {
        let mut changed = false;
        let mut count: BTreeMap<&str, usize> = BTreeMap::new();
        for e in &edges {
            for v in e {
                *count.entry(v).or_default() += 1;
            }
        }
        for e in &mut edges {
            let before = e.len();
            e.retain(|v| count[v] > 1);
            changed |= e.len() != before;
        }
        let mut k = 0;
        while k < edges.len() {
            let contained = edges[k].is_empty()
                || (0..edges.len()).any(|j| j != k && edges[k].is_subset(&edges[j]));
            if contained {
                edges.swap_remove(k);
                changed = true;
            } else {
                k += 1;
            }
        }
        if edges.is_empty() {
            return true;
        }
        if !changed {
            return false;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cq::parse_cq;
    use crate::samples;

    fn c(text: &str) -> Classification {
        classify(&parse_cq(text, None).unwrap())
    }

    #[test]
    fn running_queries() {
        let q0 = c(samples::Q0);
        assert!(q0.full && q0.hierarchical && q0.acyclic && q0.connected);
        assert!(!q0.has_self_joins);
        let q1 = c(samples::Q1);
        assert!(!q1.hierarchical && q1.has_self_joins);
        let single = c("Q(x,y) <- R(x,y)");
        assert!(single.hierarchical && single.acyclic && single.connected);
    }

    #[test]
    fn q1_violation_names_a_pair() {
        let q1 = parse_cq(samples::Q1, None).unwrap();
        match hierarchy_violation(&q1).unwrap() {
            Violation::Pair { x, y, only_x, both, only_y } => {
                assert_eq!((x.as_str(), y.as_str()), ("x", "y"));
                assert!(q1.body[only_x].has_var("x") && !q1.body[only_x].has_var("y"));
                assert!(q1.body[both].has_var("x") && q1.body[both].has_var("y"));
                assert!(q1.body[only_y].has_var("y") && !q1.body[only_y].has_var("x"));
            }
            v => panic!("{v:?}"),
        }
    }

    #[test]
    fn non_full_is_not_hierarchical() {
        let q = parse_cq("Q(x) <- R(x,y)", None).unwrap();
        assert_eq!(hierarchy_violation(&q), Some(Violation::NotFull(vec!["y".into()])));
        assert!(!classify(&q).full);
    }

    #[test]
    fn connectivity() {
        assert!(!c("Q(x,y) <- T(x), T(y)").connected);
        assert!(!c("Q(x) <- T(x), R(1,2)").connected);
        assert!(c("Q(x,y,z) <- R(x,y), R(y,z)").connected);
        assert!(c("Q() <- R(1,2)").connected);
    }

    #[test]
    fn acyclicity() {
        assert!(!c("Q(x,y,z) <- R(x,y), R(y,z), R(z,x)").acyclic);
        assert!(c("Q(x,y,z) <- R(x,y), R(y,z), U(x,y,z)").acyclic);
        assert!(c("Q(x,y,z) <- R(x,y), R(y,z)").acyclic);
        let path = c("Q(x,y,z) <- R(x,y), S(y,z), T(z)");
        assert!(path.acyclic && !path.hierarchical);
    }
}
