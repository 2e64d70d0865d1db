use std::collections::BTreeMap;

use crate::cq::{Atom, Cq, Term};
use crate::error::Result;
use crate::model::{EqualityPredicate, KeyGuard, KeySide, UnaryPredicate};
use crate::pcea::{Pcea, Transition};

/// The fresh variable. It sorts before every identifier, so the q-tree of
/// the lifted query is rooted at it.
pub const FRESH_VAR: &str = "*";

/// `Q*(x*, x̄) <- R_0(x*, x̄_0), ...`: connected whenever `q` is hierarchical.
pub fn lift_disconnected(q: &Cq) -> Cq {
    let fresh = || Term::Var(FRESH_VAR.to_string());
    Cq {
        name: q.name.clone(),
        head: std::iter::once(FRESH_VAR.to_string()).chain(q.head.iter().cloned()).collect(),
        body: q
            .body
            .iter()
            .map(|a| Atom::new(&a.relation, std::iter::once(fresh()).chain(a.args.iter().cloned()).collect()))
            .collect(),
    }
}

/// Removes the fresh attribute from every predicate of an automaton
/// compiled from a lifted query, so it runs on the original schema.
pub fn strip_lifted(a: &Pcea) -> Result<Pcea> {
    let transitions = a
        .transitions()
        .iter()
        .map(|t| Transition {
            sources: t.sources.clone(),
            unary: strip_unary(&t.unary),
            binaries: t.binaries.iter().map(strip_binary).collect(),
            labels: t.labels.clone(),
            target: t.target,
        })
        .collect();
    Pcea::new(
        a.states().map(|q| a.state_name(q).to_string()).collect(),
        a.labels().to_vec(),
        a.finals().clone(),
        transitions,
    )
}

fn strip_unary(u: &UnaryPredicate) -> UnaryPredicate {
    UnaryPredicate {
        relation: u.relation.clone(),
        constants: u
            .constants
            .iter()
            .filter(|(&k, _)| k > 0)
            .map(|(&k, v)| (k - 1, v.clone()))
            .collect(),
        equal_groups: u
            .equal_groups
            .iter()
            .map(|g| g.iter().filter(|&&k| k > 0).map(|k| k - 1).collect::<Vec<_>>())
            .filter(|g| g.len() > 1)
            .collect(),
    }
}

/// The fresh variable is the least shared variable, so it is key component 0.
fn strip_side(side: &KeySide) -> KeySide {
    KeySide(
        side.0
            .iter()
            .map(|(rel, g)| {
                let key = g.key.iter().skip(1).map(|k| k - 1).collect();
                (rel.clone(), KeyGuard { pattern: strip_unary(&g.pattern), key })
            })
            .collect::<BTreeMap<_, _>>(),
    )
}

fn strip_binary(b: &EqualityPredicate) -> EqualityPredicate {
    EqualityPredicate {
        left: strip_side(&b.left),
        right: strip_side(&b.right),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cq::{classify, parse_cq};

    #[test]
    fn lifted_query_is_connected() {
        let q = parse_cq("Q(x,y) <- T(x), T2(y)", None).unwrap();
        let l = lift_disconnected(&q);
        assert_eq!(l.to_string(), "Q(*,x,y) <- T(*,x), T2(*,y).");
        let c = classify(&l);
        assert!(c.connected && c.hierarchical);
    }

    #[test]
    fn strip_shifts_indices() {
        let u = UnaryPredicate::relation("R")
            .with_constant(2, 7.into())
            .with_equal_group(vec![1, 3]);
        let s = strip_unary(&u);
        assert_eq!(s.constants, BTreeMap::from([(1, 7.into())]));
        assert_eq!(s.equal_groups, vec![vec![0, 2]]);
        let b = EqualityPredicate::simple(UnaryPredicate::relation("T"), vec![0, 1], UnaryPredicate::relation("S"), vec![0, 2]);
        let s = strip_binary(&b);
        assert_eq!(s.left.0["T"].key, vec![0]);
        assert_eq!(s.right.0["S"].key, vec![1]);
    }
}
