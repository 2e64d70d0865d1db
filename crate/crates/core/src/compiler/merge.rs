use std::collections::{BTreeMap, BTreeSet};

use crate::cq::{Atom, Cq, Term};
use crate::error::{Error, Result};
use crate::model::{EqualityPredicate, UnaryPredicate};

/// Union-find over the positions of one or two merged atoms and the terms
/// occurring at them.
struct Classes {
    parent: Vec<usize>,
}

impl Classes {
    fn new(n: usize) -> Self {
        Classes {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut a: usize) -> usize {
        while self.parent[a] != a {
            self.parent[a] = self.parent[self.parent[a]];
            a = self.parent[a];
        }
        a
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        self.parent[ra] = rb;
    }
}

/// One merged side: a relation, its arity and the atoms folded into it.
struct Side<'q> {
    relation: &'q str,
    arity: usize,
    atoms: Vec<&'q Atom>,
}

fn side<'q>(q: &'q Cq, ids: &BTreeSet<usize>) -> Result<Side<'q>> {
    let mut iter = ids.iter();
    let first = iter
        .next()
        .ok_or_else(|| Error::Compile("self-join set must be non-empty".into()))?;
    let atom = q
        .body
        .get(*first)
        .ok_or_else(|| Error::Compile(format!("no atom {first}")))?;
    let mut atoms = vec![atom];
    for &i in iter {
        let a = q.body.get(i).ok_or_else(|| Error::Compile(format!("no atom {i}")))?;
        if a.relation != atom.relation || a.arity() != atom.arity() {
            return Err(Error::Compile(format!(
                "atoms {first} and {i} do not share a relation name"
            )));
        }
        atoms.push(a);
    }
    Ok(Side {
        relation: &atom.relation,
        arity: atom.arity(),
        atoms,
    })
}

/// Merges the given sides: positions of side `s` are numbered after those
/// of earlier sides, and each position is unioned with the term every atom
/// of its side carries there. Returns one merged atom per side, or `None`
/// when some class holds two distinct constants.
fn merge(sides: &[Side<'_>]) -> Option<Vec<Atom>> {
    let positions: usize = sides.iter().map(|s| s.arity).sum();
    let mut terms: BTreeMap<&Term, usize> = BTreeMap::new();
    for s in sides {
        for a in &s.atoms {
            for t in &a.args {
                let next = positions + terms.len();
                terms.entry(t).or_insert(next);
            }
        }
    }
    let mut uf = Classes::new(positions + terms.len());
    let mut offset = 0;
    for s in sides {
        for a in &s.atoms {
            for (k, t) in a.args.iter().enumerate() {
                uf.union(offset + k, terms[t]);
            }
        }
        offset += s.arity;
    }
    // Representative term per class: its constant, else its least variable.
    let mut repr: BTreeMap<usize, Term> = BTreeMap::new();
    for (t, &node) in &terms {
        let root = uf.find(node);
        match (repr.get(&root), t) {
            (Some(Term::Const(c)), Term::Const(d)) if c != d => return None,
            (Some(Term::Const(_)), _) => {}
            (None, _) | (Some(Term::Var(_)), Term::Const(_)) => {
                repr.insert(root, (*t).clone());
            }
            // Terms iterate in order, so the first variable seen is the least.
            (Some(Term::Var(_)), Term::Var(_)) => {}
        }
    }
    let mut out = Vec::with_capacity(sides.len());
    let mut offset = 0;
    for s in sides {
        let args = (0..s.arity).map(|k| repr[&uf.find(offset + k)].clone()).collect();
        out.push(Atom::new(s.relation, args));
        offset += s.arity;
    }
    Some(out)
}

/// `t_A`: the atom whose homomorphic images are exactly the tuples that a
/// single homomorphism maps every atom of `A` onto. Classes are named by
/// their least variable or carry their constant. `None` if no tuple can be
/// such an image (conflicting constants).
pub fn merge_self_join_atom(q: &Cq, a: &BTreeSet<usize>) -> Result<Option<Atom>> {
    let s = side(q, a)?;
    Ok(merge(&[s]).map(|mut v| v.pop().expect("one side")))
}

/// `(t⃖, t⃗)` for a pair of self-join sets, over their joint classes.
pub fn merge_atom_pair(q: &Cq, a1: &BTreeSet<usize>, a2: &BTreeSet<usize>) -> Result<Option<(Atom, Atom)>> {
    let sides = [side(q, a1)?, side(q, a2)?];
    Ok(merge(&sides).map(|mut v| {
        let right = v.pop().expect("two sides");
        let left = v.pop().expect("two sides");
        (left, right)
    }))
}

/// `B_{S(ȳ), T(z̄)}`: both patterns, keyed by the shared variables in
/// lexicographic order, each projected at its first occurrence.
pub fn atom_pair_predicate(left: &Atom, right: &Atom) -> EqualityPredicate {
    let shared: Vec<&str> = left.vars().intersection(&right.vars()).copied().collect();
    EqualityPredicate::simple(left.pattern(), first_positions(left, &shared), right.pattern(), first_positions(right, &shared))
}

/// The left guard of `B_{R_j, S}` as a pattern and key, for assembling
/// multi-relation guard sets.
pub fn left_guard(left: &Atom, right: &Atom) -> (UnaryPredicate, Vec<usize>) {
    let shared: Vec<&str> = left.vars().intersection(&right.vars()).copied().collect();
    (left.pattern(), first_positions(left, &shared))
}

fn first_positions(atom: &Atom, vars: &[&str]) -> Vec<usize> {
    vars.iter()
        .map(|v| atom.args.iter().position(|t| t.var() == Some(v)).expect("shared variable"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cq::parse_cq;
    use crate::model::Tuple;

    fn ids(v: &[usize]) -> BTreeSet<usize> {
        v.iter().copied().collect()
    }

    #[test]
    fn singleton_is_isomorphic() {
        let q = parse_cq("Q(x,y) <- R(x,y)", None).unwrap();
        assert_eq!(merge_self_join_atom(&q, &ids(&[0])).unwrap().unwrap().to_string(), "R(x,y)");
    }

    #[test]
    fn repeated_variable_forces_equality() {
        let q = parse_cq("Q(x,z) <- R(x,x,z)", None).unwrap();
        let t = merge_self_join_atom(&q, &ids(&[0])).unwrap().unwrap();
        assert_eq!(t.to_string(), "R(x,x,z)");
        assert!(t.pattern().eval(&Tuple::ints("R", &[1, 1, 2])));
        assert!(!t.pattern().eval(&Tuple::ints("R", &[1, 3, 2])));
    }

    #[test]
    fn two_atoms_positional_classes() {
        let q = parse_cq("Q2(x,y,z,v) <- R(x,y,z), R(x,y,v), U(x,y)", None).unwrap();
        let t = merge_self_join_atom(&q, &ids(&[0, 1])).unwrap().unwrap();
        assert_eq!(t.to_string(), "R(x,y,v)");
        assert_eq!(t.pattern(), UnaryPredicate::relation("R"));

        let (l, r) = merge_atom_pair(&q, &ids(&[0, 1]), &ids(&[2])).unwrap().unwrap();
        let b = atom_pair_predicate(&l, &r);
        assert_eq!(b.left.0["R"].key, vec![0, 1]);
        assert_eq!(b.right.0["U"].key, vec![0, 1]);
    }

    #[test]
    fn swapped_arguments_collapse() {
        let q = parse_cq("Q(x,y) <- R(x,y), R(y,x)", None).unwrap();
        let t = merge_self_join_atom(&q, &ids(&[0, 1])).unwrap().unwrap();
        assert_eq!(t.to_string(), "R(x,x)");
    }

    #[test]
    fn pair_key_is_shared_class() {
        let q = parse_cq("Q(x,y) <- T(x), S(x,y)", None).unwrap();
        let (l, r) = merge_atom_pair(&q, &ids(&[0]), &ids(&[1])).unwrap().unwrap();
        assert_eq!(atom_pair_predicate(&l, &r), crate::samples::tx_sxy());
        let q = parse_cq("Q(x,y) <- R(x,y), R(x,y)", None).unwrap();
        let (l, r) = merge_atom_pair(&q, &ids(&[0]), &ids(&[1])).unwrap().unwrap();
        let b = atom_pair_predicate(&l, &r);
        assert_eq!((b.left.0["R"].key.clone(), b.right.0["R"].key.clone()), (vec![0, 1], vec![0, 1]));
    }

    #[test]
    fn constants() {
        let q = parse_cq("Q(x) <- R(x,1), R(x,2), R(x,1)", None).unwrap();
        assert!(merge_self_join_atom(&q, &ids(&[0, 1])).unwrap().is_none());
        let t = merge_self_join_atom(&q, &ids(&[0, 2])).unwrap().unwrap();
        assert_eq!(t.to_string(), "R(x,1)");
        let q = parse_cq("Q(x) <- R(x,x), R(x,1)", None).unwrap();
        assert_eq!(merge_self_join_atom(&q, &ids(&[0, 1])).unwrap().unwrap().to_string(), "R(1,1)");
    }

    #[test]
    fn pair_can_constrain_a_side() {
        // The left side forces u = v, so the right tuple needs equal attributes.
        let q = parse_cq("Q(u,v) <- R(u,v), R(v,u), S(u,v)", None).unwrap();
        let (_, r) = merge_atom_pair(&q, &ids(&[0, 1]), &ids(&[2])).unwrap().unwrap();
        assert_eq!(r.to_string(), "S(u,u)");
    }

    #[test]
    fn mixed_relations_rejected() {
        let q = parse_cq("Q(x,y) <- T(x), S(x,y)", None).unwrap();
        assert!(merge_self_join_atom(&q, &ids(&[0, 1])).is_err());
        assert!(merge_self_join_atom(&q, &ids(&[])).is_err());
    }
}
