//! Reference semantics by exhaustive search, for desk-scale inputs.

use std::collections::{BTreeMap, BTreeSet};

use super::{Atom, Cq, Term};
use crate::error::{Error, Result};
use crate::model::{Tuple, Valuation, Value};

/// A database with duplicates; tuple identifiers are indices.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct BagDatabase {
    tuples: Vec<Tuple>,
}

impl BagDatabase {
    pub fn new(tuples: Vec<Tuple>) -> Self {
        BagDatabase { tuples }
    }

    pub fn tuples(&self) -> &[Tuple] {
        &self.tuples
    }

    pub fn len(&self) -> usize {
        self.tuples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tuples.is_empty()
    }

    /// `U(D)` with `mult_D`.
    pub fn multiplicities(&self) -> BTreeMap<&Tuple, usize> {
        let mut m = BTreeMap::new();
        for t in &self.tuples {
            *m.entry(t).or_default() += 1;
        }
        m
    }
}

/// `D_n[S]`: the first `n + 1` tuples of the stream.
pub fn database_at(stream: &[Tuple], n: usize) -> Result<BagDatabase> {
    if n >= stream.len() {
        return Err(Error::Input(format!(
            "position {n} is beyond a stream prefix of length {}",
            stream.len()
        )));
    }
    Ok(BagDatabase::new(stream[..=n].to_vec()))
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct THomomorphism {
    /// `map[i]` is the tuple identifier atom `i` is sent to.
    pub map: Vec<usize>,
    /// The induced assignment `h_η`.
    pub assignment: BTreeMap<String, Value>,
}

impl THomomorphism {
    /// `η̂`: atom `i` (as a decimal label) maps to `{η(i)}`.
    pub fn valuation(&self) -> Valuation {
        Valuation::from_pairs(self.map.iter().enumerate().map(|(i, &p)| (i.to_string(), p)))
    }

    pub fn head_tuple(&self, q: &Cq) -> Tuple {
        Tuple::new(&q.name, q.head.iter().map(|x| self.assignment[x].clone()))
    }
}

/// Extends `h` so that `atom` maps onto `t`; returns the variables newly bound.
fn unify(atom: &Atom, t: &Tuple, h: &mut BTreeMap<String, Value>) -> Option<Vec<String>> {
    if *t.relation != *atom.relation || t.arity() != atom.arity() {
        return None;
    }
    let mut added = Vec::new();
    for (term, v) in atom.args.iter().zip(&t.values) {
        let ok = match term {
            Term::Const(c) => c == v,
            Term::Var(x) => match h.get(x) {
                Some(bound) => bound == v,
                None => {
                    h.insert(x.clone(), v.clone());
                    added.push(x.clone());
                    true
                }
            },
        };
        if !ok {
            for x in &added {
                h.remove(x);
            }
            return None;
        }
    }
    Some(added)
}

/// Backtracks over atoms in body order, trying every candidate for each.
fn search(
    q: &Cq,
    candidates: &[(&Tuple, usize)],
    i: usize,
    h: &mut BTreeMap<String, Value>,
    chosen: &mut Vec<usize>,
    out: &mut impl FnMut(&[usize], &BTreeMap<String, Value>),
) {
    if i == q.body.len() {
        out(chosen, h);
        return;
    }
    for (k, &(t, _)) in candidates.iter().enumerate() {
        if let Some(added) = unify(&q.body[i], t, h) {
            chosen.push(k);
            search(q, candidates, i + 1, h, chosen, out);
            chosen.pop();
            for x in added {
                h.remove(&x);
            }
        }
    }
}

/// Every t-homomorphism from `q` to `d`, in lexicographic order of `map`.
pub fn t_homomorphisms(q: &Cq, d: &BagDatabase) -> Vec<THomomorphism> {
    let candidates: Vec<(&Tuple, usize)> = d.tuples.iter().map(|t| (t, 1)).collect();
    let mut out = Vec::new();
    search(q, &candidates, 0, &mut BTreeMap::new(), &mut Vec::new(), &mut |map, h| {
        out.push(THomomorphism {
            map: map.to_vec(),
            assignment: h.clone(),
        })
    });
    out
}

/// `⟦Q⟧(D)` as a bag: one head tuple per t-homomorphism.
pub fn bag_semantics_thom(q: &Cq, d: &BagDatabase) -> BTreeMap<Tuple, usize> {
    let mut bag = BTreeMap::new();
    for eta in t_homomorphisms(q, d) {
        *bag.entry(eta.head_tuple(q)).or_default() += 1;
    }
    bag
}

/// Multiplicity semantics: for each homomorphism into `U(D)`, the product
/// of the multiplicities of the atom images, summed per head tuple.
pub fn bag_semantics_multiplicity(q: &Cq, d: &BagDatabase) -> BTreeMap<Tuple, usize> {
    let candidates: Vec<(&Tuple, usize)> = d.multiplicities().into_iter().collect();
    let mut bag = BTreeMap::new();
    search(q, &candidates, 0, &mut BTreeMap::new(), &mut Vec::new(), &mut |chosen, h| {
        // Atoms with identical images contribute one factor per atom.
        let mult: usize = chosen.iter().map(|&k| candidates[k].1).product();
        let head = Tuple::new(&q.name, q.head.iter().map(|x| h[x].clone()));
        *bag.entry(head).or_default() += mult;
    });
    bag
}

/// `⟦Q⟧_n(S)`: valuations of the t-homomorphisms into `D_n[S]` whose image
/// contains position `n`, so each output is reported exactly once, at the
/// position of its last tuple.
pub fn cq_stream_semantics(q: &Cq, stream: &[Tuple], n: usize) -> Result<BTreeSet<Valuation>> {
    cq_stream_semantics_windowed(q, stream, n, None)
}

/// As [`cq_stream_semantics`], keeping only valuations whose least position
/// is at least `n - w`.
pub fn cq_stream_semantics_windowed(
    q: &Cq,
    stream: &[Tuple],
    n: usize,
    window: Option<usize>,
) -> Result<BTreeSet<Valuation>> {
    let d = database_at(stream, n)?;
    Ok(t_homomorphisms(q, &d)
        .into_iter()
        .filter(|eta| eta.map.iter().max() == Some(&n))
        .map(|eta| eta.valuation())
        .filter(|v| v.within_window(n, window))
        .collect())
}
