//! Seeded generators for queries, databases and streams.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::cq::{Atom, Cq, Term};
use crate::model::{Schema, Tuple, Value};

/// Shape of generated hierarchical queries.
#[derive(Clone, Debug)]
pub struct HcqShape {
    pub max_atoms: usize,
    /// Variables per connected component.
    pub max_vars: usize,
    pub components: usize,
    /// Draw relation names from a small pool, producing self-joins.
    pub self_joins: bool,
    /// Probability that an atom gets an extra constant argument.
    pub constant_prob: f64,
    /// Probability that an atom repeats one of its variables.
    pub repeat_prob: f64,
}

impl Default for HcqShape {
    fn default() -> Self {
        HcqShape {
            max_atoms: 4,
            max_vars: 3,
            components: 1,
            self_joins: false,
            constant_prob: 0.15,
            repeat_prob: 0.15,
        }
    }
}

/// A random full HCQ: variables form a forest with one tree per component,
/// and every atom mentions exactly the variables on the root path of some
/// node, in shuffled order.
pub fn random_hcq<R: Rng>(rng: &mut R, shape: &HcqShape) -> Cq {
    let mut parents: Vec<Option<usize>> = Vec::new();
    let mut roots = Vec::new();
    for _ in 0..shape.components.max(1) {
        let base = parents.len();
        roots.push(base);
        let n = rng.gen_range(1..=shape.max_vars.max(1));
        for k in 0..n {
            parents.push(if k == 0 { None } else { Some(base + rng.gen_range(0..k)) });
        }
    }
    let name = |v: usize| ((b'a' + (v % 26) as u8) as char).to_string() + &"'".repeat(v / 26);
    let path = |mut v: usize| {
        let mut p = vec![v];
        while let Some(u) = parents[v] {
            p.push(u);
            v = u;
        }
        p
    };
    let m = rng.gen_range(shape.components.max(1)..=shape.max_atoms.max(shape.components).max(1));
    let mut body = Vec::with_capacity(m);
    for k in 0..m {
        // The first atoms cover every component.
        let node = if k < roots.len() {
            let comp_end = roots.get(k + 1).copied().unwrap_or(parents.len());
            rng.gen_range(roots[k]..comp_end)
        } else {
            rng.gen_range(0..parents.len())
        };
        let mut args: Vec<Term> = path(node).into_iter().map(|v| Term::Var(name(v))).collect();
        args.shuffle(rng);
        if rng.gen_bool(shape.repeat_prob) {
            let dup = args[rng.gen_range(0..args.len())].clone();
            args.insert(rng.gen_range(0..=args.len()), dup);
        }
        if rng.gen_bool(shape.constant_prob) {
            args.insert(rng.gen_range(0..=args.len()), Term::Const(Value::Int(rng.gen_range(0..3))));
        }
        let relation = if shape.self_joins {
            format!("{}{}", ["R", "S"][rng.gen_range(0..2)], args.len())
        } else {
            format!("R{k}")
        };
        body.push(Atom::new(&relation, args));
    }
    let head: BTreeSet<&str> = body.iter().flat_map(Atom::vars).collect();
    let head = head.into_iter().map(str::to_string).collect();
    Cq {
        name: "Q".into(),
        head,
        body,
    }
}

/// A random full CQ over `R/2`, `S/2`, `T/1` with variables `x, y, z`, not
/// necessarily hierarchical.
pub fn random_cq<R: Rng>(rng: &mut R, max_atoms: usize) -> Cq {
    let rels = [("R", 2), ("S", 2), ("T", 1)];
    let m = rng.gen_range(1..=max_atoms.max(1));
    let body: Vec<Atom> = (0..m)
        .map(|_| {
            let (r, arity) = rels[rng.gen_range(0..rels.len())];
            let args = (0..arity)
                .map(|_| {
                    if rng.gen_bool(0.1) {
                        Term::Const(Value::Int(rng.gen_range(0..3)))
                    } else {
                        Term::Var(["x", "y", "z"][rng.gen_range(0..3)].to_string())
                    }
                })
                .collect();
            Atom::new(r, args)
        })
        .collect();
    let head: BTreeSet<&str> = body.iter().flat_map(Atom::vars).collect();
    Cq {
        name: "Q".into(),
        head: head.into_iter().map(str::to_string).collect(),
        body,
    }
}

/// The relations a query mentions, with their arities.
pub fn query_schema(q: &Cq) -> Schema {
    let mut s = Schema::new();
    for a in &q.body {
        if s.arity(&a.relation).is_none() {
            s.add(&a.relation, a.arity()).expect("valid relation");
        }
    }
    s
}

/// Uniform tuples over `schema` with integer values in `0..domain`.
pub fn random_stream<R: Rng>(rng: &mut R, schema: &Schema, len: usize, domain: i64) -> Vec<Tuple> {
    let rels: Vec<(&str, usize)> = schema.relations().collect();
    (0..len)
        .map(|_| {
            let (r, arity) = rels[rng.gen_range(0..rels.len())];
            Tuple::new(r, (0..arity).map(|_| Value::Int(rng.gen_range(0..domain))))
        })
        .collect()
}

/// Self-join-free HCQ families used for size measurements, with `m` atoms.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Family {
    /// `R_i(x, y_i)`.
    Star,
    /// `R_i(x_1, ..., x_i)`: a chain of nested variables.
    Chain,
    /// Binary tree of variables, atoms at the leaves' root paths.
    Balanced,
}

pub fn hcq_family(family: Family, m: usize) -> Cq {
    let var = |k: usize| format!("x{k}");
    let body: Vec<Atom> = (0..m)
        .map(|i| {
            let vars: Vec<String> = match family {
                Family::Star => vec!["x".into(), format!("y{i}")],
                Family::Chain => (0..=i).map(var).collect(),
                Family::Balanced => {
                    // Heap-numbered node i + 1 and its ancestors.
                    let mut n = i + 1;
                    let mut path = vec![];
                    while n >= 1 {
                        path.push(var(n));
                        n /= 2;
                    }
                    path.reverse();
                    path
                }
            };
            Atom::new(&format!("R{i}"), vars.into_iter().map(Term::Var).collect())
        })
        .collect();
    let head: BTreeSet<&str> = body.iter().flat_map(Atom::vars).collect();
    Cq {
        name: "Q".into(),
        head: head.into_iter().map(str::to_string).collect(),
        body,
    }
}
