//! Conjunctive queries with bag semantics.
//!
//! Text syntax: `Q(x,y) <- T(x), S(x,y), R(x,y).` Constants are integers or
//! quoted strings; `:-` is accepted in place of `<-` and the final period is
//! optional. Atom identifiers are body positions, starting at 0.

mod classify;
mod parse;
mod qtree;
pub mod semantics;

pub use classify::{classify, hierarchy_violation, is_acyclic, Classification, Violation};
pub use parse::parse_cq;
pub use qtree::{build_q_tree, compact_q_tree, QLabel, QNode, QTree};
pub use semantics::{
    bag_semantics_multiplicity, bag_semantics_thom, cq_stream_semantics,
    cq_stream_semantics_windowed, database_at,
    t_homomorphisms, BagDatabase, THomomorphism,
};

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::model::{UnaryPredicate, Value};

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Var(String),
    Const(Value),
}

impl Term {
    pub fn var(&self) -> Option<&str> {
        match self {
            Term::Var(v) => Some(v),
            Term::Const(_) => None,
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => f.write_str(v),
            Term::Const(Value::Int(n)) => write!(f, "{n}"),
            Term::Const(Value::Str(s)) => write!(f, "\"{s}\""),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Atom {
    pub relation: String,
    pub args: Vec<Term>,
}

impl Atom {
    pub fn new(relation: &str, args: Vec<Term>) -> Self {
        Atom {
            relation: relation.to_string(),
            args,
        }
    }

    pub fn arity(&self) -> usize {
        self.args.len()
    }

    pub fn vars(&self) -> BTreeSet<&str> {
        self.args.iter().filter_map(Term::var).collect()
    }

    pub fn has_var(&self, x: &str) -> bool {
        self.args.iter().any(|t| t.var() == Some(x))
    }

    /// `U_{R(x̄)}`: the tuples this atom can be mapped to on its own.
    pub fn pattern(&self) -> UnaryPredicate {
        let mut u = UnaryPredicate::relation(&self.relation);
        let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        for (i, t) in self.args.iter().enumerate() {
            match t {
                Term::Const(c) => {
                    u.constants.insert(i, c.clone());
                }
                Term::Var(v) => groups.entry(v).or_default().push(i),
            }
        }
        u.equal_groups = groups.into_values().filter(|g| g.len() > 1).collect();
        u
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.relation)?;
        for (i, t) in self.args.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{t}")?;
        }
        f.write_str(")")
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Cq {
    pub name: String,
    pub head: Vec<String>,
    pub body: Vec<Atom>,
}

impl Cq {
    pub fn atom_count(&self) -> usize {
        self.body.len()
    }

    /// Variables occurring in the body.
    pub fn variables(&self) -> BTreeSet<&str> {
        self.body.iter().flat_map(Atom::vars).collect()
    }

    /// `atoms(x)`: identifiers of the atoms mentioning `x`.
    pub fn atoms_of(&self, x: &str) -> BTreeSet<usize> {
        (0..self.body.len()).filter(|&i| self.body[i].has_var(x)).collect()
    }

    pub fn head_vars_missing_from_body(&self) -> Vec<&str> {
        let body = self.variables();
        self.head
            .iter()
            .map(String::as_str)
            .filter(|v| !body.contains(v))
            .collect()
    }

    /// `Σ (1 + arity)` over the body atoms.
    pub fn size(&self) -> usize {
        self.body.iter().map(|a| 1 + a.arity()).sum()
    }
}

impl fmt::Display for Cq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({}) <- ", self.name, self.head.join(","))?;
        for (i, a) in self.body.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{a}")?;
        }
        f.write_str(".")
    }
}
