//! Compiles hierarchical conjunctive queries into unambiguous PCEA.
//!
//! States are the nodes of the compact q-tree. Without self-joins a variable
//! state `x` means "every atom below `x` has been read"; with self-joins the
//! state also records the set of atoms read by the last tuple, as `x{0,2}`.
//! Disconnected queries are compiled through [`lift_disconnected`].

mod lift;
mod merge;

pub use lift::{lift_disconnected, strip_lifted, FRESH_VAR};
pub use merge::{atom_pair_predicate, left_guard, merge_atom_pair, merge_self_join_atom};

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::cq::{build_q_tree, classify, compact_q_tree, hierarchy_violation, Atom, Cq, QLabel, QTree};
use crate::error::{Error, Result};
use crate::model::{EqualityPredicate, KeySide};
use crate::pcea::{Pcea, PceaBuilder};

pub const DEFAULT_TRANSITION_LIMIT: usize = 200_000;

#[derive(Clone, Debug)]
pub struct CompileOptions {
    /// Compilation fails with [`Error::ResourceLimit`] past this many transitions.
    pub transition_limit: usize,
}

impl Default for CompileOptions {
    fn default() -> Self {
        CompileOptions {
            transition_limit: DEFAULT_TRANSITION_LIMIT,
        }
    }
}

/// What an automaton state stands for in the compact q-tree.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum StateRole {
    Atom(usize),
    Var(String),
    /// A variable together with the self-join set read last.
    VarSelfJoin(String, BTreeSet<usize>),
}

impl fmt::Display for StateRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StateRole::Atom(i) => write!(f, "atom {i}"),
            StateRole::Var(x) => write!(f, "variable {x}"),
            StateRole::VarSelfJoin(x, a) => write!(f, "variable {x} after atoms {}", join(a)),
        }
    }
}

#[derive(Clone, Debug)]
pub struct CompiledQuery {
    pub query: Cq,
    pub automaton: Pcea,
    /// Role of every state, by state name.
    pub state_map: BTreeMap<String, StateRole>,
    /// Whether the query was disconnected and compiled through the lifting.
    pub lifted: bool,
}

impl CompiledQuery {
    /// One `state: role` line per state.
    pub fn state_map_report(&self) -> String {
        self.state_map
            .iter()
            .map(|(name, role)| format!("{name}: {role}\n"))
            .collect()
    }
}

pub fn compile(q: &Cq) -> Result<CompiledQuery> {
    compile_with(q, &CompileOptions::default())
}

pub fn compile_with(q: &Cq, options: &CompileOptions) -> Result<CompiledQuery> {
    if q.body.is_empty() {
        return Err(Error::Compile("the query has no atoms".into()));
    }
    if let Some(v) = hierarchy_violation(q) {
        return Err(Error::NotHierarchical(v.to_string()));
    }
    if q.body.len() == 1 {
        return Ok(single_atom(q));
    }
    if classify(q).connected {
        return compile_connected(q, options);
    }
    let lifted = lift_disconnected(q);
    let inner = compile_connected(&lifted, options)?;
    Ok(CompiledQuery {
        query: q.clone(),
        automaton: strip_lifted(&inner.automaton)?,
        state_map: inner.state_map,
        lifted: true,
    })
}

fn single_atom(q: &Cq) -> CompiledQuery {
    let mut b = PceaBuilder::new();
    b.transition(Vec::new(), q.body[0].pattern(), ["0"], "0").final_state("0");
    CompiledQuery {
        query: q.clone(),
        automaton: b.build().expect("valid automaton"),
        state_map: BTreeMap::from([("0".to_string(), StateRole::Atom(0))]),
        lifted: false,
    }
}

fn compile_connected(q: &Cq, options: &CompileOptions) -> Result<CompiledQuery> {
    let tree = build_q_tree(q)
        .map(|t| compact_q_tree(&t))
        .ok_or_else(|| Error::Compile("no q-tree exists for the query".into()))?;
    let mut c = Compiler {
        q,
        tree: &tree,
        b: PceaBuilder::new(),
        state_map: BTreeMap::new(),
        transitions: 0,
        limit: options.transition_limit,
    };
    for i in 0..q.body.len() {
        c.b.label(&i.to_string());
    }
    for i in 0..q.body.len() {
        let name = i.to_string();
        c.b.state(&name);
        c.state_map.insert(name, StateRole::Atom(i));
    }
    if classify(q).has_self_joins {
        c.self_joins()?;
    } else {
        c.self_join_free()?;
    }
    Ok(CompiledQuery {
        query: q.clone(),
        automaton: c.b.build()?,
        state_map: c.state_map,
        lifted: false,
    })
}

/// `C_{x,A}`: the nodes hanging from a variable below `x` (inclusive) that
/// occurs in some atom of `A`, other than such variables and `A` itself.
/// `C_{x,i}` is the case `A = {i}`.
pub fn incomplete_states(q: &Cq, tree: &QTree, x: &str, atoms: &BTreeSet<usize>) -> Result<BTreeSet<QLabel>> {
    if atoms.is_empty() || atoms.iter().any(|&i| i >= q.body.len() || !q.body[i].has_var(x)) {
        return Err(Error::Compile(format!("variable {x} does not occur in every atom of {}", join(atoms))));
    }
    let xn = tree
        .var_node(x)
        .ok_or_else(|| Error::Compile(format!("variable {x} is not a node of the q-tree")))?;
    let vars: BTreeSet<&str> = atoms.iter().flat_map(|&i| q.body[i].vars()).collect();
    let on_paths: BTreeSet<usize> = (0..tree.len())
        .filter(|&id| {
            tree.node(id).var().is_some_and(|v| vars.contains(v)) && tree.is_descendant(id, xn)
        })
        .collect();
    let mut out = BTreeSet::new();
    for &p in &on_paths {
        for &c in &tree.node(p).children {
            let label = &tree.node(c).label;
            let in_a = matches!(label, QLabel::Atom(i) if atoms.contains(i));
            if !on_paths.contains(&c) && !in_a {
                out.insert(label.clone());
            }
        }
    }
    Ok(out)
}

fn join(a: &BTreeSet<usize>) -> String {
    a.iter().map(usize::to_string).collect::<Vec<_>>().join(",")
}

fn sj_state(x: &str, a: &BTreeSet<usize>) -> String {
    format!("{x}{{{}}}", join(a))
}

struct Compiler<'a> {
    q: &'a Cq,
    tree: &'a QTree,
    b: PceaBuilder,
    state_map: BTreeMap<String, StateRole>,
    transitions: usize,
    limit: usize,
}

impl Compiler<'_> {
    fn count(&mut self) -> Result<()> {
        self.transitions += 1;
        if self.transitions > self.limit {
            return Err(Error::ResourceLimit(format!(
                "compiled automaton exceeds {} transitions",
                self.limit
            )));
        }
        Ok(())
    }

    fn leaf_transitions(&mut self) -> Result<()> {
        for (i, atom) in self.q.body.iter().enumerate() {
            self.count()?;
            let name = i.to_string();
            self.b.transition(Vec::new(), atom.pattern(), [name.as_str()], &name);
        }
        Ok(())
    }

    /// Atom ids of the leaves below node `id`.
    fn atoms_below(&self, id: usize) -> Vec<usize> {
        (0..self.tree.len())
            .filter_map(|n| match self.tree.node(n).label {
                QLabel::Atom(j) if self.tree.is_descendant(n, id) => Some(j),
                _ => None,
            })
            .collect()
    }

    /// Compact-tree variables on the root path of atom `i`.
    fn path_vars(&self, i: usize) -> Vec<String> {
        let leaf = self.tree.leaf(i).expect("every atom is a leaf");
        self.tree
            .path(leaf)
            .into_iter()
            .filter_map(|id| self.tree.node(id).var().map(str::to_string))
            .collect()
    }

    fn self_join_free(&mut self) -> Result<()> {
        let q = self.q;
        let root = self.tree.node(self.tree.root()).var().expect("variable root").to_string();
        for x in self.tree.variables() {
            self.b.state(x);
            self.state_map.insert(x.to_string(), StateRole::Var(x.to_string()));
        }
        self.b.final_state(&root);
        self.leaf_transitions()?;
        for (i, atom) in q.body.iter().enumerate() {
            for x in self.path_vars(i) {
                let c = incomplete_states(q, self.tree, &x, &BTreeSet::from([i]))?;
                let mut sources: Vec<(String, EqualityPredicate)> = Vec::new();
                for l in &c {
                    match l {
                        QLabel::Atom(j) => sources.push((j.to_string(), atom_pair_predicate(&q.body[*j], atom))),
                        QLabel::Var(y) => sources.push((y.clone(), self.subtree_predicate(y, atom))),
                    }
                }
                self.count()?;
                let sources = sources.iter().map(|(s, b)| (s.as_str(), b.clone())).collect();
                self.b.transition(sources, atom.pattern(), [i.to_string()], &x);
            }
        }
        Ok(())
    }

    /// `B_{y, S(z̄)}`: one left guard per atom below `y`, all projecting the
    /// variables they share with `S(z̄)`.
    fn subtree_predicate(&self, y: &str, right: &Atom) -> EqualityPredicate {
        let yn = self.tree.var_node(y).expect("variable node");
        let mut left = KeySide::default();
        let mut right_side = KeySide::default();
        for j in self.atoms_below(yn) {
            let (pattern, key) = left_guard(&self.q.body[j], right);
            left.insert(pattern, key);
            if right_side.0.is_empty() {
                right_side = atom_pair_predicate(&self.q.body[j], right).right;
            }
        }
        EqualityPredicate {
            left,
            right: right_side,
        }
    }

    fn self_joins(&mut self) -> Result<()> {
        let q = self.q;
        let root = self.tree.node(self.tree.root()).var().expect("variable root").to_string();
        let sj = self.self_join_sets()?;
        // (x, A) states, for compact variables common to every atom of A.
        let mut vsj: Vec<(String, usize)> = Vec::new();
        for (k, (a, _)) in sj.iter().enumerate() {
            for x in self.tree.variables() {
                if a.iter().all(|&i| q.body[i].has_var(x)) {
                    let name = sj_state(x, a);
                    self.b.state(&name);
                    self.state_map.insert(name.clone(), StateRole::VarSelfJoin(x.to_string(), a.clone()));
                    if x == root {
                        self.b.final_state(&name);
                    }
                    vsj.push((x.to_string(), k));
                }
            }
        }
        self.leaf_transitions()?;
        for (x, k) in vsj {
            let (a, t_a) = &sj[k];
            let c = incomplete_states(q, self.tree, &x, a)?;
            let mut fixed: Vec<(String, EqualityPredicate)> = Vec::new();
            let mut choices: Vec<Vec<(String, EqualityPredicate)>> = Vec::new();
            let mut satisfiable = true;
            for l in &c {
                match l {
                    QLabel::Atom(j) => match merge_atom_pair(q, &BTreeSet::from([*j]), a)? {
                        Some((lt, rt)) => fixed.push((j.to_string(), atom_pair_predicate(&lt, &rt))),
                        None => satisfiable = false,
                    },
                    QLabel::Var(y) => {
                        let mut options = Vec::new();
                        for (a2, _) in &sj {
                            if a2.iter().all(|&i| q.body[i].has_var(y)) {
                                if let Some((lt, rt)) = merge_atom_pair(q, a2, a)? {
                                    options.push((sj_state(y, a2), atom_pair_predicate(&lt, &rt)));
                                }
                            }
                        }
                        choices.push(options);
                    }
                }
            }
            if !satisfiable || choices.iter().any(Vec::is_empty) {
                continue;
            }
            let labels: Vec<String> = a.iter().map(usize::to_string).collect();
            let target = sj_state(&x, a);
            let mut pick = vec![0usize; choices.len()];
            loop {
                self.count()?;
                let mut sources: Vec<(&str, EqualityPredicate)> =
                    fixed.iter().map(|(s, b)| (s.as_str(), b.clone())).collect();
                for (opts, &p) in choices.iter().zip(&pick) {
                    sources.push((opts[p].0.as_str(), opts[p].1.clone()));
                }
                self.b.transition(sources, t_a.pattern(), &labels, &target);
                // Advance the mixed-radix counter over encodings.
                let mut d = 0;
                while d < pick.len() {
                    pick[d] += 1;
                    if pick[d] < choices[d].len() {
                        break;
                    }
                    pick[d] = 0;
                    d += 1;
                }
                if d == pick.len() {
                    break;
                }
            }
        }
        Ok(())
    }

    /// `SJ(Q)` with the merged atom of each set; sets whose merged atom is
    /// unsatisfiable are dropped.
    fn self_join_sets(&self) -> Result<Vec<(BTreeSet<usize>, Atom)>> {
        let mut by_relation: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        for (i, a) in self.q.body.iter().enumerate() {
            by_relation.entry(&a.relation).or_default().push(i);
        }
        let mut out = Vec::new();
        for ids in by_relation.values() {
            if ids.len() >= usize::BITS as usize - 1 || (1usize << ids.len()) > self.limit {
                return Err(Error::ResourceLimit(format!(
                    "{} atoms share a relation; too many self-join sets",
                    ids.len()
                )));
            }
            for mask in 1usize..(1 << ids.len()) {
                let a: BTreeSet<usize> = (0..ids.len()).filter(|b| mask >> b & 1 == 1).map(|b| ids[b]).collect();
                if let Some(t) = merge_self_join_atom(self.q, &a)? {
                    out.push((a, t));
                }
            }
        }
        out.sort_by(|x, y| x.0.cmp(&y.0));
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cq::parse_cq;
    use crate::pcea::Oracle;
    use crate::samples;

    fn q(text: &str) -> Cq {
        parse_cq(text, None).unwrap()
    }

    fn labels(set: &[QLabel]) -> BTreeSet<QLabel> {
        set.iter().cloned().collect()
    }

    fn v(x: &str) -> QLabel {
        QLabel::Var(x.into())
    }

    #[test]
    fn incomplete_states_q0() {
        let q0 = q(samples::Q0);
        let t = compact_q_tree(&build_q_tree(&q0).unwrap());
        let c = |x: &str, i: usize| incomplete_states(&q0, &t, x, &BTreeSet::from([i])).unwrap();
        assert_eq!(c("x", 0), labels(&[v("y")]));
        assert_eq!(c("x", 1), labels(&[QLabel::Atom(0), QLabel::Atom(2)]));
        assert_eq!(c("y", 1), labels(&[QLabel::Atom(2)]));
        assert_eq!(c("x", 2), labels(&[QLabel::Atom(0), QLabel::Atom(1)]));
        assert_eq!(c("y", 2), labels(&[QLabel::Atom(1)]));
        assert!(incomplete_states(&q0, &t, "y", &BTreeSet::from([0])).is_err());
    }

    #[test]
    fn incomplete_states_four_atoms() {
        // R=0, S=1, T=2, U=3 in the compact tree x(y(R,S,U),T).
        let q1 = q("Q1(x,y,z,v,w) <- R(x,y,z), S(x,y,v), T(x,w), U(x,y)");
        let t = compact_q_tree(&build_q_tree(&q1).unwrap());
        let c = |x: &str, i: usize| incomplete_states(&q1, &t, x, &BTreeSet::from([i])).unwrap();
        assert_eq!(c("y", 3), labels(&[QLabel::Atom(0), QLabel::Atom(1)]));
        assert_eq!(c("x", 3), labels(&[QLabel::Atom(0), QLabel::Atom(1), QLabel::Atom(2)]));
        assert_eq!(c("x", 2), labels(&[v("y")]));
    }

    #[test]
    fn q0_automaton() {
        let c = compile(&q(samples::Q0)).unwrap();
        let a = &c.automaton;
        let names: BTreeSet<&str> = a.states().map(|s| a.state_name(s)).collect();
        assert_eq!(names, BTreeSet::from(["0", "1", "2", "x", "y"]));
        let finals: Vec<&str> = a.finals().iter().map(|&s| a.state_name(s)).collect();
        assert_eq!(finals, vec!["x"]);
        assert_eq!(a.transitions().iter().filter(|t| t.sources.is_empty()).count(), 3);
        assert_eq!(a.transitions().len(), 8);
        let into_x_on_r: Vec<_> = a
            .transitions()
            .iter()
            .filter(|t| a.state_name(t.target) == "x" && t.unary.relation == "R")
            .collect();
        assert_eq!(into_x_on_r.len(), 1);
        assert_eq!(into_x_on_r[0].sources.len(), 2);
        assert_eq!(c.state_map["y"], StateRole::Var("y".into()));
    }

    #[test]
    fn q0_over_stream0() {
        let c = compile(&q(samples::Q0)).unwrap();
        let s = samples::stream0();
        let oracle = Oracle::new(&c.automaton, &s).unwrap();
        for n in 0..s.len() {
            let got: BTreeSet<_> = oracle.evaluate(n).into_iter().collect();
            let want = crate::cq::cq_stream_semantics(&c.query, &s, n).unwrap();
            assert_eq!(got, want, "n={n}");
        }
    }

    #[test]
    fn rejections() {
        assert!(matches!(compile(&q(samples::Q1)), Err(Error::NotHierarchical(_))));
        let empty = Cq {
            name: "Q".into(),
            head: vec![],
            body: vec![],
        };
        assert!(matches!(compile(&empty), Err(Error::Compile(_))));
    }

    #[test]
    fn single_atom_automaton() {
        let c = compile(&q("Q(x) <- T(x)")).unwrap();
        assert_eq!(c.automaton.num_states(), 1);
        assert_eq!(c.automaton.transitions().len(), 1);
    }

    #[test]
    fn self_join_states() {
        let c = compile(&q("Q2(x,y,z,v) <- R(x,y,z), R(x,y,v), U(x,y)")).unwrap();
        let a = &c.automaton;
        assert!(a.state_id("x{0,1}").is_some());
        assert!(a.is_final(a.state_id("x{2}").unwrap()));
        assert_eq!(c.state_map["x{0,1}"], StateRole::VarSelfJoin("x".into(), BTreeSet::from([0, 1])));
    }

    #[test]
    fn transition_limit() {
        let text = "Q(x) <- T(x), T(x), T(x), T(x), T(x), T(x)";
        let err = compile_with(&q(text), &CompileOptions { transition_limit: 50 }).unwrap_err();
        assert!(matches!(err, Error::ResourceLimit(_)));
    }

    #[test]
    fn disconnected_is_lifted() {
        let c = compile(&q("Q(x,y) <- T(x), T2(y)")).unwrap();
        assert!(c.lifted);
        for t in c.automaton.transitions() {
            assert!(t.unary.max_index().is_none());
            for b in &t.binaries {
                assert!(b.left.0.values().all(|g| g.key.is_empty()));
            }
        }
    }
}
