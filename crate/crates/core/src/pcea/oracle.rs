//! Reference semantics by exhaustive run-tree enumeration.
//!
//! Every run of every state ending at every position is materialized, so
//! cost grows with the number of runs. Meant for short prefixes only.

use std::collections::{BTreeMap, BTreeSet};
use std::rc::Rc;

use thiserror::Error;

use super::{LabelId, Pcea, StateId};
use crate::error::{Error, Result};
use crate::model::{Tuple, Valuation};

/// Default bound on the number of materialized run nodes.
pub const DEFAULT_RUN_CAP: usize = 2_000_000;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Configuration {
    pub state: StateId,
    pub position: usize,
    pub labels: Vec<LabelId>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RunTree {
    pub config: Configuration,
    pub children: Vec<RunTree>,
}

impl RunTree {
    pub fn leaf(state: StateId, position: usize, labels: Vec<LabelId>) -> Self {
        RunTree {
            config: Configuration {
                state,
                position,
                labels,
            },
            children: Vec::new(),
        }
    }

    pub fn node(config: Configuration, children: Vec<RunTree>) -> Self {
        RunTree { config, children }
    }

    /// `ν_τ`: each label maps to the positions of the nodes carrying it.
    pub fn valuation(&self, a: &Pcea) -> Valuation {
        let mut v = Valuation::new();
        self.visit(&mut |c| {
            for &l in &c.labels {
                v.insert(a.label_name(l), c.position);
            }
        });
        v
    }

    pub fn visit(&self, f: &mut impl FnMut(&Configuration)) {
        f(&self.config);
        for c in &self.children {
            c.visit(f);
        }
    }

    pub fn node_count(&self) -> usize {
        1 + self.children.iter().map(RunTree::node_count).sum::<usize>()
    }

    pub fn is_path(&self) -> bool {
        self.children.len() <= 1 && self.children.iter().all(RunTree::is_path)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid run tree at node {path:?}: {reason}")]
pub struct InvalidRunTree {
    /// Child indices from the root to the offending node.
    pub path: Vec<usize>,
    pub reason: String,
}

/// Checks the run-tree conditions at every node of `tree` against `stream`.
pub fn validate_run_tree(a: &Pcea, stream: &[Tuple], tree: &RunTree) -> Result<(), InvalidRunTree> {
    let mut path = Vec::new();
    validate_node(a, stream, tree, &mut path)
}

fn validate_node(
    a: &Pcea,
    stream: &[Tuple],
    node: &RunTree,
    path: &mut Vec<usize>,
) -> Result<(), InvalidRunTree> {
    let fail = |path: &Vec<usize>, reason: String| InvalidRunTree {
        path: path.clone(),
        reason,
    };
    let c = &node.config;
    if c.state.index() >= a.num_states() {
        return Err(fail(path, format!("unknown state {}", c.state.0)));
    }
    let Some(t) = stream.get(c.position) else {
        return Err(fail(path, format!("position {} beyond the stream", c.position)));
    };
    if c.labels.is_empty() {
        return Err(fail(path, "empty label set".into()));
    }
    let mut child_states = Vec::with_capacity(node.children.len());
    for (k, child) in node.children.iter().enumerate() {
        if child.config.position >= c.position {
            path.push(k);
            return Err(fail(path, "child position is not below its parent".into()));
        }
        if child.config.position >= stream.len() || child.config.state.index() >= a.num_states() {
            path.push(k);
            return Err(fail(path, "dangling child".into()));
        }
        child_states.push(child.config.state);
    }
    child_states.sort();
    if child_states.windows(2).any(|w| w[0] == w[1]) {
        return Err(fail(path, "two children share a state".into()));
    }
    let mut labels = c.labels.clone();
    labels.sort();
    labels.dedup();
    let justified = a.transitions().iter().any(|e| {
        e.target == c.state
            && e.labels == labels
            && e.sources == child_states
            && e.unary.eval(t)
            && node.children.iter().all(|child| {
                let b = e.binary(child.config.state).expect("source state");
                b.eval(&stream[child.config.position], t)
            })
    });
    if !justified {
        return Err(fail(path, format!("no transition justifies {:?}", c)));
    }
    for (k, child) in node.children.iter().enumerate() {
        path.push(k);
        validate_node(a, stream, child, path)?;
        path.pop();
    }
    Ok(())
}

/// True iff no two distinct nodes at the same position share a label.
pub fn is_simple_run(tree: &RunTree) -> bool {
    let mut seen = BTreeSet::new();
    let mut simple = true;
    tree.visit(&mut |c| {
        for &l in &c.labels {
            simple &= seen.insert((c.position, l));
        }
    });
    simple
}

struct RunNode {
    state: StateId,
    position: usize,
    transition: usize,
    children: Vec<Rc<RunNode>>,
}

impl RunNode {
    fn to_tree(&self, a: &Pcea) -> RunTree {
        RunTree {
            config: Configuration {
                state: self.state,
                position: self.position,
                labels: a.transitions()[self.transition].labels.clone(),
            },
            children: self.children.iter().map(|c| c.to_tree(a)).collect(),
        }
    }
}

/// All runs of an automaton over a finite stream prefix.
pub struct Oracle<'a> {
    pcea: &'a Pcea,
    stream: &'a [Tuple],
    /// `runs[i][q]`: every run of state `q` whose root is at position `i`.
    runs: Vec<Vec<Vec<Rc<RunNode>>>>,
}

impl<'a> Oracle<'a> {
    pub fn new(pcea: &'a Pcea, stream: &'a [Tuple]) -> Result<Self> {
        Self::with_cap(pcea, stream, DEFAULT_RUN_CAP)
    }

    /// Fails with [`Error::ResourceLimit`] once more than `cap` run nodes exist.
    pub fn with_cap(pcea: &'a Pcea, stream: &'a [Tuple], cap: usize) -> Result<Self> {
        let mut runs: Vec<Vec<Vec<Rc<RunNode>>>> = Vec::with_capacity(stream.len());
        let mut total = 0usize;
        for (i, t) in stream.iter().enumerate() {
            let mut here: Vec<Vec<Rc<RunNode>>> = vec![Vec::new(); pcea.num_states()];
            for (e_idx, e) in pcea.transitions().iter().enumerate() {
                if !e.unary.eval(t) {
                    continue;
                }
                let mut options: Vec<Vec<Rc<RunNode>>> = Vec::with_capacity(e.sources.len());
                for (&p, b) in e.sources.iter().zip(&e.binaries) {
                    let mut fits = Vec::new();
                    for (j, earlier) in runs.iter().enumerate() {
                        if !earlier[p.index()].is_empty() && b.eval(&stream[j], t) {
                            fits.extend(earlier[p.index()].iter().cloned());
                        }
                    }
                    options.push(fits);
                }
                let combos: usize = options.iter().map(Vec::len).product();
                total = total.saturating_add(combos);
                if total > cap {
                    return Err(Error::ResourceLimit(format!(
                        "more than {cap} runs up to position {i}"
                    )));
                }
                for_each_combination(&options, &mut |children| {
                    here[e.target.index()].push(Rc::new(RunNode {
                        state: e.target,
                        position: i,
                        transition: e_idx,
                        children: children.to_vec(),
                    }));
                });
            }
            runs.push(here);
        }
        Ok(Oracle { pcea, stream, runs })
    }

    pub fn stream(&self) -> &[Tuple] {
        self.stream
    }

    /// Accepting runs whose root sits at position `n`.
    pub fn accepting_runs(&self, n: usize) -> Vec<RunTree> {
        self.accepting_nodes(n).map(|r| r.to_tree(self.pcea)).collect()
    }

    fn accepting_nodes(&self, n: usize) -> impl Iterator<Item = &Rc<RunNode>> {
        let at = self.runs.get(n);
        self.pcea
            .finals()
            .iter()
            .flat_map(move |q| at.map(|r| r[q.index()].iter()).into_iter().flatten())
    }

    /// The bag `{ν_τ : τ accepting run at n}`.
    pub fn evaluate(&self, n: usize) -> Vec<Valuation> {
        self.accepting_nodes(n)
            .map(|r| {
                let mut v = Valuation::new();
                collect(self.pcea, r, &mut v);
                v
            })
            .collect()
    }

    /// [`evaluate`](Self::evaluate) restricted to `|n - min(ν)| <= w`.
    pub fn evaluate_windowed(&self, n: usize, window: Option<usize>) -> Vec<Valuation> {
        let mut out = self.evaluate(n);
        out.retain(|v| v.within_window(n, window));
        out
    }

    pub fn run_count(&self) -> usize {
        self.runs.iter().flatten().map(Vec::len).sum()
    }
}

fn collect(a: &Pcea, r: &RunNode, v: &mut Valuation) {
    for &l in &a.transitions()[r.transition].labels {
        v.insert(a.label_name(l), r.position);
    }
    for c in &r.children {
        collect(a, c, v);
    }
}

fn for_each_combination<T: Clone>(options: &[Vec<T>], f: &mut impl FnMut(&[T])) {
    fn go<T: Clone>(options: &[Vec<T>], acc: &mut Vec<T>, f: &mut impl FnMut(&[T])) {
        match options.split_first() {
            None => f(acc),
            Some((first, rest)) => {
                for x in first {
                    acc.push(x.clone());
                    go(rest, acc, f);
                    acc.pop();
                }
            }
        }
    }
    go(options, &mut Vec::with_capacity(options.len()), f);
}

/// The bag of valuations of accepting runs at position `n`.
pub fn oracle_evaluate(a: &Pcea, stream: &[Tuple], n: usize) -> Result<Vec<Valuation>> {
    let prefix = &stream[..stream.len().min(n + 1)];
    Ok(Oracle::new(a, prefix)?.evaluate(n))
}

#[derive(Clone, Debug, Default)]
pub struct UnambiguityReport {
    /// Accepting runs that are not simple, with their root position.
    pub non_simple: Vec<(usize, RunTree)>,
    /// Valuations produced by more than one accepting run: `(position, ν, count)`.
    pub duplicates: Vec<(usize, Valuation, usize)>,
}

impl UnambiguityReport {
    pub fn is_clean(&self) -> bool {
        self.non_simple.is_empty() && self.duplicates.is_empty()
    }
}

/// Looks for violations of both unambiguity conditions at every position.
/// Only accepting runs are compared.
pub fn check_unambiguous_on(a: &Pcea, stream: &[Tuple]) -> Result<UnambiguityReport> {
    let oracle = Oracle::new(a, stream)?;
    let mut report = UnambiguityReport::default();
    for n in 0..stream.len() {
        let mut counts: BTreeMap<Valuation, usize> = BTreeMap::new();
        for run in oracle.accepting_nodes(n) {
            let tree = run.to_tree(a);
            if !is_simple_run(&tree) {
                report.non_simple.push((n, tree.clone()));
            }
            *counts.entry(tree.valuation(a)).or_default() += 1;
        }
        for (v, c) in counts {
            if c > 1 {
                report.duplicates.push((n, v, c));
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{EqualityPredicate, UnaryPredicate};
    use crate::pcea::PceaBuilder;
    use crate::samples;

    fn bullet(positions: &[usize]) -> Valuation {
        Valuation::from_pairs(positions.iter().map(|&p| ("•", p)))
    }

    fn tau0(a: &Pcea, child_t: usize) -> RunTree {
        let l = vec![a.label_id("•").unwrap()];
        let q = |n| a.state_id(n).unwrap();
        RunTree::node(
            Configuration {
                state: q("q2"),
                position: 5,
                labels: l.clone(),
            },
            vec![RunTree::leaf(q("q0"), child_t, l.clone()), RunTree::leaf(q("q1"), 3, l)],
        )
    }

    #[test]
    fn a0_outputs() {
        let a = samples::a0();
        let s = samples::stream0();
        let mut out = oracle_evaluate(&a, &s, 5).unwrap();
        out.sort();
        let mut want = vec![bullet(&[1, 3, 5]), bullet(&[0, 1, 5])];
        want.sort();
        assert_eq!(out, want);
        assert!(oracle_evaluate(&a, &s, 0).unwrap().is_empty());
        assert!(oracle_evaluate(&a, &s, 2).unwrap().is_empty());
    }

    #[test]
    fn validates_tau0() {
        let a = samples::a0();
        let s = samples::stream0();
        assert!(validate_run_tree(&a, &s, &tau0(&a, 1)).is_ok());
        let err = validate_run_tree(&a, &s, &tau0(&a, 4)).unwrap_err();
        assert!(err.path.is_empty());
        let leaf = RunTree::leaf(a.state_id("q0").unwrap(), 1, vec![a.label_id("•").unwrap()]);
        assert!(validate_run_tree(&a, &s, &leaf).is_ok());
        let dangling = RunTree::leaf(a.state_id("q0").unwrap(), 99, vec![a.label_id("•").unwrap()]);
        assert!(validate_run_tree(&a, &s, &dangling).is_err());
    }

    #[test]
    fn simplicity_of_runs() {
        let a = samples::a0();
        assert!(is_simple_run(&tau0(&a, 1)));
        let l = vec![LabelId(0)];
        let clash = RunTree::node(
            Configuration {
                state: StateId(2),
                position: 5,
                labels: l.clone(),
            },
            vec![RunTree::leaf(StateId(0), 3, l.clone()), RunTree::leaf(StateId(1), 3, l.clone())],
        );
        assert!(!is_simple_run(&clash));
        assert!(is_simple_run(&RunTree::leaf(StateId(0), 3, l)));
    }

    #[test]
    fn every_oracle_run_validates() {
        let a = samples::a0();
        let s = samples::stream0();
        let oracle = Oracle::new(&a, &s).unwrap();
        for n in 0..s.len() {
            for run in oracle.accepting_runs(n) {
                assert!(validate_run_tree(&a, &s, &run).is_ok());
                assert_eq!(run.config.position, n);
                assert!(a.is_final(run.config.state));
            }
        }
    }

    #[test]
    fn a0_is_unambiguous_on_stream0() {
        let report = check_unambiguous_on(&samples::a0(), &samples::stream0()).unwrap();
        assert!(report.is_clean(), "{report:?}");
    }

    #[test]
    fn duplicate_runs_are_reported() {
        let mut b = PceaBuilder::new();
        for q in ["f1", "f2"] {
            b.transition(Vec::<(&str, EqualityPredicate)>::new(), UnaryPredicate::relation("T"), ["a"], q);
            b.final_state(q);
        }
        let a = b.build().unwrap();
        let report = check_unambiguous_on(&a, &samples::stream0()).unwrap();
        assert_eq!(report.duplicates.len(), 3);
        assert!(report.duplicates.iter().all(|(_, _, c)| *c == 2));
        assert!(report.non_simple.is_empty());
    }

    #[test]
    fn cap_is_enforced() {
        let a = samples::a0();
        let s = samples::stream0();
        assert!(matches!(Oracle::with_cap(&a, &s, 2), Err(Error::ResourceLimit(_))));
    }
}
