//! Parallelized complex event automata.
//!
//! A transition `(P, U, B, L, q)` consumes one run for every state in `P`,
//! each ending at an earlier position whose tuple is related to the current
//! one by `B(p)`, and merges them into a run of `q` labeled `L`.

mod ccea;
mod json;
pub mod oracle;

pub use ccea::{Ccea, CceaInitial, CceaTransition};
pub use oracle::{
    check_unambiguous_on, is_simple_run, oracle_evaluate, validate_run_tree, Configuration,
    InvalidRunTree, Oracle, RunTree, UnambiguityReport,
};

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use crate::error::{Error, Result};
use crate::model::{EqualityPredicate, Schema, UnaryPredicate, Valuation};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StateId(pub u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LabelId(pub u32);

impl StateId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl LabelId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Transition {
    /// Source states, sorted and distinct.
    pub sources: Vec<StateId>,
    pub unary: UnaryPredicate,
    /// `binaries[k]` is the equality predicate for `sources[k]`.
    pub binaries: Vec<EqualityPredicate>,
    /// Non-empty, sorted and distinct.
    pub labels: Vec<LabelId>,
    pub target: StateId,
}

impl Transition {
    pub fn binary(&self, state: StateId) -> Option<&EqualityPredicate> {
        let k = self.sources.binary_search(&state).ok()?;
        Some(&self.binaries[k])
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Pcea {
    states: Vec<String>,
    labels: Vec<String>,
    finals: BTreeSet<StateId>,
    transitions: Vec<Transition>,
}

impl Pcea {
    /// Checks every structural invariant: known ids, unique names, sorted
    /// distinct sources and labels, one predicate per source, non-empty labels.
    pub fn new(
        states: Vec<String>,
        labels: Vec<String>,
        finals: BTreeSet<StateId>,
        transitions: Vec<Transition>,
    ) -> Result<Self> {
        let invalid = |m: String| Err(Error::InvalidAutomaton(m));
        if let Some(dup) = first_duplicate(&states) {
            return invalid(format!("state {dup:?} declared twice"));
        }
        if let Some(dup) = first_duplicate(&labels) {
            return invalid(format!("label {dup:?} declared twice"));
        }
        let known_state = |q: StateId| q.index() < states.len();
        if let Some(q) = finals.iter().find(|q| !known_state(**q)) {
            return invalid(format!("final state {} does not exist", q.0));
        }
        for (idx, t) in transitions.iter().enumerate() {
            if !known_state(t.target) || !t.sources.iter().all(|&q| known_state(q)) {
                return invalid(format!("transition {idx} references an unknown state"));
            }
            if !t.sources.windows(2).all(|w| w[0] < w[1]) {
                return invalid(format!("transition {idx} sources are not a sorted set"));
            }
            if t.binaries.len() != t.sources.len() {
                return invalid(format!("transition {idx} needs one predicate per source"));
            }
            if t.labels.is_empty() {
                return invalid(format!("transition {idx} has an empty label set"));
            }
            if !t.labels.windows(2).all(|w| w[0] < w[1]) {
                return invalid(format!("transition {idx} labels are not a sorted set"));
            }
            if t.labels.iter().any(|l| l.index() >= labels.len()) {
                return invalid(format!("transition {idx} references an unknown label"));
            }
            for b in &t.binaries {
                b.check_shape()?;
            }
        }
        Ok(Pcea {
            states,
            labels,
            finals,
            transitions,
        })
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn states(&self) -> impl Iterator<Item = StateId> {
        (0..self.states.len() as u32).map(StateId)
    }

    pub fn state_name(&self, q: StateId) -> &str {
        &self.states[q.index()]
    }

    pub fn state_id(&self, name: &str) -> Option<StateId> {
        self.states.iter().position(|s| s == name).map(|i| StateId(i as u32))
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label_name(&self, l: LabelId) -> &str {
        &self.labels[l.index()]
    }

    pub fn label_id(&self, name: &str) -> Option<LabelId> {
        self.labels.iter().position(|s| s == name).map(|i| LabelId(i as u32))
    }

    pub fn finals(&self) -> &BTreeSet<StateId> {
        &self.finals
    }

    pub fn is_final(&self, q: StateId) -> bool {
        self.finals.contains(&q)
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    /// `|Q| + Σ (|P| + |L|)` over transitions.
    pub fn size(&self) -> usize {
        self.states.len()
            + self
                .transitions
                .iter()
                .map(|t| t.sources.len() + t.labels.len())
                .sum::<usize>()
    }

    pub fn max_sources(&self) -> usize {
        self.transitions.iter().map(|t| t.sources.len()).max().unwrap_or(0)
    }

    /// `ν_{L,i}` with label names resolved.
    pub fn singleton(&self, labels: &[LabelId], position: usize) -> Valuation {
        Valuation::singleton(labels.iter().map(|&l| self.label_name(l)), position)
    }

    /// Checks all predicates against a schema.
    pub fn validate_schema(&self, schema: &Schema) -> Result<()> {
        for t in &self.transitions {
            t.unary.validate(schema)?;
            for b in &t.binaries {
                b.validate(schema)?;
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&json::PceaDoc::from(self)).expect("serializable")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: json::PceaDoc =
            serde_json::from_str(text).map_err(|e| Error::parse(e.line(), e.column(), e.to_string()))?;
        doc.try_into()
    }
}

impl fmt::Display for Pcea {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names = |qs: &mut dyn Iterator<Item = StateId>| {
            qs.map(|q| self.state_name(q).to_string()).collect::<Vec<_>>().join(",")
        };
        writeln!(f, "states: {}", names(&mut self.states()))?;
        writeln!(f, "finals: {}", names(&mut self.finals.iter().copied()))?;
        for t in &self.transitions {
            let labels: Vec<&str> = t.labels.iter().map(|&l| self.label_name(l)).collect();
            writeln!(
                f,
                "({{{}}}, {}, {{{}}}) -> {}",
                names(&mut t.sources.iter().copied()),
                t.unary.relation,
                labels.join(","),
                self.state_name(t.target)
            )?;
        }
        Ok(())
    }
}

fn first_duplicate(names: &[String]) -> Option<&String> {
    let mut seen = BTreeSet::new();
    names.iter().find(|n| !seen.insert(n.as_str()))
}

/// Builds a [`Pcea`] from state and label names.
#[derive(Default)]
pub struct PceaBuilder {
    states: Vec<String>,
    state_index: HashMap<String, StateId>,
    labels: Vec<String>,
    label_index: HashMap<String, LabelId>,
    finals: BTreeSet<StateId>,
    transitions: Vec<Transition>,
}

impl PceaBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn state(&mut self, name: &str) -> StateId {
        if let Some(&q) = self.state_index.get(name) {
            return q;
        }
        let q = StateId(self.states.len() as u32);
        self.states.push(name.to_string());
        self.state_index.insert(name.to_string(), q);
        q
    }

    pub fn label(&mut self, name: &str) -> LabelId {
        if let Some(&l) = self.label_index.get(name) {
            return l;
        }
        let l = LabelId(self.labels.len() as u32);
        self.labels.push(name.to_string());
        self.label_index.insert(name.to_string(), l);
        l
    }

    pub fn final_state(&mut self, name: &str) -> &mut Self {
        let q = self.state(name);
        self.finals.insert(q);
        self
    }

    /// Adds `(P, U, B, L, q)`; `sources` pairs each state of `P` with `B(p)`.
    pub fn transition<S: AsRef<str>>(
        &mut self,
        sources: Vec<(&str, EqualityPredicate)>,
        unary: UnaryPredicate,
        labels: impl IntoIterator<Item = S>,
        target: &str,
    ) -> &mut Self {
        let mut sources: Vec<(StateId, EqualityPredicate)> =
            sources.into_iter().map(|(p, b)| (self.state(p), b)).collect();
        sources.sort_by_key(|(p, _)| *p);
        let mut labels: Vec<LabelId> = labels.into_iter().map(|l| self.label(l.as_ref())).collect();
        labels.sort();
        labels.dedup();
        let target = self.state(target);
        self.transitions.push(Transition {
            sources: sources.iter().map(|(p, _)| *p).collect(),
            binaries: sources.into_iter().map(|(_, b)| b).collect(),
            unary,
            labels,
            target,
        });
        self
    }

    pub fn build(self) -> Result<Pcea> {
        Pcea::new(self.states, self.labels, self.finals, self.transitions)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::samples;

    #[test]
    fn a0_shape() {
        let a = samples::a0();
        assert_eq!(a.num_states(), 3);
        assert_eq!(a.size(), 3 + 1 + 1 + (2 + 1));
        let t = &a.transitions()[2];
        let q0 = a.state_id("q0").unwrap();
        assert!(t.binary(q0).is_some());
        assert!(t.binary(t.target).is_none());
    }

    #[test]
    fn rejects_malformed() {
        let mut b = PceaBuilder::new();
        b.transition(Vec::<(&str, EqualityPredicate)>::new(), UnaryPredicate::relation("T"), Vec::<&str>::new(), "q");
        assert!(b.build().is_err());

        let p = Pcea::new(vec!["a".into(), "a".into()], vec![], BTreeSet::new(), vec![]);
        assert!(p.is_err());
        let p = Pcea::new(vec!["a".into()], vec![], BTreeSet::from([StateId(3)]), vec![]);
        assert!(p.is_err());
    }

    #[test]
    fn json_round_trip() {
        for a in [samples::a0(), samples::c0().to_pcea().unwrap()] {
            let text = a.to_json();
            let back = Pcea::from_json(&text).unwrap();
            assert_eq!(back, a);
            assert_eq!(back.to_json(), text);
        }
    }

    #[test]
    fn json_errors() {
        assert!(Pcea::from_json("{").is_err());
        let bad = r#"{"states":["q"],"labels":["a"],"finals":["r"],"transitions":[]}"#;
        assert!(matches!(Pcea::from_json(bad), Err(Error::InvalidAutomaton(_))));
    }
}
