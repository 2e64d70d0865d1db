use super::{Pcea, PceaBuilder};
use crate::error::Result;
use crate::model::{EqualityPredicate, UnaryPredicate};

/// A chain automaton: every transition has exactly one source state and the
/// initial function starts runs directly.
#[derive(Clone, Debug, Default)]
pub struct Ccea {
    pub states: Vec<String>,
    pub initial: Vec<CceaInitial>,
    pub transitions: Vec<CceaTransition>,
    pub finals: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct CceaInitial {
    pub state: String,
    pub unary: UnaryPredicate,
    pub labels: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct CceaTransition {
    pub source: String,
    pub unary: UnaryPredicate,
    pub binary: EqualityPredicate,
    pub labels: Vec<String>,
    pub target: String,
}

impl Ccea {
    /// Initial entries become empty-source transitions; every chain
    /// transition becomes a singleton-source transition.
    pub fn to_pcea(&self) -> Result<Pcea> {
        let mut b = PceaBuilder::new();
        for q in &self.states {
            b.state(q);
        }
        for init in &self.initial {
            b.transition(Vec::new(), init.unary.clone(), &init.labels, &init.state);
        }
        for t in &self.transitions {
            b.transition(
                vec![(t.source.as_str(), t.binary.clone())],
                t.unary.clone(),
                &t.labels,
                &t.target,
            );
        }
        for q in &self.finals {
            b.final_state(q);
        }
        b.build()
    }
}

#[cfg(test)]
mod tests {
    use crate::pcea::{oracle_evaluate, Oracle};
    use crate::model::Valuation;
    use crate::samples;

    #[test]
    fn c0_output() {
        let c = samples::c0().to_pcea().unwrap();
        let s = samples::stream0();
        let out = oracle_evaluate(&c, &s, 5).unwrap();
        assert_eq!(out, vec![Valuation::from_pairs([("•", 1), ("•", 3), ("•", 5)])]);
    }

    #[test]
    fn c0_runs_are_paths() {
        let c = samples::c0().to_pcea().unwrap();
        let s = samples::stream0();
        let oracle = Oracle::new(&c, &s).unwrap();
        for n in 0..s.len() {
            assert!(oracle.accepting_runs(n).iter().all(|r| r.is_path()));
        }
    }

    #[test]
    fn no_finals_no_output() {
        let mut c = samples::c0();
        c.finals.clear();
        let a = c.to_pcea().unwrap();
        let s = samples::stream0();
        for n in 0..s.len() {
            assert!(oracle_evaluate(&a, &s, n).unwrap().is_empty());
        }
    }
}
