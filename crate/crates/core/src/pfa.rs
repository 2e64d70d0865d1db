//! Parallelized finite automata over plain alphabets.
//!
//! A run over `a_1 … a_n` is a tree whose leaves all sit at depth `n` and are
//! labeled by initial states; a node at depth `d < n` uses a transition
//! `(P, a_{n-d}, q)` and has exactly one child per state of `P`. A transition
//! with an empty source set therefore never fires: its node would be a leaf
//! above depth `n`.

use std::collections::{BTreeSet, HashMap};

use crate::error::{Error, Result};

/// Largest number of states supported; subsets are represented as bit masks.
pub const MAX_STATES: usize = 64;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PfaTransition {
    pub sources: BTreeSet<usize>,
    pub symbol: char,
    pub target: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Pfa {
    num_states: usize,
    alphabet: BTreeSet<char>,
    transitions: Vec<PfaTransition>,
    initial: BTreeSet<usize>,
    finals: BTreeSet<usize>,
}

/// A run tree; `children` are ordered by state.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PfaRunTree {
    pub state: usize,
    pub children: Vec<PfaRunTree>,
}

impl Pfa {
    pub fn new(
        num_states: usize,
        alphabet: impl IntoIterator<Item = char>,
        initial: impl IntoIterator<Item = usize>,
        finals: impl IntoIterator<Item = usize>,
    ) -> Result<Self> {
        if num_states > MAX_STATES {
            return Err(Error::InvalidAutomaton(format!(
                "at most {MAX_STATES} states supported, got {num_states}"
            )));
        }
        let pfa = Pfa {
            num_states,
            alphabet: alphabet.into_iter().collect(),
            transitions: Vec::new(),
            initial: initial.into_iter().collect(),
            finals: finals.into_iter().collect(),
        };
        if let Some(q) = pfa.initial.iter().chain(&pfa.finals).find(|&&q| q >= num_states) {
            return Err(Error::InvalidAutomaton(format!("unknown state {q}")));
        }
        Ok(pfa)
    }

    /// Embeds an NFA: each `(p, a, q)` becomes `({p}, a, q)`.
    pub fn from_nfa(
        num_states: usize,
        alphabet: impl IntoIterator<Item = char>,
        transitions: &[(usize, char, usize)],
        initial: impl IntoIterator<Item = usize>,
        finals: impl IntoIterator<Item = usize>,
    ) -> Result<Self> {
        let mut pfa = Pfa::new(num_states, alphabet, initial, finals)?;
        for &(p, a, q) in transitions {
            pfa.add_transition([p], a, q)?;
        }
        Ok(pfa)
    }

    pub fn add_transition(
        &mut self,
        sources: impl IntoIterator<Item = usize>,
        symbol: char,
        target: usize,
    ) -> Result<()> {
        let sources: BTreeSet<usize> = sources.into_iter().collect();
        if let Some(q) = sources.iter().chain([&target]).find(|&&q| q >= self.num_states) {
            return Err(Error::InvalidAutomaton(format!("unknown state {q}")));
        }
        if !self.alphabet.contains(&symbol) {
            return Err(Error::InvalidAutomaton(format!("symbol {symbol:?} not in alphabet")));
        }
        self.transitions.push(PfaTransition {
            sources,
            symbol,
            target,
        });
        Ok(())
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn alphabet(&self) -> &BTreeSet<char> {
        &self.alphabet
    }

    pub fn transitions(&self) -> &[PfaTransition] {
        &self.transitions
    }

    pub fn initial(&self) -> &BTreeSet<usize> {
        &self.initial
    }

    pub fn finals(&self) -> &BTreeSet<usize> {
        &self.finals
    }

    /// `|Q| + Σ (|P| + 1)` over transitions.
    pub fn size(&self) -> usize {
        self.num_states + self.transitions.iter().map(|t| t.sources.len() + 1).sum::<usize>()
    }

    fn symbols(&self, s: &str) -> Result<Vec<char>> {
        s.chars()
            .map(|c| {
                if self.alphabet.contains(&c) {
                    Ok(c)
                } else {
                    Err(Error::Input(format!("symbol {c:?} not in alphabet")))
                }
            })
            .collect()
    }

    /// True iff some accepting run tree exists over `s`.
    pub fn accepts(&self, s: &str) -> Result<bool> {
        Ok(self.find_run_tree(s)?.is_some())
    }

    /// Searches backward from the final states for an accepting run tree.
    pub fn find_run_tree(&self, s: &str) -> Result<Option<PfaRunTree>> {
        let word = self.symbols(s)?;
        let mut search = TreeSearch {
            pfa: self,
            word: &word,
            memo: HashMap::new(),
        };
        for &q in &self.finals {
            if search.derivable(q, word.len()) {
                return Ok(Some(search.build(q, word.len())));
            }
        }
        Ok(None)
    }

    pub fn determinize(&self) -> Dfa {
        let alphabet: Vec<char> = self.alphabet.iter().copied().collect();
        let final_mask = mask(&self.finals);
        let start = mask(&self.initial);
        let mut dfa = Dfa {
            alphabet: alphabet.clone(),
            subsets: vec![start],
            delta: Vec::new(),
            accepting: Vec::new(),
        };
        let mut index = HashMap::from([(start, 0usize)]);
        let mut next = 0;
        while next < dfa.subsets.len() {
            let current = dfa.subsets[next];
            dfa.accepting.push(current & final_mask != 0);
            let mut row = Vec::with_capacity(alphabet.len());
            for &a in &alphabet {
                let target = self
                    .transitions
                    .iter()
                    .filter(|t| t.symbol == a && !t.sources.is_empty())
                    .filter(|t| mask(&t.sources) & !current == 0)
                    .fold(0u64, |acc, t| acc | 1 << t.target);
                let id = *index.entry(target).or_insert_with(|| {
                    dfa.subsets.push(target);
                    dfa.subsets.len() - 1
                });
                row.push(id);
            }
            dfa.delta.push(row);
            next += 1;
        }
        dfa
    }
}

fn mask(states: &BTreeSet<usize>) -> u64 {
    states.iter().fold(0, |acc, &q| acc | 1 << q)
}

struct TreeSearch<'a> {
    pfa: &'a Pfa,
    word: &'a [char],
    memo: HashMap<(usize, usize), Option<usize>>,
}

impl TreeSearch<'_> {
    /// Can state `q` root a run tree over the first `k` symbols?
    fn derivable(&mut self, q: usize, k: usize) -> bool {
        self.witness(q, k).is_some() || (k == 0 && self.pfa.initial.contains(&q))
    }

    /// Index of a transition justifying `(q, k)` for `k > 0`.
    fn witness(&mut self, q: usize, k: usize) -> Option<usize> {
        if k == 0 {
            return None;
        }
        if let Some(&w) = self.memo.get(&(q, k)) {
            return w;
        }
        let symbol = self.word[k - 1];
        let pfa = self.pfa;
        let mut found = None;
        for (idx, t) in pfa.transitions.iter().enumerate() {
            if t.target != q || t.symbol != symbol || t.sources.is_empty() {
                continue;
            }
            if t.sources.iter().all(|&p| self.derivable(p, k - 1)) {
                found = Some(idx);
                break;
            }
        }
        self.memo.insert((q, k), found);
        found
    }

    fn build(&mut self, q: usize, k: usize) -> PfaRunTree {
        if k == 0 {
            return PfaRunTree {
                state: q,
                children: Vec::new(),
            };
        }
        let idx = self.witness(q, k).expect("derivable node has a witness");
        let pfa = self.pfa;
        PfaRunTree {
            state: q,
            children: pfa.transitions[idx].sources.iter().map(|&p| self.build(p, k - 1)).collect(),
        }
    }
}

impl PfaRunTree {
    /// Checks every run-tree condition, including acceptance at the root.
    pub fn is_accepting_run(&self, pfa: &Pfa, s: &str) -> bool {
        let word: Vec<char> = s.chars().collect();
        pfa.finals.contains(&self.state) && self.valid_at(pfa, &word, 0)
    }

    fn valid_at(&self, pfa: &Pfa, word: &[char], depth: usize) -> bool {
        let n = word.len();
        if depth == n {
            return self.children.is_empty() && pfa.initial.contains(&self.state);
        }
        let states: BTreeSet<usize> = self.children.iter().map(|c| c.state).collect();
        if states.len() != self.children.len() || states.is_empty() {
            return false;
        }
        let symbol = word[n - depth - 1];
        let justified = pfa
            .transitions
            .iter()
            .any(|t| t.target == self.state && t.symbol == symbol && t.sources == states);
        justified && self.children.iter().all(|c| c.valid_at(pfa, word, depth + 1))
    }
}

/// The subset automaton of a PFA. Only reachable subsets are materialized.
#[derive(Clone, Debug)]
pub struct Dfa {
    alphabet: Vec<char>,
    subsets: Vec<u64>,
    delta: Vec<Vec<usize>>,
    accepting: Vec<bool>,
}

impl Dfa {
    pub fn num_states(&self) -> usize {
        self.subsets.len()
    }

    /// The PFA states making up DFA state `id`.
    pub fn subset(&self, id: usize) -> BTreeSet<usize> {
        (0..MAX_STATES).filter(|&q| self.subsets[id] >> q & 1 == 1).collect()
    }

    pub fn is_final(&self, id: usize) -> bool {
        self.accepting[id]
    }

    pub fn step(&self, id: usize, symbol: char) -> Result<usize> {
        let col = self
            .alphabet
            .iter()
            .position(|&a| a == symbol)
            .ok_or_else(|| Error::Input(format!("symbol {symbol:?} not in alphabet")))?;
        Ok(self.delta[id][col])
    }

    pub fn accepts(&self, s: &str) -> Result<bool> {
        let mut state = 0;
        for c in s.chars() {
            state = self.step(state, c)?;
        }
        Ok(self.accepting[state])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Accepts strings with a T and an S, in any order, before an R.
    fn p0() -> Pfa {
        let mut p = Pfa::new(5, ['T', 'S', 'R'], [0, 2], [4]).unwrap();
        for q in 0..5 {
            for a in ['T', 'S', 'R'] {
                p.add_transition([q], a, q).unwrap();
            }
        }
        p.add_transition([0], 'T', 1).unwrap();
        p.add_transition([2], 'S', 3).unwrap();
        p.add_transition([1, 3], 'R', 4).unwrap();
        p
    }

    #[test]
    fn p0_language() {
        let p = p0();
        assert!(p.accepts("TSR").unwrap());
        assert!(p.accepts("STR").unwrap());
        assert!(!p.accepts("TR").unwrap());
        assert!(!p.accepts("RRR").unwrap());
        assert!(!p.accepts("").unwrap());
        assert!(p.accepts("X").is_err());
    }

    #[test]
    fn witness_trees_validate() {
        let p = p0();
        for s in ["TSR", "STR", "RTTSRR", "TSRS"] {
            let tree = p.find_run_tree(s).unwrap();
            assert_eq!(tree.is_some(), p.accepts(s).unwrap());
            if let Some(tree) = tree {
                assert!(tree.is_accepting_run(&p, s), "{s}");
                assert!(!tree.is_accepting_run(&p, &s[1..]));
            }
        }
    }

    #[test]
    fn determinize_p0() {
        let p = p0();
        let d = p.determinize();
        assert!(d.num_states() <= 32);
        assert!(d.accepts("TSR").unwrap());
        assert!(!d.accepts("RRR").unwrap());
        assert!(d.accepts("Q").is_err());
    }

    #[test]
    fn empty_finals_reject_everything() {
        let mut p = Pfa::new(2, ['a'], [0], []).unwrap();
        p.add_transition([0], 'a', 1).unwrap();
        let d = p.determinize();
        for s in ["", "a", "aa"] {
            assert!(!d.accepts(s).unwrap());
        }
    }

    #[test]
    fn empty_word_accepted_iff_initial_is_final() {
        let p = Pfa::new(1, ['a'], [0], [0]).unwrap();
        assert!(p.accepts("").unwrap());
        assert!(p.determinize().accepts("").unwrap());
    }

    #[test]
    fn empty_source_transitions_never_fire() {
        let mut p = Pfa::new(2, ['a'], [0], [1]).unwrap();
        p.add_transition([], 'a', 1).unwrap();
        assert!(!p.accepts("a").unwrap());
        assert!(!p.determinize().accepts("a").unwrap());
    }

    #[test]
    fn rejects_bad_states() {
        assert!(Pfa::new(2, ['a'], [2], []).is_err());
        let mut p = Pfa::new(2, ['a'], [0], []).unwrap();
        assert!(p.add_transition([0, 5], 'a', 1).is_err());
        assert!(p.add_transition([0], 'b', 1).is_err());
        assert!(Pfa::new(65, ['a'], [], []).is_err());
    }
}
