use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{LabelId, Pcea, StateId, Transition};
use crate::error::{Error, Result};
use crate::model::{EqualityPredicate, UnaryPredicate};

/// The on-disk form: every state and label is referenced by name.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub(super) struct PceaDoc {
    states: Vec<String>,
    labels: Vec<String>,
    finals: Vec<String>,
    transitions: Vec<TransitionDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TransitionDoc {
    sources: Vec<String>,
    unary: UnaryPredicate,
    #[serde(default)]
    binaries: BTreeMap<String, EqualityPredicate>,
    labels: Vec<String>,
    target: String,
}

impl From<&Pcea> for PceaDoc {
    fn from(a: &Pcea) -> Self {
        let state = |q: StateId| a.state_name(q).to_string();
        PceaDoc {
            states: a.states.clone(),
            labels: a.labels.clone(),
            finals: a.finals.iter().map(|&q| state(q)).collect(),
            transitions: a
                .transitions
                .iter()
                .map(|t| TransitionDoc {
                    sources: t.sources.iter().map(|&q| state(q)).collect(),
                    unary: t.unary.clone(),
                    binaries: t
                        .sources
                        .iter()
                        .zip(&t.binaries)
                        .map(|(&q, b)| (state(q), b.clone()))
                        .collect(),
                    labels: t.labels.iter().map(|&l| a.label_name(l).to_string()).collect(),
                    target: state(t.target),
                })
                .collect(),
        }
    }
}

impl TryFrom<PceaDoc> for Pcea {
    type Error = Error;

    fn try_from(doc: PceaDoc) -> Result<Pcea> {
        let state_ids: BTreeMap<&str, StateId> = doc
            .states
            .iter()
            .enumerate()
            .map(|(i, s)| (s.as_str(), StateId(i as u32)))
            .collect();
        let label_ids: BTreeMap<&str, LabelId> = doc
            .labels
            .iter()
            .enumerate()
            .map(|(i, s)| (s.as_str(), LabelId(i as u32)))
            .collect();
        let state = |name: &str| {
            state_ids
                .get(name)
                .copied()
                .ok_or_else(|| Error::InvalidAutomaton(format!("unknown state {name:?}")))
        };
        let label = |name: &str| {
            label_ids
                .get(name)
                .copied()
                .ok_or_else(|| Error::InvalidAutomaton(format!("unknown label {name:?}")))
        };
        let finals = doc
            .finals
            .iter()
            .map(|s| state(s))
            .collect::<Result<BTreeSet<_>>>()?;
        let mut transitions = Vec::with_capacity(doc.transitions.len());
        for mut t in doc.transitions {
            let mut sources = Vec::with_capacity(t.sources.len());
            for name in &t.sources {
                let b = t.binaries.remove(name).ok_or_else(|| {
                    Error::InvalidAutomaton(format!("missing equality predicate for source {name:?}"))
                })?;
                sources.push((state(name)?, b));
            }
            if let Some(extra) = t.binaries.keys().next() {
                return Err(Error::InvalidAutomaton(format!(
                    "equality predicate for {extra:?}, which is not a source"
                )));
            }
            sources.sort_by_key(|(q, _)| *q);
            let mut labels = t.labels.iter().map(|l| label(l)).collect::<Result<Vec<_>>>()?;
            labels.sort();
            transitions.push(Transition {
                sources: sources.iter().map(|(q, _)| *q).collect(),
                binaries: sources.into_iter().map(|(_, b)| b).collect(),
                unary: t.unary,
                labels,
                target: state(&t.target)?,
            });
        }
        Pcea::new(doc.states, doc.labels, finals, transitions)
    }
}
