use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Schema, Tuple, Value};
use crate::error::{Error, Result};

/// The key produced by one side of an equality predicate.
pub type Key = Vec<Value>;

/// A unary tuple predicate decidable in time linear in the tuple size:
/// relation guard, constant constraints and intra-tuple equalities.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct UnaryPredicate {
    pub relation: String,
    #[serde(default)]
    pub constants: BTreeMap<usize, Value>,
    #[serde(default)]
    pub equal_groups: Vec<Vec<usize>>,
}

impl UnaryPredicate {
    /// Accepts every tuple of `relation`.
    pub fn relation(relation: &str) -> Self {
        UnaryPredicate {
            relation: relation.to_string(),
            constants: BTreeMap::new(),
            equal_groups: Vec::new(),
        }
    }

    pub fn with_constant(mut self, index: usize, value: Value) -> Self {
        self.constants.insert(index, value);
        self
    }

    pub fn with_equal_group(mut self, group: Vec<usize>) -> Self {
        self.equal_groups.push(group);
        self
    }

    pub fn eval(&self, t: &Tuple) -> bool {
        let mut ops = 0;
        self.eval_counted(t, &mut ops)
    }

    /// Like [`eval`](Self::eval), adding the number of value comparisons to `ops`.
    pub fn eval_counted(&self, t: &Tuple, ops: &mut u64) -> bool {
        *ops += 1;
        if *t.relation != *self.relation {
            return false;
        }
        for (&idx, c) in &self.constants {
            *ops += 1;
            if t.values.get(idx) != Some(c) {
                return false;
            }
        }
        for group in &self.equal_groups {
            let Some((&first, rest)) = group.split_first() else {
                continue;
            };
            let Some(v) = t.values.get(first) else {
                return false;
            };
            for &idx in rest {
                *ops += 1;
                if t.values.get(idx) != Some(v) {
                    return false;
                }
            }
        }
        true
    }

    pub fn max_index(&self) -> Option<usize> {
        let consts = self.constants.keys().copied();
        let groups = self.equal_groups.iter().flatten().copied();
        consts.chain(groups).max()
    }

    pub fn validate(&self, schema: &Schema) -> Result<()> {
        let arity = schema
            .arity(&self.relation)
            .ok_or_else(|| Error::Schema(format!("unknown relation {}", self.relation)))?;
        match self.max_index() {
            Some(i) if i >= arity => Err(Error::Schema(format!(
                "predicate on {} references attribute {i} beyond arity {arity}",
                self.relation
            ))),
            _ => Ok(()),
        }
    }
}

/// One guard of an equality-predicate side: a pattern and the key projection.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct KeyGuard {
    pub pattern: UnaryPredicate,
    pub key: Vec<usize>,
}

/// One side of an equality predicate: guards keyed by relation name.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct KeySide(pub BTreeMap<String, KeyGuard>);

impl KeySide {
    pub fn single(pattern: UnaryPredicate, key: Vec<usize>) -> Self {
        let mut side = KeySide::default();
        side.insert(pattern, key);
        side
    }

    pub fn insert(&mut self, pattern: UnaryPredicate, key: Vec<usize>) {
        self.0.insert(pattern.relation.clone(), KeyGuard { pattern, key });
    }

    /// The partial key function: defined iff a guard for `t`'s relation accepts `t`.
    pub fn key(&self, t: &Tuple) -> Option<Key> {
        let mut ops = 0;
        self.key_counted(t, &mut ops)
    }

    pub fn key_counted(&self, t: &Tuple, ops: &mut u64) -> Option<Key> {
        let guard = self.0.get(&*t.relation)?;
        if !guard.pattern.eval_counted(t, ops) {
            return None;
        }
        *ops += guard.key.len() as u64;
        guard.key.iter().map(|&i| t.values.get(i).cloned()).collect()
    }
}

/// An equality predicate: `(t1, t2)` holds iff both partial key functions
/// are defined and agree.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EqualityPredicate {
    pub left: KeySide,
    pub right: KeySide,
}

impl EqualityPredicate {
    /// A predicate with a single guard per side.
    pub fn simple(
        left: UnaryPredicate,
        left_key: Vec<usize>,
        right: UnaryPredicate,
        right_key: Vec<usize>,
    ) -> Self {
        EqualityPredicate {
            left: KeySide::single(left, left_key),
            right: KeySide::single(right, right_key),
        }
    }

    pub fn left_key(&self, t: &Tuple) -> Option<Key> {
        self.left.key(t)
    }

    pub fn right_key(&self, t: &Tuple) -> Option<Key> {
        self.right.key(t)
    }

    pub fn eval(&self, t1: &Tuple, t2: &Tuple) -> bool {
        match (self.left.key(t1), self.right.key(t2)) {
            (Some(a), Some(b)) => a == b,
            _ => false,
        }
    }

    /// Checks guard/relation consistency and that every key has the same length.
    pub fn check_shape(&self) -> Result<()> {
        let mut len = None;
        for side in [&self.left, &self.right] {
            for (rel, guard) in &side.0 {
                if *rel != guard.pattern.relation {
                    return Err(Error::InvalidAutomaton(format!(
                        "guard for {rel} carries a pattern on {}",
                        guard.pattern.relation
                    )));
                }
                match len {
                    None => len = Some(guard.key.len()),
                    Some(l) if l != guard.key.len() => {
                        return Err(Error::InvalidAutomaton(
                            "equality predicate keys differ in length".into(),
                        ))
                    }
                    Some(_) => {}
                }
            }
        }
        Ok(())
    }

    pub fn validate(&self, schema: &Schema) -> Result<()> {
        self.check_shape()?;
        for side in [&self.left, &self.right] {
            for guard in side.0.values() {
                guard.pattern.validate(schema)?;
                let arity = schema.arity(&guard.pattern.relation).unwrap_or(0);
                if let Some(&i) = guard.key.iter().find(|&&i| i >= arity) {
                    return Err(Error::Schema(format!(
                        "key index {i} beyond arity of {}",
                        guard.pattern.relation
                    )));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tx_sxy() -> EqualityPredicate {
        EqualityPredicate::simple(
            UnaryPredicate::relation("T"),
            vec![0],
            UnaryPredicate::relation("S"),
            vec![0],
        )
    }

    #[test]
    fn unary_examples() {
        let t = UnaryPredicate::relation("T");
        assert!(t.eval(&Tuple::ints("T", &[2])));
        assert!(!t.eval(&Tuple::ints("S", &[2, 3])));
        let s2y = UnaryPredicate::relation("S").with_constant(0, Value::Int(2));
        assert!(!s2y.eval(&Tuple::ints("S", &[3, 11])));
        assert!(s2y.eval(&Tuple::ints("S", &[2, 11])));
        let rxx = UnaryPredicate::relation("R").with_equal_group(vec![0, 1]);
        assert!(rxx.eval(&Tuple::ints("R", &[7, 7])));
        assert!(!rxx.eval(&Tuple::ints("R", &[7, 8])));
    }

    #[test]
    fn equality_examples() {
        let b = tx_sxy();
        assert!(b.eval(&Tuple::ints("T", &[2]), &Tuple::ints("S", &[2, 11])));
        assert!(!b.eval(&Tuple::ints("T", &[1]), &Tuple::ints("S", &[2, 11])));
        assert!(!b.eval(&Tuple::ints("S", &[2, 11]), &Tuple::ints("S", &[2, 11])));
    }

    #[test]
    fn shape_checks() {
        let mut b = tx_sxy();
        b.right.insert(UnaryPredicate::relation("R"), vec![0, 1]);
        assert!(b.check_shape().is_err());
        let schema = Schema::from_pairs([("T", 1), ("S", 2)]).unwrap();
        assert!(tx_sxy().validate(&schema).is_ok());
        let bad = EqualityPredicate::simple(
            UnaryPredicate::relation("T"),
            vec![1],
            UnaryPredicate::relation("S"),
            vec![0],
        );
        assert!(bad.validate(&schema).is_err());
    }

    #[test]
    fn json_round_trip() {
        let b = EqualityPredicate::simple(
            UnaryPredicate::relation("S").with_constant(1, Value::from("a")),
            vec![0],
            UnaryPredicate::relation("R").with_equal_group(vec![0, 1]),
            vec![1],
        );
        let text = serde_json::to_string(&b).unwrap();
        assert_eq!(serde_json::from_str::<EqualityPredicate>(&text).unwrap(), b);
    }
}
