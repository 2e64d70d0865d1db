//! Small fixed instances: a three-relation schema, an eight-tuple stream and
//! two automata over it, plus a three-atom query.

use crate::model::{EqualityPredicate, Schema, Tuple, UnaryPredicate};
use crate::pcea::{Ccea, CceaInitial, CceaTransition, Pcea, PceaBuilder};

/// The label used by [`a0`] and [`c0`].
pub const BULLET: &str = "•";

pub const Q0: &str = "Q0(x,y) <- T(x), S(x,y), R(x,y).";

/// Not hierarchical, with a self-join on `T`.
pub const Q1: &str = "Q1(x,y) <- T(x), R(x,y), S(2,y), T(x).";

pub const STREAM0: &str = "S(2,11)\nT(2)\nR(1,10)\nS(2,11)\nT(1)\nR(2,11)\nS(4,13)\nT(1)\n";

/// `R/2`, `S/2`, `T/1`.
pub fn schema0() -> Schema {
    Schema::from_pairs([("R", 2), ("S", 2), ("T", 1)]).expect("valid schema")
}

pub fn stream0() -> Vec<Tuple> {
    vec![
        Tuple::ints("S", &[2, 11]),
        Tuple::ints("T", &[2]),
        Tuple::ints("R", &[1, 10]),
        Tuple::ints("S", &[2, 11]),
        Tuple::ints("T", &[1]),
        Tuple::ints("R", &[2, 11]),
        Tuple::ints("S", &[4, 13]),
        Tuple::ints("T", &[1]),
    ]
}

/// `(Tx, Sxy)`: the `T` value equals the first `S` value.
pub fn tx_sxy() -> EqualityPredicate {
    EqualityPredicate::simple(UnaryPredicate::relation("T"), vec![0], UnaryPredicate::relation("S"), vec![0])
}

/// `(Tx, Rxy)`.
pub fn tx_rxy() -> EqualityPredicate {
    EqualityPredicate::simple(UnaryPredicate::relation("T"), vec![0], UnaryPredicate::relation("R"), vec![0])
}

/// `(Sxy, Rxy)`: both attributes agree.
pub fn sxy_rxy() -> EqualityPredicate {
    EqualityPredicate::simple(
        UnaryPredicate::relation("S"),
        vec![0, 1],
        UnaryPredicate::relation("R"),
        vec![0, 1],
    )
}

/// Collects a `T` and an `S` in any order, joined with a later `R`.
pub fn a0() -> Pcea {
    let mut b = PceaBuilder::new();
    b.transition(Vec::new(), UnaryPredicate::relation("T"), [BULLET], "q0")
        .transition(Vec::new(), UnaryPredicate::relation("S"), [BULLET], "q1")
        .transition(
            vec![("q0", tx_rxy()), ("q1", sxy_rxy())],
            UnaryPredicate::relation("R"),
            [BULLET],
            "q2",
        )
        .final_state("q2");
    b.build().expect("valid automaton")
}

/// The chain `T`, then `S`, then `R`.
pub fn c0() -> Ccea {
    let bullet = vec![BULLET.to_string()];
    Ccea {
        states: vec!["q0".into(), "q1".into(), "q2".into()],
        initial: vec![CceaInitial {
            state: "q0".into(),
            unary: UnaryPredicate::relation("T"),
            labels: bullet.clone(),
        }],
        transitions: vec![
            CceaTransition {
                source: "q0".into(),
                unary: UnaryPredicate::relation("S"),
                binary: tx_sxy(),
                labels: bullet.clone(),
                target: "q1".into(),
            },
            CceaTransition {
                source: "q1".into(),
                unary: UnaryPredicate::relation("R"),
                binary: sxy_rxy(),
                labels: bullet,
                target: "q2".into(),
            },
        ],
        finals: vec!["q2".into()],
    }
}
