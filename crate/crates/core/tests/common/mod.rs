#![allow(dead_code)]

use pcea::cq::{parse_cq, Cq};
use pcea::model::Tuple;
use pcea::workload::{query_schema, random_hcq, random_stream, HcqShape};
use rand::rngs::StdRng;
use rand::SeedableRng;

pub const SELF_JOIN_FREE: &[&str] = &[
    "Q0(x,y) <- T(x), S(x,y), R(x,y).",
    "Q(x) <- T(x).",
    "Q(x,y) <- R(x,y).",
    "Q(x,y) <- R(x,y), S(x,y).",
    "Q(x,y,z) <- R(x,y), S(x,z).",
    "Q(x,y,z) <- T(x), R(x,y), S(x,z).",
    "Q(x,y,z) <- U(x,y,z), R(x,y), T(x).",
    "Q(x) <- R(x,1), T(x).",
    "Q(x) <- R(x,x), T(x).",
    "Q(x,y,z,v,w) <- R(x,y,z), S(x,y,v), T(x,w), U(x,y).",
];

pub const SELF_JOINS: &[&str] = &[
    "Q(x) <- T(x), T(x).",
    "Q(x,y,z) <- R(x,y), R(x,z).",
    "Q(x,y) <- R(x,y), R(x,y), T(x).",
    "Q(x,y,z) <- S(x,y), R(x,y), R(x,z).",
    "Q(x,y) <- R(x,y), R(y,x).",
    "Q(x,y,z) <- U(x,y,z), U(x,y,y).",
    "Q2(x,y,z,v) <- R(x,y,z), R(x,y,v), U(x,y).",
];

pub const DISCONNECTED: &[&str] = &[
    "Q(x,y) <- T(x), T(y).",
    "Q(x,y,z) <- T(x), R(y,z).",
    "Q(x,y,z) <- R(x,y), S(x,y), T(z).",
    "Q(x) <- T(x), R(1,2).",
    "Q(x,y) <- T(x), S(y,y).",
];

pub fn parse(text: &str) -> Cq {
    parse_cq(text, None).unwrap_or_else(|e| panic!("{text}: {e}"))
}

/// The fixed queries followed by seeded random HCQs of every kind.
pub fn corpus() -> Vec<Cq> {
    let mut out: Vec<Cq> = SELF_JOIN_FREE
        .iter()
        .chain(SELF_JOINS)
        .chain(DISCONNECTED)
        .map(|t| parse(t))
        .collect();
    let mut rng = StdRng::seed_from_u64(0x5eed);
    for (components, self_joins) in [(1, false), (1, true), (2, false), (2, true)] {
        let shape = HcqShape {
            components,
            self_joins,
            max_atoms: 4,
            ..HcqShape::default()
        };
        for _ in 0..3 {
            out.push(random_hcq(&mut rng, &shape));
        }
    }
    out
}

/// `count` seeded streams over the query's relations, lengths 1..=12, values in 0..3.
pub fn streams_for(q: &Cq, seed: u64, count: usize) -> Vec<Vec<Tuple>> {
    let schema = query_schema(q);
    let mut rng = StdRng::seed_from_u64(seed);
    (0..count)
        .map(|k| random_stream(&mut rng, &schema, 1 + k % 12, 3))
        .collect()
}

pub const WINDOWS: [Option<usize>; 5] = [Some(0), Some(1), Some(2), Some(4), None];
