mod common;

use std::collections::BTreeSet;

use pcea::compiler::compile;
use pcea::cq::{classify, cq_stream_semantics};
use pcea::model::Valuation;
use pcea::pcea::{check_unambiguous_on, Oracle};

#[test]
fn corpus_shape() {
    let corpus = common::corpus();
    assert!(corpus.len() >= 20);
    let classes: Vec<_> = corpus.iter().map(classify).collect();
    assert!(classes.iter().all(|c| c.hierarchical));
    assert!(classes.iter().filter(|c| c.has_self_joins).count() >= 5);
    assert!(classes.iter().filter(|c| !c.connected).count() >= 3);
}

#[test]
fn compiled_runs_match_query_semantics() {
    for (qi, q) in common::corpus().iter().enumerate() {
        let compiled = compile(q).unwrap_or_else(|e| panic!("{q}: {e}"));
        for (si, s) in common::streams_for(q, qi as u64, 25).iter().enumerate() {
            let oracle = Oracle::new(&compiled.automaton, s).unwrap();
            for n in 0..s.len() {
                let runs = oracle.evaluate(n);
                let set: BTreeSet<Valuation> = runs.iter().cloned().collect();
                assert_eq!(set.len(), runs.len(), "duplicate outputs for {q} on stream {si} at {n}");
                let want = cq_stream_semantics(q, s, n).unwrap();
                assert_eq!(set, want, "{q} on stream {si} at {n}: {s:?}");
            }
        }
    }
}

#[test]
fn compiled_automata_are_unambiguous_on_samples() {
    for (qi, q) in common::corpus().iter().enumerate() {
        let compiled = compile(q).unwrap();
        for s in common::streams_for(q, 1000 + qi as u64, 10) {
            let report = check_unambiguous_on(&compiled.automaton, &s).unwrap();
            assert!(report.is_clean(), "{q}: {report:?}");
        }
    }
}

#[test]
fn random_hcqs_match_query_semantics() {
    use pcea::workload::{random_hcq, HcqShape};
    use rand::rngs::StdRng;
    use rand::SeedableRng;

    let mut rng = StdRng::seed_from_u64(99);
    let mut outputs = 0;
    for k in 0..300 {
        let shape = HcqShape {
            components: 1 + k % 3,
            self_joins: k % 2 == 0,
            max_atoms: 4,
            ..HcqShape::default()
        };
        let q = random_hcq(&mut rng, &shape);
        let compiled = compile(&q).unwrap_or_else(|e| panic!("{q}: {e}"));
        for s in common::streams_for(&q, k as u64, 12) {
            let oracle = Oracle::new(&compiled.automaton, &s).unwrap();
            for n in 0..s.len() {
                let runs = oracle.evaluate(n);
                let set: BTreeSet<Valuation> = runs.iter().cloned().collect();
                assert_eq!(set.len(), runs.len(), "duplicates for {q} at {n}: {s:?}");
                assert_eq!(set, cq_stream_semantics(&q, &s, n).unwrap(), "{q} at {n}: {s:?}");
                outputs += set.len();
            }
        }
    }
    assert!(outputs > 1000, "only {outputs} outputs");
}
