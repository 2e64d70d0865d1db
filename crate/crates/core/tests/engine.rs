mod common;

use pcea::compiler::compile;
use pcea::cq::cq_stream_semantics_windowed;
use pcea::engine::Engine;
use pcea::model::Valuation;
use pcea::pcea::Oracle;

#[test]
fn engine_matches_oracle_on_corpus() {
    let mut outputs = 0;
    for (qi, q) in common::corpus().iter().enumerate() {
        let compiled = compile(q).unwrap();
        for s in common::streams_for(q, 500 + qi as u64, 12) {
            let oracle = Oracle::new(&compiled.automaton, &s).unwrap();
            for w in common::WINDOWS {
                let mut engine = Engine::new(compiled.automaton.clone(), w);
                engine.enable_audit();
                for (n, t) in s.iter().enumerate() {
                    assert_eq!(engine.feed(t).unwrap(), n);
                    let mut got: Vec<Valuation> = engine.results().collect();
                    let mut want = oracle.evaluate_windowed(n, w);
                    got.sort();
                    want.sort();
                    assert_eq!(got, want, "{q} w={w:?} n={n}: {s:?}");
                    let sem: Vec<Valuation> = cq_stream_semantics_windowed(q, &s, n, w).unwrap().into_iter().collect();
                    assert_eq!(got, sem, "{q} w={w:?} n={n}");
                    outputs += got.len();
                }
                let audit = engine.audit().unwrap();
                assert!(audit.is_clean(), "{q} w={w:?}: {audit:?}");
            }
        }
    }
    assert!(outputs > 500, "only {outputs} outputs");
}

#[test]
fn long_random_streams_stay_consistent() {
    use pcea::workload::{query_schema, random_stream};
    use rand::rngs::StdRng;
    use rand::SeedableRng;

    let mut rng = StdRng::seed_from_u64(17);
    for text in common::SELF_JOIN_FREE.iter().chain(common::SELF_JOINS).take(12) {
        let q = common::parse(text);
        let compiled = compile(&q).unwrap();
        let s = random_stream(&mut rng, &query_schema(&q), 60, 3);
        let oracle = Oracle::new(&compiled.automaton, &s).unwrap();
        for w in [Some(3), Some(10)] {
            let mut engine = Engine::new(compiled.automaton.clone(), w);
            for (n, t) in s.iter().enumerate() {
                engine.feed(t).unwrap();
                let mut got: Vec<Valuation> = engine.results().collect();
                let mut want = oracle.evaluate_windowed(n, w);
                got.sort();
                want.sort();
                assert_eq!(got, want, "{q} w={w:?} n={n}");
            }
        }
    }
}
