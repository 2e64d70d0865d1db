//! Streaming evaluation of an unambiguous PCEA under a sliding window.
//!
//! Per tuple: fire every transition whose predicates can be satisfied by
//! partial runs stored in the hash indices, store the new runs under the key
//! they expose to later tuples, then enumerate the runs that reached a final
//! state. Update cost does not depend on the stream length or the window.
//!
//! On an ambiguous automaton the output is a best-effort bag: valuations may
//! repeat, and the delay bound is not guaranteed.

use std::collections::HashMap;
use std::sync::Arc;

use crate::error::Result;
use crate::model::{Key, Schema, Tuple, Valuation};
use crate::pcea::{LabelId, Pcea, StateId};
use crate::store::{check_heap, check_simple, enumerate, expand, union_depth, window_floor, Mark, NodeRef, Store};

/// Work done by updates, in elementary operations.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct OpCounters {
    pub transitions_scanned: u64,
    /// Unary checks and key extractions, per field touched.
    pub predicate_ops: u64,
    pub lookups: u64,
    pub extends: u64,
    pub unions: u64,
    pub union_steps: u64,
}

impl OpCounters {
    pub fn total(&self) -> u64 {
        self.transitions_scanned + self.predicate_ops + self.lookups + self.extends + self.union_steps
    }

    fn add(&mut self, o: &OpCounters) {
        self.transitions_scanned += o.transitions_scanned;
        self.predicate_ops += o.predicate_ops;
        self.lookups += o.lookups;
        self.extends += o.extends;
        self.unions += o.unions;
        self.union_steps += o.union_steps;
    }
}

/// Invariant checks collected in audit mode.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct AuditReport {
    pub heap_violations: Vec<String>,
    pub simplicity_violations: Vec<String>,
    pub persistence_violations: Vec<String>,
    pub depth_violations: Vec<String>,
    pub union_bound_violations: Vec<String>,
    pub max_depth: usize,
    pub max_unions_per_position: u64,
    pub unions_checked: u64,
}

impl AuditReport {
    pub fn is_clean(&self) -> bool {
        self.heap_violations.is_empty()
            && self.simplicity_violations.is_empty()
            && self.persistence_violations.is_empty()
            && self.depth_violations.is_empty()
            && self.union_bound_violations.is_empty()
    }
}

/// Output stream of the engine: one `Begin`/`End` pair per position with
/// that position's outputs in between.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Event {
    Begin(usize),
    Output(Valuation),
    End(usize),
}

/// Where a source state's runs are read by a transition.
#[derive(Clone, Copy, Debug)]
struct Slot {
    transition: usize,
    source: usize,
}

pub struct Engine {
    pcea: Pcea,
    schema: Option<Schema>,
    store: Store,
    /// `tables[e][k]`: runs for `sources[k]` of transition `e`, by key.
    tables: Vec<Vec<HashMap<Key, NodeRef>>>,
    /// Slots reading each state.
    readers: Vec<Vec<Slot>>,
    labels: Vec<Arc<[LabelId]>>,
    /// New runs per state at the current position.
    fresh: Vec<Vec<NodeRef>>,
    outputs: Vec<NodeRef>,
    position: Option<usize>,
    last: OpCounters,
    total: OpCounters,
    union_bound: u64,
    max_unions: u64,
    last_depth: usize,
    audit: Option<AuditReport>,
}

impl Engine {
    pub fn new(pcea: Pcea, window: Option<usize>) -> Self {
        let mut readers = vec![Vec::new(); pcea.num_states()];
        let mut indegree = vec![0u64; pcea.num_states()];
        let mut source_slots = 0u64;
        for (e, t) in pcea.transitions().iter().enumerate() {
            for (k, p) in t.sources.iter().enumerate() {
                readers[p.index()].push(Slot { transition: e, source: k });
            }
            source_slots += t.sources.len() as u64;
            indegree[t.target.index()] += 1;
        }
        let tables = pcea
            .transitions()
            .iter()
            .map(|t| vec![HashMap::new(); t.sources.len()])
            .collect();
        let labels = pcea.transitions().iter().map(|t| t.labels.iter().copied().collect()).collect();
        Engine {
            union_bound: source_slots * indegree.iter().copied().max().unwrap_or(0),
            fresh: vec![Vec::new(); pcea.num_states()],
            pcea,
            schema: None,
            store: Store::new(window),
            tables,
            readers,
            labels,
            outputs: Vec::new(),
            position: None,
            last: OpCounters::default(),
            total: OpCounters::default(),
            max_unions: 0,
            last_depth: 0,
            audit: None,
        }
    }

    /// Like [`Engine::new`], rejecting automata and tuples that do not fit `schema`.
    pub fn with_schema(pcea: Pcea, window: Option<usize>, schema: Schema) -> Result<Self> {
        pcea.validate_schema(&schema)?;
        let mut e = Engine::new(pcea, window);
        e.schema = Some(schema);
        Ok(e)
    }

    /// Enables invariant checks on every update. Costly: for tests only.
    pub fn enable_audit(&mut self) {
        self.audit = Some(AuditReport::default());
    }

    pub fn audit(&self) -> Option<&AuditReport> {
        self.audit.as_ref()
    }

    pub fn pcea(&self) -> &Pcea {
        &self.pcea
    }

    pub fn window(&self) -> Option<usize> {
        self.store.window()
    }

    /// Position of the last tuple fed.
    pub fn position(&self) -> Option<usize> {
        self.position
    }

    /// Counters for the last tuple fed.
    pub fn last_counters(&self) -> OpCounters {
        self.last
    }

    pub fn total_counters(&self) -> OpCounters {
        self.total
    }

    /// Upper bound on unions per position implied by the automaton.
    pub fn union_bound(&self) -> u64 {
        self.union_bound
    }

    /// Largest union-tree height produced by the last update.
    pub fn last_union_depth(&self) -> usize {
        self.last_depth
    }

    /// Most unions performed at a single position so far.
    pub fn max_unions_per_position(&self) -> u64 {
        self.max_unions
    }

    /// Number of stored index entries.
    pub fn index_entries(&self) -> usize {
        self.tables.iter().flatten().map(HashMap::len).sum()
    }

    /// Processes the next tuple and returns its position.
    pub fn feed(&mut self, t: &Tuple) -> Result<usize> {
        let i = self.position.map_or(0, |p| p + 1);
        if let Some(schema) = &self.schema {
            schema.check(t).map_err(|e| e.at_position(i))?;
        }
        self.position = Some(i);
        let before = self.store.stats();
        let mut ops = OpCounters::default();
        let floor = window_floor(i, self.window());

        for f in &mut self.fresh {
            f.clear();
        }
        self.outputs.clear();

        // Fire transitions.
        for (e, tr) in self.pcea.transitions().iter().enumerate() {
            ops.transitions_scanned += 1;
            if !tr.unary.eval_counted(t, &mut ops.predicate_ops) {
                continue;
            }
            let mut prod = Vec::with_capacity(tr.sources.len());
            for (k, bin) in tr.binaries.iter().enumerate() {
                let Some(key) = bin.right.key_counted(t, &mut ops.predicate_ops) else {
                    break;
                };
                ops.lookups += 1;
                match self.tables[e][k].get(&key) {
                    Some(n) if n.max_start() >= floor => prod.push(n.clone()),
                    _ => break,
                }
            }
            if prod.len() == tr.sources.len() {
                let n = self.store.extend(self.labels[e].clone(), i, prod);
                self.fresh[tr.target.index()].push(n);
            }
        }

        // Store the new runs under the keys later tuples will probe.
        let mut unions_here = 0u64;
        let mut depth_here = 0usize;
        for p in 0..self.fresh.len() {
            if self.fresh[p].is_empty() {
                continue;
            }
            for slot in &self.readers[p] {
                let bin = &self.pcea.transitions()[slot.transition].binaries[slot.source];
                let Some(key) = bin.left.key_counted(t, &mut ops.predicate_ops) else {
                    continue;
                };
                let table = &mut self.tables[slot.transition][slot.source];
                for n in &self.fresh[p] {
                    ops.lookups += 1;
                    let merged = match table.get(&key) {
                        Some(old) => {
                            unions_here += 1;
                            let snapshot = self.audit.is_some().then(|| expand(old));
                            let merged = self.store.union(old, n, i);
                            depth_here = depth_here.max(merged.height());
                            if let (Some(audit), Some(snapshot)) = (&mut self.audit, snapshot) {
                                audit_union(audit, old, snapshot, &merged, i, self.store.window());
                            }
                            merged
                        }
                        None => n.clone(),
                    };
                    table.insert(key.clone(), merged);
                }
            }
        }
        self.max_unions = self.max_unions.max(unions_here);
        self.last_depth = depth_here;

        for q in self.pcea.finals().iter() {
            self.outputs.extend(self.fresh[q.index()].iter().cloned());
        }

        // Drop index entries that can no longer reach the window.
        if let Some(w) = self.window() {
            if i.is_multiple_of(w.max(1)) {
                for table in self.tables.iter_mut().flatten() {
                    table.retain(|_, n| n.max_start() >= floor);
                }
            }
        }

        let after = self.store.stats();
        ops.extends = after.extends - before.extends;
        ops.unions = after.unions - before.unions;
        ops.union_steps = after.union_steps - before.union_steps;
        self.last = ops;
        self.total.add(&ops);

        if self.audit.is_some() {
            self.audit_position(i, unions_here);
        }
        Ok(i)
    }

    fn audit_position(&mut self, i: usize, unions_here: u64) {
        let w = self.window();
        let k = self.max_unions.max(1) as f64;
        let w_eff = w.unwrap_or(i + 1) as f64;
        let bound = 2.0 * (k * (w_eff + 1.0) + 1.0).log2();
        let audit = self.audit.as_mut().expect("audit enabled");
        audit.max_unions_per_position = audit.max_unions_per_position.max(unions_here);
        if unions_here > self.union_bound {
            audit
                .union_bound_violations
                .push(format!("position {i}: {unions_here} unions > {}", self.union_bound));
        }
        for (e, tables) in self.tables.iter().enumerate() {
            for (k_slot, table) in tables.iter().enumerate() {
                for n in table.values() {
                    if !check_heap(n) {
                        audit.heap_violations.push(format!("position {i}: index ({e},{k_slot})"));
                    }
                    let d = union_depth(n);
                    if d != n.height() {
                        audit.depth_violations.push(format!("position {i}: cached height {} != {d}", n.height()));
                    }
                    audit.max_depth = audit.max_depth.max(d);
                    if d as f64 > bound {
                        audit
                            .depth_violations
                            .push(format!("position {i}: depth {d} > {bound:.2}"));
                    }
                }
            }
        }
        for n in &self.outputs {
            if !check_heap(n) {
                audit.heap_violations.push(format!("position {i}: output node"));
            }
            if !check_simple(n) {
                audit.simplicity_violations.push(format!("position {i}: output node"));
            }
        }
    }

    /// Root nodes whose windowed valuations are the outputs at the current position.
    pub fn output_nodes(&self) -> &[NodeRef] {
        &self.outputs
    }

    /// Outputs at the current position, as marks.
    pub fn output_marks(&self) -> impl Iterator<Item = Vec<Mark>> + '_ {
        let (i, w) = (self.position.unwrap_or(0), self.window());
        self.outputs.iter().flat_map(move |n| enumerate(n, i, w))
    }

    /// Outputs at the current position.
    pub fn results(&self) -> impl Iterator<Item = Valuation> + '_ {
        self.output_marks().map(|m| self.valuation(&m))
    }

    /// The current position's outputs framed by `Begin` and `End`.
    pub fn events(&self) -> impl Iterator<Item = Event> + '_ {
        let i = self.position.unwrap_or(0);
        std::iter::once(Event::Begin(i))
            .chain(self.results().map(Event::Output))
            .chain(std::iter::once(Event::End(i)))
    }

    pub fn valuation(&self, marks: &[Mark]) -> Valuation {
        Valuation::from_pairs(marks.iter().map(|&(l, p)| (self.pcea.label_name(l), p)))
    }

    /// Final states, for callers that group outputs.
    pub fn finals(&self) -> impl Iterator<Item = StateId> + '_ {
        self.pcea.finals().iter().copied()
    }
}

fn audit_union(
    audit: &mut AuditReport,
    old: &NodeRef,
    mut snapshot: Vec<Vec<Mark>>,
    merged: &NodeRef,
    i: usize,
    w: Option<usize>,
) {
    audit.unions_checked += 1;
    let mut again = expand(old);
    snapshot.sort();
    again.sort();
    if again != snapshot {
        audit
            .persistence_violations
            .push(format!("position {i}: union changed its operand"));
    }
    // Everything the operand still holds inside the window survives the union.
    let floor = window_floor(i, w);
    let mut after = expand(merged);
    after.sort();
    let mut it = after.iter().peekable();
    for v in snapshot.iter().filter(|v| v.iter().map(|m| m.1).min().unwrap_or(0) >= floor) {
        while it.peek().is_some_and(|a| *a < v) {
            it.next();
        }
        if it.next() != Some(v) {
            audit
                .persistence_violations
                .push(format!("position {i}: union lost a valuation"));
            return;
        }
    }
    if !check_heap(merged) {
        audit.heap_violations.push(format!("position {i}: union result"));
    }
}

/// Runs `pcea` over `tuples`, calling `sink` with each position and its outputs.
pub fn run_stream<I, F>(pcea: Pcea, window: Option<usize>, tuples: I, mut sink: F) -> Result<usize>
where
    I: IntoIterator<Item = Result<Tuple>>,
    F: FnMut(usize, Vec<Valuation>) -> Result<()>,
{
    let mut engine = Engine::new(pcea, window);
    let mut count = 0;
    for t in tuples {
        let t = t?;
        let i = engine.feed(&t)?;
        sink(i, engine.results().collect())?;
        count += 1;
    }
    Ok(count)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use crate::pcea::Oracle;
    use crate::samples;
    use std::collections::BTreeSet;

    fn run_all(pcea: &Pcea, stream: &[Tuple], w: Option<usize>) -> Vec<Vec<Valuation>> {
        let mut e = Engine::new(pcea.clone(), w);
        e.enable_audit();
        let out = stream
            .iter()
            .map(|t| {
                e.feed(t).unwrap();
                e.results().collect()
            })
            .collect();
        assert!(e.audit().unwrap().is_clean(), "{:?}", e.audit());
        out
    }

    #[test]
    fn running_example_outputs() {
        let stream = samples::stream0();
        let out = run_all(&samples::a0(), &stream, None);
        let got: BTreeSet<Valuation> = out[5].iter().cloned().collect();
        let want: BTreeSet<Valuation> = [
            Valuation::from_pairs([("•", 1), ("•", 3), ("•", 5)]),
            Valuation::from_pairs([("•", 0), ("•", 1), ("•", 5)]),
        ]
        .into_iter()
        .collect();
        assert_eq!(got, want);
        let c = run_all(&samples::c0().to_pcea().unwrap(), &stream, None);
        assert_eq!(c[5], vec![Valuation::from_pairs([("•", 1), ("•", 3), ("•", 5)])]);
    }

    #[test]
    fn matches_oracle_on_samples() {
        let stream = samples::stream0();
        for pcea in [samples::a0(), samples::c0().to_pcea().unwrap()] {
            let oracle = Oracle::new(&pcea, &stream).unwrap();
            for w in [Some(0), Some(1), Some(3), Some(4), None] {
                let out = run_all(&pcea, &stream, w);
                for (n, got) in out.iter().enumerate() {
                    let mut got = got.clone();
                    let mut want = oracle.evaluate_windowed(n, w);
                    got.sort();
                    want.sort();
                    assert_eq!(got, want, "w={w:?} n={n}");
                }
            }
        }
    }

    #[test]
    fn events_frame_outputs() {
        let mut e = Engine::new(samples::c0().to_pcea().unwrap(), None);
        for t in samples::stream0().iter().take(6) {
            e.feed(t).unwrap();
        }
        let ev: Vec<Event> = e.events().collect();
        assert_eq!(ev.first(), Some(&Event::Begin(5)));
        assert_eq!(ev.last(), Some(&Event::End(5)));
        assert_eq!(ev.len(), 3);
    }

    #[test]
    fn schema_mismatch_reports_position() {
        let mut e = Engine::with_schema(samples::c0().to_pcea().unwrap(), None, samples::schema0()).unwrap();
        e.feed(&Tuple::ints("T", &[1])).unwrap();
        let err = e.feed(&Tuple::ints("T", &[1, 2])).unwrap_err();
        assert!(matches!(err, Error::AtPosition { position: 1, .. }), "{err}");
    }

    #[test]
    fn run_stream_counts() {
        let tuples = samples::stream0().into_iter().map(Ok);
        let mut seen = 0;
        let n = run_stream(samples::c0().to_pcea().unwrap(), None, tuples, |_, out| {
            seen += out.len();
            Ok(())
        })
        .unwrap();
        assert_eq!(n, 8);
        assert!(seen >= 1);
    }

    #[test]
    fn stale_entries_are_swept() {
        let mut e = Engine::new(samples::c0().to_pcea().unwrap(), Some(2));
        for k in 0..100 {
            e.feed(&Tuple::ints("T", &[k])).unwrap();
        }
        assert!(e.index_entries() <= 10, "{}", e.index_entries());
    }
}
