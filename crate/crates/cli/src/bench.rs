use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use clap::Args;
use pcea::engine::Engine;
use pcea::model::{Schema, Tuple, Value};
use pcea::store::enumerate;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde_json::json;

use crate::{load_source, SourceArgs};

#[derive(Args, Debug)]
pub struct BenchArgs {
    #[command(flatten)]
    source: SourceArgs,
    /// Window sizes to measure.
    #[arg(long, value_delimiter = ',', default_values_t = [64usize, 1024, 16384])]
    windows: Vec<usize>,
    /// Tuples fed after the first window fills.
    #[arg(long, default_value_t = 4096)]
    length: usize,
    /// Values are drawn from `0..domain`.
    #[arg(long, default_value_t = 64)]
    domain: i64,
    /// 0 draws values uniformly; larger values favour small values.
    #[arg(long, default_value_t = 0.0)]
    skew: f64,
    /// Restrict generated tuples to these relations (all by default).
    #[arg(long, value_delimiter = ',')]
    relations: Vec<String>,
    /// Outputs enumerated per position when estimating the delay constant.
    #[arg(long, default_value_t = 256)]
    enum_limit: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also write the table as JSON here.
    #[arg(long)]
    json: Option<PathBuf>,
}

fn generate(args: &BenchArgs, schema: &Schema, len: usize) -> anyhow::Result<Vec<Tuple>> {
    let rels: Vec<(&str, usize)> = schema
        .relations()
        .filter(|(r, _)| args.relations.is_empty() || args.relations.iter().any(|x| x == r))
        .collect();
    anyhow::ensure!(!rels.is_empty(), "no relations to generate");
    let mut rng = StdRng::seed_from_u64(args.seed);
    let domain = args.domain.max(1);
    let value = move |rng: &mut StdRng| {
        let u: f64 = rng.gen();
        Value::Int(((domain as f64) * u.powf(1.0 + args.skew)) as i64 % domain)
    };
    Ok((0..len)
        .map(|_| {
            let (r, arity) = rels[rng.gen_range(0..rels.len())];
            Tuple::new(r, (0..arity).map(|_| value(&mut rng)).collect::<Vec<_>>())
        })
        .collect())
}

struct Row {
    window: usize,
    mean_us: f64,
    p99_us: f64,
    mean_ops: f64,
    max_ops: u64,
    mean_scans: f64,
    max_depth: usize,
    delay: f64,
    outputs: u64,
}

pub fn cmd_bench(args: &BenchArgs, out: &mut impl Write) -> anyhow::Result<()> {
    let (pcea, schema) = load_source(&args.source)?;
    let longest = args.windows.iter().copied().max().unwrap_or(0);
    let stream = generate(args, &schema, longest + args.length)?;
    let mut rows = Vec::new();
    for &w in &args.windows {
        let mut engine = Engine::new(pcea.clone(), Some(w));
        let (mut times, mut ops, mut scans) = (Vec::new(), Vec::new(), 0u64);
        let (mut max_depth, mut delay, mut outputs) = (0usize, 0f64, 0u64);
        // Only the tuples after the window has filled are measured.
        for (i, t) in stream[..w + args.length].iter().enumerate() {
            let start = Instant::now();
            engine.feed(t)?;
            let elapsed = start.elapsed().as_secs_f64() * 1e6;
            let c = engine.last_counters();
            max_depth = max_depth.max(engine.last_union_depth());
            if i >= w {
                times.push(elapsed);
                ops.push(c.total());
                scans += c.transitions_scanned;
            }
            let mut budget = args.enum_limit;
            for n in engine.output_nodes() {
                let mut it = enumerate(n, i, Some(w));
                let mut last = 0;
                while budget > 0 {
                    let Some(v) = it.next() else { break };
                    delay = delay.max((it.steps() - last) as f64 / v.len() as f64);
                    last = it.steps();
                    outputs += 1;
                    budget -= 1;
                }
            }
        }
        times.sort_by(f64::total_cmp);
        let n = times.len().max(1) as f64;
        rows.push(Row {
            window: w,
            mean_us: times.iter().sum::<f64>() / n,
            p99_us: times.get(((times.len() as f64) * 0.99) as usize).copied().unwrap_or(0.0),
            mean_ops: ops.iter().sum::<u64>() as f64 / n,
            max_ops: ops.iter().copied().max().unwrap_or(0),
            mean_scans: scans as f64 / n,
            max_depth,
            delay,
            outputs,
        });
    }
    writeln!(
        out,
        "{:>10} {:>12} {:>12} {:>10} {:>8} {:>10} {:>9} {:>8} {:>10}",
        "window", "mean_us", "p99_us", "mean_ops", "max_ops", "scans/tup", "max_depth", "delay_c", "outputs"
    )?;
    for r in &rows {
        writeln!(
            out,
            "{:>10} {:>12.3} {:>12.3} {:>10.2} {:>8} {:>10.2} {:>9} {:>8.2} {:>10}",
            r.window, r.mean_us, r.p99_us, r.mean_ops, r.max_ops, r.mean_scans, r.max_depth, r.delay, r.outputs
        )?;
    }
    if let Some(path) = &args.json {
        let table: Vec<_> = rows
            .iter()
            .map(|r| {
                json!({
                    "window": r.window,
                    "mean_update_us": r.mean_us,
                    "p99_update_us": r.p99_us,
                    "mean_update_ops": r.mean_ops,
                    "max_update_ops": r.max_ops,
                    "transition_scans_per_tuple": r.mean_scans,
                    "max_union_depth": r.max_depth,
                    "max_delay_constant": r.delay,
                    "outputs_sampled": r.outputs,
                })
            })
            .collect();
        std::fs::write(path, serde_json::to_string_pretty(&table)? + "\n")?;
    }
    Ok(())
}
