//! Exhaustive comparison of the classifier score against exact rational
//! arithmetic on raw tallies.
//!
//! A score depends only on how often each state occurs in each log, so a
//! log is represented by its count vector over the three symbols (written
//! out as a sorted trace for the implementation), and a corpus by the
//! multiset of count vectors in each group. Two tiers are enumerated in
//! full:
//!
//! * every corpus of 2 or 3 logs, each log of length 1 to 6;
//! * every corpus of 4 or 5 logs, each log of length 1 to 3.

use std::ops::{Add, Mul};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;

use esdtrace_core::diffstats::Partition;
use esdtrace_core::logmodel::Condition;
use esdtrace_core::stategraph::ExecutionTrace;
use esdtrace_core::weights::{build_counts, build_weights, classify, Label, Variant};

use crate::fixtures::sym_trace;
use crate::{ensure, Outcome};

const SYMBOLS: usize = 3;

type Counts = [i128; SYMBOLS];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Q {
    n: i128,
    d: i128,
}

fn gcd(mut a: i128, mut b: i128) -> i128 {
    a = a.abs();
    b = b.abs();
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

impl Q {
    fn new(n: i128, d: i128) -> Q {
        assert!(d != 0, "zero denominator");
        let g = gcd(n, d).max(1);
        let s = if d < 0 { -1 } else { 1 };
        Q { n: s * n / g, d: s * d / g }
    }

    fn int(n: i128) -> Q {
        Q { n, d: 1 }
    }

    fn to_f64(self) -> f64 {
        self.n as f64 / self.d as f64
    }
}

impl Add for Q {
    type Output = Q;
    fn add(self, o: Q) -> Q {
        Q::new(self.n * o.d + o.n * self.d, self.d * o.d)
    }
}

impl Mul for Q {
    type Output = Q;
    fn mul(self, o: Q) -> Q {
        Q::new(self.n * o.n, self.d * o.d)
    }
}

#[derive(Clone, Copy)]
enum Case {
    Plain,
    AddDelta(i128),
    ScaleBefore(i128),
    ScaleAfter(Q),
}

const CASES: [Case; 4] = [
    Case::Plain,
    Case::AddDelta(2),
    Case::ScaleBefore(7),
    Case::ScaleAfter(Q { n: 1, d: 2 }),
];

impl Case {
    fn variant(self) -> (Variant, f64) {
        match self {
            Case::Plain => (Variant::Plain, 0.0),
            Case::AddDelta(d) => (Variant::AddDelta, d as f64),
            Case::ScaleBefore(d) => (Variant::ScaleBefore, d as f64),
            Case::ScaleAfter(q) => (Variant::ScaleAfter, q.to_f64()),
        }
    }

    /// Weight of a state seen `b` times in baseline and `e` times in ESD
    /// logs, straight from the weight definition.
    fn weight(self, b: i128, e: i128, total_b: i128, total_e: i128) -> Q {
        let (wb, we, scale) = match self {
            Case::Plain => (-total_e, total_b, Q::int(1)),
            Case::AddDelta(d) => (-total_e - d, total_b + d, Q::int(1)),
            Case::ScaleBefore(d) => (-total_e * d, total_b * d, Q::int(1)),
            Case::ScaleAfter(q) => (-total_e, total_b, q),
        };
        Q::new(wb * b + we * e, (wb * b).abs() + (we * e).abs()) * scale
    }
}

fn expected_scores(baseline: &[Counts], esd: &[Counts], case: Case) -> Vec<Q> {
    let mut b = [0i128; SYMBOLS];
    let mut e = [0i128; SYMBOLS];
    for log in baseline {
        (0..SYMBOLS).for_each(|s| b[s] += log[s]);
    }
    for log in esd {
        (0..SYMBOLS).for_each(|s| e[s] += log[s]);
    }
    let total_b: i128 = b.iter().sum();
    let total_e: i128 = e.iter().sum();
    baseline
        .iter()
        .chain(esd)
        .map(|log| {
            let mut sum = Q::int(0);
            for s in 0..SYMBOLS {
                if log[s] > 0 {
                    sum = sum + case.weight(b[s], e[s], total_b, total_e) * Q::int(log[s]);
                }
            }
            sum * Q::new(1, log.iter().sum())
        })
        .collect()
}

fn label_of(score: Q) -> Label {
    match score.n.signum() {
        1 => Label::Esd,
        -1 => Label::Baseline,
        _ => Label::Indeterminate,
    }
}

/// All count vectors with total between 1 and `max_len`.
fn count_vectors(max_len: i128) -> Vec<Counts> {
    let mut out = Vec::new();
    for x in 0..=max_len {
        for y in 0..=max_len - x {
            for z in 0..=max_len - x - y {
                if x + y + z > 0 {
                    out.push([x, y, z]);
                }
            }
        }
    }
    out
}

/// Non-decreasing index tuples of length `k` over `n` items.
fn multisets(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn go(n: usize, k: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            go(n, k, i, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(n, k, 0, &mut Vec::with_capacity(k), &mut out);
    out
}

struct Pool {
    vectors: Vec<Counts>,
    baseline: Vec<ExecutionTrace>,
    esd: Vec<ExecutionTrace>,
}

impl Pool {
    fn new(max_len: i128) -> Pool {
        let vectors = count_vectors(max_len);
        let trace = |i: usize, c: &Counts, condition| {
            let symbols: Vec<u32> = (0..SYMBOLS)
                .flat_map(|s| std::iter::repeat_n(s as u32, c[s] as usize))
                .collect();
            sym_trace(&format!("{condition}{i}"), condition, &symbols)
        };
        Pool {
            baseline: vectors.iter().enumerate().map(|(i, c)| trace(i, c, Condition::Baseline)).collect(),
            esd: vectors.iter().enumerate().map(|(i, c)| trace(i, c, Condition::Esd)).collect(),
            vectors,
        }
    }
}

#[derive(Default)]
struct Tally {
    corpora: AtomicUsize,
    scores: AtomicUsize,
    indeterminate: AtomicUsize,
    mismatches: AtomicUsize,
    first: Mutex<Option<String>>,
}

fn check_corpus(pool: &Pool, bi: &[usize], ei: &[usize], tally: &Tally) {
    let part = Partition {
        baseline: bi.iter().map(|&i| &pool.baseline[i]).collect::<Vec<_>>(),
        esd: ei.iter().map(|&i| &pool.esd[i]).collect::<Vec<_>>(),
    };
    let bv: Vec<Counts> = bi.iter().map(|&i| pool.vectors[i]).collect();
    let ev: Vec<Counts> = ei.iter().map(|&i| pool.vectors[i]).collect();
    let counts = build_counts(&part).expect("both groups are non-empty");
    let logs: Vec<&ExecutionTrace> = part.baseline.iter().chain(&part.esd).copied().collect();
    for case in CASES {
        let (variant, delta) = case.variant();
        let table = build_weights(&counts, variant, delta).expect("valid delta");
        for (log, want) in logs.iter().zip(expected_scores(&bv, &ev, case)) {
            let got = classify(&table, log).expect("non-empty log");
            tally.scores.fetch_add(1, Ordering::Relaxed);
            if want.n == 0 {
                tally.indeterminate.fetch_add(1, Ordering::Relaxed);
            }
            let wrong_score = (got.score - want.to_f64()).abs() > 1e-12;
            if wrong_score || got.label != label_of(want) {
                tally.mismatches.fetch_add(1, Ordering::Relaxed);
                let mut first = tally.first.lock().unwrap();
                if first.is_none() {
                    *first = Some(format!(
                        "{variant}: baseline {bv:?} esd {ev:?} log {}: got {} ({}), want {}/{} ({})",
                        log.run_id,
                        got.score,
                        got.label,
                        want.n,
                        want.d,
                        label_of(want)
                    ));
                }
            }
        }
    }
    tally.corpora.fetch_add(1, Ordering::Relaxed);
}

fn run_tier(max_len: i128, sizes: &[usize], tally: &Tally) {
    let pool = Pool::new(max_len);
    let n = pool.vectors.len();
    let max_group = sizes.iter().max().copied().unwrap_or(0);
    let groups: Vec<Vec<Vec<usize>>> = (0..max_group).map(|k| multisets(n, k)).collect();

    // Work items: (baseline multiset, ESD group size).
    let mut work: Vec<(&[usize], usize)> = Vec::new();
    for &size in sizes {
        for (nb, group) in groups.iter().enumerate().take(size).skip(1) {
            for b in group {
                work.push((b, size - nb));
            }
        }
    }
    let next = AtomicUsize::new(0);
    let threads = thread::available_parallelism().map_or(4, |n| n.get());
    thread::scope(|scope| {
        for _ in 0..threads {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(&(b, ne)) = work.get(i) else { break };
                for e in &groups[ne] {
                    check_corpus(&pool, b, e, tally);
                }
            });
        }
    });
}

pub fn oracle_equivalence() -> Outcome {
    let start = std::time::Instant::now();
    let tally = Tally::default();
    run_tier(6, &[2, 3], &tally);
    run_tier(3, &[4, 5], &tally);
    let secs = start.elapsed().as_secs_f64();

    let mismatches = tally.mismatches.load(Ordering::Relaxed);
    if let Some(first) = tally.first.lock().unwrap().take() {
        return Err(format!("{mismatches} mismatches; first: {first}"));
    }
    ensure(secs < 60.0, || format!("took {secs:.1}s"))?;
    Ok(format!(
        "{} corpora, {} scores over 4 variants, {} exactly zero, 0 mismatches",
        tally.corpora.load(Ordering::Relaxed),
        tally.scores.load(Ordering::Relaxed),
        tally.indeterminate.load(Ordering::Relaxed)
    ))
}
