use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use esdtrace_core::diffstats::{diff_states, EdgeCategory, Partition};
use esdtrace_core::logmodel::{parse_log, ParseMode, RawLog, RegisterSchema};
use esdtrace_core::stategraph::{traces_from_logs, AbstractionConfig, ExecutionTrace, StateId};
use esdtrace_core::synthcorpus::{generate_corpus, make_machine, Corpus, PerturbationModel};
use sha2::{Digest, Sha256};

use crate::{ensure, Outcome};

fn corpus_traces(corpus: &Corpus) -> Result<Vec<ExecutionTrace>, String> {
    let logs: Vec<RawLog> = corpus
        .runs
        .iter()
        .map(|r| {
            parse_log(&r.log.text, &corpus.schema, ParseMode::Strict)
                .map(|l| l.with_metadata(r.metadata.clone()))
        })
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    traces_from_logs(&logs, AbstractionConfig::default()).map_err(|e| e.to_string())
}

fn seed42_corpus(model: &PerturbationModel) -> Result<Corpus, String> {
    let schema = RegisterSchema::ohci();
    let machine = make_machine(42, 6, &schema).map_err(|e| e.to_string())?;
    generate_corpus(&machine, 20, 20, 200, model, 42).map_err(|e| e.to_string())
}

pub fn differential_soundness() -> Outcome {
    let clean = corpus_traces(&seed42_corpus(&PerturbationModel::none())?)?;
    let report = diff_states(&Partition::split(clean).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    ensure(report.esd_only_states.is_empty(), || {
        format!("p=0: {} ESD-only states", report.esd_only_states.len())
    })?;
    ensure(report.esd_only_edges.is_empty(), || {
        format!("p=0: {} ESD-only edges", report.esd_only_edges.len())
    })?;

    let schema = RegisterSchema::ohci();
    let model = PerturbationModel::new(0.05, 2, None, &schema).map_err(|e| e.to_string())?;
    let traces = corpus_traces(&seed42_corpus(&model)?)?;
    let part = Partition::split(traces).map_err(|e| e.to_string())?;
    let report = diff_states(&part).map_err(|e| e.to_string())?;

    // Recompute the reached sets and the expected category of every
    // ESD-only edge from the raw traces.
    let pairs = |t: &ExecutionTrace| t.states.windows(2).map(|w| (w[0], w[1])).collect::<Vec<_>>();
    let base_states: BTreeSet<StateId> = part.baseline.iter().flat_map(|t| t.states.clone()).collect();
    let esd_states: BTreeSet<StateId> = part.esd.iter().flat_map(|t| t.states.clone()).collect();
    let base_edges: BTreeSet<(StateId, StateId)> = part.baseline.iter().flat_map(pairs).collect();
    let esd_edges: BTreeSet<(StateId, StateId)> = part.esd.iter().flat_map(pairs).collect();

    let want_states: BTreeSet<StateId> = esd_states.difference(&base_states).copied().collect();
    ensure(report.esd_only_states == want_states, || "ESD-only states differ from set difference".into())?;
    let want_edges: BTreeSet<(StateId, StateId)> = esd_edges.difference(&base_edges).copied().collect();
    let got_edges: BTreeSet<(StateId, StateId)> = report.esd_only_edges.keys().copied().collect();
    ensure(got_edges == want_edges, || "ESD-only edges differ from set difference".into())?;
    ensure(!want_edges.is_empty(), || "perturbed corpus produced no ESD-only edges".into())?;

    let mut buckets: [BTreeSet<(StateId, StateId)>; 4] = Default::default();
    for (&(from, to), &category) in &report.esd_only_edges {
        let from_in = base_states.contains(&from);
        let to_in = base_states.contains(&to);
        let want = match (from_in, to_in) {
            (true, false) => 1,
            (false, false) => 2,
            (true, true) => 3,
            (false, true) => 4,
        };
        ensure(category.number() == want, || {
            format!("{from}->{to}: category {} want {want}", category.number())
        })?;
        ensure(category == EdgeCategory::classify(from_in, to_in), || "classify disagrees".into())?;
        if want == 3 {
            ensure(!base_edges.contains(&(from, to)), || "category 3 edge seen in baseline".into())?;
        }
        buckets[usize::from(want - 1)].insert((from, to));
    }
    let union: BTreeSet<_> = buckets.iter().flatten().copied().collect();
    let sizes: Vec<usize> = buckets.iter().map(BTreeSet::len).collect();
    ensure(union == want_edges && sizes.iter().sum::<usize>() == want_edges.len(), || {
        "categories do not partition the ESD-only edges".into()
    })?;
    ensure(report.category_counts().to_vec() == sizes, || "category counts disagree".into())?;
    Ok(format!(
        "p=0 empty; p=0.05: {} ESD-only states, {} edges split {sizes:?} over categories 1-4",
        want_states.len(),
        want_edges.len()
    ))
}

fn esdtrace(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_esdtrace"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!(
            "esdtrace {} exited {:?}: {}",
            args.join(" "),
            out.status.code(),
            String::from_utf8_lossy(&out.stderr)
        ))
    }
}

fn path(p: &Path) -> &str {
    p.to_str().expect("utf-8 temp path")
}

pub fn end_to_end_detection() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let corpus = dir.path().join("corpus");
    let art = dir.path().join("art");
    let sweep = dir.path().join("sweep");

    let start = Instant::now();
    esdtrace(&["gen", "--seed", "42", "--baseline", "20", "--esd", "20", "--length", "200",
        "-p", "0.05", "-k", "2", "--out", path(&corpus)])?;
    esdtrace(&["ingest", path(&corpus), "--out", path(&art)])?;
    esdtrace(&["train", path(&art), "--out", path(&art)])?;
    esdtrace(&["sweep", path(&art), "--variant", "plain", "--delta", "0", "--protocol", "loo",
        "--out", path(&sweep)])?;
    let secs = start.elapsed().as_secs_f64();

    let csv = fs::read_to_string(sweep.join("sweep.csv")).map_err(|e| e.to_string())?;
    let row = csv.lines().nth(1).ok_or("sweep.csv has no rows")?;
    let accuracy: f64 = row
        .split(',')
        .nth(1)
        .and_then(|a| a.parse().ok())
        .ok_or_else(|| format!("bad sweep row {row:?}"))?;
    ensure(accuracy >= 0.90, || format!("leave-one-out accuracy {accuracy}"))?;
    ensure(secs < 10.0, || format!("pipeline took {secs:.2}s"))?;
    Ok(format!("leave-one-out accuracy {accuracy}, pipeline {secs:.2}s"))
}

fn hash_tree(root: &Path) -> Result<BTreeMap<PathBuf, String>, String> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).map_err(|e| e.to_string())? {
            let p = entry.map_err(|e| e.to_string())?.path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let bytes = fs::read(&p).map_err(|e| e.to_string())?;
                let digest: String = Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect();
                out.insert(p.strip_prefix(root).unwrap().to_path_buf(), digest);
            }
        }
    }
    Ok(out)
}

pub fn cli_determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let corpus = dir.path().join("corpus");
    let art = dir.path().join("art");
    esdtrace(&["gen", "--seed", "42", "--length", "120", "--out", path(&corpus)])?;
    esdtrace(&["ingest", path(&corpus), "--out", path(&art)])?;
    esdtrace(&["train", path(&art), "--out", path(&art)])?;
    let weights = art.join("weights.json");

    let (c, a, w) = (path(&corpus), path(&art), path(&weights));
    let commands: Vec<(&str, Vec<&str>)> = vec![
        ("gen", vec!["gen", "--seed", "42", "--length", "120"]),
        ("ingest", vec!["ingest", c]),
        ("graph", vec!["graph", a]),
        ("unify", vec!["unify", a]),
        ("diff", vec!["diff", a]),
        ("stats dist", vec!["stats", "dist", c]),
        ("stats occurrences", vec!["stats", "occurrences", a]),
        ("stats transitions", vec!["stats", "transitions", a]),
        ("train", vec!["train", a, "--variant", "add-delta", "--delta", "2"]),
        ("classify", vec!["classify", a, "--weights", w]),
        ("sweep", vec!["sweep", a, "--variant", "scale-before", "--delta", "0.5,1,7"]),
    ];
    let mut files = 0;
    for (name, args) in &commands {
        let mut hashes = Vec::new();
        for run in 0..2 {
            let out = dir.path().join(format!("{}-{run}", name.replace(' ', "-")));
            let mut full = args.clone();
            full.extend(["--out", path(&out)]);
            esdtrace(&full)?;
            hashes.push(hash_tree(&out)?);
        }
        ensure(!hashes[0].is_empty(), || format!("{name} wrote nothing"))?;
        ensure(hashes[0] == hashes[1], || format!("{name}: outputs differ between runs"))?;
        files += hashes[0].len();
    }
    Ok(format!("{} subcommands, {files} output files byte-identical across two runs", commands.len()))
}
