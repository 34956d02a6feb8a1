use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use esdtrace_core::logmodel::{
    load_metadata, parse_log, validate_corpus, ParseMode, RawLog, RegisterSchema,
};
use esdtrace_core::stategraph::ExecutionTrace;

/// Files produced by a subcommand, written only after all work succeeded.
#[derive(Default)]
pub struct Outputs {
    files: Vec<(PathBuf, Vec<u8>)>,
}

impl Outputs {
    pub fn add(&mut self, path: impl Into<PathBuf>, contents: impl Into<Vec<u8>>) {
        self.files.push((path.into(), contents.into()));
    }

    /// Write every file through a temporary sibling and rename it into place.
    pub fn commit(self) -> Result<()> {
        for (path, contents) in self.files {
            let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            let mut tmp = tempfile::NamedTempFile::new_in(dir)
                .with_context(|| format!("creating temporary file in {}", dir.display()))?;
            std::io::Write::write_all(&mut tmp, &contents)
                .with_context(|| format!("writing {}", path.display()))?;
            tmp.persist(&path)
                .with_context(|| format!("renaming into {}", path.display()))?;
        }
        Ok(())
    }
}

pub fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

pub fn load_schema(path: Option<&Path>) -> Result<RegisterSchema> {
    match path {
        None => Ok(RegisterSchema::ohci()),
        Some(p) => RegisterSchema::from_json(&read_to_string(p)?)
            .with_context(|| format!("schema {}", p.display())),
    }
}

fn files_with_extension(dir: &Path, ext: &str) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).with_context(|| format!("listing {}", dir.display()))? {
        let path = entry?.path();
        if path.is_file() && path.extension().is_some_and(|e| e == ext) {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

/// Parse every `*.log` in `dir` with its `.meta` sidecar, sorted by file name.
pub fn load_logs(
    dir: &Path,
    schema: &RegisterSchema,
    mode: ParseMode,
) -> Result<(Vec<RawLog>, Vec<String>)> {
    let paths = files_with_extension(dir, "log")?;
    if paths.is_empty() {
        anyhow::bail!("no .log files in {}", dir.display());
    }
    let mut warnings = Vec::new();
    let mut logs = Vec::with_capacity(paths.len());
    for path in &paths {
        let meta_path = path.with_extension("meta");
        let meta = load_metadata(&read_to_string(&meta_path)?)
            .with_context(|| format!("metadata {}", meta_path.display()))?;
        for w in meta.warnings {
            warnings.push(format!("{}: {w}", meta_path.display()));
        }
        let log = parse_log(&read_to_string(path)?, schema, mode)
            .with_context(|| format!("log {}", path.display()))?
            .with_metadata(meta.metadata);
        for w in &log.warnings {
            warnings.push(format!("{}:{}: {}", path.display(), w.line, w.message));
        }
        logs.push(log);
    }
    let report = validate_corpus(&logs).context("validating corpus")?;
    warnings.extend(report.warnings);
    Ok((logs, warnings))
}

/// Load trace documents. A directory contributes its `traces/`
/// subdirectory if present, otherwise its own `*.json` files.
pub fn load_traces(inputs: &[PathBuf]) -> Result<Vec<ExecutionTrace>> {
    let mut paths = Vec::new();
    for input in inputs {
        if input.is_dir() {
            let sub = input.join("traces");
            let dir = if sub.is_dir() { sub } else { input.clone() };
            paths.extend(files_with_extension(&dir, "json")?);
        } else {
            paths.push(input.clone());
        }
    }
    if paths.is_empty() {
        anyhow::bail!("no trace files found");
    }
    paths
        .iter()
        .map(|p| {
            ExecutionTrace::from_json(&read_to_string(p)?)
                .with_context(|| format!("trace {}", p.display()))
        })
        .collect()
}

pub fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.into_inner().map_err(|e| anyhow::anyhow!("{e}"))
}
