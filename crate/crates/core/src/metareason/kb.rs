//! Directory-backed model knowledge base.
//!
//! Each entry is a manifest `<id>.entry` next to its model file:
//!
//! ```text
//! model m2.tdid
//! quality 9          # or `unsolved`
//! cost 4
//! space 12
//! intervals 3
//! measured 0.0021
//! tags fine cardiac
//! ```
//!
//! Only `model` is required. Missing `space` and `intervals` are computed
//! from the deployed model when the knowledge base is loaded.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::Instant;

use super::{MetaError, SuiteEntry};
use crate::deploy::deploy;
use crate::model::{parse, serialize, CondensedTdid};
use crate::numfmt::g17;
use crate::solve::solve;

#[derive(Debug, Clone, PartialEq)]
pub struct KbEntry {
    /// Model file name, relative to the knowledge-base directory.
    pub model_file: String,
    pub model: CondensedTdid,
    /// Explicit cost from the manifest, if any.
    pub cost: Option<f64>,
    /// `cost_time` is `cost` when present and NaN otherwise.
    pub suite: SuiteEntry,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> MetaError + '_ {
    move |source| MetaError::Io { path: path.display().to_string(), source }
}

#[derive(Debug)]
struct Manifest {
    model: String,
    quality: Option<f64>,
    cost: Option<f64>,
    space: Option<u64>,
    intervals: Option<u32>,
    measured: Option<f64>,
    tags: Vec<String>,
}

fn parse_manifest(path: &Path, text: &str) -> Result<Manifest, MetaError> {
    let err = |line: usize, message: String| MetaError::Manifest {
        path: path.display().to_string(),
        message: format!("line {line}: {message}"),
    };
    let mut m = Manifest { model: String::new(), quality: None, cost: None, space: None, intervals: None, measured: None, tags: Vec::new() };
    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content.split_once(char::is_whitespace).unwrap_or((content, ""));
        let value = value.trim();
        let real = |v: &str| -> Result<f64, MetaError> {
            v.parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| err(line, format!("`{v}` is not a finite number")))
        };
        match key {
            "model" if !value.is_empty() => m.model = value.to_string(),
            "quality" if value == "unsolved" => m.quality = None,
            "quality" => m.quality = Some(real(value)?),
            "cost" => {
                let c = real(value)?;
                if c < 0.0 {
                    return Err(err(line, "cost must be >= 0".into()));
                }
                m.cost = Some(c);
            }
            "measured" => m.measured = Some(real(value)?),
            "space" => m.space = Some(value.parse().map_err(|_| err(line, format!("`{value}` is not a count")))?),
            "intervals" => m.intervals = Some(value.parse().map_err(|_| err(line, format!("`{value}` is not a count")))?),
            "tags" => m.tags = value.split_whitespace().map(str::to_string).collect(),
            other => return Err(err(line, format!("unknown field `{other}`"))),
        }
    }
    if m.model.is_empty() {
        return Err(err(0, "missing `model` line".into()));
    }
    Ok(m)
}

fn render_manifest(entry: &KbEntry) -> String {
    let e = &entry.suite;
    let mut out = format!("model {}\n", entry.model_file);
    match e.quality {
        Some(q) => writeln!(out, "quality {}", g17(q)),
        None => writeln!(out, "quality unsolved"),
    }
    .unwrap();
    if let Some(c) = entry.cost {
        writeln!(out, "cost {}", g17(c)).unwrap();
    }
    writeln!(out, "space {}", e.space_size).unwrap();
    writeln!(out, "intervals {}", e.n_intervals).unwrap();
    if let Some(t) = e.measured {
        writeln!(out, "measured {}", g17(t)).unwrap();
    }
    if !e.tags.is_empty() {
        writeln!(out, "tags {}", e.tags.join(" ")).unwrap();
    }
    out
}

/// Loads every `*.entry` manifest in `dir`, ordered by id.
pub fn load_kb(dir: &Path) -> Result<Vec<KbEntry>, MetaError> {
    let mut paths: Vec<_> = fs::read_dir(dir)
        .map_err(io_err(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "entry"))
        .collect();
    paths.sort();
    let mut entries = Vec::with_capacity(paths.len());
    for path in paths {
        let id = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
        let manifest = parse_manifest(&path, &fs::read_to_string(&path).map_err(io_err(&path))?)?;
        let model_path = dir.join(&manifest.model);
        let text = fs::read_to_string(&model_path).map_err(io_err(&model_path))?;
        let model = parse(&text).map_err(|source| MetaError::Parse { path: model_path.display().to_string(), source })?;
        let space_size = match manifest.space {
            Some(s) => s,
            None => deploy(&model).map_err(|source| MetaError::Deploy { id: id.clone(), source })?.table_entries() as u64,
        };
        let n_intervals = manifest.intervals.unwrap_or(model.master.len() as u32);
        entries.push(KbEntry {
            model_file: manifest.model,
            model,
            cost: manifest.cost,
            suite: SuiteEntry {
                id,
                quality: manifest.quality,
                cost_time: manifest.cost.unwrap_or(f64::NAN),
                space_size,
                n_intervals,
                measured: manifest.measured,
                tags: manifest.tags,
            },
        });
    }
    Ok(entries)
}

/// Writes `<id>.tdid` and `<id>.entry` into `dir`. Space and interval counts
/// are taken from the deployed model.
pub fn write_entry(
    dir: &Path,
    id: &str,
    model: &CondensedTdid,
    quality: Option<f64>,
    cost: Option<f64>,
    tags: &[String],
) -> Result<KbEntry, MetaError> {
    let did = deploy(model).map_err(|source| MetaError::Deploy { id: id.to_string(), source })?;
    let entry = KbEntry {
        model_file: format!("{id}.tdid"),
        model: model.clone(),
        cost,
        suite: SuiteEntry {
            id: id.to_string(),
            quality,
            cost_time: cost.unwrap_or(f64::NAN),
            space_size: did.table_entries() as u64,
            n_intervals: model.master.len() as u32,
            measured: None,
            tags: tags.to_vec(),
        },
    };
    save(dir, &entry)?;
    Ok(entry)
}

fn save(dir: &Path, entry: &KbEntry) -> Result<(), MetaError> {
    let model_path = dir.join(&entry.model_file);
    fs::write(&model_path, serialize(&entry.model)).map_err(io_err(&model_path))?;
    let manifest = dir.join(format!("{}.entry", entry.suite.id));
    fs::write(&manifest, render_manifest(entry)).map_err(io_err(&manifest))
}

/// Deploys and solves one model, returning its MEU and the wall-clock seconds
/// spent.
pub(crate) fn timed_solve(id: &str, model: &CondensedTdid) -> Result<(f64, f64), MetaError> {
    let start = Instant::now();
    let did = deploy(model).map_err(|source| MetaError::Deploy { id: id.to_string(), source })?;
    let policy = solve(&did).map_err(|source| MetaError::Solve { id: id.to_string(), source })?;
    Ok((policy.meu, start.elapsed().as_secs_f64()))
}

/// Solves every entry (in parallel) and records quality and measured solve
/// time in its manifest. Manifests are rewritten one by one, in id order.
pub fn calibrate(dir: &Path) -> Result<Vec<KbEntry>, MetaError> {
    let mut entries = load_kb(dir)?;
    let results: Vec<Result<(f64, f64), MetaError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = entries
            .iter()
            .map(|e| scope.spawn(move || timed_solve(&e.suite.id, &e.model)))
            .collect();
        handles.into_iter().map(|h| h.join().expect("solver thread panicked")).collect()
    });
    for (entry, result) in entries.iter_mut().zip(results) {
        let (meu, seconds) = result?;
        entry.suite.quality = Some(meu);
        entry.suite.measured = Some(seconds);
        save(dir, entry)?;
    }
    Ok(entries)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let model = parse(include_str!("../../../../fixtures/figure1.tdid")).unwrap();
        let written = write_entry(dir.path(), "fig", &model, Some(0.5), Some(2.0), &["a".into()]).unwrap();
        let loaded = load_kb(dir.path()).unwrap();
        assert_eq!(loaded, vec![written]);
    }

    #[test]
    fn unknown_field_is_reported() {
        let err = parse_manifest(Path::new("x.entry"), "model a.tdid\ncolour red\n").unwrap_err();
        assert_eq!(err.to_string(), "x.entry: line 2: unknown field `colour`");
    }
}
