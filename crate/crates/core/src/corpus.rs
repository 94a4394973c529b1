//! JSONL batch pipeline: parse, build views, slice, generate and store masks.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::backslice::{all_masks, StatementMask};
use crate::codeviews::{build_view, CodeViewGraph};
use crate::error::{Error, Result};
use crate::maskgen::{apply_mask_limit, attention_gen, serialize_mask, AttentionMask, MaskConfig};
use crate::syntax::{default_holders, parse, CodeSnippet, Language};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const MASK_DIR: &str = "masks";
pub const HISTOGRAM_BINS: usize = 10;

const ID_KEYS: &[&str] = &["id", "idx", "index", "url"];
const CODE_KEYS: &[&str] = &["code", "func", "function", "original_string"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusRecord {
    pub id: String,
    pub code: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub docstring: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<Value>,
}

fn first_of<'a>(obj: &'a serde_json::Map<String, Value>, keys: &[&str]) -> Option<&'a Value> {
    keys.iter()
        .find_map(|k| obj.get(*k).filter(|v| !v.is_null()))
}

impl CorpusRecord {
    /// Reads one JSONL line. Unknown fields are ignored; numeric ids are
    /// accepted and rendered as strings.
    pub fn from_json_line(line: &str) -> std::result::Result<Self, String> {
        let value: Value = serde_json::from_str(line).map_err(|e| format!("invalid JSON: {e}"))?;
        let obj = value.as_object().ok_or("record is not a JSON object")?;
        let id = match first_of(obj, ID_KEYS) {
            Some(Value::String(s)) => s.clone(),
            Some(Value::Number(n)) => n.to_string(),
            Some(_) => return Err("id must be a string or number".into()),
            None => return Err("record has no id".into()),
        };
        let code = match first_of(obj, CODE_KEYS) {
            Some(Value::String(s)) if !s.trim().is_empty() => s.clone(),
            Some(Value::String(_)) => return Err(format!("record `{id}` has empty code")),
            _ => return Err(format!("record `{id}` has no code")),
        };
        let docstring = ["docstring", "doc"]
            .iter()
            .find_map(|k| obj.get(*k).and_then(Value::as_str))
            .map(str::to_owned);
        Ok(CorpusRecord {
            id,
            code,
            docstring,
            label: obj.get("label").filter(|v| !v.is_null()).cloned(),
        })
    }
}

/// Everything the pipeline derives from one snippet.
#[derive(Clone, Debug)]
pub struct SnippetMasks {
    pub snippet: CodeSnippet,
    pub view: CodeViewGraph,
    pub statement_masks: Vec<StatementMask>,
    /// Mask before the masking limit was applied.
    pub raw: AttentionMask,
    pub mask: AttentionMask,
}

pub fn mask_snippet(source: &str, language: Language, config: &MaskConfig) -> Result<SnippetMasks> {
    config.validate()?;
    let snippet = parse(source, language)?;
    let view = build_view(&snippet, &config.views, config.dfg_options())?;
    let statement_masks = all_masks(&snippet, &view, &default_holders(language))?;
    let raw = attention_gen(&snippet, &statement_masks)?.with_config(config);
    let mask = apply_mask_limit(&raw, config.mask_limit);
    Ok(SnippetMasks {
        snippet,
        view,
        statement_masks,
        raw,
        mask,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RecordStatus {
    Ok,
    FallbackToFull,
    ParseDegraded,
    Error,
}

/// JSON written next to each binary mask.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaskSidecar {
    pub id: String,
    pub n: usize,
    pub nnz: usize,
    pub density: f64,
    pub masked_fraction: f64,
    /// Masked fraction before the limit was applied.
    pub raw_masked_fraction: f64,
    pub fallback: bool,
    pub degraded: bool,
    pub statements: usize,
    pub config: MaskConfig,
    pub config_digest: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecordOutcome {
    pub id: String,
    pub line: usize,
    pub status: RecordStatus,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub file_stem: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub statements: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub tokens: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub raw_masked_fraction: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub fallback: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub tool_version: String,
    pub language: Language,
    pub config: MaskConfig,
    pub config_digest: String,
    pub record_count: usize,
    pub status_counts: BTreeMap<RecordStatus, usize>,
    /// Counts of raw masked fractions in `[k/10, (k+1)/10)`; the last bin
    /// is closed.
    pub masked_fraction_histogram: Vec<usize>,
    pub records: Vec<RecordOutcome>,
}

impl RunManifest {
    pub fn status_of(&self, id: &str) -> Option<RecordStatus> {
        self.records.iter().find(|r| r.id == id).map(|r| r.status)
    }
}

fn histogram_bin(fraction: f64) -> usize {
    ((fraction * HISTOGRAM_BINS as f64).floor() as usize).min(HISTOGRAM_BINS - 1)
}

fn is_safe_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.')
}

/// Filesystem-safe stem for a record id. Ids that are already safe and short
/// are kept verbatim; others get a hash suffix to stay unique.
pub fn file_stem(id: &str) -> String {
    let safe =
        !id.is_empty() && id.len() <= 96 && id.chars().all(is_safe_char) && !id.starts_with('.');
    if safe {
        return id.to_string();
    }
    let cleaned: String = id
        .chars()
        .map(|c| if is_safe_char(c) { c } else { '_' })
        .take(64)
        .collect();
    let hash = hex::encode(&Sha256::digest(id.as_bytes())[..6]);
    format!("{}-{hash}", cleaned.trim_start_matches('.'))
}

enum Work {
    Record(CorpusRecord),
    Rejected { id: String, reason: String },
}

struct Processed {
    outcome: RecordOutcome,
    files: Option<(Vec<u8>, Vec<u8>)>,
}

fn process(line: usize, record: &CorpusRecord, config: &MaskConfig) -> Processed {
    let fail = |reason: String| Processed {
        outcome: RecordOutcome {
            id: record.id.clone(),
            line,
            status: RecordStatus::Error,
            file_stem: None,
            statements: None,
            tokens: None,
            raw_masked_fraction: None,
            fallback: None,
            error: Some(reason),
        },
        files: None,
    };
    let result = catch_unwind(AssertUnwindSafe(|| {
        mask_snippet(&record.code, Language::Java, config)
    }));
    let out = match result {
        Ok(Ok(out)) => out,
        Ok(Err(e)) => return fail(e.to_string()),
        Err(_) => return fail("internal error while processing record".into()),
    };
    let degraded = out.snippet.is_degraded();
    let fallback = out.mask.is_fallback();
    let status = if degraded {
        RecordStatus::ParseDegraded
    } else if fallback {
        RecordStatus::FallbackToFull
    } else {
        RecordStatus::Ok
    };
    let sidecar = MaskSidecar {
        id: record.id.clone(),
        n: out.mask.n(),
        nnz: out.mask.nnz(),
        density: out.mask.density(),
        masked_fraction: out.mask.masked_fraction(),
        raw_masked_fraction: out.raw.masked_fraction(),
        fallback,
        degraded,
        statements: out.snippet.statement_count(),
        config: config.clone(),
        config_digest: config.digest_hex(),
    };
    let mut json = serde_json::to_vec_pretty(&sidecar).expect("sidecar serializes");
    json.push(b'\n');
    Processed {
        outcome: RecordOutcome {
            id: record.id.clone(),
            line,
            status,
            file_stem: Some(file_stem(&record.id)),
            statements: Some(sidecar.statements),
            tokens: Some(sidecar.n),
            raw_masked_fraction: Some(sidecar.raw_masked_fraction),
            fallback: Some(fallback),
            error: None,
        },
        files: Some((serialize_mask(&out.mask), json)),
    }
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Runs the full pipeline over a JSONL corpus. Per-record failures are
/// reported in the manifest; only configuration and I/O problems abort.
pub fn run_batch(input: &Path, config: &MaskConfig, out_dir: &Path) -> Result<RunManifest> {
    config.validate()?;
    let text = fs::read_to_string(input).map_err(|e| Error::io(input, e))?;
    let mask_dir = out_dir.join(MASK_DIR);
    fs::create_dir_all(&mask_dir).map_err(|e| Error::io(&mask_dir, e))?;
    // a stale manifest must not describe a half-written run
    let manifest_path = out_dir.join(MANIFEST_FILE);
    if manifest_path.exists() {
        fs::remove_file(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
    }

    let mut seen_ids = HashSet::new();
    let mut seen_stems = HashSet::new();
    let mut work = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let item = match CorpusRecord::from_json_line(raw) {
            Ok(rec) if !seen_ids.insert(rec.id.clone()) => Work::Rejected {
                reason: format!("duplicate id `{}`", rec.id),
                id: rec.id,
            },
            Ok(rec) if !seen_stems.insert(file_stem(&rec.id)) => Work::Rejected {
                reason: format!("id `{}` collides with another record's file name", rec.id),
                id: rec.id,
            },
            Ok(rec) => Work::Record(rec),
            Err(reason) => Work::Rejected {
                id: format!("line-{line}"),
                reason,
            },
        };
        work.push((line, item));
    }

    let processed: Vec<Processed> = work
        .par_iter()
        .map(|(line, item)| match item {
            Work::Record(rec) => process(*line, rec, config),
            Work::Rejected { id, reason } => Processed {
                outcome: RecordOutcome {
                    id: id.clone(),
                    line: *line,
                    status: RecordStatus::Error,
                    file_stem: None,
                    statements: None,
                    tokens: None,
                    raw_masked_fraction: None,
                    fallback: None,
                    error: Some(reason.clone()),
                },
                files: None,
            },
        })
        .collect();

    processed.par_iter().try_for_each(|p| -> Result<()> {
        if let (Some(stem), Some((mask, json))) = (&p.outcome.file_stem, &p.files) {
            write(&mask_dir.join(format!("{stem}.mask")), mask)?;
            write(&mask_dir.join(format!("{stem}.json")), json)?;
        }
        Ok(())
    })?;

    let mut records: Vec<RecordOutcome> = processed.into_iter().map(|p| p.outcome).collect();
    records.sort_by_key(|r| r.line);
    let mut status_counts = BTreeMap::new();
    let mut histogram = vec![0; HISTOGRAM_BINS];
    for r in &records {
        *status_counts.entry(r.status).or_insert(0) += 1;
        if let Some(f) = r.raw_masked_fraction {
            histogram[histogram_bin(f)] += 1;
        }
    }
    let manifest = RunManifest {
        tool: env!("CARGO_PKG_NAME").to_string(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        language: Language::Java,
        config: config.clone(),
        config_digest: config.digest_hex(),
        record_count: records.len(),
        status_counts,
        masked_fraction_histogram: histogram,
        records,
    };
    let mut bytes = serde_json::to_vec_pretty(&manifest)?;
    bytes.push(b'\n');
    write(&manifest_path, &bytes)?;
    Ok(manifest)
}

pub fn read_manifest(dir: &Path) -> Result<RunManifest> {
    let path = dir.join(MANIFEST_FILE);
    if !path.is_file() {
        return Err(Error::MissingManifest(dir.to_path_buf()));
    }
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    Ok(serde_json::from_str(&text)?)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunStats {
    pub record_count: usize,
    pub views: String,
    pub status_counts: BTreeMap<RecordStatus, usize>,
    /// Share of masked records that fell back to full attention.
    pub fallback_rate: f64,
    /// Mean masked fraction of the stored (post-limit) masks.
    pub mean_masked_fraction: f64,
    pub mean_raw_masked_fraction: f64,
    /// Histogram of stored mask densities, same bins as the manifest.
    pub density_histogram: Vec<usize>,
    pub statements_min: usize,
    pub statements_max: usize,
    pub statements_mean: f64,
}

impl RunStats {
    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("records                 {}\n", self.record_count));
        out.push_str(&format!("views                   {}\n", self.views));
        for (status, count) in &self.status_counts {
            let name = serde_json::to_value(status).unwrap();
            out.push_str(&format!("status {:<16} {count}\n", name.as_str().unwrap()));
        }
        out.push_str(&format!(
            "fallback rate           {:.4}\n",
            self.fallback_rate
        ));
        out.push_str(&format!(
            "mean masked fraction    {:.4}\n",
            self.mean_masked_fraction
        ));
        out.push_str(&format!(
            "mean raw masked frac.   {:.4}\n",
            self.mean_raw_masked_fraction
        ));
        out.push_str(&format!(
            "statements min/mean/max {}/{:.2}/{}\n",
            self.statements_min, self.statements_mean, self.statements_max
        ));
        out.push_str("density histogram\n");
        for (k, count) in self.density_histogram.iter().enumerate() {
            let lo = k as f64 / HISTOGRAM_BINS as f64;
            let hi = (k + 1) as f64 / HISTOGRAM_BINS as f64;
            let close = if k + 1 == HISTOGRAM_BINS { ']' } else { ')' };
            out.push_str(&format!("  [{lo:.1}, {hi:.1}{close} {count}\n"));
        }
        out
    }
}

/// Summarizes a finished run from its manifest and sidecars.
pub fn stats(dir: &Path) -> Result<RunStats> {
    let manifest = read_manifest(dir)?;
    let mut sidecars = Vec::new();
    for r in &manifest.records {
        if let Some(stem) = &r.file_stem {
            let path = dir.join(MASK_DIR).join(format!("{stem}.json"));
            let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            sidecars.push(serde_json::from_str::<MaskSidecar>(&text)?);
        }
    }
    let masked = sidecars.len();
    let mean = |f: &dyn Fn(&MaskSidecar) -> f64| {
        if masked == 0 {
            0.0
        } else {
            sidecars.iter().map(f).sum::<f64>() / masked as f64
        }
    };
    let mut density_histogram = vec![0; HISTOGRAM_BINS];
    for s in &sidecars {
        density_histogram[histogram_bin(s.density)] += 1;
    }
    let views: Vec<String> = manifest
        .config
        .views
        .iter()
        .map(|v| v.to_string())
        .collect();
    Ok(RunStats {
        record_count: manifest.record_count,
        views: views.join(","),
        status_counts: manifest.status_counts.clone(),
        fallback_rate: mean(&|s| f64::from(s.fallback as u8)),
        mean_masked_fraction: mean(&|s| s.masked_fraction),
        mean_raw_masked_fraction: mean(&|s| s.raw_masked_fraction),
        density_histogram,
        statements_min: sidecars.iter().map(|s| s.statements).min().unwrap_or(0),
        statements_max: sidecars.iter().map(|s| s.statements).max().unwrap_or(0),
        statements_mean: mean(&|s| s.statements as f64),
    })
}
