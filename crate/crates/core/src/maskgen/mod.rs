//! Token-level attention masks derived from sentence masks.
//!
//! Token `i` may attend to token `j` when the statement owning `j` belongs to
//! the sentence mask of the statement owning `i`. Tokens outside every
//! statement, and special positions added at subword expansion, see and are
//! seen by everything under the default policy. The diagonal is always set.

mod format;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::backslice::StatementMask;
use crate::codeviews::{DfgOptions, ViewTag};
use crate::error::{Error, Result};
use crate::syntax::{CodeSnippet, NodeId};

pub use format::{deserialize_mask, serialize_mask, write_mask, FORMAT_VERSION, MAGIC};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LayerStrategy {
    #[default]
    All,
    Alternate,
}

impl FromStr for LayerStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "all" => Ok(LayerStrategy::All),
            "alternate" => Ok(LayerStrategy::Alternate),
            other => Err(Error::Config(format!("unknown layer strategy `{other}`"))),
        }
    }
}

impl fmt::Display for LayerStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LayerStrategy::All => "all",
            LayerStrategy::Alternate => "alternate",
        })
    }
}

/// How special positions (and their columns) are treated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SpecialTokenPolicy {
    /// Full rows and full columns.
    #[default]
    Full,
    /// Special positions only attend to themselves and are invisible to
    /// code tokens.
    SelfOnly,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaskConfig {
    pub views: BTreeSet<ViewTag>,
    pub last_def: bool,
    pub last_use: bool,
    pub mask_limit: f64,
    pub layer_strategy: LayerStrategy,
    pub special_token_policy: SpecialTokenPolicy,
}

impl Default for MaskConfig {
    fn default() -> Self {
        MaskConfig {
            views: BTreeSet::from([ViewTag::Ast, ViewTag::Dfg]),
            last_def: false,
            last_use: false,
            mask_limit: 0.9,
            layer_strategy: LayerStrategy::All,
            special_token_policy: SpecialTokenPolicy::Full,
        }
    }
}

impl MaskConfig {
    pub fn validate(&self) -> Result<()> {
        if self.views.is_empty() {
            return Err(Error::Config("view set is empty".into()));
        }
        if !(self.mask_limit > 0.0 && self.mask_limit <= 1.0) {
            return Err(Error::Config(format!(
                "mask limit {} is outside (0, 1]",
                self.mask_limit
            )));
        }
        Ok(())
    }

    pub fn dfg_options(&self) -> DfgOptions {
        DfgOptions {
            last_def: self.last_def,
            last_use: self.last_use,
        }
    }

    /// SHA-256 of the canonical JSON encoding.
    pub fn digest(&self) -> [u8; 32] {
        let canonical = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(canonical).into()
    }

    pub fn digest_hex(&self) -> String {
        hex::encode(self.digest())
    }
}

/// Sparse boolean `n x n` mask; each row holds its allowed columns in
/// ascending order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AttentionMask {
    n: usize,
    rows: Vec<Vec<u32>>,
    fallback: bool,
    config_digest: Option<[u8; 32]>,
}

impl AttentionMask {
    /// Builds a mask from a predicate; the diagonal is forced on.
    pub fn from_fn(n: usize, mut allowed: impl FnMut(usize, usize) -> bool) -> Self {
        let rows = (0..n)
            .map(|i| {
                (0..n)
                    .filter(|&j| i == j || allowed(i, j))
                    .map(|j| j as u32)
                    .collect()
            })
            .collect();
        AttentionMask {
            n,
            rows,
            fallback: false,
            config_digest: None,
        }
    }

    pub fn all_ones(n: usize) -> Self {
        Self::from_fn(n, |_, _| true)
    }

    /// Builds a mask from explicit rows. Columns are sorted and deduplicated;
    /// the diagonal is added when missing.
    pub fn from_rows(rows: Vec<Vec<u32>>) -> Result<Self> {
        let n = rows.len();
        let mut out = Vec::with_capacity(n);
        for (i, row) in rows.into_iter().enumerate() {
            let mut set: BTreeSet<u32> = row.into_iter().collect();
            if let Some(&max) = set.last() {
                if max as usize >= n {
                    return Err(Error::DimensionMismatch(format!(
                        "column {max} in a {n}x{n} mask"
                    )));
                }
            }
            set.insert(i as u32);
            out.push(set.into_iter().collect());
        }
        Ok(AttentionMask {
            n,
            rows: out,
            fallback: false,
            config_digest: None,
        })
    }

    pub fn with_config(mut self, config: &MaskConfig) -> Self {
        self.config_digest = Some(config.digest());
        self
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn row(&self, i: usize) -> &[u32] {
        &self.rows[i]
    }

    pub fn rows(&self) -> &[Vec<u32>] {
        &self.rows
    }

    pub fn allowed(&self, i: usize, j: usize) -> bool {
        self.rows
            .get(i)
            .is_some_and(|r| r.binary_search(&(j as u32)).is_ok())
    }

    /// Number of allowed entries.
    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn density(&self) -> f64 {
        if self.n == 0 {
            return 1.0;
        }
        self.nnz() as f64 / (self.n as f64 * self.n as f64)
    }

    pub fn masked_fraction(&self) -> f64 {
        1.0 - self.density()
    }

    /// True when the masking limit replaced this mask by full attention.
    pub fn is_fallback(&self) -> bool {
        self.fallback
    }

    pub fn config_digest(&self) -> Option<[u8; 32]> {
        self.config_digest
    }

    pub fn is_all_ones(&self) -> bool {
        self.nnz() == self.n * self.n
    }

    pub fn to_dense(&self) -> Vec<Vec<bool>> {
        (0..self.n)
            .map(|i| {
                let mut row = vec![false; self.n];
                for &j in &self.rows[i] {
                    row[j as usize] = true;
                }
                row
            })
            .collect()
    }

    pub(crate) fn from_raw_parts(
        n: usize,
        rows: Vec<Vec<u32>>,
        fallback: bool,
        config_digest: Option<[u8; 32]>,
    ) -> Self {
        AttentionMask {
            n,
            rows,
            fallback,
            config_digest,
        }
    }
}

/// Leaf-token-level attention mask from per-statement sentence masks.
pub fn attention_gen(snippet: &CodeSnippet, masks: &[StatementMask]) -> Result<AttentionMask> {
    let m = snippet.statement_count();
    let n = snippet.tokens().len();
    let mut by_seed: BTreeMap<NodeId, &StatementMask> = BTreeMap::new();
    for mask in masks {
        if !snippet.is_statement(mask.seed) {
            return Err(Error::MaskMismatch(mask.seed));
        }
        if let Some(&bad) = mask.members.iter().find(|&&id| !snippet.is_statement(id)) {
            return Err(Error::MaskMismatch(bad));
        }
        by_seed.insert(mask.seed, mask);
    }

    let unowned: Vec<u32> = snippet
        .tokens()
        .iter()
        .filter(|t| t.owner_statement.is_none())
        .map(|t| t.index as u32)
        .collect();

    // allowed columns per statement: tokens'_m plus unowned columns
    let mut statement_cols: Vec<Vec<u32>> = Vec::with_capacity(m);
    for id in 0..m {
        let mask = by_seed.get(&id).ok_or(Error::MaskMismatch(id))?;
        let mut cols: Vec<u32> = unowned.clone();
        for &member in &mask.members {
            cols.extend(
                snippet.statements()[member]
                    .direct_token_ids
                    .iter()
                    .map(|&t| t as u32),
            );
        }
        cols.sort_unstable();
        cols.dedup();
        statement_cols.push(cols);
    }

    let full: Vec<u32> = (0..n as u32).collect();
    let rows = snippet
        .tokens()
        .iter()
        .map(|t| match t.owner_statement {
            None => full.clone(),
            Some(owner) => {
                let mut row = statement_cols[owner].clone();
                if let Err(pos) = row.binary_search(&(t.index as u32)) {
                    row.insert(pos, t.index as u32);
                }
                row
            }
        })
        .collect();
    Ok(AttentionMask::from_raw_parts(n, rows, false, None))
}

/// Falls back to full attention when more than `limit` of the mask is zero.
pub fn apply_mask_limit(mask: &AttentionMask, limit: f64) -> AttentionMask {
    if mask.masked_fraction() > limit {
        let mut full = AttentionMask::all_ones(mask.n);
        full.fallback = true;
        full.config_digest = mask.config_digest;
        full
    } else {
        mask.clone()
    }
}

/// Per-leaf-token subword counts plus special positions around the code.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubwordMap {
    pub counts: Vec<usize>,
    #[serde(default)]
    pub prefix: usize,
    #[serde(default)]
    pub suffix: usize,
}

impl SubwordMap {
    pub fn identity(n: usize) -> Self {
        SubwordMap {
            counts: vec![1; n],
            prefix: 0,
            suffix: 0,
        }
    }

    pub fn expanded_len(&self) -> usize {
        self.prefix + self.counts.iter().sum::<usize>() + self.suffix
    }
}

/// Expands a leaf-token mask to subword positions.
pub fn expand_subwords(
    mask: &AttentionMask,
    map: &SubwordMap,
    policy: SpecialTokenPolicy,
) -> Result<AttentionMask> {
    if map.counts.len() != mask.n {
        return Err(Error::MapMismatch {
            expected: mask.n,
            got: map.counts.len(),
        });
    }
    if let Some(i) = map.counts.iter().position(|&c| c == 0) {
        return Err(Error::ZeroSubwordCount(i));
    }
    let total = map.expanded_len();
    let mut starts = Vec::with_capacity(mask.n);
    let mut pos = map.prefix;
    for &c in &map.counts {
        starts.push(pos);
        pos += c;
    }
    let code_end = pos;
    let specials: Vec<u32> = (0..map.prefix)
        .chain(code_end..total)
        .map(|p| p as u32)
        .collect();

    let mut rows: Vec<Vec<u32>> = vec![Vec::new(); total];
    for (p, row) in rows.iter_mut().enumerate() {
        if p < map.prefix || p >= code_end {
            *row = match policy {
                SpecialTokenPolicy::Full => (0..total as u32).collect(),
                SpecialTokenPolicy::SelfOnly => vec![p as u32],
            };
        }
    }
    for i in 0..mask.n {
        let mut cols: Vec<u32> = Vec::new();
        if policy == SpecialTokenPolicy::Full {
            cols.extend(&specials);
        }
        for &j in mask.row(i) {
            let j = j as usize;
            cols.extend((starts[j]..starts[j] + map.counts[j]).map(|p| p as u32));
        }
        cols.sort_unstable();
        for row in &mut rows[starts[i]..starts[i] + map.counts[i]] {
            *row = cols.clone();
        }
    }
    Ok(AttentionMask::from_raw_parts(
        total,
        rows,
        mask.fallback,
        mask.config_digest,
    ))
}
