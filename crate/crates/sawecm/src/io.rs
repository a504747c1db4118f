//! File formats: rule files (JSON), subspace-family matrices (CSV), and
//! sparsity dumps (CSV). Rule indices are 1-based on disk, matching the usual
//! Gauss-point numbering; everything in-memory stays 0-based.

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::saw::{AdaptiveRule, SubspaceFamily};
use crate::Result;

pub const RULE_SCHEMA_VERSION: u32 = 1;

/// Run parameters recorded alongside a rule.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RuleMetadata {
    pub strategy: String,
    pub svd_tolerance: f64,
    /// "natural" or "random".
    pub ordering: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub seed: Option<u64>,
    pub failure_threshold: usize,
    pub low_norm_floor: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub zero_floor: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub pivot: Option<String>,
}

/// On-disk representation of a shared-point rule.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RuleFile {
    pub schema_version: u32,
    /// Number of full-order integration points `M`.
    pub point_count: usize,
    /// Number of subspaces `k`.
    pub subspace_count: usize,
    /// Selected point indices, 1-based, strictly increasing.
    pub indices: Vec<usize>,
    /// One weight array per subspace, each of length `indices.len()`.
    pub weights: Vec<Vec<f64>>,
    pub metadata: RuleMetadata,
}

impl RuleFile {
    pub fn from_rule(rule: &AdaptiveRule, point_count: usize, metadata: RuleMetadata) -> Self {
        RuleFile {
            schema_version: RULE_SCHEMA_VERSION,
            point_count,
            subspace_count: rule.subspace_count(),
            indices: rule.indices.iter().map(|&g| g + 1).collect(),
            weights: rule
                .per_subspace_weights
                .iter()
                .map(|w| w.iter().copied().collect())
                .collect(),
            metadata,
        }
    }

    /// Validates the invariants and converts back to an in-memory rule.
    pub fn to_rule(&self) -> Result<AdaptiveRule> {
        if self.schema_version != RULE_SCHEMA_VERSION {
            return Err(Error::Parse(format!(
                "unsupported rule schema version {}",
                self.schema_version
            )));
        }
        if self.weights.len() != self.subspace_count {
            return Err(Error::Parse(format!(
                "{} weight arrays for {} subspaces",
                self.weights.len(),
                self.subspace_count
            )));
        }
        let card = self.indices.len();
        let mut previous = 0usize;
        for &idx in &self.indices {
            if idx == 0 || idx > self.point_count {
                return Err(Error::ShapeMismatch(format!(
                    "rule index {idx} outside 1..={}",
                    self.point_count
                )));
            }
            if idx <= previous {
                return Err(Error::Parse(
                    "rule indices must be strictly increasing".into(),
                ));
            }
            previous = idx;
        }
        let mut per_subspace_weights = Vec::with_capacity(self.weights.len());
        let mut mode_counts = Vec::with_capacity(self.weights.len());
        for (i, w) in self.weights.iter().enumerate() {
            if w.len() != card {
                return Err(Error::Parse(format!(
                    "subspace {} has {} weights for {card} indices",
                    i + 1,
                    w.len()
                )));
            }
            if w.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::Parse(format!(
                    "subspace {} has a negative or non-finite weight",
                    i + 1
                )));
            }
            mode_counts.push(w.iter().filter(|&&v| v > 0.0).count());
            per_subspace_weights.push(DVector::from_vec(w.clone()));
        }
        let m_max = mode_counts.iter().copied().max().unwrap_or(0);
        Ok(AdaptiveRule {
            indices: self.indices.iter().map(|&g| g - 1).collect(),
            per_subspace_weights,
            per_subspace_mode_counts: mode_counts,
            m_max,
            visit_order: (0..self.subspace_count).collect(),
        })
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("rule serializes");
        text.push('\n');
        text
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
    }
}

/// Writes the k x M occupancy matrix of a rule: row i holds 1 where subspace
/// i carries a strictly positive weight, 0 elsewhere.
pub fn write_sparsity(path: &Path, strategy: &str, rule: &AdaptiveRule, point_count: usize) -> Result<()> {
    let mut out = String::new();
    out.push_str(&format!("strategy,{strategy}\n"));
    for weights in &rule.per_subspace_weights {
        let mut row = vec![0u8; point_count];
        for (pos, &g) in rule.indices.iter().enumerate() {
            if weights[pos] > 0.0 {
                row[g] = 1;
            }
        }
        let line: Vec<String> = row.iter().map(|b| b.to_string()).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

/// Writes a subspace family as CSV:
///
/// ```text
/// M,k
/// <M>,<k>
/// weights
/// w_1,...,w_M
/// subspace,<i>,<ncols>
/// <M rows of ncols comma-separated values>
/// ...
/// ```
pub fn write_family(path: &Path, family: &SubspaceFamily) -> Result<()> {
    let points = family.point_count();
    let mut out = String::new();
    out.push_str("M,k\n");
    out.push_str(&format!("{},{}\n", points, family.subspace_count()));
    out.push_str("weights\n");
    let w: Vec<String> = family.full_weights.iter().map(|v| format!("{v:?}")).collect();
    out.push_str(&w.join(","));
    out.push('\n');
    for (i, a) in family.sample_matrices.iter().enumerate() {
        out.push_str(&format!("subspace,{},{}\n", i + 1, a.ncols()));
        for g in 0..points {
            let row: Vec<String> = (0..a.ncols()).map(|c| format!("{:?}", a[(g, c)])).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_family(path: &Path) -> Result<SubspaceFamily> {
    let text = fs::read_to_string(path)?;
    parse_family(&text).map_err(|e| match e {
        Error::Parse(msg) => Error::Parse(format!("{}: {msg}", path.display())),
        other => other,
    })
}

fn parse_family(text: &str) -> Result<SubspaceFamily> {
    let mut lines = text.lines().enumerate();
    let mut next_line = |expect: &str| -> Result<(usize, &str)> {
        lines
            .next()
            .map(|(n, l)| (n + 1, l.trim()))
            .ok_or_else(|| Error::Parse(format!("unexpected end of file, expected {expect}")))
    };

    let (n, header) = next_line("header 'M,k'")?;
    if header != "M,k" {
        return Err(Error::Parse(format!("line {n}: expected header 'M,k'")));
    }
    let (n, dims) = next_line("dimensions")?;
    let mut parts = dims.split(',');
    let parse_usize = |s: Option<&str>, what: &str, n: usize| -> Result<usize> {
        s.ok_or_else(|| Error::Parse(format!("line {n}: missing {what}")))?
            .trim()
            .parse::<usize>()
            .map_err(|e| Error::Parse(format!("line {n}: bad {what}: {e}")))
    };
    let points = parse_usize(parts.next(), "M", n)?;
    let k = parse_usize(parts.next(), "k", n)?;
    if points == 0 || k == 0 {
        return Err(Error::Parse(format!("line {n}: M and k must be positive")));
    }

    let (n, tag) = next_line("'weights'")?;
    if tag != "weights" {
        return Err(Error::Parse(format!("line {n}: expected 'weights'")));
    }
    let (n, wline) = next_line("weight values")?;
    let weights = parse_floats(wline, n)?;
    if weights.len() != points {
        return Err(Error::Parse(format!(
            "line {n}: {} weights, expected {points}",
            weights.len()
        )));
    }

    let mut matrices = Vec::with_capacity(k);
    for i in 0..k {
        let (n, header) = next_line("subspace header")?;
        let mut parts = header.split(',');
        if parts.next() != Some("subspace") {
            return Err(Error::Parse(format!("line {n}: expected 'subspace,...'")));
        }
        let idx = parse_usize(parts.next(), "subspace index", n)?;
        if idx != i + 1 {
            return Err(Error::Parse(format!(
                "line {n}: subspace {idx} out of order, expected {}",
                i + 1
            )));
        }
        let cols = parse_usize(parts.next(), "column count", n)?;
        if cols == 0 {
            return Err(Error::Parse(format!("line {n}: zero columns")));
        }
        let mut data = Vec::with_capacity(points * cols);
        for _ in 0..points {
            let (n, row) = next_line("matrix row")?;
            let vals = parse_floats(row, n)?;
            if vals.len() != cols {
                return Err(Error::Parse(format!(
                    "line {n}: {} values, expected {cols}",
                    vals.len()
                )));
            }
            data.extend(vals);
        }
        matrices.push(DMatrix::from_row_slice(points, cols, &data));
    }
    if let Some((n, trailing)) = lines.find(|(_, l)| !l.trim().is_empty()) {
        return Err(Error::Parse(format!(
            "line {}: unexpected trailing content '{trailing}'",
            n + 1
        )));
    }

    SubspaceFamily::new(matrices, DVector::from_vec(weights))
}

/// Writes a snapshot matrix as CSV: a `M,P` header with the dimensions, then
/// one line per spatial point carrying its value in every snapshot.
pub fn write_snapshots(path: &Path, snapshots: &[DVector<f64>]) -> Result<()> {
    assert!(!snapshots.is_empty(), "no snapshots to write");
    let points = snapshots[0].len();
    let mut out = String::new();
    out.push_str("M,P\n");
    out.push_str(&format!("{},{}\n", points, snapshots.len()));
    for g in 0..points {
        let row: Vec<String> = snapshots.iter().map(|d| format!("{:?}", d[g])).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

/// Reads a snapshot matrix written by [`write_snapshots`] (row = spatial
/// point, column = snapshot).
pub fn read_snapshots(path: &Path) -> Result<Vec<DVector<f64>>> {
    let text = fs::read_to_string(path)?;
    parse_snapshots(&text).map_err(|e| match e {
        Error::Parse(msg) => Error::Parse(format!("{}: {msg}", path.display())),
        other => other,
    })
}

fn parse_snapshots(text: &str) -> Result<Vec<DVector<f64>>> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (n, header) = lines
        .next()
        .ok_or_else(|| Error::Parse("empty snapshot file".into()))?;
    if header.trim() != "M,P" {
        return Err(Error::Parse(format!("line {}: expected header 'M,P'", n + 1)));
    }
    let (n, dims) = lines
        .next()
        .ok_or_else(|| Error::Parse("missing dimensions".into()))?;
    let mut parts = dims.trim().split(',');
    let points: usize = parts
        .next()
        .and_then(|s| s.trim().parse().ok())
        .ok_or_else(|| Error::Parse(format!("line {}: bad M", n + 1)))?;
    let count: usize = parts
        .next()
        .and_then(|s| s.trim().parse().ok())
        .ok_or_else(|| Error::Parse(format!("line {}: bad P", n + 1)))?;
    if points == 0 || count == 0 {
        return Err(Error::Parse(format!("line {}: M and P must be positive", n + 1)));
    }

    let mut columns = vec![Vec::with_capacity(points); count];
    let mut rows = 0usize;
    for (n, line) in lines {
        let values = parse_floats(line.trim(), n + 1)?;
        if values.len() != count {
            return Err(Error::Parse(format!(
                "line {}: {} snapshots, expected {count}",
                n + 1,
                values.len()
            )));
        }
        for (p, v) in values.into_iter().enumerate() {
            columns[p].push(v);
        }
        rows += 1;
    }
    if rows != points {
        return Err(Error::Parse(format!("{rows} point rows, expected {points}")));
    }
    Ok(columns.into_iter().map(DVector::from_vec).collect())
}

fn parse_floats(line: &str, lineno: usize) -> Result<Vec<f64>> {
    line.split(',')
        .map(|tok| {
            let v = tok
                .trim()
                .parse::<f64>()
                .map_err(|e| Error::Parse(format!("line {lineno}: bad number '{tok}': {e}")))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::Parse(format!("line {lineno}: non-finite value")))
            }
        })
        .collect()
}
