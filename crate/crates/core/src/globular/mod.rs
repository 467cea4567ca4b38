//! Spectrum-driven extraction of globular clusters, the residual cluster and the separator.

mod assemble;
mod comb;
mod schedule;

pub use assemble::{assemble_clustering, build_centers, build_z, characterize_globular, GlobularMatch};
pub use comb::{clip_comb, Clip};
pub use schedule::{base_level, build_schedule, level_width, AtomSchedule, Level, Schedule, MAX_LEVEL};

use std::collections::BTreeMap;

use serde::Serialize;

use crate::config::Config;
use crate::error::{Error, Result};
use crate::sequences::{StructureSequence, SubsetSequence};
use crate::spectrum::SpectrumReport;
use crate::structure::{Structure, VertexSet};

pub const RESIDUAL_MARK: &str = "M_R";
pub const SEPARATOR_MARK: &str = "M_S";
const BINARY_MAGIC: &[u8; 4] = b"LCLR";
const BINARY_VERSION: u8 = 1;

/// Schedules and assembles the clustering for a detected spectrum.
/// With no atoms everything is residual.
pub fn cluster_sequence(seq: &StructureSequence, report: &SpectrumReport, cfg: &Config) -> Result<ClusteringResult> {
    let schedule = if report.atoms.is_empty() {
        Schedule {
            atoms: Vec::new(),
            radius_limit: cfg.globular_radius,
            warnings: vec!["no atoms detected; everything is residual".into()],
            log: Vec::new(),
        }
    } else {
        build_schedule(report, seq, cfg)?
    };
    assemble_clustering(seq, report, &schedule, cfg)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum MarkKind {
    Residual,
    Separator,
    /// Atom `atom`, interweaving group `group`, member `member`; all 1-based.
    Globular { atom: usize, group: usize, member: usize },
    /// The `cluster`-th input cluster of a clip comb.
    Comb { cluster: usize },
}

impl MarkKind {
    pub fn name(&self) -> String {
        match self {
            MarkKind::Residual => RESIDUAL_MARK.to_string(),
            MarkKind::Separator => SEPARATOR_MARK.to_string(),
            MarkKind::Globular { atom, group, member } => format!("M_{atom}_{group}_{member}"),
            MarkKind::Comb { cluster } => format!("M_{cluster}"),
        }
    }

    pub fn is_cluster(&self) -> bool {
        matches!(self, MarkKind::Globular { .. } | MarkKind::Comb { .. })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Mark {
    pub name: String,
    #[serde(flatten)]
    pub kind: MarkKind,
}

impl Mark {
    fn new(kind: MarkKind) -> Self {
        Mark { name: kind.name(), kind }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    /// Every lemma check passed on the tail window.
    Verified,
    /// Some check failed on the tail window; see the violations.
    Diagnostic,
}

/// A failed finite-scale check, kept as evidence.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Violation {
    pub index: usize,
    pub check: String,
    pub atom: Option<usize>,
    pub detail: String,
}

/// Per-index state of one atom.
#[derive(Clone, Debug, Serialize)]
pub struct AtomAtIndex {
    pub index: usize,
    /// Active level, absent before the first threshold index.
    pub level: Option<u32>,
    pub radius: Option<u32>,
    pub centers: Vec<usize>,
    pub core_size: usize,
    pub measure: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct AtomClustering {
    pub lambda: f64,
    pub mass: f64,
    pub count: usize,
    /// Interweaving groups found with the configured battery.
    pub groups: usize,
    pub per_index: Vec<AtomAtIndex>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ClusteringResult {
    pub status: Status,
    pub indices: Vec<usize>,
    pub marks: Vec<Mark>,
    /// `labels[row][v]` is the position in `marks` of the mark of vertex `v`.
    pub labels: Vec<Vec<u32>>,
    /// `measures[row][m]` is the measure carrying mark `m`.
    pub measures: Vec<Vec<f64>>,
    pub atoms: Vec<AtomClustering>,
    pub clip: Option<Clip>,
    pub schedule: Option<Schedule>,
    pub violations: Vec<Violation>,
    pub warnings: Vec<String>,
}

impl ClusteringResult {
    fn row(&self, n: usize) -> Result<usize> {
        self.indices
            .iter()
            .position(|&i| i == n)
            .ok_or_else(|| Error::Input(format!("index {n} is not in the clustering")))
    }

    pub fn labels_at(&self, n: usize) -> Result<&[u32]> {
        Ok(&self.labels[self.row(n)?])
    }

    /// Vertices at index `n` whose mark satisfies `pred`.
    pub fn select(&self, n: usize, pred: impl Fn(&MarkKind) -> bool) -> Result<VertexSet> {
        let labels = self.labels_at(n)?;
        Ok(VertexSet::from_ids(
            labels.len(),
            labels.iter().enumerate().filter(|(_, &m)| pred(&self.marks[m as usize].kind)).map(|(v, _)| v),
        ))
    }

    pub fn select_sequence(&self, pred: impl Fn(&MarkKind) -> bool + Copy) -> Result<SubsetSequence> {
        let sets = self.indices.iter().map(|&n| Ok((n, self.select(n, pred)?))).collect::<Result<BTreeMap<_, _>>>()?;
        Ok(SubsetSequence::new(sets))
    }

    pub fn residual(&self, n: usize) -> Result<VertexSet> {
        self.select(n, |k| *k == MarkKind::Residual)
    }

    pub fn separator(&self, n: usize) -> Result<VertexSet> {
        self.select(n, |k| *k == MarkKind::Separator)
    }

    /// Vertices carrying any mark of atom `atom` (1-based).
    pub fn atom_set(&self, n: usize, atom: usize) -> Result<VertexSet> {
        self.select(n, |k| matches!(k, MarkKind::Globular { atom: a, .. } if *a == atom))
    }

    /// Total measure per kind at index `n`: (clusters, residual, separator).
    pub fn mass_split(&self, n: usize) -> Result<(f64, f64, f64)> {
        let row = self.row(n)?;
        let mut out = (0.0, 0.0, 0.0);
        for (mark, m) in self.marks.iter().zip(&self.measures[row]) {
            match mark.kind {
                MarkKind::Residual => out.1 += m,
                MarkKind::Separator => out.2 += m,
                _ => out.0 += m,
            }
        }
        Ok(out)
    }

    /// Violations on the given indices.
    pub fn violations_within(&self, indices: &[usize]) -> Vec<&Violation> {
        self.violations.iter().filter(|v| indices.contains(&v.index)).collect()
    }

    /// The structure at `n` with every used mark added as a unary relation.
    pub fn marked_structure(&self, seq: &StructureSequence, n: usize) -> Result<Structure> {
        let row = self.row(n)?;
        let mut s = (*seq.get(n)?).clone();
        for (m, mark) in self.marks.iter().enumerate() {
            if self.measures[row][m] > 0.0 || self.labels[row].contains(&(m as u32)) {
                s = s.mark(&mark.name, &self.select(n, |k| *k == mark.kind)?)?;
            }
        }
        Ok(s)
    }

    /// `{"marks": [...], "labels": {"n": [mark ids]}}`.
    pub fn labels_json(&self) -> serde_json::Value {
        let labels: serde_json::Map<String, serde_json::Value> = self
            .indices
            .iter()
            .zip(&self.labels)
            .map(|(n, l)| (n.to_string(), serde_json::json!(l)))
            .collect();
        let names: Vec<&str> = self.marks.iter().map(|m| m.name.as_str()).collect();
        serde_json::json!({ "marks": names, "labels": labels })
    }

    /// One byte per vertex after a mark-name table.
    pub fn to_binary(&self) -> Result<Vec<u8>> {
        if self.marks.len() > 256 {
            return Err(Error::Limit(format!("{} marks do not fit in one byte", self.marks.len())));
        }
        let mut out = Vec::new();
        out.extend_from_slice(BINARY_MAGIC);
        out.push(BINARY_VERSION);
        out.extend_from_slice(&(self.marks.len() as u16).to_le_bytes());
        for m in &self.marks {
            out.extend_from_slice(&(m.name.len() as u16).to_le_bytes());
            out.extend_from_slice(m.name.as_bytes());
        }
        out.extend_from_slice(&(self.indices.len() as u32).to_le_bytes());
        for (n, labels) in self.indices.iter().zip(&self.labels) {
            out.extend_from_slice(&(*n as u32).to_le_bytes());
            out.extend_from_slice(&(labels.len() as u32).to_le_bytes());
            out.extend(labels.iter().map(|&l| l as u8));
        }
        Ok(out)
    }
}

/// Labels decoded from the binary format.
#[derive(Clone, Debug, PartialEq)]
pub struct LabelTable {
    pub marks: Vec<String>,
    pub labels: BTreeMap<usize, Vec<u8>>,
}

pub fn read_label_binary(bytes: &[u8]) -> Result<LabelTable> {
    let mut pos = 0usize;
    let mut take = |k: usize| -> Result<&[u8]> {
        let s = bytes.get(pos..pos + k).ok_or_else(|| Error::Input("truncated label file".into()))?;
        pos += k;
        Ok(s)
    };
    if take(4)? != BINARY_MAGIC {
        return Err(Error::Input("not a label file".into()));
    }
    if take(1)?[0] != BINARY_VERSION {
        return Err(Error::Input("unsupported label file version".into()));
    }
    let count = u16::from_le_bytes(take(2)?.try_into().expect("two bytes")) as usize;
    let mut marks = Vec::with_capacity(count);
    for _ in 0..count {
        let len = u16::from_le_bytes(take(2)?.try_into().expect("two bytes")) as usize;
        let name = std::str::from_utf8(take(len)?).map_err(|_| Error::Input("mark name is not UTF-8".into()))?;
        marks.push(name.to_string());
    }
    let rows = u32::from_le_bytes(take(4)?.try_into().expect("four bytes")) as usize;
    let mut labels = BTreeMap::new();
    for _ in 0..rows {
        let n = u32::from_le_bytes(take(4)?.try_into().expect("four bytes")) as usize;
        let len = u32::from_le_bytes(take(4)?.try_into().expect("four bytes")) as usize;
        let row = take(len)?.to_vec();
        if row.iter().any(|&l| l as usize >= count) {
            return Err(Error::Input(format!("label out of range at index {n}")));
        }
        labels.insert(n, row);
    }
    Ok(LabelTable { marks, labels })
}

/// Measure of each mark, from per-vertex labels.
pub(crate) fn mark_measures(s: &Structure, labels: &[u32], marks: usize) -> Vec<f64> {
    let mut out = vec![0.0; marks];
    for (v, &l) in labels.iter().enumerate() {
        out[l as usize] += s.weight(v);
    }
    out
}
