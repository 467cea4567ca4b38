//! Indexed families of structures and of vertex subsets, with the finite-scale
//! estimators used in place of limits.
//!
//! "Tends to zero" is read as: the supremum over the tail window (the last
//! `ceil(window * len)` indices) is below `tol`.

mod cluster;
mod expansion;
mod negligible;

pub use cluster::{
    classify, default_battery, dispersion_profile, induced_battery, interweaving, is_cluster, wrap,
    ClassReport, Classification, ClusterVerdict, ConvergenceDiagnostic, DispersionProfile,
    InterweavingVerdict, Verdict, WrapResult, CLUSTER_MARK,
};
pub use expansion::{
    clean_expander, expansion_check, h_out, CleanReport, ExpansionMode, ExpansionReport, EXACT_LIMIT,
};
pub use negligible::{
    check_fragmentation_bound, check_negligible_bound, negligible_profile, BoundReport, NegligibleProfile,
};

use std::collections::BTreeMap;
use std::ops::RangeInclusive;
use std::path::{Path, PathBuf};
use std::sync::{Arc, OnceLock};

use rayon::prelude::*;
use serde::Serialize;
use serde_json::Value;

use crate::error::{input, Error, Result};
use crate::generators::{generate, Family, GroundTruth};
use crate::structure::{read_structure, Signature, Structure, VertexSet};

#[derive(Clone, Debug, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Provider {
    Generator { family: Family },
    Files { paths: Vec<PathBuf> },
    #[serde(skip)]
    Memory(Vec<Arc<Structure>>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CachePolicy {
    /// Keep every loaded structure for the lifetime of the sequence.
    Keep,
    /// Rebuild on every access.
    None,
}

struct Entry {
    structure: Arc<Structure>,
    truth: Option<Arc<GroundTruth>>,
}

/// Structures indexed by `start..=end`, produced on demand.
///
/// Safe to share between threads; concurrent first loads of the same index may
/// both build it, and the provider is deterministic so either result is kept.
pub struct StructureSequence {
    start: usize,
    end: usize,
    provider: Provider,
    cache: CachePolicy,
    slots: Vec<OnceLock<Arc<Entry>>>,
    signature: OnceLock<Signature>,
}

impl std::fmt::Debug for StructureSequence {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("StructureSequence")
            .field("start", &self.start)
            .field("end", &self.end)
            .field("provider", &self.provider)
            .finish()
    }
}

impl StructureSequence {
    fn with_provider(start: usize, end: usize, provider: Provider) -> Result<Self> {
        if start == 0 || end < start {
            return input(format!("invalid index range [{start}, {end}]"));
        }
        Ok(StructureSequence {
            start,
            end,
            provider,
            cache: CachePolicy::Keep,
            slots: (start..=end).map(|_| OnceLock::new()).collect(),
            signature: OnceLock::new(),
        })
    }

    pub fn from_generator(family: Family, start: usize, end: usize) -> Result<Self> {
        Self::with_provider(start, end, Provider::Generator { family })
    }

    /// One file per index, the first at index `start`.
    pub fn from_files(paths: Vec<PathBuf>, start: usize) -> Result<Self> {
        if paths.is_empty() {
            return input("empty file list");
        }
        let end = start + paths.len() - 1;
        Self::with_provider(start, end, Provider::Files { paths })
    }

    pub fn from_structures(structures: Vec<Structure>, start: usize) -> Result<Self> {
        if structures.is_empty() {
            return input("empty structure list");
        }
        let end = start + structures.len() - 1;
        Self::with_provider(start, end, Provider::Memory(structures.into_iter().map(Arc::new).collect()))
    }

    pub fn with_cache(mut self, cache: CachePolicy) -> Self {
        self.cache = cache;
        self
    }

    /// Reads a manifest: either a list of structure paths (indices from 1), or
    /// `{"files": [...], "start": n0}`, or `{"generator": name, "params": {..}, "range": [n0, n1]}`.
    /// Relative paths resolve against the manifest's directory.
    pub fn from_manifest(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file_err = |message: String| Error::File { path: path.display().to_string(), message };
        let text = std::fs::read_to_string(path).map_err(|e| file_err(e.to_string()))?;
        let doc: Value = serde_json::from_str(&text).map_err(|e| file_err(e.to_string()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_manifest_value(&doc, base).map_err(|e| file_err(e.to_string()))
    }

    pub fn from_manifest_value(doc: &Value, base: &Path) -> Result<Self> {
        let resolve = |v: &Value| -> Result<PathBuf> {
            let p = v.as_str().ok_or_else(|| Error::Input("manifest paths must be strings".into()))?;
            Ok(base.join(p))
        };
        match doc {
            Value::Array(items) => Self::from_files(items.iter().map(resolve).collect::<Result<_>>()?, 1),
            Value::Object(map) if map.contains_key("generator") => {
                let name = map["generator"]
                    .as_str()
                    .ok_or_else(|| Error::Input("'generator' must be a string".into()))?;
                let params = map.get("params").cloned().unwrap_or(Value::Object(Default::default()));
                let family = Family::from_parts(name, &params)?;
                let range = map
                    .get("range")
                    .and_then(Value::as_array)
                    .filter(|r| r.len() == 2)
                    .and_then(|r| Some((r[0].as_u64()? as usize, r[1].as_u64()? as usize)))
                    .ok_or_else(|| Error::Input("'range' must be [n0, n1]".into()))?;
                Self::from_generator(family, range.0, range.1)
            }
            Value::Object(map) if map.contains_key("files") => {
                let files = map["files"]
                    .as_array()
                    .ok_or_else(|| Error::Input("'files' must be a list".into()))?;
                let start = map.get("start").and_then(Value::as_u64).unwrap_or(1) as usize;
                Self::from_files(files.iter().map(resolve).collect::<Result<_>>()?, start)
            }
            _ => input("manifest must be a path list, a files object or a generator object"),
        }
    }

    pub fn provider(&self) -> &Provider {
        &self.provider
    }

    pub fn start(&self) -> usize {
        self.start
    }

    pub fn end(&self) -> usize {
        self.end
    }

    pub fn indices(&self) -> RangeInclusive<usize> {
        self.start..=self.end
    }

    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// The last `ceil(fraction * len)` indices, at least one.
    pub fn window(&self, fraction: f64) -> Vec<usize> {
        let k = ((fraction * self.len() as f64).ceil() as usize).clamp(1, self.len());
        (self.end + 1 - k..=self.end).collect()
    }

    fn check_index(&self, n: usize) -> Result<()> {
        if n < self.start || n > self.end {
            return input(format!("index {n} outside [{}, {}]", self.start, self.end));
        }
        Ok(())
    }

    fn load(&self, n: usize) -> Result<Entry> {
        let (structure, truth) = match &self.provider {
            Provider::Generator { family } => {
                let g = generate(family, n)?;
                (Arc::new(g.structure), Some(Arc::new(g.truth)))
            }
            Provider::Files { paths } => (Arc::new(read_structure(&paths[n - self.start])?), None),
            Provider::Memory(items) => (items[n - self.start].clone(), None),
        };
        let sig = structure.signature();
        let declared = self.signature.get_or_init(|| sig.clone());
        if *declared != sig {
            return input(format!("structure at index {n} has a different signature"));
        }
        Ok(Entry { structure, truth })
    }

    fn entry(&self, n: usize) -> Result<Arc<Entry>> {
        self.check_index(n)?;
        let slot = &self.slots[n - self.start];
        if let Some(e) = slot.get() {
            return Ok(e.clone());
        }
        let e = Arc::new(self.load(n)?);
        if self.cache == CachePolicy::Keep {
            let _ = slot.set(e.clone());
        }
        Ok(e)
    }

    pub fn get(&self, n: usize) -> Result<Arc<Structure>> {
        Ok(self.entry(n)?.structure.clone())
    }

    /// Ground truth, for generator-backed sequences.
    pub fn truth(&self, n: usize) -> Result<Option<Arc<GroundTruth>>> {
        Ok(self.entry(n)?.truth.clone())
    }

    /// Signature shared by all structures, taken from the first index.
    pub fn signature(&self) -> Result<Signature> {
        if self.signature.get().is_none() {
            self.get(self.start)?;
        }
        Ok(self.signature.get().cloned().unwrap_or_default())
    }

    /// Evaluates `f` at each listed index in parallel; results keep the input order.
    pub fn map_indices<T: Send>(
        &self,
        indices: &[usize],
        f: impl Fn(usize, &Structure) -> Result<T> + Sync,
    ) -> Result<Vec<T>> {
        indices
            .par_iter()
            .map(|&n| {
                let s = self.get(n)?;
                f(n, &s)
            })
            .collect()
    }
}

/// A vertex subset of each structure in a sequence.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SubsetSequence {
    sets: BTreeMap<usize, VertexSet>,
}

impl SubsetSequence {
    pub fn new(sets: BTreeMap<usize, VertexSet>) -> Self {
        SubsetSequence { sets }
    }

    pub fn from_fn(
        seq: &StructureSequence,
        f: impl Fn(usize, &Structure) -> Result<VertexSet> + Sync,
    ) -> Result<Self> {
        let indices: Vec<usize> = seq.indices().collect();
        let sets = seq.map_indices(&indices, |n, s| {
            let x = f(n, s)?;
            s.check_set(&x)?;
            Ok(x)
        })?;
        Ok(SubsetSequence { sets: indices.into_iter().zip(sets).collect() })
    }

    /// The empty sequence.
    pub fn zero(seq: &StructureSequence) -> Result<Self> {
        Self::from_fn(seq, |_, s| Ok(VertexSet::empty(s.len())))
    }

    pub fn full(seq: &StructureSequence) -> Result<Self> {
        Self::from_fn(seq, |_, s| Ok(s.all()))
    }

    /// Members of a unary relation at each index.
    pub fn from_mark(seq: &StructureSequence, name: &str) -> Result<Self> {
        Self::from_fn(seq, |_, s| s.unary_set(name))
    }

    /// Parses `{"<index>": [ids...], ...}`.
    pub fn from_json(doc: &Value, seq: &StructureSequence) -> Result<Self> {
        let map = doc
            .as_object()
            .ok_or_else(|| Error::Input("subset file must map indices to id lists".into()))?;
        let mut sets = BTreeMap::new();
        for (key, ids) in map {
            let n: usize = key
                .parse()
                .map_err(|_| Error::Input(format!("'{key}' is not an index")))?;
            let s = seq.get(n)?;
            let ids: Vec<usize> = serde_json::from_value(ids.clone())
                .map_err(|e| Error::Input(format!("index {n}: {e}")))?;
            sets.insert(n, VertexSet::try_from_ids(s.len(), ids)?);
        }
        let out = SubsetSequence { sets };
        out.check_aligned(seq)?;
        Ok(out)
    }

    pub fn read(path: impl AsRef<Path>, seq: &StructureSequence) -> Result<Self> {
        let path = path.as_ref();
        let file_err = |message: String| Error::File { path: path.display().to_string(), message };
        let text = std::fs::read_to_string(path).map_err(|e| file_err(e.to_string()))?;
        let doc: Value = serde_json::from_str(&text).map_err(|e| file_err(e.to_string()))?;
        Self::from_json(&doc, seq).map_err(|e| file_err(e.to_string()))
    }

    pub fn to_json(&self) -> Value {
        Value::Object(
            self.sets
                .iter()
                .map(|(n, x)| (n.to_string(), serde_json::json!(x.to_vec())))
                .collect(),
        )
    }

    pub fn get(&self, n: usize) -> Option<&VertexSet> {
        self.sets.get(&n)
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &VertexSet)> {
        self.sets.iter().map(|(n, x)| (*n, x))
    }

    pub fn indices(&self) -> Vec<usize> {
        self.sets.keys().copied().collect()
    }

    /// Same index range as `seq`, and each set lives in the matching domain.
    pub fn check_aligned(&self, seq: &StructureSequence) -> Result<()> {
        if !self.sets.keys().copied().eq(seq.indices()) {
            return input(format!(
                "subset sequence indices do not match the sequence range [{}, {}]",
                seq.start(),
                seq.end()
            ));
        }
        for (n, x) in &self.sets {
            let s = seq.get(*n)?;
            if x.universe() != s.len() {
                return input(format!(
                    "index {n}: subset over {} vertices, structure has {}",
                    x.universe(),
                    s.len()
                ));
            }
        }
        Ok(())
    }

    fn zip_with(&self, other: &Self, f: impl Fn(&VertexSet, &VertexSet) -> VertexSet) -> Result<Self> {
        if !self.sets.keys().eq(other.sets.keys()) {
            return input("subset sequences have different index sets");
        }
        let sets = self
            .sets
            .iter()
            .map(|(n, x)| {
                let y = &other.sets[n];
                if x.universe() != y.universe() {
                    return input(format!("index {n}: subsets over different domains"));
                }
                Ok((*n, f(x, y)))
            })
            .collect::<Result<_>>()?;
        Ok(SubsetSequence { sets })
    }

    pub fn union(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, VertexSet::union)
    }

    pub fn intersection(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, VertexSet::intersection)
    }

    pub fn difference(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, VertexSet::difference)
    }

    pub fn symmetric_difference(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, VertexSet::symmetric_difference)
    }

    pub fn complement(&self) -> Self {
        SubsetSequence { sets: self.sets.iter().map(|(n, x)| (*n, x.complement())).collect() }
    }

    /// Pointwise outer boundary.
    pub fn boundary(&self, seq: &StructureSequence) -> Result<Self> {
        self.check_aligned(seq)?;
        let indices = self.indices();
        let sets = seq.map_indices(&indices, |n, s| s.outer_boundary(&self.sets[&n]))?;
        Ok(SubsetSequence { sets: indices.into_iter().zip(sets).collect() })
    }

    /// `nu(X_n)` for each index.
    pub fn measures(&self, seq: &StructureSequence) -> Result<Vec<(usize, f64)>> {
        self.sets
            .iter()
            .map(|(n, x)| Ok((*n, seq.get(*n)?.measure(x))))
            .collect()
    }
}

/// Largest minus smallest value.
pub(crate) fn oscillation(values: impl IntoIterator<Item = f64>) -> f64 {
    let (lo, hi) = values
        .into_iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if lo.is_finite() {
        hi - lo
    } else {
        0.0
    }
}

pub(crate) fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        0.0
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::Family;

    fn cliques(end: usize) -> StructureSequence {
        StructureSequence::from_generator(Family::clique_pair(0.5, 0.5), 1, end).unwrap()
    }

    #[test]
    fn window_sizes() {
        let s = cliques(40);
        assert_eq!(s.window(0.25), (31..=40).collect::<Vec<_>>());
        assert_eq!(cliques(3).window(0.25), vec![3]);
        assert_eq!(cliques(5).window(1.0).len(), 5);
    }

    #[test]
    fn lazy_and_cached() {
        let s = cliques(10);
        let a = s.get(7).unwrap();
        let b = s.get(7).unwrap();
        assert!(Arc::ptr_eq(&a, &b));
        assert_eq!(a.len(), 15);
        assert!(s.get(11).is_err());
        let t = s.truth(7).unwrap().unwrap();
        assert_eq!(t.atoms.len(), 1);
        let u = cliques(10).with_cache(CachePolicy::None);
        assert!(!Arc::ptr_eq(&u.get(3).unwrap(), &u.get(3).unwrap()));
    }

    #[test]
    fn manifest_forms() {
        let doc = serde_json::json!({"generator": "cycle", "params": {}, "range": [2, 6]});
        let s = StructureSequence::from_manifest_value(&doc, Path::new(".")).unwrap();
        assert_eq!(s.indices(), 2..=6);
        assert_eq!(s.get(6).unwrap().len(), 12);
        let bad = serde_json::json!({"generator": "cycle", "range": [3]});
        assert!(StructureSequence::from_manifest_value(&bad, Path::new(".")).is_err());
        let missing = serde_json::json!(["nope.json"]);
        let files = StructureSequence::from_manifest_value(&missing, Path::new("/nonexistent")).unwrap();
        assert!(matches!(files.get(1), Err(Error::File { .. })));
    }

    #[test]
    fn subset_json_round_trip() {
        let s = cliques(4);
        let x = SubsetSequence::from_fn(&s, |n, st| st.vertex_set(0..n)).unwrap();
        let back = SubsetSequence::from_json(&x.to_json(), &s).unwrap();
        assert_eq!(x, back);
        let short = serde_json::json!({"1": [0]});
        assert!(SubsetSequence::from_json(&short, &s).is_err());
        let out_of_range = serde_json::json!({"1": [9], "2": [], "3": [], "4": []});
        assert!(SubsetSequence::from_json(&out_of_range, &s).is_err());
    }

    #[test]
    fn pointwise_operations() {
        let s = cliques(3);
        let x = SubsetSequence::from_fn(&s, |n, st| st.vertex_set(0..n)).unwrap();
        let c = x.complement();
        assert!(x.intersection(&c).unwrap().iter().all(|(_, v)| v.is_empty()));
        assert_eq!(x.union(&c).unwrap(), SubsetSequence::full(&s).unwrap());
        assert!(x.boundary(&s).unwrap().iter().all(|(_, b)| b.is_empty()));
    }
}
