//! Finite relational structures carrying a vertex probability measure.

mod io;
mod vertex_set;

pub(crate) use io::valid_symbol;
pub use io::{parse_structure_json, read_structure, structure_to_json, write_structure};
pub use vertex_set::VertexSet;

use std::collections::{BTreeMap, BTreeSet, HashSet, VecDeque};

use crate::error::{input, Error, Result};

/// Relation symbols with their arities.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Signature {
    symbols: BTreeMap<String, usize>,
}

impl Signature {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, name: &str, arity: usize) -> Self {
        self.symbols.insert(name.to_string(), arity);
        self
    }

    pub fn insert(&mut self, name: &str, arity: usize) -> Result<()> {
        match self.symbols.get(name) {
            Some(&a) if a != arity => {
                input(format!("symbol '{name}' used with arities {a} and {arity}"))
            }
            _ => {
                self.symbols.insert(name.to_string(), arity);
                Ok(())
            }
        }
    }

    pub fn arity(&self, name: &str) -> Option<usize> {
        self.symbols.get(name).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, usize)> {
        self.symbols.iter().map(|(k, &v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }
}

/// Tuples of one relation, kept sorted for output and hashed for lookup.
#[derive(Clone, Debug)]
pub struct Relation {
    arity: usize,
    tuples: Vec<Vec<u32>>,
    lookup: HashSet<Vec<u32>>,
}

impl Relation {
    pub fn new(arity: usize, tuples: impl IntoIterator<Item = Vec<u32>>) -> Self {
        let mut tuples: Vec<Vec<u32>> = tuples.into_iter().collect();
        tuples.sort_unstable();
        tuples.dedup();
        let lookup = tuples.iter().cloned().collect();
        Relation {
            arity,
            tuples,
            lookup,
        }
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn tuples(&self) -> &[Vec<u32>] {
        &self.tuples
    }

    pub fn contains(&self, tuple: &[u32]) -> bool {
        self.lookup.contains(tuple)
    }
}

impl PartialEq for Relation {
    fn eq(&self, other: &Self) -> bool {
        self.arity == other.arity && self.tuples == other.tuples
    }
}

/// Sum of weights may drift from 1 by this much plus a per-vertex rounding allowance.
pub const WEIGHT_TOLERANCE: f64 = 1e-12;

fn weight_slack(n: usize) -> f64 {
    WEIGHT_TOLERANCE + n as f64 * f64::EPSILON
}

/// A finite relational structure with a probability measure on its vertices.
///
/// The Gaifman adjacency is built once at construction: two distinct vertices
/// are adjacent when they occur together in some tuple.
#[derive(Clone, Debug)]
pub struct Structure {
    n: usize,
    relations: BTreeMap<String, Relation>,
    marks: BTreeSet<String>,
    weights: Vec<f64>,
    adjacency: Vec<Vec<u32>>,
}

impl PartialEq for Structure {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n
            && self.relations == other.relations
            && self.marks == other.marks
            && self.weights == other.weights
    }
}

impl Structure {
    pub fn new(
        n: usize,
        relations: BTreeMap<String, Relation>,
        weights: Vec<f64>,
    ) -> Result<Self> {
        if n == 0 {
            return input("a structure needs at least one vertex");
        }
        if weights.len() != n {
            return input(format!("{} weights for {n} vertices", weights.len()));
        }
        if let Some(v) = weights.iter().position(|w| !w.is_finite() || *w < 0.0) {
            return input(format!("weight of vertex {v} is {}", weights[v]));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > weight_slack(n) {
            return input(format!("weights sum to {total}, expected 1"));
        }
        for (name, rel) in &relations {
            for t in &rel.tuples {
                if t.len() != rel.arity {
                    return input(format!("relation '{name}': tuple of length {} for arity {}", t.len(), rel.arity));
                }
                if let Some(&v) = t.iter().find(|&&v| v as usize >= n) {
                    return input(format!("relation '{name}': vertex {v} out of range (n = {n})"));
                }
            }
        }
        let adjacency = gaifman(n, &relations);
        Ok(Structure {
            n,
            relations,
            marks: BTreeSet::new(),
            weights,
            adjacency,
        })
    }

    /// A simple undirected graph stored as the symmetric binary relation `adj`.
    pub fn from_edges(n: usize, edges: &[(usize, usize)], weights: Vec<f64>) -> Result<Self> {
        let mut tuples = Vec::with_capacity(2 * edges.len());
        for &(u, v) in edges {
            if u == v {
                return input(format!("self-loop at vertex {u}"));
            }
            tuples.push(vec![u as u32, v as u32]);
            tuples.push(vec![v as u32, u as u32]);
        }
        let mut relations = BTreeMap::new();
        relations.insert("adj".to_string(), Relation::new(2, tuples));
        Structure::new(n, relations, weights)
    }

    pub fn uniform_weights(n: usize) -> Vec<f64> {
        vec![1.0 / n as f64; n]
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, v: usize) -> f64 {
        self.weights[v]
    }

    pub fn neighbors(&self, v: usize) -> &[u32] {
        &self.adjacency[v]
    }

    pub fn relation(&self, name: &str) -> Option<&Relation> {
        self.relations.get(name)
    }

    pub fn relations(&self) -> impl Iterator<Item = (&str, &Relation)> {
        self.relations.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn signature(&self) -> Signature {
        let mut sig = Signature::new();
        for (name, rel) in &self.relations {
            sig.symbols.insert(name.clone(), rel.arity);
        }
        sig
    }

    pub fn marks(&self) -> impl Iterator<Item = &str> {
        self.marks.iter().map(String::as_str)
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn check_vertex(&self, v: usize) -> Result<()> {
        if v >= self.n {
            input(format!("vertex {v} out of range (n = {})", self.n))
        } else {
            Ok(())
        }
    }

    pub fn check_set(&self, set: &VertexSet) -> Result<()> {
        if set.universe() != self.n {
            input(format!("vertex set over {} vertices used with a structure of {}", set.universe(), self.n))
        } else {
            Ok(())
        }
    }

    pub fn vertex_set(&self, ids: impl IntoIterator<Item = usize>) -> Result<VertexSet> {
        VertexSet::try_from_ids(self.n, ids)
    }

    pub fn all(&self) -> VertexSet {
        VertexSet::full(self.n)
    }

    pub fn measure(&self, set: &VertexSet) -> f64 {
        set.iter().map(|v| self.weights[v]).sum()
    }

    /// Distances from `source`, `u32::MAX` where unreachable or beyond `limit`.
    pub fn distances_from(&self, source: usize, limit: Option<u32>) -> Vec<u32> {
        let mut dist = vec![u32::MAX; self.n];
        dist[source] = 0;
        let mut queue = VecDeque::from([source]);
        while let Some(u) = queue.pop_front() {
            let du = dist[u];
            if limit.is_some_and(|l| du >= l) {
                continue;
            }
            for &w in &self.adjacency[u] {
                let w = w as usize;
                if dist[w] == u32::MAX {
                    dist[w] = du + 1;
                    queue.push_back(w);
                }
            }
        }
        dist
    }

    /// Gaifman distance between two vertices; `None` when disconnected.
    pub fn distance(&self, u: usize, v: usize) -> Option<u32> {
        let d = self.distances_from(u, None)[v];
        (d != u32::MAX).then_some(d)
    }

    /// All vertices within distance `radius` of `set`; `None` means unbounded.
    pub fn ball(&self, set: &VertexSet, radius: Option<u32>) -> Result<VertexSet> {
        self.check_set(set)?;
        Ok(self.ball_unchecked(set, radius))
    }

    pub(crate) fn ball_unchecked(&self, set: &VertexSet, radius: Option<u32>) -> VertexSet {
        let mut out = set.clone();
        let mut frontier: Vec<usize> = set.iter().collect();
        let mut depth = 0u32;
        while !frontier.is_empty() && radius.is_none_or(|r| depth < r) {
            let mut next = Vec::new();
            for u in frontier {
                for &w in &self.adjacency[u] {
                    let w = w as usize;
                    if !out.contains(w) {
                        out.insert(w);
                        next.push(w);
                    }
                }
            }
            frontier = next;
            depth += 1;
        }
        out
    }

    /// `nu(B[d](set))` for `d = 0..=dmax`, from one breadth-first sweep.
    pub fn ball_measures(&self, set: &VertexSet, dmax: u32) -> Result<Vec<f64>> {
        self.check_set(set)?;
        Ok(self.ball_measures_unchecked(set.iter(), dmax))
    }

    pub(crate) fn ball_measures_unchecked(&self, sources: impl Iterator<Item = usize>, dmax: u32) -> Vec<f64> {
        let mut out = self.ball_profile(sources, Some(dmax));
        let last = *out.last().unwrap_or(&0.0);
        out.resize(dmax as usize + 1, last);
        out
    }

    /// Cumulative ball measures until the ball stops growing or reaches `limit`.
    pub(crate) fn ball_profile(&self, sources: impl Iterator<Item = usize>, limit: Option<u32>) -> Vec<f64> {
        let mut seen = VertexSet::empty(self.n);
        let mut frontier: Vec<usize> = Vec::new();
        for v in sources {
            if !seen.contains(v) {
                seen.insert(v);
                frontier.push(v);
            }
        }
        let mut out = Vec::new();
        let mut total = 0.0;
        let mut depth = 0u32;
        loop {
            total += frontier.iter().map(|&v| self.weights[v]).sum::<f64>();
            out.push(total);
            if limit.is_some_and(|l| depth == l) {
                break;
            }
            let mut next = Vec::new();
            for u in frontier {
                for &w in &self.adjacency[u] {
                    let w = w as usize;
                    if !seen.contains(w) {
                        seen.insert(w);
                        next.push(w);
                    }
                }
            }
            if next.is_empty() {
                break;
            }
            frontier = next;
            depth += 1;
        }
        out
    }

    pub fn ball_of_vertex(&self, v: usize, radius: Option<u32>) -> Result<VertexSet> {
        self.check_vertex(v)?;
        Ok(self.ball_unchecked(&VertexSet::from_ids(self.n, [v]), radius))
    }

    /// Vertices at distance exactly one from `set`.
    pub fn outer_boundary(&self, set: &VertexSet) -> Result<VertexSet> {
        let mut b = self.ball(set, Some(1))?;
        b.difference_with(set);
        Ok(b)
    }

    /// Induced substructure on `set` with the measure renormalized.
    ///
    /// Vertices keep their relative order; the returned vector maps new ids to old ones.
    pub fn induce(&self, set: &VertexSet) -> Result<(Structure, Vec<usize>)> {
        self.check_set(set)?;
        let mass = self.measure(set);
        if mass <= 0.0 {
            return Err(Error::Precondition("cannot induce on a set of measure zero".into()));
        }
        let old: Vec<usize> = set.to_vec();
        let mut new_id = vec![u32::MAX; self.n];
        for (i, &v) in old.iter().enumerate() {
            new_id[v] = i as u32;
        }
        let relations = self
            .relations
            .iter()
            .map(|(name, rel)| {
                let tuples = rel
                    .tuples
                    .iter()
                    .filter(|t| t.iter().all(|&v| set.contains(v as usize)))
                    .map(|t| t.iter().map(|&v| new_id[v as usize]).collect());
                (name.clone(), Relation::new(rel.arity, tuples))
            })
            .collect();
        let weights: Vec<f64> = old.iter().map(|&v| self.weights[v] / mass).collect();
        let mut s = Structure::new(old.len(), relations, normalize(weights))?;
        s.marks = self.marks.clone();
        Ok((s, old))
    }

    /// `A - X`: the substructure induced on the complement of `set`.
    pub fn remove(&self, set: &VertexSet) -> Result<(Structure, Vec<usize>)> {
        self.check_set(set)?;
        self.induce(&set.complement())
    }

    /// Disjoint union with the measure `sum_i c_i nu_i`.
    pub fn weighted_sum(parts: &[(f64, &Structure)]) -> Result<Structure> {
        if parts.is_empty() {
            return input("weighted sum of no structures");
        }
        if let Some((c, _)) = parts.iter().find(|(c, _)| !c.is_finite() || *c < 0.0) {
            return input(format!("negative or non-finite coefficient {c}"));
        }
        let total: f64 = parts.iter().map(|(c, _)| c).sum();
        if (total - 1.0).abs() > WEIGHT_TOLERANCE {
            return input(format!("coefficients sum to {total}, expected 1"));
        }
        let mut sig = Signature::new();
        for (_, s) in parts {
            for (name, rel) in &s.relations {
                sig.insert(name, rel.arity)?;
            }
        }
        let mut tuples: BTreeMap<String, Vec<Vec<u32>>> = BTreeMap::new();
        let mut weights = Vec::new();
        let mut marks = BTreeSet::new();
        let mut offset = 0u32;
        for (c, s) in parts {
            for (name, rel) in &s.relations {
                let entry = tuples.entry(name.clone()).or_default();
                entry.extend(rel.tuples.iter().map(|t| t.iter().map(|v| v + offset).collect()));
            }
            weights.extend(s.weights.iter().map(|w| w * c));
            marks.extend(s.marks.iter().cloned());
            offset += s.n as u32;
        }
        let relations = sig
            .iter()
            .map(|(name, arity)| {
                let t = tuples.remove(name).unwrap_or_default();
                (name.to_string(), Relation::new(arity, t))
            })
            .collect();
        let mut s = Structure::new(offset as usize, relations, weights)?;
        s.marks = marks;
        Ok(s)
    }

    /// Expands the signature with a fresh unary mark holding exactly `set`.
    pub fn mark(&self, name: &str, set: &VertexSet) -> Result<Structure> {
        self.check_set(set)?;
        if let Some(rel) = self.relations.get(name) {
            return input(format!(
                "cannot mark '{name}': symbol already present with arity {}",
                rel.arity
            ));
        }
        let mut out = self.clone();
        out.relations.insert(
            name.to_string(),
            Relation::new(1, set.iter().map(|v| vec![v as u32])),
        );
        out.marks.insert(name.to_string());
        Ok(out)
    }

    /// Forgets the named marks; the Gaifman graph is unaffected since marks are unary.
    pub fn shadow(&self, names: &[&str]) -> Result<Structure> {
        let mut out = self.clone();
        for name in names {
            if !out.marks.remove(*name) {
                return input(format!("'{name}' is not a mark of this structure"));
            }
            out.relations.remove(*name);
        }
        Ok(out)
    }

    /// Members of a unary relation.
    pub fn unary_set(&self, name: &str) -> Result<VertexSet> {
        match self.relations.get(name) {
            Some(rel) if rel.arity == 1 => {
                Ok(VertexSet::from_ids(self.n, rel.tuples.iter().map(|t| t[0] as usize)))
            }
            Some(rel) => input(format!("'{name}' has arity {}, expected 1", rel.arity)),
            None => input(format!("unknown relation '{name}'")),
        }
    }

    /// Vertex sets of the connected components of the Gaifman graph restricted to `set`,
    /// ordered by smallest member.
    pub fn components_within(&self, set: &VertexSet) -> Vec<VertexSet> {
        let mut seen = VertexSet::empty(self.n);
        let mut out = Vec::new();
        for start in set.iter() {
            if seen.contains(start) {
                continue;
            }
            let mut comp = VertexSet::empty(self.n);
            let mut stack = vec![start];
            seen.insert(start);
            while let Some(u) = stack.pop() {
                comp.insert(u);
                for &w in &self.adjacency[u] {
                    let w = w as usize;
                    if set.contains(w) && !seen.contains(w) {
                        seen.insert(w);
                        stack.push(w);
                    }
                }
            }
            out.push(comp);
        }
        out
    }
}

/// Rescales so the weights sum to one in floating point as closely as possible.
pub(crate) fn normalize(mut weights: Vec<f64>) -> Vec<f64> {
    let total: f64 = weights.iter().sum();
    if total > 0.0 {
        for w in &mut weights {
            *w /= total;
        }
    }
    weights
}

fn gaifman(n: usize, relations: &BTreeMap<String, Relation>) -> Vec<Vec<u32>> {
    let mut adj: Vec<Vec<u32>> = vec![Vec::new(); n];
    for rel in relations.values() {
        for t in &rel.tuples {
            for (i, &a) in t.iter().enumerate() {
                for &b in &t[i + 1..] {
                    if a != b {
                        adj[a as usize].push(b);
                        adj[b as usize].push(a);
                    }
                }
            }
        }
    }
    for row in &mut adj {
        row.sort_unstable();
        row.dedup();
    }
    adj
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path(n: usize) -> Structure {
        let edges: Vec<_> = (0..n - 1).map(|i| (i, i + 1)).collect();
        Structure::from_edges(n, &edges, Structure::uniform_weights(n)).unwrap()
    }

    #[test]
    fn ball_on_path() {
        let p = path(5);
        let b = p.ball(&p.vertex_set([0]).unwrap(), Some(2)).unwrap();
        assert_eq!(b.to_vec(), vec![0, 1, 2]);
        assert!((p.measure(&b) - 0.6).abs() < 1e-15);
        assert_eq!(p.outer_boundary(&b).unwrap().to_vec(), vec![3]);
        assert!(p.ball_of_vertex(7, Some(1)).is_err());
        assert!(p.vertex_set([5]).is_err());
    }

    #[test]
    fn ball_measures_match_balls() {
        let p = path(6);
        let x = p.vertex_set([1, 4]).unwrap();
        let m = p.ball_measures(&x, 3).unwrap();
        for (d, mass) in m.iter().enumerate() {
            let b = p.ball(&x, Some(d as u32)).unwrap();
            assert!((p.measure(&b) - mass).abs() < 1e-15);
        }
        assert_eq!(p.ball_measures(&VertexSet::empty(6), 2).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn induce_renormalizes() {
        let p = path(4);
        let (q, map) = p.induce(&p.vertex_set([1, 2]).unwrap()).unwrap();
        assert_eq!(map, vec![1, 2]);
        assert_eq!(q.weights(), &[0.5, 0.5]);
        assert_eq!(q.edge_count(), 1);
        let w = vec![0.5, 0.5, 0.0, 0.0];
        let z = Structure::from_edges(4, &[(0, 1)], w).unwrap();
        assert!(matches!(
            z.induce(&z.vertex_set([2, 3]).unwrap()),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn zero_weight_vertices_are_kept() {
        let s = Structure::from_edges(3, &[(0, 1), (1, 2)], vec![0.5, 0.5, 0.0]).unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(s.neighbors(2), &[1]);
    }

    #[test]
    fn weighted_sum_checks_coefficients() {
        let a = path(2);
        let b = path(3);
        let s = Structure::weighted_sum(&[(0.25, &a), (0.75, &b)]).unwrap();
        assert_eq!(s.len(), 5);
        assert!((s.weight(0) - 0.125).abs() < 1e-15);
        assert!((s.weight(4) - 0.25).abs() < 1e-15);
        assert!(Structure::weighted_sum(&[(0.5, &a), (0.6, &b)]).is_err());
    }

    #[test]
    fn mark_and_shadow() {
        let p = path(3);
        let x = p.vertex_set([0, 2]).unwrap();
        let m = p.mark("M", &x).unwrap();
        assert_eq!(m.unary_set("M").unwrap(), x);
        assert!(m.mark("adj", &x).is_err());
        assert!(m.mark("M", &x).is_err());
        assert_eq!(m.shadow(&["M"]).unwrap(), p);
        assert!(p.shadow(&["M"]).is_err());
    }

    #[test]
    fn components() {
        let s = Structure::from_edges(5, &[(0, 1), (3, 4)], Structure::uniform_weights(5)).unwrap();
        let comps = s.components_within(&s.all());
        let ids: Vec<_> = comps.iter().map(VertexSet::to_vec).collect();
        assert_eq!(ids, vec![vec![0, 1], vec![2], vec![3, 4]]);
    }
}
