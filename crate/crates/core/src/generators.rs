//! Deterministic synthetic sequence families with known limit behaviour.
//!
//! Every family maps an index `n >= 1` to a structure over the binary relation
//! `adj` together with a ground-truth annotation: the limit atoms of the
//! ball-measure spectrum, the residual mass, and a label per vertex.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{input, Result};
use crate::structure::Structure;

/// Vertex counts above this are refused so a typo cannot exhaust memory.
pub const MAX_VERTICES: usize = 1 << 22;

const MAX_STAR: usize = 64;
const PATH_FACTOR: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Growth {
    Linear,
    Exponential,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Layout {
    /// One expander on `scale * n` vertices.
    Single,
    /// Three copies of `E(n)` at odd indices, `E(n)` and `E(2n)` at even ones.
    Triple,
    /// `E(5n) E(6n) E(8n)` at odd indices, `E(2n) E(3n) E(4n) E(10n)` at even ones.
    Mixed,
}

/// A generator family with its parameters, as it appears in sequence manifests:
/// `{"generator": "clique-pair", "params": {"a": 0.5, "b": 0.3}}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "generator", content = "params", rename_all = "kebab-case")]
pub enum Family {
    /// `K_n` with measure `a`, `K_{n+1}` with measure `b` (omitted when `b = 0`),
    /// joined by a path of `64 n` vertices carrying the remaining measure.
    CliquePair {
        #[serde(default = "half")]
        a: f64,
        #[serde(default = "half")]
        b: f64,
    },
    /// The uniform cycle `C_{2n}`.
    Cycle {},
    /// `2^n` stars, star `i` with measure proportional to `(2^-i + 2^-n) / 2`.
    StarForest {},
    /// Seeded random regular graphs arranged per `layout`, optionally chained by
    /// paths of about `sqrt(size)` vertices.
    ExpanderUnion {
        #[serde(default = "three")]
        degree: usize,
        #[serde(default = "eight")]
        scale: usize,
        #[serde(default = "single")]
        layout: Layout,
        #[serde(default = "linear")]
        growth: Growth,
        #[serde(default)]
        link: bool,
        #[serde(default)]
        seed: u64,
    },
}

fn half() -> f64 {
    0.5
}
fn three() -> usize {
    3
}
fn eight() -> usize {
    8
}
fn single() -> Layout {
    Layout::Single
}
fn linear() -> Growth {
    Growth::Linear
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::CliquePair { .. } => "clique-pair",
            Family::Cycle {} => "cycle",
            Family::StarForest {} => "star-forest",
            Family::ExpanderUnion { .. } => "expander-union",
        }
    }

    pub fn clique_pair(a: f64, b: f64) -> Self {
        Family::CliquePair { a, b }
    }

    pub fn expander(degree: usize, scale: usize, layout: Layout, link: bool, seed: u64) -> Self {
        Family::ExpanderUnion { degree, scale, layout, growth: Growth::Linear, link, seed }
    }

    /// Builds from a family name and a JSON parameter object.
    pub fn from_parts(name: &str, params: &serde_json::Value) -> Result<Self> {
        let doc = serde_json::json!({ "generator": name, "params": params });
        serde_json::from_value(doc).map_err(|e| crate::Error::Input(format!("generator '{name}': {e}")))
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Family::CliquePair { a, b } => {
                if !(a > 0.0 && b >= 0.0 && a + b <= 1.0 + 1e-12) {
                    return input(format!("clique-pair needs a > 0, b >= 0, a + b <= 1 (got {a}, {b})"));
                }
            }
            Family::ExpanderUnion { degree, scale, .. }
                if (degree < 2 || scale == 0) => {
                    return input("expander-union needs degree >= 2 and scale >= 1");
                }
            _ => {}
        }
        Ok(())
    }
}

/// Role of a vertex in the limit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TrueLabel {
    /// Member `member` of the components converging to atom `atom`.
    Globular { atom: usize, member: usize },
    /// Part of an expanding component, numbered in generation order.
    Open { component: usize },
    Residual,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TrueAtom {
    pub lambda: f64,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GroundTruth {
    /// Limit atoms in decreasing order of `lambda`.
    pub atoms: Vec<TrueAtom>,
    /// `1 - sum count * lambda`.
    pub residual: f64,
    pub labels: Vec<TrueLabel>,
}

impl GroundTruth {
    pub fn atom_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.lambda * a.count as f64).sum()
    }
}

pub struct Generated {
    pub structure: Structure,
    pub truth: GroundTruth,
}

struct Builder {
    weights: Vec<f64>,
    edges: Vec<(usize, usize)>,
    labels: Vec<TrueLabel>,
}

impl Builder {
    fn new() -> Self {
        Builder { weights: Vec::new(), edges: Vec::new(), labels: Vec::new() }
    }

    fn add_vertices(&mut self, count: usize, weight: f64, label: TrueLabel) -> usize {
        let first = self.weights.len();
        self.weights.extend(std::iter::repeat_n(weight, count));
        self.labels.extend(std::iter::repeat_n(label, count));
        first
    }

    fn clique(&mut self, size: usize, mass: f64, label: TrueLabel) -> usize {
        let first = self.add_vertices(size, mass / size as f64, label);
        for u in first..first + size {
            for v in u + 1..first + size {
                self.edges.push((u, v));
            }
        }
        first
    }

    /// A path of `len` vertices; consecutive vertices are adjacent. Returns the first id.
    fn path(&mut self, len: usize, weight: f64, label: TrueLabel) -> usize {
        let first = self.add_vertices(len, weight, label);
        for u in first + 1..first + len {
            self.edges.push((u - 1, u));
        }
        first
    }

    fn finish(self, atoms: Vec<TrueAtom>) -> Result<Generated> {
        if self.weights.len() > MAX_VERTICES {
            return input(format!("{} vertices exceeds the generator limit", self.weights.len()));
        }
        let structure = Structure::from_edges(self.weights.len(), &self.edges, self.weights)?;
        let residual = 1.0 - atoms.iter().map(|a| a.lambda * a.count as f64).sum::<f64>();
        Ok(Generated { structure, truth: GroundTruth { atoms, residual, labels: self.labels } })
    }
}

/// The structure at index `n` (n >= 1) with its ground truth.
pub fn generate(family: &Family, n: usize) -> Result<Generated> {
    family.validate()?;
    if n == 0 {
        return input("generator indices start at 1");
    }
    match *family {
        Family::CliquePair { a, b } => clique_pair(a, b, n),
        Family::Cycle {} => cycle(n),
        Family::StarForest {} => star_forest(n),
        Family::ExpanderUnion { degree, scale, layout, growth, link, seed } => {
            expander_union(degree, scale, layout, growth, link, seed, n)
        }
    }
}

fn clique_pair(a: f64, b: f64, n: usize) -> Result<Generated> {
    let residual = (1.0 - a - b).max(0.0);
    let same = b > 0.0 && (a - b).abs() < 1e-12;
    // atom indices follow decreasing lambda
    let (first_label, second_label, atoms) = if same {
        (
            TrueLabel::Globular { atom: 0, member: 0 },
            TrueLabel::Globular { atom: 0, member: 1 },
            vec![TrueAtom { lambda: a, count: 2 }],
        )
    } else if b == 0.0 {
        (TrueLabel::Globular { atom: 0, member: 0 }, TrueLabel::Residual, vec![TrueAtom { lambda: a, count: 1 }])
    } else {
        let first_atom = usize::from(b > a);
        (
            TrueLabel::Globular { atom: first_atom, member: 0 },
            TrueLabel::Globular { atom: 1 - first_atom, member: 0 },
            vec![
                TrueAtom { lambda: a.max(b), count: 1 },
                TrueAtom { lambda: a.min(b), count: 1 },
            ],
        )
    };
    let mut g = Builder::new();
    let first = g.clique(n, a, first_label);
    let second = (b > 0.0).then(|| g.clique(n + 1, b, second_label));
    if residual > 1e-12 {
        let len = PATH_FACTOR * n;
        let start = g.path(len, residual / len as f64, TrueLabel::Residual);
        g.edges.push((first, start));
        if let Some(s) = second {
            g.edges.push((start + len - 1, s));
        }
    }
    g.finish(atoms)
}

fn cycle(n: usize) -> Result<Generated> {
    let len = 2 * n;
    let mut g = Builder::new();
    g.path(len, 1.0 / len as f64, TrueLabel::Residual);
    if len > 2 {
        g.edges.push((len - 1, 0));
    }
    g.finish(Vec::new())
}

/// Limit measure of star `i` (1-based).
pub fn star_limit_measure(i: usize) -> f64 {
    0.5f64.powi(i as i32 + 1)
}

/// Measure of star `i` at index `n`, normalized so the stage sums to one.
pub fn star_measure(i: usize, n: usize) -> f64 {
    let count = 1u64 << n;
    let raw = (0.5f64.powi(i as i32) + 0.5f64.powi(n as i32)) / 2.0;
    let total = 1.0 - 0.5f64.powf(count as f64 + 1.0);
    raw / total
}

fn star_size(i: usize, n: usize) -> usize {
    // 2^(2^n) * w, computed in log space
    let log2 = (1u64 << n) as f64 + star_measure(i, n).log2();
    if log2 >= (MAX_STAR as f64).log2() {
        MAX_STAR
    } else {
        (2f64.powf(log2).ceil() as usize).clamp(2, MAX_STAR)
    }
}

fn star_forest(n: usize) -> Result<Generated> {
    if n > 16 {
        return input("star-forest supports indices up to 16");
    }
    let count = 1usize << n;
    let mut g = Builder::new();
    let mut atoms = Vec::new();
    for i in 1..=count {
        let size = star_size(i, n);
        let label = if i <= n {
            atoms.push(TrueAtom { lambda: star_limit_measure(i), count: 1 });
            TrueLabel::Globular { atom: i - 1, member: 0 }
        } else {
            TrueLabel::Residual
        };
        let center = g.add_vertices(size, star_measure(i, n) / size as f64, label);
        for leaf in center + 1..center + size {
            g.edges.push((center, leaf));
        }
    }
    g.finish(atoms)
}

/// A uniform random `degree`-regular simple connected graph on `n` vertices,
/// drawn by the configuration model with rejection.
pub fn random_regular(n: usize, degree: usize, seed: u64) -> Result<Structure> {
    let edges = regular_edges(n, degree, seed)?;
    Structure::from_edges(n, &edges, Structure::uniform_weights(n))
}

fn regular_edges(n: usize, degree: usize, seed: u64) -> Result<Vec<(usize, usize)>> {
    if degree >= n || (n * degree) % 2 == 1 {
        return input(format!("no simple {degree}-regular graph on {n} vertices"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut stubs: Vec<usize> = (0..n).flat_map(|v| std::iter::repeat_n(v, degree)).collect();
    for _ in 0..10_000 {
        stubs.shuffle(&mut rng);
        let mut edges: Vec<(usize, usize)> = stubs
            .chunks(2)
            .map(|p| (p[0].min(p[1]), p[0].max(p[1])))
            .collect();
        if edges.iter().any(|(u, v)| u == v) {
            continue;
        }
        edges.sort_unstable();
        if edges.windows(2).any(|w| w[0] == w[1]) {
            continue;
        }
        if connected(n, &edges) {
            return Ok(edges);
        }
    }
    input(format!("configuration model failed for n = {n}, degree = {degree}"))
}

fn connected(n: usize, edges: &[(usize, usize)]) -> bool {
    let mut adj = vec![Vec::new(); n];
    for &(u, v) in edges {
        adj[u].push(v);
        adj[v].push(u);
    }
    let mut seen = vec![false; n];
    let mut stack = vec![0];
    seen[0] = true;
    let mut count = 1;
    while let Some(u) = stack.pop() {
        for &w in &adj[u] {
            if !seen[w] {
                seen[w] = true;
                count += 1;
                stack.push(w);
            }
        }
    }
    count == n
}

fn expander_union(
    degree: usize,
    scale: usize,
    layout: Layout,
    growth: Growth,
    link: bool,
    seed: u64,
    n: usize,
) -> Result<Generated> {
    let base = match growth {
        Growth::Linear => scale * n,
        Growth::Exponential => scale << n.min(20),
    };
    let sizes: Vec<usize> = match layout {
        Layout::Single => vec![base],
        Layout::Triple if n % 2 == 1 => vec![base; 3],
        Layout::Triple => vec![base, 2 * base],
        Layout::Mixed if n % 2 == 1 => [5, 6, 8].iter().map(|k| k * base).collect(),
        Layout::Mixed => [2, 3, 4, 10].iter().map(|k| k * base).collect(),
    };
    let sizes: Vec<usize> = sizes.into_iter().map(|s| even_enough(s.max(degree + 1), degree)).collect();
    let total_core: usize = sizes.iter().sum();
    let path_len = if link { ((total_core as f64).sqrt().ceil() as usize).max(1) } else { 0 };
    let links = if link { sizes.len() - 1 } else { 0 };
    let total = total_core + links * path_len;
    let w = 1.0 / total as f64;
    let mut g = Builder::new();
    let mut firsts = Vec::new();
    for (k, &size) in sizes.iter().enumerate() {
        let edges = regular_edges(size, degree, seed ^ ((n as u64) << 16) ^ k as u64)?;
        let first = g.add_vertices(size, w, TrueLabel::Open { component: k });
        g.edges.extend(edges.into_iter().map(|(u, v)| (u + first, v + first)));
        firsts.push(first);
    }
    for k in 0..links {
        let start = g.path(path_len, w, TrueLabel::Residual);
        g.edges.push((firsts[k], start));
        g.edges.push((start + path_len - 1, firsts[k + 1]));
    }
    let mut out = g.finish(Vec::new())?;
    out.truth.residual = 1.0;
    Ok(out)
}

/// Smallest size `>= s` admitting a `degree`-regular graph.
fn even_enough(s: usize, degree: usize) -> usize {
    if (s * degree) % 2 == 1 {
        s + 1
    } else {
        s
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct FamilyInfo {
    pub name: &'static str,
    pub params: &'static str,
    pub truth: &'static str,
}

/// Registry of the available families.
pub fn families() -> Vec<FamilyInfo> {
    vec![
        FamilyInfo {
            name: "clique-pair",
            params: "a (default 0.5), b (default 0.5; 0 drops the second clique)",
            truth: "globular atoms a and b (one atom of count 2 when a = b); residual path of mass 1-a-b",
        },
        FamilyInfo {
            name: "cycle",
            params: "none",
            truth: "no atoms; everything residual",
        },
        FamilyInfo {
            name: "star-forest",
            params: "none",
            truth: "star i converges to an atom of measure 2^-(i+1); half of the mass is residual",
        },
        FamilyInfo {
            name: "expander-union",
            params: "degree (3), scale (8), layout single|triple|mixed, growth linear|exponential, link (false), seed (0)",
            truth: "seeded configuration-model regular components; open clusters, no atoms",
        },
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::structure::structure_to_json;

    #[test]
    fn clique_pair_construction() {
        let g = generate(&Family::clique_pair(0.5, 0.5), 4).unwrap();
        let s = &g.structure;
        assert_eq!(s.len(), 9);
        assert_eq!(s.edge_count(), 6 + 10);
        assert!(s.weights()[..4].iter().all(|w| (w - 0.125).abs() < 1e-15));
        assert!(s.weights()[4..].iter().all(|w| (w - 0.1).abs() < 1e-15));
        assert_eq!(g.truth.atoms, vec![TrueAtom { lambda: 0.5, count: 2 }]);
        assert!(g.truth.residual.abs() < 1e-12);
    }

    #[test]
    fn clique_pair_with_residual() {
        let g = generate(&Family::clique_pair(0.3, 0.5), 2).unwrap();
        let s = &g.structure;
        assert_eq!(s.len(), 2 + 3 + 128);
        assert_eq!(g.truth.atoms[0].lambda, 0.5);
        assert_eq!(g.truth.labels[0], TrueLabel::Globular { atom: 1, member: 0 });
        assert_eq!(g.truth.labels[2], TrueLabel::Globular { atom: 0, member: 0 });
        assert!((g.truth.residual - 0.2).abs() < 1e-12);
        assert!(s.distance(0, 2).is_some());
        let path = s.vertex_set(5..s.len()).unwrap();
        assert!((s.measure(&path) - 0.2).abs() < 1e-12);
    }

    #[test]
    fn cycle_is_two_regular() {
        let s = generate(&Family::Cycle {}, 5).unwrap().structure;
        assert_eq!(s.len(), 10);
        assert!((0..10).all(|v| s.neighbors(v).len() == 2));
    }

    #[test]
    fn star_forest_weights() {
        let g = generate(&Family::StarForest {}, 3).unwrap();
        let s = &g.structure;
        let comps = s.components_within(&s.all());
        assert_eq!(comps.len(), 8);
        let z = 1.0 - 0.5f64.powi(9);
        for (i, c) in comps.iter().enumerate() {
            let expected = (0.5f64.powi(i as i32 + 1) + 0.125) / 2.0 / z;
            assert!((s.measure(c) - expected).abs() < 1e-12);
        }
        assert_eq!(g.truth.atoms.len(), 3);
    }

    #[test]
    fn determinism() {
        let fam = Family::expander(3, 4, Layout::Triple, true, 9);
        let a = structure_to_json(&generate(&fam, 3).unwrap().structure);
        let b = structure_to_json(&generate(&fam, 3).unwrap().structure);
        assert_eq!(a.to_string(), b.to_string());
    }

    #[test]
    fn regular_graphs_are_regular() {
        for seed in 0..5 {
            let s = random_regular(12, 3, seed).unwrap();
            assert!((0..12).all(|v| s.neighbors(v).len() == 3));
        }
        assert!(random_regular(5, 3, 0).is_err());
    }

    #[test]
    fn registry_and_manifest_names() {
        let names: Vec<_> = families().iter().map(|f| f.name).collect();
        assert!(names.contains(&"clique-pair") && names.contains(&"star-forest"));
        assert!(names.contains(&"expander-union"));
        let f = Family::from_parts("clique-pair", &serde_json::json!({"a": 0.5, "b": 0.3})).unwrap();
        assert_eq!(f, Family::clique_pair(0.5, 0.3));
        let e = Family::from_parts("expander-union", &serde_json::json!({"layout": "mixed"})).unwrap();
        assert_eq!(e.name(), "expander-union");
        assert!(Family::from_parts("nope", &serde_json::json!({})).is_err());
        assert!(generate(&Family::clique_pair(0.7, 0.7), 1).is_err());
    }

    #[test]
    fn truth_partitions_mass() {
        for fam in [Family::clique_pair(0.5, 0.3), Family::StarForest {}, Family::Cycle {}] {
            let g = generate(&fam, 4).unwrap();
            assert_eq!(g.truth.labels.len(), g.structure.len());
            assert!((g.truth.atom_mass() + g.truth.residual - 1.0).abs() < 1e-12);
        }
    }
}
