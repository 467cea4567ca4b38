use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{input, Error, Result};
use crate::structure::{Structure, VertexSet};

/// Largest domain for exhaustive subset enumeration.
pub const EXACT_LIMIT: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExpansionMode {
    Exact,
    Sampled { samples: usize, seed: u64 },
    /// Exact up to `EXACT_LIMIT` vertices, sampled beyond.
    Auto { samples: usize, seed: u64 },
}

impl ExpansionMode {
    fn exact_for(self, n: usize) -> Result<bool> {
        match self {
            ExpansionMode::Exact if n > EXACT_LIMIT => Err(Error::Limit(format!(
                "exact expansion needs at most {EXACT_LIMIT} vertices, got {n}"
            ))),
            ExpansionMode::Exact => Ok(true),
            ExpansionMode::Sampled { .. } => Ok(false),
            ExpansionMode::Auto { .. } => Ok(n <= EXACT_LIMIT),
        }
    }

    fn sampling(self) -> (usize, u64) {
        match self {
            ExpansionMode::Sampled { samples, seed } | ExpansionMode::Auto { samples, seed } => (samples, seed),
            ExpansionMode::Exact => (0, 0),
        }
    }
}

/// Infimum of `nu(B[d](X) - X) / nu(X)` over the qualifying subsets.
#[derive(Clone, Debug, Serialize)]
pub struct ExpansionReport {
    pub radius: u32,
    /// `None` when no subset qualifies.
    pub value: Option<f64>,
    /// Lexicographically smallest minimizer among those examined.
    pub witness: Option<Vec<usize>>,
    /// With sampling the value is only an upper bound on the infimum.
    pub exact: bool,
    pub examined: usize,
}

struct Masks {
    n: usize,
    adj: Vec<u32>,
    /// `mass[m]` is the measure of the vertex set encoded by `m`.
    mass: Vec<f64>,
}

impl Masks {
    fn new(a: &Structure) -> Self {
        let n = a.len();
        let adj = (0..n)
            .map(|v| a.neighbors(v).iter().fold(0u32, |m, &w| m | 1 << w))
            .collect();
        let mut mass = vec![0.0; 1 << n];
        for m in 1usize..1 << n {
            let low = m.trailing_zeros() as usize;
            mass[m] = mass[m & (m - 1)] + a.weight(low);
        }
        Masks { n, adj, mass }
    }

    fn ball(&self, mut m: u32, d: u32) -> u32 {
        for _ in 0..d {
            let mut next = m;
            let mut rest = m;
            while rest != 0 {
                let v = rest.trailing_zeros();
                next |= self.adj[v as usize];
                rest &= rest - 1;
            }
            if next == m {
                break;
            }
            m = next;
        }
        m
    }

    fn full(&self) -> u32 {
        ((1u64 << self.n) - 1) as u32
    }
}

/// Lexicographic order on the ascending member lists of two masks.
fn lex_less(a: u32, b: u32) -> bool {
    let diff = a ^ b;
    if diff == 0 {
        return false;
    }
    let v = diff.trailing_zeros();
    if a >> v & 1 == 1 {
        // b continues with something above v, or is a prefix of a
        b >> v != 0
    } else {
        a >> v == 0
    }
}

fn mask_ids(m: u32) -> Vec<usize> {
    (0..32).filter(|v| m >> v & 1 == 1).collect()
}

const TIE: f64 = 1e-12;

fn better(ratio: f64, mask: u32, best: Option<(f64, u32)>) -> bool {
    match best {
        None => true,
        Some((r, m)) => ratio < r - TIE || (ratio <= r + TIE && lex_less(mask, m)),
    }
}

fn exact_infimum(a: &Structure, d: u32, accept: impl Fn(f64) -> bool) -> ExpansionReport {
    let masks = Masks::new(a);
    let mut best: Option<(f64, u32)> = None;
    let mut examined = 0;
    for m in 1..=masks.full() {
        let mx = masks.mass[m as usize];
        if mx <= 0.0 || !accept(mx) {
            continue;
        }
        examined += 1;
        let halo = masks.ball(m, d) & !m;
        let ratio = masks.mass[halo as usize] / mx;
        if better(ratio, m, best) {
            best = Some((ratio, m));
        }
    }
    ExpansionReport {
        radius: d,
        value: best.map(|b| b.0),
        witness: best.map(|b| mask_ids(b.1)),
        exact: true,
        examined,
    }
}

/// Random connected-ish subsets: breadth-first growth from a random start to a random size,
/// mixed with uniformly random subsets.
fn sample_sets(a: &Structure, samples: usize, seed: u64) -> Vec<VertexSet> {
    let n = a.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(samples);
    for k in 0..samples {
        let target = rng.gen_range(1..=n.max(1));
        let mut set = VertexSet::empty(n);
        if k % 4 == 3 {
            let p = rng.gen_range(0.0..1.0);
            for v in 0..n {
                if rng.gen_bool(p) {
                    set.insert(v);
                }
            }
        } else {
            let start = rng.gen_range(0..n);
            set.insert(start);
            let mut frontier = vec![start];
            while set.len() < target && !frontier.is_empty() {
                let mut next = Vec::new();
                for &u in &frontier {
                    for &w in a.neighbors(u) {
                        if !set.contains(w as usize) {
                            next.push(w as usize);
                        }
                    }
                }
                next.sort_unstable();
                next.dedup();
                next.shuffle(&mut rng);
                let room = target - set.len();
                next.truncate(room);
                for &w in &next {
                    set.insert(w);
                }
                frontier = next;
            }
        }
        if !set.is_empty() {
            out.push(set);
        }
    }
    out
}

fn sampled_infimum(a: &Structure, d: u32, accept: impl Fn(f64) -> bool, samples: usize, seed: u64) -> ExpansionReport {
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut examined = 0;
    for set in sample_sets(a, samples, seed) {
        let mx = a.measure(&set);
        if mx <= 0.0 || !accept(mx) {
            continue;
        }
        examined += 1;
        let halo = a.ball_unchecked(&set, Some(d)).difference(&set);
        let ratio = a.measure(&halo) / mx;
        let ids = set.to_vec();
        let wins = match &best {
            None => true,
            Some((r, w)) => ratio < r - TIE || (ratio <= r + TIE && ids < *w),
        };
        if wins {
            best = Some((ratio, ids));
        }
    }
    ExpansionReport {
        radius: d,
        value: best.as_ref().map(|b| b.0),
        witness: best.map(|b| b.1),
        exact: false,
        examined,
    }
}

fn infimum(a: &Structure, d: u32, mode: ExpansionMode, accept: impl Fn(f64) -> bool) -> Result<ExpansionReport> {
    if mode.exact_for(a.len())? {
        Ok(exact_infimum(a, d, accept))
    } else {
        let (samples, seed) = mode.sampling();
        Ok(sampled_infimum(a, d, accept, samples, seed))
    }
}

/// `inf nu(B[d](X) - X) / nu(X)` over `eps < nu(X) < 1 - eps`; the structure is
/// `(d, eps, delta)`-expanding exactly when this exceeds `delta`.
pub fn expansion_check(a: &Structure, d: u32, eps: f64, mode: ExpansionMode) -> Result<ExpansionReport> {
    infimum(a, d, mode, |m| eps < m && m < 1.0 - eps)
}

/// Outer magnification: `inf nu(B(X) - X) / nu(X)` over `0 < nu(X) <= 1/2`.
pub fn h_out(a: &Structure, mode: ExpansionMode) -> Result<ExpansionReport> {
    infimum(a, 1, mode, |m| m <= 0.5 + TIE)
}

#[derive(Clone, Debug, Serialize)]
pub struct CleanReport {
    /// The removed set, of measure at most `eps`.
    pub removed: Vec<usize>,
    pub measure: f64,
    pub expansion: ExpansionReport,
    /// Exhaustive check that every `X` of measure at most 1/2 in `A - Y` expands by `delta`;
    /// `None` beyond the exact limit.
    pub verified: Option<bool>,
    /// `h_out(A - Y)` and the bounded-degree lower bound `delta / (Delta - 1)^d`.
    pub hout_after: Option<f64>,
    pub degree_bound: Option<f64>,
}

/// Removes a maximal poorly expanding set so that the rest expands at every scale up to half.
pub fn clean_expander(a: &Structure, d: u32, eps: f64, delta: f64, mode: ExpansionMode) -> Result<CleanReport> {
    if !(eps > 0.0 && eps < 1.0 / 6.0) {
        return input(format!("eps must lie in (0, 1/6), got {eps}"));
    }
    let exact = mode.exact_for(a.len())?;
    let expansion = expansion_check(a, d, eps, mode)?;
    if let Some(v) = expansion.value {
        if v <= delta {
            return Err(Error::Precondition(format!(
                "structure is not ({d}, {eps}, {delta})-expanding: a set expands by only {v}"
            )));
        }
    }
    let removed = if exact { exact_bad_set(a, d, eps, delta) } else { greedy_bad_set(a, d, eps, delta) };
    let y = VertexSet::from_ids(a.len(), removed.iter().copied());
    let measure = a.measure(&y);
    let rest = if y.is_empty() { Some(a.clone()) } else { a.remove(&y).ok().map(|r| r.0) };
    let (verified, hout_after) = match (&rest, exact) {
        (Some(r), true) => {
            let ok = exact_infimum(r, d, |m| m <= 0.5 + TIE).value.is_none_or(|v| v >= delta - TIE);
            (Some(ok), exact_infimum(r, 1, |m| m <= 0.5 + TIE).value)
        }
        _ => (None, None),
    };
    let max_degree = (0..a.len()).map(|v| a.neighbors(v).len()).max().unwrap_or(0);
    let degree_bound = (max_degree >= 2).then(|| delta / ((max_degree - 1) as f64).powi(d as i32));
    Ok(CleanReport { removed, measure, expansion, verified, hout_after, degree_bound })
}

fn is_bad(mass: f64, halo: f64, eps: f64, delta: f64) -> bool {
    mass > 0.0 && mass <= 1.0 - 2.0 * eps + TIE && halo < delta * mass
}

/// The heaviest bad set; ties prefer more vertices, then the lexicographically smallest.
fn exact_bad_set(a: &Structure, d: u32, eps: f64, delta: f64) -> Vec<usize> {
    let masks = Masks::new(a);
    let mut best: Option<u32> = None;
    for m in 1..=masks.full() {
        let mx = masks.mass[m as usize];
        let halo = masks.mass[(masks.ball(m, d) & !m) as usize];
        if !is_bad(mx, halo, eps, delta) {
            continue;
        }
        let wins = match best {
            None => true,
            Some(b) => {
                let mb = masks.mass[b as usize];
                mx > mb + TIE
                    || (mx >= mb - TIE
                        && (m.count_ones() > b.count_ones() || (m.count_ones() == b.count_ones() && lex_less(m, b))))
            }
        };
        if wins {
            best = Some(m);
        }
    }
    best.map(mask_ids).unwrap_or_default()
}

/// Grows a bad set from small balls while it stays bad and light enough.
fn greedy_bad_set(a: &Structure, d: u32, eps: f64, delta: f64) -> Vec<usize> {
    let n = a.len();
    let mut candidates = Vec::new();
    for v in 0..n {
        for k in 0..=d + 2 {
            candidates.push(a.ball_unchecked(&VertexSet::from_ids(n, [v]), Some(k)));
        }
    }
    let mut y = VertexSet::empty(n);
    loop {
        let base = a.measure(&y);
        let mut best: Option<(f64, VertexSet)> = None;
        for c in &candidates {
            if c.is_subset(&y) {
                continue;
            }
            let u = y.union(c);
            let mu = a.measure(&u);
            let halo = a.measure(&a.ball_unchecked(&u, Some(d)).difference(&u));
            if mu > base && is_bad(mu, halo, eps, delta) && best.as_ref().is_none_or(|(b, _)| mu > *b) {
                best = Some((mu, u));
            }
        }
        match best {
            Some((_, u)) => y = u,
            None => break,
        }
    }
    y.to_vec()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::random_regular;

    fn complete(n: usize) -> Structure {
        let edges: Vec<_> = (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v))).collect();
        Structure::from_edges(n, &edges, Structure::uniform_weights(n)).unwrap()
    }

    fn cycle(n: usize) -> Structure {
        let edges: Vec<_> = (0..n).map(|i| (i, (i + 1) % n)).collect();
        Structure::from_edges(n, &edges, Structure::uniform_weights(n)).unwrap()
    }

    #[test]
    fn lex_order() {
        assert!(lex_less(0b011, 0b101));
        assert!(lex_less(0b001, 0b011));
        assert!(!lex_less(0b011, 0b001));
        assert!(lex_less(0b0110, 0b1100));
    }

    #[test]
    fn k4_and_c8() {
        let k4 = h_out(&complete(4), ExpansionMode::Exact).unwrap();
        assert!((k4.value.unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(k4.witness.unwrap(), vec![0, 1]);
        assert_eq!(k4.examined, 4 + 6);
        let c8 = h_out(&cycle(8), ExpansionMode::Exact).unwrap();
        assert!((c8.value.unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(c8.witness.unwrap(), vec![0, 1, 2, 3]);
    }

    #[test]
    fn disconnected_has_zero_expansion() {
        let two = Structure::from_edges(4, &[(0, 1), (2, 3)], Structure::uniform_weights(4)).unwrap();
        let r = expansion_check(&two, 1, 0.2, ExpansionMode::Exact).unwrap();
        assert_eq!(r.value, Some(0.0));
        assert_eq!(r.witness.unwrap(), vec![0, 1]);
    }

    #[test]
    fn exact_refused_beyond_limit() {
        let c = cycle(20);
        assert!(matches!(h_out(&c, ExpansionMode::Exact), Err(Error::Limit(_))));
        let s = h_out(&c, ExpansionMode::Auto { samples: 500, seed: 1 }).unwrap();
        assert!(!s.exact);
        assert!(s.value.unwrap() >= 0.2 - 1e-12);
    }

    #[test]
    fn clean_expander_on_complete_graph() {
        let r = clean_expander(&complete(8), 1, 0.1, 0.1, ExpansionMode::Exact).unwrap();
        assert!(r.removed.is_empty());
        assert_eq!(r.verified, Some(true));
    }

    #[test]
    fn clean_expander_on_cubic_graph() {
        let g = random_regular(12, 3, 3).unwrap();
        let e = expansion_check(&g, 1, 0.1, ExpansionMode::Exact).unwrap().value.unwrap();
        let r = clean_expander(&g, 1, 0.1, e * 0.9, ExpansionMode::Exact).unwrap();
        assert_eq!(r.verified, Some(true));
        assert!(r.measure <= 0.1 + 1e-12);
        assert!(clean_expander(&g, 1, 0.1, e, ExpansionMode::Exact).is_err());
    }
}
