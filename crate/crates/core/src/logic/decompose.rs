//! Rewriting the pairing of a local formula as an integer polynomial in pairings of
//! strongly local formulas.
//!
//! Tuples are split by their distance graph `F` (pairs at distance at most `t` are
//! edges). When `F` is connected the piece is strongly local as it stands. Otherwise
//! the variable groups are more than `t` apart, so every atom relating two groups is
//! decided by the distance alone; after that, quantifiers are separated from
//! subformulas about other groups by case splitting, and the indicator becomes a
//! polynomial in group-pure pieces. Each product of group-pure pieces is a free
//! product minus the tuples whose distance graph is coarser, which recurses on the
//! number of components.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::Serialize;

use super::ast::{Formula, Var};
use super::eval::{pairing_with, Checker};
use super::locality::{is_strongly_local, locality_radius, radius};
use crate::error::{Error, Result};
use crate::structure::Structure;

pub const MAX_ARITY: usize = 6;
pub const MAX_RADIUS: u32 = 16;

/// `<φ, A> = Σ coeff · Π <formulas[i], A>` for every structure `A`.
#[derive(Clone, Debug, Serialize)]
pub struct PairingPolynomial {
    pub formulas: Vec<Formula>,
    /// Coefficient and sorted multiset of indices into `formulas`.
    pub terms: Vec<(i64, Vec<usize>)>,
    /// Distance threshold used to split tuples.
    pub threshold: u32,
}

impl PairingPolynomial {
    pub fn degree(&self) -> usize {
        self.terms.iter().map(|(_, m)| m.len()).max().unwrap_or(0)
    }

    pub fn max_radius(&self) -> u32 {
        self.formulas.iter().map(radius).max().unwrap_or(0)
    }

    pub fn evaluate_with(&self, values: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(c, m)| *c as f64 * m.iter().map(|&i| values[i]).product::<f64>())
            .sum()
    }

    pub fn evaluate(&self, s: &Structure) -> Result<f64> {
        let values = self
            .formulas
            .iter()
            .map(|f| Checker::new(f, s).map(|c| pairing_with(&c, s)))
            .collect::<Result<Vec<_>>>()?;
        Ok(self.evaluate_with(&values))
    }
}

type Poly = BTreeMap<Vec<usize>, i64>;

fn add_into(acc: &mut Poly, other: &Poly, scale: i64) {
    for (m, c) in other {
        let e = acc.entry(m.clone()).or_insert(0);
        *e += c * scale;
        if *e == 0 {
            acc.remove(m);
        }
    }
}

/// Interned variable formulas.
#[derive(Default)]
struct Vars {
    formulas: Vec<Formula>,
    index: HashMap<String, usize>,
}

impl Vars {
    fn intern(&mut self, f: Formula) -> usize {
        let f = f.canonical();
        let key = f.to_string();
        if let Some(&i) = self.index.get(&key) {
            return i;
        }
        self.formulas.push(f);
        self.index.insert(key, self.formulas.len() - 1);
        self.formulas.len() - 1
    }
}

fn pairs(p: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for i in 0..p {
        for j in i + 1..p {
            out.push((i, j));
        }
    }
    out
}

/// Connected components of a graph on `vars` given as an edge bitmask over `pairs`.
fn components(vars: &[usize], mask: u64, pairs: &[(usize, usize)]) -> Vec<Vec<usize>> {
    let mut label: BTreeMap<usize, usize> = vars.iter().map(|&v| (v, v)).collect();
    fn find(label: &mut BTreeMap<usize, usize>, v: usize) -> usize {
        let parent = label[&v];
        if parent == v {
            return v;
        }
        let root = find(label, parent);
        label.insert(v, root);
        root
    }
    for (k, &(i, j)) in pairs.iter().enumerate() {
        if mask >> k & 1 == 1 && label.contains_key(&i) && label.contains_key(&j) {
            let (a, b) = (find(&mut label, i), find(&mut label, j));
            if a != b {
                label.insert(a.max(b), a.min(b));
            }
        }
    }
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for &v in vars {
        let r = find(&mut label, v);
        groups.entry(r).or_default().push(v);
    }
    groups.into_values().collect()
}

/// Edge and non-edge guards of the graph restricted to `vars`.
fn guards(vars: &[usize], mask: u64, pairs: &[(usize, usize)], t: u32) -> Vec<Formula> {
    pairs
        .iter()
        .enumerate()
        .filter(|(_, (i, j))| vars.contains(i) && vars.contains(j))
        .map(|(k, &(i, j))| {
            let (a, b) = (Var::Free(i as u32), Var::Free(j as u32));
            if mask >> k & 1 == 1 {
                Formula::DistLe(a, b, t)
            } else {
                Formula::DistGt(a, b, t)
            }
        })
        .collect()
}

/// Renames the variables in `vars` (ascending) to `x1, x2, ...`.
fn pack(f: &Formula, vars: &[usize]) -> Formula {
    let table: BTreeMap<u32, u32> = vars.iter().enumerate().map(|(n, &o)| (o as u32, n as u32)).collect();
    f.map_free(&|k| table[&k])
}

/// Splits `φ` into a strongly local polynomial.
pub fn strongly_local_decomposition(phi: &Formula) -> Result<PairingPolynomial> {
    let p = phi.arity();
    let r = locality_radius(phi);
    if p > MAX_ARITY {
        return Err(Error::Limit(format!("{p} free variables, at most {MAX_ARITY} supported")));
    }
    if r > MAX_RADIUS {
        return Err(Error::Limit(format!("radius {r}, at most {MAX_RADIUS} supported")));
    }
    let mut vars = Vars::default();
    if p <= 1 || is_strongly_local(phi) {
        let i = vars.intern(phi.clone());
        return Ok(PairingPolynomial {
            formulas: vars.formulas,
            terms: vec![(1, vec![i])],
            threshold: 0,
        });
    }
    let t = 2 * r.max(1);
    let pairs = pairs(p);
    let all: Vec<usize> = (0..p).collect();
    let mut total = Poly::new();
    // Distance graphs sharing a partition share the factorization of φ.
    let mut by_partition: BTreeMap<Vec<Vec<usize>>, Vec<u64>> = BTreeMap::new();
    for mask in 0..1u64 << pairs.len() {
        by_partition.entry(components(&all, mask, &pairs)).or_default().push(mask);
    }
    for (partition, masks) in by_partition {
        if partition.len() == 1 {
            for mask in masks {
                let mut parts = guards(&all, mask, &pairs, t);
                parts.push(phi.clone());
                let i = vars.intern(Formula::and(parts));
                add_into(&mut total, &BTreeMap::from([(vec![i], 1)]), 1);
            }
            continue;
        }
        let mut group_of = vec![0usize; p];
        for (g, block) in partition.iter().enumerate() {
            for &v in block {
                group_of[v] = g;
            }
        }
        let split = Splitter { group_of: &group_of, threshold: t };
        let resolved = split.resolve(phi, &mut BTreeMap::new())?;
        let mut leaves = Leaves::default();
        let indicator = split.indicator(&resolved, &mut leaves);
        for (monomial, coeff) in indicator {
            let mut rho = vec![Vec::new(); partition.len()];
            for leaf in monomial {
                let (g, f) = &leaves.items[leaf];
                rho[*g].push(f.clone());
            }
            let rho: Vec<Formula> = rho.into_iter().map(Formula::and).collect();
            if rho.contains(&Formula::False) {
                continue;
            }
            let mut ctx = Products {
                partition: &partition,
                rho: &rho,
                pairs: &pairs,
                threshold: t,
                memo: HashMap::new(),
            };
            for &mask in &masks {
                let piece = ctx.term(mask, &mut vars);
                add_into(&mut total, &piece, coeff);
            }
        }
    }
    let terms: Vec<(i64, Vec<usize>)> = total.into_iter().map(|(m, c)| (c, m)).collect();
    let poly = PairingPolynomial { formulas: vars.formulas, terms, threshold: t };
    debug_assert!(poly.degree() <= p);
    debug_assert!(poly.formulas.iter().all(is_strongly_local));
    Ok(poly)
}

/// Recursion over distance graphs coarser than a fixed partition with fixed group formulas.
struct Products<'a> {
    partition: &'a [Vec<usize>],
    rho: &'a [Formula],
    pairs: &'a [(usize, usize)],
    threshold: u32,
    memo: HashMap<u64, Poly>,
}

impl Products<'_> {
    /// Pairing of `γ_H ∧ ⋀ ρ_z` as a polynomial.
    fn term(&mut self, mask: u64, vars: &mut Vars) -> Poly {
        if let Some(p) = self.memo.get(&mask) {
            return p.clone();
        }
        let p = self.partition.iter().map(Vec::len).sum::<usize>();
        let all: Vec<usize> = (0..p).collect();
        let comps = components(&all, mask, self.pairs);
        let rho_within = |block: &[usize]| -> Vec<Formula> {
            self.partition
                .iter()
                .zip(self.rho)
                .filter(|(z, _)| z.iter().all(|v| block.contains(v)))
                .map(|(_, f)| f.clone())
                .collect()
        };
        let result = if comps.len() == 1 {
            let mut parts = guards(&all, mask, self.pairs, self.threshold);
            parts.extend(rho_within(&all));
            BTreeMap::from([(vec![vars.intern(Formula::and(parts))], 1)])
        } else {
            let mut monomial = Vec::new();
            for block in &comps {
                let mut parts = guards(block, mask, self.pairs, self.threshold);
                parts.extend(rho_within(block));
                monomial.push(vars.intern(pack(&Formula::and(parts), block)));
            }
            monomial.sort_unstable();
            let mut out = BTreeMap::from([(monomial, 1)]);
            // Cross-component pairs are free in the product; subtract every nonempty choice.
            let within: u64 = self
                .pairs
                .iter()
                .enumerate()
                .filter(|(_, (i, j))| comps.iter().any(|c| c.contains(i) && c.contains(j)))
                .fold(0, |m, (k, _)| m | 1 << k);
            let cross: Vec<usize> = (0..self.pairs.len()).filter(|k| within >> k & 1 == 0).collect();
            for choice in 1..1u64 << cross.len() {
                let mut finer = mask & within;
                for (b, &k) in cross.iter().enumerate() {
                    if choice >> b & 1 == 1 {
                        finer |= 1 << k;
                    }
                }
                let sub = self.term(finer, vars);
                add_into(&mut out, &sub, -1);
            }
            out
        };
        self.memo.insert(mask, result.clone());
        result
    }
}

#[derive(Default)]
struct Leaves {
    items: Vec<(usize, Formula)>,
    index: BTreeMap<Formula, usize>,
}

impl Leaves {
    fn intern(&mut self, group: usize, f: Formula) -> usize {
        if let Some(&i) = self.index.get(&f) {
            return i;
        }
        self.items.push((group, f.clone()));
        self.index.insert(f, self.items.len() - 1);
        self.items.len() - 1
    }
}

/// Location of a variable: its group and how far from that group's free variables it can be.
type Tags = BTreeMap<u32, (usize, u32)>;

struct Splitter<'a> {
    group_of: &'a [usize],
    threshold: u32,
}

impl Splitter<'_> {
    fn tag(&self, v: Var, tags: &Tags) -> (usize, u32) {
        match v {
            Var::Free(k) => (self.group_of[k as usize], 0),
            Var::Bound(id) => tags[&id],
        }
    }

    /// Lower bound (exclusive) on the distance between variables of different groups.
    fn gap(&self, a: (usize, u32), b: (usize, u32)) -> Option<u32> {
        (a.0 != b.0).then(|| self.threshold.saturating_sub(a.1 + b.1))
    }

    fn undecided(f: &Formula) -> Error {
        Error::Locality(format!("cannot separate '{f}' across distant variable groups"))
    }

    /// Decides every atom that relates two groups, and separates quantifiers from
    /// subformulas about other groups.
    fn resolve(&self, f: &Formula, tags: &mut Tags) -> Result<Formula> {
        Ok(match f {
            Formula::True | Formula::False => f.clone(),
            Formula::Atom { args, .. } => {
                for (i, &a) in args.iter().enumerate() {
                    for &b in &args[i + 1..] {
                        match self.gap(self.tag(a, tags), self.tag(b, tags)) {
                            Some(g) if g >= 1 => return Ok(Formula::False),
                            Some(_) => return Err(Self::undecided(f)),
                            None => {}
                        }
                    }
                }
                f.clone()
            }
            Formula::Eq(a, b) => match self.gap(self.tag(*a, tags), self.tag(*b, tags)) {
                Some(_) => Formula::False,
                None => f.clone(),
            },
            Formula::DistLe(a, b, r) | Formula::DistGt(a, b, r) => {
                match self.gap(self.tag(*a, tags), self.tag(*b, tags)) {
                    Some(g) if *r <= g => {
                        if matches!(f, Formula::DistLe(..)) {
                            Formula::False
                        } else {
                            Formula::True
                        }
                    }
                    Some(_) => return Err(Self::undecided(f)),
                    None => f.clone(),
                }
            }
            Formula::Not(g) => Formula::not(self.resolve(g, tags)?),
            Formula::And(gs) => Formula::and(gs.iter().map(|g| self.resolve(g, tags)).collect::<Result<Vec<_>>>()?),
            Formula::Or(gs) => Formula::or(gs.iter().map(|g| self.resolve(g, tags)).collect::<Result<Vec<_>>>()?),
            Formula::Exists { var, center, radius, body } | Formula::Forall { var, center, radius, body } => {
                let (g, off) = self.tag(*center, tags);
                let saved = tags.insert(*var, (g, off + radius));
                let body = self.resolve(body, tags)?;
                let out = self.separate(f, *var, *center, *radius, body, g, tags);
                match saved {
                    Some(s) => tags.insert(*var, s),
                    None => tags.remove(var),
                };
                out
            }
        })
    }

    /// Rebuilds a quantifier node, case-splitting on subformulas that belong to other groups.
    #[allow(clippy::too_many_arguments)]
    fn separate(&self, node: &Formula, var: u32, center: Var, radius: u32, body: Formula, group: usize, tags: &Tags) -> Formula {
        let rebuild = |body: Formula| match body {
            // The guard ball always contains its center, so constant bodies pass through.
            Formula::True | Formula::False => body,
            body if matches!(node, Formula::Exists { .. }) => {
                Formula::Exists { var, center, radius, body: Box::new(body) }
            }
            body => Formula::Forall { var, center, radius, body: Box::new(body) },
        };
        let Some(unit) = self.foreign_unit(&body, group, tags) else {
            return rebuild(body);
        };
        let when_true = self.separate(node, var, center, radius, replace(&body, &unit, &Formula::True), group, tags);
        let when_false = self.separate(node, var, center, radius, replace(&body, &unit, &Formula::False), group, tags);
        Formula::or([
            Formula::and([unit.clone(), when_true]),
            Formula::and([Formula::not(unit), when_false]),
        ])
    }

    fn groups_of(&self, f: &Formula, tags: &Tags, out: &mut BTreeSet<usize>) {
        let mut local = tags.clone();
        self.groups_rec(f, &mut local, out);
    }

    fn groups_rec(&self, f: &Formula, tags: &mut Tags, out: &mut BTreeSet<usize>) {
        let mut see = |v: &Var, tags: &Tags| {
            out.insert(self.tag(*v, tags).0);
        };
        match f {
            Formula::True | Formula::False => {}
            Formula::Atom { args, .. } => args.iter().for_each(|a| see(a, tags)),
            Formula::Eq(a, b) | Formula::DistLe(a, b, _) | Formula::DistGt(a, b, _) => {
                see(a, tags);
                see(b, tags);
            }
            Formula::Not(g) => self.groups_rec(g, tags, out),
            Formula::And(gs) | Formula::Or(gs) => gs.iter().for_each(|g| self.groups_rec(g, tags, out)),
            Formula::Exists { var, center, radius, body } | Formula::Forall { var, center, radius, body } => {
                let (g, off) = self.tag(*center, tags);
                out.insert(g);
                let saved = tags.insert(*var, (g, off + radius));
                self.groups_rec(body, tags, out);
                match saved {
                    Some(s) => tags.insert(*var, s),
                    None => tags.remove(var),
                };
            }
        }
    }

    /// A maximal subformula confined to a single group other than `group`.
    fn foreign_unit(&self, f: &Formula, group: usize, tags: &Tags) -> Option<Formula> {
        let mut gs = BTreeSet::new();
        self.groups_of(f, tags, &mut gs);
        if gs.len() == 1 && !gs.contains(&group) {
            return Some(f.clone());
        }
        if gs.is_empty() || (gs.len() == 1 && gs.contains(&group)) {
            return None;
        }
        match f {
            Formula::Not(g) => self.foreign_unit(g, group, tags),
            Formula::And(parts) | Formula::Or(parts) => {
                parts.iter().find_map(|g| self.foreign_unit(g, group, tags))
            }
            // Resolved quantifier nodes are already confined to their own group.
            _ => None,
        }
    }

    /// Indicator of `f` as a multilinear polynomial in group-pure leaves.
    fn indicator(&self, f: &Formula, leaves: &mut Leaves) -> BTreeMap<BTreeSet<usize>, i64> {
        let one = || BTreeMap::from([(BTreeSet::new(), 1i64)]);
        match f {
            Formula::True => return one(),
            Formula::False => return BTreeMap::new(),
            _ => {}
        }
        let mut gs = BTreeSet::new();
        self.groups_of(f, &BTreeMap::new(), &mut gs);
        if gs.len() <= 1 {
            let g = gs.into_iter().next().unwrap_or(0);
            return BTreeMap::from([(BTreeSet::from([leaves.intern(g, f.clone())]), 1)]);
        }
        match f {
            Formula::Not(g) => {
                let mut out = one();
                merge(&mut out, &self.indicator(g, leaves), -1);
                out
            }
            Formula::And(parts) => parts
                .iter()
                .fold(one(), |acc, g| multiply(&acc, &self.indicator(g, leaves))),
            Formula::Or(parts) => {
                // 1 - Π (1 - [g])
                let mut prod = one();
                for g in parts {
                    let mut neg = one();
                    merge(&mut neg, &self.indicator(g, leaves), -1);
                    prod = multiply(&prod, &neg);
                }
                let mut out = one();
                merge(&mut out, &prod, -1);
                out
            }
            _ => unreachable!("atoms and quantifiers are confined to one group after resolution"),
        }
    }
}

fn merge(acc: &mut BTreeMap<BTreeSet<usize>, i64>, other: &BTreeMap<BTreeSet<usize>, i64>, scale: i64) {
    for (m, c) in other {
        let e = acc.entry(m.clone()).or_insert(0);
        *e += c * scale;
        if *e == 0 {
            acc.remove(m);
        }
    }
}

fn multiply(
    a: &BTreeMap<BTreeSet<usize>, i64>,
    b: &BTreeMap<BTreeSet<usize>, i64>,
) -> BTreeMap<BTreeSet<usize>, i64> {
    let mut out = BTreeMap::new();
    for (ma, ca) in a {
        for (mb, cb) in b {
            let m: BTreeSet<usize> = ma.union(mb).copied().collect();
            let e = out.entry(m.clone()).or_insert(0);
            *e += ca * cb;
            if *e == 0 {
                out.remove(&m);
            }
        }
    }
    out
}

fn replace(f: &Formula, target: &Formula, by: &Formula) -> Formula {
    if f == target {
        return by.clone();
    }
    match f {
        Formula::Not(g) => Formula::not(replace(g, target, by)),
        Formula::And(gs) => Formula::and(gs.iter().map(|g| replace(g, target, by))),
        Formula::Or(gs) => Formula::or(gs.iter().map(|g| replace(g, target, by))),
        Formula::Exists { var, center, radius, body } => Formula::Exists {
            var: *var,
            center: *center,
            radius: *radius,
            body: Box::new(replace(body, target, by)),
        },
        Formula::Forall { var, center, radius, body } => Formula::Forall {
            var: *var,
            center: *center,
            radius: *radius,
            body: Box::new(replace(body, target, by)),
        },
        other => other.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::{parse_formula, stone_pairing};

    fn p(s: &str) -> Formula {
        parse_formula(s).unwrap()
    }

    fn check(f: &Formula, s: &Structure) {
        let poly = strongly_local_decomposition(f).unwrap();
        assert!(poly.degree() <= f.arity().max(1));
        let direct = stone_pairing(f, s).unwrap();
        let via = poly.evaluate(s).unwrap();
        assert!((direct - via).abs() < 1e-12, "{f}: {direct} vs {via}");
    }

    fn sample() -> Structure {
        let s = Structure::from_edges(
            6,
            &[(0, 1), (1, 2), (2, 3), (4, 5)],
            vec![0.1, 0.2, 0.05, 0.3, 0.15, 0.2],
        )
        .unwrap();
        s.mark("M", &s.vertex_set([0, 3, 4]).unwrap()).unwrap()
    }

    #[test]
    fn strongly_local_is_its_own_decomposition() {
        let f = p("adj(x1,x2)");
        let poly = strongly_local_decomposition(&f).unwrap();
        assert_eq!(poly.terms, vec![(1, vec![0])]);
        assert_eq!(poly.formulas[0], f);
    }

    #[test]
    fn two_edges() {
        let f = p("adj(x1,x2) & adj(x3,x4)");
        let poly = strongly_local_decomposition(&f).unwrap();
        assert!(poly.degree() <= 4);
        assert!(poly.terms.iter().any(|(_, m)| m.len() == 2));
        check(&f, &sample());
    }

    #[test]
    fn far_apart_marks() {
        check(&p("dist(x1,x2) > 2 & M(x1) & M(x2)"), &sample());
        check(&p("M(x1) | M(x2)"), &sample());
        check(&p("!adj(x1,x2) & x1 != x2"), &sample());
    }

    #[test]
    fn quantifiers_mixing_groups() {
        check(&p("exists y in B[1](x1): adj(x1,y) & (M(y) | M(x2))"), &sample());
        check(&p("forall y in B[1](x2): M(y) | adj(x1,y)"), &sample());
        check(&p("exists y in B[1](x1): exists z in B[1](x2): adj(y,z)"), &sample());
    }

    #[test]
    fn limits_are_enforced() {
        let f = p("M(x1) & M(x2) & M(x3) & M(x4) & M(x5) & M(x6) & M(x7)");
        assert!(matches!(strongly_local_decomposition(&f), Err(Error::Limit(_))));
        let g = p("dist(x1,x2) > 17");
        assert!(matches!(strongly_local_decomposition(&g), Err(Error::Limit(_))));
    }
}
