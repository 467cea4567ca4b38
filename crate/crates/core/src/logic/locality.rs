//! Syntactic locality: how far from its free variables a formula looks, and which
//! distance bounds between free variables every satisfying tuple obeys.

use std::collections::{BTreeMap, BTreeSet};

use super::ast::{Formula, Var};

/// Radius `r` such that truth at a tuple only depends on the `r`-ball around it.
///
/// Atoms and equalities read only the tuple itself; a distance guard of radius `r`
/// needs paths of length `r`; a quantifier over `B[r](c)` adds `r` to its body.
pub fn locality_radius(f: &Formula) -> u32 {
    match f {
        Formula::True | Formula::False | Formula::Atom { .. } | Formula::Eq(..) => 0,
        Formula::DistLe(_, _, r) | Formula::DistGt(_, _, r) => *r,
        Formula::Not(g) => locality_radius(g),
        Formula::And(gs) | Formula::Or(gs) => gs.iter().map(locality_radius).max().unwrap_or(0),
        Formula::Exists { radius, body, .. } | Formula::Forall { radius, body, .. } => {
            radius + locality_radius(body)
        }
    }
}

/// Pairwise distance bounds implied by a formula, closed under the triangle inequality.
///
/// `None` stands for "unsatisfiable", which implies every bound.
pub type Bounds = Option<BTreeMap<(Var, Var), u32>>;

fn key(a: Var, b: Var) -> (Var, Var) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

fn closure(map: &mut BTreeMap<(Var, Var), u32>) {
    let vars: Vec<Var> = map
        .keys()
        .flat_map(|&(a, b)| [a, b])
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    for &k in &vars {
        for &i in &vars {
            let Some(&ik) = map.get(&key(i, k)).or(if i == k { Some(&0) } else { None }) else {
                continue;
            };
            for &j in &vars {
                if i == j {
                    continue;
                }
                let Some(&kj) = map.get(&key(k, j)).or(if k == j { Some(&0) } else { None }) else {
                    continue;
                };
                let through = ik.saturating_add(kj);
                let e = map.entry(key(i, j)).or_insert(u32::MAX);
                *e = (*e).min(through);
            }
        }
    }
}

fn meet(parts: impl IntoIterator<Item = Bounds>) -> Bounds {
    let mut out = BTreeMap::new();
    for p in parts {
        let p = p?;
        for (k, v) in p {
            let e = out.entry(k).or_insert(u32::MAX);
            *e = (*e).min(v);
        }
    }
    closure(&mut out);
    Some(out)
}

fn join(parts: impl IntoIterator<Item = Bounds>) -> Bounds {
    let mut acc: Bounds = None;
    for p in parts {
        acc = match (acc, p) {
            (None, p) => p,
            (a, None) => a,
            (Some(a), Some(b)) => Some(
                a.into_iter()
                    .filter_map(|(k, v)| b.get(&k).map(|&w| (k, v.max(w))))
                    .collect(),
            ),
        };
    }
    acc
}

fn project_out(b: Bounds, var: u32, center: Var, radius: u32) -> Bounds {
    let mut m = b?;
    let y = Var::Bound(var);
    let e = m.entry(key(y, center)).or_insert(u32::MAX);
    *e = (*e).min(radius);
    closure(&mut m);
    m.retain(|&(a, b), _| a != y && b != y);
    Some(m)
}

/// Bounds entailed by `f`.
pub fn bounds(f: &Formula) -> Bounds {
    match f {
        Formula::True | Formula::DistGt(..) => Some(BTreeMap::new()),
        Formula::False => None,
        Formula::Atom { args, .. } => {
            let mut m = BTreeMap::new();
            for (i, &a) in args.iter().enumerate() {
                for &b in &args[i + 1..] {
                    if a != b {
                        m.insert(key(a, b), 1);
                    }
                }
            }
            closure(&mut m);
            Some(m)
        }
        Formula::Eq(a, b) | Formula::DistLe(a, b, _) if a == b => Some(BTreeMap::new()),
        Formula::Eq(a, b) => Some(BTreeMap::from([(key(*a, *b), 0)])),
        Formula::DistLe(a, b, r) => Some(BTreeMap::from([(key(*a, *b), *r)])),
        Formula::Not(g) => negated_bounds(g),
        Formula::And(gs) => meet(gs.iter().map(bounds)),
        Formula::Or(gs) => join(gs.iter().map(bounds)),
        Formula::Exists { var, center, radius, body } => project_out(bounds(body), *var, *center, *radius),
        // The guard ball always contains its center, so the body holds with y := center.
        Formula::Forall { var, center, body, .. } => bounds(&body.substitute_bound(*var, *center)),
    }
}

fn negated_bounds(f: &Formula) -> Bounds {
    match f {
        Formula::True => None,
        Formula::DistGt(a, b, r) if a != b => Some(BTreeMap::from([(key(*a, *b), *r)])),
        Formula::Not(g) => bounds(g),
        Formula::Or(gs) => meet(gs.iter().map(negated_bounds)),
        Formula::And(gs) => join(gs.iter().map(negated_bounds)),
        Formula::Forall { var, center, radius, body } => {
            project_out(negated_bounds(body), *var, *center, *radius)
        }
        _ => Some(BTreeMap::new()),
    }
}

/// Bounds between free variables only, as a matrix over `0..arity`.
pub fn free_bounds(f: &Formula) -> Vec<Vec<Option<u32>>> {
    let p = f.arity();
    let mut out = vec![vec![None; p]; p];
    for (i, row) in out.iter_mut().enumerate() {
        row[i] = Some(0);
    }
    match bounds(f) {
        None => {
            for row in &mut out {
                row.iter_mut().for_each(|c| *c = Some(0));
            }
        }
        Some(m) => {
            for ((a, b), d) in m {
                if let (Var::Free(i), Var::Free(j)) = (a, b) {
                    out[i as usize][j as usize] = Some(d);
                    out[j as usize][i as usize] = Some(d);
                }
            }
        }
    }
    out
}

/// Largest entailed distance between two free variables, if all pairs are bounded.
pub fn span(f: &Formula) -> Option<u32> {
    let m = free_bounds(f);
    let mut worst = 0;
    for row in &m {
        for c in row {
            worst = worst.max((*c)?);
        }
    }
    Some(worst)
}

/// Reported radius: large enough both for locality and for the strong-locality bound.
pub fn radius(f: &Formula) -> u32 {
    locality_radius(f).max(span(f).unwrap_or(0))
}

/// Every pair of free variables is tied together by a chain of guards.
pub fn is_strongly_local(f: &Formula) -> bool {
    span(f).is_some()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::parse_formula;

    fn p(s: &str) -> Formula {
        parse_formula(s).unwrap()
    }

    #[test]
    fn radius_examples() {
        let f = p("adj(x1,x2)");
        assert_eq!(radius(&f), 1);
        assert_eq!(locality_radius(&f), 0);
        assert!(is_strongly_local(&f));

        let g = p("exists y in B[2](x1): adj(x1,y)");
        assert_eq!(radius(&g), 2);
        assert!(is_strongly_local(&g));

        let h = p("adj(x1,x2) & adj(x3,x4)");
        assert!(!is_strongly_local(&h));
        assert_eq!(radius(&h), 0);
    }

    #[test]
    fn chains_through_quantifiers() {
        let f = p("exists y in B[2](x1): dist(y,x2) <= 3");
        assert_eq!(span(&f), Some(5));
        let g = p("adj(x1,x2) | dist(x1,x2) <= 4");
        assert_eq!(span(&g), Some(4));
        let h = p("adj(x1,x2) | M(x1)");
        assert_eq!(span(&h), None);
        let k = p("!(dist(x1,x2) > 3) & x2 = x3");
        assert_eq!(span(&k), Some(3));
        assert!(is_strongly_local(&p("false & M(x3)")));
    }
}
