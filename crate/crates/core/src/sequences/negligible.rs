use serde::Serialize;

use super::{StructureSequence, SubsetSequence};
use crate::error::Result;
use crate::logic::{is_strongly_local, locality_radius, radius, stone_pairing, Formula};
use crate::structure::{Structure, VertexSet};

/// `nu(B[d](X_n))` for every index and `d = 0..=dmax`, with tail suprema.
#[derive(Clone, Debug, Serialize)]
pub struct NegligibleProfile {
    pub indices: Vec<usize>,
    /// One row per index, one column per radius.
    pub table: Vec<Vec<f64>>,
    pub window: Vec<usize>,
    /// Per radius, the largest value over the window.
    pub tail_sup: Vec<f64>,
    pub tol: f64,
    pub negligible: bool,
}

impl NegligibleProfile {
    pub fn row(&self, n: usize) -> Option<&[f64]> {
        self.indices.iter().position(|&i| i == n).map(|k| self.table[k].as_slice())
    }

    /// `index,d0,d1,...` rows.
    pub fn to_csv(&self) -> String {
        let dmax = self.tail_sup.len();
        let mut out = String::from("index");
        for d in 0..dmax {
            out.push_str(&format!(",d{d}"));
        }
        out.push('\n');
        for (n, row) in self.indices.iter().zip(&self.table) {
            out.push_str(&n.to_string());
            for v in row {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
        out
    }
}

pub fn negligible_profile(
    seq: &StructureSequence,
    x: &SubsetSequence,
    dmax: u32,
    window: f64,
    tol: f64,
) -> Result<NegligibleProfile> {
    x.check_aligned(seq)?;
    let indices = x.indices();
    let table = seq.map_indices(&indices, |n, s| s.ball_measures(x.get(n).expect("aligned"), dmax))?;
    let window = seq.window(window);
    let first = indices.len() - window.len();
    let tail_sup: Vec<f64> = (0..=dmax as usize)
        .map(|d| table[first..].iter().map(|row| row[d]).fold(0.0, f64::max))
        .collect();
    let negligible = tail_sup.iter().all(|&v| v < tol);
    Ok(NegligibleProfile { indices, table, window, tail_sup, tol, negligible })
}

/// Evidence for the pairing perturbation bound `|<phi, A> - <phi, A'>| < 2 p eps`.
#[derive(Clone, Debug, Serialize)]
pub struct BoundReport {
    /// `None` when the hypotheses hold; otherwise the first one that failed.
    pub precondition_failure: Option<String>,
    /// `nu(B[d](X))`, or of the separator for fragmentations.
    pub neighbourhood_measure: f64,
    pub formula_radius: u32,
    pub difference: Option<f64>,
    pub bound: f64,
    /// Only asserted when the hypotheses hold.
    pub holds: Option<bool>,
}

impl BoundReport {
    fn refused(reason: String, neighbourhood_measure: f64, formula_radius: u32, bound: f64) -> Self {
        BoundReport {
            precondition_failure: Some(reason),
            neighbourhood_measure,
            formula_radius,
            difference: None,
            bound,
            holds: None,
        }
    }
}

/// Compares `<phi, A>` with `<phi, A - X>` for a `(d, eps)`-negligible `X`.
pub fn check_negligible_bound(a: &Structure, x: &VertexSet, phi: &Formula, d: u32, eps: f64) -> Result<BoundReport> {
    let near = a.measure(&a.ball(x, Some(d))?);
    let r = locality_radius(phi);
    let p = phi.arity();
    let bound = 2.0 * p as f64 * eps;
    if p == 0 {
        return Ok(BoundReport::refused("formula has no free variable".into(), near, r, bound));
    }
    if near >= eps {
        return Ok(BoundReport::refused(
            format!("nu(B[{d}](X)) = {near} is not below {eps}"),
            near,
            r,
            bound,
        ));
    }
    if r >= d {
        return Ok(BoundReport::refused(format!("formula radius {r} is not below {d}"), near, r, bound));
    }
    let whole = stone_pairing(phi, a)?;
    let rest = if x.is_empty() { whole } else { stone_pairing(phi, &a.remove(x)?.0)? };
    let difference = (whole - rest).abs();
    Ok(BoundReport {
        precondition_failure: None,
        neighbourhood_measure: near,
        formula_radius: r,
        difference: Some(difference),
        bound,
        holds: Some(difference < bound),
    })
}

/// Compares `<phi, A>` with `sum_i nu(X_i)^p <phi, A[X_i]>` for a fragmentation
/// `(separator, parts...)`: parts pairwise non-adjacent, separator `(d, eps)`-negligible.
pub fn check_fragmentation_bound(
    a: &Structure,
    separator: &VertexSet,
    parts: &[VertexSet],
    phi: &Formula,
    d: u32,
    eps: f64,
) -> Result<BoundReport> {
    let near = a.measure(&a.ball(separator, Some(d))?);
    let r = radius(phi);
    let p = phi.arity();
    let bound = 2.0 * p as f64 * eps;
    let refuse = |why: String| Ok(BoundReport::refused(why, near, r, bound));
    let mut cover = separator.clone();
    for part in parts {
        a.check_set(part)?;
        if !cover.is_disjoint(part) {
            return refuse("parts overlap".into());
        }
        cover.union_with(part);
    }
    if cover.len() != a.len() {
        return refuse("parts and separator do not cover the domain".into());
    }
    for (i, part) in parts.iter().enumerate() {
        let halo = a.outer_boundary(part)?;
        if parts.iter().enumerate().any(|(j, other)| j != i && !halo.is_disjoint(other)) {
            return refuse(format!("part {i} is adjacent to another part"));
        }
    }
    if p == 0 {
        return refuse("formula has no free variable".into());
    }
    if !is_strongly_local(phi) {
        return refuse("formula is not strongly local".into());
    }
    if r > d {
        return refuse(format!("formula radius {r} exceeds {d}"));
    }
    if near >= eps {
        return refuse(format!("nu(B[{d}](S)) = {near} is not below {eps}"));
    }
    let whole = stone_pairing(phi, a)?;
    let mut sum = 0.0;
    for part in parts {
        let mass = a.measure(part);
        if mass > 0.0 {
            sum += mass.powi(p as i32) * stone_pairing(phi, &a.induce(part)?.0)?;
        }
    }
    let difference = (whole - sum).abs();
    Ok(BoundReport {
        precondition_failure: None,
        neighbourhood_measure: near,
        formula_radius: r,
        difference: Some(difference),
        bound,
        holds: Some(difference < bound),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::Family;
    use crate::logic::parse_formula;

    fn k10_k2() -> Structure {
        let mut edges = Vec::new();
        for u in 0..10 {
            for v in u + 1..10 {
                edges.push((u, v));
            }
        }
        edges.push((10, 11));
        Structure::from_edges(12, &edges, Structure::uniform_weights(12)).unwrap()
    }

    #[test]
    fn empty_and_full_profiles() {
        let seq = StructureSequence::from_generator(Family::Cycle {}, 2, 9).unwrap();
        let zero = negligible_profile(&seq, &SubsetSequence::zero(&seq).unwrap(), 3, 0.25, 0.05).unwrap();
        assert!(zero.negligible);
        assert!(zero.table.iter().flatten().all(|&v| v == 0.0));
        let full = negligible_profile(&seq, &SubsetSequence::full(&seq).unwrap(), 3, 0.25, 0.05).unwrap();
        assert!(!full.negligible);
        assert!(full.table.iter().flatten().all(|&v| (v - 1.0).abs() < 1e-12));
        assert!(full.to_csv().starts_with("index,d0,d1,d2,d3\n2,"));
    }

    #[test]
    fn k10_plus_k2() {
        let a = k10_k2();
        let x = a.vertex_set([10, 11]).unwrap();
        let phi = parse_formula("adj(x1,x2)").unwrap();
        let rep = check_negligible_bound(&a, &x, &phi, 1, 0.2).unwrap();
        assert!(rep.precondition_failure.is_none());
        let whole: f64 = (90.0 + 2.0) / 144.0;
        let rest = 90.0 / 100.0;
        assert!((rep.difference.unwrap() - (whole - rest).abs()).abs() < 1e-12);
        assert_eq!(rep.holds, Some(true));
        assert!((rep.bound - 0.8).abs() < 1e-15);
    }

    #[test]
    fn preconditions_are_reported() {
        let a = k10_k2();
        let phi = parse_formula("adj(x1,x2)").unwrap();
        let empty = check_negligible_bound(&a, &VertexSet::empty(12), &phi, 1, 0.2).unwrap();
        assert_eq!(empty.difference, Some(0.0));
        let heavy = check_negligible_bound(&a, &a.vertex_set([0]).unwrap(), &phi, 1, 0.2).unwrap();
        assert!(heavy.precondition_failure.is_some() && heavy.holds.is_none());
        let far = parse_formula("exists y in B[3](x1): adj(x1,y)").unwrap();
        let wide = check_negligible_bound(&a, &a.vertex_set([10, 11]).unwrap(), &far, 1, 0.2).unwrap();
        assert!(wide.precondition_failure.unwrap().contains("radius"));
    }

    #[test]
    fn fragmentation_of_k10_k2() {
        let a = k10_k2();
        let parts = [a.vertex_set(0..10).unwrap(), a.vertex_set([10, 11]).unwrap()];
        let phi = parse_formula("adj(x1,x2)").unwrap();
        let rep = check_fragmentation_bound(&a, &VertexSet::empty(12), &parts, &phi, 1, 0.01).unwrap();
        assert!(rep.precondition_failure.is_none());
        assert!(rep.difference.unwrap() < 1e-12);
        let overlapping = [a.vertex_set(0..11).unwrap(), a.vertex_set([10, 11]).unwrap()];
        let bad = check_fragmentation_bound(&a, &VertexSet::empty(12), &overlapping, &phi, 1, 0.01).unwrap();
        assert!(bad.precondition_failure.is_some());
    }
}
