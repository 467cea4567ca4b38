use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{input, Result};
use crate::logic::{local_stone_pairings, Formula};
use crate::structure::Structure;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LiftPoint {
    pub coordinates: Vec<f64>,
    pub mass: f64,
}

/// Law of the local pairing vector `(<phi_1, A>_v, ..., <phi_k, A>_v)` for `v ~ nu`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LiftDistribution {
    pub dimension: usize,
    /// Distinct vectors in lexicographic order.
    pub points: Vec<LiftPoint>,
}

pub fn random_lift_distribution(a: &Structure, battery: &[Formula]) -> Result<LiftDistribution> {
    if let Some(f) = battery.iter().find(|f| f.arity() == 0) {
        return input(format!("'{f}' has no free variable"));
    }
    let columns = battery.iter().map(|f| local_stone_pairings(f, a)).collect::<Result<Vec<_>>>()?;
    let mut rows: Vec<(Vec<f64>, f64)> = (0..a.len())
        .map(|v| (columns.iter().map(|c| c[v]).collect(), a.weight(v)))
        .collect();
    rows.sort_by(|x, y| {
        x.0.iter().zip(&y.0).map(|(p, q)| p.total_cmp(q)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut points: Vec<LiftPoint> = Vec::new();
    for (coordinates, mass) in rows {
        match points.last_mut() {
            Some(last) if last.coordinates == coordinates => last.mass += mass,
            _ => points.push(LiftPoint { coordinates, mass }),
        }
    }
    Ok(LiftDistribution { dimension: battery.len(), points })
}

impl LiftDistribution {
    /// Total variation between the histograms on a partition of the unit cube into boxes of
    /// side `1/boxes`.
    pub fn box_distance(&self, other: &LiftDistribution, boxes: usize) -> Result<f64> {
        if self.dimension != other.dimension {
            return input(format!("dimensions differ: {} and {}", self.dimension, other.dimension));
        }
        if boxes == 0 {
            return input("at least one box per side is needed");
        }
        let cell = |x: &[f64]| -> Vec<usize> {
            x.iter().map(|&c| ((c * boxes as f64).floor().max(0.0) as usize).min(boxes - 1)).collect()
        };
        let mut diff: BTreeMap<Vec<usize>, f64> = BTreeMap::new();
        for p in &self.points {
            *diff.entry(cell(&p.coordinates)).or_default() += p.mass;
        }
        for p in &other.points {
            *diff.entry(cell(&p.coordinates)).or_default() -= p.mass;
        }
        Ok(diff.values().map(|d| d.abs()).sum::<f64>() / 2.0)
    }

    pub fn mean(&self) -> Vec<f64> {
        (0..self.dimension).map(|k| self.points.iter().map(|p| p.mass * p.coordinates[k]).sum()).collect()
    }
}

/// Distance between pairing vectors: the least `eps` with `|x_i - y_i| <= eps` for every
/// coordinate `i <= 1/eps`.
pub fn vector_distance(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len().min(y.len());
    let mut best = 1.0f64;
    let mut prefix_max = 0.0f64;
    // on (1/(k+1), 1/k] only the first k coordinates are constrained
    for k in 1..=n {
        prefix_max = prefix_max.max((x[k - 1] - y[k - 1]).abs());
        let lower = if k == n { 0.0 } else { 1.0 / (k + 1) as f64 };
        let eps = lower.max(prefix_max);
        if eps <= 1.0 / k as f64 {
            best = best.min(eps);
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::parse_formula;

    fn p3() -> Structure {
        Structure::from_edges(3, &[(0, 1), (1, 2)], Structure::uniform_weights(3)).unwrap()
    }

    #[test]
    fn trivial_battery() {
        let d = random_lift_distribution(&p3(), &[parse_formula("x1 = x1").unwrap()]).unwrap();
        assert_eq!(d.points.len(), 1);
        assert_eq!(d.points[0].coordinates, vec![1.0]);
        assert!((d.points[0].mass - 1.0).abs() < 1e-15);
    }

    #[test]
    fn adjacency_on_a_path() {
        let d = random_lift_distribution(&p3(), &[parse_formula("adj(x1,x2)").unwrap()]).unwrap();
        assert_eq!(d.points.len(), 2);
        assert!((d.points[0].coordinates[0] - 1.0 / 3.0).abs() < 1e-15);
        assert!((d.points[0].mass - 2.0 / 3.0).abs() < 1e-15);
        assert!((d.points[1].coordinates[0] - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(d.box_distance(&d, 10).unwrap(), 0.0);
    }

    #[test]
    fn sentences_rejected() {
        assert!(random_lift_distribution(&p3(), &[parse_formula("true").unwrap()]).is_err());
    }

    #[test]
    fn vector_metric() {
        assert_eq!(vector_distance(&[0.5, 0.2], &[0.5, 0.2]), 0.0);
        // a large gap in the second coordinate only matters below eps = 1/2
        assert_eq!(vector_distance(&[0.0, 0.0], &[0.0, 0.9]), 0.5);
        assert!((vector_distance(&[0.1], &[0.0]) - 0.1).abs() < 1e-15);
    }
}
