//! Distributions of ball measures `D_d(v) = nu(B[d](v))` and the atoms of their limits.

mod detect;
mod fourier;
mod lift;

pub use detect::{detect_spectrum, MomentCheck, SpectralAtom, SpectrumReport};
pub use fourier::{
    atom_mass, characteristic_function, characteristic_function_direct, uniform_grid, AtomMass,
    CharacteristicFunction,
};
pub use lift::{random_lift_distribution, vector_distance, LiftDistribution, LiftPoint};

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::logic::{parse_formula, Formula};
use crate::structure::Structure;

/// Largest moment order accepted by [`moment_table`].
pub const MAX_MOMENT: usize = 64;

/// Right-continuous step function of a finite weighted sample.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EmpiricalCDF {
    values: Vec<f64>,
    weights: Vec<f64>,
    cumulative: Vec<f64>,
}

impl EmpiricalCDF {
    /// Equal values are merged; zero weights are kept so the support is the full sample.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (f64, f64)>) -> Self {
        let mut pairs: Vec<(f64, f64)> = pairs.into_iter().collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut values: Vec<f64> = Vec::new();
        let mut weights: Vec<f64> = Vec::new();
        for (v, w) in pairs {
            match values.last() {
                Some(&last) if last == v => *weights.last_mut().expect("parallel vectors") += w,
                _ => {
                    values.push(v);
                    weights.push(w);
                }
            }
        }
        let cumulative = weights
            .iter()
            .scan(0.0, |acc, w| {
                *acc += w;
                Some(*acc)
            })
            .collect();
        EmpiricalCDF { values, weights, cumulative }
    }

    /// Total weight of values `<= t`.
    pub fn eval(&self, t: f64) -> f64 {
        match self.values.partition_point(|&v| v <= t) {
            0 => 0.0,
            k => self.cumulative[k - 1],
        }
    }

    /// Distinct values with their weights, ascending.
    pub fn jumps(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.values.iter().copied().zip(self.weights.iter().copied())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.jumps().map(|(v, w)| v * w).sum()
    }

    pub fn max_value(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }

    /// `t,F` rows at every jump.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,F\n");
        for (v, c) in self.values.iter().zip(&self.cumulative) {
            out.push_str(&format!("{v},{c}\n"));
        }
        out
    }

    /// Groups the jumps into runs separated by gaps above `merge`; each run yields its
    /// weighted centre and total weight.
    pub fn clusters(&self, merge: f64) -> Vec<(f64, f64)> {
        let mut out: Vec<(f64, f64)> = Vec::new();
        let mut run: Vec<(f64, f64)> = Vec::new();
        let flush = |run: &mut Vec<(f64, f64)>, out: &mut Vec<(f64, f64)>| {
            if run.is_empty() {
                return;
            }
            let mass: f64 = run.iter().map(|p| p.1).sum();
            let centre = if mass > 0.0 {
                run.iter().map(|(v, w)| v * w).sum::<f64>() / mass
            } else {
                run.iter().map(|p| p.0).sum::<f64>() / run.len() as f64
            };
            out.push((centre, mass));
            run.clear();
        };
        for (v, w) in self.jumps() {
            if run.last().is_some_and(|&(prev, _)| v - prev > merge) {
                flush(&mut run, &mut out);
            }
            run.push((v, w));
        }
        flush(&mut run, &mut out);
        out
    }
}

/// `D_d(v)` for every vertex and every radius of a schedule.
#[derive(Clone, Debug, Serialize)]
pub struct BallMeasureSample {
    pub schedule: Vec<u32>,
    pub weights: Vec<f64>,
    /// `values[k][v]` is the measure of the radius-`schedule[k]` ball around `v`.
    pub values: Vec<Vec<f64>>,
}

impl BallMeasureSample {
    pub fn new(a: &Structure, schedule: &[u32]) -> Self {
        let dmax = schedule.iter().copied().max().unwrap_or(0);
        let per_vertex: Vec<Vec<f64>> = (0..a.len())
            .into_par_iter()
            .map(|v| {
                let profile = a.ball_measures_unchecked(std::iter::once(v), dmax);
                // summation order can push a full ball a rounding error above one
                schedule.iter().map(|&d| profile[d as usize].min(1.0)).collect()
            })
            .collect();
        let values = (0..schedule.len())
            .map(|k| per_vertex.iter().map(|row| row[k]).collect())
            .collect();
        BallMeasureSample { schedule: schedule.to_vec(), weights: a.weights().to_vec(), values }
    }

    pub fn cdf(&self, k: usize) -> EmpiricalCDF {
        EmpiricalCDF::from_pairs(self.values[k].iter().copied().zip(self.weights.iter().copied()))
    }

    /// `Pr(t1 < D_{d1} <= D_{d2} <= t2)` for schedule positions `k1 < k2`.
    pub fn interval_probability(&self, k1: usize, k2: usize, t1: f64, t2: f64) -> f64 {
        (0..self.weights.len())
            .filter(|&v| {
                let (a, b) = (self.values[k1][v], self.values[k2][v]);
                t1 < a && a <= b && b <= t2
            })
            .map(|v| self.weights[v])
            .sum()
    }
}

/// Law of `D_d(v)` for `v` drawn from the vertex measure.
pub fn ball_measure_distribution(a: &Structure, d: u32) -> EmpiricalCDF {
    BallMeasureSample::new(a, &[d]).cdf(0)
}

/// `m_w = E_v[D_d(v)^w]` for `w = 0..=W`.
#[derive(Clone, Debug, Serialize)]
pub struct MomentTable {
    pub radius: u32,
    pub moments: Vec<f64>,
    /// Largest value of `D_d`, which sharpens the series truncation bound.
    pub support_max: f64,
}

pub fn moment_table(a: &Structure, d: u32, order: usize) -> Result<MomentTable> {
    moments_of(&ball_measure_distribution(a, d), d, order)
}

pub(crate) fn moments_of(cdf: &EmpiricalCDF, d: u32, order: usize) -> Result<MomentTable> {
    if order > MAX_MOMENT {
        return Err(Error::Limit(format!("moment order {order} exceeds {MAX_MOMENT}")));
    }
    let moments = (0..=order)
        .map(|w| if w == 0 { cdf.jumps().map(|j| j.1).sum() } else { cdf.jumps().map(|(v, p)| p * v.powi(w as i32)).sum() })
        .collect();
    Ok(MomentTable { radius: d, moments, support_max: cdf.max_value() })
}

/// The formula whose pairing is the `w`-th moment of `D_d`: `x2..x(w+1)` all lie within
/// distance `d` of `x1`.
pub fn moment_formula(d: u32, w: usize) -> Formula {
    let text = if w == 0 {
        format!("dist(x1,x1) <= {d}")
    } else {
        (2..=w + 1).map(|i| format!("dist(x1,x{i}) <= {d}")).collect::<Vec<_>>().join(" & ")
    };
    parse_formula(&text).expect("moment formula parses")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::stone_pairing;

    fn graph(n: usize, edges: &[(usize, usize)]) -> Structure {
        Structure::from_edges(n, edges, Structure::uniform_weights(n)).unwrap()
    }

    #[test]
    fn two_edges_give_a_point_mass() {
        let f = ball_measure_distribution(&graph(4, &[(0, 1), (2, 3)]), 1);
        assert_eq!(f.jumps().collect::<Vec<_>>(), vec![(0.5, 1.0)]);
        assert_eq!(f.eval(0.49), 0.0);
        assert_eq!(f.eval(0.5), 1.0);
    }

    #[test]
    fn complete_graph_is_a_point_mass_at_one() {
        let edges: Vec<_> = (0..7).flat_map(|u| (u + 1..7).map(move |v| (u, v))).collect();
        let k7 = graph(7, &edges);
        for d in 1..4 {
            let f = ball_measure_distribution(&k7, d);
            assert!(f.jumps().all(|(v, _)| (v - 1.0).abs() < 1e-12));
            assert!((f.eval(1.0) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn path_of_four() {
        let p4 = graph(4, &[(0, 1), (1, 2), (2, 3)]);
        let f = ball_measure_distribution(&p4, 1);
        assert_eq!(f.jumps().collect::<Vec<_>>(), vec![(0.5, 0.5), (0.75, 0.5)]);
        assert_eq!(f.to_csv(), "t,F\n0.5,0.5\n0.75,1\n");
        let m = moment_table(&p4, 1, 2).unwrap();
        assert_eq!(m.moments[0], 1.0);
        assert!((m.moments[2] - 0.40625).abs() < 1e-15);
        let psi = stone_pairing(&moment_formula(1, 2), &p4).unwrap();
        assert!((psi - 0.40625).abs() < 1e-12);
        assert!(moment_table(&p4, 1, 65).is_err());
    }

    #[test]
    fn point_mass_moments() {
        let m = moment_table(&graph(4, &[(0, 1), (2, 3)]), 1, 10).unwrap();
        for (w, mw) in m.moments.iter().enumerate() {
            assert!((mw - 0.5f64.powi(w as i32)).abs() < 1e-15);
        }
    }

    #[test]
    fn clusters_split_on_gaps() {
        let f = EmpiricalCDF::from_pairs([(0.1, 0.2), (0.11, 0.2), (0.5, 0.6)]);
        let c = f.clusters(0.02);
        assert_eq!(c.len(), 2);
        assert!((c[0].0 - 0.105).abs() < 1e-12 && (c[0].1 - 0.4).abs() < 1e-12);
    }

    #[test]
    fn sandwich_on_a_path() {
        let edges: Vec<_> = (0..11).map(|i| (i, i + 1)).collect();
        let s = BallMeasureSample::new(&graph(12, &edges), &[1, 2]);
        let (f1, f2) = (s.cdf(0), s.cdf(1));
        for (t1, t2) in [(0.1, 0.3), (0.2, 0.45), (0.0, 1.0)] {
            let p = s.interval_probability(0, 1, t1, t2);
            assert!(f2.eval(t2) - f1.eval(t1) <= p + 1e-12);
            assert!(p <= f1.eval(t2) - f1.eval(t1) + 1e-12);
        }
    }
}
