use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use super::{EmpiricalCDF, MomentTable};
use crate::error::{input, Result};

/// `points` equally spaced values covering `[-t_max, t_max]`.
pub fn uniform_grid(t_max: f64, points: usize) -> Vec<f64> {
    let points = points.max(2);
    let step = 2.0 * t_max / (points - 1) as f64;
    (0..points).map(|k| -t_max + step * k as f64).collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct CharacteristicFunction {
    pub grid: Vec<f64>,
    #[serde(serialize_with = "complex_pairs")]
    pub values: Vec<Complex64>,
    /// Bound on the series remainder: `(T s)^(W+1) / (W+1)!` with `s` the largest value.
    pub truncation_bound: f64,
    /// Set when the bound exceeds the requested tolerance.
    pub lossy: bool,
}

fn complex_pairs<S: serde::Serializer>(values: &[Complex64], s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(values.len()))?;
    for z in values {
        seq.serialize_element(&[z.re, z.im])?;
    }
    seq.end()
}

impl CharacteristicFunction {
    /// Largest modulus of the difference from another tabulation on the same grid.
    pub fn max_deviation(&self, other: &[Complex64]) -> f64 {
        self.values.iter().zip(other).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }
}

/// The truncated moment series `sum_w m_w (i t)^w / w!`.
pub fn characteristic_function(m: &MomentTable, grid: &[f64], tol: f64) -> CharacteristicFunction {
    let order = m.moments.len();
    let t_max = grid.iter().fold(0.0f64, |a, t| a.max(t.abs()));
    let x = t_max * m.support_max.max(0.0);
    // x^(W+1) / (W+1)! built up as a product to avoid overflow
    let truncation_bound = (1..=order).fold(1.0, |acc, k| acc * x / k as f64);
    let values = grid
        .iter()
        .map(|&t| {
            let mut term = Complex64::new(1.0, 0.0);
            let mut sum = Complex64::new(0.0, 0.0);
            for (w, mw) in m.moments.iter().enumerate() {
                if w > 0 {
                    term *= Complex64::new(0.0, t) / w as f64;
                }
                sum += term * mw;
            }
            sum
        })
        .collect();
    CharacteristicFunction { grid: grid.to_vec(), values, truncation_bound, lossy: truncation_bound > tol }
}

/// `sum_v nu(v) exp(i t D(v))` evaluated exactly.
pub fn characteristic_function_direct(cdf: &EmpiricalCDF, grid: &[f64]) -> Vec<Complex64> {
    let jumps: Vec<(f64, f64)> = cdf.jumps().collect();
    grid.par_iter()
        .map(|&t| jumps.iter().map(|&(v, w)| Complex64::from_polar(w, t * v)).sum())
        .collect()
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct AtomMass {
    pub mass: f64,
    /// Imaginary part of the quadrature, zero up to numerical error.
    pub imaginary: f64,
}

/// Trapezoid approximation of `(1/2T) int_{-T}^{T} exp(-i t a) gamma(t) dt`, which tends to
/// the mass at `a` as `T` grows.
pub fn atom_mass(grid: &[f64], gamma: &[Complex64], a: f64, support: f64) -> Result<AtomMass> {
    if grid.len() < 2 || grid.len() != gamma.len() {
        return input("the grid needs at least two points and one value per point");
    }
    let t_max = grid[grid.len() - 1];
    let step = (grid[grid.len() - 1] - grid[0]) / (grid.len() - 1) as f64;
    if (grid[0] + t_max).abs() > 1e-9 * t_max.max(1.0)
        || grid.windows(2).any(|w| ((w[1] - w[0]) - step).abs() > 1e-6 * step)
    {
        return input("the grid must be uniform and symmetric about zero");
    }
    let reach = support.abs().max(a.abs());
    if reach > 0.0 && step > PI / (4.0 * reach) {
        return input(format!("grid step {step} is too coarse for values up to {reach}"));
    }
    let f = |k: usize| Complex64::from_polar(1.0, -grid[k] * a) * gamma[k];
    let inner: Complex64 = (1..grid.len() - 1).map(f).sum();
    let integral = (inner + (f(0) + f(grid.len() - 1)) * 0.5) * step;
    let z = integral / (2.0 * t_max);
    Ok(AtomMass { mass: z.re, imaginary: z.im })
}

#[cfg(test)]
mod tests {
    use super::super::moments_of;
    use super::*;

    fn mixture() -> EmpiricalCDF {
        EmpiricalCDF::from_pairs([(0.3, 0.5), (0.7, 0.5)])
    }

    #[test]
    fn series_matches_closed_form() {
        let cdf = mixture();
        let m = moments_of(&cdf, 1, 40).unwrap();
        let grid = uniform_grid(20.0, 401);
        let series = characteristic_function(&m, &grid, 0.01);
        assert!(!series.lossy, "bound {}", series.truncation_bound);
        let exact: Vec<Complex64> = grid
            .iter()
            .map(|&t| Complex64::from_polar(0.5, 0.3 * t) + Complex64::from_polar(0.5, 0.7 * t))
            .collect();
        assert!(series.max_deviation(&exact) <= series.truncation_bound + 1e-9);
        assert!(series.max_deviation(&characteristic_function_direct(&cdf, &grid)) <= series.truncation_bound + 1e-9);
        let at_zero = characteristic_function(&m, &[0.0], 1e-6);
        assert!((at_zero.values[0] - 1.0).norm() < 1e-15);
    }

    #[test]
    fn point_mass_series() {
        let cdf = EmpiricalCDF::from_pairs([(0.4, 1.0)]);
        let m = moments_of(&cdf, 1, 30).unwrap();
        let grid = uniform_grid(5.0, 11);
        let c = characteristic_function(&m, &grid, 1e-9);
        for (t, z) in grid.iter().zip(&c.values) {
            assert!((z - Complex64::from_polar(1.0, 0.4 * t)).norm() < 1e-12);
        }
        assert!(characteristic_function(&m, &uniform_grid(200.0, 11), 1e-9).lossy);
    }

    #[test]
    fn inversion_recovers_atoms() {
        let cdf = mixture();
        for (t, tol) in [(200.0, 0.05), (2000.0, 0.01)] {
            let grid = uniform_grid(t, 32768 * if t > 1000.0 { 8 } else { 1 });
            let gamma = characteristic_function_direct(&cdf, &grid);
            let p = atom_mass(&grid, &gamma, 0.3, 0.7).unwrap();
            assert!((p.mass - 0.5).abs() < tol, "T={t}: {}", p.mass);
            assert!(p.imaginary.abs() < 1e-6);
            let off = atom_mass(&grid, &gamma, 0.5, 0.7).unwrap();
            assert!(off.mass.abs() < tol);
        }
        let point = EmpiricalCDF::from_pairs([(0.6, 1.0)]);
        let grid = uniform_grid(200.0, 32768);
        let p = atom_mass(&grid, &characteristic_function_direct(&point, &grid), 0.6, 0.6).unwrap();
        assert!((p.mass - 1.0).abs() < 0.05);
    }

    #[test]
    fn coarse_grid_is_rejected() {
        let grid = uniform_grid(200.0, 101);
        let gamma = characteristic_function_direct(&mixture(), &grid);
        assert!(atom_mass(&grid, &gamma, 0.3, 0.7).is_err());
    }
}
