use serde::Serialize;

use super::fourier::{atom_mass, characteristic_function, characteristic_function_direct, uniform_grid};
use super::{moments_of, BallMeasureSample, EmpiricalCDF};
use crate::config::Config;
use crate::error::{input, Result};
use crate::sequences::StructureSequence;

#[derive(Clone, Debug, Serialize)]
pub struct SpectralAtom {
    /// Median centre across the probed cells.
    pub lambda: f64,
    /// Mean mass of the atom across the probed cells.
    pub mass: f64,
    /// `round(mass / lambda)`: how many limit components share this measure.
    pub count: usize,
    pub residue: f64,
    /// The mass recovered by Fourier inversion on the reference cell.
    pub inversion_mass: f64,
    pub inversion_imaginary: f64,
    /// `(index, radius, centre, mass)` in every probed cell.
    pub cells: Vec<(usize, u32, f64, f64)>,
}

/// The truncated moment series on `[-t_max, t_max]` against the direct exponential sum.
#[derive(Clone, Debug, Serialize)]
pub struct MomentCheck {
    pub t_max: f64,
    pub order: usize,
    pub truncation_bound: f64,
    pub max_deviation: f64,
    pub lossy: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct SpectrumReport {
    /// Atoms in decreasing order of `lambda`.
    pub atoms: Vec<SpectralAtom>,
    /// `1 - sum count * lambda`, the mass not carried by any limit component.
    pub residual: f64,
    /// Probe points in `(0, 1)` at least `merge` away from every atom.
    pub continuity_grid: Vec<f64>,
    /// Some rounding residue exceeded the configured limit.
    pub unstable: bool,
    pub warnings: Vec<String>,
    pub window: Vec<usize>,
    /// Radii probed at every window index.
    pub radii: Vec<u32>,
    pub moment_check: MomentCheck,
    pub config: Config,
    /// Ball-measure CDF of the reference cell (last index, largest radius).
    #[serde(skip)]
    pub reference: EmpiricalCDF,
}

const MOMENT_CHECK_T: f64 = 20.0;

/// Estimates the limit atoms of the ball-measure distribution from the tail of a sequence.
pub fn detect_spectrum(seq: &StructureSequence, cfg: &Config) -> Result<SpectrumReport> {
    if cfg.d_schedule.is_empty() {
        return input("the radius schedule is empty");
    }
    let window = seq.window(cfg.window);
    let radii: Vec<u32> = cfg.d_schedule[cfg.d_schedule.len() / 2..].to_vec();
    let cdfs: Vec<Vec<EmpiricalCDF>> = seq.map_indices(&window, |_, s| {
        let sample = BallMeasureSample::new(s, &radii);
        Ok((0..radii.len()).map(|k| sample.cdf(k)).collect())
    })?;
    let cells: Vec<(usize, u32, Vec<(f64, f64)>)> = window
        .iter()
        .zip(&cdfs)
        .flat_map(|(&n, row)| radii.iter().zip(row).map(move |(&d, cdf)| (n, d, cdf.clusters(cfg.merge))))
        .collect();
    let reference = cdfs.last().and_then(|row| row.last()).cloned().expect("non-empty window and schedule");
    let mut warnings = Vec::new();

    let candidates: Vec<(f64, f64)> = cells
        .last()
        .expect("non-empty")
        .2
        .iter()
        .copied()
        .filter(|&(centre, mass)| centre >= cfg.lambda_min && mass >= centre - cfg.tol)
        .collect();

    let grid = uniform_grid(cfg.inversion_t, cfg.grid);
    let gamma = characteristic_function_direct(&reference, &grid);
    let support = reference.max_value();

    let mut atoms = Vec::new();
    for (centre, _) in candidates {
        let mut found = Vec::new();
        for (n, d, clusters) in &cells {
            match clusters.iter().find(|c| (c.0 - centre).abs() <= cfg.merge) {
                Some(&(c, m)) => found.push((*n, *d, c, m)),
                None => break,
            }
        }
        if found.len() < cells.len() {
            continue;
        }
        let mut centres: Vec<f64> = found.iter().map(|c| c.2).collect();
        centres.sort_by(f64::total_cmp);
        let lambda = if centres.len() % 2 == 1 {
            centres[centres.len() / 2]
        } else {
            (centres[centres.len() / 2 - 1] + centres[centres.len() / 2]) / 2.0
        };
        let mass = found.iter().map(|c| c.3).sum::<f64>() / found.len() as f64;
        let ratio = mass / lambda;
        let count = (ratio.round() as usize).max(1);
        let residue = (ratio - count as f64).abs();
        let inversion = atom_mass(&grid, &gamma, lambda, support)?;
        if (inversion.mass - mass).abs() > cfg.tol {
            warnings.push(format!(
                "inversion gives mass {} at {lambda}, the sample clusters give {mass}",
                inversion.mass
            ));
        }
        atoms.push(SpectralAtom {
            lambda,
            mass,
            count,
            residue,
            inversion_mass: inversion.mass,
            inversion_imaginary: inversion.imaginary,
            cells: found,
        });
    }
    atoms.sort_by(|a, b| b.lambda.total_cmp(&a.lambda));

    let unstable = atoms.iter().any(|a| a.residue > cfg.residue);
    if unstable {
        warnings.push("unstable spectrum: a mass is far from a whole multiple of its atom".into());
    }
    let residual = 1.0 - atoms.iter().map(|a| a.count as f64 * a.lambda).sum::<f64>();
    if residual < -cfg.tol {
        warnings.push(format!("atoms account for more than the total mass (residual {residual})"));
    }
    let continuity_grid = (1..128)
        .map(|k| k as f64 / 128.0)
        .filter(|t| atoms.iter().all(|a| (t - a.lambda).abs() > cfg.merge))
        .collect();

    let moments = moments_of(&reference, *radii.last().expect("non-empty"), cfg.moments_w.min(super::MAX_MOMENT))?;
    let check_grid = uniform_grid(MOMENT_CHECK_T, 401);
    let series = characteristic_function(&moments, &check_grid, cfg.tol);
    let moment_check = MomentCheck {
        t_max: MOMENT_CHECK_T,
        order: moments.moments.len() - 1,
        truncation_bound: series.truncation_bound,
        max_deviation: series.max_deviation(&characteristic_function_direct(&reference, &check_grid)),
        lossy: series.lossy,
    };

    Ok(SpectrumReport {
        atoms,
        residual,
        continuity_grid,
        unstable,
        warnings,
        window,
        radii,
        moment_check,
        config: cfg.clone(),
        reference,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::Family;

    fn run(family: Family, start: usize, end: usize) -> SpectrumReport {
        let seq = StructureSequence::from_generator(family, start, end).unwrap();
        detect_spectrum(&seq, &Config::default()).unwrap()
    }

    #[test]
    fn equal_cliques() {
        let r = run(Family::clique_pair(0.5, 0.5), 20, 40);
        assert_eq!(r.atoms.len(), 1);
        assert!((r.atoms[0].lambda - 0.5).abs() < 1e-9);
        assert!((r.atoms[0].mass - 1.0).abs() < 1e-9);
        assert_eq!(r.atoms[0].count, 2);
        assert!(r.residual.abs() < 1e-9);
        assert!(!r.unstable);
        assert!(r.moment_check.max_deviation <= r.moment_check.truncation_bound + 1e-9);
    }

    #[test]
    fn cliques_with_a_residual_path() {
        let r = run(Family::clique_pair(0.5, 0.3), 20, 40);
        let lambdas: Vec<f64> = r.atoms.iter().map(|a| a.lambda).collect();
        assert_eq!(lambdas.len(), 2, "{lambdas:?}");
        assert!((lambdas[0] - 0.5).abs() < 0.02 && (lambdas[1] - 0.3).abs() < 0.02);
        assert!(r.atoms.iter().all(|a| a.count == 1));
        assert!((r.residual - 0.2).abs() < 0.05);
        assert!(r.continuity_grid.iter().all(|t| (t - 0.5).abs() > 0.02));
    }

    #[test]
    fn cycles_have_no_atoms() {
        let r = run(Family::Cycle {}, 20, 40);
        assert!(r.atoms.is_empty());
        assert_eq!(r.residual, 1.0);
    }
}
