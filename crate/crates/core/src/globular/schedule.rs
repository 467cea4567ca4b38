use serde::Serialize;

use crate::config::Config;
use crate::error::{Error, Result};
use crate::sequences::StructureSequence;
use crate::spectrum::{BallMeasureSample, EmpiricalCDF, SpectrumReport};

/// Deepest level built; past it the brackets shrink towards rounding error.
pub const MAX_LEVEL: u32 = 30;
/// Bracket half-width as a fraction of the level width.
const BRACKET: f64 = 0.45;
/// Radius multiples that must agree for a level.
const MULTIPLES: u32 = 8;

/// First level used for an atom: `ceil(5 - 2 log2 lambda)`.
pub fn base_level(lambda: f64) -> u32 {
    (5.0 - 2.0 * lambda.log2()).ceil().max(1.0) as u32
}

/// `2^-z`.
pub fn level_width(z: u32) -> f64 {
    0.5f64.powi(z as i32)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Level {
    pub z: u32,
    pub epsilon: f64,
    pub alpha: f64,
    pub beta: f64,
    pub delta: u32,
    /// First index at which the level is in force.
    pub eta: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AtomSchedule {
    pub lambda: f64,
    pub mass: f64,
    pub count: usize,
    pub z0: u32,
    /// Consecutive levels from `z0`; empty when even `z0` is out of reach.
    pub levels: Vec<Level>,
}

impl AtomSchedule {
    /// The deepest level whose threshold index has passed.
    pub fn active(&self, n: usize) -> Option<&Level> {
        self.levels.iter().rev().find(|l| l.eta <= n)
    }

    pub fn depth(&self) -> Option<u32> {
        self.levels.last().map(|l| l.z)
    }

    /// Levels `z0..=z`.
    pub fn levels_to(&self, z: u32) -> &[Level] {
        let k = self.levels.iter().take_while(|l| l.z <= z).count();
        &self.levels[..k]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Schedule {
    /// Atoms in decreasing order of `lambda`, after merging unresolved pairs.
    pub atoms: Vec<AtomSchedule>,
    pub radius_limit: u32,
    pub warnings: Vec<String>,
    /// One line per level chosen.
    pub log: Vec<String>,
}

/// Ball-measure CDFs at every index and every radius `1..=8 * radius_limit`.
struct Tabulated {
    indices: Vec<usize>,
    window_rows: Vec<usize>,
    cdfs: Vec<Vec<EmpiricalCDF>>,
}

impl Tabulated {
    fn value(&self, row: usize, d: u32, t: f64) -> f64 {
        self.cdfs[row][d as usize - 1].eval(t)
    }

    fn tail_mean(&self, d: u32, t: f64) -> f64 {
        self.window_rows.iter().map(|&r| self.value(r, d, t)).sum::<f64>() / self.window_rows.len() as f64
    }

    /// The tail CDFs at `k d` agree with the one at `d`, for every `k <= 8`.
    fn plateau(&self, d: u32, alpha: f64, beta: f64, eps: f64) -> bool {
        [alpha, beta].iter().all(|&t| {
            let base = self.tail_mean(d, t);
            (2..=MULTIPLES).all(|k| (self.tail_mean(k * d, t) - base).abs() < eps)
        })
    }

    /// First index from which every later CDF at `k delta` is within `eps` of its tail mean.
    fn settle_index(&self, delta: u32, alpha: f64, beta: f64, eps: f64) -> Option<usize> {
        let targets: Vec<(u32, f64, f64)> = (1..=MULTIPLES)
            .flat_map(|k| [alpha, beta].map(|t| (k * delta, t, self.tail_mean(k * delta, t))))
            .collect();
        let ok = |row: usize| targets.iter().all(|&(d, t, m)| (self.value(row, d, t) - m).abs() < eps);
        let mut first = None;
        for row in (0..self.indices.len()).rev() {
            if !ok(row) {
                break;
            }
            first = Some(row);
        }
        first.map(|r| self.indices[r])
    }
}

/// Chooses brackets, radii and threshold indices for every detected atom.
pub fn build_schedule(report: &SpectrumReport, seq: &StructureSequence, cfg: &Config) -> Result<Schedule> {
    let atoms = report.atoms.iter().map(|a| (a.lambda, a.mass, a.count)).collect();
    schedule_for_atoms(atoms, seq, cfg)
}

pub(crate) fn schedule_for_atoms(
    mut atoms: Vec<(f64, f64, usize)>,
    seq: &StructureSequence,
    cfg: &Config,
) -> Result<Schedule> {
    if atoms.is_empty() {
        return Err(Error::Precondition("the spectrum has no atoms".into()));
    }
    atoms.sort_by(|a, b| b.0.total_cmp(&a.0));
    let radius_limit = cfg.globular_radius;
    let radii: Vec<u32> = (1..=radius_limit * MULTIPLES).collect();
    let indices: Vec<usize> = seq.indices().collect();
    let cdfs = seq.map_indices(&indices, |_, s| {
        let sample = BallMeasureSample::new(s, &radii);
        Ok((0..radii.len()).map(|k| sample.cdf(k)).collect())
    })?;
    let window = seq.window(cfg.window);
    let window_rows = (0..indices.len()).filter(|&r| window.contains(&indices[r])).collect();
    let tab = Tabulated { indices, window_rows, cdfs };

    let mut merges = Vec::new();
    loop {
        let mut warnings = merges.clone();
        let mut log = Vec::new();
        let lambdas: Vec<f64> = atoms.iter().map(|a| a.0).collect();
        let built: Vec<AtomSchedule> = atoms
            .iter()
            .map(|&(lambda, mass, count)| {
                atom_schedule(lambda, mass, count, &lambdas, &tab, radius_limit, &mut log, &mut warnings)
            })
            .collect();
        let unresolved = built.windows(2).position(|pair| {
            let gap = pair[0].lambda - pair[1].lambda;
            let needed = (1.0 - gap.log2()).ceil() as u32;
            match (pair[0].depth(), pair[1].depth()) {
                (Some(a), Some(b)) => a.min(b) < needed,
                _ => false,
            }
        });
        let Some(k) = unresolved else {
            return Ok(Schedule { atoms: built, radius_limit, warnings, log });
        };
        let (a, b) = (atoms[k], atoms[k + 1]);
        let mass = a.1 + b.1;
        let merged = ((a.0 * a.1 + b.0 * b.1) / mass, mass, a.2 + b.2);
        merges.push(format!(
            "atoms {} and {} cannot be separated at the reachable depth; merged into {}",
            a.0, b.0, merged.0
        ));
        atoms.splice(k..k + 2, [merged]);
    }
}

#[allow(clippy::too_many_arguments)]
fn atom_schedule(
    lambda: f64,
    mass: f64,
    count: usize,
    all: &[f64],
    tab: &Tabulated,
    radius_limit: u32,
    log: &mut Vec<String>,
    warnings: &mut Vec<String>,
) -> AtomSchedule {
    let z0 = base_level(lambda);
    let last_index = *tab.indices.last().expect("non-empty sequence");
    let mut levels: Vec<Level> = Vec::new();
    for z in z0..=MAX_LEVEL {
        let eps = level_width(z);
        let (alpha, beta) = (lambda - BRACKET * eps, lambda + BRACKET * eps);
        if all.iter().any(|&other| other != lambda && alpha <= other && other <= beta) {
            warnings.push(format!("lambda {lambda}: another atom falls inside the level-{z} bracket"));
            break;
        }
        let from = levels.last().map_or(1, |l| l.delta);
        let Some(delta) = (from..=radius_limit).find(|&d| tab.plateau(d, alpha, beta, eps)) else {
            warnings.push(format!("lambda {lambda}: no radius up to {radius_limit} stabilises at level {z}"));
            break;
        };
        let Some(mut eta) = tab.settle_index(delta, alpha, beta, eps) else {
            warnings.push(format!("lambda {lambda}: the last index is not yet settled at level {z}"));
            break;
        };
        if let Some(prev) = levels.last() {
            eta = eta.max(prev.eta + 1);
        }
        if eta > last_index {
            warnings.push(format!("lambda {lambda}: indices exhausted at level {z}"));
            break;
        }
        log.push(format!("lambda={lambda} z={z} alpha={alpha} beta={beta} delta={delta} eta={eta}"));
        levels.push(Level { z, epsilon: eps, alpha, beta, delta, eta });
    }
    if levels.is_empty() {
        warnings.push(format!("lambda {lambda}: no feasible level; the atom is left unclustered"));
    }
    AtomSchedule { lambda, mass, count, z0, levels }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::Family;
    use crate::spectrum::detect_spectrum;

    #[test]
    fn base_levels() {
        assert_eq!(base_level(0.5), 7);
        assert_eq!(base_level(0.25), 9);
        assert!(level_width(base_level(0.3)) <= 0.3 * 0.3 / 32.0);
    }

    #[test]
    fn clique_pair_schedule() {
        let seq = StructureSequence::from_generator(Family::clique_pair(0.5, 0.5), 20, 40).unwrap();
        let cfg = Config::default();
        let report = detect_spectrum(&seq, &cfg).unwrap();
        let sched = build_schedule(&report, &seq, &cfg).unwrap();
        let atom = &sched.atoms[0];
        assert_eq!(atom.z0, 7);
        assert!(!atom.levels.is_empty());
        assert!(atom.levels.iter().all(|l| l.delta == 1));
        assert!(atom.levels.windows(2).all(|w| w[0].eta < w[1].eta && w[0].alpha < w[1].alpha && w[0].beta > w[1].beta));
        assert!(atom.levels.iter().all(|l| l.beta - l.alpha < l.epsilon));
        assert_eq!(atom.active(19), None);
        assert_eq!(atom.active(atom.levels[0].eta).map(|l| l.z), Some(7));
    }
}
