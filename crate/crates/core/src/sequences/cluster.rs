use rayon::prelude::*;
use serde::Serialize;

use super::expansion::{h_out, ExpansionMode};
use super::negligible::{negligible_profile, NegligibleProfile};
use super::{mean, oscillation, StructureSequence, SubsetSequence};
use crate::config::Config;
use crate::error::{input, Error, Result};
use crate::logic::{is_strongly_local, parse_formula, stone_pairing, Formula};
use crate::structure::{Signature, Structure, VertexSet};

/// Name of the unary mark added for the set under test.
pub const CLUSTER_MARK: &str = "M";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Pass,
    Fail,
    /// Too few indices in the tail window to judge.
    Inconclusive,
}

fn atom_text(name: &str, arity: usize) -> String {
    let args: Vec<String> = (1..=arity).map(|i| format!("x{i}")).collect();
    format!("{name}({})", args.join(","))
}

fn parse_all(texts: &[String]) -> Vec<Formula> {
    texts.iter().map(|t| parse_formula(t).expect("battery formula parses")).collect()
}

/// Strongly local formulas over the signature plus the mark `M`.
pub fn default_battery(signature: &Signature) -> Vec<Formula> {
    let m = CLUSTER_MARK;
    let mut texts = vec![format!("{m}(x1)")];
    for (name, arity) in signature.iter() {
        if name == m {
            continue;
        }
        let atom = atom_text(name, arity);
        if arity >= 2 {
            texts.push(atom.clone());
            texts.push(format!("{m}(x1) & {atom}"));
            texts.push(format!("{m}(x1) & !{m}(x2) & {atom}"));
        } else if arity == 1 {
            texts.push(atom.clone());
            texts.push(format!("{m}(x1) & {atom}"));
        }
    }
    texts.push(format!("{m}(x1) & {m}(x2) & dist(x1,x2) <= 2"));
    parse_all(&texts)
}

/// Formulas evaluated on the induced substructures `A_n[X_n]`.
pub fn induced_battery(signature: &Signature) -> Vec<Formula> {
    let mut texts: Vec<String> = signature
        .iter()
        .filter(|(_, arity)| *arity >= 1)
        .map(|(name, arity)| atom_text(name, arity))
        .collect();
    texts.push("dist(x1,x2) <= 2".into());
    texts.push("true".into());
    parse_all(&texts)
}

fn check_battery(battery: &[Formula]) -> Result<()> {
    match battery.iter().find(|f| !is_strongly_local(f)) {
        Some(f) => input(format!("battery formula '{f}' is not strongly local")),
        None => Ok(()),
    }
}

/// Battery values along a sequence, with the tail oscillation of each formula.
#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceDiagnostic {
    pub formulas: Vec<Formula>,
    pub indices: Vec<usize>,
    /// One row per index; NaN where the value is undefined (an empty induced set).
    pub values: Vec<Vec<f64>>,
    pub window: Vec<usize>,
    pub oscillation: Vec<f64>,
    /// Mean over the window, the estimate of the limit.
    pub limit: Vec<f64>,
    pub tol: f64,
    pub verdict: Verdict,
}

impl ConvergenceDiagnostic {
    fn new(formulas: Vec<Formula>, indices: Vec<usize>, values: Vec<Vec<f64>>, window: Vec<usize>, tol: f64) -> Self {
        let mut diag = ConvergenceDiagnostic {
            formulas,
            indices,
            values,
            window,
            oscillation: Vec::new(),
            limit: Vec::new(),
            tol,
            verdict: Verdict::Inconclusive,
        };
        diag.oscillation = diag.oscillation_over(&diag.window);
        diag.limit = (0..diag.formulas.len()).map(|k| mean(&diag.tail_values(k, &diag.window))).collect();
        let enough = (0..diag.formulas.len()).all(|k| diag.tail_values(k, &diag.window).len() >= 2);
        diag.verdict = if diag.window.len() < 2 || !enough {
            Verdict::Inconclusive
        } else if diag.oscillation.iter().all(|&o| o < tol) {
            Verdict::Pass
        } else {
            Verdict::Fail
        };
        diag
    }

    fn tail_values(&self, k: usize, window: &[usize]) -> Vec<f64> {
        self.indices
            .iter()
            .zip(&self.values)
            .filter(|(n, _)| window.contains(n))
            .map(|(_, row)| row[k])
            .filter(|v| v.is_finite())
            .collect()
    }

    /// Per-formula oscillation over an arbitrary set of indices.
    pub fn oscillation_over(&self, window: &[usize]) -> Vec<f64> {
        (0..self.formulas.len()).map(|k| oscillation(self.tail_values(k, window))).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("index");
        for k in 0..self.formulas.len() {
            out.push_str(&format!(",f{k}"));
        }
        out.push('\n');
        for (n, row) in self.indices.iter().zip(&self.values) {
            out.push_str(&n.to_string());
            for v in row {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
        out
    }
}

fn pairings(battery: &[Formula], s: &Structure) -> Result<Vec<f64>> {
    battery.iter().map(|f| stone_pairing(f, s)).collect()
}

fn marked_values(seq: &StructureSequence, x: &SubsetSequence, battery: &[Formula]) -> Result<Vec<Vec<f64>>> {
    let indices = x.indices();
    seq.map_indices(&indices, |n, s| {
        let marked = s.mark(CLUSTER_MARK, x.get(n).expect("aligned"))?;
        pairings(battery, &marked)
    })
}

fn induced_values(seq: &StructureSequence, x: &SubsetSequence, battery: &[Formula]) -> Result<Vec<Vec<f64>>> {
    let indices = x.indices();
    seq.map_indices(&indices, |n, s| {
        let set = x.get(n).expect("aligned");
        if s.measure(set) <= 0.0 {
            return Ok(vec![f64::NAN; battery.len()]);
        }
        pairings(battery, &s.induce(set)?.0)
    })
}

fn induced_convergence(
    seq: &StructureSequence,
    x: &SubsetSequence,
    battery: &[Formula],
    cfg: &Config,
) -> Result<ConvergenceDiagnostic> {
    let values = induced_values(seq, x, battery)?;
    Ok(ConvergenceDiagnostic::new(battery.to_vec(), x.indices(), values, seq.window(cfg.window), cfg.tol))
}

fn check_mark_free(seq: &StructureSequence) -> Result<Signature> {
    let sig = seq.signature()?;
    if sig.arity(CLUSTER_MARK).is_some() {
        return input(format!("the signature already uses the symbol '{CLUSTER_MARK}'"));
    }
    Ok(sig)
}

#[derive(Clone, Debug, Serialize)]
pub struct ClusterVerdict {
    pub verdict: Verdict,
    /// First failing condition, if any.
    pub reason: Option<String>,
    /// Neighbourhood profile of the boundary sequence.
    pub boundary: NegligibleProfile,
    /// The battery on `A_n` with `X_n` marked.
    pub marked: ConvergenceDiagnostic,
    pub measures: Vec<(usize, f64)>,
    pub measure_oscillation: f64,
    pub measure_limit: f64,
    /// The battery on `A_n[X_n]`; absent when the measure tends to zero.
    pub induced: Option<ConvergenceDiagnostic>,
    /// The equivalent test: negligible boundary, convergent measure and, unless it
    /// vanishes, convergent induced substructures.
    pub alternative: Verdict,
}

/// Tests whether the marked sequence `(A_n, X_n)` converges with a negligible boundary.
/// An empty battery selects [`default_battery`].
pub fn is_cluster(seq: &StructureSequence, x: &SubsetSequence, battery: &[Formula], cfg: &Config) -> Result<ClusterVerdict> {
    x.check_aligned(seq)?;
    let sig = check_mark_free(seq)?;
    let battery = if battery.is_empty() { default_battery(&sig) } else { battery.to_vec() };
    check_battery(&battery)?;
    let window = seq.window(cfg.window);

    let boundary = negligible_profile(seq, &x.boundary(seq)?, cfg.dmax, cfg.window, cfg.tol)?;
    let values = marked_values(seq, x, &battery)?;
    let marked = ConvergenceDiagnostic::new(battery, x.indices(), values, window.clone(), cfg.tol);

    let measures = x.measures(seq)?;
    let tail: Vec<f64> = measures.iter().filter(|(n, _)| window.contains(n)).map(|m| m.1).collect();
    let measure_oscillation = oscillation(tail.iter().copied());
    let measure_limit = mean(&tail);
    let induced = if measure_limit >= cfg.tol {
        Some(induced_convergence(seq, x, &induced_battery(&sig), cfg)?)
    } else {
        None
    };

    let few = window.len() < 2;
    let (verdict, reason) = if few {
        (Verdict::Inconclusive, Some("tail window has fewer than two indices".to_string()))
    } else if !boundary.negligible {
        let d = boundary.tail_sup.iter().position(|&v| v >= cfg.tol).unwrap_or(0);
        (Verdict::Fail, Some(format!("boundary is not negligible at radius {d}")))
    } else if marked.verdict != Verdict::Pass {
        let k = marked.oscillation.iter().position(|&o| o >= cfg.tol).unwrap_or(0);
        let why = match marked.formulas.get(k) {
            Some(f) if marked.verdict == Verdict::Fail => {
                format!("'{f}' oscillates by {} on the tail", marked.oscillation[k])
            }
            _ => "marked battery is inconclusive".to_string(),
        };
        (marked.verdict, Some(why))
    } else {
        (Verdict::Pass, None)
    };
    let alternative = if few {
        Verdict::Inconclusive
    } else {
        let induced_ok = induced.as_ref().is_none_or(|d| d.verdict == Verdict::Pass);
        if boundary.negligible && measure_oscillation < cfg.tol && induced_ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    };
    Ok(ClusterVerdict {
        verdict,
        reason,
        boundary,
        marked,
        measures,
        measure_oscillation,
        measure_limit,
        induced,
        alternative,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct InterweavingVerdict {
    pub verdict: Verdict,
    pub measure_gap: f64,
    /// Largest gap between the induced battery limits.
    pub max_deviation: f64,
    pub formulas: Vec<Formula>,
    pub x_limits: Vec<f64>,
    pub y_limits: Vec<f64>,
}

/// Two clusters interweave when their measures and induced substructures share limits.
/// An empty battery selects [`induced_battery`].
pub fn interweaving(
    seq: &StructureSequence,
    x: &SubsetSequence,
    y: &SubsetSequence,
    battery: &[Formula],
    cfg: &Config,
) -> Result<InterweavingVerdict> {
    for (label, set) in [("first", x), ("second", y)] {
        let v = is_cluster(seq, set, &[], cfg)?;
        if v.verdict != Verdict::Pass {
            return Err(Error::Precondition(format!(
                "the {label} sequence is not a cluster: {}",
                v.reason.unwrap_or_default()
            )));
        }
    }
    let sig = seq.signature()?;
    let battery = if battery.is_empty() { induced_battery(&sig) } else { battery.to_vec() };
    check_battery(&battery)?;
    let window = seq.window(cfg.window);
    let tail_mean = |s: &SubsetSequence| -> Result<f64> {
        let m: Vec<f64> = s.measures(seq)?.into_iter().filter(|(n, _)| window.contains(n)).map(|m| m.1).collect();
        Ok(mean(&m))
    };
    let (mx, my) = (tail_mean(x)?, tail_mean(y)?);
    let measure_gap = (mx - my).abs();
    let limits = |s: &SubsetSequence, m: f64| -> Result<Vec<f64>> {
        if m < cfg.tol {
            return Ok(vec![f64::NAN; battery.len()]);
        }
        Ok(induced_convergence(seq, s, &battery, cfg)?.limit)
    };
    let x_limits = limits(x, mx)?;
    let y_limits = limits(y, my)?;
    let max_deviation = x_limits
        .iter()
        .zip(&y_limits)
        .map(|(a, b)| (a - b).abs())
        .filter(|d| d.is_finite())
        .fold(0.0, f64::max);
    let both_null = mx < cfg.tol && my < cfg.tol;
    let comparable = both_null || (mx >= cfg.tol && my >= cfg.tol);
    let verdict = if window.len() < 2 {
        Verdict::Inconclusive
    } else if measure_gap < cfg.tol && comparable && max_deviation < cfg.tol {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    Ok(InterweavingVerdict { verdict, measure_gap, max_deviation, formulas: battery, x_limits, y_limits })
}

#[derive(Clone, Debug, Serialize)]
pub struct WrapResult {
    pub sets: SubsetSequence,
    /// The wrapping radius `D(n)`; `None` means the whole reachable closure.
    pub radii: Vec<(usize, Option<u32>)>,
    /// The per-index radius before taking the running minimum over later indices.
    pub local_radii: Vec<(usize, Option<u32>)>,
}

/// Largest `d` with `nu(B[2d+1](X) - X) < 1/d`; `None` when the closure adds nothing.
fn local_radius(s: &Structure, x: &VertexSet) -> Option<u32> {
    let base = s.measure(x);
    let profile = s.ball_profile(x.iter(), None);
    let last = profile.len() - 1;
    let halo = |d: u64| profile[((2 * d + 1) as usize).min(last)] - base;
    let mut d: u64 = 1;
    while ((2 * d + 1) as usize) < last {
        if halo(d) >= 1.0 / d as f64 {
            return Some((d - 1) as u32);
        }
        d += 1;
    }
    let saturated = profile[last] - base;
    if saturated <= 1e-15 {
        return None;
    }
    // beyond saturation the condition reads d < 1 / saturated
    let bound = ((1.0 / saturated).ceil() as u64).saturating_sub(1);
    let radius = if bound < d { d - 1 } else { bound };
    Some(radius.min(u32::MAX as u64 - 1) as u32)
}

/// Enlarges a pre-cluster `X` to a cluster by slowly growing balls around it.
pub fn wrap(seq: &StructureSequence, x: &SubsetSequence, cfg: &Config) -> Result<WrapResult> {
    x.check_aligned(seq)?;
    let sig = seq.signature()?;
    let window = seq.window(cfg.window);
    let measures = x.measures(seq)?;
    let tail: Vec<f64> = measures.iter().filter(|(n, _)| window.contains(n)).map(|m| m.1).collect();
    if mean(&tail) <= cfg.tol {
        return Err(Error::Precondition("the measure of X tends to zero".into()));
    }
    let induced = induced_convergence(seq, x, &induced_battery(&sig), cfg)?;
    if induced.verdict != Verdict::Pass {
        return Err(Error::Precondition("the induced substructures do not converge".into()));
    }
    let tail_indices: Vec<usize> = x.indices().into_iter().filter(|n| window.contains(n)).collect();
    let halos = seq.map_indices(&tail_indices, |n, s| {
        let set = x.get(n).expect("aligned");
        let base = s.measure(set);
        Ok(s.ball_measures(set, cfg.dmax)?.into_iter().map(|m| m - base).fold(0.0, f64::max))
    })?;
    if let Some(h) = halos.iter().find(|&&h| h >= cfg.tol) {
        return Err(Error::Precondition(format!(
            "X is not a pre-cluster: a neighbourhood adds measure {h}"
        )));
    }

    let indices = x.indices();
    let local = seq.map_indices(&indices, |n, s| Ok(local_radius(s, x.get(n).expect("aligned"))))?;
    let mut radii = vec![None; indices.len()];
    let mut running: Option<u32> = None;
    for k in (0..indices.len()).rev() {
        running = match (running, local[k]) {
            (None, r) | (r, None) => r,
            (Some(a), Some(b)) => Some(a.min(b)),
        };
        radii[k] = running;
    }
    let sets = seq.map_indices(&indices, |n, s| {
        let k = n - indices[0];
        s.ball(x.get(n).expect("aligned"), radii[k])
    })?;
    Ok(WrapResult {
        sets: SubsetSequence::new(indices.iter().copied().zip(sets).collect()),
        radii: indices.iter().copied().zip(radii).collect(),
        local_radii: indices.iter().copied().zip(local).collect(),
    })
}

/// `s(n, d) = max_v nu_{A[X]}(B[d](v))`, the heaviest ball inside the induced structure.
#[derive(Clone, Debug, Serialize)]
pub struct DispersionProfile {
    pub indices: Vec<usize>,
    pub table: Vec<Vec<f64>>,
}

impl DispersionProfile {
    /// Smallest radius whose heaviest ball reaches `level`.
    pub fn radius_reaching(&self, row: usize, level: f64) -> Option<u32> {
        self.table[row].iter().position(|&v| v >= level).map(|d| d as u32)
    }
}

pub fn dispersion_profile(seq: &StructureSequence, x: &SubsetSequence, dmax: u32) -> Result<DispersionProfile> {
    x.check_aligned(seq)?;
    let indices = x.indices();
    let table = seq.map_indices(&indices, |n, s| {
        let set = x.get(n).expect("aligned");
        if s.measure(set) <= 0.0 {
            return Ok(vec![0.0; dmax as usize + 1]);
        }
        let (sub, _) = s.induce(set)?;
        Ok((0..sub.len())
            .into_par_iter()
            .map(|v| sub.ball_measures_unchecked(std::iter::once(v), dmax))
            .reduce(
                || vec![0.0; dmax as usize + 1],
                |a, b| a.iter().zip(&b).map(|(p, q)| p.max(*q)).collect(),
            ))
    })?;
    Ok(DispersionProfile { indices, table })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Classification {
    Globular,
    Open,
    Residual,
    Inconclusive,
}

#[derive(Clone, Debug, Serialize)]
pub struct ClassReport {
    pub class: Classification,
    pub dispersion: DispersionProfile,
    /// Per index, the smallest radius whose heaviest ball holds `1 - epsilon`.
    pub concentration_radius: Vec<(usize, Option<u32>)>,
    /// Per tail index, the outer magnification of `A_n[X_n]` and whether it is exact.
    pub magnification: Vec<(usize, Option<f64>, bool)>,
}

/// Finite-scale classification of a cluster as globular, open (expanding) or residual.
pub fn classify(seq: &StructureSequence, x: &SubsetSequence, cfg: &Config) -> Result<ClassReport> {
    let dispersion = dispersion_profile(seq, x, cfg.dmax)?;
    let window = seq.window(cfg.window);
    let level = 1.0 - cfg.epsilon;
    let concentration_radius: Vec<(usize, Option<u32>)> = dispersion
        .indices
        .iter()
        .enumerate()
        .map(|(k, &n)| (n, dispersion.radius_reaching(k, level)))
        .collect();
    let rows: Vec<usize> = (0..dispersion.indices.len()).filter(|&k| window.contains(&dispersion.indices[k])).collect();
    let tail_radii: Vec<Option<u32>> = rows.iter().map(|&k| concentration_radius[k].1).collect();

    let mode = ExpansionMode::Auto { samples: cfg.samples, seed: cfg.seed };
    let magnification = seq.map_indices(&window, |n, s| {
        let set = x.get(n).expect("aligned");
        if s.measure(set) <= 0.0 {
            return Ok((n, None, true));
        }
        let rep = h_out(&s.induce(set)?.0, mode)?;
        Ok((n, rep.value, rep.exact))
    })?;

    let class = if rows.len() < 2 {
        Classification::Inconclusive
    } else if tail_radii.iter().all(|r| r.is_some_and(|r| r <= cfg.globular_radius))
        && tail_radii.last() <= tail_radii.first()
    {
        Classification::Globular
    } else if magnification.iter().all(|(_, h, _)| h.is_some_and(|h| h >= cfg.open_hout)) {
        Classification::Open
    } else {
        let last = &dispersion.table[*rows.last().expect("two rows")];
        let shrinking = (0..=cfg.dmax as usize)
            .all(|d| rows.windows(2).all(|w| dispersion.table[w[1]][d] <= dispersion.table[w[0]][d] + 1e-12));
        if last.get(1).is_some_and(|&s1| s1 <= cfg.epsilon) && shrinking {
            Classification::Residual
        } else {
            Classification::Inconclusive
        }
    };
    Ok(ClassReport { class, dispersion, concentration_radius, magnification })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{Family, Growth, Layout};

    fn cfg() -> Config {
        Config::default()
    }

    #[test]
    fn batteries_are_strongly_local() {
        let sig = Signature::new().with("adj", 2).with("colour", 1);
        let b = default_battery(&sig);
        assert!(check_battery(&b).is_ok());
        assert_eq!(b.len(), 1 + 3 + 2 + 1);
        assert!(check_battery(&induced_battery(&sig)).is_ok());
    }

    #[test]
    fn trivial_sequences_are_clusters() {
        let seq = StructureSequence::from_generator(Family::Cycle {}, 4, 20).unwrap();
        for x in [SubsetSequence::zero(&seq).unwrap(), SubsetSequence::full(&seq).unwrap()] {
            let v = is_cluster(&seq, &x, &[], &cfg()).unwrap();
            assert_eq!(v.verdict, Verdict::Pass, "{:?}", v.reason);
            assert_eq!(v.alternative, Verdict::Pass);
        }
    }

    #[test]
    fn half_cycle_is_a_cluster_but_alternating_halves_are_not() {
        let seq = StructureSequence::from_generator(Family::Cycle {}, 100, 200).unwrap();
        // radii must stay small against the cycle length at this scale
        let cfg = || Config { dmax: 3, ..Config::default() };
        let half = SubsetSequence::from_fn(&seq, |_, s| s.vertex_set(0..s.len() / 2)).unwrap();
        assert_eq!(is_cluster(&seq, &half, &[], &cfg()).unwrap().verdict, Verdict::Pass);
        let flip = SubsetSequence::from_fn(&seq, |n, s| {
            let k = if n % 2 == 0 { s.len() / 2 } else { s.len() / 8 };
            s.vertex_set(0..k)
        })
        .unwrap();
        let v = is_cluster(&seq, &flip, &[], &cfg()).unwrap();
        assert_eq!(v.verdict, Verdict::Fail);
        assert_eq!(v.alternative, Verdict::Fail);
    }

    #[test]
    fn single_index_window_is_inconclusive() {
        let seq = StructureSequence::from_generator(Family::Cycle {}, 2, 3).unwrap();
        let v = is_cluster(&seq, &SubsetSequence::full(&seq).unwrap(), &[], &cfg()).unwrap();
        assert_eq!(v.verdict, Verdict::Inconclusive);
    }

    #[test]
    fn equal_cliques_interweave() {
        let seq = StructureSequence::from_generator(Family::clique_pair(0.5, 0.5), 20, 40).unwrap();
        let first = SubsetSequence::from_fn(&seq, |n, s| s.vertex_set(0..n)).unwrap();
        let second = SubsetSequence::from_fn(&seq, |n, s| s.vertex_set(n..s.len())).unwrap();
        let v = interweaving(&seq, &first, &second, &[], &cfg()).unwrap();
        assert_eq!(v.verdict, Verdict::Pass);
        let cycle = StructureSequence::from_generator(Family::Cycle {}, 20, 40).unwrap();
        let flip = SubsetSequence::from_fn(&cycle, |n, s| s.vertex_set(0..if n % 2 == 0 { s.len() / 2 } else { 2 }))
            .unwrap();
        let full = SubsetSequence::full(&cycle).unwrap();
        assert!(matches!(interweaving(&cycle, &flip, &full, &[], &cfg()), Err(Error::Precondition(_))));
    }

    #[test]
    fn wrapping_a_clique_with_a_tail() {
        let seq = StructureSequence::from_generator(Family::clique_pair(0.5, 0.3), 20, 40).unwrap();
        let x = SubsetSequence::from_fn(&seq, |n, s| s.vertex_set(0..n)).unwrap();
        let before = is_cluster(&seq, &x, &[], &cfg()).unwrap();
        assert_eq!(before.verdict, Verdict::Fail);
        let w = wrap(&seq, &x, &cfg()).unwrap();
        for ((n, r), (_, l)) in w.radii.iter().zip(&w.local_radii) {
            assert!(r.unwrap() <= l.unwrap(), "D({n}) exceeds its local radius");
            assert!(w.sets.get(*n).unwrap().is_subset(&seq.get(*n).unwrap().all()));
        }
        assert!(w.radii.windows(2).all(|p| p[0].1 <= p[1].1));
        let after = is_cluster(&seq, &w.sets, &[], &cfg()).unwrap();
        assert_eq!(after.verdict, Verdict::Pass, "{:?}", after.reason);
    }

    #[test]
    fn wrap_rejects_null_sets() {
        let seq = StructureSequence::from_generator(Family::Cycle {}, 4, 12).unwrap();
        let zero = SubsetSequence::zero(&seq).unwrap();
        assert!(matches!(wrap(&seq, &zero, &cfg()), Err(Error::Precondition(_))));
    }

    #[test]
    fn classification_examples() {
        let cliques = StructureSequence::from_generator(Family::clique_pair(0.5, 0.5), 8, 24).unwrap();
        let k = SubsetSequence::from_fn(&cliques, |n, s| s.vertex_set(0..n)).unwrap();
        assert_eq!(classify(&cliques, &k, &cfg()).unwrap().class, Classification::Globular);

        let cycle = StructureSequence::from_generator(Family::Cycle {}, 24, 40).unwrap();
        let all = SubsetSequence::full(&cycle).unwrap();
        assert_eq!(classify(&cycle, &all, &cfg()).unwrap().class, Classification::Residual);

        let family = Family::ExpanderUnion {
            degree: 3,
            scale: 8,
            layout: Layout::Single,
            growth: Growth::Exponential,
            link: false,
            seed: 0,
        };
        let expanders = StructureSequence::from_generator(family, 5, 8).unwrap();
        let whole = SubsetSequence::full(&expanders).unwrap();
        let mut c = cfg();
        c.samples = 512;
        c.window = 0.5;
        assert_eq!(classify(&expanders, &whole, &c).unwrap().class, Classification::Open);
    }
}
