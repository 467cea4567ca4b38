use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use super::schedule::{base_level, level_width, AtomSchedule, Level, Schedule};
use super::{
    mark_measures, AtomAtIndex, AtomClustering, ClusteringResult, Mark, MarkKind, Status, Violation,
};
use crate::config::Config;
use crate::error::{input, Result};
use crate::logic::stone_pairing;
use crate::sequences::{induced_battery, negligible_profile, StructureSequence, SubsetSequence};
use crate::spectrum::{BallMeasureSample, SpectrumReport};
use crate::structure::{Structure, VertexSet};

/// Centres are kept at least this many radii apart.
const SEPARATION: u32 = 7;
/// Clusters are balls of this many radii around the centres.
const CLUSTER_RADIUS: u32 = 2;
/// The outer radius multiple in the membership test.
const OUTER: u32 = 8;

/// Ball measures at the handful of radii one index needs.
struct Probe {
    radii: Vec<u32>,
    sample: BallMeasureSample,
}

impl Probe {
    fn new(a: &Structure, radii: BTreeSet<u32>) -> Self {
        let radii: Vec<u32> = radii.into_iter().collect();
        let sample = BallMeasureSample::new(a, &radii);
        Probe { radii, sample }
    }

    fn at(&self, d: u32, v: usize) -> f64 {
        let k = self.radii.binary_search(&d).expect("radius was requested");
        self.sample.values[k][v]
    }
}

fn radii_for(levels: &[Level]) -> impl Iterator<Item = u32> + '_ {
    levels.iter().map(|l| l.delta).chain(levels.last().map(|l| OUTER * l.delta))
}

fn core_from_probe(probe: &Probe, levels: &[Level], n: usize) -> VertexSet {
    let universe = probe.sample.weights.len();
    let Some(top) = levels.last() else {
        return VertexSet::empty(universe);
    };
    if n < top.eta {
        return VertexSet::empty(universe);
    }
    VertexSet::from_ids(
        universe,
        (0..universe).filter(|&v| {
            probe.at(OUTER * top.delta, v) <= top.beta && levels.iter().all(|l| probe.at(l.delta, v) > l.alpha)
        }),
    )
}

/// Vertices whose `8 delta_z` ball is at most `beta_z` while every `delta_z'` ball with
/// `z' <= z` exceeds `alpha_z'`; empty before the level's threshold index.
pub fn build_z(a: &Structure, schedule: &AtomSchedule, z: u32, n: usize) -> VertexSet {
    let levels = schedule.levels_to(z);
    if levels.last().is_none_or(|l| l.z != z) {
        return VertexSet::empty(a.len());
    }
    let probe = Probe::new(a, radii_for(levels).collect());
    core_from_probe(&probe, levels, n)
}

/// Greedy maximal subset of `core` in increasing id order with pairwise distance at least
/// `separation`.
pub fn build_centers(a: &Structure, core: &VertexSet, separation: u32) -> Vec<usize> {
    let mut blocked = VertexSet::empty(a.len());
    let mut centers = Vec::new();
    for v in core.iter() {
        if blocked.contains(v) {
            continue;
        }
        centers.push(v);
        let ball = a.ball_unchecked(&VertexSet::from_ids(a.len(), [v]), Some(separation.saturating_sub(1)));
        blocked.union_with(&ball);
    }
    centers
}

struct AtomWork {
    level: Level,
    centers: Vec<usize>,
    core: VertexSet,
    cluster: VertexSet,
    /// Connected parts of the cluster with their battery statistics.
    parts: Vec<(VertexSet, Vec<f64>)>,
}

struct IndexWork {
    atoms: Vec<Option<AtomWork>>,
    separator: VertexSet,
    violations: Vec<Violation>,
}

fn violation(index: usize, check: &str, atom: Option<usize>, detail: String) -> Violation {
    Violation { index, check: check.into(), atom, detail }
}

fn assemble_index(
    n: usize,
    a: &Structure,
    schedule: &Schedule,
    battery: &[crate::logic::Formula],
    in_window: bool,
) -> Result<IndexWork> {
    let active: Vec<Option<&Level>> = schedule.atoms.iter().map(|s| s.active(n)).collect();
    let radii: BTreeSet<u32> = schedule
        .atoms
        .iter()
        .zip(&active)
        .filter_map(|(s, l)| l.map(|l| s.levels_to(l.z)))
        .flat_map(radii_for)
        .collect();
    let probe = Probe::new(a, radii);
    let mut violations = Vec::new();
    let mut atoms = Vec::with_capacity(active.len());
    for (i, (sched, level)) in schedule.atoms.iter().zip(&active).enumerate() {
        let Some(level) = level else {
            atoms.push(None);
            continue;
        };
        let core = core_from_probe(&probe, sched.levels_to(level.z), n);
        let centers = build_centers(a, &core, SEPARATION * level.delta);
        let cluster = a.ball_unchecked(
            &VertexSet::from_ids(a.len(), centers.iter().copied()),
            Some(CLUSTER_RADIUS * level.delta),
        );
        let parts = a
            .components_within(&cluster)
            .into_iter()
            .map(|part| {
                let (sub, _) = a.induce(&part)?;
                let stats = battery.iter().map(|f| stone_pairing(f, &sub)).collect::<Result<Vec<f64>>>()?;
                Ok((part, stats))
            })
            .collect::<Result<Vec<_>>>()?;

        let atom = Some(i + 1);
        let scale = level_width(level.z) * sched.mass / sched.lambda;
        if !core.is_subset(&cluster) {
            violations.push(violation(n, "core-inside-cluster", atom, format!("level {}", level.z)));
        }
        let measure = a.measure(&cluster);
        if (measure - sched.mass).abs() >= scale {
            violations.push(violation(
                n,
                "cluster-measure",
                atom,
                format!("measure {measure}, expected {} within {scale}", sched.mass),
            ));
        }
        let mut border = a.ball_unchecked(&cluster, Some(1));
        border.difference_with(&cluster);
        let border_measure = a.measure(&a.ball_unchecked(&border, Some(level.delta)));
        if border_measure >= 2.0 * scale {
            violations.push(violation(
                n,
                "border-measure",
                atom,
                format!("border neighbourhood {border_measure}, bound {}", 2.0 * scale),
            ));
        }
        if in_window && centers.len() != sched.count {
            violations.push(violation(
                n,
                "center-count",
                atom,
                format!("{} centres, expected {}", centers.len(), sched.count),
            ));
        }
        atoms.push(Some(AtomWork { level: (*level).clone(), centers, core, cluster, parts }));
    }

    for i in 0..atoms.len() {
        for j in i + 1..atoms.len() {
            let (Some(big), Some(small)) = (&atoms[i], &atoms[j]) else { continue };
            let (l1, l2) = (schedule.atoms[i].lambda, schedule.atoms[j].lambda);
            let threshold = base_level(l2).max((1.0 - (l1 - l2).log2()).ceil() as u32);
            if small.level.z >= threshold && !big.cluster.is_disjoint(&small.cluster) {
                violations.push(violation(
                    n,
                    "disjoint-clusters",
                    Some(j + 1),
                    format!("overlaps atom {} at level {}", i + 1, small.level.z),
                ));
            }
        }
    }

    let mut clustered = VertexSet::empty(a.len());
    for w in atoms.iter().flatten() {
        clustered.union_with(&w.cluster);
    }
    let mut separator = a.ball_unchecked(&clustered, Some(1));
    if let Some(w) = atoms.iter().flatten().last() {
        let level = &w.level;
        separator.union_with(&VertexSet::from_ids(
            a.len(),
            (0..a.len()).filter(|&v| probe.at(level.delta, v) > level.alpha),
        ));
    }
    separator.difference_with(&clustered);
    Ok(IndexWork { atoms, separator, violations })
}

/// Marks the globular clusters of every scheduled atom, the separator and the residual.
pub fn assemble_clustering(
    seq: &StructureSequence,
    report: &SpectrumReport,
    schedule: &Schedule,
    cfg: &Config,
) -> Result<ClusteringResult> {
    let battery = induced_battery(&seq.signature()?);
    let indices: Vec<usize> = seq.indices().collect();
    let window = seq.window(cfg.window);
    let work = seq.map_indices(&indices, |n, a| assemble_index(n, a, schedule, &battery, window.contains(&n)))?;

    // Group the parts of each atom by battery statistics, scanning indices in order.
    // assignment[row][atom][part] = (group, member), both 1-based.
    let mut groups: Vec<Vec<Vec<f64>>> = vec![Vec::new(); schedule.atoms.len()];
    let mut assignment: Vec<Vec<Vec<(usize, usize)>>> = Vec::with_capacity(work.len());
    for w in &work {
        let mut row = Vec::with_capacity(w.atoms.len());
        for (i, atom) in w.atoms.iter().enumerate() {
            let mut members: BTreeMap<usize, usize> = BTreeMap::new();
            let mut out = Vec::new();
            for (_, stats) in atom.iter().flat_map(|a| &a.parts) {
                let g = match groups[i].iter().position(|rep| {
                    rep.iter().zip(stats).all(|(x, y)| (x - y).abs() < cfg.tol)
                }) {
                    Some(g) => g,
                    None => {
                        groups[i].push(stats.clone());
                        groups[i].len() - 1
                    }
                };
                let k = members.entry(g).or_insert(0);
                *k += 1;
                out.push((g + 1, *k));
            }
            row.push(out);
        }
        assignment.push(row);
    }

    let mut kinds: BTreeSet<(usize, usize, usize)> = BTreeSet::new();
    for row in &assignment {
        for (i, parts) in row.iter().enumerate() {
            kinds.extend(parts.iter().map(|&(g, k)| (i + 1, g, k)));
        }
    }
    let mut marks = vec![Mark::new(MarkKind::Residual), Mark::new(MarkKind::Separator)];
    let mut mark_id: BTreeMap<(usize, usize, usize), u32> = BTreeMap::new();
    for (atom, group, member) in kinds {
        mark_id.insert((atom, group, member), marks.len() as u32);
        marks.push(Mark::new(MarkKind::Globular { atom, group, member }));
    }

    let mut labels = Vec::with_capacity(work.len());
    let mut measures = Vec::with_capacity(work.len());
    for ((&n, w), row) in indices.iter().zip(&work).zip(&assignment) {
        let a = seq.get(n)?;
        let mut l = vec![0u32; a.len()];
        for v in w.separator.iter() {
            l[v] = 1;
        }
        // Larger atoms win any overlap, so walk from the smallest.
        for (i, atom) in w.atoms.iter().enumerate().rev() {
            for ((part, _), &(g, k)) in atom.iter().flat_map(|a| &a.parts).zip(&row[i]) {
                let id = mark_id[&(i + 1, g, k)];
                for v in part.iter() {
                    l[v] = id;
                }
            }
        }
        measures.push(mark_measures(&a, &l, marks.len()));
        labels.push(l);
    }

    let atoms = schedule
        .atoms
        .iter()
        .enumerate()
        .map(|(i, sched)| {
            let per_index = indices
                .iter()
                .zip(&work)
                .map(|(&n, w)| {
                    let a = w.atoms[i].as_ref();
                    Ok(AtomAtIndex {
                        index: n,
                        level: a.map(|a| a.level.z),
                        radius: a.map(|a| a.level.delta),
                        centers: a.map(|a| a.centers.clone()).unwrap_or_default(),
                        core_size: a.map_or(0, |a| a.core.len()),
                        measure: a.map_or(Ok(0.0), |a| seq.get(n).map(|s| s.measure(&a.cluster)))?,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(AtomClustering {
                lambda: sched.lambda,
                mass: sched.mass,
                count: sched.count,
                groups: groups[i].len(),
                per_index,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let violations: Vec<Violation> = work.into_iter().flat_map(|w| w.violations).collect();
    let status = if violations.iter().any(|v| window.contains(&v.index)) {
        Status::Diagnostic
    } else {
        Status::Verified
    };
    let mut warnings = report.warnings.clone();
    warnings.extend(schedule.warnings.iter().cloned());
    Ok(ClusteringResult {
        status,
        indices,
        marks,
        labels,
        measures,
        atoms,
        clip: None,
        schedule: Some(schedule.clone()),
        violations,
        warnings,
    })
}

/// A candidate `(atom, group)` and how far `X` is from its best-overlapping member.
#[derive(Clone, Debug, Serialize)]
pub struct GroupDistance {
    pub atom: usize,
    pub group: usize,
    /// Per-radius supremum over the tail of `nu(B[d](X symmetric-difference member))`.
    pub tail_sup: Vec<f64>,
    pub negligible: bool,
    /// Member chosen at each index; `None` when the group is absent there.
    pub members: Vec<(usize, Option<usize>)>,
}

#[derive(Clone, Debug, Serialize)]
pub struct GlobularMatch {
    /// The matching `(atom, group)`, if any differs from `X` by a negligible sequence.
    pub matched: Option<(usize, usize)>,
    pub candidates: Vec<GroupDistance>,
}

/// Finds the interweaving group one of whose members agrees with `x` up to a negligible
/// sequence.
pub fn characterize_globular(
    seq: &StructureSequence,
    x: &SubsetSequence,
    result: &ClusteringResult,
    cfg: &Config,
) -> Result<GlobularMatch> {
    x.check_aligned(seq)?;
    if !result.indices.iter().copied().eq(seq.indices()) {
        return input("the clustering does not cover the sequence");
    }
    let mut pairs: BTreeMap<(usize, usize), Vec<(usize, u32)>> = BTreeMap::new();
    for (id, mark) in result.marks.iter().enumerate() {
        if let MarkKind::Globular { atom, group, member } = mark.kind {
            pairs.entry((atom, group)).or_default().push((member, id as u32));
        }
    }
    let mut candidates = Vec::new();
    for ((atom, group), members) in pairs {
        let mut chosen = Vec::new();
        let mut sets = BTreeMap::new();
        for (row, &n) in result.indices.iter().enumerate() {
            let a = seq.get(n)?;
            let xn = x.get(n).expect("aligned");
            let labels = &result.labels[row];
            let mut best: Option<(f64, usize, VertexSet)> = None;
            for &(member, id) in &members {
                let set = VertexSet::from_ids(a.len(), (0..a.len()).filter(|&v| labels[v] == id));
                if set.is_empty() {
                    continue;
                }
                let overlap = a.measure(&set.intersection(xn));
                if best.as_ref().is_none_or(|b| overlap > b.0) {
                    best = Some((overlap, member, set));
                }
            }
            chosen.push((n, best.as_ref().map(|b| b.1)));
            let member_set = best.map_or_else(|| VertexSet::empty(a.len()), |b| b.2);
            sets.insert(n, member_set.symmetric_difference(xn));
        }
        let profile = negligible_profile(seq, &SubsetSequence::new(sets), cfg.dmax, cfg.window, cfg.tol)?;
        candidates.push(GroupDistance {
            atom,
            group,
            tail_sup: profile.tail_sup,
            negligible: profile.negligible,
            members: chosen,
        });
    }
    let matched = candidates
        .iter()
        .filter(|c| c.negligible)
        .min_by(|a, b| {
            let worst = |c: &GroupDistance| c.tail_sup.iter().copied().fold(0.0, f64::max);
            worst(a).total_cmp(&worst(b))
        })
        .map(|c| (c.atom, c.group));
    Ok(GlobularMatch { matched, candidates })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{Family, TrueLabel};
    use crate::globular::build_schedule;
    use crate::spectrum::detect_spectrum;

    fn run(family: Family, start: usize, end: usize) -> (StructureSequence, ClusteringResult) {
        let seq = StructureSequence::from_generator(family, start, end).unwrap();
        let cfg = Config::default();
        let report = detect_spectrum(&seq, &cfg).unwrap();
        let schedule = build_schedule(&report, &seq, &cfg).unwrap();
        let result = assemble_clustering(&seq, &report, &schedule, &cfg).unwrap();
        (seq, result)
    }

    #[test]
    fn equal_cliques_interweave() {
        let (seq, r) = run(Family::clique_pair(0.5, 0.5), 20, 40);
        assert_eq!(r.status, Status::Verified, "{:?}", r.violations);
        let names: Vec<&str> = r.marks.iter().map(|m| m.name.as_str()).collect();
        assert_eq!(names, ["M_R", "M_S", "M_1_1_1", "M_1_1_2"]);
        for &n in &seq.window(0.25) {
            let a = seq.get(n).unwrap();
            let (clusters, residual, separator) = r.mass_split(n).unwrap();
            assert!((clusters - 1.0).abs() < 1e-9 && residual == 0.0 && separator == 0.0);
            let truth = seq.truth(n).unwrap().unwrap();
            for v in 0..a.len() {
                assert!(matches!(truth.labels[v], TrueLabel::Globular { .. }));
                assert!(r.marks[r.labels_at(n).unwrap()[v] as usize].kind.is_cluster());
            }
        }
    }

    #[test]
    fn cliques_with_a_path() {
        let (seq, r) = run(Family::clique_pair(0.5, 0.3), 20, 40);
        assert_eq!(r.atoms.len(), 2);
        let n = 40;
        let (clusters, residual, separator) = r.mass_split(n).unwrap();
        assert!((clusters - 0.8).abs() < 0.01, "{clusters}");
        assert!((residual - 0.2).abs() < 0.01 && separator < 0.01);
        let a = seq.get(n).unwrap();
        let big = r.atom_set(n, 1).unwrap();
        assert!((a.measure(&big) - 0.5).abs() < 0.01);
    }

    #[test]
    fn centers_are_separated() {
        let edges: Vec<_> = (0..29).map(|i| (i, i + 1)).collect();
        let path = Structure::from_edges(30, &edges, Structure::uniform_weights(30)).unwrap();
        let centers = build_centers(&path, &path.all(), 7);
        assert_eq!(centers, vec![0, 7, 14, 21, 28]);
    }

    #[test]
    fn characterization() {
        let (seq, r) = run(Family::clique_pair(0.5, 0.5), 20, 40);
        let cfg = Config::default();
        let clique = SubsetSequence::from_fn(&seq, |n, _| Ok(VertexSet::from_ids(seq.get(n)?.len(), 0..n))).unwrap();
        let m = characterize_globular(&seq, &clique, &r, &cfg).unwrap();
        assert_eq!(m.matched, Some((1, 1)));

        let (seq, r) = run(Family::clique_pair(0.5, 0.3), 20, 40);
        let path = SubsetSequence::from_fn(&seq, |n, s| {
            let truth = seq.truth(n)?.expect("generated");
            Ok(VertexSet::from_ids(s.len(), (0..s.len()).filter(|&v| truth.labels[v] == TrueLabel::Residual)))
        })
        .unwrap();
        assert_eq!(characterize_globular(&seq, &path, &r, &cfg).unwrap().matched, None);
    }
}
