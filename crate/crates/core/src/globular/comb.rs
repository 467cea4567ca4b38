use serde::Serialize;

use super::{mark_measures, ClusteringResult, Mark, MarkKind, Status, Violation};
use crate::config::Config;
use crate::error::{input, Result};
use crate::sequences::{StructureSequence, SubsetSequence};
use crate::structure::{Structure, VertexSet};

/// The index functions that decide which input clusters get their own mark.
#[derive(Clone, Debug, Serialize)]
pub struct Clip {
    /// Limit measure assumed for each cluster.
    pub limits: Vec<f64>,
    /// Per index: how many leading clusters already sit near their limits.
    pub mass_clip: Vec<usize>,
    /// `border_index[a - 1]`: first index from which the borders of clusters `1..=a`
    /// stay thin at radii `1..=a`; `None` if that never happens within the range.
    pub border_index: Vec<Option<usize>>,
    /// Per index: how many leading clusters are marked.
    pub clip: Vec<usize>,
    /// First index at which each cluster is marked.
    pub activation: Vec<Option<usize>>,
    /// Overlapping input was trimmed against earlier clusters.
    pub trimmed: bool,
}

/// Overlap or adjacency between distinct clusters, as `(index, i, j)` with `i < j`, 1-based.
fn contacts(a: &Structure, sets: &[&VertexSet]) -> Option<(usize, usize)> {
    let mut owner = vec![usize::MAX; a.len()];
    for (i, set) in sets.iter().enumerate() {
        for v in set.iter() {
            if owner[v] != usize::MAX {
                return Some((owner[v] + 1, i + 1));
            }
            owner[v] = i;
        }
    }
    for v in 0..a.len() {
        if owner[v] == usize::MAX {
            continue;
        }
        for &w in a.neighbors(v) {
            let o = owner[w as usize];
            if o != usize::MAX && o != owner[v] {
                return Some((owner[v].min(o) + 1, owner[v].max(o) + 1));
            }
        }
    }
    None
}

/// `C^i` minus the unit ball around every earlier cluster.
fn trim(a: &Structure, sets: &[&VertexSet]) -> Vec<VertexSet> {
    let mut earlier = VertexSet::empty(a.len());
    sets.iter()
        .map(|set| {
            let out = set.difference(&a.ball_unchecked(&earlier, Some(1)));
            earlier.union_with(set);
            out
        })
        .collect()
}

/// Marks the leading clusters of a list as they settle, folding the rest into the residual.
///
/// `limits` defaults to the tail mean of each cluster's measure.
pub fn clip_comb(
    seq: &StructureSequence,
    clusters: &[SubsetSequence],
    limits: Option<&[f64]>,
    cfg: &Config,
) -> Result<ClusteringResult> {
    if clusters.is_empty() {
        return input("no clusters to comb");
    }
    for c in clusters {
        c.check_aligned(seq)?;
    }
    if limits.is_some_and(|l| l.len() != clusters.len()) {
        return input("one limit per cluster is required");
    }
    let indices: Vec<usize> = seq.indices().collect();
    let window = seq.window(cfg.window);
    let first_tail = indices.len() - window.len();
    let mut warnings = Vec::new();

    let sets_at = |n: usize| -> Vec<&VertexSet> { clusters.iter().map(|c| c.get(n).expect("aligned")).collect() };
    let touching = seq.map_indices(&indices, |n, a| Ok(contacts(a, &sets_at(n)).map(|c| (n, c))))?;
    let mut trimmed = false;
    let sets: Vec<Vec<VertexSet>> = if let Some((n, (i, j))) = touching.iter().flatten().next().copied() {
        let trimmed_sets = seq.map_indices(&indices, |n, a| Ok(trim(a, &sets_at(n))))?;
        let lost: Vec<f64> = indices
            .iter()
            .zip(&trimmed_sets)
            .map(|(&n, row)| {
                let a = seq.get(n)?;
                let before: f64 = sets_at(n).iter().map(|s| a.measure(s)).sum();
                Ok(before - row.iter().map(|s| a.measure(s)).sum::<f64>())
            })
            .collect::<Result<_>>()?;
        let worst = lost[first_tail..].iter().copied().fold(0.0, f64::max);
        if worst >= cfg.tol {
            return input(format!(
                "clusters {i} and {j} touch at index {n} and trimming removes measure {worst}"
            ));
        }
        warnings.push(format!("clusters {i} and {j} touch at index {n}; trimmed against earlier clusters"));
        trimmed = true;
        trimmed_sets
    } else {
        indices.iter().map(|&n| sets_at(n).into_iter().cloned().collect()).collect()
    };

    let measures: Vec<Vec<f64>> = indices
        .iter()
        .zip(&sets)
        .map(|(&n, row)| {
            let a = seq.get(n)?;
            Ok(row.iter().map(|s| a.measure(s)).collect())
        })
        .collect::<Result<_>>()?;
    let count = clusters.len();
    let limits: Vec<f64> = match limits {
        Some(l) => l.to_vec(),
        None => (0..count)
            .map(|i| measures[first_tail..].iter().map(|row| row[i]).sum::<f64>() / window.len() as f64)
            .collect(),
    };
    let tail_of: Vec<f64> = (0..=count).map(|t| limits[t..].iter().sum()).collect();

    let settled = |row: usize, t: usize| {
        measures[row..]
            .iter()
            .all(|m| (0..t).map(|i| (m[i] - limits[i]).abs()).sum::<f64>() <= tail_of[t] + 1e-12)
    };
    let mass_clip: Vec<usize> = indices
        .iter()
        .enumerate()
        .map(|(row, &n)| (0..=n.min(count)).rev().find(|&t| settled(row, t)).unwrap_or(0))
        .collect();

    let reach = mass_clip.iter().copied().max().unwrap_or(0);
    let border_measures: Vec<Vec<Vec<f64>>> = seq.map_indices(&indices, |n, a| {
        let row = indices.iter().position(|&m| m == n).expect("listed");
        sets[row][..reach]
            .iter()
            .map(|c| {
                let mut border = a.ball_unchecked(c, Some(1));
                border.difference_with(c);
                a.ball_measures(&border, reach as u32)
            })
            .collect()
    })?;
    let thin_from = |i: usize, d: usize| -> Option<usize> {
        let bound = 0.5f64.powi(i as i32) / d as f64;
        let mut first = None;
        for row in (0..indices.len()).rev() {
            if border_measures[row][i - 1][d] > bound {
                break;
            }
            first = Some(indices[row]);
        }
        first
    };
    let mut border_index: Vec<Option<usize>> = Vec::with_capacity(reach);
    for a in 1..=reach {
        let prev = if a == 1 { Some(0) } else { border_index[a - 2] };
        let mut worst = prev;
        for (i, d) in (1..=a).flat_map(|i| (1..=a).map(move |d| (i, d))).filter(|&(i, d)| i == a || d == a) {
            worst = match (worst, thin_from(i, d)) {
                (Some(w), Some(t)) => Some(w.max(t)),
                _ => None,
            };
        }
        border_index.push(worst);
    }
    let clip: Vec<usize> = indices
        .iter()
        .zip(&mass_clip)
        .map(|(&n, &f)| {
            let by_border = border_index.iter().take_while(|m| m.is_some_and(|m| m <= n)).count();
            f.min(by_border)
        })
        .collect();
    let activation: Vec<Option<usize>> = (1..=count)
        .map(|i| indices.iter().zip(&clip).find(|(_, &g)| g >= i).map(|(&n, _)| n))
        .collect();

    let marked = clip.iter().copied().max().unwrap_or(0);
    let mut marks = vec![Mark::new(MarkKind::Residual), Mark::new(MarkKind::Separator)];
    marks.extend((1..=marked).map(|cluster| Mark::new(MarkKind::Comb { cluster })));
    let mut labels = Vec::with_capacity(indices.len());
    let mut mark_mass = Vec::with_capacity(indices.len());
    for (row, &n) in indices.iter().enumerate() {
        let a = seq.get(n)?;
        let mut l = vec![0u32; a.len()];
        let mut taken = VertexSet::empty(a.len());
        for c in &sets[row][..clip[row]] {
            taken.union_with(c);
        }
        for v in a.ball_unchecked(&taken, Some(1)).difference(&taken).iter() {
            l[v] = 1;
        }
        for (i, c) in sets[row][..clip[row]].iter().enumerate() {
            for v in c.iter() {
                l[v] = 2 + i as u32;
            }
        }
        mark_mass.push(mark_measures(&a, &l, marks.len()));
        labels.push(l);
    }

    let mut violations = Vec::new();
    let expected: f64 = limits.iter().sum();
    for (row, &n) in indices.iter().enumerate().skip(first_tail) {
        let carried: f64 = measures[row][..mass_clip[row]].iter().sum();
        if (carried - expected).abs() >= cfg.tol {
            violations.push(Violation {
                index: n,
                check: "clipped-mass".into(),
                atom: None,
                detail: format!("leading clusters carry {carried}, limits sum to {expected}"),
            });
        }
    }
    let status = if violations.is_empty() { Status::Verified } else { Status::Diagnostic };
    Ok(ClusteringResult {
        status,
        indices,
        marks,
        labels,
        measures: mark_mass,
        atoms: Vec::new(),
        clip: Some(Clip { limits, mass_clip, border_index, clip, activation, trimmed }),
        schedule: None,
        violations,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{star_limit_measure, Family};

    /// The `i`-th star (1-based) at every index; stars are generated largest first.
    fn stars(seq: &StructureSequence, count: usize) -> Vec<SubsetSequence> {
        (0..count)
            .map(|i| {
                SubsetSequence::from_fn(seq, |_, s| {
                    let comps = s.components_within(&s.all());
                    Ok(comps.get(i).cloned().unwrap_or_else(|| VertexSet::empty(s.len())))
                })
                .unwrap()
            })
            .collect()
    }

    #[test]
    fn star_forest_comb() {
        let seq = StructureSequence::from_generator(Family::StarForest {}, 3, 10).unwrap();
        let list = stars(&seq, 12);
        let limits: Vec<f64> = (1..=12).map(star_limit_measure).collect();
        let r = clip_comb(&seq, &list, Some(&limits), &Config::default()).unwrap();
        let clip = r.clip.as_ref().unwrap();
        assert!(clip.clip.windows(2).all(|w| w[0] <= w[1]));
        assert!(clip.clip.iter().zip(&r.indices).all(|(&g, &n)| g <= n));
        assert!(*clip.clip.last().unwrap() >= 5, "{:?}", clip.clip);
        let (marked, residual, separator) = r.mass_split(10).unwrap();
        assert!((marked + residual + separator - 1.0).abs() < 1e-9);
        assert_eq!(separator, 0.0);
        assert!(!r.residual(10).unwrap().is_empty());
    }

    #[test]
    fn overlapping_clusters_are_rejected() {
        let seq = StructureSequence::from_generator(Family::clique_pair(0.5, 0.5), 4, 8).unwrap();
        let whole = SubsetSequence::full(&seq).unwrap();
        let err = clip_comb(&seq, &[whole.clone(), whole], None, &Config::default());
        assert!(err.is_err());
    }
}
