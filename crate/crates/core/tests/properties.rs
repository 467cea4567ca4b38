use limclust::config::Config;
use limclust::globular::{build_z, level_width, AtomSchedule, Level};
use limclust::logic::{
    is_strongly_local, locality_radius, parse_formula, stone_pairing, strongly_local_decomposition, Checker,
};
use limclust::sequences::{is_cluster, default_battery, StructureSequence, SubsetSequence};
use limclust::spectrum::{moment_formula, moment_table, BallMeasureSample};
use limclust::{Formula, Structure, VertexSet};
use proptest::prelude::*;

fn graph() -> impl Strategy<Value = Structure> {
    (2usize..9).prop_flat_map(|n| {
        let pairs: Vec<(usize, usize)> = (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v))).collect();
        let m = pairs.len();
        (
            proptest::sample::subsequence(pairs, 0..=m),
            proptest::collection::vec(0.05f64..1.0, n),
        )
            .prop_map(move |(edges, w)| {
                let total: f64 = w.iter().sum();
                Structure::from_edges(n, &edges, w.iter().map(|x| x / total).collect()).unwrap()
            })
    })
}

fn subset(n: usize) -> impl Strategy<Value = VertexSet> {
    proptest::collection::vec(any::<bool>(), n)
        .prop_map(move |bits| VertexSet::from_ids(n, (0..n).filter(|&v| bits[v])))
}

fn graph_and_subset() -> impl Strategy<Value = (Structure, VertexSet)> {
    graph().prop_flat_map(|s| {
        let n = s.len();
        (Just(s), subset(n))
    })
}

/// Formula text over the variables in scope; quantifiers bind fresh `y` names.
fn formula_text(depth: u32, vars: Vec<String>, fresh: u32) -> BoxedStrategy<String> {
    let pick = proptest::sample::select(vars.clone());
    let leaf = (pick.clone(), pick, 0u32..3, 0usize..4)
        .prop_map(|(a, b, k, kind)| match kind {
            0 => format!("adj({a},{b})"),
            1 => format!("{a} = {b}"),
            2 => format!("dist({a},{b}) <= {k}"),
            _ => format!("dist({a},{b}) > {k}"),
        })
        .boxed();
    if depth == 0 {
        return leaf;
    }
    let sub = formula_text(depth - 1, vars.clone(), fresh);
    let mut scoped = vars.clone();
    let y = format!("y{fresh}");
    scoped.push(y.clone());
    let body = formula_text(depth - 1, scoped, fresh + 1);
    let centre = proptest::sample::select(vars);
    prop_oneof![
        2 => leaf,
        1 => sub.clone().prop_map(|f| format!("!({f})")),
        1 => (sub.clone(), sub.clone()).prop_map(|(f, g)| format!("({f}) & ({g})")),
        1 => (sub.clone(), sub).prop_map(|(f, g)| format!("({f}) | ({g})")),
        1 => (centre, 1u32..3, body, any::<bool>()).prop_map(move |(c, r, b, ex)| {
            let q = if ex { "exists" } else { "forall" };
            format!("{q} {y} in B[{r}]({c}): ({b})")
        }),
    ]
    .boxed()
}

fn formula() -> impl Strategy<Value = Formula> {
    formula_text(2, vec!["x1".into(), "x2".into()], 1).prop_map(|t| parse_formula(&t).expect("generated text parses"))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn balls_compose_and_boundaries_are_thin((s, x) in graph_and_subset(), r in 0u32..3, t in 0u32..3) {
        prop_assert!((s.weights().iter().sum::<f64>() - 1.0).abs() < 1e-9);
        let inner = s.ball(&x, Some(r)).unwrap();
        prop_assert!(x.is_subset(&inner));
        prop_assert_eq!(s.ball(&inner, Some(t)).unwrap(), s.ball(&x, Some(r + t)).unwrap());
        let boundary = s.outer_boundary(&x).unwrap();
        prop_assert!(boundary.is_disjoint(&x));
        prop_assert_eq!(boundary.union(&x), s.ball(&x, Some(1)).unwrap());
        // every edge leaving X lands in its boundary
        for v in x.iter() {
            for &w in s.neighbors(v) {
                prop_assert!(x.contains(w as usize) || boundary.contains(w as usize));
            }
        }
        let measures = s.ball_measures(&x, 4).unwrap();
        prop_assert!(measures.windows(2).all(|p| p[0] <= p[1] + 1e-12));
        prop_assert!((s.measure(&x) + s.measure(&x.complement()) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn truth_depends_only_on_the_local_ball(s in graph(), f in formula(), u in 0usize..8, v in 0usize..8) {
        let n = s.len();
        let tuple = [u % n, v % n];
        let arity = f.arity();
        prop_assume!(arity <= 2);
        let tuple = &tuple[..arity];
        let radius = locality_radius(&f);
        let ball = s.ball(&VertexSet::from_ids(n, tuple.iter().copied()), Some(radius)).unwrap();
        let (local, ids) = s.induce(&ball).unwrap();
        let renamed: Vec<usize> = tuple.iter().map(|t| ids.iter().position(|i| i == t).unwrap()).collect();
        let whole = Checker::new(&f, &s).unwrap().holds(tuple);
        let part = Checker::new(&f, &local).unwrap().holds(&renamed);
        prop_assert_eq!(whole, part, "{} at {:?}", f, tuple);
    }

    #[test]
    fn strongly_local_pairings_add_over_disjoint_unions(a in graph(), b in graph(), f in formula(), c in 0.1f64..0.9) {
        prop_assume!(f.arity() >= 1 && is_strongly_local(&f));
        let sum = Structure::weighted_sum(&[(c, &a), (1.0 - c, &b)]).unwrap();
        let p = f.arity() as i32;
        let expected = c.powi(p) * stone_pairing(&f, &a).unwrap() + (1.0 - c).powi(p) * stone_pairing(&f, &b).unwrap();
        prop_assert!((stone_pairing(&f, &sum).unwrap() - expected).abs() < 1e-9, "{}", f);
    }

    #[test]
    fn decomposition_is_exact(s in graph(), f in formula()) {
        let Ok(poly) = strongly_local_decomposition(&f) else { return Ok(()) };
        let direct = stone_pairing(&f, &s).unwrap();
        prop_assert!((poly.evaluate(&s).unwrap() - direct).abs() < 1e-9, "{}", f);
    }

    #[test]
    fn moments_are_pairings(s in graph(), d in 0u32..3, w in 0usize..4) {
        let table = moment_table(&s, d, w).unwrap();
        let psi = stone_pairing(&moment_formula(d, w), &s).unwrap();
        prop_assert!((table.moments[w] - psi).abs() < 1e-9);
    }

    #[test]
    fn ball_measures_couple_monotonically(s in graph(), d1 in 0u32..3, extra in 1u32..3, t1 in 0.0f64..1.0, width in 0.0f64..1.0) {
        let d2 = d1 + extra;
        let sample = BallMeasureSample::new(&s, &[d1, d2]);
        prop_assert!((0..s.len()).all(|v| sample.values[0][v] <= sample.values[1][v] + 1e-12));
        let t2 = t1 + width;
        let (f1, f2) = (sample.cdf(0), sample.cdf(1));
        let p = sample.interval_probability(0, 1, t1, t2);
        prop_assert!(f2.eval(t2) - f1.eval(t1) <= p + 1e-12);
        prop_assert!(p <= f1.eval(t2) - f1.eval(t1) + 1e-12);
    }

    #[test]
    fn cores_shrink_with_depth(s in graph(), lambda in 0.1f64..0.9, steps in proptest::collection::vec(0u32..2, 4)) {
        let z0 = 2;
        let mut delta = 1;
        let levels: Vec<Level> = steps
            .iter()
            .enumerate()
            .map(|(k, step)| {
                delta += step;
                let z = z0 + k as u32;
                let eps = level_width(z);
                Level { z, epsilon: eps, alpha: lambda - 0.45 * eps, beta: lambda + 0.45 * eps, delta, eta: 0 }
            })
            .collect();
        let schedule = AtomSchedule { lambda, mass: lambda, count: 1, z0, levels };
        for z in z0..z0 + 3 {
            let outer = build_z(&s, &schedule, z, 0);
            let inner = build_z(&s, &schedule, z + 1, 0);
            prop_assert!(inner.is_subset(&outer));
        }
    }
}

/// Three cliques per index, sizes growing with `n`, with fixed total weights.
fn three_cliques(weights: [f64; 3]) -> StructureSequence {
    let structures = (6..=14)
        .map(|n| {
            let sizes = [n, n + 1, n + 2];
            let mut edges = Vec::new();
            let mut w = Vec::new();
            let mut offset = 0;
            for (k, &size) in sizes.iter().enumerate() {
                for u in 0..size {
                    for v in u + 1..size {
                        edges.push((offset + u, offset + v));
                    }
                    w.push(weights[k] / size as f64);
                }
                offset += size;
            }
            Structure::from_edges(offset, &edges, w).unwrap()
        })
        .collect();
    StructureSequence::from_structures(structures, 6).unwrap()
}

fn union_of_cliques(seq: &StructureSequence, chosen: [bool; 3]) -> SubsetSequence {
    SubsetSequence::from_fn(seq, |n, s| {
        let sizes = [n, n + 1, n + 2];
        let mut ids = Vec::new();
        let mut offset = 0;
        for (k, &size) in sizes.iter().enumerate() {
            if chosen[k] {
                ids.extend(offset..offset + size);
            }
            offset += size;
        }
        Ok(VertexSet::from_ids(s.len(), ids))
    })
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn clusters_form_a_boolean_algebra(
        raw in proptest::array::uniform3(0.1f64..1.0),
        x in proptest::array::uniform3(any::<bool>()),
        y in proptest::array::uniform3(any::<bool>()),
    ) {
        let total: f64 = raw.iter().sum();
        let seq = three_cliques(raw.map(|w| w / total));
        let cfg = Config { dmax: 4, ..Config::default() };
        let battery = default_battery(&seq.signature().unwrap());
        let pass = |set: &SubsetSequence| is_cluster(&seq, set, &battery, &cfg).unwrap().verdict == limclust::sequences::Verdict::Pass;
        let (xs, ys) = (union_of_cliques(&seq, x), union_of_cliques(&seq, y));
        prop_assert!(pass(&xs) && pass(&ys));
        prop_assert!(pass(&xs.complement()));
        prop_assert!(pass(&xs.union(&ys).unwrap()));
        prop_assert!(pass(&xs.intersection(&ys).unwrap()));
        prop_assert!(pass(&xs.difference(&ys).unwrap()));
    }

    #[test]
    fn oscillation_shrinks_with_the_window(raw in proptest::array::uniform3(0.1f64..1.0), x in proptest::array::uniform3(any::<bool>())) {
        let total: f64 = raw.iter().sum();
        let seq = three_cliques(raw.map(|w| w / total));
        let battery = default_battery(&seq.signature().unwrap());
        let verdict = is_cluster(&seq, &union_of_cliques(&seq, x), &battery, &Config::default()).unwrap();
        let indices: Vec<usize> = seq.indices().collect();
        let mut previous: Option<Vec<f64>> = None;
        for start in 0..indices.len() - 1 {
            let osc = verdict.marked.oscillation_over(&indices[start..]);
            if let Some(prev) = &previous {
                prop_assert!(osc.iter().zip(prev).all(|(a, b)| a <= b || (a.is_nan() && b.is_nan())));
            }
            previous = Some(osc);
        }
    }
}

#[test]
fn battery_formulas_are_strongly_local() {
    let seq = three_cliques([0.2, 0.3, 0.5]);
    let battery = default_battery(&seq.signature().unwrap());
    assert!(battery.iter().all(is_strongly_local));
}
