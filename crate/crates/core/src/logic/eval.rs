//! Model checking and Stone pairings.

use std::sync::OnceLock;

use rayon::prelude::*;

use super::ast::{Formula, Var};
use super::locality::free_bounds;
use crate::error::{input, Result};
use crate::structure::{Relation, Structure};

/// Sorted `(vertex, distance)` lists of every ball of a fixed radius, built on demand.
pub(crate) struct BallIndex<'a> {
    s: &'a Structure,
    radius: u32,
    balls: Vec<OnceLock<Vec<(u32, u32)>>>,
}

impl<'a> BallIndex<'a> {
    pub(crate) fn new(s: &'a Structure, radius: u32) -> Self {
        BallIndex {
            s,
            radius,
            balls: (0..s.len()).map(|_| OnceLock::new()).collect(),
        }
    }

    pub(crate) fn ball(&self, v: usize) -> &[(u32, u32)] {
        self.balls[v].get_or_init(|| {
            let dist = self.s.distances_from(v, Some(self.radius));
            dist.iter()
                .enumerate()
                .filter(|(_, &d)| d <= self.radius)
                .map(|(w, &d)| (w as u32, d))
                .collect()
        })
    }

    /// Distance if at most the index radius.
    fn dist(&self, u: usize, v: usize) -> Option<u32> {
        let ball = self.ball(u);
        ball.binary_search_by_key(&(v as u32), |&(w, _)| w)
            .ok()
            .map(|i| ball[i].1)
    }
}

enum Node<'a> {
    Const(bool),
    Atom(&'a Relation, Vec<Var>),
    Eq(Var, Var),
    DistLe(Var, Var, u32),
    DistGt(Var, Var, u32),
    Not(Box<Node<'a>>),
    And(Vec<Node<'a>>),
    Or(Vec<Node<'a>>),
    Exists(u32, Var, u32, Box<Node<'a>>),
    Forall(u32, Var, u32, Box<Node<'a>>),
}

fn compile<'a>(f: &Formula, s: &'a Structure) -> Result<Node<'a>> {
    Ok(match f {
        Formula::True => Node::Const(true),
        Formula::False => Node::Const(false),
        Formula::Atom { rel, args } => match s.relation(rel) {
            Some(r) if r.arity() == args.len() => Node::Atom(r, args.clone()),
            Some(r) => {
                return input(format!(
                    "relation '{rel}' has arity {} but is used with {} arguments",
                    r.arity(),
                    args.len()
                ))
            }
            None => return input(format!("unknown relation '{rel}'")),
        },
        Formula::Eq(a, b) => Node::Eq(*a, *b),
        Formula::DistLe(a, b, r) => Node::DistLe(*a, *b, *r),
        Formula::DistGt(a, b, r) => Node::DistGt(*a, *b, *r),
        Formula::Not(g) => Node::Not(Box::new(compile(g, s)?)),
        Formula::And(gs) => Node::And(gs.iter().map(|g| compile(g, s)).collect::<Result<_>>()?),
        Formula::Or(gs) => Node::Or(gs.iter().map(|g| compile(g, s)).collect::<Result<_>>()?),
        Formula::Exists { var, center, radius, body } => {
            Node::Exists(*var, *center, *radius, Box::new(compile(body, s)?))
        }
        Formula::Forall { var, center, radius, body } => {
            Node::Forall(*var, *center, *radius, Box::new(compile(body, s)?))
        }
    })
}

/// A formula compiled against one structure.
pub struct Checker<'a> {
    root: Node<'a>,
    balls: BallIndex<'a>,
    arity: usize,
    slots: usize,
    /// Entailed bounds used to prune tuple enumeration: for each position `j > 0`,
    /// an earlier position and a radius that every satisfying tuple respects.
    anchors: Vec<Option<(usize, u32)>>,
}

impl<'a> Checker<'a> {
    pub fn new(f: &Formula, s: &'a Structure) -> Result<Self> {
        let root = compile(f, s)?;
        let arity = f.arity();
        let bounds = free_bounds(f);
        let mut anchors = vec![None; arity];
        for j in 1..arity {
            anchors[j] = (0..j)
                .filter_map(|i| bounds[i][j].map(|d| (i, d)))
                .min_by_key(|&(_, d)| d);
        }
        let radius = f
            .max_radius()
            .max(anchors.iter().flatten().map(|a| a.1).max().unwrap_or(0));
        Ok(Checker {
            root,
            balls: BallIndex::new(s, radius),
            arity,
            slots: f.bound_slots(),
            anchors,
        })
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn holds(&self, tuple: &[usize]) -> bool {
        let mut env = vec![usize::MAX; self.slots];
        self.eval(&self.root, tuple, &mut env)
    }

    fn value(v: Var, tuple: &[usize], env: &[usize]) -> usize {
        match v {
            Var::Free(k) => tuple[k as usize],
            Var::Bound(id) => env[id as usize],
        }
    }

    fn eval(&self, n: &Node, tuple: &[usize], env: &mut Vec<usize>) -> bool {
        match n {
            Node::Const(b) => *b,
            Node::Atom(rel, args) => {
                let mut buf = [0u32; 16];
                if args.len() <= buf.len() {
                    for (slot, a) in buf.iter_mut().zip(args) {
                        *slot = Self::value(*a, tuple, env) as u32;
                    }
                    rel.contains(&buf[..args.len()])
                } else {
                    let t: Vec<u32> = args.iter().map(|a| Self::value(*a, tuple, env) as u32).collect();
                    rel.contains(&t)
                }
            }
            Node::Eq(a, b) => Self::value(*a, tuple, env) == Self::value(*b, tuple, env),
            Node::DistLe(a, b, r) => self
                .balls
                .dist(Self::value(*a, tuple, env), Self::value(*b, tuple, env))
                .is_some_and(|d| d <= *r),
            Node::DistGt(a, b, r) => !self
                .balls
                .dist(Self::value(*a, tuple, env), Self::value(*b, tuple, env))
                .is_some_and(|d| d <= *r),
            Node::Not(g) => !self.eval(g, tuple, env),
            Node::And(gs) => gs.iter().all(|g| self.eval(g, tuple, env)),
            Node::Or(gs) => gs.iter().any(|g| self.eval(g, tuple, env)),
            Node::Exists(id, center, r, body) | Node::Forall(id, center, r, body) => {
                let existential = matches!(n, Node::Exists(..));
                let c = Self::value(*center, tuple, env);
                let saved = env[*id as usize];
                let mut result = !existential;
                for &(w, d) in self.balls.ball(c) {
                    if d > *r {
                        continue;
                    }
                    env[*id as usize] = w as usize;
                    if self.eval(body, tuple, env) == existential {
                        result = existential;
                        break;
                    }
                }
                env[*id as usize] = saved;
                result
            }
        }
    }

    /// Calls `visit` on every tuple that can satisfy the formula given the entailed bounds,
    /// in lexicographic order, with position 0 fixed to `first`.
    fn candidates(&self, first: usize, skip_zero: Option<&[f64]>, visit: &mut impl FnMut(&[usize])) {
        let mut tuple = vec![first; self.arity];
        self.extend(1, &mut tuple, skip_zero, visit);
    }

    fn extend(&self, j: usize, tuple: &mut Vec<usize>, skip_zero: Option<&[f64]>, visit: &mut impl FnMut(&[usize])) {
        if j == self.arity {
            visit(tuple);
            return;
        }
        let keep = |w: usize| skip_zero.is_none_or(|ws| ws[w] > 0.0);
        match self.anchors[j] {
            Some((i, r)) => {
                let ball = self.balls.ball(tuple[i]);
                for &(w, d) in ball {
                    if d <= r && keep(w as usize) {
                        tuple[j] = w as usize;
                        self.extend(j + 1, tuple, skip_zero, visit);
                    }
                }
            }
            None => {
                for w in 0..self.balls.s.len() {
                    if keep(w) {
                        tuple[j] = w;
                        self.extend(j + 1, tuple, skip_zero, visit);
                    }
                }
            }
        }
    }

    fn mass_at(&self, first: usize, weights: &[f64]) -> f64 {
        let mut total = 0.0;
        self.candidates(first, Some(weights), &mut |t| {
            if self.holds(t) {
                total += t[1..].iter().map(|&v| weights[v]).product::<f64>();
            }
        });
        total
    }
}

/// Below this many vertices the per-vertex fan-out is not worth a thread hop.
const PARALLEL_THRESHOLD: usize = 64;

/// All satisfying tuples in lexicographic order.
pub fn satisfaction_set(f: &Formula, s: &Structure) -> Result<Vec<Vec<usize>>> {
    let c = Checker::new(f, s)?;
    if c.arity == 0 {
        return Ok(if c.holds(&[]) { vec![Vec::new()] } else { Vec::new() });
    }
    let mut out = Vec::new();
    for first in 0..s.len() {
        c.candidates(first, None, &mut |t| {
            if c.holds(t) {
                out.push(t.to_vec());
            }
        });
    }
    Ok(out)
}

/// `<φ, A>`: the product measure of the satisfaction set.
pub fn stone_pairing(f: &Formula, s: &Structure) -> Result<f64> {
    let c = Checker::new(f, s)?;
    Ok(pairing_with(&c, s))
}

pub(crate) fn pairing_with(c: &Checker, s: &Structure) -> f64 {
    if c.arity == 0 {
        return if c.holds(&[]) { 1.0 } else { 0.0 };
    }
    let w = s.weights();
    let per_vertex: Vec<f64> = if s.len() >= PARALLEL_THRESHOLD {
        (0..s.len())
            .into_par_iter()
            .map(|v| if w[v] > 0.0 { w[v] * c.mass_at(v, w) } else { 0.0 })
            .collect()
    } else {
        (0..s.len())
            .map(|v| if w[v] > 0.0 { w[v] * c.mass_at(v, w) } else { 0.0 })
            .collect()
    };
    per_vertex.iter().sum()
}

/// `<φ, A>_v`: the pairing with the first free variable pinned to `v`.
pub fn local_stone_pairing(f: &Formula, s: &Structure, v: usize) -> Result<f64> {
    s.check_vertex(v)?;
    let c = Checker::new(f, s)?;
    if c.arity == 0 {
        return input("the local pairing needs at least one free variable");
    }
    Ok(c.mass_at(v, s.weights()))
}

/// Local pairings at every vertex, in vertex order.
pub fn local_stone_pairings(f: &Formula, s: &Structure) -> Result<Vec<f64>> {
    let c = Checker::new(f, s)?;
    if c.arity == 0 {
        return input("the local pairing needs at least one free variable");
    }
    let w = s.weights();
    Ok(if s.len() >= PARALLEL_THRESHOLD {
        (0..s.len()).into_par_iter().map(|v| c.mass_at(v, w)).collect()
    } else {
        (0..s.len()).map(|v| c.mass_at(v, w)).collect()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::parse_formula;

    fn clique(n: usize) -> Structure {
        let mut edges = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                edges.push((i, j));
            }
        }
        Structure::from_edges(n, &edges, Structure::uniform_weights(n)).unwrap()
    }

    #[test]
    fn pairing_examples() {
        let adj = parse_formula("adj(x1,x2)").unwrap();
        assert!((stone_pairing(&adj, &clique(3)).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        let k2 = Structure::from_edges(2, &[(0, 1)], vec![0.3, 0.7]).unwrap();
        assert!((stone_pairing(&adj, &k2).unwrap() - 0.42).abs() < 1e-15);
        let star = Structure::from_edges(4, &[(0, 1), (0, 2), (0, 3)], Structure::uniform_weights(4)).unwrap();
        assert!((local_stone_pairing(&adj, &star, 0).unwrap() - 0.75).abs() < 1e-15);
        assert!(local_stone_pairing(&adj, &star, 9).is_err());
    }

    #[test]
    fn sentences_pair_to_zero_or_one() {
        let s = clique(3);
        let yes = parse_formula("true").unwrap();
        let no = parse_formula("false & true").unwrap();
        assert_eq!(stone_pairing(&yes, &s).unwrap(), 1.0);
        assert_eq!(stone_pairing(&no, &s).unwrap(), 0.0);
    }

    #[test]
    fn unknown_relation_is_an_error() {
        let f = parse_formula("edge(x1,x2)").unwrap();
        assert!(stone_pairing(&f, &clique(3)).is_err());
        let g = parse_formula("adj(x1)").unwrap();
        assert!(stone_pairing(&g, &clique(3)).is_err());
    }

    #[test]
    fn satisfaction_set_is_sorted() {
        let path = Structure::from_edges(3, &[(0, 1), (1, 2)], Structure::uniform_weights(3)).unwrap();
        let f = parse_formula("exists y in B[1](x1): adj(x1,y) & adj(y,x2) & x1 != x2").unwrap();
        assert_eq!(satisfaction_set(&f, &path).unwrap(), vec![vec![0, 2], vec![2, 0]]);
    }

    #[test]
    fn forall_over_ball() {
        let path = Structure::from_edges(3, &[(0, 1), (1, 2)], Structure::uniform_weights(3)).unwrap();
        let f = parse_formula("forall y in B[1](x1): dist(y, x1) <= 0 | adj(x1,y)").unwrap();
        assert_eq!(satisfaction_set(&f, &path).unwrap().len(), 3);
        let g = parse_formula("forall y in B[2](x1): adj(x1,y) | y = x1").unwrap();
        assert_eq!(satisfaction_set(&g, &path).unwrap(), vec![vec![1]]);
    }
}
