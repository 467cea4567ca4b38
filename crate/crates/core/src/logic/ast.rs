use std::collections::BTreeSet;
use std::fmt;

/// A variable occurrence. `Free(k)` is printed `x{k+1}`; `Bound(id)` is printed `y{id}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Var {
    Free(u32),
    Bound(u32),
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Var::Free(k) => write!(f, "x{}", k + 1),
            Var::Bound(id) => write!(f, "y{id}"),
        }
    }
}

/// Guarded first-order formulas over a relational signature.
///
/// Quantifiers range over a ball `B[r](center)` in the Gaifman graph, which keeps
/// every formula local.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Formula {
    True,
    False,
    Atom { rel: String, args: Vec<Var> },
    Eq(Var, Var),
    DistLe(Var, Var, u32),
    DistGt(Var, Var, u32),
    Not(Box<Formula>),
    And(Vec<Formula>),
    Or(Vec<Formula>),
    Exists { var: u32, center: Var, radius: u32, body: Box<Formula> },
    Forall { var: u32, center: Var, radius: u32, body: Box<Formula> },
}

impl Formula {
    pub fn atom(rel: &str, args: impl IntoIterator<Item = Var>) -> Formula {
        Formula::Atom {
            rel: rel.to_string(),
            args: args.into_iter().collect(),
        }
    }

    /// `x{i}`, counting from one as in the surface syntax.
    pub fn x(i: u32) -> Var {
        assert!(i >= 1, "free variables are numbered from 1");
        Var::Free(i - 1)
    }

    pub fn not(f: Formula) -> Formula {
        match f {
            Formula::True => Formula::False,
            Formula::False => Formula::True,
            Formula::Not(inner) => *inner,
            other => Formula::Not(Box::new(other)),
        }
    }

    /// Conjunction with constant folding and flattening.
    pub fn and(parts: impl IntoIterator<Item = Formula>) -> Formula {
        let mut out = Vec::new();
        for p in parts {
            match p {
                Formula::True => {}
                Formula::False => return Formula::False,
                Formula::And(inner) => out.extend(inner),
                other => out.push(other),
            }
        }
        match out.len() {
            0 => Formula::True,
            1 => out.pop().unwrap(),
            _ => Formula::And(out),
        }
    }

    /// Disjunction with constant folding and flattening.
    pub fn or(parts: impl IntoIterator<Item = Formula>) -> Formula {
        let mut out = Vec::new();
        for p in parts {
            match p {
                Formula::False => {}
                Formula::True => return Formula::True,
                Formula::Or(inner) => out.extend(inner),
                other => out.push(other),
            }
        }
        match out.len() {
            0 => Formula::False,
            1 => out.pop().unwrap(),
            _ => Formula::Or(out),
        }
    }

    /// Number of free variable slots: the largest free index used.
    pub fn arity(&self) -> usize {
        let mut max = 0;
        self.visit_vars(&mut |v| {
            if let Var::Free(k) = v {
                max = max.max(k as usize + 1);
            }
        });
        max
    }

    pub fn free_vars(&self) -> BTreeSet<u32> {
        let mut out = BTreeSet::new();
        self.visit_vars(&mut |v| {
            if let Var::Free(k) = v {
                out.insert(k);
            }
        });
        out
    }

    /// True when the free variables are exactly `x1..xp`.
    pub fn is_packed(&self) -> bool {
        let free = self.free_vars();
        free.len() == self.arity()
    }

    fn visit_vars(&self, f: &mut impl FnMut(Var)) {
        match self {
            Formula::True | Formula::False => {}
            Formula::Atom { args, .. } => args.iter().for_each(|&v| f(v)),
            Formula::Eq(a, b) | Formula::DistLe(a, b, _) | Formula::DistGt(a, b, _) => {
                f(*a);
                f(*b);
            }
            Formula::Not(g) => g.visit_vars(f),
            Formula::And(gs) | Formula::Or(gs) => gs.iter().for_each(|g| g.visit_vars(f)),
            Formula::Exists { center, body, .. } | Formula::Forall { center, body, .. } => {
                f(*center);
                body.visit_vars(f);
            }
        }
    }

    /// Relation symbols with the arities they are used at.
    pub fn relations(&self) -> BTreeSet<(String, usize)> {
        let mut out = BTreeSet::new();
        self.collect_relations(&mut out);
        out
    }

    fn collect_relations(&self, out: &mut BTreeSet<(String, usize)>) {
        match self {
            Formula::Atom { rel, args } => {
                out.insert((rel.clone(), args.len()));
            }
            Formula::Not(g) => g.collect_relations(out),
            Formula::And(gs) | Formula::Or(gs) => gs.iter().for_each(|g| g.collect_relations(out)),
            Formula::Exists { body, .. } | Formula::Forall { body, .. } => body.collect_relations(out),
            _ => {}
        }
    }

    /// Largest radius appearing in a guard or a quantifier.
    pub fn max_radius(&self) -> u32 {
        match self {
            Formula::DistLe(_, _, r) | Formula::DistGt(_, _, r) => *r,
            Formula::Atom { args, .. } if args.len() > 1 => 1,
            Formula::Not(g) => g.max_radius(),
            Formula::And(gs) | Formula::Or(gs) => gs.iter().map(Formula::max_radius).max().unwrap_or(0),
            Formula::Exists { radius, body, .. } | Formula::Forall { radius, body, .. } => {
                (*radius).max(body.max_radius())
            }
            _ => 0,
        }
    }

    /// Largest bound-variable id plus one.
    pub fn bound_slots(&self) -> usize {
        match self {
            Formula::Not(g) => g.bound_slots(),
            Formula::And(gs) | Formula::Or(gs) => gs.iter().map(Formula::bound_slots).max().unwrap_or(0),
            Formula::Exists { var, body, .. } | Formula::Forall { var, body, .. } => {
                (*var as usize + 1).max(body.bound_slots())
            }
            _ => 0,
        }
    }

    /// Applies `map` to every free variable index.
    pub fn map_free(&self, map: &impl Fn(u32) -> u32) -> Formula {
        let mv = |v: &Var| match v {
            Var::Free(k) => Var::Free(map(*k)),
            b => *b,
        };
        match self {
            Formula::True => Formula::True,
            Formula::False => Formula::False,
            Formula::Atom { rel, args } => Formula::Atom {
                rel: rel.clone(),
                args: args.iter().map(mv).collect(),
            },
            Formula::Eq(a, b) => Formula::Eq(mv(a), mv(b)),
            Formula::DistLe(a, b, r) => Formula::DistLe(mv(a), mv(b), *r),
            Formula::DistGt(a, b, r) => Formula::DistGt(mv(a), mv(b), *r),
            Formula::Not(g) => Formula::Not(Box::new(g.map_free(map))),
            Formula::And(gs) => Formula::And(gs.iter().map(|g| g.map_free(map)).collect()),
            Formula::Or(gs) => Formula::Or(gs.iter().map(|g| g.map_free(map)).collect()),
            Formula::Exists { var, center, radius, body } => Formula::Exists {
                var: *var,
                center: mv(center),
                radius: *radius,
                body: Box::new(body.map_free(map)),
            },
            Formula::Forall { var, center, radius, body } => Formula::Forall {
                var: *var,
                center: mv(center),
                radius: *radius,
                body: Box::new(body.map_free(map)),
            },
        }
    }

    /// Shifts every free variable index up by `by`.
    pub fn shift(&self, by: u32) -> Formula {
        self.map_free(&|k| k + by)
    }

    /// Renumbers bound variables in order of first binding (pre-order).
    pub fn canonical(&self) -> Formula {
        let mut next = 0u32;
        self.canon(&mut Vec::new(), &mut next)
    }

    fn canon(&self, scope: &mut Vec<(u32, u32)>, next: &mut u32) -> Formula {
        let mv = |v: &Var, scope: &Vec<(u32, u32)>| match v {
            Var::Bound(id) => Var::Bound(
                scope
                    .iter()
                    .rev()
                    .find(|(old, _)| old == id)
                    .map_or(*id, |&(_, new)| new),
            ),
            f => *f,
        };
        match self {
            Formula::True => Formula::True,
            Formula::False => Formula::False,
            Formula::Atom { rel, args } => Formula::Atom {
                rel: rel.clone(),
                args: args.iter().map(|a| mv(a, scope)).collect(),
            },
            Formula::Eq(a, b) => Formula::Eq(mv(a, scope), mv(b, scope)),
            Formula::DistLe(a, b, r) => Formula::DistLe(mv(a, scope), mv(b, scope), *r),
            Formula::DistGt(a, b, r) => Formula::DistGt(mv(a, scope), mv(b, scope), *r),
            Formula::Not(g) => Formula::Not(Box::new(g.canon(scope, next))),
            Formula::And(gs) => Formula::And(gs.iter().map(|g| g.canon(scope, next)).collect()),
            Formula::Or(gs) => Formula::Or(gs.iter().map(|g| g.canon(scope, next)).collect()),
            Formula::Exists { var, center, radius, body } | Formula::Forall { var, center, radius, body } => {
                let center = mv(center, scope);
                let id = *next;
                *next += 1;
                scope.push((*var, id));
                let body = Box::new(body.canon(scope, next));
                scope.pop();
                if matches!(self, Formula::Exists { .. }) {
                    Formula::Exists { var: id, center, radius: *radius, body }
                } else {
                    Formula::Forall { var: id, center, radius: *radius, body }
                }
            }
        }
    }

    /// Replaces a bound variable (in scope) by another variable.
    pub(crate) fn substitute_bound(&self, id: u32, by: Var) -> Formula {
        let mv = |v: &Var| if *v == Var::Bound(id) { by } else { *v };
        match self {
            Formula::True => Formula::True,
            Formula::False => Formula::False,
            Formula::Atom { rel, args } => Formula::Atom {
                rel: rel.clone(),
                args: args.iter().map(mv).collect(),
            },
            Formula::Eq(a, b) => Formula::Eq(mv(a), mv(b)),
            Formula::DistLe(a, b, r) => Formula::DistLe(mv(a), mv(b), *r),
            Formula::DistGt(a, b, r) => Formula::DistGt(mv(a), mv(b), *r),
            Formula::Not(g) => Formula::Not(Box::new(g.substitute_bound(id, by))),
            Formula::And(gs) => Formula::And(gs.iter().map(|g| g.substitute_bound(id, by)).collect()),
            Formula::Or(gs) => Formula::Or(gs.iter().map(|g| g.substitute_bound(id, by)).collect()),
            Formula::Exists { var, center, radius, body } => Formula::Exists {
                var: *var,
                center: mv(center),
                radius: *radius,
                body: if *var == id { body.clone() } else { Box::new(body.substitute_bound(id, by)) },
            },
            Formula::Forall { var, center, radius, body } => Formula::Forall {
                var: *var,
                center: mv(center),
                radius: *radius,
                body: if *var == id { body.clone() } else { Box::new(body.substitute_bound(id, by)) },
            },
        }
    }

    /// Replaces every atom of relation `rel` by `by`.
    pub fn replace_relation(&self, rel: &str, by: &Formula) -> Formula {
        match self {
            Formula::Atom { rel: r, .. } if r == rel => by.clone(),
            Formula::Not(g) => Formula::not(g.replace_relation(rel, by)),
            Formula::And(gs) => Formula::and(gs.iter().map(|g| g.replace_relation(rel, by))),
            Formula::Or(gs) => Formula::or(gs.iter().map(|g| g.replace_relation(rel, by))),
            Formula::Exists { var, center, radius, body } => Formula::Exists {
                var: *var,
                center: *center,
                radius: *radius,
                body: Box::new(body.replace_relation(rel, by)),
            },
            Formula::Forall { var, center, radius, body } => Formula::Forall {
                var: *var,
                center: *center,
                radius: *radius,
                body: Box::new(body.replace_relation(rel, by)),
            },
            other => other.clone(),
        }
    }

    fn needs_parens(&self) -> bool {
        matches!(
            self,
            Formula::And(_) | Formula::Or(_) | Formula::Exists { .. } | Formula::Forall { .. }
        )
    }
}

impl serde::Serialize for Formula {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Formula::True => write!(f, "true"),
            Formula::False => write!(f, "false"),
            Formula::Atom { rel, args } => {
                write!(f, "{rel}(")?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{a}")?;
                }
                write!(f, ")")
            }
            Formula::Eq(a, b) => write!(f, "{a} = {b}"),
            Formula::DistLe(a, b, r) => write!(f, "dist({a},{b}) <= {r}"),
            Formula::DistGt(a, b, r) => write!(f, "dist({a},{b}) > {r}"),
            Formula::Not(g) => match g.as_ref() {
                Formula::Eq(a, b) => write!(f, "{a} != {b}"),
                g if g.needs_parens() || matches!(g, Formula::DistLe(..) | Formula::DistGt(..)) => {
                    write!(f, "!({g})")
                }
                g => write!(f, "!{g}"),
            },
            Formula::And(gs) | Formula::Or(gs) => {
                let sep = if matches!(self, Formula::And(_)) { " & " } else { " | " };
                for (i, g) in gs.iter().enumerate() {
                    if i > 0 {
                        write!(f, "{sep}")?;
                    }
                    if g.needs_parens() {
                        write!(f, "({g})")?;
                    } else {
                        write!(f, "{g}")?;
                    }
                }
                Ok(())
            }
            Formula::Exists { var, center, radius, body } => {
                write!(f, "exists y{var} in B[{radius}]({center}): {body}")
            }
            Formula::Forall { var, center, radius, body } => {
                write!(f, "forall y{var} in B[{radius}]({center}): {body}")
            }
        }
    }
}
