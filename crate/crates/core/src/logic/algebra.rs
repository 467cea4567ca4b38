//! Partial operations on formulas whose pairings add, subtract or multiply.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::ast::Formula;
use super::eval::satisfaction_set;
use crate::error::{Error, Result};
use crate::structure::{Relation, Signature, Structure};

/// Finite family of small structures on which algebra preconditions are checked.
///
/// Sizes `1..=max_n` are enumerated exhaustively while the number of relation
/// assignments stays within `per_size`; beyond that a seeded sample of `per_size`
/// assignments is drawn. A clean pass is evidence, not a proof.
pub struct TestFamily {
    structures: Vec<Structure>,
}

impl TestFamily {
    pub const DEFAULT_MAX_N: usize = 4;
    pub const DEFAULT_PER_SIZE: usize = 1024;

    pub fn new(signature: &Signature, max_n: usize, per_size: usize, seed: u64) -> Result<Self> {
        let symbols: Vec<(String, usize)> = signature.iter().map(|(n, a)| (n.to_string(), a)).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut structures = Vec::new();
        for n in 1..=max_n {
            let slots: Vec<Vec<Vec<u32>>> = symbols.iter().map(|(_, a)| all_tuples(n, *a)).collect();
            let bits: usize = slots.iter().map(Vec::len).sum();
            let exhaustive = bits < 63 && (1usize << bits) <= per_size;
            let count = if exhaustive { 1usize << bits } else { per_size };
            for k in 0..count {
                let mut relations = BTreeMap::new();
                let mut bit = 0;
                for ((name, arity), tuples) in symbols.iter().zip(&slots) {
                    let chosen: Vec<Vec<u32>> = tuples
                        .iter()
                        .filter(|_| {
                            let on = if exhaustive { k >> bit & 1 == 1 } else { rng.gen_bool(0.5) };
                            bit += 1;
                            on
                        })
                        .cloned()
                        .collect();
                    relations.insert(name.clone(), Relation::new(*arity, chosen));
                }
                structures.push(Structure::new(n, relations, Structure::uniform_weights(n))?);
            }
        }
        Ok(TestFamily { structures })
    }

    /// The default family over the relations used by the given formulas.
    pub fn for_formulas(formulas: &[&Formula]) -> Result<Self> {
        let mut sig = Signature::new();
        for f in formulas {
            for (name, arity) in f.relations() {
                sig.insert(&name, arity)?;
            }
        }
        Self::new(&sig, Self::DEFAULT_MAX_N, Self::DEFAULT_PER_SIZE, 0x5eed)
    }

    pub fn structures(&self) -> &[Structure] {
        &self.structures
    }

    pub fn len(&self) -> usize {
        self.structures.len()
    }

    pub fn is_empty(&self) -> bool {
        self.structures.is_empty()
    }

    /// First structure and tuple satisfying `f`, described for error messages.
    fn witness(&self, f: &Formula) -> Result<Option<String>> {
        for s in &self.structures {
            if let Some(t) = satisfaction_set(f, s)?.first() {
                return Ok(Some(describe(s, t)));
            }
        }
        Ok(None)
    }
}

fn all_tuples(n: usize, arity: usize) -> Vec<Vec<u32>> {
    let mut out = vec![Vec::new()];
    for _ in 0..arity {
        out = out
            .into_iter()
            .flat_map(|t| {
                (0..n as u32).map(move |v| {
                    let mut t = t.clone();
                    t.push(v);
                    t
                })
            })
            .collect();
    }
    out
}

fn describe(s: &Structure, tuple: &[usize]) -> String {
    let rels: Vec<String> = s
        .relations()
        .map(|(name, r)| {
            let ts: Vec<String> = r
                .tuples()
                .iter()
                .map(|t| format!("({})", t.iter().map(u32::to_string).collect::<Vec<_>>().join(",")))
                .collect();
            format!("{name}={{{}}}", ts.join(","))
        })
        .collect();
    format!("n={} {} at tuple {:?}", s.len(), rels.join(" "), tuple)
}

/// Syntactic disjointness: one formula contains a conjunct whose negation is a conjunct of the other.
fn syntactically_disjoint(a: &Formula, b: &Formula) -> bool {
    let conj = |f: &Formula| match f {
        Formula::And(gs) => gs.clone(),
        other => vec![other.clone()],
    };
    let (ca, cb) = (conj(a), conj(b));
    ca.iter().any(|x| cb.iter().any(|y| *y == Formula::not(x.clone())))
}

/// `φ ⊕ ψ = φ ∨ ψ`, defined when the two never hold together.
pub fn weak_add(phi: &Formula, psi: &Formula, family: &TestFamily) -> Result<Formula> {
    if !syntactically_disjoint(phi, psi) {
        let both = Formula::and([phi.clone(), psi.clone()]);
        if let Some(w) = family.witness(&both)? {
            return Err(Error::Algebra {
                message: format!("'{phi}' and '{psi}' are not disjoint"),
                witness: w,
            });
        }
    }
    Ok(Formula::or([phi.clone(), psi.clone()]))
}

/// `φ ⊖ ψ = φ ∧ ¬ψ`, defined when `ψ` implies `φ`, so that pairings subtract.
pub fn weak_sub(phi: &Formula, psi: &Formula, family: &TestFamily) -> Result<Formula> {
    let escape = Formula::and([psi.clone(), Formula::not(phi.clone())]);
    if let Some(w) = family.witness(&escape)? {
        return Err(Error::Algebra {
            message: format!("'{psi}' does not imply '{phi}'"),
            witness: w,
        });
    }
    Ok(Formula::and([phi.clone(), Formula::not(psi.clone())]))
}

/// `φ ⊗ ψ = φ ∧ ψ'` where `ψ'` has its free variables shifted past those of `φ`.
pub fn free_product(phi: &Formula, psi: &Formula) -> Result<Formula> {
    for f in [phi, psi] {
        if !f.is_packed() {
            return Err(Error::Algebra {
                message: "free product needs packed operands".into(),
                witness: f.to_string(),
            });
        }
    }
    Ok(Formula::and([phi.clone(), psi.shift(phi.arity() as u32)]))
}

/// Renames free variable `x{i+1}` to `x{map[i]+1}`; `map` must be injective.
pub fn rename(phi: &Formula, map: &[u32]) -> Result<Formula> {
    let p = phi.arity();
    if map.len() < p {
        return Err(Error::Algebra {
            message: format!("renaming covers {} of {p} variables", map.len()),
            witness: phi.to_string(),
        });
    }
    let mut seen = std::collections::BTreeSet::new();
    for &m in &map[..p] {
        if !seen.insert(m) {
            return Err(Error::Algebra {
                message: "renaming is not injective".into(),
                witness: format!("{map:?}"),
            });
        }
    }
    let table = map.to_vec();
    Ok(phi.map_free(&|k| table[k as usize]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::{parse_formula, stone_pairing};

    fn p(s: &str) -> Formula {
        parse_formula(s).unwrap()
    }

    fn k3() -> Structure {
        Structure::from_edges(3, &[(0, 1), (1, 2), (0, 2)], Structure::uniform_weights(3)).unwrap()
    }

    #[test]
    fn family_size() {
        let sig = Signature::new().with("adj", 2);
        let fam = TestFamily::new(&sig, 3, 1024, 1).unwrap();
        assert_eq!(fam.len(), 2 + 16 + 512);
        let fam4 = TestFamily::new(&sig, 4, 1024, 1).unwrap();
        assert_eq!(fam4.len(), 2 + 16 + 512 + 1024);
    }

    #[test]
    fn product_of_edges() {
        let f = free_product(&p("adj(x1,x2)"), &p("adj(x1,x2)")).unwrap();
        assert_eq!(f.arity(), 4);
        assert!((stone_pairing(&f, &k3()).unwrap() - 4.0 / 9.0).abs() < 1e-15);
        assert!(free_product(&p("adj(x1,x3)"), &p("M(x1)")).is_err());
    }

    #[test]
    fn add_and_sub() {
        let a = p("adj(x1,x2) & M(x1)");
        let b = p("adj(x1,x2) & !M(x1)");
        let fam = TestFamily::for_formulas(&[&a, &b]).unwrap();
        let sum = weak_add(&a, &b, &fam).unwrap();
        let back = weak_sub(&sum, &b, &fam).unwrap();
        let e = p("adj(x1,x2)");
        let err = weak_add(&e, &a, &fam).unwrap_err();
        assert!(matches!(err, Error::Algebra { .. }));
        assert!(err.to_string().contains("witness"));
        assert!(weak_sub(&a, &e, &fam).is_err());

        let s = Structure::from_edges(3, &[(0, 1), (1, 2)], Structure::uniform_weights(3))
            .unwrap();
        let s = s.mark("M", &s.vertex_set([1]).unwrap()).unwrap();
        let pa = stone_pairing(&a, &s).unwrap();
        let pb = stone_pairing(&b, &s).unwrap();
        assert!((stone_pairing(&sum, &s).unwrap() - pa - pb).abs() < 1e-15);
        assert!((stone_pairing(&back, &s).unwrap() - pa).abs() < 1e-15);
    }

    #[test]
    fn rename_checks_injectivity() {
        let f = p("adj(x1,x2)");
        assert_eq!(rename(&f, &[1, 0]).unwrap(), p("adj(x2,x1)"));
        assert!(rename(&f, &[0, 0]).is_err());
        assert!(rename(&f, &[0]).is_err());
    }
}
