//! The JSON structure file format.
//!
//! ```json
//! { "n": 3, "weights": "uniform" | [0.5, "1/4", 0.25],
//!   "relations": { "adj": { "arity": 2, "tuples": [[0, 1], [1, 0]] } } }
//! ```
//!
//! A relation may carry `"mark": true` to flag it as a unary mark.

use std::collections::BTreeMap;
use std::path::Path;

use serde_json::{json, Map, Value};

use super::{Relation, Structure};
use crate::error::{Error, Result};

fn at<T>(loc: &str, msg: impl std::fmt::Display) -> Result<T> {
    Err(Error::Input(format!("{loc}: {msg}")))
}

fn parse_weight(loc: &str, v: &Value) -> Result<f64> {
    match v {
        Value::Number(x) => x.as_f64().map_or_else(|| at(loc, "not a number"), Ok),
        Value::String(s) => {
            let parsed = match s.split_once('/') {
                Some((num, den)) => num
                    .trim()
                    .parse::<f64>()
                    .ok()
                    .zip(den.trim().parse::<f64>().ok())
                    .filter(|(_, d)| *d != 0.0)
                    .map(|(n, d)| n / d),
                None => s.trim().parse::<f64>().ok(),
            };
            parsed.map_or_else(|| at(loc, format!("cannot read weight \"{s}\"")), Ok)
        }
        _ => at(loc, "expected a number or a rational string"),
    }
}

/// Parses a structure document, reporting the first violation with its JSON location.
pub fn parse_structure_json(doc: &Value) -> Result<Structure> {
    let obj = doc.as_object().map_or_else(|| at("$", "expected an object"), Ok)?;
    let n = match obj.get("n").and_then(Value::as_u64) {
        Some(n) if n > 0 => n as usize,
        Some(_) => return at("$.n", "must be positive"),
        None => return at("$.n", "missing or not a non-negative integer"),
    };
    let weights = match obj.get("weights") {
        None => return at("$.weights", "missing"),
        Some(Value::String(s)) if s == "uniform" => Structure::uniform_weights(n),
        Some(Value::Array(items)) => {
            if items.len() != n {
                return at("$.weights", format!("{} entries for n = {n}", items.len()));
            }
            let mut out = Vec::with_capacity(n);
            for (i, item) in items.iter().enumerate() {
                let loc = format!("$.weights[{i}]");
                let w = parse_weight(&loc, item)?;
                if !(w >= 0.0 && w.is_finite()) {
                    return at(&loc, format!("weight {w} is negative or not finite"));
                }
                out.push(w);
            }
            let total: f64 = out.iter().sum();
            if (total - 1.0).abs() > super::weight_slack(n) {
                return at("$.weights", format!("weights sum to {total}, expected 1"));
            }
            out
        }
        Some(_) => return at("$.weights", "expected \"uniform\" or an array"),
    };
    let mut relations = BTreeMap::new();
    let mut marks = Vec::new();
    let empty = Map::new();
    let rels = match obj.get("relations") {
        None => &empty,
        Some(Value::Object(m)) => m,
        Some(_) => return at("$.relations", "expected an object"),
    };
    for (name, body) in rels {
        let loc = format!("$.relations.{name}");
        if !valid_symbol(name) {
            return at(&loc, "relation names must be identifiers");
        }
        let arity = match body.get("arity").and_then(Value::as_u64) {
            Some(a) if a > 0 => a as usize,
            _ => return at(&format!("{loc}.arity"), "missing or not a positive integer"),
        };
        let tuples = match body.get("tuples") {
            Some(Value::Array(t)) => t,
            None => return at(&format!("{loc}.tuples"), "missing"),
            Some(_) => return at(&format!("{loc}.tuples"), "expected an array"),
        };
        let mut parsed = Vec::with_capacity(tuples.len());
        for (i, t) in tuples.iter().enumerate() {
            let tloc = format!("{loc}.tuples[{i}]");
            let items = t.as_array().map_or_else(|| at(&tloc, "expected an array"), Ok)?;
            if items.len() != arity {
                return at(&tloc, format!("length {} does not match arity {arity}", items.len()));
            }
            let mut tuple = Vec::with_capacity(arity);
            for (j, v) in items.iter().enumerate() {
                match v.as_u64() {
                    Some(id) if (id as usize) < n => tuple.push(id as u32),
                    Some(id) => {
                        return at(&format!("{tloc}[{j}]"), format!("vertex {id} out of range (n = {n})"))
                    }
                    None => return at(&format!("{tloc}[{j}]"), "expected a vertex id"),
                }
            }
            parsed.push(tuple);
        }
        if body.get("mark").and_then(Value::as_bool) == Some(true) {
            if arity != 1 {
                return at(&loc, "marks must be unary");
            }
            marks.push(name.clone());
        }
        relations.insert(name.clone(), Relation::new(arity, parsed));
    }
    let mut s = Structure::new(n, relations, weights)?;
    s.marks.extend(marks);
    Ok(s)
}

pub(crate) fn valid_symbol(name: &str) -> bool {
    let mut chars = name.chars();
    chars.next().is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

pub fn read_structure(path: impl AsRef<Path>) -> Result<Structure> {
    let path = path.as_ref();
    let wrap = |message: String| Error::File {
        path: path.display().to_string(),
        message,
    };
    let text = std::fs::read_to_string(path).map_err(|e| wrap(e.to_string()))?;
    let doc: Value = serde_json::from_str(&text).map_err(|e| wrap(e.to_string()))?;
    parse_structure_json(&doc).map_err(|e| match e {
        Error::Input(m) => wrap(m),
        other => other,
    })
}

pub fn structure_to_json(s: &Structure) -> Value {
    let mut rels = Map::new();
    for (name, rel) in &s.relations {
        let mut body = json!({ "arity": rel.arity, "tuples": rel.tuples });
        if s.marks.contains(name) {
            body["mark"] = Value::Bool(true);
        }
        rels.insert(name.clone(), body);
    }
    json!({ "n": s.n, "weights": s.weights, "relations": rels })
}

pub fn write_structure(s: &Structure, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, serde_json::to_string(&structure_to_json(s))?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn err_text(doc: Value) -> String {
        parse_structure_json(&doc).unwrap_err().to_string()
    }

    #[test]
    fn round_trip() {
        let doc = json!({
            "n": 3,
            "weights": ["1/3", "1/3", "1/3"],
            "relations": { "adj": { "arity": 2, "tuples": [[0, 1], [1, 0], [1, 2], [2, 1]] } }
        });
        let s = parse_structure_json(&doc).unwrap();
        assert_eq!(s.edge_count(), 2);
        assert!((s.weight(0) - 1.0 / 3.0).abs() < 1e-16);
        let back = parse_structure_json(&structure_to_json(&s)).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn marks_survive_round_trip() {
        let s = Structure::from_edges(2, &[(0, 1)], vec![0.5, 0.5]).unwrap();
        let m = s.mark("M", &s.vertex_set([1]).unwrap()).unwrap();
        let back = parse_structure_json(&structure_to_json(&m)).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.marks().collect::<Vec<_>>(), vec!["M"]);
    }

    #[test]
    fn reports_first_violation_with_location() {
        let e = err_text(json!({
            "n": 2, "weights": "uniform",
            "relations": { "adj": { "arity": 2, "tuples": [[0, 1], [1, 5]] } }
        }));
        assert!(e.contains("$.relations.adj.tuples[1][1]"), "{e}");
        assert!(e.contains("out of range"), "{e}");

        let e = err_text(json!({ "n": 2, "weights": [0.5, 0.6], "relations": {} }));
        assert!(e.contains("$.weights") && e.contains("sum"), "{e}");

        let e = err_text(json!({ "n": 2, "weights": [0.5, "x"], "relations": {} }));
        assert!(e.contains("$.weights[1]"), "{e}");

        let e = err_text(json!({ "weights": "uniform" }));
        assert!(e.contains("$.n"), "{e}");

        let e = err_text(json!({
            "n": 2, "weights": "uniform",
            "relations": { "adj": { "arity": 2, "tuples": [[0]] } }
        }));
        assert!(e.contains("tuples[0]") && e.contains("arity"), "{e}");
    }
}
