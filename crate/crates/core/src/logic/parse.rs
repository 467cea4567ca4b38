//! Surface syntax:
//!
//! ```text
//! formula := impl
//! impl    := or ("->" impl)?
//! or      := and (("|" | "or") and)*
//! and     := unary (("&" | "and") unary)*
//! unary   := ("!" | "~" | "not") unary | quant | primary
//! quant   := ("exists" | "forall") name "in" "B" "[" int "]" "(" var ")" ":" formula
//! primary := "true" | "false" | "(" formula ")" | "dist" "(" var "," var ")" ("<=" | ">") int
//!          | var "=" var | var "!=" var | name "(" var ("," var)* ")"
//! ```
//!
//! `x1, x2, ...` are free variables; any other name must be bound by an enclosing quantifier.

use super::ast::{Formula, Var};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(String),
    Int(u32),
    Sym(&'static str),
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    line: usize,
    column: usize,
}

const SYMBOLS: [&str; 15] = [
    "->", "<=", "!=", "(", ")", "[", "]", ",", ":", "&", "|", "!", "~", "=", ">",
];

/// Tokens plus the position just past the last one.
fn lex(src: &str) -> Result<(Vec<Token>, (usize, usize))> {
    let mut out = Vec::new();
    let chars: Vec<char> = src.chars().collect();
    let (mut i, mut line, mut col) = (0, 1, 1);
    let mut end = (1, 1);
    while i < chars.len() {
        let c = chars[i];
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        let start_col = col;
        if c.is_ascii_alphabetic() || c == '_' {
            let mut s = String::new();
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                s.push(chars[i]);
                i += 1;
                col += 1;
            }
            out.push(Token { tok: Tok::Ident(s), line, column: start_col });
            end = (line, col);
            continue;
        }
        if c.is_ascii_digit() {
            let mut s = String::new();
            while i < chars.len() && chars[i].is_ascii_digit() {
                s.push(chars[i]);
                i += 1;
                col += 1;
            }
            let value = s.parse().map_err(|_| Error::Parse {
                line,
                column: start_col,
                message: format!("integer {s} is too large"),
            })?;
            out.push(Token { tok: Tok::Int(value), line, column: start_col });
            end = (line, col);
            continue;
        }
        let rest: String = chars[i..chars.len().min(i + 2)].iter().collect();
        match SYMBOLS.iter().find(|s| rest.starts_with(**s)) {
            Some(sym) => {
                i += sym.len();
                col += sym.len();
                out.push(Token { tok: Tok::Sym(sym), line, column: start_col });
            }
            None => {
                return Err(Error::Parse {
                    line,
                    column: start_col,
                    message: format!("unexpected character '{c}'"),
                })
            }
        }
        end = (line, col);
    }
    Ok((out, end))
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    scope: Vec<(String, u32)>,
    next_bound: u32,
    end: (usize, usize),
}

fn free_index(name: &str) -> Option<u32> {
    let digits = name.strip_prefix('x')?;
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) || digits.starts_with('0') {
        return None;
    }
    digits.parse::<u32>().ok().map(|k| k - 1)
}

const KEYWORDS: [&str; 10] = ["exists", "forall", "in", "true", "false", "dist", "and", "or", "not", "B"];

impl Parser {
    fn here(&self) -> (usize, usize) {
        self.toks.get(self.pos).map_or(self.end, |t| (t.line, t.column))
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T> {
        let (line, column) = self.here();
        Err(Error::Parse { line, column, message: message.into() })
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.tok)
    }

    fn peek_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Some(Tok::Sym(x)) if *x == s)
    }

    fn peek_word(&self, w: &str) -> bool {
        matches!(self.peek(), Some(Tok::Ident(x)) if x == w)
    }

    fn expect_sym(&mut self, s: &str) -> Result<()> {
        if self.peek_sym(s) {
            self.pos += 1;
            Ok(())
        } else {
            self.err(format!("expected '{s}'"))
        }
    }

    fn expect_word(&mut self, w: &str) -> Result<()> {
        if self.peek_word(w) {
            self.pos += 1;
            Ok(())
        } else {
            self.err(format!("expected '{w}'"))
        }
    }

    fn ident(&mut self) -> Result<String> {
        match self.peek() {
            Some(Tok::Ident(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => self.err("expected a name"),
        }
    }

    fn int(&mut self) -> Result<u32> {
        match self.peek() {
            Some(Tok::Int(v)) => {
                let v = *v;
                self.pos += 1;
                Ok(v)
            }
            _ => self.err("expected an integer"),
        }
    }

    fn var(&mut self) -> Result<Var> {
        let at = self.here();
        let name = self.ident()?;
        if let Some(k) = free_index(&name) {
            return Ok(Var::Free(k));
        }
        match self.scope.iter().rev().find(|(n, _)| *n == name) {
            Some(&(_, id)) => Ok(Var::Bound(id)),
            None => Err(Error::Parse {
                line: at.0,
                column: at.1,
                message: format!("unbound variable '{name}'"),
            }),
        }
    }

    fn formula(&mut self) -> Result<Formula> {
        let lhs = self.disjunction()?;
        if self.peek_sym("->") {
            self.pos += 1;
            let rhs = self.formula()?;
            return Ok(Formula::Or(vec![Formula::Not(Box::new(lhs)), rhs]));
        }
        Ok(lhs)
    }

    fn disjunction(&mut self) -> Result<Formula> {
        let mut parts = vec![self.conjunction()?];
        while self.peek_sym("|") || self.peek_word("or") {
            self.pos += 1;
            parts.push(self.conjunction()?);
        }
        Ok(if parts.len() == 1 { parts.pop().unwrap() } else { Formula::Or(parts) })
    }

    fn conjunction(&mut self) -> Result<Formula> {
        let mut parts = vec![self.unary()?];
        while self.peek_sym("&") || self.peek_word("and") {
            self.pos += 1;
            parts.push(self.unary()?);
        }
        Ok(if parts.len() == 1 { parts.pop().unwrap() } else { Formula::And(parts) })
    }

    fn unary(&mut self) -> Result<Formula> {
        if self.peek_sym("!") || self.peek_sym("~") || self.peek_word("not") {
            self.pos += 1;
            return Ok(Formula::Not(Box::new(self.unary()?)));
        }
        if self.peek_word("exists") || self.peek_word("forall") {
            return self.quantifier();
        }
        self.primary()
    }

    fn quantifier(&mut self) -> Result<Formula> {
        let at = self.here();
        let existential = self.peek_word("exists");
        self.pos += 1;
        let name = self.ident()?;
        if free_index(&name).is_some() || KEYWORDS.contains(&name.as_str()) {
            return self.err(format!("'{name}' cannot be used as a bound variable"));
        }
        if !self.peek_word("in") {
            return Err(Error::Locality(format!(
                "line {}, column {}: quantifier over '{name}' has no ball guard; write 'in B[r](x)'",
                at.0, at.1
            )));
        }
        self.pos += 1;
        self.expect_word("B")?;
        self.expect_sym("[")?;
        let radius = self.int()?;
        self.expect_sym("]")?;
        self.expect_sym("(")?;
        let center = self.var()?;
        self.expect_sym(")")?;
        self.expect_sym(":")?;
        let id = self.next_bound;
        self.next_bound += 1;
        self.scope.push((name, id));
        let body = Box::new(self.formula()?);
        self.scope.pop();
        Ok(if existential {
            Formula::Exists { var: id, center, radius, body }
        } else {
            Formula::Forall { var: id, center, radius, body }
        })
    }

    fn primary(&mut self) -> Result<Formula> {
        if self.peek_sym("(") {
            self.pos += 1;
            let f = self.formula()?;
            self.expect_sym(")")?;
            return Ok(f);
        }
        if self.peek_word("true") {
            self.pos += 1;
            return Ok(Formula::True);
        }
        if self.peek_word("false") {
            self.pos += 1;
            return Ok(Formula::False);
        }
        if self.peek_word("dist") && matches!(self.toks.get(self.pos + 1), Some(Token { tok: Tok::Sym("("), .. })) {
            self.pos += 2;
            let a = self.var()?;
            self.expect_sym(",")?;
            let b = self.var()?;
            self.expect_sym(")")?;
            return if self.peek_sym("<=") {
                self.pos += 1;
                Ok(Formula::DistLe(a, b, self.int()?))
            } else if self.peek_sym(">") {
                self.pos += 1;
                Ok(Formula::DistGt(a, b, self.int()?))
            } else {
                self.err("expected '<=' or '>' after dist(..)")
            };
        }
        match self.peek() {
            Some(Tok::Ident(name)) if !KEYWORDS.contains(&name.as_str()) => {}
            None => return self.err("unexpected end of formula"),
            _ => return self.err("expected a formula"),
        }
        if matches!(self.toks.get(self.pos + 1), Some(Token { tok: Tok::Sym("("), .. })) {
            let rel = self.ident()?;
            self.pos += 1;
            let mut args = vec![self.var()?];
            while self.peek_sym(",") {
                self.pos += 1;
                args.push(self.var()?);
            }
            self.expect_sym(")")?;
            return Ok(Formula::Atom { rel, args });
        }
        let a = self.var()?;
        if self.peek_sym("=") {
            self.pos += 1;
            return Ok(Formula::Eq(a, self.var()?));
        }
        if self.peek_sym("!=") {
            self.pos += 1;
            return Ok(Formula::Not(Box::new(Formula::Eq(a, self.var()?))));
        }
        self.err("expected '=' or '!=' after a variable")
    }
}

/// Parses one formula; bound variables are numbered in order of binding.
pub fn parse_formula(src: &str) -> Result<Formula> {
    let (toks, end) = lex(src)?;
    let mut p = Parser { toks, pos: 0, scope: Vec::new(), next_bound: 0, end };
    let f = p.formula()?;
    if p.pos < p.toks.len() {
        return p.err("unexpected trailing input");
    }
    Ok(f)
}

/// Parses `name := formula` bindings, one per line; `#` starts a comment.
pub fn parse_bindings(src: &str) -> Result<Vec<(String, Formula)>> {
    let mut out: Vec<(String, Formula)> = Vec::new();
    for (lineno, raw) in src.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("");
        if line.trim().is_empty() {
            continue;
        }
        let Some((name, body)) = line.split_once(":=") else {
            return Err(Error::Parse {
                line: lineno + 1,
                column: 1,
                message: "expected 'name := formula'".into(),
            });
        };
        let name = name.trim();
        if !crate::structure::valid_symbol(name) {
            return Err(Error::Parse {
                line: lineno + 1,
                column: 1,
                message: format!("'{name}' is not a valid binding name"),
            });
        }
        if out.iter().any(|(n, _)| n == name) {
            return Err(Error::Parse {
                line: lineno + 1,
                column: 1,
                message: format!("'{name}' is bound twice"),
            });
        }
        let offset = line.find(":=").unwrap() + 2;
        let f = parse_formula(body).map_err(|e| match e {
            Error::Parse { column, message, .. } => Error::Parse {
                line: lineno + 1,
                column: column + offset,
                message,
            },
            other => other,
        })?;
        out.push((name.to_string(), f));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_examples() {
        let f = parse_formula("adj(x1,x2)").unwrap();
        assert_eq!(f, Formula::atom("adj", [Var::Free(0), Var::Free(1)]));
        let g = parse_formula("exists y in B[2](x1): adj(x1,y)").unwrap();
        assert!(matches!(g, Formula::Exists { radius: 2, .. }));
        let h = parse_formula("dist(x1,x2) > 3 & x1 != x3 | M(x2)").unwrap();
        assert!(matches!(h, Formula::Or(ref v) if v.len() == 2));
    }

    #[test]
    fn quantifier_body_extends_right() {
        let f = parse_formula("M(x1) & exists y in B[1](x1): adj(x1,y) & M(y)").unwrap();
        let Formula::And(parts) = f else { panic!() };
        assert!(matches!(&parts[1], Formula::Exists { body, .. } if matches!(**body, Formula::And(_))));
    }

    #[test]
    fn unguarded_quantifier_is_a_locality_error() {
        assert!(matches!(parse_formula("exists y: adj(x1,y)"), Err(Error::Locality(_))));
    }

    #[test]
    fn syntax_errors_carry_positions() {
        match parse_formula("adj(x1,\n  x2") {
            Err(Error::Parse { line, column, .. }) => assert_eq!((line, column), (2, 5)),
            other => panic!("{other:?}"),
        }
        match parse_formula("adj(x1, z)") {
            Err(Error::Parse { column, message, .. }) => {
                assert_eq!(column, 9);
                assert!(message.contains("unbound"));
            }
            other => panic!("{other:?}"),
        }
        assert!(parse_formula("exists x1 in B[1](x1): true").is_err());
        assert!(parse_formula("x0 = x1").is_err());
        assert!(parse_formula("adj(x1,x2) $").is_err());
    }

    #[test]
    fn bindings() {
        let src = "# battery\nedge := adj(x1,x2)\n\nmarked := M(x1) # trailing\n";
        let b = parse_bindings(src).unwrap();
        assert_eq!(b.len(), 2);
        assert_eq!(b[1].0, "marked");
        match parse_bindings("a := adj(x1,\nb := true") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 1),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn display_round_trips() {
        for src in [
            "adj(x1,x2) & !(dist(x1,x3) > 2) | x1 != x2",
            "exists y0 in B[2](x1): forall y1 in B[1](y0): adj(y0,y1) | y1 = x1",
            "!!M(x1) & (exists y0 in B[1](x2): M(y0)) & true",
            "(a(x1) | b(x1)) & (c(x1) & d(x1))",
        ] {
            let f = parse_formula(src).unwrap();
            let again = parse_formula(&f.to_string()).unwrap();
            assert_eq!(f, again, "{src} -> {f}");
        }
    }
}
