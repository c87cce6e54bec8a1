use num_traits::Zero;

use super::ast::{Formula, Rel};
use super::lex::{lex, Pos, Tok, Token};
use super::term::Term;
use super::FormulaError;
use crate::Rational;

/// Parses a formula of the ASCII grammar: relations `< <= = >= >`,
/// connectives `& | !`, quantifiers `E x (...)` / `A x (...)`, linear terms
/// with rational constants (`123`, `-4/7`, `0.8`). All free variables must
/// appear in `declared_vars`.
pub fn parse_formula(text: &str, declared_vars: &[String]) -> Result<Formula, FormulaError> {
    let tokens = lex(text)?;
    let mut p = FormulaParser::new(&tokens, declared_vars);
    let f = p.parse_or()?;
    p.expect_eof()?;
    Ok(f)
}

pub(crate) struct FormulaParser<'a> {
    toks: &'a [Token],
    pub pos: usize,
    scope: Vec<String>,
    /// Best (furthest) error seen during backtracking.
    best_err: Option<(usize, FormulaError)>,
}

impl<'a> FormulaParser<'a> {
    pub(crate) fn new(toks: &'a [Token], declared: &[String]) -> Self {
        FormulaParser {
            toks,
            pos: 0,
            scope: declared.to_vec(),
            best_err: None,
        }
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, off: usize) -> &Tok {
        let i = (self.pos + off).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    fn here(&self) -> Pos {
        self.toks[self.pos].pos
    }

    fn bump(&mut self) -> &Tok {
        let t = &self.toks[self.pos].tok;
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn err(&mut self, msg: impl Into<String>) -> FormulaError {
        let pos = self.here();
        let e = FormulaError::Syntax {
            line: pos.line,
            col: pos.col,
            msg: msg.into(),
        };
        self.note_err(e.clone());
        e
    }

    fn note_err(&mut self, e: FormulaError) {
        // Furthest error wins; ties keep the first (more specific) one.
        if self.best_err.as_ref().map_or(true, |(p, _)| self.pos > *p) {
            self.best_err = Some((self.pos, e));
        }
    }

    fn take_best(&mut self, fallback: FormulaError) -> FormulaError {
        self.best_err
            .take()
            .map(|(_, e)| e)
            .unwrap_or(fallback)
    }

    fn expect_eof(&mut self) -> Result<(), FormulaError> {
        if *self.peek() == Tok::Eof {
            Ok(())
        } else {
            Err(self.err("unexpected input after formula"))
        }
    }

    pub(crate) fn expect(&mut self, tok: Tok, what: &str) -> Result<(), FormulaError> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            Err(self.err(format!("expected {what}")))
        }
    }

    pub(crate) fn parse_or(&mut self) -> Result<Formula, FormulaError> {
        let mut children = vec![self.parse_and()?];
        while *self.peek() == Tok::Pipe {
            self.bump();
            children.push(self.parse_and()?);
        }
        Ok(if children.len() == 1 {
            children.pop().unwrap()
        } else {
            Formula::Or(children)
        })
    }

    fn parse_and(&mut self) -> Result<Formula, FormulaError> {
        let mut children = vec![self.parse_unary()?];
        while *self.peek() == Tok::Amp {
            self.bump();
            children.push(self.parse_unary()?);
        }
        Ok(if children.len() == 1 {
            children.pop().unwrap()
        } else {
            Formula::And(children)
        })
    }

    fn parse_unary(&mut self) -> Result<Formula, FormulaError> {
        match self.peek() {
            Tok::Bang => {
                self.bump();
                Ok(Formula::not(self.parse_unary()?))
            }
            Tok::Ident(name) if (name == "E" || name == "A") && self.is_quantifier_head() => {
                let existential = name == "E";
                self.bump();
                let var = match self.bump().clone() {
                    Tok::Ident(v) => v,
                    _ => unreachable!("checked by is_quantifier_head"),
                };
                self.expect(Tok::LParen, "'(' after quantified variable")?;
                self.scope.push(var.clone());
                let body = self.parse_or();
                self.scope.pop();
                let body = body?;
                self.expect(Tok::RParen, "closing ')'")?;
                Ok(if existential {
                    Formula::exists(var, body)
                } else {
                    Formula::forall(var, body)
                })
            }
            _ => self.parse_primary(),
        }
    }

    fn is_quantifier_head(&self) -> bool {
        matches!(self.peek_at(1), Tok::Ident(_)) && *self.peek_at(2) == Tok::LParen
    }

    fn parse_primary(&mut self) -> Result<Formula, FormulaError> {
        match self.peek() {
            Tok::Ident(n) if n == "true" => {
                self.bump();
                return Ok(Formula::True);
            }
            Tok::Ident(n) if n == "false" => {
                self.bump();
                return Ok(Formula::False);
            }
            _ => {}
        }
        // A primary is either a comparison `term REL term` or a
        // parenthesized formula; the two are disambiguated by backtracking.
        let save = self.pos;
        match self.parse_comparison() {
            Ok(f) => Ok(f),
            Err(e) => {
                self.note_err(e);
                self.pos = save;
                if *self.peek() == Tok::LParen {
                    self.bump();
                    let f = self.parse_or()?;
                    self.expect(Tok::RParen, "closing ')'")?;
                    Ok(f)
                } else {
                    let fallback = self.err("expected a comparison or '('");
                    Err(self.take_best(fallback))
                }
            }
        }
    }

    fn parse_comparison(&mut self) -> Result<Formula, FormulaError> {
        let lhs = self.parse_term()?;
        let (rel, swap) = match self.peek() {
            Tok::Lt => (Rel::Lt, false),
            Tok::Le => (Rel::Le, false),
            Tok::Eq => (Rel::Eq, false),
            Tok::Gt => (Rel::Lt, true),
            Tok::Ge => (Rel::Le, true),
            _ => return Err(self.err("expected a relation")),
        };
        self.bump();
        let rhs = self.parse_term()?;
        Ok(if swap {
            Formula::cmp(rhs, rel, lhs)
        } else {
            Formula::cmp(lhs, rel, rhs)
        })
    }

    pub(crate) fn parse_term(&mut self) -> Result<Term, FormulaError> {
        let mut t = self.parse_factor()?;
        loop {
            match self.peek() {
                Tok::Plus => {
                    self.bump();
                    t = t.add(&self.parse_factor()?);
                }
                Tok::Minus => {
                    self.bump();
                    t = t.sub(&self.parse_factor()?);
                }
                _ => return Ok(t),
            }
        }
    }

    fn parse_factor(&mut self) -> Result<Term, FormulaError> {
        let mut t = self.parse_atom_factor()?;
        loop {
            match self.peek() {
                Tok::Star => {
                    let pos = self.here();
                    self.bump();
                    let rhs = self.parse_atom_factor()?;
                    t = mul_linear(&t, &rhs).ok_or(FormulaError::NonLinear {
                        line: pos.line,
                        col: pos.col,
                    })?;
                }
                Tok::Slash => {
                    let pos = self.here();
                    self.bump();
                    let rhs = self.parse_atom_factor()?;
                    if !rhs.is_constant() {
                        return Err(FormulaError::NonLinear {
                            line: pos.line,
                            col: pos.col,
                        });
                    }
                    let d = rhs.constant_part();
                    if d.is_zero() {
                        return Err(self.err("division by zero"));
                    }
                    t = t.scale(&(Rational::new(1.into(), 1.into()) / d));
                }
                _ => return Ok(t),
            }
        }
    }

    fn parse_atom_factor(&mut self) -> Result<Term, FormulaError> {
        let pos = self.here();
        match self.peek().clone() {
            Tok::Num(q) => {
                self.bump();
                Ok(Term::constant(q))
            }
            Tok::Minus => {
                self.bump();
                Ok(self.parse_atom_factor()?.neg())
            }
            Tok::Ident(name) => {
                if !self.scope.iter().any(|v| v == &name) {
                    let e = FormulaError::UnknownVariable {
                        name: name.clone(),
                        line: pos.line,
                        col: pos.col,
                    };
                    self.note_err(e.clone());
                    return Err(e);
                }
                self.bump();
                Ok(Term::var(name))
            }
            Tok::LParen => {
                self.bump();
                let t = self.parse_term()?;
                self.expect(Tok::RParen, "closing ')'")?;
                Ok(t)
            }
            _ => Err(self.err("expected a number, variable, or '('")),
        }
    }
}

/// Product of two linear terms; succeeds only when at least one side is
/// constant.
fn mul_linear(a: &Term, b: &Term) -> Option<Term> {
    if a.is_constant() {
        Some(b.scale(a.constant_part()))
    } else if b.is_constant() {
        Some(a.scale(b.constant_part()))
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::ast::Atom;
    use crate::rat;

    fn vars(names: &[&str]) -> Vec<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn parses_linear_comparison() {
        // "x + 2*y <= 3" → atom over x + 2y − 3 with free vars {x, y}.
        let f = parse_formula("x + 2*y <= 3", &vars(&["x", "y"])).unwrap();
        match &f {
            Formula::Atom(Atom { term, rel }) => {
                assert_eq!(*rel, Rel::Le);
                assert_eq!(term.coeff("x"), rat(1, 1));
                assert_eq!(term.coeff("y"), rat(2, 1));
                assert_eq!(*term.constant_part(), rat(-3, 1));
            }
            other => panic!("unexpected parse: {other:?}"),
        }
        assert_eq!(f.free_vars().len(), 2);
    }

    #[test]
    fn parses_quantifier() {
        // "E t (t > 0 & x + t < 1)" → ∃t. (−t < 0 ∧ x + t − 1 < 0)
        let f = parse_formula("E t (t > 0 & x + t < 1)", &vars(&["x"])).unwrap();
        match f {
            Formula::Exists(v, body) => {
                assert_eq!(v, "t");
                match *body {
                    Formula::And(ref cs) => {
                        assert_eq!(cs.len(), 2);
                        match &cs[0] {
                            Formula::Atom(a) => {
                                assert_eq!(a.rel, Rel::Lt);
                                assert_eq!(a.term.coeff("t"), rat(-1, 1));
                            }
                            other => panic!("unexpected: {other:?}"),
                        }
                    }
                    ref other => panic!("unexpected body: {other:?}"),
                }
            }
            other => panic!("unexpected parse: {other:?}"),
        }
    }

    #[test]
    fn rejects_nonlinear_products() {
        let err = parse_formula("x * y < 1", &vars(&["x", "y"])).unwrap_err();
        assert!(matches!(err, FormulaError::NonLinear { .. }));
    }

    #[test]
    fn rejects_unknown_variables() {
        let err = parse_formula("z < 1", &vars(&["x"])).unwrap_err();
        match err {
            FormulaError::UnknownVariable { name, .. } => assert_eq!(name, "z"),
            other => panic!("unexpected error: {other:?}"),
        }
    }

    #[test]
    fn quantified_vars_shadow_and_unbind() {
        assert!(parse_formula("E t (t < 1) & t < 2", &vars(&["x"])).is_err());
        assert!(parse_formula("E t (t < 1) & x < 2", &vars(&["x"])).is_ok());
    }

    #[test]
    fn rational_literals() {
        let f = parse_formula("x <= -4/7 + 0.8", &vars(&["x"])).unwrap();
        match f {
            Formula::Atom(a) => {
                // x − (−4/7 + 4/5) = x − 8/35
                assert_eq!(*a.term.constant_part(), rat(-8, 35));
            }
            other => panic!("unexpected parse: {other:?}"),
        }
    }

    #[test]
    fn parenthesized_term_vs_formula() {
        let a = parse_formula("(x + 1) < 2", &vars(&["x"])).unwrap();
        let b = parse_formula("x + 1 < 2", &vars(&["x"])).unwrap();
        assert_eq!(a, b);
        let c = parse_formula("(x < 1) & (x < 2 | 0 = 0)", &vars(&["x"])).unwrap();
        assert!(matches!(c, Formula::And(_)));
    }

    #[test]
    fn display_round_trip() {
        let src = "E t (t > 0 & x + 2*t < 1) | y = 5/2";
        let f = parse_formula(src, &vars(&["x", "y"])).unwrap().normalized();
        let printed = format!("{f}");
        let reparsed = parse_formula(&printed, &vars(&["x", "y"]))
            .unwrap()
            .normalized();
        assert_eq!(f, reparsed);
    }

    #[test]
    fn reports_position() {
        let err = parse_formula("x <\n  *", &vars(&["x"])).unwrap_err();
        match err {
            FormulaError::Syntax { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected error: {other:?}"),
        }
    }
}
