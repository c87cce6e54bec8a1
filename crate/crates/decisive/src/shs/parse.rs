use std::collections::BTreeMap;

use num_traits::Signed;

use crate::formula::lex::{lex, Tok, Token};
use crate::formula::{Formula, Term};
use crate::Rational;

use super::{
    primed, DelaySpec, Edge, HybridSystem, InitKind, InitialSpec, Location, ModelError, ResetSpec,
    TargetSpec, TAU,
};

// The formula sub-parser is reused on the shared token stream.
use crate::formula::parser::FormulaParser;

/// Parses a model file. See `docs/model-format.md` for the grammar.
pub fn parse_model(text: &str) -> Result<HybridSystem, ModelError> {
    let tokens = lex(text).map_err(ModelError::Formula)?;
    let mut p = ModelParser {
        toks: &tokens,
        pos: 0,
        vars: Vec::new(),
    };
    p.parse()
}

struct ModelParser<'a> {
    toks: &'a [Token],
    pos: usize,
    vars: Vec<String>,
}

struct RawEdge {
    name: String,
    from: String,
    to: String,
    guard: Formula,
    reset: ResetSpec,
    weight: Rational,
    strong: bool,
    line: u32,
}

impl<'a> ModelParser<'a> {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn line(&self) -> u32 {
        self.toks[self.pos].pos.line
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn err(&self, msg: impl Into<String>) -> ModelError {
        ModelError::Parse {
            line: self.line(),
            msg: msg.into(),
        }
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<(), ModelError> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            Err(self.err(format!("expected {what}")))
        }
    }

    fn ident(&mut self, what: &str) -> Result<String, ModelError> {
        match self.peek().clone() {
            Tok::Ident(name) => {
                self.bump();
                Ok(name)
            }
            _ => Err(self.err(format!("expected {what}"))),
        }
    }

    fn keyword(&mut self, kw: &str) -> Result<(), ModelError> {
        match self.peek() {
            Tok::Ident(name) if name == kw => {
                self.bump();
                Ok(())
            }
            _ => Err(self.err(format!("expected '{kw}'"))),
        }
    }

    /// Parses an embedded formula with the given declared variables,
    /// stopping where the formula grammar ends (typically at `;`).
    fn formula(&mut self, declared: &[String]) -> Result<Formula, ModelError> {
        let mut fp = FormulaParser::new(self.toks, declared);
        fp.pos = self.pos;
        let f = fp.parse_or().map_err(ModelError::Formula)?;
        self.pos = fp.pos;
        Ok(f)
    }

    fn term(&mut self, declared: &[String]) -> Result<Term, ModelError> {
        let mut fp = FormulaParser::new(self.toks, declared);
        fp.pos = self.pos;
        let t = fp.parse_term().map_err(ModelError::Formula)?;
        self.pos = fp.pos;
        Ok(t)
    }

    /// A signed rational constant.
    fn rational(&mut self) -> Result<Rational, ModelError> {
        let t = self.term(&[])?;
        Ok(t.constant_part().clone())
    }

    fn parse(&mut self) -> Result<HybridSystem, ModelError> {
        let mut locations: Vec<Location> = Vec::new();
        let mut raw_edges: Vec<RawEdge> = Vec::new();
        let mut init: Option<(String, InitKind, u32)> = None;
        let mut targets: Vec<(String, Vec<(String, Formula)>, u32)> = Vec::new();

        loop {
            match self.peek().clone() {
                Tok::Eof => break,
                Tok::Ident(kw) => match kw.as_str() {
                    "vars" => self.parse_vars()?,
                    "location" => {
                        let loc = self.parse_location()?;
                        if locations.iter().any(|l| l.name == loc.name) {
                            return Err(self.err(format!("duplicate location '{}'", loc.name)));
                        }
                        locations.push(loc);
                    }
                    "edge" => raw_edges.push(self.parse_edge()?),
                    "init" => {
                        if init.is_some() {
                            return Err(self.err("duplicate init section"));
                        }
                        init = Some(self.parse_init()?);
                    }
                    "target" => targets.push(self.parse_target()?),
                    other => return Err(self.err(format!("unexpected section '{other}'"))),
                },
                _ => return Err(self.err("expected a section keyword")),
            }
        }

        let find_loc = |name: &str| -> Result<usize, ModelError> {
            locations
                .iter()
                .position(|l| l.name == name)
                .ok_or_else(|| ModelError::UnknownLocation(name.to_string()))
        };

        let mut edges = Vec::new();
        for re in raw_edges {
            if edges.iter().any(|e: &Edge| e.name == re.name) {
                return Err(ModelError::Parse {
                    line: re.line,
                    msg: format!("duplicate edge '{}'", re.name),
                });
            }
            if !re.weight.is_positive() {
                return Err(ModelError::Parse {
                    line: re.line,
                    msg: format!("edge '{}' must have positive weight", re.name),
                });
            }
            edges.push(Edge {
                name: re.name,
                source: find_loc(&re.from)?,
                target: find_loc(&re.to)?,
                guard: re.guard,
                reset: re.reset,
                weight: re.weight,
                strong: re.strong,
            });
        }

        let (init_loc, init_kind, init_line) =
            init.ok_or_else(|| self.err("missing init section"))?;
        let init = InitialSpec {
            location: find_loc(&init_loc)?,
            kind: init_kind,
        };
        if let InitKind::Points(points) = &init.kind {
            for p in points {
                if p.len() != self.vars.len() {
                    return Err(ModelError::Parse {
                        line: init_line,
                        msg: "initial point dimension does not match vars".into(),
                    });
                }
            }
        }

        let mut target_map = BTreeMap::new();
        for (name, entries, line) in targets {
            let mut spec = TargetSpec::default();
            for (loc_name, f) in entries {
                spec.per_location.insert(find_loc(&loc_name)?, f);
            }
            if target_map.insert(name.clone(), spec).is_some() {
                return Err(ModelError::Parse {
                    line,
                    msg: format!("duplicate target '{name}'"),
                });
            }
        }

        Ok(HybridSystem {
            vars: self.vars.clone(),
            locations,
            edges,
            init,
            targets: target_map,
        })
    }

    fn parse_vars(&mut self) -> Result<(), ModelError> {
        self.keyword("vars")?;
        if !self.vars.is_empty() {
            return Err(self.err("duplicate vars section"));
        }
        loop {
            let v = self.ident("variable name")?;
            if v == TAU {
                return Err(self.err(format!("'{TAU}' is reserved for the delay variable")));
            }
            if self.vars.contains(&v) {
                return Err(self.err(format!("duplicate variable '{v}'")));
            }
            self.vars.push(v);
            match self.peek() {
                Tok::Comma => {
                    self.bump();
                }
                Tok::Semi => {
                    self.bump();
                    return Ok(());
                }
                _ => return Err(self.err("expected ',' or ';' in vars")),
            }
        }
    }

    fn parse_location(&mut self) -> Result<Location, ModelError> {
        self.keyword("location")?;
        if self.vars.is_empty() {
            return Err(self.err("vars must be declared before locations"));
        }
        let name = self.ident("location name")?;
        self.expect(Tok::LBrace, "'{'")?;
        let mut flow: Option<Vec<Term>> = None;
        let mut inv: Option<Formula> = None;
        let mut delay = DelaySpec::default();
        let flow_vars: Vec<String> = self
            .vars
            .iter()
            .cloned()
            .chain(std::iter::once(TAU.to_string()))
            .collect();
        while *self.peek() != Tok::RBrace {
            let field = self.ident("location field")?;
            match field.as_str() {
                "flow" => {
                    self.expect(Tok::Colon, "':'")?;
                    let mut terms = Vec::new();
                    loop {
                        terms.push(self.term(&flow_vars)?);
                        if *self.peek() == Tok::Comma {
                            self.bump();
                        } else {
                            break;
                        }
                    }
                    self.expect(Tok::Semi, "';'")?;
                    if terms.len() != self.vars.len() {
                        return Err(self.err(format!(
                            "flow must list one term per variable ({} expected, {} given)",
                            self.vars.len(),
                            terms.len()
                        )));
                    }
                    flow = Some(terms);
                }
                "inv" => {
                    self.expect(Tok::Colon, "':'")?;
                    let vars = self.vars.clone();
                    inv = Some(self.formula(&vars)?);
                    self.expect(Tok::Semi, "';'")?;
                }
                "delay" => {
                    self.expect(Tok::Colon, "':'")?;
                    match self.ident("'auto' or 'exp <rate>'")?.as_str() {
                        "auto" => {}
                        "exp" => {
                            let rate = self.rational()?;
                            if !rate.is_positive() {
                                return Err(self.err("exponential rate must be positive"));
                            }
                            delay = DelaySpec { exp_rate: rate };
                        }
                        other => {
                            return Err(self.err(format!("unknown delay kind '{other}'")))
                        }
                    }
                    self.expect(Tok::Semi, "';'")?;
                }
                other => return Err(self.err(format!("unknown location field '{other}'"))),
            }
        }
        self.expect(Tok::RBrace, "'}'")?;
        Ok(Location {
            name,
            flow: flow.ok_or_else(|| self.err("location is missing a flow"))?,
            invariant: inv.unwrap_or(Formula::True),
            delay,
        })
    }

    fn parse_edge(&mut self) -> Result<RawEdge, ModelError> {
        self.keyword("edge")?;
        let line = self.line();
        let name = self.ident("edge name")?;
        self.expect(Tok::LBrace, "'{'")?;
        let mut from = None;
        let mut to = None;
        let mut guard = Formula::True;
        let mut reset = ResetSpec::Identity;
        let mut weight = crate::rat(1, 1);
        let mut strong = false;
        while *self.peek() != Tok::RBrace {
            let field = self.ident("edge field")?;
            match field.as_str() {
                "from" => {
                    from = Some(self.ident("location name")?);
                    self.expect(Tok::Semi, "';'")?;
                }
                "to" => {
                    to = Some(self.ident("location name")?);
                    self.expect(Tok::Semi, "';'")?;
                }
                "guard" => {
                    self.expect(Tok::Colon, "':'")?;
                    let vars = self.vars.clone();
                    guard = self.formula(&vars)?;
                    self.expect(Tok::Semi, "';'")?;
                }
                "reset" => {
                    self.expect(Tok::Colon, "':'")?;
                    reset = self.parse_reset()?;
                    self.expect(Tok::Semi, "';'")?;
                }
                "strong" => {
                    strong = true;
                    self.expect(Tok::Semi, "';'")?;
                }
                "weight" => {
                    weight = self.rational()?;
                    self.expect(Tok::Semi, "';'")?;
                }
                other => return Err(self.err(format!("unknown edge field '{other}'"))),
            }
        }
        self.expect(Tok::RBrace, "'}'")?;
        Ok(RawEdge {
            name,
            from: from.ok_or_else(|| self.err("edge is missing 'from'"))?,
            to: to.ok_or_else(|| self.err("edge is missing 'to'"))?,
            guard,
            reset,
            weight,
            strong,
            line,
        })
    }

    fn parse_reset(&mut self) -> Result<ResetSpec, ModelError> {
        match self.ident("reset kind")?.as_str() {
            "identity" => Ok(ResetSpec::Identity),
            "map" => {
                self.expect(Tok::LParen, "'('")?;
                let mut terms = Vec::new();
                let vars = self.vars.clone();
                loop {
                    terms.push(self.term(&vars)?);
                    if *self.peek() == Tok::Comma {
                        self.bump();
                    } else {
                        break;
                    }
                }
                self.expect(Tok::RParen, "')'")?;
                if terms.len() != self.vars.len() {
                    return Err(self.err("map reset must list one term per variable"));
                }
                Ok(ResetSpec::DeterministicMap(terms))
            }
            "points" => {
                let points = self.parse_points()?;
                if points.is_empty() {
                    return Err(self.err("points reset must be non-empty"));
                }
                Ok(ResetSpec::DiscreteUniform(points))
            }
            "uniform" => {
                self.expect(Tok::LParen, "'('")?;
                let mut declared = self.vars.clone();
                declared.extend(self.vars.iter().map(|v| primed(v)));
                let f = self.formula(&declared)?;
                self.expect(Tok::RParen, "')'")?;
                Ok(ResetSpec::ContinuousUniform(f))
            }
            other => Err(self.err(format!("unknown reset kind '{other}'"))),
        }
    }

    /// `{ (q, ...), (q, ...) }`
    fn parse_points(&mut self) -> Result<Vec<Vec<Rational>>, ModelError> {
        self.expect(Tok::LBrace, "'{'")?;
        let mut points = Vec::new();
        while *self.peek() != Tok::RBrace {
            self.expect(Tok::LParen, "'('")?;
            let mut point = Vec::new();
            loop {
                point.push(self.rational()?);
                if *self.peek() == Tok::Comma {
                    self.bump();
                } else {
                    break;
                }
            }
            self.expect(Tok::RParen, "')'")?;
            if point.len() != self.vars.len() {
                return Err(self.err("point dimension does not match vars"));
            }
            points.push(point);
            if *self.peek() == Tok::Comma {
                self.bump();
            }
        }
        self.expect(Tok::RBrace, "'}'")?;
        Ok(points)
    }

    fn parse_init(&mut self) -> Result<(String, InitKind, u32), ModelError> {
        self.keyword("init")?;
        let line = self.line();
        self.expect(Tok::LBrace, "'{'")?;
        self.keyword("loc")?;
        let loc = self.ident("location name")?;
        self.expect(Tok::Semi, "';'")?;
        let kind = match self.ident("'points' or 'uniform'")?.as_str() {
            "points" => {
                let points = self.parse_points()?;
                if points.is_empty() {
                    return Err(self.err("init points must be non-empty"));
                }
                InitKind::Points(points)
            }
            "uniform" => {
                self.expect(Tok::LParen, "'('")?;
                let vars = self.vars.clone();
                let f = self.formula(&vars)?;
                self.expect(Tok::RParen, "')'")?;
                InitKind::Uniform(f)
            }
            other => return Err(self.err(format!("unknown init kind '{other}'"))),
        };
        self.expect(Tok::Semi, "';'")?;
        self.expect(Tok::RBrace, "'}'")?;
        Ok((loc, kind, line))
    }

    fn parse_target(&mut self) -> Result<(String, Vec<(String, Formula)>, u32), ModelError> {
        self.keyword("target")?;
        let line = self.line();
        let name = self.ident("target name")?;
        self.expect(Tok::LBrace, "'{'")?;
        let mut entries = Vec::new();
        while *self.peek() != Tok::RBrace {
            let loc = self.ident("location name")?;
            self.expect(Tok::Colon, "':'")?;
            let vars = self.vars.clone();
            let f = self.formula(&vars)?;
            self.expect(Tok::Semi, "';'")?;
            entries.push((loc, f));
        }
        self.expect(Tok::RBrace, "'}'")?;
        Ok((name, entries, line))
    }
}
