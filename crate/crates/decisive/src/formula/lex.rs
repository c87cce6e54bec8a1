use num_traits::pow::Pow;

use crate::Rational;

use super::FormulaError;

/// Tokens shared by the formula grammar and the model-file grammar.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    Num(Rational),
    Plus,
    Minus,
    Star,
    Slash,
    Lt,
    Le,
    Eq,
    Ge,
    Gt,
    Amp,
    Pipe,
    Bang,
    LParen,
    RParen,
    LBrace,
    RBrace,
    Semi,
    Comma,
    Colon,
    Eof,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Pos {
    pub line: u32,
    pub col: u32,
}

#[derive(Debug, Clone)]
pub struct Token {
    pub tok: Tok,
    pub pos: Pos,
}

/// Lexes the whole input. Identifiers are `[a-zA-Z_][a-zA-Z0-9_]*` with an
/// optional trailing `'` (used for post-state variables in reset formulas).
/// Decimal literals are parsed as exact rationals. `//` starts a line
/// comment (model files only use it, but it is harmless everywhere).
pub fn lex(input: &str) -> Result<Vec<Token>, FormulaError> {
    let mut out = Vec::new();
    let mut chars = input.chars().peekable();
    let mut line = 1u32;
    let mut col = 1u32;
    macro_rules! push {
        ($tok:expr, $pos:expr) => {
            out.push(Token { tok: $tok, pos: $pos })
        };
    }
    while let Some(&c) = chars.peek() {
        let pos = Pos { line, col };
        match c {
            '\n' => {
                chars.next();
                line += 1;
                col = 1;
            }
            c if c.is_whitespace() => {
                chars.next();
                col += 1;
            }
            '/' => {
                chars.next();
                col += 1;
                if chars.peek() == Some(&'/') {
                    while let Some(&c) = chars.peek() {
                        if c == '\n' {
                            break;
                        }
                        chars.next();
                        col += 1;
                    }
                } else {
                    push!(Tok::Slash, pos);
                }
            }
            c if c.is_ascii_digit() => {
                let mut digits = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_ascii_digit() {
                        digits.push(c);
                        chars.next();
                        col += 1;
                    } else {
                        break;
                    }
                }
                let mut frac = String::new();
                if chars.peek() == Some(&'.') {
                    chars.next();
                    col += 1;
                    while let Some(&c) = chars.peek() {
                        if c.is_ascii_digit() {
                            frac.push(c);
                            chars.next();
                            col += 1;
                        } else {
                            break;
                        }
                    }
                    if frac.is_empty() {
                        return Err(FormulaError::Syntax {
                            line: pos.line,
                            col: pos.col,
                            msg: "expected digits after decimal point".into(),
                        });
                    }
                }
                let int: num_bigint::BigInt = digits.parse().expect("digits");
                let mut q = Rational::from_integer(int);
                if !frac.is_empty() {
                    let num: num_bigint::BigInt = frac.parse().expect("digits");
                    let den = num_bigint::BigInt::from(10u32).pow(frac.len() as u32);
                    q += Rational::new(num, den);
                }
                push!(Tok::Num(q), pos);
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let mut name = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_ascii_alphanumeric() || c == '_' {
                        name.push(c);
                        chars.next();
                        col += 1;
                    } else {
                        break;
                    }
                }
                if chars.peek() == Some(&'\'') {
                    name.push('\'');
                    chars.next();
                    col += 1;
                }
                push!(Tok::Ident(name), pos);
            }
            _ => {
                chars.next();
                col += 1;
                let tok = match c {
                    '+' => Tok::Plus,
                    '-' => Tok::Minus,
                    '*' => Tok::Star,
                    '(' => Tok::LParen,
                    ')' => Tok::RParen,
                    '{' => Tok::LBrace,
                    '}' => Tok::RBrace,
                    ';' => Tok::Semi,
                    ',' => Tok::Comma,
                    ':' => Tok::Colon,
                    '&' => Tok::Amp,
                    '|' => Tok::Pipe,
                    '!' => Tok::Bang,
                    '=' => Tok::Eq,
                    '<' => {
                        if chars.peek() == Some(&'=') {
                            chars.next();
                            col += 1;
                            Tok::Le
                        } else {
                            Tok::Lt
                        }
                    }
                    '>' => {
                        if chars.peek() == Some(&'=') {
                            chars.next();
                            col += 1;
                            Tok::Ge
                        } else {
                            Tok::Gt
                        }
                    }
                    other => {
                        return Err(FormulaError::Syntax {
                            line: pos.line,
                            col: pos.col,
                            msg: format!("unexpected character '{other}'"),
                        })
                    }
                };
                push!(tok, pos);
            }
        }
    }
    push!(Tok::Eof, Pos { line, col });
    Ok(out)
}
