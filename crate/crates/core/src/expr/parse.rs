//! Recursive-descent parser for the coefficient language.
//!
//! ```text
//! expr   := term (("+"|"-") term)* ;
//! term   := factor (("*"|"/") factor)* ;
//! factor := ("-")? atom ("^" integer)? ;
//! atom   := integer | ident | ident "(" expr ")" | "(" expr ")"
//!         | "pow" "(" expr "," rational ")" ;
//! ```
//!
//! A minus sign at the start of a term negates the whole term, so `-y/2`
//! reads as `-(y/2)`. Rational constants are written as integer ratios
//! (`3/4`) and folded exactly.

use alloc::string::{String, ToString};

use super::{Expr, Rational, RESERVED};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { name: String, offset: usize },
    #[error("division with empty denominator at byte {offset}")]
    EmptyDenominator { offset: usize },
    #[error("integer literal overflows 64 bits at byte {offset}")]
    Overflow { offset: usize },
}

/// Parses `text` against the declared variable names.
pub fn parse_expression<S: AsRef<str>>(text: &str, vars: &[S]) -> Result<Expr, ParseError> {
    let mut p = Parser {
        src: text.as_bytes(),
        pos: 0,
        vars,
    };
    let e = p.expr()?;
    p.skip_ws();
    if p.pos != p.src.len() {
        return Err(p.syntax("unexpected trailing input"));
    }
    Ok(e)
}

struct Parser<'a, S> {
    src: &'a [u8],
    pos: usize,
    vars: &'a [S],
}

impl<S: AsRef<str>> Parser<'_, S> {
    fn syntax(&self, message: &str) -> ParseError {
        ParseError::Syntax {
            offset: self.pos,
            message: message.to_string(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: u8) -> Result<(), ParseError> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(self.syntax(&alloc::format!("expected `{}`", c as char)))
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut acc = self.term()?;
        loop {
            if self.eat(b'+') {
                let rhs = self.term()?;
                acc = &acc + &rhs;
            } else if self.eat(b'-') {
                let rhs = self.term()?;
                acc = &acc - &rhs;
            } else {
                return Ok(acc);
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut negate = false;
        while self.eat(b'-') {
            negate = !negate;
        }
        let mut acc = self.power()?;
        loop {
            if self.eat(b'*') {
                let rhs = self.factor()?;
                acc = &acc * &rhs;
            } else if self.eat(b'/') {
                let at = self.pos;
                match self.peek() {
                    None | Some(b')') | Some(b',') | Some(b'+') | Some(b'*') | Some(b'/') => {
                        return Err(ParseError::EmptyDenominator { offset: at });
                    }
                    _ => {}
                }
                let rhs = self.factor()?;
                acc = &acc / &rhs;
            } else {
                break;
            }
        }
        Ok(if negate { -acc } else { acc })
    }

    fn factor(&mut self) -> Result<Expr, ParseError> {
        if self.eat(b'-') {
            let inner = self.factor()?;
            return Ok(-inner);
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if self.eat(b'^') {
            self.skip_ws();
            let k = self.integer()?;
            return Ok(Expr::powi(&base, k));
        }
        Ok(base)
    }

    fn integer(&mut self) -> Result<i64, ParseError> {
        self.skip_ws();
        let start = self.pos;
        let mut value: i64 = 0;
        while let Some(&c) = self.src.get(self.pos) {
            if !c.is_ascii_digit() {
                break;
            }
            value = value
                .checked_mul(10)
                .and_then(|v| v.checked_add(i64::from(c - b'0')))
                .ok_or(ParseError::Overflow { offset: start })?;
            self.pos += 1;
        }
        if self.pos == start {
            return Err(self.syntax("expected integer"));
        }
        Ok(value)
    }

    fn rational(&mut self) -> Result<Rational, ParseError> {
        let negative = self.eat(b'-');
        let num = self.integer()?;
        let den = if self.eat(b'/') {
            let at = self.pos;
            if !matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
                return Err(ParseError::EmptyDenominator { offset: at });
            }
            self.integer()?
        } else {
            1
        };
        if den == 0 {
            return Err(self.syntax("zero denominator in exponent"));
        }
        let r = Rational::new(num, den);
        Ok(if negative { -r } else { r })
    }

    fn ident(&mut self) -> &str {
        let start = self.pos;
        while let Some(&c) = self.src.get(self.pos) {
            if c.is_ascii_alphanumeric() || c == b'_' {
                self.pos += 1;
            } else {
                break;
            }
        }
        core::str::from_utf8(&self.src[start..self.pos]).unwrap_or("")
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        match self.peek() {
            Some(c) if c.is_ascii_digit() => Ok(Expr::int(self.integer()?)),
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(b')')?;
                Ok(e)
            }
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => {
                let start = self.pos;
                let name: String = self.ident().into();
                if RESERVED.contains(&name.as_str()) {
                    self.expect(b'(')?;
                    let arg = self.expr()?;
                    let out = match name.as_str() {
                        "sin" => Expr::sin(&arg),
                        "cos" => Expr::cos(&arg),
                        "exp" => Expr::exp(&arg),
                        _ => {
                            self.expect(b',')?;
                            let r = self.rational()?;
                            Expr::pow(&arg, r)
                        }
                    };
                    self.expect(b')')?;
                    return Ok(out);
                }
                match self.vars.iter().position(|v| v.as_ref() == name) {
                    Some(i) => Ok(Expr::var(i)),
                    None => Err(ParseError::UnknownIdentifier {
                        name,
                        offset: start,
                    }),
                }
            }
            Some(_) => Err(self.syntax("unexpected character")),
            None => Err(self.syntax("unexpected end of input")),
        }
    }
}
