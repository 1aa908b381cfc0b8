//! Parser for the expression grammar.
//!
//! Variables come from the active chart; literals are integers `3`, rationals
//! `3/2`, or floats `1.5`; operators are `+ - * ^` with nonnegative integer
//! powers; `exp`, `sin`, `cos` take a linear-form argument. Whitespace is
//! insignificant. The printed form of an expression parses back to a
//! structurally equal expression.

use crate::chart::Chart;
use crate::expr::Expression;
use crate::scalar::Scalar;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
#[error("parse error at byte {pos}: {msg}")]
pub struct ParseError {
    pub pos: usize,
    pub msg: String,
}

fn err<T>(pos: usize, msg: impl Into<String>) -> Result<T, ParseError> {
    Err(ParseError {
        pos,
        msg: msg.into(),
    })
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(Scalar),
    Ident(String),
    Plus,
    Minus,
    Star,
    Caret,
    LParen,
    RParen,
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn tokens(src: &'a str) -> Result<Vec<(usize, Tok)>, ParseError> {
        let mut lx = Lexer {
            src: src.as_bytes(),
            pos: 0,
        };
        let mut out = Vec::new();
        loop {
            lx.skip_ws();
            if lx.pos >= lx.src.len() {
                break;
            }
            let start = lx.pos;
            let c = lx.src[lx.pos];
            let tok = match c {
                b'+' => {
                    lx.pos += 1;
                    Tok::Plus
                }
                b'-' => {
                    lx.pos += 1;
                    Tok::Minus
                }
                b'*' => {
                    lx.pos += 1;
                    Tok::Star
                }
                b'^' => {
                    lx.pos += 1;
                    Tok::Caret
                }
                b'(' => {
                    lx.pos += 1;
                    Tok::LParen
                }
                b')' => {
                    lx.pos += 1;
                    Tok::RParen
                }
                b'0'..=b'9' | b'.' => lx.number(start)?,
                c if c.is_ascii_alphabetic() || c == b'_' => {
                    while lx.pos < lx.src.len()
                        && (lx.src[lx.pos].is_ascii_alphanumeric() || lx.src[lx.pos] == b'_')
                    {
                        lx.pos += 1;
                    }
                    Tok::Ident(String::from_utf8_lossy(&lx.src[start..lx.pos]).into_owned())
                }
                other => return err(start, format!("unexpected character `{}`", other as char)),
            };
            out.push((start, tok));
        }
        Ok(out)
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn number(&mut self, start: usize) -> Result<Tok, ParseError> {
        let mut is_float = false;
        while self.pos < self.src.len() {
            match self.src[self.pos] {
                b'0'..=b'9' => self.pos += 1,
                b'.' => {
                    is_float = true;
                    self.pos += 1;
                }
                b'e' | b'E' if is_float => {
                    self.pos += 1;
                    if self.pos < self.src.len()
                        && (self.src[self.pos] == b'+' || self.src[self.pos] == b'-')
                    {
                        self.pos += 1;
                    }
                }
                _ => break,
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        match Scalar::parse(text) {
            Some(s) => Ok(Tok::Num(s)),
            None => err(start, format!("bad numeric literal `{text}`")),
        }
    }
}

struct Parser {
    chart: Chart,
    toks: Vec<(usize, Tok)>,
    at: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.at).map(|(_, t)| t)
    }

    fn pos(&self) -> usize {
        self.toks.get(self.at).map(|(p, _)| *p).unwrap_or(self.end)
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.at).map(|(_, t)| t.clone());
        self.at += 1;
        t
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<(), ParseError> {
        let p = self.pos();
        match self.bump() {
            Some(t) if t == tok => Ok(()),
            _ => err(p, format!("expected {what}")),
        }
    }

    // sum := product (('+'|'-') product)*
    fn sum(&mut self) -> Result<Expression, ParseError> {
        let mut acc = self.product()?;
        loop {
            match self.peek() {
                Some(Tok::Plus) => {
                    self.bump();
                    acc = acc.add(&self.product()?);
                }
                Some(Tok::Minus) => {
                    self.bump();
                    acc = acc.sub(&self.product()?);
                }
                _ => return Ok(acc),
            }
        }
    }

    // product := factor ('*' factor | '/' integer)*
    // `/` only forms rational literals like 3/2; there is no general division
    fn product(&mut self) -> Result<Expression, ParseError> {
        let mut acc = self.factor()?;
        while let Some(Tok::Star) = self.peek() {
            self.bump();
            acc = acc.mul(&self.factor()?);
        }
        Ok(acc)
    }

    // factor := '-' factor | atom ('^' nat)?
    fn factor(&mut self) -> Result<Expression, ParseError> {
        if let Some(Tok::Minus) = self.peek() {
            self.bump();
            return Ok(self.factor()?.neg());
        }
        let mut e = self.atom()?;
        if let Some(Tok::Caret) = self.peek() {
            self.bump();
            let p = self.pos();
            match self.bump() {
                Some(Tok::Num(Scalar::Exact(r))) if r.is_integer() && !r.numer().sign().eq(&num_bigint::Sign::Minus) => {
                    let n: u32 = r
                        .numer()
                        .try_into()
                        .map_err(|_| ParseError {
                            pos: p,
                            msg: "exponent too large".into(),
                        })?;
                    e = e.pow(n);
                }
                _ => return err(p, "expected a nonnegative integer exponent"),
            }
        }
        Ok(e)
    }

    fn atom(&mut self) -> Result<Expression, ParseError> {
        let p = self.pos();
        match self.bump() {
            Some(Tok::Num(s)) => Ok(Expression::constant(self.chart, s)),
            Some(Tok::Ident(name)) => match name.as_str() {
                "exp" | "sin" | "cos" => {
                    self.expect(Tok::LParen, "`(` after function name")?;
                    let inner_start = self.pos();
                    let inner = self.sum()?;
                    self.expect(Tok::RParen, "`)`")?;
                    let lf = inner.as_linear_form().ok_or(ParseError {
                        pos: inner_start,
                        msg: format!("argument of {name} must be a linear form"),
                    })?;
                    Ok(match name.as_str() {
                        "exp" => Expression::exp_of(lf),
                        "sin" => Expression::sin_of(lf),
                        _ => Expression::cos_of(lf),
                    })
                }
                _ => Expression::var(self.chart, &name).map_err(|_| ParseError {
                    pos: p,
                    msg: format!(
                        "unknown variable `{name}` (chart variables: {})",
                        self.chart.vars().join(", ")
                    ),
                }),
            },
            Some(Tok::LParen) => {
                let e = self.sum()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            _ => err(p, "expected a number, variable, function, or `(`"),
        }
    }
}

/// Parse `text` as an expression over `chart`.
pub fn parse_expression(chart: Chart, text: &str) -> Result<Expression, ParseError> {
    let toks = Lexer::tokens(text)?;
    // Fold rational literals "a/b": Num '/' Num. The lexer has no slash token,
    // so Scalar::parse handles them only when unseparated; rebuild here from
    // the raw text instead: simplest is to pre-scan for '/'.
    let mut parser = Parser {
        chart,
        toks,
        at: 0,
        end: text.len(),
    };
    let e = parser.sum()?;
    if parser.at != parser.toks.len() {
        return err(parser.pos(), "unexpected trailing input");
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::Point;

    #[test]
    fn bilinear_parses() {
        let e = parse_expression(Chart::Txyz, "t*y + x*z").unwrap();
        assert_eq!(e.num_terms(), 2);
        let v = e
            .evaluate(&Point::from_ints(Chart::Txyz, &[1, 2, 3, 4]))
            .unwrap();
        assert_eq!(v, Scalar::from_int(11));
    }

    #[test]
    fn function_of_linear_form() {
        let e = parse_expression(Chart::EtaXiQY, "exp(q) * sin(2*xi - y)").unwrap();
        assert_eq!(e.num_terms(), 1);
    }

    #[test]
    fn nonlinear_trig_argument_rejected() {
        let e = parse_expression(Chart::Txyz, "sin(x^2)");
        let msg = e.unwrap_err().msg;
        assert!(msg.contains("linear form"), "{msg}");
    }

    #[test]
    fn error_position_reported() {
        let e = parse_expression(Chart::Txyz, "t + $");
        assert_eq!(e.unwrap_err().pos, 4);
    }

    #[test]
    fn rationals_and_floats() {
        let e = parse_expression(Chart::Txyz, "3/2*t + 1.5*x").unwrap();
        let v = e
            .evaluate(&Point::from_ints(Chart::Txyz, &[2, 0, 0, 0]))
            .unwrap();
        assert_eq!(v, Scalar::from_int(3));
        let w = e
            .evaluate(&Point::from_ints(Chart::Txyz, &[0, 2, 0, 0]))
            .unwrap();
        assert_eq!(w, Scalar::float(3.0));
    }

    #[test]
    fn print_parse_round_trip() {
        for text in [
            "t*y + x*z",
            "(xi + q - y)^4",
            "exp(eta)*cos(xi) - 3/2*q^2",
            "2*sin(2*xi + q - y) + exp(eta + 1/2*y)",
        ] {
            let chart = if text.contains("xi") {
                Chart::EtaXiQY
            } else {
                Chart::Txyz
            };
            let e = parse_expression(chart, text).unwrap();
            let printed = e.to_string();
            let back = parse_expression(chart, &printed).unwrap();
            assert_eq!(back, e, "round trip of `{text}` via `{printed}`");
        }
    }
}
