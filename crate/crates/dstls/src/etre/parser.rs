//! Textual DSL for ETRE expressions.
//!
//! Grammar (lowest to highest precedence):
//!   union   := concat ('|' concat)*
//!   concat  := within ('.' within)*
//!   within  := postfix ('within' '[' num ',' num ']')*
//!   postfix := primary ('+')*
//!   primary := 'tube' '(' num ',' num ')' | 'any' | '(' union ')'
//!
//! `|` and `.` associate to the left. A `.` directly between digits is part
//! of a number literal, otherwise it is the concatenation operator.

use crate::etre::Expr;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Tube,
    Any,
    Within,
    Num(f64),
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Dot,
    Pipe,
    Plus,
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn tokens(mut self) -> Result<Vec<(usize, Tok)>> {
        let mut out = Vec::new();
        loop {
            while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
                self.pos += 1;
            }
            if self.pos >= self.src.len() {
                return Ok(out);
            }
            let start = self.pos;
            let c = self.src[self.pos];
            let tok = match c {
                b'(' => self.one(Tok::LParen),
                b')' => self.one(Tok::RParen),
                b'[' => self.one(Tok::LBracket),
                b']' => self.one(Tok::RBracket),
                b',' => self.one(Tok::Comma),
                b'.' => self.one(Tok::Dot),
                b'|' => self.one(Tok::Pipe),
                b'+' => self.one(Tok::Plus),
                b'-' | b'0'..=b'9' => self.number(start)?,
                c if c.is_ascii_alphabetic() => self.word(start)?,
                c => {
                    return Err(Error::Parse { pos: start, msg: format!("unexpected character `{}`", c as char) })
                }
            };
            out.push((start, tok));
        }
    }

    fn one(&mut self, t: Tok) -> Tok {
        self.pos += 1;
        t
    }

    fn number(&mut self, start: usize) -> Result<Tok> {
        if self.src[self.pos] == b'-' {
            self.pos += 1;
        }
        let digits_start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if self.pos == digits_start {
            return Err(Error::Parse { pos: start, msg: "expected digits after `-`".into() });
        }
        // Fractional part only when a digit follows the dot, so a trailing
        // `.` stays a concat operator.
        if self.pos + 1 < self.src.len() && self.src[self.pos] == b'.' && self.src[self.pos + 1].is_ascii_digit() {
            self.pos += 1;
            while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
        }
        if self.pos < self.src.len() && (self.src[self.pos] | 0x20) == b'e' {
            let mut p = self.pos + 1;
            if p < self.src.len() && (self.src[p] == b'+' || self.src[p] == b'-') {
                p += 1;
            }
            if p < self.src.len() && self.src[p].is_ascii_digit() {
                while p < self.src.len() && self.src[p].is_ascii_digit() {
                    p += 1;
                }
                self.pos = p;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii slice");
        let v: f64 = text
            .parse()
            .map_err(|e| Error::Parse { pos: start, msg: format!("bad number `{text}`: {e}") })?;
        Ok(Tok::Num(v))
    }

    fn word(&mut self, start: usize) -> Result<Tok> {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_alphanumeric() {
            self.pos += 1;
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii slice");
        match text {
            "tube" => Ok(Tok::Tube),
            "any" => Ok(Tok::Any),
            "within" => Ok(Tok::Within),
            other => Err(Error::Parse { pos: start, msg: format!("unknown keyword `{other}`") }),
        }
    }
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    idx: usize,
    end_pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.idx).map(|(_, t)| t)
    }

    fn pos(&self) -> usize {
        self.toks.get(self.idx).map_or(self.end_pos, |(p, _)| *p)
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.idx).map(|(_, t)| t.clone());
        if t.is_some() {
            self.idx += 1;
        }
        t
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<()> {
        let pos = self.pos();
        match self.bump() {
            Some(t) if t == want => Ok(()),
            _ => Err(Error::Parse { pos, msg: format!("expected {what}") }),
        }
    }

    fn num(&mut self) -> Result<f64> {
        let pos = self.pos();
        match self.bump() {
            Some(Tok::Num(v)) => Ok(v),
            _ => Err(Error::Parse { pos, msg: "expected a number".into() }),
        }
    }

    fn union(&mut self) -> Result<Expr> {
        let mut e = self.concat()?;
        while self.peek() == Some(&Tok::Pipe) {
            self.bump();
            e = Expr::union(e, self.concat()?);
        }
        Ok(e)
    }

    fn concat(&mut self) -> Result<Expr> {
        let mut e = self.within()?;
        while self.peek() == Some(&Tok::Dot) {
            self.bump();
            e = Expr::concat(e, self.within()?);
        }
        Ok(e)
    }

    fn within(&mut self) -> Result<Expr> {
        let mut e = self.postfix()?;
        while self.peek() == Some(&Tok::Within) {
            self.bump();
            self.expect(Tok::LBracket, "`[`")?;
            let pos = self.pos();
            let lo = self.num()?;
            self.expect(Tok::Comma, "`,`")?;
            let hi = self.num()?;
            self.expect(Tok::RBracket, "`]`")?;
            e = Expr::within(e, lo, hi).map_err(|err| Error::Parse { pos, msg: err.to_string() })?;
        }
        Ok(e)
    }

    fn postfix(&mut self) -> Result<Expr> {
        let mut e = self.primary()?;
        while self.peek() == Some(&Tok::Plus) {
            self.bump();
            e = Expr::plus(e);
        }
        Ok(e)
    }

    fn primary(&mut self) -> Result<Expr> {
        let pos = self.pos();
        match self.bump() {
            Some(Tok::Tube) => {
                self.expect(Tok::LParen, "`(`")?;
                let center = self.num()?;
                self.expect(Tok::Comma, "`,`")?;
                let dpos = self.pos();
                let delta = self.num()?;
                self.expect(Tok::RParen, "`)`")?;
                Expr::tube(center, delta).map_err(|err| Error::Parse { pos: dpos, msg: err.to_string() })
            }
            Some(Tok::Any) => Ok(Expr::Any),
            Some(Tok::LParen) => {
                let e = self.union()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            _ => Err(Error::Parse { pos, msg: "expected `tube`, `any`, or `(`".into() }),
        }
    }
}

/// Parses an ETRE from its textual form.
pub fn parse_etre(text: &str) -> Result<Expr> {
    let toks = Lexer { src: text.as_bytes(), pos: 0 }.tokens()?;
    let mut p = Parser { toks, idx: 0, end_pos: text.len() };
    let e = p.union()?;
    if p.idx != p.toks.len() {
        return Err(Error::Parse { pos: p.pos(), msg: "trailing input".into() });
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_transition_expression() {
        let e = parse_etre("(tube(20,5)+ within [30,30]) . (any within [0,60]) . (tube(34,10)+ within [30,30])")
            .unwrap();
        let expect = Expr::concat(
            Expr::concat(
                Expr::within(Expr::plus(Expr::tube(20.0, 5.0).unwrap()), 30.0, 30.0).unwrap(),
                Expr::within(Expr::Any, 0.0, 60.0).unwrap(),
            ),
            Expr::within(Expr::plus(Expr::tube(34.0, 10.0).unwrap()), 30.0, 30.0).unwrap(),
        );
        assert_eq!(e, expect);
    }

    #[test]
    fn union_has_lowest_precedence() {
        let e = parse_etre("tube(20,5)+ within [30,30] | tube(34,10)+ within [30,30]").unwrap();
        let expect = Expr::union(
            Expr::within(Expr::plus(Expr::tube(20.0, 5.0).unwrap()), 30.0, 30.0).unwrap(),
            Expr::within(Expr::plus(Expr::tube(34.0, 10.0).unwrap()), 30.0, 30.0).unwrap(),
        );
        assert_eq!(e, expect);
    }

    #[test]
    fn rejects_negative_delta() {
        let err = parse_etre("tube(20,-1)").unwrap_err();
        assert!(err.to_string().contains("negative delta"), "{err}");
    }

    #[test]
    fn rejects_inverted_duration_bounds() {
        let err = parse_etre("any within [5,2]").unwrap_err();
        assert!(err.to_string().contains("bad duration bounds"), "{err}");
    }

    #[test]
    fn reports_error_position() {
        match parse_etre("tube(20,5) ! any") {
            Err(Error::Parse { pos, .. }) => assert_eq!(pos, 11),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn decimal_numbers_and_concat_dots() {
        let e = parse_etre("tube(20.5,0.5) . any").unwrap();
        assert_eq!(
            e,
            Expr::concat(Expr::tube(20.5, 0.5).unwrap(), Expr::Any)
        );
    }

    #[test]
    fn print_parse_fixed_point_on_samples() {
        let samples = [
            "tube(20,5)",
            "any",
            "tube(20,5)+",
            "(tube(20,5) . any)+",
            "tube(20,5)+ within [30,30]",
            "(any within [0,60]) within [1,2]",
            "tube(20,5) . any . tube(34,10)",
            "tube(20,5) | any | tube(34,10)",
            "(tube(20,5) | any) . tube(34,10)+ within [3,7]",
            "(tube(20,5)+ within [30,30]) . (any within [0,60]) . (tube(34,10)+ within [30,30]) \
             | (tube(34,10)+ within [30,30]) . (any within [0,60]) . (tube(20,5)+ within [30,30])",
        ];
        for s in samples {
            let e = parse_etre(s).unwrap();
            let printed = e.to_string();
            let reparsed = parse_etre(&printed).unwrap();
            assert_eq!(reparsed, e, "not a fixed point: `{s}` -> `{printed}`");
            assert_eq!(reparsed.to_string(), printed);
        }
    }
}
