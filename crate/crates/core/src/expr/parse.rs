use std::sync::Arc;

use super::{add, call, div, konst, mul, neg, pow, sub, Expr, Intrinsic, Node, ParseError, Var};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(u8),
    LParen,
    RParen,
    End,
}

pub(super) struct Parser<'a> {
    src: &'a str,
    n: usize,
    pos: usize,
    tok: Tok,
    tok_start: usize,
}

impl<'a> Parser<'a> {
    pub(super) fn new(src: &'a str, n: usize) -> Self {
        Self { src, n, pos: 0, tok: Tok::End, tok_start: 0 }
    }

    pub(super) fn parse(mut self) -> Result<Expr, ParseError> {
        self.advance()?;
        let e = self.expr()?;
        if self.tok != Tok::End {
            return Err(self.syntax("unexpected trailing input"));
        }
        Ok(e)
    }

    fn syntax(&self, message: &str) -> ParseError {
        ParseError::Syntax { offset: self.tok_start, message: message.to_owned() }
    }

    fn advance(&mut self) -> Result<(), ParseError> {
        let bytes = self.src.as_bytes();
        while self.pos < bytes.len() && bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        self.tok_start = self.pos;
        let Some(&c) = bytes.get(self.pos) else {
            self.tok = Tok::End;
            return Ok(());
        };
        self.tok = match c {
            b'+' | b'-' | b'*' | b'/' | b'^' => {
                self.pos += 1;
                Tok::Op(c)
            }
            b'(' => {
                self.pos += 1;
                Tok::LParen
            }
            b')' => {
                self.pos += 1;
                Tok::RParen
            }
            b'0'..=b'9' | b'.' => self.number()?,
            c if c.is_ascii_alphabetic() || c == b'_' => {
                let start = self.pos;
                while self.pos < bytes.len() && (bytes[self.pos].is_ascii_alphanumeric() || bytes[self.pos] == b'_') {
                    self.pos += 1;
                }
                Tok::Ident(self.src[start..self.pos].to_owned())
            }
            _ => {
                let ch = self.src[self.pos..].chars().next().unwrap_or('?');
                return Err(ParseError::Syntax {
                    offset: self.pos,
                    message: format!("unexpected character `{ch}`"),
                });
            }
        };
        Ok(())
    }

    fn number(&mut self) -> Result<Tok, ParseError> {
        let bytes = self.src.as_bytes();
        let start = self.pos;
        let digits = |pos: &mut usize| {
            let s = *pos;
            while *pos < bytes.len() && bytes[*pos].is_ascii_digit() {
                *pos += 1;
            }
            *pos - s
        };
        let mut count = digits(&mut self.pos);
        if self.pos < bytes.len() && bytes[self.pos] == b'.' {
            self.pos += 1;
            count += digits(&mut self.pos);
        }
        if count == 0 {
            return Err(ParseError::Syntax { offset: start, message: "malformed number".into() });
        }
        if self.pos < bytes.len() && (bytes[self.pos] == b'e' || bytes[self.pos] == b'E') {
            let mut look = self.pos + 1;
            if look < bytes.len() && (bytes[look] == b'+' || bytes[look] == b'-') {
                look += 1;
            }
            if digits(&mut look) > 0 {
                self.pos = look;
            }
        }
        self.src[start..self.pos]
            .parse::<f64>()
            .map(Tok::Num)
            .map_err(|_| ParseError::Syntax { offset: start, message: "malformed number".into() })
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            match self.tok {
                Tok::Op(b'+') => {
                    self.advance()?;
                    lhs = add(lhs, self.term()?);
                }
                Tok::Op(b'-') => {
                    self.advance()?;
                    lhs = sub(lhs, self.term()?);
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            match self.tok {
                Tok::Op(b'*') => {
                    self.advance()?;
                    lhs = mul(lhs, self.unary()?);
                }
                Tok::Op(b'/') => {
                    self.advance()?;
                    lhs = div(lhs, self.unary()?);
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        match self.tok {
            Tok::Op(b'-') => {
                self.advance()?;
                Ok(neg(self.unary()?))
            }
            Tok::Op(b'+') => {
                self.advance()?;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if self.tok == Tok::Op(b'^') {
            self.advance()?;
            let exponent = self.unary()?;
            Ok(pow(base, exponent))
        } else {
            Ok(base)
        }
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        match self.tok.clone() {
            Tok::Num(v) => {
                self.advance()?;
                Ok(konst(v))
            }
            Tok::LParen => {
                self.advance()?;
                let e = self.expr()?;
                if self.tok != Tok::RParen {
                    return Err(self.syntax("expected `)`"));
                }
                self.advance()?;
                Ok(e)
            }
            Tok::Ident(name) => {
                let start = self.tok_start;
                self.advance()?;
                if self.tok == Tok::LParen {
                    let f = Intrinsic::from_name(&name)
                        .ok_or(ParseError::UnknownIntrinsic { name: name.clone(), offset: start })?;
                    self.advance()?;
                    let arg = self.expr()?;
                    if self.tok != Tok::RParen {
                        return Err(self.syntax("expected `)` after intrinsic argument"));
                    }
                    self.advance()?;
                    return Ok(call(f, arg));
                }
                self.identifier(name, start)
            }
            Tok::End => Err(self.syntax("unexpected end of input")),
            Tok::RParen => Err(self.syntax("unexpected `)`")),
            Tok::Op(op) => Err(self.syntax(&format!("unexpected operator `{}`", op as char))),
        }
    }

    fn identifier(&self, name: String, offset: usize) -> Result<Expr, ParseError> {
        if let Some(var) = Var::parse(&name, self.n) {
            return Ok(Arc::new(Node::Var(var)));
        }
        let looks_like_coord = matches!(name.as_bytes()[0], b'q' | b'p')
            && name.len() > 1
            && name[1..].bytes().all(|b| b.is_ascii_digit());
        if looks_like_coord {
            return Err(ParseError::IndexOutOfRange { name, offset, dim: self.n });
        }
        Ok(Arc::new(Node::Param(Arc::from(name.as_str()))))
    }
}
