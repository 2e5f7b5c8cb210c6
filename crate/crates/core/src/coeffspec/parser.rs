//! Recursive-descent parser for the coefficient grammar.
//!
//! ```text
//! expr   := term (('+'|'-') term)*
//! term   := factor ('*' factor)*
//! factor := number | 't' | probe | reduce
//!         | func '(' expr ')'
//!         | 'min(' expr ',' expr ')' | 'max(' expr ',' expr ')'
//!         | 'clip(' expr ',' number ',' number ')'
//!         | '(' expr ')' | '-' factor
//! probe  := 'x[' int '](' '-'? number ')'
//! reduce := ('avg'|'min'|'max') '(x[' int '])'
//! func   := 'sin' | 'cos' | 'tanh' | 'abs'
//! ```
//!
//! `min`/`max` are resolved by lookahead: `min(x[1])` is a reduction,
//! `min(x[1](0), 2)` a binary minimum. Clip bounds admit a leading `-`
//! (a strict superset of the grammar; negative clip rails are common).
//! Numbers are decimal literals with optional fraction and exponent.

use super::{BinOp, CoeffExpr, ReduceKind, UnOp};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    End,
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: u32,
    col: u32,
}

fn err(line: u32, col: u32, message: impl Into<String>) -> Error {
    Error::Parse { line: line as usize, column: col as usize, message: message.into() }
}

struct Lexer {
    chars: Vec<char>,
    i: usize,
    line: u32,
    col: u32,
}

impl Lexer {
    fn peek(&self) -> Option<char> {
        self.chars.get(self.i).copied()
    }

    fn bump(&mut self) -> char {
        let c = self.chars[self.i];
        self.i += 1;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        c
    }

    fn take_digits(&mut self, lit: &mut String) {
        while matches!(self.peek(), Some('0'..='9')) {
            lit.push(self.bump());
        }
    }
}

fn lex(text: &str) -> Result<Vec<Spanned>> {
    let mut toks = Vec::new();
    let mut lx = Lexer { chars: text.chars().collect(), i: 0, line: 1, col: 1 };
    while let Some(c) = lx.peek() {
        let (tline, tcol) = (lx.line, lx.col);
        match c {
            ' ' | '\t' | '\r' | '\n' => {
                lx.bump();
            }
            '+' | '-' | '*' | '(' | ')' | '[' | ']' | ',' => {
                lx.bump();
                let tok = match c {
                    '+' => Tok::Plus,
                    '-' => Tok::Minus,
                    '*' => Tok::Star,
                    '(' => Tok::LParen,
                    ')' => Tok::RParen,
                    '[' => Tok::LBracket,
                    ']' => Tok::RBracket,
                    _ => Tok::Comma,
                };
                toks.push(Spanned { tok, line: tline, col: tcol });
            }
            '0'..='9' => {
                let mut lit = String::new();
                lx.take_digits(&mut lit);
                if lx.peek() == Some('.') {
                    lit.push(lx.bump());
                    if !matches!(lx.peek(), Some('0'..='9')) {
                        return Err(err(lx.line, lx.col, "expected digits after decimal point"));
                    }
                    lx.take_digits(&mut lit);
                }
                if matches!(lx.peek(), Some('e' | 'E')) {
                    lit.push(lx.bump());
                    if matches!(lx.peek(), Some('+' | '-')) {
                        lit.push(lx.bump());
                    }
                    if !matches!(lx.peek(), Some('0'..='9')) {
                        return Err(err(lx.line, lx.col, "expected digits in exponent"));
                    }
                    lx.take_digits(&mut lit);
                }
                let value: f64 = lit
                    .parse()
                    .map_err(|_| err(tline, tcol, format!("malformed number `{lit}`")))?;
                if !value.is_finite() {
                    return Err(err(tline, tcol, format!("number `{lit}` out of range")));
                }
                toks.push(Spanned { tok: Tok::Num(value), line: tline, col: tcol });
            }
            'a'..='z' | 'A'..='Z' | '_' => {
                let mut name = String::new();
                while matches!(lx.peek(), Some('a'..='z' | 'A'..='Z' | '0'..='9' | '_')) {
                    name.push(lx.bump());
                }
                toks.push(Spanned { tok: Tok::Ident(name), line: tline, col: tcol });
            }
            _ => return Err(err(tline, tcol, format!("unexpected character `{c}`"))),
        }
    }
    toks.push(Spanned { tok: Tok::End, line: lx.line, col: lx.col });
    Ok(toks)
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
    d: usize,
    r0: f64,
}

impl Parser {
    fn peek(&self) -> &Spanned {
        &self.toks[self.pos]
    }

    fn peek_at(&self, ahead: usize) -> &Tok {
        let idx = (self.pos + ahead).min(self.toks.len() - 1);
        &self.toks[idx].tok
    }

    fn advance(&mut self) -> Spanned {
        let s = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        s
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<Spanned> {
        let s = self.advance();
        if s.tok == want {
            Ok(s)
        } else {
            Err(err(s.line, s.col, format!("expected {what}, found {}", describe(&s.tok))))
        }
    }

    fn expr(&mut self) -> Result<CoeffExpr> {
        let mut acc = self.term()?;
        loop {
            let op = match self.peek().tok {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => break,
            };
            self.advance();
            let rhs = self.term()?;
            acc = CoeffExpr::Binary { op, lhs: Box::new(acc), rhs: Box::new(rhs) };
        }
        Ok(acc)
    }

    fn term(&mut self) -> Result<CoeffExpr> {
        let mut acc = self.factor()?;
        while self.peek().tok == Tok::Star {
            self.advance();
            let rhs = self.factor()?;
            acc = CoeffExpr::Binary { op: BinOp::Mul, lhs: Box::new(acc), rhs: Box::new(rhs) };
        }
        Ok(acc)
    }

    fn factor(&mut self) -> Result<CoeffExpr> {
        let s = self.advance();
        match s.tok {
            Tok::Num(v) => Ok(CoeffExpr::Const(v)),
            Tok::Minus => {
                let arg = self.factor()?;
                Ok(CoeffExpr::Unary { op: UnOp::Neg, arg: Box::new(arg) })
            }
            Tok::LParen => {
                let inner = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(inner)
            }
            Tok::Ident(name) => self.ident_factor(&name, s.line, s.col),
            other => Err(err(
                s.line,
                s.col,
                format!("expected a factor, found {}", describe(&other)),
            )),
        }
    }

    fn ident_factor(&mut self, name: &str, line: u32, col: u32) -> Result<CoeffExpr> {
        match name {
            "t" => Ok(CoeffExpr::Time),
            "x" => self.probe_tail(line, col),
            "avg" => self.reduce_tail(ReduceKind::Avg),
            "sin" | "cos" | "tanh" | "abs" => {
                let op = match name {
                    "sin" => UnOp::Sin,
                    "cos" => UnOp::Cos,
                    "tanh" => UnOp::Tanh,
                    _ => UnOp::Abs,
                };
                self.expect(Tok::LParen, "`(`")?;
                let arg = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(CoeffExpr::Unary { op, arg: Box::new(arg) })
            }
            "min" | "max" => {
                // reduction iff the parenthesized body is exactly `x[int]`
                let is_reduce = *self.peek_at(0) == Tok::LParen
                    && matches!(self.peek_at(1), Tok::Ident(n) if n == "x")
                    && *self.peek_at(2) == Tok::LBracket
                    && matches!(self.peek_at(3), Tok::Num(_))
                    && *self.peek_at(4) == Tok::RBracket
                    && *self.peek_at(5) == Tok::RParen;
                if is_reduce {
                    let kind = if name == "min" { ReduceKind::Min } else { ReduceKind::Max };
                    return self.reduce_tail(kind);
                }
                let op = if name == "min" { BinOp::Min } else { BinOp::Max };
                self.expect(Tok::LParen, "`(`")?;
                let lhs = self.expr()?;
                self.expect(Tok::Comma, "`,`")?;
                let rhs = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(CoeffExpr::Binary { op, lhs: Box::new(lhs), rhs: Box::new(rhs) })
            }
            "clip" => {
                self.expect(Tok::LParen, "`(`")?;
                let arg = self.expr()?;
                self.expect(Tok::Comma, "`,`")?;
                let (lo, lo_line, lo_col) = self.signed_number()?;
                self.expect(Tok::Comma, "`,`")?;
                let (hi, _, _) = self.signed_number()?;
                self.expect(Tok::RParen, "`)`")?;
                if lo > hi {
                    return Err(err(
                        lo_line,
                        lo_col,
                        format!("clip bounds [{lo}, {hi}] out of order"),
                    ));
                }
                Ok(CoeffExpr::Clip { arg: Box::new(arg), lo, hi })
            }
            _ => Err(err(line, col, format!("unknown identifier `{name}`"))),
        }
    }

    /// After the `x` of a probe: `[ int ] ( -? number )`.
    fn probe_tail(&mut self, line: u32, col: u32) -> Result<CoeffExpr> {
        self.expect(Tok::LBracket, "`[`")?;
        let index = self.component_index()?;
        self.expect(Tok::RBracket, "`]`")?;
        self.expect(Tok::LParen, "`(`")?;
        let (raw, _, _) = self.signed_number()?;
        self.expect(Tok::RParen, "`)`")?;
        // the argument is the window offset; lags are written negative
        let lag = -raw;
        if !(0.0..=self.r0).contains(&lag) {
            return Err(err(line, col, format!("lag {lag} outside [0, {}]", self.r0)));
        }
        let offset = if raw == 0.0 { 0.0 } else { raw };
        Ok(CoeffExpr::Probe { index, offset })
    }

    /// After the reduction name: `( x [ int ] )`.
    fn reduce_tail(&mut self, kind: ReduceKind) -> Result<CoeffExpr> {
        self.expect(Tok::LParen, "`(`")?;
        let s = self.advance();
        if !matches!(&s.tok, Tok::Ident(n) if n == "x") {
            return Err(err(s.line, s.col, format!("expected `x`, found {}", describe(&s.tok))));
        }
        self.expect(Tok::LBracket, "`[`")?;
        let index = self.component_index()?;
        self.expect(Tok::RBracket, "`]`")?;
        self.expect(Tok::RParen, "`)`")?;
        Ok(CoeffExpr::Reduce { kind, index })
    }

    fn component_index(&mut self) -> Result<usize> {
        let s = self.advance();
        let Tok::Num(v) = s.tok else {
            return Err(err(
                s.line,
                s.col,
                format!("expected a component index, found {}", describe(&s.tok)),
            ));
        };
        if v.fract() != 0.0 || !(1.0..=1e9).contains(&v) {
            return Err(err(s.line, s.col, format!("component index must be a positive integer, got {v}")));
        }
        let index = v as usize;
        if index > self.d {
            return Err(err(s.line, s.col, format!("segment index {index} outside 1..{}", self.d)));
        }
        Ok(index)
    }

    fn signed_number(&mut self) -> Result<(f64, u32, u32)> {
        let s = self.advance();
        match s.tok {
            Tok::Num(v) => Ok((v, s.line, s.col)),
            Tok::Minus => {
                let n = self.advance();
                if let Tok::Num(v) = n.tok {
                    Ok((-v, s.line, s.col))
                } else {
                    Err(err(n.line, n.col, format!("expected a number, found {}", describe(&n.tok))))
                }
            }
            other => Err(err(s.line, s.col, format!("expected a number, found {}", describe(&other)))),
        }
    }
}

fn describe(tok: &Tok) -> String {
    match tok {
        Tok::Num(v) => format!("number `{v}`"),
        Tok::Ident(n) => format!("`{n}`"),
        Tok::Plus => "`+`".into(),
        Tok::Minus => "`-`".into(),
        Tok::Star => "`*`".into(),
        Tok::LParen => "`(`".into(),
        Tok::RParen => "`)`".into(),
        Tok::LBracket => "`[`".into(),
        Tok::RBracket => "`]`".into(),
        Tok::Comma => "`,`".into(),
        Tok::End => "end of input".into(),
    }
}

/// Parse one coefficient against the ambient dimensions: probe indices
/// must lie in `1..=d` and lags in `[0, r0]`.
pub fn parse_coeff(text: &str, d: usize, r0: f64) -> Result<CoeffExpr> {
    if text.trim().is_empty() {
        return Err(err(1, 1, "empty coefficient expression"));
    }
    let toks = lex(text)?;
    let mut p = Parser { toks, pos: 0, d, r0 };
    let expr = p.expr()?;
    let s = p.peek().clone();
    if s.tok != Tok::End {
        return Err(err(s.line, s.col, format!("unexpected {} after expression", describe(&s.tok))));
    }
    Ok(expr)
}
