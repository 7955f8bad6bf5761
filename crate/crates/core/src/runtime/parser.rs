//! Line grammar for model-emitted API calls:
//!
//! ```text
//! line  := IDENT '(' [arg (',' arg)*] ')' [';']
//! arg   := STRING | NUMBER | 'null' | IDENT '=' (NUMBER | 'null' | STRING)
//! ```
//!
//! Whitespace is allowed between tokens. Named arguments are limited to
//! `x`, `y` and `z` and must come after all positional arguments.

use std::fmt;

use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Arg {
    Str(String),
    Num(f64),
    Null,
    Named(Axis, Option<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Axis {
    X,
    Y,
    Z,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ApiCall {
    pub name: String,
    pub args: Vec<Arg>,
    pub raw_line: String,
}

/// A line is either a call or something to skip silently.
#[derive(Debug, Clone, PartialEq)]
pub enum Line {
    Call(ApiCall),
    Comment,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("parse error at byte {offset}: {reason}")]
pub struct ParseError {
    pub offset: usize,
    pub reason: String,
}

struct Cursor<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        Some(c)
    }

    fn skip_ws(&mut self) {
        while self.peek().is_some_and(char::is_whitespace) {
            self.bump();
        }
    }

    fn err<T>(&self, reason: impl fmt::Display) -> Result<T, ParseError> {
        Err(ParseError {
            offset: self.pos,
            reason: reason.to_string(),
        })
    }

    fn expect(&mut self, want: char) -> Result<(), ParseError> {
        match self.peek() {
            Some(c) if c == want => {
                self.bump();
                Ok(())
            }
            Some(c) => self.err(format!("expected {want:?}, found {c:?}")),
            None => self.err(format!("expected {want:?}, found end of line")),
        }
    }

    fn ident(&mut self) -> Result<&'a str, ParseError> {
        let start = self.pos;
        match self.peek() {
            Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
            Some(c) => return self.err(format!("expected identifier, found {c:?}")),
            None => return self.err("expected identifier, found end of line"),
        }
        while self.peek().is_some_and(|c| c.is_ascii_alphanumeric() || c == '_') {
            self.bump();
        }
        Ok(&self.src[start..self.pos])
    }

    fn string(&mut self) -> Result<String, ParseError> {
        self.expect('"')?;
        let mut out = String::new();
        loop {
            match self.bump() {
                Some('"') => return Ok(out),
                Some('\\') => match self.bump() {
                    Some('"') => out.push('"'),
                    Some('\\') => out.push('\\'),
                    Some('n') => out.push('\n'),
                    Some(c) => {
                        out.push('\\');
                        out.push(c);
                    }
                    None => return self.err("unterminated string"),
                },
                Some(c) => out.push(c),
                None => return self.err("unterminated string"),
            }
        }
    }

    fn number(&mut self) -> Result<f64, ParseError> {
        let start = self.pos;
        if matches!(self.peek(), Some('+' | '-')) {
            self.bump();
        }
        let mut digits = 0;
        while self.peek().is_some_and(|c| c.is_ascii_digit()) {
            self.bump();
            digits += 1;
        }
        if self.peek() == Some('.') {
            self.bump();
            while self.peek().is_some_and(|c| c.is_ascii_digit()) {
                self.bump();
                digits += 1;
            }
        }
        if digits == 0 {
            self.pos = start;
            return self.err("expected number");
        }
        self.src[start..self.pos]
            .parse::<f64>()
            .or_else(|e| self.err(format!("bad number: {e}")))
    }

    /// NUMBER | 'null'
    fn number_or_null(&mut self) -> Result<Option<f64>, ParseError> {
        if self.src[self.pos..].starts_with("null") {
            let after = self.src[self.pos + 4..].chars().next();
            if !after.is_some_and(|c| c.is_ascii_alphanumeric() || c == '_') {
                self.pos += 4;
                return Ok(None);
            }
        }
        self.number().map(Some)
    }

    fn arg(&mut self) -> Result<Arg, ParseError> {
        match self.peek() {
            Some('"') => self.string().map(Arg::Str),
            Some(c) if c.is_ascii_digit() || matches!(c, '+' | '-' | '.') => self.number().map(Arg::Num),
            Some(c) if c.is_ascii_alphabetic() || c == '_' => {
                let start = self.pos;
                let id = self.ident()?;
                if id == "null" {
                    return Ok(Arg::Null);
                }
                let axis = match id {
                    "x" => Axis::X,
                    "y" => Axis::Y,
                    "z" => Axis::Z,
                    other => {
                        self.pos = start;
                        return self.err(format!("unknown argument name {other:?}"));
                    }
                };
                self.skip_ws();
                self.expect('=')?;
                self.skip_ws();
                let value = self.number_or_null()?;
                Ok(Arg::Named(axis, value))
            }
            Some(',') | Some(')') => self.err("empty argument"),
            Some(c) => self.err(format!("unexpected {c:?}")),
            None => self.err("unexpected end of line"),
        }
    }
}

/// Parses one response line.
pub fn parse_line(text: &str) -> Result<Line, ParseError> {
    let trimmed = text.trim();
    if trimmed.is_empty() || trimmed.starts_with('#') || trimmed.starts_with("//") || trimmed.starts_with("```") {
        return Ok(Line::Comment);
    }
    let lead = text.len() - text.trim_start().len();
    let mut c = Cursor { src: text, pos: lead };
    let name = c.ident()?.to_string();
    c.skip_ws();
    c.expect('(')?;
    c.skip_ws();
    let mut args = Vec::new();
    if c.peek() == Some(')') {
        c.bump();
    } else {
        loop {
            c.skip_ws();
            let arg_start = c.pos;
            let arg = c.arg()?;
            let is_named = matches!(arg, Arg::Named(..));
            if !is_named && args.iter().any(|a| matches!(a, Arg::Named(..))) {
                c.pos = arg_start;
                return c.err("positional argument after named argument");
            }
            args.push(arg);
            c.skip_ws();
            match c.bump() {
                Some(',') => continue,
                Some(')') => break,
                Some(other) => {
                    c.pos -= other.len_utf8();
                    return c.err(format!("expected ',' or ')', found {other:?}"));
                }
                None => return c.err("unterminated argument list"),
            }
        }
    }
    c.skip_ws();
    if c.peek() == Some(';') {
        c.bump();
    }
    c.skip_ws();
    if let Some(extra) = c.peek() {
        return c.err(format!("trailing input starting with {extra:?}"));
    }
    Ok(Line::Call(ApiCall {
        name,
        args,
        raw_line: trimmed.to_string(),
    }))
}
