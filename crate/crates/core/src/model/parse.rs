//! Concrete syntax for expressions, actions, triggers and annotations.

use std::fmt;

use super::expr::{BinOp, Expr};
use super::{Action, Annotation, GuardedAction, Trigger};

/// Words that cannot be used as variable, event or resource names.
pub const RESERVED: &[&str] = &["true", "false", "raise", "imply", "entry", "exit", "every", "tick"];

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParseError {
    /// 1-based character column inside the parsed string.
    pub column: usize,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "column {}: {}", self.column, self.message)
    }
}

impl std::error::Error for ParseError {}

fn err<T>(column: usize, message: impl Into<String>) -> Result<T, ParseError> {
    Err(ParseError {
        column,
        message: message.into(),
    })
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Int(u64),
    Ident(String),
    LParen,
    RParen,
    Bang,
    Minus,
    Plus,
    Star,
    Lt,
    Le,
    Gt,
    Ge,
    EqEq,
    Ne,
    AndAnd,
    OrOr,
    Assign,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Int(i) => write!(f, "{i}"),
            Tok::Ident(s) => write!(f, "{s}"),
            Tok::LParen => f.write_str("("),
            Tok::RParen => f.write_str(")"),
            Tok::Bang => f.write_str("!"),
            Tok::Minus => f.write_str("-"),
            Tok::Plus => f.write_str("+"),
            Tok::Star => f.write_str("*"),
            Tok::Lt => f.write_str("<"),
            Tok::Le => f.write_str("<="),
            Tok::Gt => f.write_str(">"),
            Tok::Ge => f.write_str(">="),
            Tok::EqEq => f.write_str("=="),
            Tok::Ne => f.write_str("!="),
            Tok::AndAnd => f.write_str("&&"),
            Tok::OrOr => f.write_str("||"),
            Tok::Assign => f.write_str("="),
        }
    }
}

pub(crate) fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

pub(crate) fn is_ident_continue(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

/// True for names such as `curT` or `RES.CT_machine`.
pub fn is_identifier(s: &str) -> bool {
    !s.is_empty()
        && s.split('.').all(|seg| {
            let mut chars = seg.chars();
            chars.next().is_some_and(is_ident_start) && chars.all(is_ident_continue)
        })
}

/// A single identifier segment, no dots.
pub fn is_simple_identifier(s: &str) -> bool {
    is_identifier(s) && !s.contains('.')
}

fn lex(src: &str, offset: usize) -> Result<Vec<(Tok, usize)>, ParseError> {
    let chars: Vec<char> = src.chars().collect();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let col = offset + i + 1;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            let text: String = chars[start..i].iter().collect();
            let value = text.parse::<u64>().map_err(|_| ParseError {
                column: col,
                message: format!("integer literal `{text}` out of range"),
            })?;
            if i < chars.len() && is_ident_start(chars[i]) {
                return err(col, "identifier cannot start with a digit");
            }
            toks.push((Tok::Int(value), col));
            continue;
        }
        if is_ident_start(c) {
            let start = i;
            loop {
                while i < chars.len() && is_ident_continue(chars[i]) {
                    i += 1;
                }
                if i + 1 < chars.len() && chars[i] == '.' && is_ident_start(chars[i + 1]) {
                    i += 1;
                    continue;
                }
                break;
            }
            toks.push((Tok::Ident(chars[start..i].iter().collect()), col));
            continue;
        }
        let next = chars.get(i + 1).copied();
        let (tok, width) = match (c, next) {
            ('<', Some('=')) => (Tok::Le, 2),
            ('>', Some('=')) => (Tok::Ge, 2),
            ('=', Some('=')) => (Tok::EqEq, 2),
            ('!', Some('=')) => (Tok::Ne, 2),
            ('&', Some('&')) => (Tok::AndAnd, 2),
            ('|', Some('|')) => (Tok::OrOr, 2),
            ('<', _) => (Tok::Lt, 1),
            ('>', _) => (Tok::Gt, 1),
            ('=', _) => (Tok::Assign, 1),
            ('!', _) => (Tok::Bang, 1),
            ('(', _) => (Tok::LParen, 1),
            (')', _) => (Tok::RParen, 1),
            ('-', _) => (Tok::Minus, 1),
            ('+', _) => (Tok::Plus, 1),
            ('*', _) => (Tok::Star, 1),
            _ => return err(col, format!("unexpected character `{c}`")),
        };
        toks.push((tok, col));
        i += width;
    }
    Ok(toks)
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    end_col: usize,
}

impl Parser {
    fn new(src: &str, offset: usize) -> Result<Self, ParseError> {
        Ok(Parser {
            toks: lex(src, offset)?,
            pos: 0,
            end_col: offset + src.chars().count() + 1,
        })
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn col(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end_col, |(_, c)| *c)
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|(t, _)| t.clone());
        self.pos += 1;
        t
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == Some(tok) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_end(&self) -> Result<(), ParseError> {
        match self.peek() {
            None => Ok(()),
            Some(t) => err(self.col(), format!("unexpected `{t}`")),
        }
    }

    fn or_expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.and_expr()?;
        while self.eat(&Tok::OrOr) {
            let rhs = self.and_expr()?;
            lhs = Expr::binary(BinOp::Or, lhs, rhs);
        }
        Ok(lhs)
    }

    fn and_expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.cmp_expr()?;
        while self.eat(&Tok::AndAnd) {
            let rhs = self.cmp_expr()?;
            lhs = Expr::binary(BinOp::And, lhs, rhs);
        }
        Ok(lhs)
    }

    fn cmp_op(&self) -> Option<BinOp> {
        Some(match self.peek()? {
            Tok::Lt => BinOp::Lt,
            Tok::Le => BinOp::Le,
            Tok::Gt => BinOp::Gt,
            Tok::Ge => BinOp::Ge,
            Tok::EqEq => BinOp::Eq,
            Tok::Ne => BinOp::Ne,
            _ => return None,
        })
    }

    fn cmp_expr(&mut self) -> Result<Expr, ParseError> {
        let lhs = self.add_expr()?;
        let Some(op) = self.cmp_op() else {
            return Ok(lhs);
        };
        self.pos += 1;
        let rhs = self.add_expr()?;
        if self.cmp_op().is_some() {
            return err(self.col(), "comparisons do not chain; add parentheses");
        }
        Ok(Expr::binary(op, lhs, rhs))
    }

    fn add_expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.mul_expr()?;
        loop {
            let op = match self.peek() {
                Some(Tok::Plus) => BinOp::Add,
                Some(Tok::Minus) => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.mul_expr()?;
            lhs = Expr::binary(op, lhs, rhs);
        }
    }

    fn mul_expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        while self.eat(&Tok::Star) {
            let rhs = self.unary()?;
            lhs = Expr::binary(BinOp::Mul, lhs, rhs);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        let col = self.col();
        match self.peek() {
            Some(Tok::Bang) => {
                self.pos += 1;
                Ok(Expr::Not(Box::new(self.unary()?)))
            }
            Some(Tok::Minus) => {
                self.pos += 1;
                if let Some(Tok::Int(n)) = self.peek().cloned() {
                    self.pos += 1;
                    return match 0i64.checked_sub_unsigned(n) {
                        Some(v) => Ok(Expr::Int(v)),
                        None => err(col, format!("integer literal `-{n}` out of range")),
                    };
                }
                Ok(Expr::Neg(Box::new(self.unary()?)))
            }
            _ => self.primary(),
        }
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let col = self.col();
        match self.bump() {
            Some(Tok::Int(n)) => match i64::try_from(n) {
                Ok(v) => Ok(Expr::Int(v)),
                Err(_) => err(col, format!("integer literal `{n}` out of range")),
            },
            Some(Tok::Ident(name)) => match name.as_str() {
                "true" => Ok(Expr::Bool(true)),
                "false" => Ok(Expr::Bool(false)),
                word if RESERVED.contains(&word) => err(col, format!("reserved word `{word}` used as a variable")),
                _ => Ok(Expr::Var(name)),
            },
            Some(Tok::LParen) => {
                let inner = self.or_expr()?;
                if !self.eat(&Tok::RParen) {
                    return err(self.col(), "expected `)`");
                }
                Ok(inner)
            }
            Some(t) => err(col, format!("unexpected `{t}`")),
            None => err(col, "unexpected end of expression"),
        }
    }
}

fn parse_expr_at(src: &str, offset: usize) -> Result<Expr, ParseError> {
    let mut p = Parser::new(src, offset)?;
    if p.peek().is_none() {
        return err(offset + 1, "empty expression");
    }
    let e = p.or_expr()?;
    p.expect_end()?;
    Ok(e)
}

pub fn parse_expr(src: &str) -> Result<Expr, ParseError> {
    parse_expr_at(src, 0)
}

fn parse_action_at(src: &str, offset: usize) -> Result<Action, ParseError> {
    let mut p = Parser::new(src, offset)?;
    let col = p.col();
    match p.bump() {
        Some(Tok::Ident(word)) if word == "raise" => {
            let col = p.col();
            match p.bump() {
                Some(Tok::Ident(event)) if is_simple_identifier(&event) && !RESERVED.contains(&event.as_str()) => {
                    p.expect_end()?;
                    Ok(Action::Raise(event))
                }
                _ => err(col, "expected an event name after `raise`"),
            }
        }
        Some(Tok::Ident(target)) => {
            if RESERVED.contains(&target.as_str()) {
                return err(col, format!("reserved word `{target}` used as a variable"));
            }
            if !p.eat(&Tok::Assign) {
                return err(p.col(), "expected `=` after assignment target");
            }
            let value = p.or_expr()?;
            p.expect_end()?;
            Ok(Action::Assign { target, value })
        }
        _ => err(col, "expected `raise <event>` or `<var> = <expr>`"),
    }
}

/// Parse `raise Event` or `var = expr`.
pub fn parse_action(src: &str) -> Result<Action, ParseError> {
    parse_action_at(src, 0)
}

/// Parse `entry[guard]/ action` (or `exit...`); the bracketed guard is optional.
pub fn parse_guarded_action(src: &str, keyword: &str) -> Result<GuardedAction, ParseError> {
    let lead = src.len() - src.trim_start().len();
    let rest = &src[lead..];
    let Some(after_kw) = rest.strip_prefix(keyword) else {
        return err(lead + 1, format!("expected `{keyword}`"));
    };
    let mut pos = lead + keyword.len();
    let mut body = after_kw;
    let guard = if let Some(inner) = body.strip_prefix('[') {
        let Some(close) = inner.find(']') else {
            return err(pos + 1, "unterminated `[` guard");
        };
        let guard = parse_expr_at(&inner[..close], pos + 1)?;
        pos += close + 2;
        body = &inner[close + 1..];
        Some(guard)
    } else {
        None
    };
    let trimmed = body.trim_start();
    pos += body.len() - trimmed.len();
    let Some(action_src) = trimmed.strip_prefix('/') else {
        return err(pos + 1, "expected `/` before the action");
    };
    let action = parse_action_at(action_src, pos + 1)?;
    Ok(GuardedAction { guard, action })
}

/// Parse `//@RES: r1, r2`.
pub fn parse_annotation(src: &str) -> Result<Annotation, ParseError> {
    const PREFIX: &str = "//@RES:";
    let trimmed = src.trim();
    let Some(list) = trimmed.strip_prefix(PREFIX) else {
        return err(1, format!("annotation must start with `{PREFIX}`"));
    };
    let mut resources = Vec::new();
    let mut col = src.len() - src.trim_start().len() + PREFIX.len() + 1;
    for item in list.split(',') {
        let name = item.trim();
        if !is_resource_name(name) {
            let hint = if name.contains(' ') {
                " (use underscores instead of spaces)"
            } else {
                ""
            };
            return err(col, format!("invalid resource name `{name}`{hint}"));
        }
        resources.push(name.to_string());
        col += item.len() + 1;
    }
    Ok(Annotation { resources })
}

/// Resource names are single identifier segments without spaces.
pub fn is_resource_name(s: &str) -> bool {
    is_simple_identifier(s) && !RESERVED.contains(&s)
}

/// Parse a transition trigger: `every 60s`, `tick`, or an event name.
pub fn parse_trigger(src: &str) -> Result<Trigger, ParseError> {
    let s = src.trim();
    if s == "tick" {
        return Ok(Trigger::Tick { seconds: 60 });
    }
    if let Some(rest) = s.strip_prefix("every") {
        let amount = rest.trim();
        let digits = amount.strip_suffix('s').unwrap_or(amount).trim();
        return match digits.parse::<u32>() {
            Ok(seconds) if seconds > 0 => Ok(Trigger::Tick { seconds }),
            _ => err(1, format!("invalid tick period `{amount}`")),
        };
    }
    if is_simple_identifier(s) && !RESERVED.contains(&s) {
        Ok(Trigger::Event(s.to_string()))
    } else {
        err(1, format!("invalid trigger `{s}`"))
    }
}
