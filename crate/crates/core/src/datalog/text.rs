//! Textual rule syntax, the same shape the compiled listings use:
//!
//! ```text
//! conf_x(1, '', Xs) :- init_conf_x(0), cell(Id), bi_position(Id, Xs, Ys, Xe, Ye).
//! aux_x(AutoGen, V) :- conf_x(3, V), AutoGen=#newID.
//! AutoGen : x(V) :- aux_x(AutoGen, V).
//! filled19:filledCell('anna@w3.org').
//! ```
//!
//! Identifiers starting with an uppercase letter (or `_`) are
//! variables; lowercase identifiers are symbol constants (object ids),
//! quoted strings and integers are literals. `id : pred(args)` is
//! sugar for `pred(id, args...)`. Builtins: `V=#newID`,
//! `V=#append(L, E)`, `V=#emptyList`, and integer comparisons
//! (`==`, `!=`, `<`, `<=`, `>`, `>=`).

use thiserror::Error;

use super::{Atom, Builtin, CmpOp, Program, Rule, Term};
use crate::value::Value;

#[derive(Debug, Error, PartialEq, Eq)]
#[error("line {line}, column {col}: {msg}")]
pub struct TextError {
    pub line: usize,
    pub col: usize,
    pub msg: String,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Int(i64),
    Str(String),
    Hash(String),
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Dot,
    Colon,
    Implies,
    Assign,
    Cmp(CmpOp, bool), // bool: operands flipped (>, >=)
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    col: usize,
}

fn err(line: usize, col: usize, msg: impl Into<String>) -> TextError {
    TextError {
        line,
        col,
        msg: msg.into(),
    }
}

fn lex(input: &str) -> Result<Vec<Spanned>, TextError> {
    let mut toks = Vec::new();
    for (lineno, raw) in input.lines().enumerate() {
        let line = lineno + 1;
        let trimmed = raw.trim_start();
        if trimmed.starts_with('#')
            && !["#newID", "#append", "#emptyList"]
                .iter()
                .any(|kw| trimmed.starts_with(kw))
        {
            continue;
        }
        let chars: Vec<char> = raw.chars().collect();
        let mut i = 0;
        while i < chars.len() {
            let col = i + 1;
            let c = chars[i];
            match c {
                ' ' | '\t' | '\r' => i += 1,
                '(' => {
                    toks.push(Spanned { tok: Tok::LParen, line, col });
                    i += 1;
                }
                ')' => {
                    toks.push(Spanned { tok: Tok::RParen, line, col });
                    i += 1;
                }
                '[' => {
                    toks.push(Spanned { tok: Tok::LBracket, line, col });
                    i += 1;
                }
                ']' => {
                    toks.push(Spanned { tok: Tok::RBracket, line, col });
                    i += 1;
                }
                ',' => {
                    toks.push(Spanned { tok: Tok::Comma, line, col });
                    i += 1;
                }
                '.' => {
                    toks.push(Spanned { tok: Tok::Dot, line, col });
                    i += 1;
                }
                ':' => {
                    if chars.get(i + 1) == Some(&'-') {
                        toks.push(Spanned { tok: Tok::Implies, line, col });
                        i += 2;
                    } else {
                        toks.push(Spanned { tok: Tok::Colon, line, col });
                        i += 1;
                    }
                }
                '=' => {
                    if chars.get(i + 1) == Some(&'=') {
                        toks.push(Spanned { tok: Tok::Cmp(CmpOp::Eq, false), line, col });
                        i += 2;
                    } else {
                        toks.push(Spanned { tok: Tok::Assign, line, col });
                        i += 1;
                    }
                }
                '!' => {
                    if chars.get(i + 1) == Some(&'=') {
                        toks.push(Spanned { tok: Tok::Cmp(CmpOp::Ne, false), line, col });
                        i += 2;
                    } else {
                        return Err(err(line, col, "unexpected `!`"));
                    }
                }
                '<' => {
                    if chars.get(i + 1) == Some(&'=') {
                        toks.push(Spanned { tok: Tok::Cmp(CmpOp::Le, false), line, col });
                        i += 2;
                    } else {
                        toks.push(Spanned { tok: Tok::Cmp(CmpOp::Lt, false), line, col });
                        i += 1;
                    }
                }
                '>' => {
                    if chars.get(i + 1) == Some(&'=') {
                        toks.push(Spanned { tok: Tok::Cmp(CmpOp::Le, true), line, col });
                        i += 2;
                    } else {
                        toks.push(Spanned { tok: Tok::Cmp(CmpOp::Lt, true), line, col });
                        i += 1;
                    }
                }
                '#' => {
                    let mut j = i + 1;
                    while j < chars.len() && (chars[j].is_alphanumeric() || chars[j] == '_') {
                        j += 1;
                    }
                    if j == i + 1 {
                        return Err(err(line, col, "`#` must introduce a builtin name"));
                    }
                    let name: String = chars[i + 1..j].iter().collect();
                    toks.push(Spanned { tok: Tok::Hash(name), line, col });
                    i = j;
                }
                '\'' | '"' => {
                    let quote = c;
                    let mut j = i + 1;
                    let mut s = String::new();
                    loop {
                        match chars.get(j) {
                            None => return Err(err(line, col, "unterminated string")),
                            Some('\\') => {
                                let esc = chars.get(j + 1).copied();
                                match esc {
                                    Some('n') => s.push('\n'),
                                    Some('t') => s.push('\t'),
                                    Some(other) if other == quote || other == '\\' || other == '\'' || other == '"' => {
                                        s.push(other)
                                    }
                                    _ => return Err(err(line, j + 1, "bad escape")),
                                }
                                j += 2;
                            }
                            Some(&ch) if ch == quote => {
                                j += 1;
                                break;
                            }
                            Some(&ch) => {
                                s.push(ch);
                                j += 1;
                            }
                        }
                    }
                    toks.push(Spanned { tok: Tok::Str(s), line, col });
                    i = j;
                }
                c if c.is_ascii_digit() || (c == '-' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) => {
                    let mut j = i + 1;
                    while j < chars.len() && chars[j].is_ascii_digit() {
                        j += 1;
                    }
                    let text: String = chars[i..j].iter().collect();
                    let n = text
                        .parse::<i64>()
                        .map_err(|_| err(line, col, format!("bad integer `{text}`")))?;
                    toks.push(Spanned { tok: Tok::Int(n), line, col });
                    i = j;
                }
                c if c.is_alphanumeric() || c == '_' => {
                    let mut j = i;
                    while j < chars.len() && (chars[j].is_alphanumeric() || chars[j] == '_') {
                        j += 1;
                    }
                    let text: String = chars[i..j].iter().collect();
                    toks.push(Spanned { tok: Tok::Ident(text), line, col });
                    i = j;
                }
                other => return Err(err(line, col, format!("unexpected character `{other}`"))),
            }
        }
    }
    Ok(toks)
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|s| &s.tok)
    }

    fn here(&self) -> (usize, usize) {
        self.toks
            .get(self.pos.min(self.toks.len().saturating_sub(1)))
            .map(|s| (s.line, s.col))
            .unwrap_or((0, 0))
    }

    fn bump(&mut self) -> Option<Spanned> {
        let t = self.toks.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn expect(&mut self, want: &Tok, what: &str) -> Result<(), TextError> {
        let (line, col) = self.here();
        match self.bump() {
            Some(s) if &s.tok == want => Ok(()),
            _ => Err(err(line, col, format!("expected {what}"))),
        }
    }

    fn ident(&mut self, what: &str) -> Result<String, TextError> {
        let (line, col) = self.here();
        match self.bump() {
            Some(Spanned { tok: Tok::Ident(name), .. }) => Ok(name),
            _ => Err(err(line, col, format!("expected {what}"))),
        }
    }

    fn term(&mut self) -> Result<Term, TextError> {
        let (line, col) = self.here();
        match self.bump() {
            Some(Spanned { tok: Tok::Ident(name), .. }) => {
                if is_var_name(&name) {
                    Ok(Term::Var(name))
                } else {
                    Ok(Term::Const(Value::Str(name)))
                }
            }
            Some(Spanned { tok: Tok::Int(n), .. }) => Ok(Term::Const(Value::Int(n))),
            Some(Spanned { tok: Tok::Str(s), .. }) => Ok(Term::Const(Value::Str(s))),
            Some(Spanned { tok: Tok::LBracket, .. }) => {
                let mut items = Vec::new();
                if self.peek() == Some(&Tok::RBracket) {
                    self.bump();
                    return Ok(Term::Const(Value::List(items)));
                }
                loop {
                    let (l, c) = self.here();
                    match self.bump() {
                        Some(Spanned { tok: Tok::Str(s), .. }) => items.push(s),
                        _ => return Err(err(l, c, "expected string in list")),
                    }
                    match self.bump() {
                        Some(Spanned { tok: Tok::Comma, .. }) => continue,
                        Some(Spanned { tok: Tok::RBracket, .. }) => break,
                        _ => return Err(err(l, c, "expected `,` or `]`")),
                    }
                }
                Ok(Term::Const(Value::List(items)))
            }
            _ => Err(err(line, col, "expected term")),
        }
    }

    /// `pred(t, ...)` or `id : pred(t, ...)` (sugar: id becomes the
    /// first argument).
    fn atom(&mut self) -> Result<(Atom, bool), TextError> {
        let first = self.ident("predicate or object id")?;
        let mut typed = false;
        let (pred, mut args) = if self.peek() == Some(&Tok::Colon) {
            self.bump();
            let pred = self.ident("predicate after `:`")?;
            typed = true;
            let id_term = if is_var_name(&first) {
                Term::Var(first)
            } else {
                Term::Const(Value::Str(first))
            };
            (pred, vec![id_term])
        } else {
            (first, Vec::new())
        };
        self.expect(&Tok::LParen, "`(`")?;
        if self.peek() == Some(&Tok::RParen) {
            self.bump();
            return Ok((Atom::new(pred, args), typed));
        }
        loop {
            args.push(self.term()?);
            let (line, col) = self.here();
            match self.bump() {
                Some(Spanned { tok: Tok::Comma, .. }) => continue,
                Some(Spanned { tok: Tok::RParen, .. }) => break,
                _ => return Err(err(line, col, "expected `,` or `)`")),
            }
        }
        Ok((Atom::new(pred, args), typed))
    }

    /// One body conjunct: an atom, a builtin assignment, or a
    /// comparison.
    fn body_item(&mut self, body: &mut Vec<Atom>, builtins: &mut Vec<Builtin>) -> Result<(), TextError> {
        let start = self.pos;
        // Try `Term cmp Term` / `Var = #builtin` first.
        let lhs = self.term();
        if let Ok(lhs) = lhs {
            match self.peek().cloned() {
                Some(Tok::Cmp(op, flipped)) => {
                    self.bump();
                    let rhs = self.term()?;
                    let (lhs, rhs) = if flipped { (rhs, lhs) } else { (lhs, rhs) };
                    builtins.push(Builtin::Cmp { op, lhs, rhs });
                    return Ok(());
                }
                Some(Tok::Assign) => {
                    let (line, col) = self.here();
                    self.bump();
                    let Term::Var(out) = lhs else {
                        return Err(err(line, col, "builtin output must be a variable"));
                    };
                    let (l2, c2) = self.here();
                    match self.bump() {
                        Some(Spanned { tok: Tok::Hash(name), .. }) => match name.as_str() {
                            "newID" => builtins.push(Builtin::NewId { out }),
                            "emptyList" => builtins.push(Builtin::EmptyList { out }),
                            "append" => {
                                self.expect(&Tok::LParen, "`(`")?;
                                let list = self.term()?;
                                self.expect(&Tok::Comma, "`,`")?;
                                let elem = self.term()?;
                                self.expect(&Tok::RParen, "`)`")?;
                                builtins.push(Builtin::Append { out, list, elem });
                            }
                            other => {
                                return Err(err(l2, c2, format!("unknown builtin `#{other}`")))
                            }
                        },
                        _ => return Err(err(l2, c2, "expected builtin after `=`")),
                    }
                    return Ok(());
                }
                _ => {
                    // Not a builtin; reparse as an atom.
                    self.pos = start;
                }
            }
        } else {
            self.pos = start;
        }
        let (atom, _) = self.atom()?;
        body.push(atom);
        Ok(())
    }

    fn statement(&mut self) -> Result<Rule, TextError> {
        let (head, typed) = self.atom()?;
        let mut rule = Rule::new(head, Vec::new());
        rule.typed_head = typed;
        if self.peek() == Some(&Tok::Implies) {
            self.bump();
            loop {
                self.body_item(&mut rule.body, &mut rule.builtins)?;
                match self.peek() {
                    Some(Tok::Comma) => {
                        self.bump();
                    }
                    _ => break,
                }
            }
        }
        self.expect(&Tok::Dot, "`.` at end of statement")?;
        Ok(rule)
    }
}

fn is_var_name(name: &str) -> bool {
    name.starts_with(|c: char| c.is_ascii_uppercase() || c == '_')
}

/// Parses a sequence of rules and facts.
pub fn parse_program(input: &str) -> Result<Program, TextError> {
    let toks = lex(input)?;
    let mut parser = Parser { toks, pos: 0 };
    let mut rules = Vec::new();
    while parser.peek().is_some() {
        rules.push(parser.statement()?);
    }
    Ok(Program::new(rules))
}
