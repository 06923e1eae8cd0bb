//! First-order terms without function symbols: `Pred(arg1, ..., argN)`.
//!
//! Integers are bare, symbols start lowercase, strings are double-quoted and
//! variables start with an uppercase letter or `_`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::error::ParseError;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Arg {
    Int(i64),
    Sym(String),
    Str(String),
    Var(String),
}

impl Arg {
    pub fn sym(s: impl Into<String>) -> Self {
        Arg::Sym(s.into())
    }

    pub fn var(s: impl Into<String>) -> Self {
        Arg::Var(s.into())
    }

    pub fn is_var(&self) -> bool {
        matches!(self, Arg::Var(_))
    }

    pub fn as_int(&self) -> Option<i64> {
        match self {
            Arg::Int(i) => Some(*i),
            _ => None,
        }
    }
}

impl fmt::Display for Arg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Arg::Int(i) => write!(f, "{i}"),
            Arg::Sym(s) | Arg::Var(s) => f.write_str(s),
            Arg::Str(s) => write!(f, "{s:?}"),
        }
    }
}

impl From<i64> for Arg {
    fn from(i: i64) -> Self {
        Arg::Int(i)
    }
}

impl From<&str> for Arg {
    /// Classifies by the textual convention: uppercase or `_` is a variable.
    fn from(s: &str) -> Self {
        if is_var_name(s) {
            Arg::Var(s.to_string())
        } else {
            Arg::Sym(s.to_string())
        }
    }
}

pub(crate) fn is_var_name(s: &str) -> bool {
    s.starts_with(|c: char| c.is_ascii_uppercase() || c == '_')
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Term {
    pub pred: String,
    pub args: Vec<Arg>,
}

/// Variable bindings produced by matching and unification.
pub type Subst = BTreeMap<String, Arg>;

impl Term {
    pub fn new(pred: impl Into<String>, args: Vec<Arg>) -> Self {
        Term {
            pred: pred.into(),
            args,
        }
    }

    pub fn arity(&self) -> usize {
        self.args.len()
    }

    pub fn is_ground(&self) -> bool {
        !self.args.iter().any(Arg::is_var)
    }

    pub fn vars(&self) -> impl Iterator<Item = &str> {
        self.args.iter().filter_map(|a| match a {
            Arg::Var(v) => Some(v.as_str()),
            _ => None,
        })
    }

    /// Applies `subst`, resolving chains of variable-to-variable bindings.
    pub fn apply(&self, subst: &Subst) -> Term {
        Term {
            pred: self.pred.clone(),
            args: self.args.iter().map(|a| resolve(a, subst)).collect(),
        }
    }

    /// Renames variables to `_0`, `_1`, ... in order of first occurrence, so
    /// terms equal up to variable renaming compare equal.
    pub fn canonical(&self) -> Term {
        let mut names: BTreeMap<&str, String> = BTreeMap::new();
        let args = self
            .args
            .iter()
            .map(|a| match a {
                Arg::Var(v) => {
                    let next = names.len();
                    Arg::Var(names.entry(v.as_str()).or_insert_with(|| format!("_{next}")).clone())
                }
                other => other.clone(),
            })
            .collect();
        Term {
            pred: self.pred.clone(),
            args,
        }
    }

    /// Appends `suffix` to every variable name.
    pub fn rename_vars(&self, suffix: &str) -> Term {
        Term {
            pred: self.pred.clone(),
            args: self
                .args
                .iter()
                .map(|a| match a {
                    Arg::Var(v) => Arg::Var(format!("{v}{suffix}")),
                    other => other.clone(),
                })
                .collect(),
        }
    }

    /// One-way matching: variables of `self` bind to the arguments of
    /// `target`, which are treated as constants even if they are variables.
    pub fn match_onto(&self, target: &Term, subst: &mut Subst) -> bool {
        if self.pred != target.pred || self.arity() != target.arity() {
            return false;
        }
        let saved = subst.clone();
        for (p, t) in self.args.iter().zip(&target.args) {
            let ok = match p {
                Arg::Var(v) => match subst.get(v) {
                    Some(bound) => bound == t,
                    None => {
                        subst.insert(v.clone(), t.clone());
                        true
                    }
                },
                constant => constant == t,
            };
            if !ok {
                *subst = saved;
                return false;
            }
        }
        true
    }
}

fn resolve(arg: &Arg, subst: &Subst) -> Arg {
    let mut cur = arg;
    // Bounded by the number of bindings; cycles cannot form through `bind`.
    for _ in 0..=subst.len() {
        match cur {
            Arg::Var(v) => match subst.get(v) {
                Some(next) => cur = next,
                None => return cur.clone(),
            },
            _ => return cur.clone(),
        }
    }
    cur.clone()
}

/// Syntactic unification of two flat terms. Callers rename apart first.
pub fn unify(a: &Term, b: &Term, subst: &mut Subst) -> bool {
    if a.pred != b.pred || a.arity() != b.arity() {
        return false;
    }
    let saved = subst.clone();
    for (x, y) in a.args.iter().zip(&b.args) {
        let x = resolve(x, subst);
        let y = resolve(y, subst);
        let ok = match (&x, &y) {
            (Arg::Var(v), Arg::Var(w)) if v == w => true,
            (Arg::Var(v), other) | (other, Arg::Var(v)) => {
                subst.insert(v.clone(), other.clone());
                true
            }
            (l, r) => l == r,
        };
        if !ok {
            *subst = saved;
            return false;
        }
    }
    true
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.pred)?;
        for (i, a) in self.args.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{a}")?;
        }
        f.write_str(")")
    }
}

impl FromStr for Term {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut lx = Lexer::new(s);
        let t = lx.term()?;
        lx.skip_ws();
        if !lx.at_end() {
            return Err(lx.error("trailing input after term"));
        }
        Ok(t)
    }
}

/// Small hand-rolled cursor shared by the text formats in this crate.
#[derive(Debug, Clone)]
pub(crate) struct Lexer<'a> {
    src: &'a str,
    pos: usize,
    line: usize,
    col: usize,
}

impl<'a> Lexer<'a> {
    pub(crate) fn new(src: &'a str) -> Self {
        Lexer {
            src,
            pos: 0,
            line: 1,
            col: 1,
        }
    }

    pub(crate) fn error(&self, msg: impl Into<String>) -> ParseError {
        ParseError::new(self.line, self.col, msg)
    }

    pub(crate) fn at_end(&self) -> bool {
        self.pos >= self.src.len()
    }

    pub(crate) fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    pub(crate) fn peek(&self) -> Option<char> {
        self.rest().chars().next()
    }

    pub(crate) fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    pub(crate) fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(c) if c.is_whitespace()) {
            self.bump();
        }
    }

    /// Skips whitespace, then consumes `tok` if it is next.
    pub(crate) fn eat(&mut self, tok: &str) -> bool {
        self.skip_ws();
        if self.rest().starts_with(tok) {
            for _ in tok.chars() {
                self.bump();
            }
            true
        } else {
            false
        }
    }

    pub(crate) fn expect(&mut self, tok: &str) -> Result<(), ParseError> {
        if self.eat(tok) {
            Ok(())
        } else {
            let found = self.peek().map_or("end of input".to_string(), |c| format!("'{c}'"));
            Err(self.error(format!("expected '{tok}', found {found}")))
        }
    }

    /// Identifier made of alphanumerics and `_ . * ' -`. A `-` is only taken
    /// when followed by another identifier character, so `a - b` splits.
    pub(crate) fn ident(&mut self) -> Result<String, ParseError> {
        self.skip_ws();
        let start = self.pos;
        while let Some(c) = self.peek() {
            let next_is_word = self.src[self.pos + c.len_utf8()..]
                .chars()
                .next()
                .is_some_and(|n| n.is_alphanumeric() || n == '_');
            let ok = c.is_alphanumeric() || matches!(c, '_' | '*' | '\'');
            // `.` and `-` only continue a name, so `P.` ends a clause, `a - b`
            // splits and `..` stays the open-arity marker.
            let joiner = matches!(c, '.' | '-') && self.pos > start && next_is_word;
            if !(ok || joiner) {
                break;
            }
            self.bump();
        }
        if self.pos == start {
            let found = self.peek().map_or("end of input".to_string(), |c| format!("'{c}'"));
            return Err(self.error(format!("expected identifier, found {found}")));
        }
        Ok(self.src[start..self.pos].to_string())
    }

    pub(crate) fn int(&mut self) -> Result<i64, ParseError> {
        self.skip_ws();
        let start = self.pos;
        if self.peek() == Some('-') {
            self.bump();
        }
        while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
            self.bump();
        }
        self.src[start..self.pos]
            .parse()
            .map_err(|_| self.error("invalid integer"))
    }

    pub(crate) fn arg(&mut self) -> Result<Arg, ParseError> {
        self.skip_ws();
        match self.peek() {
            Some(c) if c.is_ascii_digit() || c == '-' => Ok(Arg::Int(self.int()?)),
            Some('"') => {
                self.bump();
                let mut s = String::new();
                loop {
                    match self.bump() {
                        Some('"') => break,
                        Some('\\') => match self.bump() {
                            Some(c) => s.push(c),
                            None => return Err(self.error("unterminated string")),
                        },
                        Some(c) => s.push(c),
                        None => return Err(self.error("unterminated string")),
                    }
                }
                Ok(Arg::Str(s))
            }
            _ => Ok(Arg::from(self.ident()?.as_str())),
        }
    }

    pub(crate) fn term(&mut self) -> Result<Term, ParseError> {
        let pred = self.ident()?;
        if is_var_name(&pred) && pred.starts_with('_') {
            return Err(self.error("predicate name cannot start with '_'"));
        }
        let mut args = Vec::new();
        if self.eat("(") && !self.eat(")") {
            loop {
                args.push(self.arg()?);
                if self.eat(")") {
                    break;
                }
                self.expect(",")?;
            }
        }
        Ok(Term { pred, args })
    }
}
