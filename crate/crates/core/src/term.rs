//! Symbolic terms and the s-expression reader.
//!
//! Everything in the engine is named by a [`Term`]: variable patterns such as
//! `(Draw ?n)`, instances such as `(draw 1)` and value propositions such as
//! `((draw 1) white)`. Symbols compare case-insensitively, so `(Draw 1)` and
//! `(draw 1)` name the same instance while each keeps the spelling it was
//! written with.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use thiserror::Error;

/// A case-insensitive symbol that remembers its original spelling.
#[derive(Clone)]
pub struct Symbol(Arc<str>);

impl Symbol {
    pub fn new(text: &str) -> Self {
        Symbol(Arc::from(text))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    fn folded(&self) -> impl Iterator<Item = u8> + '_ {
        self.0.bytes().map(|b| b.to_ascii_lowercase())
    }
}

impl PartialEq for Symbol {
    fn eq(&self, other: &Self) -> bool {
        self.0.eq_ignore_ascii_case(&other.0)
    }
}

impl Eq for Symbol {}

impl Hash for Symbol {
    fn hash<H: Hasher>(&self, state: &mut H) {
        for b in self.folded() {
            state.write_u8(b);
        }
        state.write_u8(0xff);
    }
}

impl Ord for Symbol {
    fn cmp(&self, other: &Self) -> Ordering {
        self.folded().cmp(other.folded())
    }
}

impl PartialOrd for Symbol {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for Symbol {
    fn from(s: &str) -> Self {
        Symbol::new(s)
    }
}

/// A finite real literal. Equality and hashing are bitwise (with `-0.0`
/// folded onto `0.0`) so numbers can appear inside hashed terms.
#[derive(Clone, Copy)]
pub struct Number(f64);

impl Number {
    pub fn new(value: f64) -> Option<Self> {
        value.is_finite().then_some(Number(if value == 0.0 { 0.0 } else { value }))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl PartialEq for Number {
    fn eq(&self, other: &Self) -> bool {
        self.0.to_bits() == other.0.to_bits()
    }
}

impl Eq for Number {}

impl Hash for Number {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.0.to_bits().hash(state)
    }
}

impl Ord for Number {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

impl PartialOrd for Number {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for Number {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for Number {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Sym(Symbol),
    /// A logical variable, written `?name`. Only legal inside patterns.
    Var(Symbol),
    Num(Number),
    List(Vec<Term>),
}

/// Variable bindings produced by [`Term::match_ground`].
pub type Bindings = BTreeMap<Symbol, Term>;

impl Term {
    pub fn sym(text: &str) -> Term {
        Term::Sym(Symbol::new(text))
    }

    pub fn num(value: f64) -> Term {
        Term::Num(Number::new(value).expect("finite literal"))
    }

    pub fn list(items: Vec<Term>) -> Term {
        Term::List(items)
    }

    /// Parses exactly one term from `text`.
    pub fn parse(text: &str) -> Result<Term, ParseError> {
        let forms = read_forms(text)?;
        match forms.len() {
            1 => Ok(forms.into_iter().next().unwrap().term),
            0 => Err(ParseError::new("expected a term, found nothing", 1, 1)),
            _ => Err(ParseError::new("expected a single term", forms[1].line, forms[1].column)),
        }
    }

    pub fn is_ground(&self) -> bool {
        match self {
            Term::Var(_) => false,
            Term::List(items) => items.iter().all(Term::is_ground),
            _ => true,
        }
    }

    pub fn as_symbol(&self) -> Option<&Symbol> {
        match self {
            Term::Sym(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_number(&self) -> Option<f64> {
        match self {
            Term::Num(n) => Some(n.value()),
            _ => None,
        }
    }

    pub fn as_list(&self) -> Option<&[Term]> {
        match self {
            Term::List(items) => Some(items),
            _ => None,
        }
    }

    /// The leading symbol of a list form, if any.
    pub fn head(&self) -> Option<&Symbol> {
        self.as_list()?.first()?.as_symbol()
    }

    /// Logical variables in order of first appearance.
    pub fn variables(&self) -> Vec<Symbol> {
        fn walk(t: &Term, out: &mut Vec<Symbol>) {
            match t {
                Term::Var(v) if !out.contains(v) => out.push(v.clone()),
                Term::List(items) => items.iter().for_each(|i| walk(i, out)),
                _ => {}
            }
        }
        let mut out = Vec::new();
        walk(self, &mut out);
        out
    }

    /// All variable occurrences, repeats included.
    fn variable_occurrences(&self) -> usize {
        match self {
            Term::Var(_) => 1,
            Term::List(items) => items.iter().map(Term::variable_occurrences).sum(),
            _ => 0,
        }
    }

    /// True when every logical variable occurs exactly once.
    pub fn has_distinct_variables(&self) -> bool {
        self.variables().len() == self.variable_occurrences()
    }

    /// One-way matching of this pattern against a ground term, extending
    /// `bindings`. Returns false (leaving partial bindings) on mismatch.
    pub fn match_ground(&self, ground: &Term, bindings: &mut Bindings) -> bool {
        match (self, ground) {
            (Term::Var(v), g) => match bindings.get(v) {
                Some(bound) => bound == g,
                None => {
                    bindings.insert(v.clone(), g.clone());
                    true
                }
            },
            (Term::List(ps), Term::List(gs)) => {
                ps.len() == gs.len() && ps.iter().zip(gs).all(|(p, g)| p.match_ground(g, bindings))
            }
            (p, g) => p == g,
        }
    }

    /// Replaces bound variables; unbound ones are left in place.
    pub fn substitute(&self, bindings: &Bindings) -> Term {
        match self {
            Term::Var(v) => bindings.get(v).cloned().unwrap_or_else(|| self.clone()),
            Term::List(items) => Term::List(items.iter().map(|i| i.substitute(bindings)).collect()),
            _ => self.clone(),
        }
    }

    /// Structural equality up to a consistent renaming of variables.
    pub fn alpha_eq(&self, other: &Term) -> bool {
        fn walk(a: &Term, b: &Term, map: &mut Vec<(Symbol, Symbol)>) -> bool {
            match (a, b) {
                (Term::Var(x), Term::Var(y)) => match map.iter().find(|(l, r)| l == x || r == y) {
                    Some((l, r)) => l == x && r == y,
                    None => {
                        map.push((x.clone(), y.clone()));
                        true
                    }
                },
                (Term::List(xs), Term::List(ys)) => {
                    xs.len() == ys.len() && xs.iter().zip(ys).all(|(x, y)| walk(x, y, map))
                }
                (x, y) => x == y,
            }
        }
        walk(self, other, &mut Vec::new())
    }

    /// A compact identifier-ish rendering: `(source (radio 1))` becomes
    /// `source-radio-1`. Used to build assumption display names.
    pub fn flat_key(&self) -> String {
        match self {
            Term::Sym(s) => s.to_string(),
            Term::Var(v) => format!("?{v}"),
            Term::Num(n) => n.to_string(),
            Term::List(items) => items.iter().map(Term::flat_key).collect::<Vec<_>>().join("-"),
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Sym(s) => write!(f, "{s}"),
            Term::Var(v) => write!(f, "?{v}"),
            Term::Num(n) => write!(f, "{n}"),
            Term::List(items) => {
                f.write_str("(")?;
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" ")?;
                    }
                    write!(f, "{item}")?;
                }
                f.write_str(")")
            }
        }
    }
}

impl fmt::Debug for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{line}:{column}: {message}")]
pub struct ParseError {
    pub message: String,
    pub line: usize,
    pub column: usize,
}

impl ParseError {
    pub fn new(message: impl Into<String>, line: usize, column: usize) -> Self {
        ParseError { message: message.into(), line, column }
    }
}

/// A top-level form together with the exact source text it was read from.
#[derive(Debug, Clone, PartialEq)]
pub struct Form {
    pub term: Term,
    pub text: String,
    pub line: usize,
    pub column: usize,
}

struct Reader<'a> {
    src: &'a str,
    pos: usize,
    line: usize,
    column: usize,
}

impl<'a> Reader<'a> {
    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        if c == '\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
        Some(c)
    }

    fn skip_blank(&mut self) {
        while let Some(c) = self.peek() {
            if c == ';' {
                while let Some(c) = self.peek() {
                    if c == '\n' {
                        break;
                    }
                    self.bump();
                }
            } else if c.is_whitespace() {
                self.bump();
            } else {
                break;
            }
        }
    }

    fn error(&self, message: impl Into<String>) -> ParseError {
        ParseError::new(message, self.line, self.column)
    }

    fn read_term(&mut self) -> Result<Term, ParseError> {
        self.skip_blank();
        match self.peek() {
            None => Err(self.error("unexpected end of input")),
            Some(')') => Err(self.error("unexpected ')'")),
            Some('(') => {
                let (line, column) = (self.line, self.column);
                self.bump();
                let mut items = Vec::new();
                loop {
                    self.skip_blank();
                    match self.peek() {
                        None => {
                            return Err(ParseError::new("unclosed '('", line, column));
                        }
                        Some(')') => {
                            self.bump();
                            return Ok(Term::List(items));
                        }
                        Some(_) => items.push(self.read_term()?),
                    }
                }
            }
            Some(_) => {
                let start = self.pos;
                let (line, column) = (self.line, self.column);
                while let Some(c) = self.peek() {
                    if c.is_whitespace() || c == '(' || c == ')' || c == ';' {
                        break;
                    }
                    self.bump();
                }
                atom(&self.src[start..self.pos])
                    .ok_or_else(|| ParseError::new("empty logical variable name", line, column))
            }
        }
    }
}

fn atom(token: &str) -> Option<Term> {
    if let Some(name) = token.strip_prefix('?') {
        return (!name.is_empty()).then(|| Term::Var(Symbol::new(name)));
    }
    if looks_numeric(token) {
        if let Some(n) = token.parse::<f64>().ok().and_then(Number::new) {
            return Some(Term::Num(n));
        }
    }
    Some(Term::Sym(Symbol::new(token)))
}

fn looks_numeric(token: &str) -> bool {
    let body = token.strip_prefix(['+', '-']).unwrap_or(token);
    let body = body.strip_prefix('.').unwrap_or(body);
    body.starts_with(|c: char| c.is_ascii_digit())
}

/// Reads every top-level form in `src`. Comments run from `;` to end of
/// line. A bare `>` before a form is a transcript prompt and is skipped.
pub fn read_forms(src: &str) -> Result<Vec<Form>, ParseError> {
    let mut reader = Reader { src, pos: 0, line: 1, column: 1 };
    let mut forms = Vec::new();
    loop {
        reader.skip_blank();
        if reader.peek() == Some('>') {
            reader.bump();
            continue;
        }
        if reader.peek().is_none() {
            return Ok(forms);
        }
        let (start, line, column) = (reader.pos, reader.line, reader.column);
        let term = reader.read_term()?;
        forms.push(Form { term, text: src[start..reader.pos].to_string(), line, column });
    }
}
