//! The `.lctrs` problem format: a line-oriented text file declaring the
//! theory, the signature, the rules and the constrained-term queries.
//!
//! ```text
//! # summation
//! theory intmod 16
//! sig sum : Int -> Int term
//! rule r1: sum(x) -> 0 [0 >= x] vars {x}
//! rule r2: sum(x) -> x + sum(x + -1) [0 < x] vars {x}
//! ect start: X {x} term sum(x) exists [] phi 1 <= x /\ x <= 5
//! ```
//!
//! Constraints use infix `+ - *`, comparisons, `/\ \/ => <=> not`, and
//! parentheses. Variable sorts are inferred from their positions.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use lctrs_core::logic::{ExConstraint, TheoryMode, TheoryModel};
use lctrs_core::rules::{ConstrainedRule, Lctrs, RuleViolation};
use lctrs_core::signature::{builtin_theory_symbols, Signature};
use lctrs_core::term::{FunSym, Kind, Sort, Term, Value, Var};
use lctrs_core::ect::{ECTerm, WellFormedViolation};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FileError {
    #[error("{line}:{col}: expected {expected}")]
    Parse { line: usize, col: usize, expected: String },
    #[error("{line}: rule {id}: {violation}")]
    InvalidRule { line: usize, id: String, violation: RuleViolation },
    #[error("{line}: constrained term {id}: {violation}")]
    InvalidEct { line: usize, id: String, violation: WellFormedViolation },
    #[error("{line}: {msg}")]
    Decl { line: usize, msg: String },
}

fn parse_err(line: usize, col: usize, expected: impl Into<String>) -> FileError {
    FileError::Parse { line, col, expected: expected.into() }
}

/// A parsed and validated problem.
#[derive(Debug, Clone)]
pub struct ProblemFile {
    pub theory: TheoryMode,
    pub sig: Signature,
    /// The rewrite system, with calculation rules appended when enabled.
    pub system: Lctrs,
    pub user_rule_ids: Vec<String>,
    pub ects: Vec<(String, ECTerm)>,
    pub includes_calc: bool,
}

impl ProblemFile {
    pub fn ect(&self, id: &str) -> Option<&ECTerm> {
        self.ects.iter().find(|(name, _)| name == id).map(|(_, c)| c)
    }

    pub fn model(&self) -> TheoryModel {
        TheoryModel { mode: self.theory }
    }

    pub fn user_rules(&self) -> impl Iterator<Item = &ConstrainedRule> {
        self.system
            .rules
            .iter()
            .filter(|r| self.user_rule_ids.contains(&r.id))
    }

    /// Renders the problem back to text; parsing the result yields the
    /// same problem (round trip up to whitespace).
    pub fn render(&self) -> String {
        let mut out = String::new();
        match self.theory {
            TheoryMode::IntMod(m) => out.push_str(&format!("theory intmod {m}\n")),
            TheoryMode::Int => out.push_str("theory int\n"),
        }
        if !self.includes_calc {
            out.push_str("calc off\n");
        }
        let mut term_syms: Vec<&FunSym> = self.sig.term_symbols().collect();
        term_syms.sort();
        for f in term_syms {
            let args: Vec<String> = f.arg_sorts().iter().map(|s| s.name.clone()).collect();
            out.push_str(&format!(
                "sig {} : {} -> {} term\n",
                f.name(),
                args.join(" * "),
                f.result_sort().name
            ));
        }
        for rule in self.user_rules() {
            let vars: Vec<String> = rule.theory_vars.iter().map(|v| v.name.clone()).collect();
            out.push_str(&format!(
                "rule {}: {} -> {} [{}] vars {{{}}}\n",
                rule.id,
                rule.lhs,
                rule.rhs,
                rule.guard,
                vars.join(", ")
            ));
        }
        for (id, c) in &self.ects {
            let xs: Vec<String> = c.logical_vars.iter().map(|v| v.name.clone()).collect();
            let binders: Vec<String> = c.constraint.binders.iter().map(|v| v.name.clone()).collect();
            out.push_str(&format!(
                "ect {}: X {{{}}} term {} exists [{}] phi {}\n",
                id,
                xs.join(", "),
                c.term,
                binders.join(", "),
                c.constraint.body
            ));
        }
        out
    }
}

// ------------------------------------------------------------------
// Tokens

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Int(i64),
    Op(&'static str),
    LParen,
    RParen,
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    Comma,
    Colon,
    Arrow,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "{s}"),
            Tok::Int(n) => write!(f, "{n}"),
            Tok::Op(s) => write!(f, "{s}"),
            Tok::LParen => f.write_str("("),
            Tok::RParen => f.write_str(")"),
            Tok::LBrace => f.write_str("{"),
            Tok::RBrace => f.write_str("}"),
            Tok::LBracket => f.write_str("["),
            Tok::RBracket => f.write_str("]"),
            Tok::Comma => f.write_str(","),
            Tok::Colon => f.write_str(":"),
            Tok::Arrow => f.write_str("->"),
        }
    }
}

fn tokenize(line: &str, lineno: usize) -> Result<Vec<(Tok, usize)>, FileError> {
    let mut out: Vec<(Tok, usize)> = Vec::new();
    let bytes: Vec<char> = line.chars().collect();
    let mut i = 0usize;
    while i < bytes.len() {
        let c = bytes[i];
        let col = i + 1;
        match c {
            '#' => break,
            c if c.is_whitespace() => {
                i += 1;
            }
            '(' => {
                out.push((Tok::LParen, col));
                i += 1;
            }
            ')' => {
                out.push((Tok::RParen, col));
                i += 1;
            }
            '{' => {
                out.push((Tok::LBrace, col));
                i += 1;
            }
            '}' => {
                out.push((Tok::RBrace, col));
                i += 1;
            }
            '[' => {
                out.push((Tok::LBracket, col));
                i += 1;
            }
            ']' => {
                out.push((Tok::RBracket, col));
                i += 1;
            }
            ',' => {
                out.push((Tok::Comma, col));
                i += 1;
            }
            ':' => {
                out.push((Tok::Colon, col));
                i += 1;
            }
            '+' => {
                out.push((Tok::Op("+"), col));
                i += 1;
            }
            '*' => {
                out.push((Tok::Op("*"), col));
                i += 1;
            }
            '-' => {
                if i + 1 < bytes.len() && bytes[i + 1] == '>' {
                    out.push((Tok::Arrow, col));
                    i += 2;
                } else {
                    // A negative literal when a term cannot end here.
                    let prev_ends_term = matches!(
                        out.last(),
                        Some((Tok::Ident(_), _)) | Some((Tok::Int(_), _)) | Some((Tok::RParen, _))
                    );
                    if !prev_ends_term && i + 1 < bytes.len() && bytes[i + 1].is_ascii_digit() {
                        let start = i;
                        i += 1;
                        while i < bytes.len() && bytes[i].is_ascii_digit() {
                            i += 1;
                        }
                        let text: String = bytes[start..i].iter().collect();
                        let n: i64 = text.parse().map_err(|_| {
                            parse_err(lineno, col, "an integer literal")
                        })?;
                        out.push((Tok::Int(n), col));
                    } else {
                        out.push((Tok::Op("-"), col));
                        i += 1;
                    }
                }
            }
            '/' => {
                if i + 1 < bytes.len() && bytes[i + 1] == '\\' {
                    out.push((Tok::Op("/\\"), col));
                    i += 2;
                } else {
                    return Err(parse_err(lineno, col, "/\\"));
                }
            }
            '\\' => {
                if i + 1 < bytes.len() && bytes[i + 1] == '/' {
                    out.push((Tok::Op("\\/"), col));
                    i += 2;
                } else {
                    return Err(parse_err(lineno, col, "\\/"));
                }
            }
            '<' => {
                if i + 2 < bytes.len() && bytes[i + 1] == '=' && bytes[i + 2] == '>' {
                    out.push((Tok::Op("<=>"), col));
                    i += 3;
                } else if i + 1 < bytes.len() && bytes[i + 1] == '=' {
                    out.push((Tok::Op("<="), col));
                    i += 2;
                } else {
                    out.push((Tok::Op("<"), col));
                    i += 1;
                }
            }
            '>' => {
                if i + 1 < bytes.len() && bytes[i + 1] == '=' {
                    out.push((Tok::Op(">="), col));
                    i += 2;
                } else {
                    out.push((Tok::Op(">"), col));
                    i += 1;
                }
            }
            '=' => {
                if i + 1 < bytes.len() && bytes[i + 1] == '>' {
                    out.push((Tok::Op("=>"), col));
                    i += 2;
                } else {
                    out.push((Tok::Op("="), col));
                    i += 1;
                }
            }
            c if c.is_ascii_digit() => {
                let start = i;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                let text: String = bytes[start..i].iter().collect();
                let n: i64 =
                    text.parse().map_err(|_| parse_err(lineno, col, "an integer literal"))?;
                out.push((Tok::Int(n), col));
            }
            c if c.is_alphabetic() || c == '_' => {
                let start = i;
                while i < bytes.len()
                    && (bytes[i].is_alphanumeric() || bytes[i] == '_' || bytes[i] == '\'' || bytes[i] == '#')
                {
                    i += 1;
                }
                let text: String = bytes[start..i].iter().collect();
                out.push((Tok::Ident(text), col));
            }
            other => return Err(parse_err(lineno, col, format!("a token, found {other:?}"))),
        }
    }
    Ok(out)
}

// ------------------------------------------------------------------
// Untyped expressions

#[derive(Debug, Clone, PartialEq, Eq)]
enum UExpr {
    Int(i64, usize),
    Bool(bool, usize),
    Ident(String, usize),
    Call(String, Vec<UExpr>, usize),
    Unary(&'static str, Box<UExpr>, usize),
    Binary(&'static str, Box<UExpr>, Box<UExpr>, usize),
}

struct Cursor<'a> {
    toks: &'a [(Tok, usize)],
    pos: usize,
    line: usize,
}

impl<'a> Cursor<'a> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn col(&self) -> usize {
        self.toks.get(self.pos).map(|(_, c)| *c).unwrap_or_else(|| {
            self.toks.last().map(|(_, c)| c + 1).unwrap_or(1)
        })
    }

    fn next(&mut self) -> Option<&Tok> {
        let t = self.toks.get(self.pos).map(|(t, _)| t);
        self.pos += 1;
        t
    }

    fn expect(&mut self, tok: &Tok) -> Result<(), FileError> {
        let col = self.col();
        match self.next() {
            Some(t) if t == tok => Ok(()),
            _ => Err(parse_err(self.line, col, format!("{tok}"))),
        }
    }

    fn expect_ident(&mut self) -> Result<String, FileError> {
        let col = self.col();
        match self.next() {
            Some(Tok::Ident(s)) => Ok(s.clone()),
            _ => Err(parse_err(self.line, col, "an identifier")),
        }
    }

    fn expect_keyword(&mut self, kw: &str) -> Result<(), FileError> {
        let col = self.col();
        match self.next() {
            Some(Tok::Ident(s)) if s == kw => Ok(()),
            _ => Err(parse_err(self.line, col, format!("keyword '{kw}'"))),
        }
    }

    fn at_end(&self) -> bool {
        self.pos >= self.toks.len()
    }
}

fn binary_prec(op: &str) -> Option<(u8, bool)> {
    // (precedence, right-assoc)
    Some(match op {
        "*" => (70, false),
        "+" | "-" => (60, false),
        "=" | ">=" | "<=" | ">" | "<" => (50, false),
        "/\\" => (40, false),
        "\\/" => (30, false),
        "=>" => (20, true),
        "<=>" => (10, false),
        _ => return None,
    })
}

fn parse_expr(cur: &mut Cursor<'_>, min_prec: u8) -> Result<UExpr, FileError> {
    let mut lhs = parse_primary(cur)?;
    while let Some(Tok::Op(op)) = cur.peek() {
        let op: &'static str = op;
        let Some((prec, right_assoc)) = binary_prec(op) else { break };
        if prec < min_prec {
            break;
        }
        let col = cur.col();
        cur.next();
        let next_min = if right_assoc { prec } else { prec + 1 };
        let rhs = parse_expr(cur, next_min)?;
        lhs = UExpr::Binary(op, Box::new(lhs), Box::new(rhs), col);
    }
    Ok(lhs)
}

fn parse_primary(cur: &mut Cursor<'_>) -> Result<UExpr, FileError> {
    let col = cur.col();
    match cur.next() {
        Some(Tok::Int(n)) => Ok(UExpr::Int(*n, col)),
        Some(Tok::Ident(name)) if name == "true" => Ok(UExpr::Bool(true, col)),
        Some(Tok::Ident(name)) if name == "false" => Ok(UExpr::Bool(false, col)),
        Some(Tok::Ident(name)) if name == "not" => {
            let inner = parse_unary_operand(cur)?;
            Ok(UExpr::Unary("not", Box::new(inner), col))
        }
        Some(Tok::Ident(name)) => {
            let name = name.clone();
            if matches!(cur.peek(), Some(Tok::LParen)) {
                cur.next();
                let mut args = Vec::new();
                if !matches!(cur.peek(), Some(Tok::RParen)) {
                    loop {
                        args.push(parse_expr(cur, 0)?);
                        match cur.peek() {
                            Some(Tok::Comma) => {
                                cur.next();
                            }
                            _ => break,
                        }
                    }
                }
                cur.expect(&Tok::RParen)?;
                Ok(UExpr::Call(name, args, col))
            } else {
                Ok(UExpr::Ident(name, col))
            }
        }
        Some(Tok::Op("-")) => {
            let inner = parse_unary_operand(cur)?;
            Ok(UExpr::Unary("-", Box::new(inner), col))
        }
        Some(Tok::LParen) => {
            let e = parse_expr(cur, 0)?;
            cur.expect(&Tok::RParen)?;
            Ok(e)
        }
        _ => Err(parse_err(cur.line, col, "a term")),
    }
}

fn parse_unary_operand(cur: &mut Cursor<'_>) -> Result<UExpr, FileError> {
    // Prefix operators bind tighter than any infix operator.
    let col = cur.col();
    match cur.peek() {
        Some(Tok::LParen) => {
            cur.next();
            let e = parse_expr(cur, 0)?;
            cur.expect(&Tok::RParen)?;
            Ok(e)
        }
        Some(Tok::Int(_)) | Some(Tok::Ident(_)) => parse_primary(cur),
        _ => Err(parse_err(cur.line, col, "an operand")),
    }
}

// ------------------------------------------------------------------
// Typing: untyped expressions to sorted terms with variable inference.

struct TypeEnv<'a> {
    sig: &'a Signature,
    model: TheoryModel,
    line: usize,
    vars: BTreeMap<String, Sort>,
}

impl<'a> TypeEnv<'a> {
    fn new(sig: &'a Signature, model: TheoryModel, line: usize) -> TypeEnv<'a> {
        TypeEnv { sig, model, line, vars: BTreeMap::new() }
    }

    fn var(&mut self, name: &str, expected: Option<&Sort>, col: usize) -> Result<Term, FileError> {
        match (self.vars.get(name).cloned(), expected) {
            (Some(sort), Some(exp)) if sort != *exp => Err(parse_err(
                self.line,
                col,
                format!("variable {name} of sort {sort}, but {exp} is required here"),
            )),
            (Some(sort), _) => Ok(Term::Var(Var::new(name, sort))),
            (None, Some(exp)) => {
                self.vars.insert(name.into(), exp.clone());
                Ok(Term::Var(Var::new(name, exp.clone())))
            }
            (None, None) => Err(parse_err(
                self.line,
                col,
                format!("a context fixing the sort of variable {name}"),
            )),
        }
    }

    fn term_of(&mut self, e: &UExpr, expected: Option<&Sort>) -> Result<Term, FileError> {
        match e {
            UExpr::Int(n, col) => {
                if let Some(exp) = expected {
                    if *exp != Sort::int() {
                        return Err(parse_err(self.line, *col, format!("a term of sort {exp}")));
                    }
                }
                Ok(self.model.value_term(Value::Int(*n)))
            }
            UExpr::Bool(b, col) => {
                if let Some(exp) = expected {
                    if *exp != Sort::bool() {
                        return Err(parse_err(self.line, *col, format!("a term of sort {exp}")));
                    }
                }
                Ok(Term::value(Value::Bool(*b)))
            }
            UExpr::Ident(name, col) => {
                if let Some(f) = self.sig.lookup(name, 0) {
                    let f = f.clone();
                    if let Some(exp) = expected {
                        if f.result_sort() != exp {
                            return Err(parse_err(
                                self.line,
                                *col,
                                format!("a term of sort {exp}, found constant {name}"),
                            ));
                        }
                    }
                    return Ok(Term::app(f, vec![]).expect("constants have no arguments"));
                }
                self.var(name, expected, *col)
            }
            UExpr::Call(name, args, col) => {
                let Some(f) = self.sig.lookup(name, args.len()) else {
                    return Err(parse_err(
                        self.line,
                        *col,
                        format!("a declared symbol {name}/{}", args.len()),
                    ));
                };
                let f = f.clone();
                if let Some(exp) = expected {
                    if f.result_sort() != exp {
                        return Err(parse_err(
                            self.line,
                            *col,
                            format!("a term of sort {exp}, found {name} of sort {}", f.result_sort()),
                        ));
                    }
                }
                let mut targs = Vec::with_capacity(args.len());
                for (arg, sort) in args.iter().zip(f.arg_sorts().to_vec()) {
                    targs.push(self.term_of(arg, Some(&sort))?);
                }
                Term::app(f, targs).map_err(|e| parse_err(self.line, *col, e.to_string()))
            }
            UExpr::Unary(op, inner, col) => match *op {
                "-" => {
                    if let UExpr::Int(n, _) = **inner {
                        return Ok(self.model.value_term(Value::Int(-n)));
                    }
                    let arg = self.term_of(inner, Some(&Sort::int()))?;
                    let f = FunSym::new("-", vec![Sort::int()], Sort::int(), Kind::Theory);
                    self.check_expected(expected, &Sort::int(), *col)?;
                    Ok(Term::App(f, vec![arg]))
                }
                "not" => {
                    let arg = self.term_of(inner, Some(&Sort::bool()))?;
                    let f = FunSym::new("not", vec![Sort::bool()], Sort::bool(), Kind::Theory);
                    self.check_expected(expected, &Sort::bool(), *col)?;
                    Ok(Term::App(f, vec![arg]))
                }
                _ => Err(parse_err(self.line, *col, "a prefix operator")),
            },
            UExpr::Binary(op, lhs, rhs, col) => {
                if *op == "=" {
                    // Overloaded equality: settle the operand sort first.
                    let (l, r) = match self.try_infer(lhs) {
                        Some(sort) => {
                            let l = self.term_of(lhs, Some(&sort))?;
                            let r = self.term_of(rhs, Some(&sort))?;
                            (l, r)
                        }
                        None => match self.try_infer(rhs) {
                            Some(sort) => {
                                let r = self.term_of(rhs, Some(&sort))?;
                                let l = self.term_of(lhs, Some(&sort))?;
                                (l, r)
                            }
                            None => {
                                let l = self.term_of(lhs, Some(&Sort::int()))?;
                                let r = self.term_of(rhs, Some(&Sort::int()))?;
                                (l, r)
                            }
                        },
                    };
                    let sort = l.sort();
                    if !sort.is_theory() {
                        return Err(parse_err(self.line, *col, "equality over a theory sort"));
                    }
                    self.check_expected(expected, &Sort::bool(), *col)?;
                    let f = FunSym::new("=", vec![sort.clone(), sort], Sort::bool(), Kind::Theory);
                    return Ok(Term::App(f, vec![l, r]));
                }
                let (arg_sort, result) = match *op {
                    "+" | "-" | "*" => (Sort::int(), Sort::int()),
                    ">=" | "<=" | ">" | "<" => (Sort::int(), Sort::bool()),
                    "/\\" | "\\/" | "=>" | "<=>" => (Sort::bool(), Sort::bool()),
                    other => return Err(parse_err(self.line, *col, format!("operator {other}"))),
                };
                self.check_expected(expected, &result, *col)?;
                let l = self.term_of(lhs, Some(&arg_sort))?;
                let r = self.term_of(rhs, Some(&arg_sort))?;
                let f = FunSym::new(op, vec![arg_sort.clone(), arg_sort], result, Kind::Theory);
                Ok(Term::App(f, vec![l, r]))
            }
        }
    }

    fn check_expected(&self, expected: Option<&Sort>, actual: &Sort, col: usize) -> Result<(), FileError> {
        match expected {
            Some(exp) if exp != actual =>

                Err(parse_err(self.line, col, format!("a term of sort {exp}, found {actual}"))),
            _ => Ok(()),
        }
    }

    /// Best-effort sort of an expression without committing bindings.
    fn try_infer(&self, e: &UExpr) -> Option<Sort> {
        match e {
            UExpr::Int(_, _) => Some(Sort::int()),
            UExpr::Bool(_, _) => Some(Sort::bool()),
            UExpr::Ident(name, _) => {
                if let Some(f) = self.sig.lookup(name, 0) {
                    return Some(f.result_sort().clone());
                }
                self.vars.get(name).cloned()
            }
            UExpr::Call(name, args, _) => {
                self.sig.lookup(name, args.len()).map(|f| f.result_sort().clone())
            }
            UExpr::Unary(op, _, _) => match *op {
                "-" => Some(Sort::int()),
                _ => Some(Sort::bool()),
            },
            UExpr::Binary(op, _, _, _) => match *op {
                "+" | "-" | "*" => Some(Sort::int()),
                _ => Some(Sort::bool()),
            },
        }
    }
}

// ------------------------------------------------------------------
// Declarations

fn resolve_sort(name: &str) -> Sort {
    match name {
        "Int" => Sort::int(),
        "Bool" => Sort::bool(),
        other => Sort::term(other),
    }
}

/// Parses a whole problem file.
pub fn parse_problem(text: &str) -> Result<ProblemFile, FileError> {
    let mut theory: Option<TheoryMode> = None;
    let mut includes_calc = true;
    let mut sig = Signature::with_builtins();
    let mut rules: Vec<ConstrainedRule> = Vec::new();
    let mut ects: Vec<(String, ECTerm)> = Vec::new();

    // The theory declaration must come first so literal normalization is
    // fixed; scan for it before anything else.
    for (lineno, raw) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let toks = tokenize(raw, lineno)?;
        if toks.is_empty() {
            continue;
        }
        let mut cur = Cursor { toks: &toks, pos: 0, line: lineno };
        let head = cur.expect_ident()?;
        match head.as_str() {
            "theory" => {
                let kind = cur.expect_ident()?;
                let mode = match kind.as_str() {
                    "int" => TheoryMode::Int,
                    "intmod" => {
                        let col = cur.col();
                        match cur.next() {
                            Some(Tok::Int(m)) if *m >= 1 => TheoryMode::IntMod(*m as u32),
                            _ => return Err(parse_err(lineno, col, "a positive modulus")),
                        }
                    }
                    other => {
                        return Err(FileError::Decl {
                            line: lineno,
                            msg: format!("unknown theory '{other}' (expected int or intmod M)"),
                        })
                    }
                };
                if theory.replace(mode).is_some() {
                    return Err(FileError::Decl { line: lineno, msg: "duplicate theory declaration".into() });
                }
                if !cur.at_end() {
                    return Err(parse_err(lineno, cur.col(), "end of line"));
                }
            }
            "calc" => {
                let flag = cur.expect_ident()?;
                includes_calc = match flag.as_str() {
                    "on" => true,
                    "off" => false,
                    other => {
                        return Err(FileError::Decl {
                            line: lineno,
                            msg: format!("calc takes on or off, found '{other}'"),
                        })
                    }
                };
                if !cur.at_end() {
                    return Err(parse_err(lineno, cur.col(), "end of line"));
                }
            }
            "sig" => {
                let name = cur.expect_ident()?;
                cur.expect(&Tok::Colon)?;
                let mut args = Vec::new();
                while !matches!(cur.peek(), Some(Tok::Arrow)) {
                    let s = cur.expect_ident()?;
                    args.push(resolve_sort(&s));
                    if matches!(cur.peek(), Some(Tok::Op("*"))) {
                        cur.next();
                    }
                }
                cur.expect(&Tok::Arrow)?;
                let result = resolve_sort(&cur.expect_ident()?);
                let kind_name = cur.expect_ident()?;
                match kind_name.as_str() {
                    "term" => {
                        let f = FunSym::new(&name, args, result, Kind::Term);
                        sig.declare(f).map_err(|e| FileError::Decl { line: lineno, msg: e.to_string() })?;
                    }
                    "theory" => {
                        // Theory symbols are built in; a declaration may
                        // only restate one of them.
                        let declared = FunSym::new(&name, args, result, Kind::Theory);
                        let known = builtin_theory_symbols().into_iter().any(|f| f == declared);
                        if !known {
                            return Err(FileError::Decl {
                                line: lineno,
                                msg: format!("{name} is not a built-in theory symbol"),
                            });
                        }
                    }
                    other => {
                        return Err(FileError::Decl {
                            line: lineno,
                            msg: format!("symbol kind must be term or theory, found '{other}'"),
                        })
                    }
                }
                if !cur.at_end() {
                    return Err(parse_err(lineno, cur.col(), "end of line"));
                }
            }
            "rule" | "ect" => { /* handled in the second pass */ }
            other => {
                return Err(FileError::Decl {
                    line: lineno,
                    msg: format!("unknown declaration '{other}'"),
                })
            }
        }
    }

    let theory = theory.ok_or(FileError::Decl { line: 1, msg: "missing theory declaration".into() })?;
    let model = TheoryModel { mode: theory };

    for (lineno, raw) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let toks = tokenize(raw, lineno)?;
        if toks.is_empty() {
            continue;
        }
        let mut cur = Cursor { toks: &toks, pos: 0, line: lineno };
        let head = cur.expect_ident()?;
        match head.as_str() {
            "rule" => {
                let id = cur.expect_ident()?;
                cur.expect(&Tok::Colon)?;
                let lhs_e = parse_expr(&mut cur, 0)?;
                cur.expect(&Tok::Arrow)?;
                let rhs_e = parse_expr(&mut cur, 0)?;
                cur.expect(&Tok::LBracket)?;
                let guard_e = parse_expr(&mut cur, 0)?;
                cur.expect(&Tok::RBracket)?;
                cur.expect_keyword("vars")?;
                cur.expect(&Tok::LBrace)?;
                let mut var_names = Vec::new();
                while !matches!(cur.peek(), Some(Tok::RBrace)) {
                    var_names.push(cur.expect_ident()?);
                    if matches!(cur.peek(), Some(Tok::Comma)) {
                        cur.next();
                    }
                }
                cur.expect(&Tok::RBrace)?;
                if !cur.at_end() {
                    return Err(parse_err(lineno, cur.col(), "end of line"));
                }

                let mut env = TypeEnv::new(&sig, model, lineno);
                let lhs = env.term_of(&lhs_e, None)?;
                let lhs_sort = lhs.sort();
                let rhs = env.term_of(&rhs_e, Some(&lhs_sort))?;
                let guard = env.term_of(&guard_e, Some(&Sort::bool()))?;
                let theory_vars: Vec<Var> = var_names
                    .iter()
                    .map(|n| {
                        let sort = env.vars.get(n).cloned().unwrap_or_else(Sort::int);
                        Var::new(n, sort)
                    })
                    .collect();
                let rule = ConstrainedRule::new(&id, theory_vars, lhs, rhs, guard);
                rule.validate().map_err(|violation| FileError::InvalidRule {
                    line: lineno,
                    id: id.clone(),
                    violation,
                })?;
                rules.push(rule);
            }
            "ect" => {
                let id = cur.expect_ident()?;
                cur.expect(&Tok::Colon)?;
                cur.expect_keyword("X")?;
                cur.expect(&Tok::LBrace)?;
                let mut x_names = Vec::new();
                while !matches!(cur.peek(), Some(Tok::RBrace)) {
                    x_names.push(cur.expect_ident()?);
                    if matches!(cur.peek(), Some(Tok::Comma)) {
                        cur.next();
                    }
                }
                cur.expect(&Tok::RBrace)?;
                cur.expect_keyword("term")?;
                let term_e = parse_expr(&mut cur, 0)?;
                cur.expect_keyword("exists")?;
                cur.expect(&Tok::LBracket)?;
                let mut binder_names = Vec::new();
                while !matches!(cur.peek(), Some(Tok::RBracket)) {
                    binder_names.push(cur.expect_ident()?);
                    if matches!(cur.peek(), Some(Tok::Comma)) {
                        cur.next();
                    }
                }
                cur.expect(&Tok::RBracket)?;
                cur.expect_keyword("phi")?;
                let phi_e = parse_expr(&mut cur, 0)?;
                if !cur.at_end() {
                    return Err(parse_err(lineno, cur.col(), "end of line"));
                }

                let mut env = TypeEnv::new(&sig, model, lineno);
                let term = env.term_of(&term_e, None)?;
                let phi = env.term_of(&phi_e, Some(&Sort::bool()))?;
                let logical: Vec<Var> = x_names
                    .iter()
                    .map(|n| {
                        let sort = env.vars.get(n).cloned().unwrap_or_else(Sort::int);
                        Var::new(n, sort)
                    })
                    .collect();
                let binders: Vec<Var> = binder_names
                    .iter()
                    .map(|n| {
                        let sort = env.vars.get(n).cloned().unwrap_or_else(Sort::int);
                        Var::new(n, sort)
                    })
                    .collect();
                let ect = ECTerm::new(logical, term, ExConstraint::new(binders, phi));
                ect.well_formed().map_err(|violation| FileError::InvalidEct {
                    line: lineno,
                    id: id.clone(),
                    violation,
                })?;
                ects.push((id, ect));
            }
            _ => {}
        }
    }

    let user_rule_ids: Vec<String> = rules.iter().map(|r| r.id.clone()).collect();
    let system = if includes_calc {
        Lctrs::with_calc(rules, &sig)
    } else {
        Lctrs::without_calc(rules)
    };
    Ok(ProblemFile { theory, sig, system, user_rule_ids, ects, includes_calc })
}

#[cfg(test)]
mod tests {
    use super::*;

    const SUM: &str = "\
# summation over wrapped integers
theory intmod 16
sig sum : Int -> Int term

rule r1: sum(x) -> 0 [0 >= x] vars {x}
rule r2: sum(x) -> x + sum(x + -1) [0 < x] vars {x}

ect start: X {x} term sum(x) exists [] phi 1 <= x /\\ x <= 5
ect ex34: X {y} term 1 + sum(y) exists [w] phi 1 <= w /\\ w <= 5 /\\ y = w - 1
";

    #[test]
    fn parses_the_sum_problem() {
        let p = parse_problem(SUM).unwrap();
        assert_eq!(p.theory, TheoryMode::IntMod(16));
        assert_eq!(p.user_rule_ids, vec!["r1", "r2"]);
        assert!(p.includes_calc);
        // Calculation rules for every built-in theory symbol follow the
        // two user rules.
        assert!(p.system.rules.len() > 2);
        assert!(p.system.rule("calc-+/2").is_some());
        let start = p.ect("start").unwrap();
        assert_eq!(start.to_string(), "Π{x}. sum(x) [1 <= x /\\ x <= 5]");
        let ex34 = p.ect("ex34").unwrap();
        assert_eq!(
            ex34.to_string(),
            "Π{y}. 1 + sum(y) [∃w. 1 <= w /\\ w <= 5 /\\ y = w - 1]"
        );
    }

    #[test]
    fn negative_literals_and_minus() {
        let p = parse_problem(SUM).unwrap();
        let r2 = p.system.rule("r2").unwrap();
        // x + -1 keeps the negative literal, normalized into Z_16.
        assert_eq!(r2.rhs.to_string(), "x + sum(x + 15)");
        // Binary minus stays an operation.
        let ex34 = p.ect("ex34").unwrap();
        assert!(ex34.constraint.body.to_string().contains("w - 1"));
    }

    #[test]
    fn round_trips_through_render() {
        let p1 = parse_problem(SUM).unwrap();
        let rendered = p1.render();
        let p2 = parse_problem(&rendered).unwrap();
        assert_eq!(p2.render(), rendered);
        assert_eq!(p1.ects, p2.ects);
        let r1: Vec<_> = p1.user_rules().collect();
        let r2: Vec<_> = p2.user_rules().collect();
        assert_eq!(r1, r2);
    }

    #[test]
    fn unhoused_guard_variable_is_a_validation_error() {
        let text = "\
theory int
sig sum : Int -> Int term
rule r1: sum(x) -> 0 [0 >= x] vars {}
";
        match parse_problem(text) {
            Err(FileError::InvalidRule { id, violation, .. }) => {
                assert_eq!(id, "r1");
                assert!(matches!(violation, RuleViolation::UnhousedVariable { .. }));
            }
            other => panic!("expected a rule validation error, got {other:?}"),
        }
    }

    #[test]
    fn trailing_tokens_are_rejected() {
        let text = "theory intmod 5 junk\n";
        assert!(matches!(parse_problem(text), Err(FileError::Parse { line: 1, .. })));
        let text = "theory intmod 5\nsig f : Int -> Int term\nrule r: f(x) -> 0 [0 >= x] vars {x} junk\n";
        assert!(matches!(parse_problem(text), Err(FileError::Parse { line: 3, .. })));
        let text = "theory intmod 5\nsig f : Int -> Int term extra\n";
        assert!(matches!(parse_problem(text), Err(FileError::Parse { line: 2, .. })));
    }

    #[test]
    fn parse_errors_carry_positions() {
        let text = "theory intmod 5\nsig f : Int -> Int term\nrule r: f(x -> 0 [true] vars {x}\n";
        match parse_problem(text) {
            Err(FileError::Parse { line, col, .. }) => {
                assert_eq!(line, 3);
                assert!(col > 0);
            }
            other => panic!("expected a parse error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_theory_symbol_rejected() {
        let text = "theory int\nsig frob : Int -> Int theory\n";
        assert!(matches!(parse_problem(text), Err(FileError::Decl { .. })));
        // Restating a built-in is fine.
        let text = "theory int\nsig + : Int * Int -> Int theory\n";
        // '+' is not an identifier; theory restatements use identifiers
        // only, so this is a parse error rather than a declaration error.
        assert!(parse_problem(text).is_err());
    }

    #[test]
    fn missing_theory_is_an_error() {
        assert!(matches!(
            parse_problem("sig f : Int -> Int term\n"),
            Err(FileError::Decl { .. })
        ));
    }

    #[test]
    fn ill_formed_ect_is_reported() {
        let text = "\
theory intmod 4
sig f : Int -> Int term
ect bad: X {} term f(x) exists [] phi x > 0
";
        match parse_problem(text) {
            Err(FileError::InvalidEct { id, .. }) => assert_eq!(id, "bad"),
            other => panic!("expected an ect validation error, got {other:?}"),
        }
    }
}
