//! SMT-LIB2 backend over a child solver process.
//!
//! Each query writes a complete script (set-logic LIA, declarations,
//! assertion, check-sat, get-model) to a temporary file, runs the solver
//! on it with a deadline, and parses the `sat`/`unsat`/`unknown` line
//! plus the model S-expression.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::io::Read;
use std::path::PathBuf;
use std::process::{Command, Stdio};
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::{Duration, Instant};

use crate::logic::{
    ConstraintBackend, ExConstraint, LogicError, SolverVerdict, TheoryModel, ValidityVerdict,
    Valuation,
};
use crate::term::{Sort, Term, Value, Var};

static QUERY_COUNTER: AtomicU64 = AtomicU64::new(0);

/// A handle to an external SMT solver. One query runs one process; the
/// handle itself must be used serially.
#[derive(Debug, Clone)]
pub struct SmtBackend {
    bin: String,
    timeout: Duration,
    model: TheoryModel,
}

impl SmtBackend {
    pub fn new(bin: &str, timeout_ms: u64) -> SmtBackend {
        SmtBackend {
            bin: bin.into(),
            timeout: Duration::from_millis(timeout_ms),
            model: TheoryModel::unbounded(),
        }
    }

    /// Looks for a usable solver binary on PATH.
    pub fn discover(timeout_ms: u64) -> Option<SmtBackend> {
        for candidate in ["z3", "cvc5", "cvc4"] {
            let probe = Command::new(candidate)
                .arg("--version")
                .stdout(Stdio::null())
                .stderr(Stdio::null())
                .status();
            if matches!(probe, Ok(s) if s.success()) {
                return Some(SmtBackend::new(candidate, timeout_ms));
            }
        }
        None
    }

    fn run_script(&self, script: &str) -> Result<String, LogicError> {
        let n = QUERY_COUNTER.fetch_add(1, Ordering::Relaxed);
        let path: PathBuf = std::env::temp_dir().join(format!(
            "lctrs-query-{}-{}.smt2",
            std::process::id(),
            n
        ));
        std::fs::write(&path, script)
            .map_err(|e| LogicError::BackendFailure(format!("write query: {e}")))?;
        let mut child = Command::new(&self.bin)
            .arg(&path)
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .map_err(|e| LogicError::BackendFailure(format!("spawn {}: {e}", self.bin)))?;
        let deadline = Instant::now() + self.timeout;
        let status = loop {
            match child.try_wait() {
                Ok(Some(status)) => break Some(status),
                Ok(None) => {
                    if Instant::now() >= deadline {
                        let _ = child.kill();
                        let _ = child.wait();
                        break None;
                    }
                    std::thread::sleep(Duration::from_millis(5));
                }
                Err(e) => {
                    let _ = std::fs::remove_file(&path);
                    return Err(LogicError::BackendFailure(format!("wait: {e}")));
                }
            }
        };
        let mut out = String::new();
        if let Some(stdout) = child.stdout.as_mut() {
            let _ = stdout.read_to_string(&mut out);
        }
        let _ = std::fs::remove_file(&path);
        match status {
            Some(_) => Ok(out),
            None => Err(LogicError::SolverUnknown(format!(
                "solver timed out after {:?}",
                self.timeout
            ))),
        }
    }

    fn query(
        &self,
        free: &BTreeSet<Var>,
        assertion: &str,
        want_model: bool,
    ) -> Result<SmtResponse, LogicError> {
        let mut script = String::from("(set-logic LIA)\n");
        for v in free {
            let sort = sort_name(&v.sort)?;
            writeln!(script, "(declare-const {} {})", smt_symbol(&v.name), sort).unwrap();
        }
        writeln!(script, "(assert {assertion})").unwrap();
        script.push_str("(check-sat)\n");
        if want_model {
            script.push_str("(get-model)\n");
        }
        let out = self.run_script(&script)?;
        parse_response(&out, free)
    }
}

enum SmtResponse {
    Sat(Valuation),
    Unsat,
    Unknown(String),
}

fn sort_name(sort: &Sort) -> Result<&'static str, LogicError> {
    if *sort == Sort::int() {
        Ok("Int")
    } else if *sort == Sort::bool() {
        Ok("Bool")
    } else {
        Err(LogicError::BackendFailure(format!("sort {sort} is not an SMT sort")))
    }
}

/// Quotes a name as an SMT-LIB symbol; fresh variants contain `#`, which
/// needs the `|...|` form.
fn smt_symbol(name: &str) -> String {
    format!("|{name}|")
}

/// Renders a theory term in SMT-LIB syntax.
pub fn term_to_smt(t: &Term) -> Result<String, LogicError> {
    match t {
        Term::Var(v) => Ok(smt_symbol(&v.name)),
        Term::App(f, args) => {
            if let Some(v) = f.value_payload() {
                return Ok(match v {
                    Value::Int(n) if n < 0 => format!("(- {})", -(n as i128)),
                    Value::Int(n) => n.to_string(),
                    Value::Bool(b) => b.to_string(),
                });
            }
            let op = match (f.name(), f.arity()) {
                ("+", 2) => "+",
                ("-", 2) | ("-", 1) => "-",
                ("*", 2) => "*",
                (">=", 2) => ">=",
                ("<=", 2) => "<=",
                (">", 2) => ">",
                ("<", 2) => "<",
                ("=", 2) | ("<=>", 2) => "=",
                ("/\\", 2) => "and",
                ("\\/", 2) => "or",
                ("=>", 2) => "=>",
                ("not", 1) => "not",
                _ => return Err(LogicError::NonTheoryTerm(f.name().into())),
            };
            let mut out = format!("({op}");
            for a in args {
                out.push(' ');
                out.push_str(&term_to_smt(a)?);
            }
            out.push(')');
            Ok(out)
        }
    }
}

/// Renders `∃x⃗.φ` as a closed-over-binders SMT term.
pub fn constraint_to_smt(ec: &ExConstraint) -> Result<String, LogicError> {
    let body = term_to_smt(&ec.body)?;
    if ec.binders.is_empty() {
        return Ok(body);
    }
    let mut out = String::from("(exists (");
    for (i, b) in ec.binders.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        write!(out, "({} {})", smt_symbol(&b.name), sort_name(&b.sort)?).unwrap();
    }
    write!(out, ") {body})").unwrap();
    Ok(out)
}

fn parse_response(out: &str, free: &BTreeSet<Var>) -> Result<SmtResponse, LogicError> {
    let mut lines = out.lines().map(str::trim).filter(|l| !l.is_empty());
    match lines.next() {
        Some("sat") => {
            let rest: String = lines.collect::<Vec<_>>().join(" ");
            let model = parse_model(&rest, free);
            Ok(SmtResponse::Sat(model))
        }
        Some("unsat") => Ok(SmtResponse::Unsat),
        Some("unknown") => Ok(SmtResponse::Unknown("solver returned unknown".into())),
        Some(other) => Err(LogicError::BackendFailure(format!(
            "unexpected solver output: {other}"
        ))),
        None => Err(LogicError::BackendFailure("empty solver output".into())),
    }
}

/// Extracts `(define-fun name () Sort value)` bindings from a model
/// S-expression.
fn parse_model(s: &str, free: &BTreeSet<Var>) -> Valuation {
    let tokens = tokenize(s);
    let mut rho = Valuation::new();
    let mut i = 0;
    while i < tokens.len() {
        if tokens[i] == "define-fun" && i + 4 < tokens.len() {
            let name = unquote(&tokens[i + 1]);
            // Skip the argument list "(" ")" of a constant.
            if tokens[i + 2] == "(" && tokens[i + 3] == ")" {
                let sort_tok = &tokens[i + 4];
                let mut j = i + 5;
                let value = if j < tokens.len() && tokens[j] == "(" {
                    // (- n)
                    if j + 2 < tokens.len() && tokens[j + 1] == "-" {
                        let n: i64 = tokens[j + 2].parse().unwrap_or(0);
                        j += 4;
                        Some(Value::Int(-n))
                    } else {
                        None
                    }
                } else if j < tokens.len() {
                    let tok = &tokens[j];
                    j += 1;
                    if tok == "true" {
                        Some(Value::Bool(true))
                    } else if tok == "false" {
                        Some(Value::Bool(false))
                    } else {
                        tok.parse::<i64>().ok().map(Value::Int)
                    }
                } else {
                    None
                };
                if let Some(value) = value {
                    if let Some(var) = free.iter().find(|v| v.name == name) {
                        let matches_sort = match value {
                            Value::Int(_) => sort_tok == "Int",
                            Value::Bool(_) => sort_tok == "Bool",
                        };
                        if matches_sort {
                            rho.set(var.clone(), value);
                        }
                    }
                }
                i = j;
                continue;
            }
        }
        i += 1;
    }
    rho
}

fn tokenize(s: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let mut quoted = false;
    for ch in s.chars() {
        match ch {
            '|' => {
                quoted = !quoted;
                cur.push(ch);
            }
            '(' | ')' if !quoted => {
                if !cur.is_empty() {
                    out.push(std::mem::take(&mut cur));
                }
                out.push(ch.to_string());
            }
            c if c.is_whitespace() && !quoted => {
                if !cur.is_empty() {
                    out.push(std::mem::take(&mut cur));
                }
            }
            c => cur.push(c),
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

fn unquote(tok: &str) -> String {
    tok.trim_matches('|').to_string()
}

impl ConstraintBackend for SmtBackend {
    fn model(&self) -> &TheoryModel {
        &self.model
    }

    fn describe(&self) -> String {
        format!("smt solver {}", self.bin)
    }

    fn check_sat(&mut self, ec: &ExConstraint) -> Result<SolverVerdict, LogicError> {
        let free = ec.free_vars();
        let assertion = constraint_to_smt(ec)?;
        match self.query(&free, &assertion, true) {
            Ok(SmtResponse::Sat(w)) => Ok(SolverVerdict::Sat(w)),
            Ok(SmtResponse::Unsat) => Ok(SolverVerdict::Unsat),
            Ok(SmtResponse::Unknown(r)) => Ok(SolverVerdict::Unknown(r)),
            // A timeout is an unknown verdict, not a backend failure.
            Err(LogicError::SolverUnknown(r)) => Ok(SolverVerdict::Unknown(r)),
            Err(e) => Err(e),
        }
    }

    fn check_valid_implication(
        &mut self,
        lhs: &ExConstraint,
        rhs: &ExConstraint,
    ) -> Result<ValidityVerdict, LogicError> {
        let mut free = lhs.free_vars();
        free.extend(rhs.free_vars());
        // Valid iff the negated implication is unsatisfiable.
        let assertion = format!(
            "(not (=> {} {}))",
            constraint_to_smt(lhs)?,
            constraint_to_smt(rhs)?
        );
        match self.query(&free, &assertion, true) {
            Ok(SmtResponse::Sat(w)) => Ok(ValidityVerdict::NotValid(w)),
            Ok(SmtResponse::Unsat) => Ok(ValidityVerdict::Valid),
            Ok(SmtResponse::Unknown(r)) => Ok(ValidityVerdict::Unknown(r)),
            Err(LogicError::SolverUnknown(r)) => Ok(ValidityVerdict::Unknown(r)),
            Err(e) => Err(e),
        }
    }

    fn holds(&mut self, ec: &ExConstraint, rho: &Valuation) -> Result<bool, LogicError> {
        // Pin the free variables to their values and ask for
        // satisfiability of the closed constraint.
        let mut assertion = constraint_to_smt(ec)?;
        let free = ec.free_vars();
        let mut pins = String::new();
        for v in &free {
            let value = rho
                .get(v)
                .ok_or_else(|| LogicError::UnboundVariable(v.clone()))?;
            let val_term = term_to_smt(&Term::value(value))?;
            write!(pins, " (= {} {})", smt_symbol(&v.name), val_term).unwrap();
        }
        if !pins.is_empty() {
            assertion = format!("(and {assertion}{pins})");
        }
        match self.query(&free, &assertion, false)? {
            SmtResponse::Sat(_) => Ok(true),
            SmtResponse::Unsat => Ok(false),
            SmtResponse::Unknown(r) => Err(LogicError::SolverUnknown(r)),
        }
    }
}
