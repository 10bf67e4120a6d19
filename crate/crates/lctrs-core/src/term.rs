//! Sorted terms: signatures, variables, positions, substitutions and
//! left-linear matching.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

/// Partition of sorts and function symbols into the theory side and the
/// free (term) side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Kind {
    Theory,
    Term,
}

/// A sort. `Bool` and `Int` are the built-in theory sorts; everything else
/// is a user-declared term sort.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Sort {
    pub name: String,
    pub kind: Kind,
}

impl Sort {
    pub fn bool() -> Sort {
        Sort { name: "Bool".into(), kind: Kind::Theory }
    }

    pub fn int() -> Sort {
        Sort { name: "Int".into(), kind: Kind::Theory }
    }

    pub fn term(name: &str) -> Sort {
        Sort { name: name.into(), kind: Kind::Term }
    }

    pub fn is_theory(&self) -> bool {
        self.kind == Kind::Theory
    }
}

impl fmt::Display for Sort {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

/// A carrier element of one of the built-in theory sorts. In modular mode
/// integers are kept as representatives `0..m-1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Value {
    Int(i64),
    Bool(bool),
}

impl Value {
    pub fn sort(&self) -> Sort {
        match self {
            Value::Int(_) => Sort::int(),
            Value::Bool(_) => Sort::bool(),
        }
    }

    pub fn as_int(&self) -> Option<i64> {
        match self {
            Value::Int(n) => Some(*n),
            Value::Bool(_) => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Value::Bool(b) => Some(*b),
            Value::Int(_) => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(n) => write!(f, "{n}"),
            Value::Bool(b) => write!(f, "{b}"),
        }
    }
}

#[derive(Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
struct FunSymData {
    name: String,
    arg_sorts: Vec<Sort>,
    result_sort: Sort,
    kind: Kind,
    value: Option<Value>,
}

/// A function symbol with its sort declaration. Cheap to clone; equality is
/// structural on the declaration.
#[derive(Clone)]
pub struct FunSym(Arc<FunSymData>);

impl FunSym {
    pub fn new(name: &str, arg_sorts: Vec<Sort>, result_sort: Sort, kind: Kind) -> FunSym {
        FunSym(Arc::new(FunSymData {
            name: name.into(),
            arg_sorts,
            result_sort,
            kind,
            value: None,
        }))
    }

    /// The value constant denoting a carrier element.
    pub fn value(v: Value) -> FunSym {
        FunSym(Arc::new(FunSymData {
            name: v.to_string(),
            arg_sorts: vec![],
            result_sort: v.sort(),
            kind: Kind::Theory,
            value: Some(v),
        }))
    }

    pub fn name(&self) -> &str {
        &self.0.name
    }

    pub fn arg_sorts(&self) -> &[Sort] {
        &self.0.arg_sorts
    }

    pub fn arity(&self) -> usize {
        self.0.arg_sorts.len()
    }

    pub fn result_sort(&self) -> &Sort {
        &self.0.result_sort
    }

    pub fn kind(&self) -> Kind {
        self.0.kind
    }

    pub fn is_value(&self) -> bool {
        self.0.value.is_some()
    }

    pub fn value_payload(&self) -> Option<Value> {
        self.0.value
    }
}

impl PartialEq for FunSym {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0) || self.0 == other.0
    }
}

impl Eq for FunSym {}

impl std::hash::Hash for FunSym {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.0.hash(state);
    }
}

impl PartialOrd for FunSym {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for FunSym {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.cmp(&other.0)
    }
}

impl fmt::Debug for FunSym {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0.name)
    }
}

/// A sorted variable. Two variables with the same name and different sorts
/// are distinct.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var {
    pub name: String,
    pub sort: Sort,
}

impl Var {
    pub fn new(name: &str, sort: Sort) -> Var {
        Var { name: name.into(), sort }
    }

    pub fn int(name: &str) -> Var {
        Var::new(name, Sort::int())
    }

    pub fn bool(name: &str) -> Var {
        Var::new(name, Sort::bool())
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TermError {
    #[error("position {0} does not address a node")]
    InvalidPosition(Position),
    #[error("sort mismatch: expected {expected}, found {found}")]
    SortMismatch { expected: Sort, found: Sort },
    #[error("symbol {symbol} expects {expected} arguments, got {found}")]
    ArityMismatch { symbol: String, expected: usize, found: usize },
    #[error("pattern is not linear: variable {0} repeats")]
    NonLinearPattern(Var),
    #[error("binding {var} to a term of sort {found} violates its sort {expected}")]
    IllSortedBinding { var: Var, expected: Sort, found: Sort },
}

/// First-order terms over a sorted signature.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Var(Var),
    App(FunSym, Vec<Term>),
}

impl Term {
    /// Builds an application, checking arity and argument sorts.
    pub fn app(sym: FunSym, args: Vec<Term>) -> Result<Term, TermError> {
        if sym.arity() != args.len() {
            return Err(TermError::ArityMismatch {
                symbol: sym.name().into(),
                expected: sym.arity(),
                found: args.len(),
            });
        }
        for (expected, arg) in sym.arg_sorts().iter().zip(&args) {
            let found = arg.sort();
            if *expected != found {
                return Err(TermError::SortMismatch { expected: expected.clone(), found });
            }
        }
        Ok(Term::App(sym, args))
    }

    pub fn var(v: Var) -> Term {
        Term::Var(v)
    }

    pub fn value(v: Value) -> Term {
        Term::App(FunSym::value(v), vec![])
    }

    pub fn sort(&self) -> Sort {
        match self {
            Term::Var(v) => v.sort.clone(),
            Term::App(f, _) => f.result_sort().clone(),
        }
    }

    pub fn is_var(&self) -> bool {
        matches!(self, Term::Var(_))
    }

    /// True for a value constant.
    pub fn is_value(&self) -> bool {
        matches!(self, Term::App(f, _) if f.is_value())
    }

    pub fn as_value(&self) -> Option<Value> {
        match self {
            Term::App(f, _) => f.value_payload(),
            Term::Var(_) => None,
        }
    }

    /// True when the term is built from theory symbols and variables only.
    pub fn is_theory_term(&self) -> bool {
        match self {
            Term::Var(_) => true,
            Term::App(f, args) => f.kind() == Kind::Theory && args.iter().all(Term::is_theory_term),
        }
    }

    /// All positions in leftmost-outermost (preorder) enumeration order.
    pub fn positions(&self) -> Vec<Position> {
        let mut out = Vec::new();
        let mut path = Vec::new();
        fn walk(t: &Term, path: &mut Vec<usize>, out: &mut Vec<Position>) {
            out.push(Position(path.clone()));
            if let Term::App(_, args) = t {
                for (i, arg) in args.iter().enumerate() {
                    path.push(i + 1);
                    walk(arg, path, out);
                    path.pop();
                }
            }
        }
        walk(self, &mut path, &mut out);
        out
    }

    pub fn subterm_at(&self, p: &Position) -> Result<&Term, TermError> {
        let mut cur = self;
        for &i in &p.0 {
            match cur {
                Term::App(_, args) if i >= 1 && i <= args.len() => cur = &args[i - 1],
                _ => return Err(TermError::InvalidPosition(p.clone())),
            }
        }
        Ok(cur)
    }

    /// Replaces the subterm at `p` by `u`; the replacement must have the
    /// sort of the replaced subterm.
    pub fn replace_at(&self, p: &Position, u: Term) -> Result<Term, TermError> {
        let old = self.subterm_at(p)?;
        let expected = old.sort();
        let found = u.sort();
        if expected != found {
            return Err(TermError::SortMismatch { expected, found });
        }
        fn go(t: &Term, path: &[usize], u: Term) -> Term {
            match path.split_first() {
                None => u,
                Some((&i, rest)) => match t {
                    Term::App(f, args) => {
                        let mut args = args.clone();
                        args[i - 1] = go(&args[i - 1], rest, u);
                        Term::App(f.clone(), args)
                    }
                    Term::Var(_) => unreachable!("validated by subterm_at"),
                },
            }
        }
        Ok(go(self, &p.0, u))
    }

    pub fn vars(&self) -> BTreeSet<Var> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<Var>) {
        match self {
            Term::Var(v) => {
                out.insert(v.clone());
            }
            Term::App(_, args) => {
                for a in args {
                    a.collect_vars(out);
                }
            }
        }
    }

    /// Variables in first-occurrence (preorder) order, without duplicates.
    pub fn vars_ordered(&self) -> Vec<Var> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        fn walk(t: &Term, seen: &mut BTreeSet<Var>, out: &mut Vec<Var>) {
            match t {
                Term::Var(v) => {
                    if seen.insert(v.clone()) {
                        out.push(v.clone());
                    }
                }
                Term::App(_, args) => {
                    for a in args {
                        walk(a, seen, out);
                    }
                }
            }
        }
        walk(self, &mut seen, &mut out);
        out
    }

    /// The set of value constants contained in the term.
    pub fn values_contained(&self) -> BTreeSet<FunSym> {
        let mut out = BTreeSet::new();
        fn walk(t: &Term, out: &mut BTreeSet<FunSym>) {
            if let Term::App(f, args) = t {
                if f.is_value() {
                    out.insert(f.clone());
                }
                for a in args {
                    walk(a, out);
                }
            }
        }
        walk(self, &mut out);
        out
    }

    pub fn is_value_free(&self) -> bool {
        self.values_contained().is_empty()
    }

    pub fn is_linear(&self) -> bool {
        fn walk(t: &Term, seen: &mut BTreeSet<Var>) -> bool {
            match t {
                Term::Var(v) => seen.insert(v.clone()),
                Term::App(_, args) => args.iter().all(|a| walk(a, seen)),
            }
        }
        walk(self, &mut BTreeSet::new())
    }

    pub fn is_ground(&self) -> bool {
        match self {
            Term::Var(_) => false,
            Term::App(_, args) => args.iter().all(Term::is_ground),
        }
    }

    pub fn size(&self) -> usize {
        match self {
            Term::Var(_) => 1,
            Term::App(_, args) => 1 + args.iter().map(Term::size).sum::<usize>(),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Term::Var(_) => 1,
            Term::App(_, args) => 1 + args.iter().map(Term::depth).max().unwrap_or(0),
        }
    }
}

/// A position: a 1-indexed path of argument indices; the empty path is the
/// root ε.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Position(pub Vec<usize>);

impl Position {
    pub fn root() -> Position {
        Position(Vec::new())
    }

    pub fn is_root(&self) -> bool {
        self.0.is_empty()
    }

    pub fn child(&self, i: usize) -> Position {
        let mut p = self.0.clone();
        p.push(i);
        Position(p)
    }
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("ε");
        }
        let parts: Vec<String> = self.0.iter().map(|i| i.to_string()).collect();
        write!(f, "[{}]", parts.join(","))
    }
}

/// A finite, sort-preserving substitution. Identity bindings are never
/// stored, so the key set is exactly the domain.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Subst {
    map: BTreeMap<Var, Term>,
}

impl Subst {
    pub fn new() -> Subst {
        Subst::default()
    }

    pub fn bind(&mut self, v: Var, t: Term) -> Result<(), TermError> {
        let found = t.sort();
        if found != v.sort {
            let expected = v.sort.clone();
            return Err(TermError::IllSortedBinding { var: v, expected, found });
        }
        if Term::Var(v.clone()) != t {
            self.map.insert(v, t);
        }
        Ok(())
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (Var, Term)>) -> Result<Subst, TermError> {
        let mut s = Subst::new();
        for (v, t) in pairs {
            s.bind(v, t)?;
        }
        Ok(s)
    }

    pub fn get(&self, v: &Var) -> Option<&Term> {
        self.map.get(v)
    }

    pub fn domain(&self) -> impl Iterator<Item = &Var> {
        self.map.keys()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Var, &Term)> {
        self.map.iter()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    /// Homomorphic application.
    pub fn apply(&self, t: &Term) -> Term {
        match t {
            Term::Var(v) => self.map.get(v).cloned().unwrap_or_else(|| t.clone()),
            Term::App(f, args) => {
                Term::App(f.clone(), args.iter().map(|a| self.apply(a)).collect())
            }
        }
    }

    /// Variables of the domain that are mapped to value constants.
    pub fn value_domain(&self) -> BTreeSet<Var> {
        self.map
            .iter()
            .filter(|(_, t)| t.is_value())
            .map(|(v, _)| v.clone())
            .collect()
    }

    /// True if this substitution is a variable-to-variable renaming.
    pub fn is_renaming(&self) -> bool {
        let mut range = BTreeSet::new();
        self.map.values().all(|t| match t {
            Term::Var(v) => range.insert(v.clone()),
            _ => false,
        })
    }

    /// Inverts a renaming.
    pub fn invert_renaming(&self) -> Option<Subst> {
        let mut inv = Subst::new();
        for (v, t) in &self.map {
            match t {
                Term::Var(w) => {
                    if inv.map.insert(w.clone(), Term::Var(v.clone())).is_some() {
                        return None;
                    }
                }
                _ => return None,
            }
        }
        Some(inv)
    }
}

impl fmt::Display for Subst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, (v, t)) in self.map.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{v} -> {t}")?;
        }
        f.write_str("}")
    }
}

/// Matches a linear pattern against a subject. Returns the unique matcher
/// with domain inside `Var(pattern)` when one exists.
pub fn match_left_linear(pattern: &Term, subject: &Term) -> Result<Option<Subst>, TermError> {
    if !pattern.is_linear() {
        let mut seen = BTreeSet::new();
        for v in flat_vars(pattern) {
            if !seen.insert(v.clone()) {
                return Err(TermError::NonLinearPattern(v));
            }
        }
        unreachable!("non-linear pattern must repeat a variable");
    }
    let mut out = Subst::new();
    if match_into(pattern, subject, &mut out) {
        Ok(Some(out))
    } else {
        Ok(None)
    }
}

fn flat_vars(t: &Term) -> Vec<Var> {
    let mut out = Vec::new();
    fn walk(t: &Term, out: &mut Vec<Var>) {
        match t {
            Term::Var(v) => out.push(v.clone()),
            Term::App(_, args) => args.iter().for_each(|a| walk(a, out)),
        }
    }
    walk(t, &mut out);
    out
}

fn match_into(pattern: &Term, subject: &Term, out: &mut Subst) -> bool {
    match pattern {
        Term::Var(v) => {
            if v.sort != subject.sort() {
                return false;
            }
            // Linear pattern: the variable is unseen, record the binding.
            out.bind(v.clone(), subject.clone()).is_ok()
        }
        Term::App(f, args) => match subject {
            Term::App(g, sargs) if f == g => {
                args.iter().zip(sargs).all(|(p, s)| match_into(p, s, out))
            }
            _ => false,
        },
    }
}

fn split_fresh_base(name: &str) -> &str {
    match name.rsplit_once('#') {
        Some((base, idx)) if !idx.is_empty() && idx.bytes().all(|b| b.is_ascii_digit()) => base,
        _ => name,
    }
}

/// Renames every variable in `targets` to a fresh variant whose name is
/// `base#k` for the least `k >= 1` not colliding with `avoid`, `targets`,
/// or names allocated earlier in the same call. Deterministic.
pub fn fresh_rename(avoid: &BTreeSet<Var>, targets: &BTreeSet<Var>) -> Subst {
    let mut used: BTreeSet<String> = avoid.iter().map(|v| v.name.clone()).collect();
    used.extend(targets.iter().map(|v| v.name.clone()));
    let mut out = Subst::new();
    for v in targets {
        let base = split_fresh_base(&v.name).to_string();
        let mut k = 1usize;
        let name = loop {
            let candidate = format!("{base}#{k}");
            if !used.contains(&candidate) {
                break candidate;
            }
            k += 1;
        };
        used.insert(name.clone());
        let fresh = Var::new(&name, v.sort.clone());
        out.map.insert(v.clone(), Term::Var(fresh));
    }
    out
}

/// Plain syntactic matching with consistency checks; the pattern may be
/// non-linear. Consistency is tracked over explicit bindings, including
/// identity ones, before they are folded into the substitution.
pub fn match_term(pattern: &Term, subject: &Term) -> Option<Subst> {
    fn go(pattern: &Term, subject: &Term, out: &mut BTreeMap<Var, Term>) -> bool {
        match pattern {
            Term::Var(v) => {
                if v.sort != subject.sort() {
                    return false;
                }
                match out.get(v) {
                    Some(prev) => prev == subject,
                    None => {
                        out.insert(v.clone(), subject.clone());
                        true
                    }
                }
            }
            Term::App(f, args) => match subject {
                Term::App(g, sargs) if f == g => {
                    args.iter().zip(sargs).all(|(p, s)| go(p, s, out))
                }
                _ => false,
            },
        }
    }
    let mut explicit: BTreeMap<Var, Term> = BTreeMap::new();
    if !go(pattern, subject, &mut explicit) {
        return None;
    }
    let mut out = Subst::new();
    for (v, t) in explicit {
        if out.bind(v, t).is_err() {
            return None;
        }
    }
    Some(out)
}

/// Syntactic unification. Returns the unifier when the terms have a
/// common instance; terms here are small, so the quadratic composition is
/// fine.
pub fn unify(a: &Term, b: &Term) -> Option<Subst> {
    let mut out = Subst::new();
    let mut work = vec![(a.clone(), b.clone())];
    while let Some((s, t)) = work.pop() {
        let s = out.apply(&s);
        let t = out.apply(&t);
        if s == t {
            continue;
        }
        match (s, t) {
            (Term::Var(v), other) | (other, Term::Var(v)) => {
                if v.sort != other.sort() || other.vars().contains(&v) {
                    return None;
                }
                let mut single = Subst::new();
                single.bind(v.clone(), other.clone()).ok()?;
                let mut composed = Subst::new();
                for (w, u) in out.iter() {
                    composed.bind(w.clone(), single.apply(u)).ok()?;
                }
                composed.bind(v, other).ok()?;
                out = composed;
            }
            (Term::App(f, fa), Term::App(g, ga)) => {
                if f != g {
                    return None;
                }
                work.extend(fa.into_iter().zip(ga));
            }
        }
    }
    Some(out)
}
