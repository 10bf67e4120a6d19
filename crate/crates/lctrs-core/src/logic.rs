//! Models, valuations, constraint evaluation, and the satisfiability /
//! validity services that gate rewrite steps.
//!
//! Two theory modes are supported. `IntMod m` interprets the integer sort
//! as Z_m with representatives `0..m-1` and wraparound arithmetic; every
//! query is decided exactly by enumeration. `Int` is unbounded; queries go
//! to an SMT process (see [`crate::smt`]) or, without one, to a bounded
//! window search that only ever certifies existential conclusions.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::term::{fresh_rename, FunSym, Kind, Sort, Subst, Term, Value, Var};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TheoryMode {
    IntMod(u32),
    Int,
}

/// The model: interpretation of the theory sorts and symbols.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TheoryModel {
    pub mode: TheoryMode,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LogicError {
    #[error("term symbol {0} in a constraint or theory expression")]
    NonTheoryTerm(String),
    #[error("variable {0} has no assigned value")]
    UnboundVariable(Var),
    #[error("integer overflow during evaluation")]
    Overflow,
    #[error("expected a {expected}-sorted operand for {symbol}")]
    IllSorted { symbol: String, expected: &'static str },
    #[error("free variable {0} is mapped to a non-value")]
    NotValued(Var),
    #[error("sort {0} has no finite carrier in this mode")]
    InfiniteCarrier(Sort),
    #[error("solver returned unknown: {0}")]
    SolverUnknown(String),
    #[error("backend failure: {0}")]
    BackendFailure(String),
}

impl TheoryModel {
    pub fn int_mod(m: u32) -> TheoryModel {
        assert!(m >= 1, "modulus must be positive");
        TheoryModel { mode: TheoryMode::IntMod(m) }
    }

    pub fn unbounded() -> TheoryModel {
        TheoryModel { mode: TheoryMode::Int }
    }

    pub fn is_finite(&self) -> bool {
        matches!(self.mode, TheoryMode::IntMod(_))
    }

    /// Maps an integer onto its canonical carrier element.
    pub fn normalize(&self, v: Value) -> Value {
        match (v, self.mode) {
            (Value::Int(n), TheoryMode::IntMod(m)) => Value::Int(n.rem_euclid(m as i64)),
            _ => v,
        }
    }

    pub fn value_of(&self, f: &FunSym) -> Option<Value> {
        f.value_payload().map(|v| self.normalize(v))
    }

    /// The value constant denoting a carrier element.
    pub fn value_sym(&self, v: Value) -> FunSym {
        FunSym::value(self.normalize(v))
    }

    pub fn value_term(&self, v: Value) -> Term {
        Term::value(self.normalize(v))
    }

    /// The carrier of a theory sort, when finite in this mode.
    pub fn carrier(&self, sort: &Sort) -> Option<Vec<Value>> {
        if *sort == Sort::bool() {
            return Some(vec![Value::Bool(false), Value::Bool(true)]);
        }
        if *sort == Sort::int() {
            return match self.mode {
                TheoryMode::IntMod(m) => {
                    Some((0..m as i64).map(Value::Int).collect())
                }
                TheoryMode::Int => None,
            };
        }
        None
    }

    fn arith(&self, n: i64) -> Result<Value, LogicError> {
        Ok(self.normalize(Value::Int(n)))
    }

    fn apply_symbol(&self, f: &FunSym, args: &[Value]) -> Result<Value, LogicError> {
        let int = |i: usize| -> Result<i64, LogicError> {
            args[i].as_int().ok_or(LogicError::IllSorted { symbol: f.name().into(), expected: "Int" })
        };
        let boole = |i: usize| -> Result<bool, LogicError> {
            args[i].as_bool().ok_or(LogicError::IllSorted { symbol: f.name().into(), expected: "Bool" })
        };
        match (f.name(), f.arity()) {
            ("+", 2) => self.arith(int(0)?.checked_add(int(1)?).ok_or(LogicError::Overflow)?),
            ("-", 2) => self.arith(int(0)?.checked_sub(int(1)?).ok_or(LogicError::Overflow)?),
            ("*", 2) => self.arith(int(0)?.checked_mul(int(1)?).ok_or(LogicError::Overflow)?),
            ("-", 1) => self.arith(int(0)?.checked_neg().ok_or(LogicError::Overflow)?),
            (">=", 2) => Ok(Value::Bool(int(0)? >= int(1)?)),
            ("<=", 2) => Ok(Value::Bool(int(0)? <= int(1)?)),
            (">", 2) => Ok(Value::Bool(int(0)? > int(1)?)),
            ("<", 2) => Ok(Value::Bool(int(0)? < int(1)?)),
            ("=", 2) => Ok(Value::Bool(args[0] == args[1])),
            ("/\\", 2) => Ok(Value::Bool(boole(0)? && boole(1)?)),
            ("\\/", 2) => Ok(Value::Bool(boole(0)? || boole(1)?)),
            ("=>", 2) => Ok(Value::Bool(!boole(0)? || boole(1)?)),
            ("<=>", 2) => Ok(Value::Bool(boole(0)? == boole(1)?)),
            ("not", 1) => Ok(Value::Bool(!boole(0)?)),
            _ => Err(LogicError::NonTheoryTerm(f.name().into())),
        }
    }

    /// Homomorphic evaluation of a theory term under a valuation.
    pub fn evaluate(&self, t: &Term, rho: &Valuation) -> Result<Value, LogicError> {
        match t {
            Term::Var(v) => rho
                .get(v)
                .map(|val| self.normalize(val))
                .ok_or_else(|| LogicError::UnboundVariable(v.clone())),
            Term::App(f, args) => {
                if let Some(v) = self.value_of(f) {
                    return Ok(v);
                }
                if f.kind() != Kind::Theory {
                    return Err(LogicError::NonTheoryTerm(f.name().into()));
                }
                let mut vals = Vec::with_capacity(args.len());
                for a in args {
                    vals.push(self.evaluate(a, rho)?);
                }
                self.apply_symbol(f, &vals)
            }
        }
    }
}

/// A finite assignment of carrier elements to theory-sorted variables.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Valuation {
    map: BTreeMap<Var, Value>,
}

impl Valuation {
    pub fn new() -> Valuation {
        Valuation::default()
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (Var, Value)>) -> Valuation {
        Valuation { map: pairs.into_iter().collect() }
    }

    pub fn get(&self, v: &Var) -> Option<Value> {
        self.map.get(v).copied()
    }

    pub fn set(&mut self, v: Var, val: Value) {
        self.map.insert(v, val);
    }

    pub fn unset(&mut self, v: &Var) {
        self.map.remove(v);
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Var, &Value)> {
        self.map.iter()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn restricted(&self, vars: &BTreeSet<Var>) -> Valuation {
        Valuation {
            map: self.map.iter().filter(|(v, _)| vars.contains(v)).map(|(v, x)| (v.clone(), *x)).collect(),
        }
    }

    /// Turns the assignment into a substitution mapping each variable to
    /// its value constant.
    pub fn as_subst(&self, model: &TheoryModel) -> Subst {
        let mut s = Subst::new();
        for (v, val) in &self.map {
            s.bind(v.clone(), model.value_term(*val)).expect("value terms are well-sorted");
        }
        s
    }
}

impl fmt::Display for Valuation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, (v, val)) in self.map.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{v} -> {val}")?;
        }
        f.write_str("}")
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ConstraintViolation {
    #[error("binder {0} repeats")]
    DuplicateBinder(Var),
    #[error("binder {0} does not occur in the body")]
    UnusedBinder(Var),
    #[error("constraint body has sort {0}, expected Bool")]
    NonBooleanBody(Sort),
    #[error("constraint body contains the term symbol {0}")]
    NonTheoryBody(String),
    #[error("binder {0} does not have a theory sort")]
    NonTheoryBinder(Var),
}

/// An existential constraint `∃ x⃗. φ` with every binder occurring in φ.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExConstraint {
    pub binders: Vec<Var>,
    pub body: Term,
}

impl ExConstraint {
    pub fn new(binders: Vec<Var>, body: Term) -> ExConstraint {
        ExConstraint { binders, body }
    }

    /// A constraint with no binders.
    pub fn plain(body: Term) -> ExConstraint {
        ExConstraint { binders: Vec::new(), body }
    }

    pub fn top() -> ExConstraint {
        ExConstraint::plain(Term::value(Value::Bool(true)))
    }

    pub fn bound_vars(&self) -> BTreeSet<Var> {
        self.binders.iter().cloned().collect()
    }

    pub fn free_vars(&self) -> BTreeSet<Var> {
        let bound = self.bound_vars();
        self.body.vars().difference(&bound).cloned().collect()
    }

    pub fn validate(&self) -> Result<(), ConstraintViolation> {
        let mut seen = BTreeSet::new();
        let body_vars = self.body.vars();
        for b in &self.binders {
            if !seen.insert(b.clone()) {
                return Err(ConstraintViolation::DuplicateBinder(b.clone()));
            }
            if !body_vars.contains(b) {
                return Err(ConstraintViolation::UnusedBinder(b.clone()));
            }
            if !b.sort.is_theory() {
                return Err(ConstraintViolation::NonTheoryBinder(b.clone()));
            }
        }
        if !self.body.is_theory_term() {
            let sym = first_term_symbol(&self.body).expect("non-theory body names a symbol");
            return Err(ConstraintViolation::NonTheoryBody(sym));
        }
        let sort = self.body.sort();
        if sort != Sort::bool() {
            return Err(ConstraintViolation::NonBooleanBody(sort));
        }
        Ok(())
    }

    /// Applies a substitution to the body. The caller must ensure binders
    /// are disjoint from the domain and range variables; redex and conjoin
    /// constructions guarantee this via fresh variants.
    pub fn subst_body(&self, s: &Subst) -> ExConstraint {
        ExConstraint { binders: self.binders.clone(), body: s.apply(&self.body) }
    }
}

fn first_term_symbol(t: &Term) -> Option<String> {
    match t {
        Term::Var(_) => None,
        Term::App(f, args) => {
            if f.kind() == Kind::Term {
                return Some(f.name().into());
            }
            args.iter().find_map(first_term_symbol)
        }
    }
}

impl fmt::Display for ExConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if !self.binders.is_empty() {
            f.write_str("∃")?;
            for (i, b) in self.binders.iter().enumerate() {
                if i > 0 {
                    f.write_str(", ")?;
                }
                write!(f, "{b}")?;
            }
            f.write_str(". ")?;
        }
        write!(f, "{}", self.body)
    }
}

/// Builds the conjunction `a /\ b`.
pub fn and(a: Term, b: Term) -> Term {
    let sym = FunSym::new("/\\", vec![Sort::bool(), Sort::bool()], Sort::bool(), Kind::Theory);
    Term::App(sym, vec![a, b])
}

/// Prenex normal form of the conjunction of two existential constraints:
/// `∃ x⃗, z⃗. φ ∧ ψ`, with clashing binders renamed first.
pub fn prenex_conjoin(a: &ExConstraint, b: &ExConstraint) -> ExConstraint {
    let mut avoid: BTreeSet<Var> = a.body.vars();
    avoid.extend(a.binders.iter().cloned());
    avoid.extend(b.body.vars());
    avoid.extend(b.binders.iter().cloned());

    // Rename b's binders clashing with anything in a, then a's binders
    // clashing with b's free variables.
    let clash_b: BTreeSet<Var> = b
        .bound_vars()
        .into_iter()
        .filter(|v| a.bound_vars().contains(v) || a.free_vars().contains(v))
        .collect();
    let ren_b = fresh_rename(&avoid, &clash_b);
    let b_binders: Vec<Var> = b
        .binders
        .iter()
        .map(|v| match ren_b.get(v) {
            Some(Term::Var(w)) => w.clone(),
            _ => v.clone(),
        })
        .collect();
    let b_body = ren_b.apply(&b.body);

    avoid.extend(b_binders.iter().cloned());
    let clash_a: BTreeSet<Var> = a
        .bound_vars()
        .into_iter()
        .filter(|v| b.free_vars().contains(v))
        .collect();
    let ren_a = fresh_rename(&avoid, &clash_a);
    let a_binders: Vec<Var> = a
        .binders
        .iter()
        .map(|v| match ren_a.get(v) {
            Some(Term::Var(w)) => w.clone(),
            _ => v.clone(),
        })
        .collect();
    let a_body = ren_a.apply(&a.body);

    let mut binders = a_binders;
    binders.extend(b_binders);
    ExConstraint { binders, body: and(a_body, b_body) }
}

/// Splits nested conjunctions into their conjuncts.
pub fn conjuncts(t: &Term) -> Vec<&Term> {
    let mut out = Vec::new();
    fn walk<'a>(t: &'a Term, out: &mut Vec<&'a Term>) {
        match t {
            Term::App(f, args) if f.name() == "/\\" && f.arity() == 2 => {
                walk(&args[0], out);
                walk(&args[1], out);
            }
            _ => out.push(t),
        }
    }
    walk(t, &mut out);
    out
}

/// Backtracking search for an assignment of `order` (appended to `fixed`)
/// that satisfies every atom; atoms are checked as soon as all their
/// variables are assigned, pruning dead branches early. Deterministic:
/// domains are scanned in the given order.
pub(crate) fn search_assignment(
    atoms: &[&Term],
    order: &[Var],
    fixed: &Valuation,
    model: &TheoryModel,
    int_domain: &[Value],
) -> Result<Option<Valuation>, LogicError> {
    let order_index: BTreeMap<&Var, usize> = order.iter().enumerate().map(|(i, v)| (v, i)).collect();
    // For each atom, the search depth at which it becomes fully assigned.
    let mut ready: Vec<Vec<usize>> = vec![Vec::new(); order.len() + 1];
    for (ai, atom) in atoms.iter().enumerate() {
        let mut depth = 0usize;
        for v in atom.vars() {
            match order_index.get(&v) {
                Some(i) => depth = depth.max(i + 1),
                None => {
                    if fixed.get(&v).is_none() {
                        return Err(LogicError::UnboundVariable(v));
                    }
                }
            }
        }
        ready[depth].push(ai);
    }

    let mut assign = fixed.clone();
    for &ai in &ready[0] {
        match model.evaluate(atoms[ai], &assign)? {
            Value::Bool(true) => {}
            Value::Bool(false) => return Ok(None),
            _ => return Err(LogicError::IllSorted { symbol: "constraint".into(), expected: "Bool" }),
        }
    }

    fn domain_of(model: &TheoryModel, sort: &Sort, int_domain: &[Value]) -> Result<Vec<Value>, LogicError> {
        if *sort == Sort::bool() {
            return Ok(vec![Value::Bool(false), Value::Bool(true)]);
        }
        if *sort == Sort::int() {
            if int_domain.is_empty() {
                return Err(LogicError::InfiniteCarrier(sort.clone()));
            }
            return Ok(int_domain.to_vec());
        }
        let _ = model;
        Err(LogicError::InfiniteCarrier(sort.clone()))
    }

    fn go(
        depth: usize,
        atoms: &[&Term],
        order: &[Var],
        ready: &[Vec<usize>],
        assign: &mut Valuation,
        model: &TheoryModel,
        int_domain: &[Value],
    ) -> Result<bool, LogicError> {
        if depth == order.len() {
            return Ok(true);
        }
        let var = &order[depth];
        for val in domain_of(model, &var.sort, int_domain)? {
            assign.set(var.clone(), val);
            let mut ok = true;
            for &ai in &ready[depth + 1] {
                match model.evaluate(atoms[ai], assign)? {
                    Value::Bool(true) => {}
                    Value::Bool(false) => {
                        ok = false;
                        break;
                    }
                    _ => {
                        return Err(LogicError::IllSorted { symbol: "constraint".into(), expected: "Bool" })
                    }
                }
            }
            if ok && go(depth + 1, atoms, order, ready, assign, model, int_domain)? {
                return Ok(true);
            }
            assign.unset(var);
        }
        Ok(false)
    }

    if go(0, atoms, order, &ready, &mut assign, model, int_domain)? {
        let out = Valuation::from_pairs(
            order.iter().map(|v| (v.clone(), assign.get(v).expect("assigned"))),
        );
        Ok(Some(out))
    } else {
        Ok(None)
    }
}

/// Visits every assignment of `prefix` for which the pruning atoms admit
/// some completion of `suffix`, in lexicographic order. Atoms prune a
/// branch as soon as all their variables are assigned. The visitor
/// receives the prefix projection and returns `false` to stop early.
pub(crate) fn for_each_prefix_solution(
    atoms: &[&Term],
    prefix: &[Var],
    suffix: &[Var],
    fixed: &Valuation,
    model: &TheoryModel,
    int_domain: &[Value],
    visit: &mut dyn FnMut(&Valuation) -> Result<bool, LogicError>,
) -> Result<(), LogicError> {
    let order_index: BTreeMap<&Var, usize> =
        prefix.iter().chain(suffix).enumerate().map(|(i, v)| (v, i)).collect();
    let total = prefix.len() + suffix.len();
    let mut ready: Vec<Vec<usize>> = vec![Vec::new(); total + 1];
    for (ai, atom) in atoms.iter().enumerate() {
        let mut depth = 0usize;
        for v in atom.vars() {
            match order_index.get(&v) {
                Some(i) => depth = depth.max(i + 1),
                None => {
                    if fixed.get(&v).is_none() {
                        return Err(LogicError::UnboundVariable(v));
                    }
                }
            }
        }
        ready[depth].push(ai);
    }

    fn domain_of(sort: &Sort, int_domain: &[Value]) -> Result<Vec<Value>, LogicError> {
        if *sort == Sort::bool() {
            Ok(vec![Value::Bool(false), Value::Bool(true)])
        } else if *sort == Sort::int() {
            if int_domain.is_empty() {
                Err(LogicError::InfiniteCarrier(sort.clone()))
            } else {
                Ok(int_domain.to_vec())
            }
        } else {
            Err(LogicError::InfiniteCarrier(sort.clone()))
        }
    }

    fn check_ready(
        depth: usize,
        atoms: &[&Term],
        ready: &[Vec<usize>],
        assign: &Valuation,
        model: &TheoryModel,
    ) -> Result<bool, LogicError> {
        for &ai in &ready[depth] {
            match model.evaluate(atoms[ai], assign)? {
                Value::Bool(true) => {}
                Value::Bool(false) => return Ok(false),
                _ => {
                    return Err(LogicError::IllSorted {
                        symbol: "constraint".into(),
                        expected: "Bool",
                    })
                }
            }
        }
        Ok(true)
    }

    struct Ctx<'a> {
        atoms: &'a [&'a Term],
        prefix: &'a [Var],
        suffix: &'a [Var],
        ready: &'a [Vec<usize>],
        model: &'a TheoryModel,
        int_domain: &'a [Value],
    }

    // Exhaustive over the prefix, witness-only over the suffix. Returns
    // false when the visitor asked to stop.
    fn walk_prefix(
        ctx: &Ctx<'_>,
        depth: usize,
        assign: &mut Valuation,
        visit: &mut dyn FnMut(&Valuation) -> Result<bool, LogicError>,
    ) -> Result<bool, LogicError> {
        if depth == ctx.prefix.len() {
            if walk_suffix(ctx, 0, assign)? {
                let projection = Valuation::from_pairs(
                    ctx.prefix.iter().map(|v| (v.clone(), assign.get(v).expect("assigned"))),
                );
                return visit(&projection);
            }
            return Ok(true);
        }
        let var = &ctx.prefix[depth];
        for val in domain_of(&var.sort, ctx.int_domain)? {
            assign.set(var.clone(), val);
            if check_ready(depth + 1, ctx.atoms, ctx.ready, assign, ctx.model)?
                && !walk_prefix(ctx, depth + 1, assign, visit)?
            {
                return Ok(false);
            }
            assign.unset(var);
        }
        Ok(true)
    }

    fn walk_suffix(ctx: &Ctx<'_>, depth: usize, assign: &mut Valuation) -> Result<bool, LogicError> {
        if depth == ctx.suffix.len() {
            return Ok(true);
        }
        let var = &ctx.suffix[depth];
        let order_depth = ctx.prefix.len() + depth + 1;
        for val in domain_of(&var.sort, ctx.int_domain)? {
            assign.set(var.clone(), val);
            if check_ready(order_depth, ctx.atoms, ctx.ready, assign, ctx.model)?
                && walk_suffix(ctx, depth + 1, assign)?
            {
                assign.unset(var);
                return Ok(true);
            }
            assign.unset(var);
        }
        Ok(false)
    }

    let ctx = Ctx { atoms, prefix, suffix, ready: &ready, model, int_domain };
    let mut assign = fixed.clone();
    if !check_ready(0, atoms, &ready, &assign, model)? {
        return Ok(());
    }
    walk_prefix(&ctx, 0, &mut assign, visit)?;
    Ok(())
}

/// Decides `⊨_{M,ρ} ∃x⃗.φ` over the given integer domain slice. In a
/// finite model pass the full carrier for exactness; in window mode a
/// `false` only means "no witness in the window".
pub fn holds_with_domain(
    ec: &ExConstraint,
    rho: &Valuation,
    model: &TheoryModel,
    int_domain: &[Value],
) -> Result<bool, LogicError> {
    for v in ec.free_vars() {
        if rho.get(&v).is_none() {
            return Err(LogicError::UnboundVariable(v));
        }
    }
    let atoms = conjuncts(&ec.body);
    let found = search_assignment(&atoms, &ec.binders, rho, model, int_domain)?;
    Ok(found.is_some())
}

/// Exact `holds` over a finite model.
pub fn holds(ec: &ExConstraint, rho: &Valuation, model: &TheoryModel) -> Result<bool, LogicError> {
    let ints = model.carrier(&Sort::int()).ok_or(LogicError::InfiniteCarrier(Sort::int()))?;
    holds_with_domain(ec, rho, model, &ints)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SolverVerdict {
    Sat(Valuation),
    Unsat,
    Unknown(String),
}

impl SolverVerdict {
    pub fn is_sat(&self) -> bool {
        matches!(self, SolverVerdict::Sat(_))
    }

    pub fn is_unsat(&self) -> bool {
        matches!(self, SolverVerdict::Unsat)
    }

    pub fn is_unknown(&self) -> bool {
        matches!(self, SolverVerdict::Unknown(_))
    }
}

impl fmt::Display for SolverVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SolverVerdict::Sat(w) => write!(f, "sat {w}"),
            SolverVerdict::Unsat => f.write_str("unsat"),
            SolverVerdict::Unknown(r) => write!(f, "unknown ({r})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ValidityVerdict {
    Valid,
    /// A countervaluation witnessing non-validity.
    NotValid(Valuation),
    Unknown(String),
}

impl ValidityVerdict {
    pub fn is_valid(&self) -> bool {
        matches!(self, ValidityVerdict::Valid)
    }

    pub fn is_unknown(&self) -> bool {
        matches!(self, ValidityVerdict::Unknown(_))
    }
}

impl fmt::Display for ValidityVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ValidityVerdict::Valid => f.write_str("valid"),
            ValidityVerdict::NotValid(w) => write!(f, "not valid, witness {w}"),
            ValidityVerdict::Unknown(r) => write!(f, "unknown ({r})"),
        }
    }
}

/// The satisfiability / validity service used to gate rewrite steps.
/// Handles require serialized access; spawn one per worker for parallel
/// exploration.
pub trait ConstraintBackend {
    fn model(&self) -> &TheoryModel;

    fn describe(&self) -> String;

    /// Satisfiability of `∃x⃗.φ` over the free variables; `Sat` carries a
    /// witness valuation of the free variables.
    fn check_sat(&mut self, ec: &ExConstraint) -> Result<SolverVerdict, LogicError>;

    /// Validity of `(∃x⃗.φ) ⇒ (∃z⃗.ψ)` under universal closure of the free
    /// variables; `NotValid` carries a countervaluation.
    fn check_valid_implication(
        &mut self,
        lhs: &ExConstraint,
        rhs: &ExConstraint,
    ) -> Result<ValidityVerdict, LogicError>;

    /// `⊨_{M,ρ} ∃x⃗.φ` for a valuation of the free variables.
    fn holds(&mut self, ec: &ExConstraint, rho: &Valuation) -> Result<bool, LogicError>;
}

/// Whether `γ` respects the constraint: it maps every free variable to a
/// value constant and the instantiated constraint holds.
pub fn respects(
    gamma: &Subst,
    ec: &ExConstraint,
    backend: &mut dyn ConstraintBackend,
) -> Result<SolverVerdict, LogicError> {
    let model = *backend.model();
    let mut rho = Valuation::new();
    for v in ec.free_vars() {
        match gamma.get(&v) {
            Some(t) => match t.as_value() {
                Some(val) => rho.set(v, model.normalize(val)),
                None => return Err(LogicError::NotValued(v)),
            },
            // Unbound in γ means γ(v) = v, a variable, not a value.
            None => return Err(LogicError::NotValued(v)),
        }
    }
    match backend.holds(ec, &rho) {
        Ok(true) => Ok(SolverVerdict::Sat(rho)),
        Ok(false) => Ok(SolverVerdict::Unsat),
        Err(LogicError::SolverUnknown(r)) => Ok(SolverVerdict::Unknown(r)),
        Err(e) => Err(e),
    }
}

/// Complete decision procedure over a finite model, by enumeration with
/// conjunct pruning. Never returns `Unknown`.
#[derive(Debug, Clone)]
pub struct EnumBackend {
    model: TheoryModel,
    ints: Vec<Value>,
}

impl EnumBackend {
    pub fn new(modulus: u32) -> EnumBackend {
        let model = TheoryModel::int_mod(modulus);
        let ints = model.carrier(&Sort::int()).expect("finite carrier");
        EnumBackend { model, ints }
    }
}

impl ConstraintBackend for EnumBackend {
    fn model(&self) -> &TheoryModel {
        &self.model
    }

    fn describe(&self) -> String {
        match self.model.mode {
            TheoryMode::IntMod(m) => format!("enumeration over IntMod {m}"),
            TheoryMode::Int => "enumeration".into(),
        }
    }

    fn check_sat(&mut self, ec: &ExConstraint) -> Result<SolverVerdict, LogicError> {
        let free: Vec<Var> = ec.free_vars().into_iter().collect();
        let mut order = free.clone();
        order.extend(ec.binders.iter().cloned());
        let atoms = conjuncts(&ec.body);
        match search_assignment(&atoms, &order, &Valuation::new(), &self.model, &self.ints)? {
            Some(assign) => Ok(SolverVerdict::Sat(assign.restricted(&free.into_iter().collect()))),
            None => Ok(SolverVerdict::Unsat),
        }
    }

    fn check_valid_implication(
        &mut self,
        lhs: &ExConstraint,
        rhs: &ExConstraint,
    ) -> Result<ValidityVerdict, LogicError> {
        let mut free: BTreeSet<Var> = lhs.free_vars();
        free.extend(rhs.free_vars());
        let free: Vec<Var> = free.into_iter().collect();
        // Enumerate exactly the valuations where the left side holds,
        // pruning with its conjuncts, and refute the right side there.
        let atoms = conjuncts(&lhs.body);
        let model = self.model;
        let ints = self.ints.clone();
        let mut counterexample: Option<Valuation> = None;
        for_each_prefix_solution(
            &atoms,
            &free,
            &lhs.binders,
            &Valuation::new(),
            &model,
            &ints,
            &mut |rho| {
                if holds_with_domain(rhs, rho, &model, &ints)? {
                    Ok(true)
                } else {
                    counterexample = Some(rho.clone());
                    Ok(false)
                }
            },
        )?;
        match counterexample {
            Some(rho) => Ok(ValidityVerdict::NotValid(rho)),
            None => Ok(ValidityVerdict::Valid),
        }
    }

    fn holds(&mut self, ec: &ExConstraint, rho: &Valuation) -> Result<bool, LogicError> {
        holds_with_domain(ec, rho, &self.model, &self.ints)
    }
}

/// Bounded witness search over unbounded integers. Sound but incomplete:
/// it certifies satisfiability (a witness evaluates true) and non-validity
/// (a countervaluation with a quantifier-free right-hand side), and
/// returns `Unknown` for everything else.
#[derive(Debug, Clone)]
pub struct IntSearchBackend {
    model: TheoryModel,
    window: Vec<Value>,
    lo: i64,
    hi: i64,
}

impl IntSearchBackend {
    pub fn new(lo: i64, hi: i64) -> IntSearchBackend {
        assert!(lo <= hi);
        IntSearchBackend {
            model: TheoryModel::unbounded(),
            window: (lo..=hi).map(Value::Int).collect(),
            lo,
            hi,
        }
    }
}

impl ConstraintBackend for IntSearchBackend {
    fn model(&self) -> &TheoryModel {
        &self.model
    }

    fn describe(&self) -> String {
        format!("witness search over Int window {}..{}", self.lo, self.hi)
    }

    fn check_sat(&mut self, ec: &ExConstraint) -> Result<SolverVerdict, LogicError> {
        let free: Vec<Var> = ec.free_vars().into_iter().collect();
        let mut order = free.clone();
        order.extend(ec.binders.iter().cloned());
        let atoms = conjuncts(&ec.body);
        match search_assignment(&atoms, &order, &Valuation::new(), &self.model, &self.window)? {
            Some(assign) => Ok(SolverVerdict::Sat(assign.restricted(&free.into_iter().collect()))),
            None => Ok(SolverVerdict::Unknown(format!(
                "no witness within window {}..{}",
                self.lo, self.hi
            ))),
        }
    }

    fn check_valid_implication(
        &mut self,
        lhs: &ExConstraint,
        rhs: &ExConstraint,
    ) -> Result<ValidityVerdict, LogicError> {
        let mut free: BTreeSet<Var> = lhs.free_vars();
        free.extend(rhs.free_vars());
        let free: Vec<Var> = free.into_iter().collect();
        let domains: Vec<Vec<Value>> = free
            .iter()
            .map(|v| {
                if v.sort == Sort::bool() {
                    vec![Value::Bool(false), Value::Bool(true)]
                } else {
                    self.window.clone()
                }
            })
            .collect();
        let mut cursor = vec![0usize; free.len()];
        if free.is_empty() {
            // Closed constraints: a found lhs witness plus a refuted
            // quantifier-free rhs is still a certain refutation.
            let rho = Valuation::new();
            if holds_with_domain(lhs, &rho, &self.model, &self.window)?
                && rhs.binders.is_empty()
                && !holds_with_domain(rhs, &rho, &self.model, &self.window)?
            {
                return Ok(ValidityVerdict::NotValid(rho));
            }
            return Ok(ValidityVerdict::Unknown("cannot certify validity within a window".into()));
        }
        loop {
            let rho = Valuation::from_pairs(
                free.iter().enumerate().map(|(k, v)| (v.clone(), domains[k][cursor[k]])),
            );
            // The lhs must certainly hold (witness found) and the rhs must
            // certainly fail, which a window can only certify without
            // binders on the right.
            if holds_with_domain(lhs, &rho, &self.model, &self.window)?
                && rhs.binders.is_empty()
                && !holds_with_domain(rhs, &rho, &self.model, &self.window)?
            {
                return Ok(ValidityVerdict::NotValid(rho));
            }
            let mut k = free.len();
            loop {
                if k == 0 {
                    return Ok(ValidityVerdict::Unknown(
                        "cannot certify validity within a window".into(),
                    ));
                }
                k -= 1;
                cursor[k] += 1;
                if cursor[k] < domains[k].len() {
                    break;
                }
                cursor[k] = 0;
            }
        }
    }

    fn holds(&mut self, ec: &ExConstraint, rho: &Valuation) -> Result<bool, LogicError> {
        if ec.binders.is_empty() {
            return holds_with_domain(ec, rho, &self.model, &self.window);
        }
        match holds_with_domain(ec, rho, &self.model, &self.window)? {
            true => Ok(true),
            false => Err(LogicError::SolverUnknown(format!(
                "no bound-variable witness within window {}..{}",
                self.lo, self.hi
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signature::Signature;

    fn sig() -> Signature {
        Signature::with_builtins()
    }

    fn app(name: &str, args: Vec<Term>) -> Term {
        let arity = args.len();
        Term::app(sig().lookup(name, arity).unwrap().clone(), args).unwrap()
    }

    fn eq_int(a: Term, b: Term) -> Term {
        let f = sig()
            .lookup_all("=", 2)
            .iter()
            .find(|f| f.arg_sorts()[0] == Sort::int())
            .unwrap()
            .clone();
        Term::app(f, vec![a, b]).unwrap()
    }

    fn int(n: i64) -> Term {
        Term::value(Value::Int(n))
    }

    fn x() -> Var {
        Var::int("x")
    }

    fn y() -> Var {
        Var::int("y")
    }

    fn w() -> Var {
        Var::int("w")
    }

    #[test]
    fn evaluate_examples() {
        let m = TheoryModel::unbounded();
        let rho = Valuation::from_pairs([(x(), Value::Int(1)), (y(), Value::Int(1))]);
        let sum = app("+", vec![Term::Var(x()), Term::Var(y())]);
        assert_eq!(m.evaluate(&sum, &rho).unwrap(), Value::Int(2));
        let geq = app(">=", vec![sum, int(2)]);
        assert_eq!(m.evaluate(&geq, &rho).unwrap(), Value::Bool(true));
        assert_eq!(m.evaluate(&int(5), &Valuation::new()).unwrap(), Value::Int(5));
    }

    #[test]
    fn evaluate_rejects_term_symbols() {
        let mut s = Signature::with_builtins();
        s.declare(FunSym::new("sum", vec![Sort::int()], Sort::int(), Kind::Term)).unwrap();
        let t = Term::app(s.lookup("sum", 1).unwrap().clone(), vec![int(1)]).unwrap();
        let m = TheoryModel::unbounded();
        assert!(matches!(m.evaluate(&t, &Valuation::new()), Err(LogicError::NonTheoryTerm(_))));
    }

    #[test]
    fn modular_arithmetic_wraps() {
        let m = TheoryModel::int_mod(16);
        let t = app("+", vec![int(1), int(15)]);
        assert_eq!(m.evaluate(&t, &Valuation::new()).unwrap(), Value::Int(0));
        assert_eq!(m.evaluate(&int(-1), &Valuation::new()).unwrap(), Value::Int(15));
    }

    #[test]
    fn holds_examples() {
        // ∃w. x + y >= w holds for x = y = 1 (take w = 0, say).
        let m = TheoryModel::int_mod(5);
        let body = app(">=", vec![app("+", vec![Term::Var(x()), Term::Var(y())]), Term::Var(w())]);
        let ec = ExConstraint::new(vec![w()], body);
        let rho = Valuation::from_pairs([(x(), Value::Int(1)), (y(), Value::Int(1))]);
        assert!(holds(&ec, &rho, &m).unwrap());

        // ∃∅. true
        assert!(holds(&ExConstraint::top(), &Valuation::new(), &m).unwrap());
    }

    fn example_34_lhs() -> ExConstraint {
        // ∃w. 1 <= w /\ w <= 5 /\ y = w - 1
        let body = and(
            and(
                app("<=", vec![int(1), Term::Var(w())]),
                app("<=", vec![Term::Var(w()), int(5)]),
            ),
            eq_int(Term::Var(y()), app("-", vec![Term::Var(w()), int(1)])),
        );
        ExConstraint::new(vec![w()], body)
    }

    #[test]
    fn holds_gate_example() {
        // (∃w. 1<=w /\ w<=5 /\ y=w-1) /\ 0 >= y at y = 0.
        let m = TheoryModel::int_mod(16);
        let conj = prenex_conjoin(&example_34_lhs(), &ExConstraint::plain(app(">=", vec![int(0), Term::Var(y())])));
        let rho = Valuation::from_pairs([(y(), Value::Int(0))]);
        assert!(holds(&conj, &rho, &m).unwrap());
    }

    #[test]
    fn check_sat_examples() {
        let mut b = EnumBackend::new(5);
        let body = app(">=", vec![app("+", vec![Term::Var(x()), Term::Var(y())]), int(2)]);
        assert!(b.check_sat(&ExConstraint::plain(body)).unwrap().is_sat());

        let lt = app("<", vec![Term::Var(x()), Term::Var(x())]);
        assert!(b.check_sat(&ExConstraint::plain(lt)).unwrap().is_unsat());

        // Example 3.4 conjunction is satisfiable with witness y = 0.
        let mut b = EnumBackend::new(16);
        let conj = prenex_conjoin(&example_34_lhs(), &ExConstraint::plain(app(">=", vec![int(0), Term::Var(y())])));
        match b.check_sat(&conj).unwrap() {
            SolverVerdict::Sat(wit) => assert_eq!(wit.get(&y()), Some(Value::Int(0))),
            other => panic!("expected sat, got {other}"),
        }
    }

    #[test]
    fn check_valid_implication_examples() {
        let mut b = EnumBackend::new(16);
        // x > 2 => x > 0 is valid on representatives.
        let lhs = ExConstraint::plain(app(">", vec![Term::Var(x()), int(2)]));
        let rhs = ExConstraint::plain(app(">", vec![Term::Var(x()), int(0)]));
        assert!(b.check_valid_implication(&lhs, &rhs).unwrap().is_valid());

        // Example 3.4: not valid, first countervaluation has y = 1.
        let rhs = ExConstraint::plain(app(">=", vec![int(0), Term::Var(y())]));
        match b.check_valid_implication(&example_34_lhs(), &rhs).unwrap() {
            ValidityVerdict::NotValid(wit) => assert_eq!(wit.get(&y()), Some(Value::Int(1))),
            other => panic!("expected not valid, got {other}"),
        }

        // Reflexivity.
        let phi = example_34_lhs();
        assert!(b.check_valid_implication(&phi, &phi).unwrap().is_valid());
    }

    #[test]
    fn respects_examples() {
        let mut b = EnumBackend::new(16);
        let mut sig2 = Signature::with_builtins();
        sig2.declare(FunSym::new("sum", vec![Sort::int()], Sort::int(), Kind::Term)).unwrap();
        let sum_w = Term::app(sig2.lookup("sum", 1).unwrap().clone(), vec![Term::Var(w())]).unwrap();

        // σ = {x -> 1, y -> 1, z -> sum(w)} respects x + y >= 2.
        let gamma = Subst::from_pairs([
            (x(), int(1)),
            (y(), int(1)),
            (Var::int("z"), sum_w.clone()),
        ])
        .unwrap();
        let ec = ExConstraint::plain(app(">=", vec![app("+", vec![Term::Var(x()), Term::Var(y())]), int(2)]));
        assert!(respects(&gamma, &ec, &mut b).unwrap().is_sat());

        // A free variable mapped to a non-value is rejected.
        let gamma = Subst::from_pairs([(x(), sum_w)]).unwrap();
        let ec = ExConstraint::plain(app(">=", vec![Term::Var(x()), int(0)]));
        assert!(matches!(respects(&gamma, &ec, &mut b), Err(LogicError::NotValued(_))));

        // {y -> 0} respects ∃w. 1<=w /\ w<=5 /\ y = w-1.
        let gamma = Subst::from_pairs([(y(), int(0))]).unwrap();
        assert!(respects(&gamma, &example_34_lhs(), &mut b).unwrap().is_sat());
    }

    #[test]
    fn prenex_conjoin_examples() {
        // No binders: plain conjunction.
        let a = ExConstraint::plain(app(">", vec![Term::Var(x()), int(0)]));
        let b = ExConstraint::plain(app("<", vec![Term::Var(x()), int(3)]));
        let c = prenex_conjoin(&a, &b);
        assert!(c.binders.is_empty());
        assert_eq!(c.body, and(a.body.clone(), b.body.clone()));

        // Clashing binders are renamed on the right: ∃x. x=y and ∃x. x=z
        // become ∃x, x#1. x=y /\ x#1=z.
        let a = ExConstraint::new(vec![x()], eq_int(Term::Var(x()), Term::Var(y())));
        let b = ExConstraint::new(vec![x()], eq_int(Term::Var(x()), Term::Var(Var::int("z"))));
        let c = prenex_conjoin(&a, &b);
        assert_eq!(c.binders, vec![x(), Var::int("x#1")]);
        let expected_body = and(
            eq_int(Term::Var(x()), Term::Var(y())),
            eq_int(Term::Var(Var::int("x#1")), Term::Var(Var::int("z"))),
        );
        assert_eq!(c.body, expected_body);
    }

    #[test]
    fn prenex_conjoin_is_equivalent_to_input_conjunction() {
        // Enumerate all valuations of the free variables over IntMod 5 and
        // compare the conjunction of holds with holds of the output.
        let m = TheoryModel::int_mod(5);
        let a = ExConstraint::new(vec![x()], eq_int(Term::Var(x()), Term::Var(y())));
        let b = ExConstraint::new(vec![x()], eq_int(Term::Var(x()), Term::Var(Var::int("z"))));
        let c = prenex_conjoin(&a, &b);
        for yv in 0..5 {
            for zv in 0..5 {
                let rho = Valuation::from_pairs([
                    (y(), Value::Int(yv)),
                    (Var::int("z"), Value::Int(zv)),
                ]);
                let lhs = holds(&a, &rho, &m).unwrap() && holds(&b, &rho, &m).unwrap();
                let rhs = holds(&c, &rho, &m).unwrap();
                assert_eq!(lhs, rhs, "valuation y={yv}, z={zv}");
            }
        }
    }

    #[test]
    fn sat_witnesses_verify() {
        let mut b = EnumBackend::new(7);
        let body = and(
            app("<", vec![Term::Var(x()), Term::Var(y())]),
            app("<", vec![Term::Var(y()), int(3)]),
        );
        let ec = ExConstraint::plain(body);
        match b.check_sat(&ec).unwrap() {
            SolverVerdict::Sat(wit) => {
                assert!(holds(&ec, &wit, &TheoryModel::int_mod(7)).unwrap());
            }
            other => panic!("expected sat, got {other}"),
        }
    }

    #[test]
    fn int_search_backend_is_sound() {
        let mut b = IntSearchBackend::new(-8, 8);
        // Satisfiability with a window witness is definite.
        let body = app(">", vec![Term::Var(x()), int(2)]);
        assert!(b.check_sat(&ExConstraint::plain(body.clone())).unwrap().is_sat());
        // Validity over Z can never be certified by a window.
        let rhs = ExConstraint::plain(app(">", vec![Term::Var(x()), int(0)]));
        assert!(b
            .check_valid_implication(&ExConstraint::plain(body), &rhs)
            .unwrap()
            .is_unknown());
        // Non-validity with a quantifier-free rhs is definite.
        let lhs = ExConstraint::plain(app(">", vec![Term::Var(x()), int(0)]));
        let rhs = ExConstraint::plain(app(">", vec![Term::Var(x()), int(2)]));
        match b.check_valid_implication(&lhs, &rhs).unwrap() {
            ValidityVerdict::NotValid(wit) => {
                // First countervaluation scanning the window upward: x = 1.
                assert_eq!(wit.get(&x()), Some(Value::Int(1)));
            }
            other => panic!("expected not valid, got {other}"),
        }
    }

    #[test]
    fn finite_mode_agrees_with_plain_enumeration() {
        // check_sat against a naive double loop over all assignments.
        let m = TheoryModel::int_mod(4);
        let mut b = EnumBackend::new(4);
        let body = and(
            app("<=", vec![Term::Var(x()), Term::Var(y())]),
            eq_int(app("+", vec![Term::Var(x()), Term::Var(y())]), int(3)),
        );
        let ec = ExConstraint::plain(body.clone());
        let mut expected = false;
        for xv in 0..4 {
            for yv in 0..4 {
                let rho = Valuation::from_pairs([(x(), Value::Int(xv)), (y(), Value::Int(yv))]);
                if m.evaluate(&body, &rho).unwrap() == Value::Bool(true) {
                    expected = true;
                }
            }
        }
        assert_eq!(b.check_sat(&ec).unwrap().is_sat(), expected);
    }

    #[test]
    fn finite_mode_validity_agrees_with_exhaustive_enumeration() {
        // check_valid_implication against the m^k definition, over a
        // family of small formulas; the backend must also never say
        // unknown in finite mode.
        let m = TheoryModel::int_mod(4);
        let mut b = EnumBackend::new(4);
        let pairs = vec![
            // x > 2 => x > 0: valid on representatives.
            (
                ExConstraint::plain(app(">", vec![Term::Var(x()), int(2)])),
                ExConstraint::plain(app(">", vec![Term::Var(x()), int(0)])),
            ),
            // x > 0 => x > 2: refutable.
            (
                ExConstraint::plain(app(">", vec![Term::Var(x()), int(0)])),
                ExConstraint::plain(app(">", vec![Term::Var(x()), int(2)])),
            ),
            // x <= y => ∃w. y = x + w: every gap has a witness mod 4.
            (
                ExConstraint::plain(app("<=", vec![Term::Var(x()), Term::Var(y())])),
                ExConstraint::new(
                    vec![w()],
                    eq_int(Term::Var(y()), app("+", vec![Term::Var(x()), Term::Var(w())])),
                ),
            ),
        ];
        for (lhs, rhs) in pairs {
            let mut free: std::collections::BTreeSet<Var> = lhs.free_vars();
            free.extend(rhs.free_vars());
            let free: Vec<Var> = free.into_iter().collect();
            let mut expected_valid = true;
            let mut counters = vec![0i64; free.len()];
            'outer: loop {
                let rho = Valuation::from_pairs(
                    free.iter().zip(&counters).map(|(v, &n)| (v.clone(), Value::Int(n))),
                );
                if holds(&lhs, &rho, &m).unwrap() && !holds(&rhs, &rho, &m).unwrap() {
                    expected_valid = false;
                    break;
                }
                let mut k = free.len();
                loop {
                    if k == 0 {
                        break 'outer;
                    }
                    k -= 1;
                    counters[k] += 1;
                    if counters[k] < 4 {
                        break;
                    }
                    counters[k] = 0;
                }
            }
            let got = b.check_valid_implication(&lhs, &rhs).unwrap();
            assert!(!got.is_unknown(), "finite mode never returns unknown");
            assert_eq!(got.is_valid(), expected_valid, "{lhs} => {rhs}");
        }
    }

    #[test]
    fn values_are_shareable_across_threads() {
        fn assert_send_sync<T: Send + Sync>() {}
        assert_send_sync::<Term>();
        assert_send_sync::<ExConstraint>();
        assert_send_sync::<Valuation>();
        assert_send_sync::<crate::ect::ECTerm>();
        assert_send_sync::<crate::rules::ConstrainedRule>();
        assert_send_sync::<crate::engine::StepRecord>();
        assert_send_sync::<EnumBackend>();
    }
}
