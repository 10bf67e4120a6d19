//! Interpretations of constrained terms and rules as sets of plain terms
//! and plain rules, ground rewriting with interpreted rules, and instance
//! membership. These are the oracles behind the characterization
//! theorems: everything here is decided by enumeration, never through the
//! rewrite engine.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::ect::{ECTerm, TriVerdict};
use crate::logic::{holds_with_domain, LogicError, TheoryModel, Valuation};
use crate::rules::{ConstrainedRule, Lctrs};
use crate::signature::Signature;
use crate::term::{
    fresh_rename, match_term, unify, Position, Sort, Subst, Term, TermError,
    Value, Var,
};

/// How instance sets are enumerated. `Modular` is exact; `IntWindow` is an
/// explicitly approximate slice of the unbounded model, good only for
/// existential conclusions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DomainMode {
    Modular(u32),
    IntWindow(i64, i64),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DomainSpec {
    pub mode: DomainMode,
    /// Names for the bounded pool of variables that non-logical variables
    /// may be bound to in `enumerate_instances`.
    pub pool: Vec<String>,
    pub max_instances: usize,
}

impl DomainSpec {
    pub fn modular(m: u32) -> DomainSpec {
        DomainSpec {
            mode: DomainMode::Modular(m),
            pool: vec!["v1".into(), "v2".into()],
            max_instances: 200_000,
        }
    }

    pub fn window(lo: i64, hi: i64) -> DomainSpec {
        assert!(lo <= hi);
        DomainSpec {
            mode: DomainMode::IntWindow(lo, hi),
            pool: vec!["v1".into(), "v2".into()],
            max_instances: 200_000,
        }
    }

    pub fn with_pool(mut self, names: &[&str]) -> DomainSpec {
        self.pool = names.iter().map(|s| s.to_string()).collect();
        self
    }

    pub fn with_cap(mut self, cap: usize) -> DomainSpec {
        self.max_instances = cap;
        self
    }

    pub fn exact(&self) -> bool {
        matches!(self.mode, DomainMode::Modular(_))
    }

    pub fn model(&self) -> TheoryModel {
        match self.mode {
            DomainMode::Modular(m) => TheoryModel::int_mod(m),
            DomainMode::IntWindow(_, _) => TheoryModel::unbounded(),
        }
    }

    pub fn int_values(&self) -> Vec<Value> {
        match self.mode {
            DomainMode::Modular(m) => (0..m as i64).map(Value::Int).collect(),
            DomainMode::IntWindow(lo, hi) => (lo..=hi).map(Value::Int).collect(),
        }
    }

    fn values_for(&self, sort: &Sort) -> Result<Vec<Value>, InterpError> {
        if *sort == Sort::bool() {
            Ok(vec![Value::Bool(false), Value::Bool(true)])
        } else if *sort == Sort::int() {
            Ok(self.int_values())
        } else {
            Err(InterpError::NonTheorySort(sort.clone()))
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum InterpError {
    #[error("instance cap of {cap} exceeded")]
    CapExceeded { cap: usize },
    #[error("sort {0} has no value domain")]
    NonTheorySort(Sort),
    #[error("rule {0} is not left-linear")]
    NonLeftLinear(String),
    #[error(transparent)]
    Logic(#[from] LogicError),
    #[error(transparent)]
    Term(#[from] TermError),
}

/// One element of a rule interpretation: a plain rewrite rule whose
/// theory variables have been replaced by values.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct GroundRule {
    pub lhs: Term,
    pub rhs: Term,
    pub rule_id: String,
}

impl fmt::Display for GroundRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} -> {}", self.lhs, self.rhs)
    }
}

/// Enumerates assignments of domain values to the logical variables that
/// satisfy the constraint of `c`, in lexicographic order. The search
/// prunes with the constraint's conjuncts, so chained equalities cost
/// nearly nothing.
fn satisfying_assignments(c: &ECTerm, d: &DomainSpec) -> Result<Vec<Valuation>, InterpError> {
    let model = d.model();
    let vars: Vec<Var> = c.logical_vars.iter().cloned().collect();
    let ints = d.int_values();
    let atoms = crate::logic::conjuncts(&c.constraint.body);
    let mut out = Vec::new();
    let mut overflow = false;
    crate::logic::for_each_prefix_solution(
        &atoms,
        &vars,
        &c.constraint.binders,
        &Valuation::new(),
        &model,
        &ints,
        &mut |rho| {
            out.push(rho.clone());
            if out.len() > d.max_instances {
                overflow = true;
                return Ok(false);
            }
            Ok(true)
        },
    )?;
    if overflow {
        return Err(InterpError::CapExceeded { cap: d.max_instances });
    }
    Ok(out)
}

/// The standard interpretation restricted to a bounded pool: logical
/// variables run over values satisfying the constraint, non-logical
/// variables over the pool variables. The full instance set is closed
/// under substitutions and therefore infinite; membership queries go
/// through [`contains_instance`].
pub fn enumerate_instances(c: &ECTerm, d: &DomainSpec) -> Result<BTreeSet<Term>, InterpError> {
    let model = d.model();
    let assignments = satisfying_assignments(c, d)?;
    let non_logical: Vec<Var> = c.non_logical_vars().into_iter().collect();
    let mut out = BTreeSet::new();
    // All pool bindings, including non-injective ones. The combination
    // count alone can exceed the cap, so bound it up front.
    let pool_choices = d.pool.len().max(1);
    let combos = pool_choices
        .checked_pow(non_logical.len().try_into().unwrap_or(u32::MAX))
        .filter(|c| *c <= d.max_instances.saturating_mul(2))
        .ok_or(InterpError::CapExceeded { cap: d.max_instances })?;
    for rho in &assignments {
        let base = rho.as_subst(&model);
        for combo in 0..combos {
            let mut s = base.clone();
            let mut idx = combo;
            let mut ok = true;
            for v in &non_logical {
                if d.pool.is_empty() {
                    ok = false;
                    break;
                }
                let name = &d.pool[idx % pool_choices];
                idx /= pool_choices;
                s.bind(v.clone(), Term::Var(Var::new(name, v.sort.clone())))
                    .expect("pool variables are sort-compatible");
            }
            if !ok {
                continue;
            }
            out.insert(s.apply(&c.term));
            if out.len() > d.max_instances {
                return Err(InterpError::CapExceeded { cap: d.max_instances });
            }
        }
        if non_logical.is_empty() || d.pool.is_empty() {
            // With no pool, fall back to leaving non-logical variables
            // untouched.
            out.insert(base.apply(&c.term));
        }
    }
    Ok(out)
}

/// Membership in the standard interpretation: `u` matches the term part
/// with logical variables bound to values and the constraint respected.
pub fn contains_instance(c: &ECTerm, u: &Term, d: &DomainSpec) -> Result<bool, LogicError> {
    let model = d.model();
    let Some(sigma) = match_term(&c.term, u) else {
        return Ok(false);
    };
    let mut rho = Valuation::new();
    for x in &c.logical_vars {
        let image = sigma.get(x).cloned().unwrap_or_else(|| Term::Var(x.clone()));
        match image.as_value() {
            Some(v) => rho.set(x.clone(), model.normalize(v)),
            None => return Ok(false),
        }
    }
    holds_with_domain(&c.constraint, &rho, &model, &d.int_values())
}

/// Canonical renaming of the non-logical variables: per sort, `v1, v2,
/// ...` in left-to-right first-occurrence order.
pub fn canonical_renaming(c: &ECTerm) -> Subst {
    let mut counters: BTreeMap<Sort, usize> = BTreeMap::new();
    let mut out = Subst::new();
    for v in c.term.vars_ordered() {
        if c.logical_vars.contains(&v) {
            continue;
        }
        let n = counters.entry(v.sort.clone()).or_insert(0);
        *n += 1;
        let fresh = Var::new(&format!("v{n}"), v.sort.clone());
        out.bind(v, Term::Var(fresh)).expect("renaming is sort-preserving");
    }
    out
}

/// The value interpretation, canonicalized: logical variables take values
/// satisfying the constraint; non-logical variables are injectively
/// renamed to the canonical pool. The set is closed under renaming, so
/// the canonical representatives characterize it.
pub fn enumerate_value_instances(c: &ECTerm, d: &DomainSpec) -> Result<BTreeSet<Term>, InterpError> {
    let model = d.model();
    let ren = canonical_renaming(c);
    let skeleton = ren.apply(&c.term);
    let mut out = BTreeSet::new();
    for rho in satisfying_assignments(c, d)? {
        let t = rho.as_subst(&model).apply(&skeleton);
        out.insert(t);
        if out.len() > d.max_instances {
            return Err(InterpError::CapExceeded { cap: d.max_instances });
        }
    }
    Ok(out)
}

/// The first canonical value instance in enumeration order, or `None`
/// when the constraint is unsatisfiable over the domain.
pub fn first_value_instance(c: &ECTerm, d: &DomainSpec) -> Result<Option<Term>, InterpError> {
    let model = d.model();
    let vars: Vec<Var> = c.logical_vars.iter().cloned().collect();
    let ints = d.int_values();
    let atoms = crate::logic::conjuncts(&c.constraint.body);
    let mut first: Option<Valuation> = None;
    crate::logic::for_each_prefix_solution(
        &atoms,
        &vars,
        &c.constraint.binders,
        &Valuation::new(),
        &model,
        &ints,
        &mut |rho| {
            first = Some(rho.clone());
            Ok(false)
        },
    )?;
    Ok(first.map(|rho| {
        let skeleton = canonical_renaming(c).apply(&c.term);
        rho.as_subst(&model).apply(&skeleton)
    }))
}

/// A shape key for the value interpretation: logical variables and value
/// constants collapse to one marker, non-logical variables to another.
/// Nonempty value interpretations can only be equal when the keys agree,
/// since every member carries values exactly at the first kind of
/// position and variables exactly at the second.
pub fn value_shape_key(c: &ECTerm) -> String {
    fn walk(t: &Term, logical: &std::collections::BTreeSet<Var>, out: &mut String) {
        match t {
            Term::Var(v) if logical.contains(v) => out.push('*'),
            Term::Var(_) => out.push('?'),
            Term::App(f, args) => {
                if f.is_value() {
                    out.push('*');
                    return;
                }
                out.push_str(f.name());
                out.push('(');
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    walk(a, logical, out);
                }
                out.push(')');
            }
        }
    }
    let mut out = String::new();
    walk(&c.term, &c.logical_vars, &mut out);
    out
}

/// Membership in the value interpretation: logical variables to values,
/// non-logical variables injectively to variables, constraint respected.
pub fn is_value_instance(c: &ECTerm, u: &Term, d: &DomainSpec) -> Result<bool, LogicError> {
    let model = d.model();
    let Some(sigma) = match_term(&c.term, u) else {
        return Ok(false);
    };
    let mut rho = Valuation::new();
    for x in &c.logical_vars {
        let image = sigma.get(x).cloned().unwrap_or_else(|| Term::Var(x.clone()));
        match image.as_value() {
            Some(v) => rho.set(x.clone(), model.normalize(v)),
            None => return Ok(false),
        }
    }
    let mut seen = BTreeSet::new();
    for v in c.non_logical_vars() {
        let image = sigma.get(&v).cloned().unwrap_or_else(|| Term::Var(v.clone()));
        match image {
            Term::Var(w) => {
                if !seen.insert(w) {
                    return Ok(false);
                }
            }
            _ => return Ok(false),
        }
    }
    holds_with_domain(&c.constraint, &rho, &model, &d.int_values())
}

/// The instance order `s <= t`: some substitution sends s to t.
pub fn term_instance_order(s: &Term, t: &Term) -> bool {
    match_term(s, t).is_some()
}

/// The interpretation of a constrained rule: value instantiations of the
/// theory variables occurring in the rule sides, with the guard
/// satisfiable under existential closure of its remaining variables.
/// Non-logical rule variables stay as variables.
pub fn interpret_rule(rule: &ConstrainedRule, d: &DomainSpec) -> Result<BTreeSet<GroundRule>, InterpError> {
    if !rule.lhs.is_linear() {
        return Err(InterpError::NonLeftLinear(rule.id.clone()));
    }
    let model = d.model();
    let mut side_vars = rule.lhs.vars();
    side_vars.extend(rule.rhs.vars());
    let dom_vars: Vec<Var> = rule.theory_vars.intersection(&side_vars).cloned().collect();
    // Guard variables outside the sides stay existentially closed, in
    // first-occurrence order.
    let closed: Vec<Var> = rule
        .guard
        .vars_ordered()
        .into_iter()
        .filter(|v| !side_vars.contains(v))
        .collect();
    let guard_ec = crate::logic::ExConstraint::new(closed, rule.guard.clone());

    let domains: Vec<Vec<Value>> = dom_vars.iter().map(|v| d.values_for(&v.sort)).collect::<Result<_, _>>()?;
    let ints = d.int_values();
    let mut out = BTreeSet::new();
    let mut cursor = vec![0usize; dom_vars.len()];
    loop {
        let rho = Valuation::from_pairs(
            dom_vars.iter().enumerate().map(|(k, v)| (v.clone(), domains[k][cursor[k]])),
        );
        if holds_with_domain(&guard_ec, &rho, &model, &ints)? {
            let s = rho.as_subst(&model);
            out.insert(GroundRule {
                lhs: s.apply(&rule.lhs),
                rhs: s.apply(&rule.rhs),
                rule_id: rule.id.clone(),
            });
            if out.len() > d.max_instances {
                return Err(InterpError::CapExceeded { cap: d.max_instances });
            }
        }
        let mut k = dom_vars.len();
        loop {
            if k == 0 {
                return Ok(out);
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

/// Union of the rule interpretations of a system.
pub fn interpret_system(sys: &Lctrs, d: &DomainSpec) -> Result<BTreeSet<GroundRule>, InterpError> {
    let mut out = BTreeSet::new();
    for rule in &sys.rules {
        out.extend(interpret_rule(rule, d)?);
        if out.len() > d.max_instances {
            return Err(InterpError::CapExceeded { cap: d.max_instances });
        }
    }
    Ok(out)
}

/// One-step reducts of `u` with the ground rules, at position `p` when
/// given, anywhere otherwise. Ground-rule variables match arbitrary
/// subterms.
pub fn ground_steps(u: &Term, rules: &BTreeSet<GroundRule>, p: Option<&Position>) -> BTreeSet<Term> {
    let positions: Vec<Position> = match p {
        Some(p) => vec![p.clone()],
        None => u.positions(),
    };
    let mut out = BTreeSet::new();
    for q in &positions {
        let Ok(sub) = u.subterm_at(q) else { continue };
        for g in rules {
            if let Some(theta) = match_term(&g.lhs, sub) {
                let replaced = theta.apply(&g.rhs);
                if let Ok(t) = u.replace_at(q, replaced) {
                    out.insert(t);
                }
            }
        }
    }
    out
}

/// Whether `u` has any redex with the ground rules (at `p` when given).
pub fn ground_reducible(u: &Term, rules: &BTreeSet<GroundRule>, p: Option<&Position>) -> bool {
    let positions: Vec<Position> = match p {
        Some(p) => vec![p.clone()],
        None => u.positions(),
    };
    positions.iter().any(|q| match u.subterm_at(q) {
        Ok(sub) => rules.iter().any(|g| match_term(&g.lhs, sub).is_some()),
        Err(_) => false,
    })
}

/// Decides whether every standard instance of `c` is a ground normal form
/// with respect to the interpreted rules.
///
/// Exact mode: enumerate the canonical value instances, then look for a
/// reducible instance by (a) unifying ground-rule left-hand sides with
/// subterms, which covers substituting a left-hand side directly for a
/// variable, and (b) a sort-embedding check for redexes buried under a
/// variable of a different sort. Window mode only certifies `No`.
pub fn instantiation_normal(
    c: &ECTerm,
    sys: &Lctrs,
    sig: &Signature,
    d: &DomainSpec,
) -> TriVerdict<usize, Term> {
    match instantiation_normal_inner(c, sys, sig, d) {
        Ok(v) => v,
        Err(e) => TriVerdict::Unknown(format!("not enumerable: {e}")),
    }
}

fn instantiation_normal_inner(
    c: &ECTerm,
    sys: &Lctrs,
    sig: &Signature,
    d: &DomainSpec,
) -> Result<TriVerdict<usize, Term>, InterpError> {
    let ground = interpret_system(sys, d)?;
    let instances = enumerate_value_instances(c, d)?;
    let checked = instances.len();
    for u in &instances {
        let u_vars = u.vars();
        // (a) unification sweep over all positions.
        for q in u.positions() {
            let sub = u.subterm_at(&q)?;
            for g in &ground {
                let lhs = rename_apart(&g.lhs, &u_vars);
                if let Some(theta) = unify(sub, &lhs) {
                    let witness = theta.apply(u);
                    debug_assert!(ground_reducible(&witness, &ground, Some(&q)));
                    return Ok(TriVerdict::No(witness));
                }
            }
        }
        // (b) sort embedding: a redex can sit strictly inside whatever a
        // non-logical variable is instantiated with.
        for v in u_vars {
            let below = sig.reachable_below(&v.sort);
            for g in &ground {
                let target = g.lhs.sort();
                if below.contains(&target) {
                    if let Some(context) = embed(sig, &v.sort, &g.lhs, &u.vars()) {
                        let mut s = Subst::new();
                        s.bind(v.clone(), context).expect("embedding is sort-correct");
                        let witness = s.apply(u);
                        debug_assert!(ground_reducible(&witness, &ground, None));
                        return Ok(TriVerdict::No(witness));
                    }
                }
            }
        }
    }
    if d.exact() {
        Ok(TriVerdict::Yes(checked))
    } else {
        Ok(TriVerdict::Unknown(
            "no reducible instance found within the window; emptiness over Z is not certified"
                .into(),
        ))
    }
}

fn rename_apart(t: &Term, away: &BTreeSet<Var>) -> Term {
    let clash: BTreeSet<Var> = t.vars().intersection(away).cloned().collect();
    if clash.is_empty() {
        return t.clone();
    }
    let mut avoid = away.clone();
    avoid.extend(t.vars());
    fresh_rename(&avoid, &clash).apply(t)
}

/// Builds a term of sort `top` containing `inner` as a proper subterm,
/// filling sibling positions with fresh variables. At least one symbol is
/// always wrapped around `inner`, so the embedding is strict even when
/// the sorts coincide.
fn embed(sig: &Signature, top: &Sort, inner: &Term, avoid: &BTreeSet<Var>) -> Option<Term> {
    let target = inner.sort();
    // Breadth-first search over argument sorts strictly below `top`;
    // `prev[s]` records one symbol occurrence placing an s-sorted subterm
    // one level deeper, with `None` marking a root-level wrap.
    type Edge = (crate::term::FunSym, usize, Option<Sort>);
    let mut prev: BTreeMap<Sort, Edge> = BTreeMap::new();
    let mut queue = std::collections::VecDeque::new();
    for f in sig.symbols() {
        if f.result_sort() == top {
            for (i, arg) in f.arg_sorts().iter().enumerate() {
                if !prev.contains_key(arg) {
                    prev.insert(arg.clone(), (f.clone(), i, None));
                    queue.push_back(arg.clone());
                }
            }
        }
    }
    while !prev.contains_key(&target) {
        let s = queue.pop_front()?;
        for f in sig.symbols() {
            if *f.result_sort() == s {
                for (i, arg) in f.arg_sorts().iter().enumerate() {
                    if !prev.contains_key(arg) {
                        prev.insert(arg.clone(), (f.clone(), i, Some(s.clone())));
                        queue.push_back(arg.clone());
                    }
                }
            }
        }
    }

    let mut avoid_names: BTreeSet<Var> = avoid.clone();
    avoid_names.extend(inner.vars());
    let mut fresh_count = 0usize;
    let mut fresh = |sort: &Sort, avoid_names: &mut BTreeSet<Var>| -> Term {
        loop {
            fresh_count += 1;
            let v = Var::new(&format!("c{fresh_count}"), sort.clone());
            if !avoid_names.contains(&v) {
                avoid_names.insert(v.clone());
                return Term::Var(v);
            }
        }
    };
    let mut acc = inner.clone();
    let mut cur = target;
    loop {
        let (f, idx, parent) = prev.get(&cur)?.clone();
        let args: Vec<Term> = f
            .arg_sorts()
            .iter()
            .enumerate()
            .map(|(i, s)| if i == idx { acc.clone() } else { fresh(s, &mut avoid_names) })
            .collect();
        acc = Term::App(f, args);
        match parent {
            None => return Some(acc),
            Some(p) => cur = p,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::{and, ExConstraint};
    use crate::term::{FunSym, Kind};

    fn sig() -> Signature {
        let mut s = Signature::with_builtins();
        s.declare(FunSym::new("f2", vec![Sort::int(), Sort::int()], Sort::int(), Kind::Term)).unwrap();
        s.declare(FunSym::new("sum", vec![Sort::int()], Sort::int(), Kind::Term)).unwrap();
        s.declare(FunSym::new("f", vec![Sort::int()], Sort::int(), Kind::Term)).unwrap();
        s
    }

    fn app(name: &str, args: Vec<Term>) -> Term {
        let s = sig();
        let arity = args.len();
        let f = if name == "=" {
            s.lookup_all("=", 2)
                .iter()
                .find(|f| f.arg_sorts()[0] == args[0].sort())
                .unwrap()
                .clone()
        } else {
            s.lookup(name, arity).unwrap().clone()
        };
        Term::app(f, args).unwrap()
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

    fn z() -> Var {
        Var::int("z")
    }

    /// Π{x}. f2(x, z) [∃y. x = y * 2]
    fn even_first() -> ECTerm {
        ECTerm::new(
            [x()],
            app("f2", vec![Term::Var(x()), Term::Var(z())]),
            ExConstraint::new(vec![y()], app("=", vec![Term::Var(x()), app("*", vec![Term::Var(y()), int(2)])])),
        )
    }

    #[test]
    fn enumerate_instances_even_example() {
        // Doubles in Z_6 are {0, 2, 4}; pool {z} keeps the second slot.
        let d = DomainSpec::modular(6).with_pool(&["z"]);
        let got = enumerate_instances(&even_first(), &d).unwrap();
        let expected: BTreeSet<Term> = [0, 2, 4]
            .into_iter()
            .map(|n| app("f2", vec![int(n), Term::Var(z())]))
            .collect();
        assert_eq!(got, expected);
    }

    #[test]
    fn enumerate_instances_edge_cases() {
        // Unsatisfiable constraint: the set is empty.
        let c = ECTerm::new(
            [x()],
            app("f", vec![Term::Var(x())]),
            ExConstraint::plain(app("<", vec![Term::Var(x()), Term::Var(x())])),
        );
        assert!(enumerate_instances(&c, &DomainSpec::modular(4)).unwrap().is_empty());

        // No logical variables: the pool binding is all there is.
        let c = ECTerm::unconstrained([], app("f", vec![Term::Var(x())]));
        let d = DomainSpec::modular(4).with_pool(&["x"]);
        let got = enumerate_instances(&c, &d).unwrap();
        assert_eq!(got, BTreeSet::from([app("f", vec![Term::Var(x())])]));
    }

    #[test]
    fn contains_instance_examples() {
        let d = DomainSpec::modular(6);
        // f2(0, f2(x, y)) is an instance: 0 is even, z binds to a term.
        let u = app("f2", vec![int(0), app("f2", vec![Term::Var(x()), Term::Var(y())])]);
        assert!(contains_instance(&even_first(), &u, &d).unwrap());

        let sum1 = |n: i64| app("sum", vec![int(n)]);
        let c = ECTerm::new(
            [x()],
            app("sum", vec![Term::Var(x())]),
            ExConstraint::plain(and(
                app("<=", vec![int(1), Term::Var(x())]),
                app("<=", vec![Term::Var(x()), int(5)]),
            )),
        );
        let d = DomainSpec::modular(16);
        assert!(!contains_instance(&c, &sum1(0), &d).unwrap());
        assert!(contains_instance(&c, &sum1(1), &d).unwrap());
    }

    #[test]
    fn value_instances_canonicalized() {
        // Example over Z_6: {f2(0,v1), f2(2,v1), f2(4,v1)}.
        let d = DomainSpec::modular(6);
        let got = enumerate_value_instances(&even_first(), &d).unwrap();
        let v1 = Term::Var(Var::int("v1"));
        let expected: BTreeSet<Term> =
            [0, 2, 4].into_iter().map(|n| app("f2", vec![int(n), v1.clone()])).collect();
        assert_eq!(got, expected);

        // Window mode: Π{x}. sum(x) [0 <= x /\ x <= 4].
        let c = ECTerm::new(
            [x()],
            app("sum", vec![Term::Var(x())]),
            ExConstraint::plain(and(
                app("<=", vec![int(0), Term::Var(x())]),
                app("<=", vec![Term::Var(x()), int(4)]),
            )),
        );
        let d = DomainSpec::window(-1, 6);
        let got = enumerate_value_instances(&c, &d).unwrap();
        let expected: BTreeSet<Term> = (0..=4).map(|n| app("sum", vec![int(n)])).collect();
        assert_eq!(got, expected);

        // Π{x}. f(x) [true] over Z_2: {f(0), f(1)}.
        let c = ECTerm::unconstrained([x()], app("f", vec![Term::Var(x())]));
        let got = enumerate_value_instances(&c, &DomainSpec::modular(2)).unwrap();
        let expected: BTreeSet<Term> = (0..=1).map(|n| app("f", vec![int(n)])).collect();
        assert_eq!(got, expected);
    }

    #[test]
    fn value_instances_are_instances_and_minimal() {
        let d = DomainSpec::modular(6).with_pool(&["v1", "v2"]);
        let c = even_first();
        let vals = enumerate_value_instances(&c, &d).unwrap();
        for u in &vals {
            assert!(contains_instance(&c, u, &d).unwrap());
        }
        // Minimality: distinct canonical value instances are never
        // instances of one another.
        for u in &vals {
            for v in &vals {
                if u != v {
                    assert!(
                        !term_instance_order(u, v),
                        "canonical instance {v} is an instance of {u}"
                    );
                }
            }
        }
        // Closure generation: every enumerated instance is reachable from
        // some value instance by a substitution.
        let pool = enumerate_instances(&c, &d).unwrap();
        for t in &pool {
            assert!(
                vals.iter().any(|u| term_instance_order(u, t)),
                "{t} not generated by any value instance"
            );
        }
    }

    #[test]
    fn interpret_rule_examples() {
        // Π{x}. f2(x,y) -> y [0 >= x] over the window -3..3.
        let rule = ConstrainedRule::new(
            "rho",
            [x()],
            app("f2", vec![Term::Var(x()), Term::Var(y())]),
            Term::Var(y()),
            app(">=", vec![int(0), Term::Var(x())]),
        );
        let d = DomainSpec::window(-3, 3);
        let got = interpret_rule(&rule, &d).unwrap();
        let expected: BTreeSet<GroundRule> = (-3..=0)
            .map(|n| GroundRule {
                lhs: app("f2", vec![int(n), Term::Var(y())]),
                rhs: Term::Var(y()),
                rule_id: "rho".into(),
            })
            .collect();
        assert_eq!(got, expected);

        // Unsatisfiable guard: empty interpretation.
        let dead = ConstrainedRule::new(
            "dead",
            [x()],
            app("f", vec![Term::Var(x())]),
            int(0),
            app("<", vec![Term::Var(x()), Term::Var(x())]),
        );
        assert!(interpret_rule(&dead, &DomainSpec::modular(4)).unwrap().is_empty());
    }

    fn sum_rules() -> (ConstrainedRule, ConstrainedRule) {
        let r1 = ConstrainedRule::new(
            "r1",
            [x()],
            app("sum", vec![Term::Var(x())]),
            int(0),
            app(">=", vec![int(0), Term::Var(x())]),
        );
        let r2 = ConstrainedRule::new(
            "r2",
            [x()],
            app("sum", vec![Term::Var(x())]),
            app("+", vec![Term::Var(x()), app("sum", vec![app("+", vec![Term::Var(x()), int(-1)])])]),
            app("<", vec![int(0), Term::Var(x())]),
        );
        (r1, r2)
    }

    #[test]
    fn ground_steps_examples() {
        let (r1, r2) = sum_rules();
        let d = DomainSpec::window(-2, 6);
        let g1 = interpret_rule(&r1, &d).unwrap();
        let expected: BTreeSet<GroundRule> = (-2..=0)
            .map(|n| GroundRule { lhs: app("sum", vec![int(n)]), rhs: int(0), rule_id: "r1".into() })
            .collect();
        assert_eq!(g1, expected);

        // sum(0) -> 0
        assert_eq!(
            ground_steps(&app("sum", vec![int(0)]), &g1, None),
            BTreeSet::from([int(0)])
        );

        // sum(1) -> 1 + sum(1 + -1)
        let g2 = interpret_rule(&r2, &d).unwrap();
        let got = ground_steps(&app("sum", vec![int(1)]), &g2, None);
        let expected = app("+", vec![int(1), app("sum", vec![app("+", vec![int(1), int(-1)])])]);
        assert_eq!(got, BTreeSet::from([expected]));

        // Positional restriction, matching a rule variable against a
        // subterm: f2(1, f2(0, z)) -> f2(1, z) at position [2].
        let rho = ConstrainedRule::new(
            "rho'",
            [x()],
            app("f2", vec![Term::Var(x()), Term::Var(y())]),
            Term::Var(y()),
            app("=", vec![int(0), Term::Var(x())]),
        );
        let g = interpret_rule(&rho, &DomainSpec::window(-3, 3)).unwrap();
        let u = app("f2", vec![int(1), app("f2", vec![int(0), Term::Var(z())])]);
        let got = ground_steps(&u, &g, Some(&Position(vec![2])));
        assert_eq!(got, BTreeSet::from([app("f2", vec![int(1), Term::Var(z())])]));
    }

    #[test]
    fn instantiation_normal_counterexample() {
        // {f(a) -> b} over a term sort: f(x) has the reducible instance
        // f(a), found by unifying the lhs with the subterm x.
        let mut s = Signature::with_builtins();
        let u = Sort::term("U");
        s.declare(FunSym::new("fu", vec![u.clone()], u.clone(), Kind::Term)).unwrap();
        s.declare(FunSym::new("a", vec![], u.clone(), Kind::Term)).unwrap();
        s.declare(FunSym::new("b", vec![], u.clone(), Kind::Term)).unwrap();
        let fu = |t: Term| Term::app(s.lookup("fu", 1).unwrap().clone(), vec![t]).unwrap();
        let a = Term::app(s.lookup("a", 0).unwrap().clone(), vec![]).unwrap();
        let b = Term::app(s.lookup("b", 0).unwrap().clone(), vec![]).unwrap();
        let rule = ConstrainedRule::new("fa", [], fu(a.clone()), b.clone(), Term::value(Value::Bool(true)));
        let sys = Lctrs::without_calc(vec![rule]);
        let c = ECTerm::unconstrained([], fu(Term::Var(Var::new("x", u.clone()))));
        let d = DomainSpec::modular(2);
        match instantiation_normal(&c, &sys, &s, &d) {
            TriVerdict::No(witness) => assert_eq!(witness, fu(a)),
            other => panic!("expected No, got {}", other.label()),
        }

        // Values are normal for a system with no value left-hand sides.
        let c = ECTerm::unconstrained([], int(0));
        let sys2 = Lctrs::without_calc(vec![]);
        assert!(instantiation_normal(&c, &sys2, &s, &d).is_yes());
    }

    #[test]
    fn instantiation_normal_window_and_exact() {
        // Π{w}. 1 + sum(w) [1<=w /\ w<=5] with rule r1 alone: under the
        // exact modulus-16 model, no instance reduces with r1 because its
        // ground lhs sums are sum(0) only and w >= 1; but the variable w
        // is logical so no substitution can reach sum(0).
        let (r1, _) = sum_rules();
        let w = Var::int("w");
        let c = ECTerm::new(
            [w.clone()],
            app("+", vec![int(1), app("sum", vec![Term::Var(w.clone())])]),
            ExConstraint::plain(and(
                app("<=", vec![int(1), Term::Var(w.clone())]),
                app("<=", vec![Term::Var(w), int(5)]),
            )),
        );
        let sys = Lctrs::without_calc(vec![r1.clone()]);
        let d = DomainSpec::modular(16);
        assert!(instantiation_normal(&c, &sys, &sig(), &d).is_yes());

        // Under the full system the instances 1 + sum(n) with n >= 1 are
        // reducible inside by the interpretation of the recursive rule.
        let (_, r2) = sum_rules();
        let sys_full = Lctrs::with_calc(vec![r1, r2], &sig());
        let verdict =
            instantiation_normal(&c, &sys_full, &sig(), &DomainSpec::modular(4).with_cap(2_000_000));
        match verdict {
            TriVerdict::No(witness) => {
                assert_eq!(witness, app("+", vec![int(1), app("sum", vec![int(1)])]));
            }
            other => panic!("expected No, got {}", other.label()),
        }
    }

    #[test]
    fn term_instance_order_examples() {
        assert!(term_instance_order(&app("f", vec![Term::Var(x())]), &app("f", vec![int(0)])));
        assert!(!term_instance_order(&app("f", vec![int(0)]), &app("f", vec![Term::Var(x())])));
    }
}
