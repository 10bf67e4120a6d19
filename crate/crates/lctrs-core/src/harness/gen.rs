//! Deterministic random generation of small signatures, left-linear
//! left-value-free systems, and satisfiable constrained terms.

use std::collections::BTreeSet;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::ect::ECTerm;
use crate::logic::{and, ConstraintBackend, EnumBackend, ExConstraint};
use crate::rules::{ConstrainedRule, Lctrs};
use crate::signature::Signature;
use crate::term::{FunSym, Kind, Sort, Term, Value, Var};

use super::GenConfig;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GenError {
    #[error("generation exhausted after {attempts} attempts: {what}")]
    Exhausted { what: String, attempts: usize },
}

/// Everything one checker case works on.
#[derive(Debug, Clone)]
pub struct CaseData {
    pub modulus: u32,
    pub sig: Signature,
    pub system: Lctrs,
    pub ects: Vec<ECTerm>,
}

pub fn case_rng(cfg: &GenConfig, case: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(case))
}

/// Generates a full case: signature, system and three satisfiable
/// constrained terms (the third is a mutation of the first, so verdict
/// oracles see related pairs).
pub fn gen_case(cfg: &GenConfig, case: u64) -> Result<CaseData, GenError> {
    let mut rng = case_rng(cfg, case);
    let sig = gen_signature(cfg, &mut rng);
    let system = gen_system_with(cfg, &mut rng, &sig)?;
    let c0 = gen_ect(cfg, &mut rng, &sig)?;
    let c1 = gen_ect(cfg, &mut rng, &sig)?;
    let c2 = mutate_ect(cfg, &mut rng, &sig, &c0)?;
    Ok(CaseData { modulus: cfg.modulus, sig, system, ects: vec![c0, c1, c2] })
}

/// The system of a generated case alone.
pub fn gen_system(cfg: &GenConfig, case: u64) -> Result<Lctrs, GenError> {
    let mut rng = case_rng(cfg, case);
    let sig = gen_signature(cfg, &mut rng);
    gen_system_with(cfg, &mut rng, &sig)
}

fn gen_signature(cfg: &GenConfig, rng: &mut ChaCha8Rng) -> Signature {
    let mut sig = Signature::with_builtins();
    let with_term_sort = rng.gen_bool(0.5);
    let u = Sort::term("U");
    let names = ["f", "g", "h", "k"];
    let count = rng.gen_range(1..=cfg.max_term_symbols.clamp(1, names.len()));
    for name in names.iter().take(count) {
        let arity = rng.gen_range(if *name == "f" { 1..=2 } else { 0..=2 });
        let pick = |rng: &mut ChaCha8Rng| {
            if with_term_sort && rng.gen_bool(0.3) {
                u.clone()
            } else {
                Sort::int()
            }
        };
        let mut args: Vec<Sort> = (0..arity).map(|_| pick(rng)).collect();
        // Keep at least one integer argument slot on the first symbol so
        // rules and constrained terms can interact with the theory.
        if *name == "f" {
            args[0] = Sort::int();
        }
        let result = if *name == "f" { Sort::int() } else { pick(rng) };
        sig.declare(FunSym::new(name, args, result, Kind::Term)).expect("fresh symbol");
    }
    sig
}

fn int_term(n: i64) -> Term {
    Term::value(Value::Int(n))
}

/// A linear-combination atom `c1*a (+ c2*b) REL k` over the given
/// variables, with small coefficients.
fn gen_atom(rng: &mut ChaCha8Rng, sig: &Signature, vars: &[Var]) -> Term {
    let coeff = |rng: &mut ChaCha8Rng| loop {
        let c = rng.gen_range(-2..=2i64);
        if c != 0 {
            break c;
        }
    };
    let times = |sig: &Signature, c: i64, v: &Var| {
        if c == 1 {
            Term::Var(v.clone())
        } else {
            Term::app(sig.lookup("*", 2).unwrap().clone(), vec![int_term(c), Term::Var(v.clone())])
                .unwrap()
        }
    };
    let a = vars.choose(rng).expect("nonempty variable pool");
    let mut lhs = times(sig, coeff(rng), a);
    if vars.len() > 1 && rng.gen_bool(0.4) {
        let b = vars.choose(rng).unwrap();
        if b != a {
            let rhs = times(sig, coeff(rng), b);
            lhs = Term::app(sig.lookup("+", 2).unwrap().clone(), vec![lhs, rhs]).unwrap();
        }
    }
    let k = int_term(rng.gen_range(-2..=4i64));
    let rel = ["<=", "<", "=", ">="].choose(rng).unwrap();
    let sym = if *rel == "=" {
        sig.lookup_all("=", 2)
            .iter()
            .find(|f| f.arg_sorts()[0] == Sort::int())
            .unwrap()
            .clone()
    } else {
        sig.lookup(rel, 2).unwrap().clone()
    };
    Term::app(sym, vec![lhs, k]).unwrap()
}

fn conjoin(atoms: Vec<Term>) -> Term {
    let mut it = atoms.into_iter();
    match it.next() {
        None => Term::value(Value::Bool(true)),
        Some(first) => it.fold(first, and),
    }
}

/// A random term of the given sort, drawing from symbols, the variable
/// pool, and integer values.
fn gen_term(
    rng: &mut ChaCha8Rng,
    sig: &Signature,
    sort: &Sort,
    depth: usize,
    vars: &[Var],
    modulus: u32,
) -> Option<Term> {
    let candidates: Vec<&FunSym> =
        sig.term_symbols().filter(|f| f.result_sort() == sort).collect();
    let vars_here: Vec<&Var> = vars.iter().filter(|v| v.sort == *sort).collect();
    let mut choices: Vec<u8> = Vec::new();
    if !vars_here.is_empty() {
        choices.extend([0, 0]);
    }
    if *sort == Sort::int() {
        choices.push(1);
    }
    if depth > 1 && !candidates.is_empty() {
        choices.extend([2, 2, 2]);
    } else if !candidates.iter().all(|f| f.arity() > 0) {
        choices.push(2);
    }
    let pick = *choices.choose(rng)?;
    match pick {
        0 => Some(Term::Var((*vars_here.choose(rng).unwrap()).clone())),
        1 => Some(int_term(rng.gen_range(0..modulus as i64))),
        _ => {
            let usable: Vec<&&FunSym> = if depth > 1 {
                candidates.iter().collect()
            } else {
                candidates.iter().filter(|f| f.arity() == 0).collect()
            };
            let f = (**usable.choose(rng)?).clone();
            let mut args = Vec::with_capacity(f.arity());
            for s in f.arg_sorts() {
                args.push(gen_term(rng, sig, s, depth.saturating_sub(1), vars, modulus)?);
            }
            Some(Term::app(f, args).unwrap())
        }
    }
}

fn gen_rule(
    cfg: &GenConfig,
    rng: &mut ChaCha8Rng,
    sig: &Signature,
    id: usize,
) -> Option<ConstrainedRule> {
    let heads: Vec<&FunSym> = sig.term_symbols().filter(|f| f.arity() >= 1).collect();
    let head = (*heads.choose(rng)?).clone();
    let lhs_vars: Vec<Var> = head
        .arg_sorts()
        .iter()
        .enumerate()
        .map(|(i, s)| Var::new(&format!("l{}", i + 1), s.clone()))
        .collect();
    let lhs = Term::app(head, lhs_vars.iter().cloned().map(Term::Var).collect()).unwrap();

    let theory_lhs: Vec<Var> = lhs_vars.iter().filter(|v| v.sort.is_theory()).cloned().collect();
    let mut z: BTreeSet<Var> = theory_lhs
        .iter()
        .filter(|_| rng.gen_bool(0.85))
        .cloned()
        .collect();
    let extra = if rng.gen_bool(0.35) {
        let e = Var::int("e1");
        z.insert(e.clone());
        Some(e)
    } else {
        None
    };

    let guard_pool: Vec<Var> = z.iter().cloned().collect();
    let n_atoms = if guard_pool.is_empty() { 0 } else { rng.gen_range(0..=cfg.max_guard_atoms) };
    let guard = conjoin((0..n_atoms).map(|_| gen_atom(rng, sig, &guard_pool)).collect());

    let mut rhs_vars: Vec<Var> = lhs_vars.clone();
    if let Some(e) = &extra {
        rhs_vars.push(e.clone());
    }
    let rhs = gen_term(rng, sig, &lhs.sort(), cfg.max_term_depth, &rhs_vars, cfg.modulus)?;

    let rule = ConstrainedRule::new(&format!("g{id}"), z, lhs, rhs, guard);
    let flags = rule.validate().ok()?;
    // The theorems' hypotheses: left-linear and left-value-free.
    (flags.left_linear && flags.left_value_free).then_some(rule)
}

fn gen_system_with(
    cfg: &GenConfig,
    rng: &mut ChaCha8Rng,
    sig: &Signature,
) -> Result<Lctrs, GenError> {
    let count = rng.gen_range(1..=cfg.max_rules.max(1));
    let mut rules = Vec::new();
    let mut backend = EnumBackend::new(cfg.modulus);
    for i in 0..count {
        let mut accepted = None;
        for _attempt in 0..8 {
            let Some(rule) = gen_rule(cfg, rng, sig, i + 1) else { continue };
            // Prefer rules with satisfiable guards so checks are not
            // vacuous; keep a dead rule occasionally.
            let live = backend
                .check_sat(&ExConstraint::plain(rule.guard.clone()))
                .map(|v| v.is_sat())
                .unwrap_or(false);
            if live || rng.gen_bool(0.1) {
                accepted = Some(rule);
                break;
            }
            accepted = Some(rule);
        }
        match accepted {
            Some(rule) => rules.push(rule),
            None => {
                return Err(GenError::Exhausted { what: format!("rule g{}", i + 1), attempts: 8 })
            }
        }
    }
    Ok(Lctrs::without_calc(rules))
}

/// A satisfiable well-formed constrained term over the signature.
pub fn gen_ect(cfg: &GenConfig, rng: &mut ChaCha8Rng, sig: &Signature) -> Result<ECTerm, GenError> {
    let attempts = 24;
    for _ in 0..attempts {
        let Some(c) = try_gen_ect(cfg, rng, sig) else { continue };
        if c.well_formed().is_err() {
            continue;
        }
        let mut backend = EnumBackend::new(cfg.modulus);
        if matches!(c.is_sat(&mut backend), Ok(v) if v.is_sat()) {
            return Ok(c);
        }
    }
    Err(GenError::Exhausted { what: "satisfiable constrained term".into(), attempts })
}

fn try_gen_ect(cfg: &GenConfig, rng: &mut ChaCha8Rng, sig: &Signature) -> Option<ECTerm> {
    // Designated logical candidates first, then plain term variables.
    let pool = [
        Var::int("i"),
        Var::int("j"),
        Var::int("m"),
        Var::new("a", Sort::term("U")),
        Var::new("b", Sort::term("U")),
    ];
    let roots: Vec<Sort> = {
        let mut out: Vec<Sort> = sig.term_symbols().map(|f| f.result_sort().clone()).collect();
        out.push(Sort::int());
        out.sort();
        out.dedup();
        out
    };
    let sort = roots.choose(rng)?.clone();
    let term = gen_term(rng, sig, &sort, cfg.max_term_depth, &pool, cfg.modulus)?;
    if term.is_var() || term.is_value() {
        return None;
    }
    let theory_vars: Vec<Var> =
        term.vars().into_iter().filter(|v| v.sort.is_theory()).collect();
    let logical: BTreeSet<Var> =
        theory_vars.iter().filter(|_| rng.gen_bool(0.8)).cloned().collect();

    let binder_pool = [Var::int("p"), Var::int("q")];
    let n_binders = rng.gen_range(0..=1usize);
    let mut atom_vars: Vec<Var> = logical.iter().cloned().collect();
    atom_vars.extend(binder_pool.iter().take(n_binders).cloned());
    let n_atoms = if atom_vars.is_empty() { 0 } else { rng.gen_range(0..=cfg.max_guard_atoms) };
    let body = conjoin((0..n_atoms).map(|_| gen_atom(rng, sig, &atom_vars)).collect());
    let body_vars = body.vars();
    let binders: Vec<Var> =
        binder_pool.iter().take(n_binders).filter(|b| body_vars.contains(b)).cloned().collect();
    Some(ECTerm::new(logical, term, ExConstraint::new(binders, body)))
}

/// A related variant of an existing term: variables renamed and possibly
/// one more constraint atom, so oracles see near-miss pairs.
fn mutate_ect(
    cfg: &GenConfig,
    rng: &mut ChaCha8Rng,
    sig: &Signature,
    base: &ECTerm,
) -> Result<ECTerm, GenError> {
    for _ in 0..16 {
        let mut c = base.clone();
        if rng.gen_bool(0.5) {
            // Rename every variable by priming.
            let all = c.all_vars();
            let renaming: Vec<(Var, Var)> = all
                .iter()
                .map(|v| (v.clone(), Var::new(&format!("{}_r", v.name), v.sort.clone())))
                .collect();
            let mut s = crate::term::Subst::new();
            for (from, to) in &renaming {
                s.bind(from.clone(), Term::Var(to.clone())).unwrap();
            }
            c = ECTerm::new(
                c.logical_vars.iter().map(|v| Var::new(&format!("{}_r", v.name), v.sort.clone())),
                s.apply(&c.term),
                ExConstraint::new(
                    c.constraint
                        .binders
                        .iter()
                        .map(|v| Var::new(&format!("{}_r", v.name), v.sort.clone()))
                        .collect(),
                    s.apply(&c.constraint.body),
                ),
            );
        }
        if rng.gen_bool(0.6) {
            let vars: Vec<Var> = c.logical_vars.iter().cloned().collect();
            if !vars.is_empty() {
                let atom = gen_atom(rng, sig, &vars);
                c = ECTerm::new(
                    c.logical_vars.clone(),
                    c.term.clone(),
                    ExConstraint::new(c.constraint.binders.clone(), and(c.constraint.body.clone(), atom)),
                );
            }
        }
        if c.well_formed().is_err() {
            continue;
        }
        let mut backend = EnumBackend::new(cfg.modulus);
        if matches!(c.is_sat(&mut backend), Ok(v) if v.is_sat()) {
            return Ok(c);
        }
    }
    // Fall back to the base itself; pairs of equal terms are still useful.
    Ok(base.clone())
}
