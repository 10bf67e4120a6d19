//! One executable check per characterization theorem. Every driver runs
//! the engine on generated inputs and compares against the interpretation
//! oracles; a `Fail` is a bug in either side.

use std::collections::BTreeSet;

use crate::ect::{self, ECTerm, OracleConfig, TriVerdict};
use crate::engine::{self, GateEvidence, Mode, StepRecord};
use crate::interp::{self, DomainSpec, GroundRule};
use crate::logic::{self, EnumBackend, ExConstraint, Valuation};
use crate::rules::{ConstrainedRule, Lctrs};
use crate::term::{match_term, Sort, Subst, Term, Value, Var};

use super::gen::CaseData;
use super::TheoremId;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CaseOutcome {
    Pass,
    /// Hypotheses never fired; nothing to conclude.
    Vacuous,
    Fail(String),
}

/// Bound on sampled instance sets so universal sub-quantifiers stay
/// affordable.
const SAMPLE: usize = 24;

pub fn run_case(theorem: TheoremId, data: &CaseData) -> CaseOutcome {
    let result = std::panic::catch_unwind(|| dispatch(theorem, data));
    match result {
        Ok(outcome) => outcome,
        Err(_) => CaseOutcome::Fail("checker panicked".into()),
    }
}

fn dispatch(theorem: TheoremId, data: &CaseData) -> CaseOutcome {
    match theorem {
        TheoremId::T32 => t32(data),
        TheoremId::T35 => t35(data),
        TheoremId::T36 => t36(data, false),
        TheoremId::T37 => t36(data, true),
        TheoremId::T45 => t45(data),
        TheoremId::T48 => t48(data),
        TheoremId::T49 => t_reduction(data, Mode::Partial),
        TheoremId::T410 => t410(data),
        TheoremId::T411 => t_reduction(data, Mode::MostGeneral),
        TheoremId::T61 => t61(data),
        TheoremId::T62 => t62(data),
        TheoremId::T63 => t63(data),
        TheoremId::T65 => t65(data),
        TheoremId::T66 => t66(data),
        TheoremId::T67 => t67(data),
        TheoremId::T69 => t69(data),
    }
}

fn backend(data: &CaseData) -> EnumBackend {
    EnumBackend::new(data.modulus)
}

fn domain(data: &CaseData) -> DomainSpec {
    DomainSpec::modular(data.modulus).with_cap(500_000)
}

fn fail(msg: impl Into<String>) -> CaseOutcome {
    CaseOutcome::Fail(msg.into())
}

macro_rules! try_check {
    ($e:expr, $ctx:expr) => {
        match $e {
            Ok(v) => v,
            Err(err) => return fail(format!("{}: {err}", $ctx)),
        }
    };
}

/// The instantiated-guard constraint `∃z⃗. πγ` of a step, rebuilt from its
/// recorded variant and matcher.
fn gate_constraint(step: &StepRecord) -> ExConstraint {
    let lhs_vars = step.variant.lhs.vars();
    let binders: Vec<Var> = step
        .variant
        .guard
        .vars_ordered()
        .into_iter()
        .filter(|v| !lhs_vars.contains(v))
        .collect();
    ExConstraint::new(binders, step.redex.matcher.apply(&step.variant.guard))
}

/// Every most general redex is a partial redex at the same position with
/// the same matcher.
fn t32(data: &CaseData) -> CaseOutcome {
    let mut b = backend(data);
    let c = &data.ects[0];
    let mut fired = false;
    for rule in &data.system.rules {
        let mg = try_check!(engine::find_redexes(c, rule, Mode::MostGeneral, &mut b), rule.id);
        if mg.redexes.is_empty() {
            continue;
        }
        fired = true;
        let pa = try_check!(engine::find_redexes(c, rule, Mode::Partial, &mut b), rule.id);
        for r in &mg.redexes {
            let twin = pa.redexes.iter().any(|p| {
                p.info.position == r.info.position && p.info.matcher == r.info.matcher
            });
            if !twin {
                return fail(format!(
                    "mg redex of {} at {} has no partial counterpart",
                    rule.id, r.info.position
                ));
            }
        }
    }
    if fired {
        CaseOutcome::Pass
    } else {
        CaseOutcome::Vacuous
    }
}

/// Every most general step is a partial step with an identical reduct.
fn t35(data: &CaseData) -> CaseOutcome {
    let mut b = backend(data);
    let c = &data.ects[0];
    let mg = try_check!(engine::all_steps(c, &data.system, Mode::MostGeneral, &mut b), "mg scan");
    if mg.steps.is_empty() {
        return CaseOutcome::Vacuous;
    }
    let pa = try_check!(engine::all_steps(c, &data.system, Mode::Partial, &mut b), "partial scan");
    for step in &mg.steps {
        let twin = pa.steps.iter().find(|p| {
            p.redex.rule_id == step.redex.rule_id && p.redex.position == step.redex.position
        });
        match twin {
            Some(p) if p.output == step.output && p.redex.matcher == step.redex.matcher => {}
            Some(_) => return fail(format!("distinct reducts at {}", step.redex.position)),
            None => return fail(format!("no partial step at {}", step.redex.position)),
        }
    }
    CaseOutcome::Pass
}

/// A partial step from c admits a most general step from the strengthened
/// input with an equivalent reduct; with `with_subsumption` the composed
/// simulation `c ⊒∼ c' → · ∼ d` is checked.
fn t36(data: &CaseData, with_subsumption: bool) -> CaseOutcome {
    let mut b = backend(data);
    let c = &data.ects[0];
    let pa = try_check!(engine::all_steps(c, &data.system, Mode::Partial, &mut b), "scan");
    if pa.steps.is_empty() {
        return CaseOutcome::Vacuous;
    }
    for step in &pa.steps {
        let strengthened = ECTerm::new(
            c.logical_vars.clone(),
            c.term.clone(),
            logic::prenex_conjoin(&c.constraint, &gate_constraint(step)),
        );
        if let Err(v) = strengthened.well_formed() {
            return fail(format!("strengthened term ill-formed: {v}"));
        }
        let rule = data
            .system
            .rule(&step.redex.rule_id)
            .expect("step names a system rule");
        let mg = try_check!(
            engine::find_redexes(&strengthened, rule, Mode::MostGeneral, &mut b),
            "mg rescan"
        );
        let Some(redex) = mg.redexes.iter().find(|r| r.info.position == step.redex.position)
        else {
            return fail(format!(
                "strengthened term admits no mg redex at {}",
                step.redex.position
            ));
        };
        let reduct = try_check!(engine::construct_step(&strengthened, redex), "construct");
        let mut cfg = OracleConfig::new(&mut b);
        if !ect::equivalent(&reduct, &step.output, &mut cfg).is_yes() {
            return fail(format!(
                "mg reduct {} not equivalent to partial reduct {}",
                reduct, step.output
            ));
        }
        if with_subsumption {
            let mut cfg = OracleConfig::new(&mut b);
            if !ect::subsumes(&strengthened, c, &mut cfg).is_yes() {
                return fail("strengthened term is not subsumed by the input".to_string());
            }
        }
    }
    CaseOutcome::Pass
}

// ---------------------------------------------------------------------
// Independent brute-force oracles for T-4.5: instantiate-then-match, with
// its own matcher and its own valuation enumeration, sharing only the
// model evaluator with the implementation under test.

fn own_match(pattern: &Term, subject: &Term, out: &mut Vec<(Var, Term)>) -> bool {
    match pattern {
        Term::Var(v) => {
            if v.sort != subject.sort() {
                return false;
            }
            if let Some((_, bound)) = out.iter().find(|(w, _)| w == v) {
                return bound == subject;
            }
            out.push((v.clone(), subject.clone()));
            true
        }
        Term::App(f, args) => match subject {
            Term::App(g, sargs) if f == g => {
                args.iter().zip(sargs).all(|(p, s)| own_match(p, s, out))
            }
            _ => false,
        },
    }
}

fn own_holds(ec: &ExConstraint, rho: &Valuation, data: &CaseData) -> bool {
    let model = crate::logic::TheoryModel::int_mod(data.modulus);
    let m = data.modulus as i64;
    let binders = &ec.binders;
    let mut counters = vec![0i64; binders.len()];
    loop {
        let mut full = rho.clone();
        for (i, bvar) in binders.iter().enumerate() {
            let val = if bvar.sort == Sort::bool() {
                Value::Bool(counters[i] != 0)
            } else {
                Value::Int(counters[i])
            };
            full.set(bvar.clone(), val);
        }
        if model.evaluate(&ec.body, &full) == Ok(Value::Bool(true)) {
            return true;
        }
        let mut k = binders.len();
        loop {
            if k == 0 {
                return false;
            }
            k -= 1;
            counters[k] += 1;
            let limit = if binders[k].sort == Sort::bool() { 2 } else { m };
            if counters[k] < limit {
                break;
            }
            counters[k] = 0;
        }
    }
}

/// Membership of `u` in the standard interpretation of `b`, by
/// enumerating logical valuations and matching the instantiated term.
fn oracle_member(b: &ECTerm, u: &Term, data: &CaseData) -> bool {
    let model = crate::logic::TheoryModel::int_mod(data.modulus);
    let m = data.modulus as i64;
    let logical: Vec<Var> = b.logical_vars.iter().cloned().collect();
    let mut counters = vec![0i64; logical.len()];
    loop {
        let mut rho = Valuation::new();
        let mut s = Subst::new();
        for (i, x) in logical.iter().enumerate() {
            let val = if x.sort == Sort::bool() {
                Value::Bool(counters[i] != 0)
            } else {
                Value::Int(counters[i])
            };
            rho.set(x.clone(), val);
            s.bind(x.clone(), model.value_term(val)).unwrap();
        }
        if own_holds(&b.constraint, &rho, data) {
            let pattern = s.apply(&b.term);
            let mut bindings = Vec::new();
            if own_match(&pattern, u, &mut bindings) {
                return true;
            }
        }
        let mut k = logical.len();
        loop {
            if k == 0 {
                return false;
            }
            k -= 1;
            counters[k] += 1;
            let limit = if logical[k].sort == Sort::bool() { 2 } else { m };
            if counters[k] < limit {
                break;
            }
            counters[k] = 0;
        }
    }
}

/// A finite sample of the standard interpretation of `a`: all logical
/// valuations crossed with a handful of non-logical perturbations
/// (identity, collapse to one shared variable, ground values, one-level
/// contexts).
fn oracle_sample(a: &ECTerm, data: &CaseData) -> Vec<Term> {
    let model = crate::logic::TheoryModel::int_mod(data.modulus);
    let m = data.modulus as i64;
    let logical: Vec<Var> = a.logical_vars.iter().cloned().collect();
    let non_logical: Vec<Var> = a.non_logical_vars().into_iter().collect();

    let mut perturbations: Vec<Subst> = vec![Subst::new()];
    if !non_logical.is_empty() {
        // Collapse all same-sorted non-logical variables onto one.
        let mut collapse = Subst::new();
        for v in &non_logical {
            let shared = Var::new("shared", v.sort.clone());
            collapse.bind(v.clone(), Term::Var(shared)).unwrap();
        }
        perturbations.push(collapse);
        // Ground the theory-sorted ones.
        let mut grounded = Subst::new();
        for v in &non_logical {
            if v.sort == Sort::int() {
                grounded.bind(v.clone(), model.value_term(Value::Int(1))).unwrap();
            } else if v.sort == Sort::bool() {
                grounded.bind(v.clone(), model.value_term(Value::Bool(true))).unwrap();
            }
        }
        perturbations.push(grounded);
        // One-level context around each variable, when the signature has
        // a fitting unary position.
        let mut wrapped = Subst::new();
        for v in &non_logical {
            if let Some((f, idx)) = data.sig.embedding_symbol(&v.sort, &v.sort) {
                let args: Vec<Term> = f
                    .arg_sorts()
                    .iter()
                    .enumerate()
                    .map(|(i, s)| {
                        if i == idx {
                            Term::Var(v.clone())
                        } else {
                            Term::Var(Var::new(&format!("ctx{i}"), s.clone()))
                        }
                    })
                    .collect();
                if f.kind() == crate::term::Kind::Term {
                    wrapped.bind(v.clone(), Term::App(f.clone(), args)).unwrap();
                }
            }
        }
        if !wrapped.is_empty() {
            perturbations.push(wrapped);
        }
    }

    let mut out = Vec::new();
    let mut counters = vec![0i64; logical.len()];
    'outer: loop {
        let mut rho = Valuation::new();
        let mut s = Subst::new();
        for (i, x) in logical.iter().enumerate() {
            let val = if x.sort == Sort::bool() {
                Value::Bool(counters[i] != 0)
            } else {
                Value::Int(counters[i])
            };
            rho.set(x.clone(), val);
            s.bind(x.clone(), model.value_term(val)).unwrap();
        }
        if own_holds(&a.constraint, &rho, data) {
            let base = s.apply(&a.term);
            for p in &perturbations {
                out.push(p.apply(&base));
                if out.len() >= 200 {
                    break 'outer;
                }
            }
        }
        let mut k = logical.len();
        loop {
            if k == 0 {
                break 'outer;
            }
            k -= 1;
            counters[k] += 1;
            let limit = if logical[k].sort == Sort::bool() { 2 } else { m };
            if counters[k] < limit {
                break;
            }
            counters[k] = 0;
        }
    }
    out
}

fn oracle_included(a: &ECTerm, b: &ECTerm, data: &CaseData) -> Result<(), Term> {
    for u in oracle_sample(a, data) {
        if !oracle_member(b, &u, data) {
            return Err(u);
        }
    }
    Ok(())
}

/// Subsumption and equivalence verdicts agree with brute-force instance
/// inclusion and equality.
fn t45(data: &CaseData) -> CaseOutcome {
    let pairs: Vec<(&ECTerm, &ECTerm)> = vec![
        (&data.ects[0], &data.ects[1]),
        (&data.ects[0], &data.ects[2]),
        (&data.ects[2], &data.ects[0]),
        (&data.ects[0], &data.ects[0]),
    ];
    let mut b = backend(data);
    for (left, right) in pairs {
        let mut cfg = OracleConfig::new(&mut b);
        let sub = ect::subsumes(left, right, &mut cfg);
        let oracle = oracle_included(left, right, data);
        match (&sub, &oracle) {
            (TriVerdict::Yes(_), Ok(())) => {}
            (TriVerdict::No(cex), Err(_)) => {
                // The implementation's counterexample must itself pass the
                // independent membership checks.
                if !oracle_member(left, cex, data) || oracle_member(right, cex, data) {
                    return fail(format!("counterexample {cex} fails independent re-check"));
                }
            }
            (TriVerdict::Yes(_), Err(u)) => {
                return fail(format!("subsumes said yes, oracle found escapee {u}"))
            }
            (TriVerdict::No(cex), Ok(())) => {
                // The oracle sample may have missed the counterexample;
                // re-check it directly before declaring disagreement.
                if oracle_member(left, cex, data) && !oracle_member(right, cex, data) {
                    continue;
                }
                return fail(format!("subsumes said no with bogus counterexample {cex}"));
            }
            (TriVerdict::Unknown(r), _) => {
                return fail(format!("finite-mode subsumption returned unknown: {r}"))
            }
        }

        let mut cfg = OracleConfig::new(&mut b);
        let eq = ect::equivalent(left, right, &mut cfg);
        let incl_lr = oracle_included(left, right, data).is_ok();
        let incl_rl = oracle_included(right, left, data).is_ok();
        match (&eq, incl_lr && incl_rl) {
            (TriVerdict::Yes(_), true) => {}
            (TriVerdict::No(_), false) => {}
            (TriVerdict::No(cex), true) => {
                let in_l = oracle_member(left, cex, data);
                let in_r = oracle_member(right, cex, data);
                if in_l != in_r {
                    continue; // genuine witness the sample missed
                }
                return fail(format!("equivalent said no with bogus witness {cex}"));
            }
            (TriVerdict::Yes(_), false) => {
                return fail("equivalent said yes, oracle refutes one inclusion".to_string())
            }
            (TriVerdict::Unknown(r), _) => {
                return fail(format!("finite-mode equivalence returned unknown: {r}"))
            }
        }
    }
    CaseOutcome::Pass
}

/// Extends a witness to all logical variables with the first carrier
/// element and instantiates the term with it.
fn instance_from_gate(c: &ECTerm, witness: &Valuation, data: &CaseData) -> Term {
    let model = crate::logic::TheoryModel::int_mod(data.modulus);
    let mut s = Subst::new();
    for x in &c.logical_vars {
        let val = witness.get(x).unwrap_or(match x.sort == Sort::bool() {
            true => Value::Bool(false),
            false => Value::Int(0),
        });
        s.bind(x.clone(), model.value_term(val)).unwrap();
    }
    s.apply(&c.term)
}

/// Builds the proof witness for the backward direction: an instance of
/// the step input that rewrites to `w` at the step position. The matcher
/// of `w` against the output fixes the surviving variables; logical
/// variables that moved into the output's binders take values from a
/// satisfying completion of the output constraint, and untouched logical
/// variables default to the first carrier element.
fn backward_instance(step: &StepRecord, w: &Term, data: &CaseData) -> Option<Term> {
    let model = crate::logic::TheoryModel::int_mod(data.modulus);
    let ints: Vec<Value> = (0..data.modulus as i64).map(Value::Int).collect();
    let delta = match_term(&step.output.term, w)?;

    // Values of the output's logical variables under the match.
    let mut fixed = Valuation::new();
    for y in &step.output.logical_vars {
        let image = delta.get(y).cloned().unwrap_or_else(|| Term::Var(y.clone()));
        fixed.set(y.clone(), model.normalize(image.as_value()?));
    }
    // One completion of the binder sequence satisfying the output
    // constraint; it carries the values of the dropped logical variables.
    let atoms = logic::conjuncts(&step.output.constraint.body);
    let mut completion: Option<Valuation> = None;
    logic::for_each_prefix_solution(
        &atoms,
        &step.output.constraint.binders,
        &[],
        &fixed,
        &model,
        &ints,
        &mut |rho| {
            completion = Some(rho.clone());
            Ok(false)
        },
    )
    .ok()?;
    let completion = completion?;

    let mut s = delta;
    for x in &step.input.logical_vars {
        if step.output.term.vars().contains(x) {
            continue;
        }
        let value = completion.get(x).unwrap_or(if x.sort == Sort::bool() {
            Value::Bool(false)
        } else {
            Value::Int(0)
        });
        // The variable may already be bound through the match when it
        // survives in the output term; otherwise pin it here.
        let _ = s.bind(x.clone(), model.value_term(value));
    }
    Some(s.apply(&step.input.term))
}

/// Standard-interpretation characterization of a single partial step.
fn t48(data: &CaseData) -> CaseOutcome {
    let mut b = backend(data);
    let d = domain(data);
    let c = &data.ects[0];
    let pa = try_check!(engine::all_steps(c, &data.system, Mode::Partial, &mut b), "scan");
    if pa.steps.is_empty() {
        return CaseOutcome::Vacuous;
    }
    for step in &pa.steps {
        let rule = data.system.rule(&step.redex.rule_id).unwrap();
        let ground = try_check!(interp::interpret_rule(rule, &d), "interpret rule");
        let p = Some(&step.redex.position);

        // (1) some instance of the input reduces at p; the gate witness
        // provides one constructively.
        let GateEvidence::Satisfiable(witness) = &step.redex.gate else {
            return fail("partial step without a sat gate".to_string());
        };
        let u = instance_from_gate(c, witness, data);
        if interp::ground_steps(&u, &ground, p).is_empty() {
            return fail(format!("gate-witness instance {u} is irreducible at {}", step.redex.position));
        }

        // (2) every instance of the output is reached from some instance
        // of the input in one step at p.
        let outs = try_check!(interp::enumerate_instances(&step.output, &d), "output instances");
        for w in outs.iter().take(SAMPLE) {
            let Some(u) = backward_instance(step, w, data) else {
                return fail(format!("no backward instance for {w}"));
            };
            let ok_in = try_check!(interp::contains_instance(c, &u, &d), "membership");
            if !ok_in {
                return fail(format!("backward instance {u} is not an input instance"));
            }
            if !interp::ground_steps(&u, &ground, p).contains(w) {
                return fail(format!("{u} does not step to {w} at {}", step.redex.position));
            }
        }

        // (3) every one-step reduct at p of an input instance lands in
        // the output's interpretation.
        let ins = try_check!(interp::enumerate_instances(c, &d), "input instances");
        for u in ins.iter().take(SAMPLE) {
            for v in interp::ground_steps(u, &ground, p) {
                let ok = try_check!(interp::contains_instance(&step.output, &v, &d), "membership");
                if !ok {
                    return fail(format!("reduct {v} of {u} escapes the output interpretation"));
                }
            }
        }
    }
    CaseOutcome::Pass
}

/// Reduction-level characterization over one- and two-step reductions:
/// forward tracking for most general mode, backward tracking for both.
fn t_reduction(data: &CaseData, mode: Mode) -> CaseOutcome {
    let mut b = backend(data);
    let d = domain(data);
    let c0 = &data.ects[0];
    let first = try_check!(engine::all_steps(c0, &data.system, mode, &mut b), "scan");
    let Some(step1) = first.steps.first().cloned() else {
        return CaseOutcome::Vacuous;
    };
    let mut chain = vec![step1.clone()];
    if let Ok(second) = engine::all_steps(&step1.output, &data.system, mode, &mut b) {
        if let Some(step2) = second.steps.first().cloned() {
            chain.push(step2);
        }
    }
    let grounds: Vec<BTreeSet<GroundRule>> = {
        let mut out = Vec::new();
        for step in &chain {
            let rule = data.system.rule(&step.redex.rule_id).unwrap();
            out.push(try_check!(interp::interpret_rule(rule, &d), "interpret rule"));
        }
        out
    };
    let last = chain.last().unwrap();

    // Backward: every instance of the final term is reached from some
    // instance of the start by rewriting at the recorded positions.
    let finals = try_check!(interp::enumerate_instances(&last.output, &d), "final instances");
    for v in finals.iter().take(SAMPLE) {
        let mut target = v.clone();
        for (step, ground) in chain.iter().zip(&grounds).rev() {
            let Some(u) = backward_instance(step, &target, data) else {
                return fail(format!("no backward instance for {target}"));
            };
            if !interp::ground_steps(&u, ground, Some(&step.redex.position)).contains(&target) {
                return fail(format!("{u} does not step to {target}"));
            }
            target = u;
        }
        let ok = try_check!(interp::contains_instance(c0, &target, &d), "membership");
        if !ok {
            return fail(format!("backward chain left the start interpretation at {target}"));
        }
    }

    // Forward (most general only): every instance of the start reduces
    // into the final interpretation.
    if mode == Mode::MostGeneral {
        let starts = try_check!(interp::enumerate_instances(c0, &d), "start instances");
        for u in starts.iter().take(SAMPLE) {
            let mut cur = u.clone();
            for (step, ground) in chain.iter().zip(&grounds) {
                let nexts = interp::ground_steps(&cur, ground, Some(&step.redex.position));
                let Some(next) = nexts.iter().next().cloned() else {
                    return fail(format!("{cur} stuck at {}", step.redex.position));
                };
                cur = next;
            }
            let ok = try_check!(interp::contains_instance(&last.output, &cur, &d), "membership");
            if !ok {
                return fail(format!("forward chain left the final interpretation at {cur}"));
            }
        }
    }
    CaseOutcome::Pass
}

/// Every standard instance of the input of a most general step is
/// reducible at the step position.
fn t410(data: &CaseData) -> CaseOutcome {
    let mut b = backend(data);
    let d = domain(data);
    let c = &data.ects[0];
    let mg = try_check!(engine::all_steps(c, &data.system, Mode::MostGeneral, &mut b), "scan");
    if mg.steps.is_empty() {
        return CaseOutcome::Vacuous;
    }
    for step in &mg.steps {
        let rule = data.system.rule(&step.redex.rule_id).unwrap();
        let ground = try_check!(interp::interpret_rule(rule, &d), "interpret rule");
        let ins = try_check!(interp::enumerate_instances(c, &d), "instances");
        for u in ins.iter().take(SAMPLE) {
            if interp::ground_steps(u, &ground, Some(&step.redex.position)).is_empty() {
                return fail(format!("instance {u} irreducible at {}", step.redex.position));
            }
        }
    }
    CaseOutcome::Pass
}

/// Value-interpretation characterization of a single partial step.
fn t61(data: &CaseData) -> CaseOutcome {
    let mut b = backend(data);
    let d = domain(data);
    let c = &data.ects[0];
    let pa = try_check!(engine::all_steps(c, &data.system, Mode::Partial, &mut b), "scan");
    if pa.steps.is_empty() {
        return CaseOutcome::Vacuous;
    }
    for step in &pa.steps {
        let rule = data.system.rule(&step.redex.rule_id).unwrap();
        let ground = try_check!(interp::interpret_rule(rule, &d), "interpret rule");
        let p = Some(&step.redex.position);

        // (1) with non-logical variables untouched, the gate witness
        // yields a value instance that reduces at p.
        let GateEvidence::Satisfiable(witness) = &step.redex.gate else {
            return fail("partial step without a sat gate".to_string());
        };
        let u = instance_from_gate(c, witness, data);
        let is_vi = try_check!(interp::is_value_instance(c, &u, &d), "value membership");
        if !is_vi {
            return fail(format!("gate-witness instance {u} is not a value instance"));
        }
        if interp::ground_steps(&u, &ground, p).is_empty() {
            return fail(format!("value instance {u} irreducible at {}", step.redex.position));
        }

        // (2) every value instance of the output is reached from a value
        // instance of the input.
        let outs = try_check!(interp::enumerate_value_instances(&step.output, &d), "output values");
        for w in &outs {
            let Some(u) = backward_instance(step, w, data) else {
                return fail(format!("no backward value instance for {w}"));
            };
            let ok = try_check!(interp::is_value_instance(c, &u, &d), "value membership");
            if !ok {
                return fail(format!("backward instance {u} is not a value instance"));
            }
            if !interp::ground_steps(&u, &ground, p).contains(w) {
                return fail(format!("{u} does not step to {w}"));
            }
        }

        // (3) reducts of value instances at p are value instances of the
        // output.
        let ins = try_check!(interp::enumerate_value_instances(c, &d), "input values");
        for u in &ins {
            for v in interp::ground_steps(u, &ground, p) {
                let ok = try_check!(interp::is_value_instance(&step.output, &v, &d), "value membership");
                if !ok {
                    return fail(format!("reduct {v} is not a value instance of the output"));
                }
            }
        }
    }
    CaseOutcome::Pass
}

/// A reducible value instance forces a partial step whose reduct covers
/// the ground reduct.
fn t62(data: &CaseData) -> CaseOutcome {
    let mut b = backend(data);
    let d = domain(data);
    let c = &data.ects[0];
    let values = try_check!(interp::enumerate_value_instances(c, &d), "values");
    let mut fired = false;
    for rule in &data.system.rules {
        let ground = try_check!(interp::interpret_rule(rule, &d), "interpret rule");
        if ground.is_empty() {
            continue;
        }
        let scan = try_check!(engine::find_redexes(c, rule, Mode::Partial, &mut b), "scan");
        for u in &values {
            for p in u.positions() {
                let reducts = interp::ground_steps(u, &ground, Some(&p));
                if reducts.is_empty() {
                    continue;
                }
                fired = true;
                let Some(redex) = scan.redexes.iter().find(|r| r.info.position == p) else {
                    return fail(format!(
                        "value instance {u} reduces at {p} but {} has no partial redex there",
                        rule.id
                    ));
                };
                let output = try_check!(engine::construct_step(c, redex), "construct");
                for v in &reducts {
                    let ok = try_check!(interp::is_value_instance(&output, v, &d), "value membership");
                    if !ok {
                        return fail(format!("ground reduct {v} escapes the step output {output}"));
                    }
                }
            }
        }
    }
    if fired {
        CaseOutcome::Pass
    } else {
        CaseOutcome::Vacuous
    }
}

/// Partial normal forms are exactly the terms all of whose value
/// instances are ground-normal.
fn t63(data: &CaseData) -> CaseOutcome {
    let mut b = backend(data);
    let d = domain(data);
    let c = &data.ects[0];
    let ground = try_check!(interp::interpret_system(&data.system, &d), "interpret system");
    let values = try_check!(interp::enumerate_value_instances(c, &d), "values");
    let all_ground_normal = values.iter().all(|u| !interp::ground_reducible(u, &ground, None));
    let verdict = try_check!(engine::is_normal_form(c, &data.system, Mode::Partial, &mut b), "nf");
    match verdict {
        TriVerdict::Yes(_) if all_ground_normal => CaseOutcome::Pass,
        TriVerdict::No(_) if !all_ground_normal => CaseOutcome::Pass,
        TriVerdict::Yes(_) => fail("partial-normal but some value instance reduces".to_string()),
        TriVerdict::No(step) => fail(format!(
            "partial step {} at {} exists but every value instance is ground-normal",
            step.redex.rule_id, step.redex.position
        )),
        TriVerdict::Unknown(r) => fail(format!("unexpected unknown in exact mode: {r}")),
    }
}

/// If every value instance reduces at a fixed position with a fixed rule,
/// a most general step exists there.
fn t65(data: &CaseData) -> CaseOutcome {
    let mut b = backend(data);
    let d = domain(data);
    let c = &data.ects[0];
    let values = try_check!(interp::enumerate_value_instances(c, &d), "values");
    if values.is_empty() {
        return CaseOutcome::Vacuous;
    }
    let mut fired = false;
    for rule in &data.system.rules {
        let ground = try_check!(interp::interpret_rule(rule, &d), "interpret rule");
        for p in c.term.positions() {
            let all_reduce =
                values.iter().all(|u| !interp::ground_steps(u, &ground, Some(&p)).is_empty());
            if !all_reduce {
                continue;
            }
            fired = true;
            let scan = try_check!(engine::find_redexes(c, rule, Mode::MostGeneral, &mut b), "scan");
            if !scan.redexes.iter().any(|r| r.info.position == p) {
                return fail(format!(
                    "all value instances reduce at {p} by {} but no mg redex exists",
                    rule.id
                ));
            }
        }
    }
    if fired {
        CaseOutcome::Pass
    } else {
        CaseOutcome::Vacuous
    }
}

/// Most general steps at a position exist exactly when every standard
/// instance is reducible there (checked on value instances exactly, and
/// on a standard-instance sample).
fn t66(data: &CaseData) -> CaseOutcome {
    let mut b = backend(data);
    let d = domain(data);
    let c = &data.ects[0];
    let values = try_check!(interp::enumerate_value_instances(c, &d), "values");
    if values.is_empty() {
        return CaseOutcome::Vacuous;
    }
    let standard = try_check!(interp::enumerate_instances(c, &d), "instances");
    for rule in &data.system.rules {
        let ground = try_check!(interp::interpret_rule(rule, &d), "interpret rule");
        let scan = try_check!(engine::find_redexes(c, rule, Mode::MostGeneral, &mut b), "scan");
        for p in c.term.positions() {
            let mg_here = scan.redexes.iter().any(|r| r.info.position == p);
            let all_values_reduce =
                values.iter().all(|u| !interp::ground_steps(u, &ground, Some(&p)).is_empty());
            if mg_here != all_values_reduce {
                return fail(format!(
                    "rule {} at {p}: mg step {} but value instances {} reducible",
                    rule.id,
                    if mg_here { "exists" } else { "missing" },
                    if all_values_reduce { "all" } else { "not all" }
                ));
            }
            if mg_here {
                for u in standard.iter().take(SAMPLE) {
                    if interp::ground_steps(u, &ground, Some(&p)).is_empty() {
                        return fail(format!("standard instance {u} irreducible at {p}"));
                    }
                }
            }
        }
    }
    CaseOutcome::Pass
}

/// Most general normal forms: for every rule and position some value
/// instance resists.
fn t67(data: &CaseData) -> CaseOutcome {
    let mut b = backend(data);
    let d = domain(data);
    let c = &data.ects[0];
    let values = try_check!(interp::enumerate_value_instances(c, &d), "values");
    if values.is_empty() {
        return CaseOutcome::Vacuous;
    }
    let mut resisting_everywhere = true;
    'rules: for rule in &data.system.rules {
        let ground = try_check!(interp::interpret_rule(rule, &d), "interpret rule");
        for p in c.term.positions() {
            let some_resists =
                values.iter().any(|u| interp::ground_steps(u, &ground, Some(&p)).is_empty());
            if !some_resists {
                resisting_everywhere = false;
                break 'rules;
            }
        }
    }
    let verdict = try_check!(engine::is_normal_form(c, &data.system, Mode::MostGeneral, &mut b), "nf");
    match (verdict, resisting_everywhere) {
        (TriVerdict::Yes(_), true) | (TriVerdict::No(_), false) => CaseOutcome::Pass,
        (TriVerdict::Yes(_), false) => {
            fail("mg-normal though some (rule, position) reduces every value instance".to_string())
        }
        (TriVerdict::No(step), true) => fail(format!(
            "mg step {} at {} exists though every (rule, position) has a resisting instance",
            step.redex.rule_id, step.redex.position
        )),
        (TriVerdict::Unknown(r), _) => fail(format!("unexpected unknown in exact mode: {r}")),
    }
}

/// Instantiation-normality implies partial-normality; the converse fails
/// on the classic single-rule witness over a free unary symbol.
fn t69(data: &CaseData) -> CaseOutcome {
    let mut b = backend(data);
    let d = domain(data);
    let c = &data.ects[0];
    let verdict = interp::instantiation_normal(c, &data.system, &data.sig, &d);
    if let TriVerdict::Unknown(r) = &verdict {
        return fail(format!("unexpected unknown in exact mode: {r}"));
    }
    if verdict.is_yes() {
        let nf = try_check!(engine::is_normal_form(c, &data.system, Mode::Partial, &mut b), "nf");
        if !nf.is_yes() {
            return fail("instantiation-normal but not partial-normal".to_string());
        }
    }

    // Fixed converse witness: f(a) -> b with the unconstrained f(x).
    match converse_witness(data.modulus) {
        Ok(()) => CaseOutcome::Pass,
        Err(e) => fail(e),
    }
}

/// The fixed Prop-6.9 counterexample, checked exactly.
pub fn converse_witness(modulus: u32) -> Result<(), String> {
    let mut sig = crate::signature::Signature::with_builtins();
    let u = Sort::term("W");
    sig.declare(crate::term::FunSym::new("fw", vec![u.clone()], u.clone(), crate::term::Kind::Term))
        .map_err(|e| e.to_string())?;
    sig.declare(crate::term::FunSym::new("aw", vec![], u.clone(), crate::term::Kind::Term))
        .map_err(|e| e.to_string())?;
    sig.declare(crate::term::FunSym::new("bw", vec![], u.clone(), crate::term::Kind::Term))
        .map_err(|e| e.to_string())?;
    let fw = |t: Term| Term::app(sig.lookup("fw", 1).unwrap().clone(), vec![t]).unwrap();
    let aw = Term::app(sig.lookup("aw", 0).unwrap().clone(), vec![]).unwrap();
    let bw = Term::app(sig.lookup("bw", 0).unwrap().clone(), vec![]).unwrap();
    let rule = ConstrainedRule::new("fa", [], fw(aw.clone()), bw, Term::value(Value::Bool(true)));
    let sys = Lctrs::without_calc(vec![rule]);
    let c = ECTerm::unconstrained([], fw(Term::Var(Var::new("x", u))));
    let d = DomainSpec::modular(modulus);
    let mut b = EnumBackend::new(modulus);

    match engine::is_normal_form(&c, &sys, Mode::Partial, &mut b) {
        Ok(v) if v.is_yes() => {}
        other => return Err(format!("witness term must be partial-normal, got {other:?}")),
    }
    match interp::instantiation_normal(&c, &sys, &sig, &d) {
        TriVerdict::No(witness) => {
            if witness != fw(aw) {
                return Err(format!("expected witness fw(aw), got {witness}"));
            }
        }
        other => return Err(format!("expected instantiation-normal = No, got {}", other.label())),
    }
    Ok(())
}
