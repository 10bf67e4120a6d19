//! Redex search and step construction for most general and partial
//! constrained rewriting, plus reduction search and normal-form tests.
//!
//! Both step kinds share conditions on the matcher; they differ only in
//! the gate: a partial redex needs the conjunction of the constraint and
//! the instantiated guard to be satisfiable, a most general redex needs
//! the implication to be valid. Unknown gate verdicts never create or
//! suppress steps silently; they are reported on a side channel.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::ect::{self, ECTerm, OracleConfig, TriVerdict};
use crate::interp::{self, DomainSpec};
use crate::logic::{
    and, ConstraintBackend, ExConstraint, LogicError, SolverVerdict, ValidityVerdict, Valuation,
};
use crate::rules::{ConstrainedRule, Lctrs, RuleViolation};
use crate::term::{match_left_linear, Position, Subst, Term, TermError, Value, Var};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    MostGeneral,
    Partial,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mode::MostGeneral => f.write_str("mg"),
            Mode::Partial => f.write_str("partial"),
        }
    }
}

/// Evidence produced by the gate check of a redex.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GateEvidence {
    /// Partial mode: the conjoined constraint is satisfiable.
    Satisfiable(Valuation),
    /// Most general mode: the implication is valid.
    ValidImplication,
    Unknown(String),
}

impl fmt::Display for GateEvidence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GateEvidence::Satisfiable(w) => write!(f, "sat {w}"),
            GateEvidence::ValidImplication => f.write_str("valid"),
            GateEvidence::Unknown(r) => write!(f, "unknown ({r})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RedexInfo {
    pub position: Position,
    pub matcher: Subst,
    pub rule_id: String,
    pub mode: Mode,
    pub gate: GateEvidence,
}

/// A gated redex together with the fresh rule variant it was found with.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Redex {
    pub info: RedexInfo,
    pub variant: ConstrainedRule,
}

/// Result of scanning one rule over one constrained term.
#[derive(Debug, Clone, Default)]
pub struct RedexScan {
    pub redexes: Vec<Redex>,
    /// Candidate redexes whose gate came back unknown.
    pub unknown_gated: Vec<RedexInfo>,
}

/// One rewrite step: everything needed to replay and audit it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepRecord {
    pub input: ECTerm,
    pub redex: RedexInfo,
    pub variant: ConstrainedRule,
    pub output: ECTerm,
}

#[derive(Debug, Clone, Default)]
pub struct StepScan {
    pub steps: Vec<StepRecord>,
    pub unknown_gated: Vec<RedexInfo>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EngineError {
    #[error("input constrained term is unsatisfiable")]
    UnsatisfiableInput,
    #[error("satisfiability of the input could not be established: {0}")]
    InputSatUnknown(String),
    #[error("rule {0} is not left-linear")]
    NotLeftLinear(String),
    #[error("rule {id} is invalid: {violation}")]
    InvalidRule { id: String, violation: RuleViolation },
    #[error(transparent)]
    Logic(#[from] LogicError),
    #[error(transparent)]
    Term(#[from] TermError),
}

fn require_sat(c: &ECTerm, backend: &mut dyn ConstraintBackend) -> Result<(), EngineError> {
    match c.is_sat(backend)? {
        SolverVerdict::Sat(_) => Ok(()),
        SolverVerdict::Unsat => Err(EngineError::UnsatisfiableInput),
        SolverVerdict::Unknown(r) => Err(EngineError::InputSatUnknown(r)),
    }
}

/// Scans one left-linear rule over a satisfiable constrained term, in
/// leftmost-outermost position order.
pub fn find_redexes(
    c: &ECTerm,
    rule: &ConstrainedRule,
    mode: Mode,
    backend: &mut dyn ConstraintBackend,
) -> Result<RedexScan, EngineError> {
    require_sat(c, backend)?;
    let flags = rule
        .validate()
        .map_err(|violation| EngineError::InvalidRule { id: rule.id.clone(), violation })?;
    if !flags.left_linear {
        return Err(EngineError::NotLeftLinear(rule.id.clone()));
    }

    // A renamed variant disjoint from the term, the constraint body and
    // the binders. The rule's own names go into the avoid set too, so
    // every variant variable gets a fresh `#k` name; reducts of a rule
    // can then never collide with the rule itself.
    let mut avoid = c.all_vars();
    avoid.extend(rule.all_vars());
    let (variant, _) = rule.fresh_variant(&avoid);

    // Binder sequence of the instantiated guard: guard variables outside
    // the left-hand side, in first-occurrence order.
    let lhs_vars = variant.lhs.vars();
    let gate_binders: Vec<Var> = variant
        .guard
        .vars_ordered()
        .into_iter()
        .filter(|v| !lhs_vars.contains(v))
        .collect();

    let mut scan = RedexScan::default();
    for position in c.term.positions() {
        let subject = c.term.subterm_at(&position)?;
        let Some(matcher) = match_left_linear(&variant.lhs, subject)? else {
            continue;
        };
        // Theory variables of the left-hand side must be matched to
        // values or logical variables.
        let cond3 = lhs_vars
            .intersection(&variant.theory_vars)
            .all(|v| match matcher.get(v) {
                Some(t) => {
                    t.is_value() || matches!(t, Term::Var(w) if c.logical_vars.contains(w))
                }
                None => false,
            });
        if !cond3 {
            continue;
        }
        let guard_inst = ExConstraint::new(gate_binders.clone(), matcher.apply(&variant.guard));
        let gate = match mode {
            Mode::Partial => {
                let conj = crate::logic::prenex_conjoin(&c.constraint, &guard_inst);
                match backend.check_sat(&conj)? {
                    SolverVerdict::Sat(w) => Some(GateEvidence::Satisfiable(w)),
                    SolverVerdict::Unsat => None,
                    SolverVerdict::Unknown(r) => {
                        scan.unknown_gated.push(RedexInfo {
                            position,
                            matcher,
                            rule_id: rule.id.clone(),
                            mode,
                            gate: GateEvidence::Unknown(r),
                        });
                        continue;
                    }
                }
            }
            Mode::MostGeneral => match backend.check_valid_implication(&c.constraint, &guard_inst)? {
                ValidityVerdict::Valid => Some(GateEvidence::ValidImplication),
                ValidityVerdict::NotValid(_) => None,
                ValidityVerdict::Unknown(r) => {
                    scan.unknown_gated.push(RedexInfo {
                        position,
                        matcher,
                        rule_id: rule.id.clone(),
                        mode,
                        gate: GateEvidence::Unknown(r),
                    });
                    continue;
                }
            },
        };
        if let Some(gate) = gate {
            scan.redexes.push(Redex {
                info: RedexInfo {
                    position,
                    matcher,
                    rule_id: rule.id.clone(),
                    mode,
                    gate,
                },
                variant: variant.clone(),
            });
        }
    }
    Ok(scan)
}

/// Builds the reduct of a gated redex:
/// the term is rewritten in place, the instantiated guard is conjoined
/// verbatim, binders extend by the fresh constraint variables that left
/// the term, and the logical set becomes the extra variables plus the
/// surviving logical variables.
pub fn construct_step(c: &ECTerm, redex: &Redex) -> Result<ECTerm, EngineError> {
    let variant = &redex.variant;
    let gamma = &redex.info.matcher;
    let t = c.term.replace_at(&redex.info.position, gamma.apply(&variant.rhs))?;
    let psi = and(c.constraint.body.clone(), gamma.apply(&variant.guard));

    let t_vars = t.vars();
    let mut binders = c.constraint.binders.clone();
    let mut binder_set: BTreeSet<Var> = binders.iter().cloned().collect();
    for v in psi.vars_ordered() {
        if !t_vars.contains(&v) && binder_set.insert(v.clone()) {
            binders.push(v);
        }
    }

    let mut logical: BTreeSet<Var> = variant.extra_vars();
    logical.extend(c.logical_vars.intersection(&t_vars).cloned());

    let out = ECTerm::new(logical, t, ExConstraint::new(binders, psi));
    debug_assert_eq!(out.well_formed(), Ok(()), "constructed step must be well-formed");
    Ok(out)
}

/// All rewrite steps of a system on a constrained term: rule order, then
/// position order. Deterministic.
pub fn all_steps(
    c: &ECTerm,
    sys: &Lctrs,
    mode: Mode,
    backend: &mut dyn ConstraintBackend,
) -> Result<StepScan, EngineError> {
    require_sat(c, backend)?;
    let mut out = StepScan::default();
    for rule in &sys.rules {
        let scan = find_redexes(c, rule, mode, backend)?;
        out.unknown_gated.extend(scan.unknown_gated);
        for redex in scan.redexes {
            let output = construct_step(c, &redex)?;
            out.steps.push(StepRecord {
                input: c.clone(),
                redex: redex.info,
                variant: redex.variant,
                output,
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NormalEvidence {
    pub rules_checked: usize,
    pub positions_checked: usize,
}

pub type NormalVerdict = TriVerdict<NormalEvidence, Box<StepRecord>>;

/// Whether the constrained term is a normal form for the system in the
/// given mode. `Unknown` when emptiness rests on an unknown gate.
pub fn is_normal_form(
    c: &ECTerm,
    sys: &Lctrs,
    mode: Mode,
    backend: &mut dyn ConstraintBackend,
) -> Result<NormalVerdict, EngineError> {
    let scan = all_steps(c, sys, mode, backend)?;
    if let Some(step) = scan.steps.into_iter().next() {
        return Ok(TriVerdict::No(Box::new(step)));
    }
    if !scan.unknown_gated.is_empty() {
        let first = &scan.unknown_gated[0];
        return Ok(TriVerdict::Unknown(format!(
            "gate unknown for rule {} at {}",
            first.rule_id, first.position
        )));
    }
    Ok(TriVerdict::Yes(NormalEvidence {
        rules_checked: sys.rules.len(),
        positions_checked: c.term.positions().len(),
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    /// Explore every step of every node.
    Full,
    /// Follow only the first step (rule order, then position order).
    First,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeStatus {
    /// Expanded into children.
    Inner,
    Normal,
    FuelExhausted,
    /// No steps found but at least one gate was unknown.
    UnknownGated,
}

#[derive(Debug, Clone)]
pub struct ReductionNode {
    pub ect: ECTerm,
    pub depth: usize,
    pub parent: Option<usize>,
    /// The step that produced this node from its parent.
    pub step: Option<StepRecord>,
    pub status: NodeStatus,
}

/// Breadth-first reduction tree with frontier classification.
#[derive(Debug, Clone)]
pub struct ReductionTree {
    pub nodes: Vec<ReductionNode>,
}

impl ReductionTree {
    pub fn frontier(&self) -> impl Iterator<Item = (usize, &ReductionNode)> {
        self.nodes.iter().enumerate().filter(|(_, n)| n.status != NodeStatus::Inner)
    }

    pub fn normal_nodes(&self) -> impl Iterator<Item = &ReductionNode> {
        self.nodes.iter().filter(|n| n.status == NodeStatus::Normal)
    }

    /// All steps taken, in discovery order.
    pub fn steps(&self) -> impl Iterator<Item = &StepRecord> {
        self.nodes.iter().filter_map(|n| n.step.as_ref())
    }

    /// Carrier elements denoted by normal frontier nodes whose value
    /// instances are bare values.
    pub fn value_normal_forms(&self, d: &DomainSpec) -> Result<BTreeSet<Value>, crate::interp::InterpError> {
        let mut out = BTreeSet::new();
        for node in self.normal_nodes() {
            for inst in interp::enumerate_value_instances(&node.ect, d)? {
                if let Some(v) = inst.as_value() {
                    out.insert(d.model().normalize(v));
                }
            }
        }
        Ok(out)
    }
}

/// Bounded exploration of the reduction space. `fuel` bounds the path
/// depth. Frontier nodes are deduplicated up to definite equivalence;
/// unknown equivalence keeps both.
pub fn reduce(
    c: &ECTerm,
    sys: &Lctrs,
    mode: Mode,
    fuel: usize,
    strategy: Strategy,
    backend: &mut dyn ConstraintBackend,
) -> Result<ReductionTree, EngineError> {
    require_sat(c, backend)?;
    let mut nodes = vec![ReductionNode {
        ect: c.clone(),
        depth: 0,
        parent: None,
        step: None,
        status: NodeStatus::Normal, // refined below
    }];
    let mut queue = std::collections::VecDeque::from([0usize]);
    while let Some(idx) = queue.pop_front() {
        let (ect, depth) = (nodes[idx].ect.clone(), nodes[idx].depth);
        let scan = all_steps(&ect, sys, mode, backend)?;
        if scan.steps.is_empty() {
            nodes[idx].status = if scan.unknown_gated.is_empty() {
                NodeStatus::Normal
            } else {
                NodeStatus::UnknownGated
            };
            continue;
        }
        if depth >= fuel {
            nodes[idx].status = NodeStatus::FuelExhausted;
            continue;
        }
        nodes[idx].status = NodeStatus::Inner;
        let chosen: Vec<StepRecord> = match strategy {
            Strategy::Full => scan.steps,
            Strategy::First => scan.steps.into_iter().take(1).collect(),
        };
        'children: for step in chosen {
            // Deduplicate against every node seen so far.
            for existing in &nodes {
                let mut cfg = OracleConfig::new(backend);
                if ect::equivalent(&existing.ect, &step.output, &mut cfg).is_yes() {
                    continue 'children;
                }
            }
            let child = ReductionNode {
                ect: step.output.clone(),
                depth: depth + 1,
                parent: Some(idx),
                step: Some(step),
                status: NodeStatus::Normal,
            };
            nodes.push(child);
            queue.push_back(nodes.len() - 1);
        }
    }
    Ok(ReductionTree { nodes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::EnumBackend;
    use crate::signature::Signature;
    use crate::term::{FunSym, Kind, Sort};

    fn sig() -> Signature {
        let mut s = Signature::with_builtins();
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

    fn w() -> Var {
        Var::int("w")
    }

    fn rule_1() -> ConstrainedRule {
        ConstrainedRule::new(
            "r1",
            [x()],
            app("sum", vec![Term::Var(x())]),
            int(0),
            app(">=", vec![int(0), Term::Var(x())]),
        )
    }

    fn rule_2() -> ConstrainedRule {
        ConstrainedRule::new(
            "r2",
            [x()],
            app("sum", vec![Term::Var(x())]),
            app("+", vec![Term::Var(x()), app("sum", vec![app("+", vec![Term::Var(x()), int(-1)])])]),
            app("<", vec![int(0), Term::Var(x())]),
        )
    }

    fn between(lo: i64, v: Var, hi: i64) -> Term {
        and(
            app("<=", vec![int(lo), Term::Var(v.clone())]),
            app("<=", vec![Term::Var(v), int(hi)]),
        )
    }

    use crate::logic::and;

    #[test]
    fn mg_redex_at_root() {
        // Π{x}. sum(x) [x > 2] admits an r2-redex at ε with matcher
        // {x#1 -> x}.
        let mut b = EnumBackend::new(16);
        let c = ECTerm::new(
            [x()],
            app("sum", vec![Term::Var(x())]),
            ExConstraint::plain(app(">", vec![Term::Var(x()), int(2)])),
        );
        let scan = find_redexes(&c, &rule_2(), Mode::MostGeneral, &mut b).unwrap();
        assert_eq!(scan.redexes.len(), 1);
        let redex = &scan.redexes[0];
        assert!(redex.info.position.is_root());
        let x1 = Var::int("x#1");
        assert_eq!(redex.info.matcher, Subst::from_pairs([(x1, Term::Var(x()))]).unwrap());

        // The reduct: Π{x}. x + sum(x + -1) [x > 2 /\ x > 0]... with the
        // guard of the variant, 0 < x#1 instantiated to 0 < x.
        let out = construct_step(&c, redex).unwrap();
        assert_eq!(out.logical_vars, BTreeSet::from([x()]));
        assert_eq!(
            out.term,
            app("+", vec![Term::Var(x()), app("sum", vec![app("+", vec![Term::Var(x()), int(-1)])])])
        );
        assert_eq!(
            out.constraint.body,
            and(app(">", vec![Term::Var(x()), int(2)]), app("<", vec![int(0), Term::Var(x())]))
        );
        assert!(out.constraint.binders.is_empty());
        assert_eq!(out.well_formed(), Ok(()));
    }

    #[test]
    fn extra_variables_stay_uninstantiated() {
        // Π{x}. f(x) [x > 2] with rho': f(x') -> x' + y' [y' >= x']. The
        // extra variable of the variant stays uninstantiated, becomes
        // logical in the reduct, and the surviving logical variable x is
        // kept (the constraint still mentions it, so the result would not
        // be well-formed otherwise).
        let mut b = EnumBackend::new(16);
        let xp = Var::int("x'");
        let yp = Var::int("y'");
        let rho = ConstrainedRule::new(
            "rho'",
            [xp.clone(), yp.clone()],
            app("f", vec![Term::Var(xp.clone())]),
            app("+", vec![Term::Var(xp.clone()), Term::Var(yp.clone())]),
            app(">=", vec![Term::Var(yp.clone()), Term::Var(xp.clone())]),
        );
        let c = ECTerm::new(
            [x()],
            app("f", vec![Term::Var(x())]),
            ExConstraint::plain(app(">", vec![Term::Var(x()), int(2)])),
        );
        let scan = find_redexes(&c, &rho, Mode::MostGeneral, &mut b).unwrap();
        assert_eq!(scan.redexes.len(), 1);
        let out = construct_step(&c, &scan.redexes[0]).unwrap();
        let yp1 = Var::int("y'#1");
        assert_eq!(out.term, app("+", vec![Term::Var(x()), Term::Var(yp1.clone())]));
        assert_eq!(out.logical_vars, BTreeSet::from([x(), yp1.clone()]));
        assert_eq!(
            out.constraint.body,
            and(app(">", vec![Term::Var(x()), int(2)]), app(">=", vec![Term::Var(yp1), Term::Var(x())]))
        );
        assert_eq!(out.well_formed(), Ok(()));
    }

    fn example_34_input() -> ECTerm {
        // Π{y}. 1 + sum(y) [∃w. 1 <= w /\ w <= 5 /\ y = w - 1]
        let body = and(
            and(
                app("<=", vec![int(1), Term::Var(w())]),
                app("<=", vec![Term::Var(w()), int(5)]),
            ),
            app("=", vec![Term::Var(y()), app("-", vec![Term::Var(w()), int(1)])]),
        );
        ECTerm::new(
            [y()],
            app("+", vec![int(1), app("sum", vec![Term::Var(y())])]),
            ExConstraint::new(vec![w()], body),
        )
    }

    #[test]
    fn example_34_gate_split() {
        let mut b = EnumBackend::new(16);
        let c = example_34_input();

        // No most general redex with r1.
        let scan = find_redexes(&c, &rule_1(), Mode::MostGeneral, &mut b).unwrap();
        assert!(scan.redexes.is_empty());
        assert!(scan.unknown_gated.is_empty());

        // Exactly one partial redex, at path [2], matcher {x#1 -> y}.
        let scan = find_redexes(&c, &rule_1(), Mode::Partial, &mut b).unwrap();
        assert_eq!(scan.redexes.len(), 1);
        let redex = &scan.redexes[0];
        assert_eq!(redex.info.position, Position(vec![2]));
        let x1 = Var::int("x#1");
        assert_eq!(redex.info.matcher, Subst::from_pairs([(x1, Term::Var(y()))]).unwrap());

        // Reduct: Π∅. 1 + 0 [∃w, y. 1<=w /\ w<=5 /\ y=w-1 /\ 0>=y].
        let out = construct_step(&c, redex).unwrap();
        assert_eq!(out.term, app("+", vec![int(1), int(0)]));
        assert!(out.logical_vars.is_empty());
        assert_eq!(out.constraint.binders, vec![w(), y()]);
        assert_eq!(
            out.constraint.body,
            and(c.constraint.body.clone(), app(">=", vec![int(0), Term::Var(y())]))
        );
        assert_eq!(out.well_formed(), Ok(()));
        assert_eq!(out.to_string(), "1 + 0 [∃w, y. 1 <= w /\\ w <= 5 /\\ y = w - 1 /\\ 0 >= y]");
    }

    #[test]
    fn identity_shaped_rule_yields_equivalent_output() {
        let mut b = EnumBackend::new(5);
        let rule = ConstrainedRule::new(
            "id",
            [x()],
            app("sum", vec![Term::Var(x())]),
            app("sum", vec![Term::Var(x())]),
            Term::value(Value::Bool(true)),
        );
        let c = ECTerm::new(
            [x()],
            app("sum", vec![Term::Var(x())]),
            ExConstraint::plain(app(">=", vec![Term::Var(x()), int(2)])),
        );
        let scan = find_redexes(&c, &rule, Mode::MostGeneral, &mut b).unwrap();
        let out = construct_step(&c, &scan.redexes[0]).unwrap();
        let mut cfg = OracleConfig::new(&mut b);
        assert!(ect::equivalent(&c, &out, &mut cfg).is_yes());
    }

    #[test]
    fn all_steps_on_example_68() {
        // Π{x}. sum(x) [0 <= x /\ x <= 4]: one MG... none; two partial
        // steps at ε; MG-normal.
        let mut b = EnumBackend::new(16);
        let sys = Lctrs::with_calc(vec![rule_1(), rule_2()], &sig());
        let c = ECTerm::new([x()], app("sum", vec![Term::Var(x())]), ExConstraint::plain(between(0, x(), 4)));

        let partial = all_steps(&c, &sys, Mode::Partial, &mut b).unwrap();
        assert_eq!(partial.steps.len(), 2);
        assert!(partial.steps.iter().all(|s| s.redex.position.is_root()));
        assert_eq!(partial.steps[0].redex.rule_id, "r1");
        assert_eq!(partial.steps[1].redex.rule_id, "r2");

        let mg = all_steps(&c, &sys, Mode::MostGeneral, &mut b).unwrap();
        assert!(mg.steps.is_empty());
        assert!(mg.unknown_gated.is_empty());
        assert!(is_normal_form(&c, &sys, Mode::MostGeneral, &mut b).unwrap().is_yes());
    }

    #[test]
    fn all_steps_on_start_term() {
        // Π{x}. sum(x) [1 <= x /\ x <= 5]: exactly one step (r2 at ε) in
        // most general mode.
        let mut b = EnumBackend::new(16);
        let sys = Lctrs::with_calc(vec![rule_1(), rule_2()], &sig());
        let c = ECTerm::new([x()], app("sum", vec![Term::Var(x())]), ExConstraint::plain(between(1, x(), 5)));
        let mg = all_steps(&c, &sys, Mode::MostGeneral, &mut b).unwrap();
        assert_eq!(mg.steps.len(), 1);
        assert_eq!(mg.steps[0].redex.rule_id, "r2");
        assert!(mg.steps[0].redex.position.is_root());
    }

    #[test]
    fn normal_form_examples() {
        let mut b = EnumBackend::new(16);
        // Π{w}. 1 + sum(w) [1 <= w /\ w <= 5] is partial-normal for r1.
        let c = ECTerm::new(
            [w()],
            app("+", vec![int(1), app("sum", vec![Term::Var(w())])]),
            ExConstraint::plain(between(1, w(), 5)),
        );
        let sys = Lctrs::without_calc(vec![rule_1()]);
        assert!(is_normal_form(&c, &sys, Mode::Partial, &mut b).unwrap().is_yes());

        // Π{x}. sum(x) [0 <= x /\ x <= 1]: MG-normal but not
        // partial-normal (r1 fires at x = 0).
        let sys = Lctrs::with_calc(vec![rule_1(), rule_2()], &sig());
        let c = ECTerm::new([x()], app("sum", vec![Term::Var(x())]), ExConstraint::plain(between(0, x(), 1)));
        assert!(is_normal_form(&c, &sys, Mode::MostGeneral, &mut b).unwrap().is_yes());
        match is_normal_form(&c, &sys, Mode::Partial, &mut b).unwrap() {
            TriVerdict::No(step) => assert_eq!(step.redex.rule_id, "r1"),
            other => panic!("expected No, got {}", other.label()),
        }
    }

    #[test]
    fn partial_normality_brute_force_oracle() {
        // Brute force over x in {0, 1}: the r1 gate 0 >= x is satisfiable
        // at x = 0 under the input constraint, so a partial step exists.
        let model = crate::logic::TheoryModel::int_mod(16);
        let mut witnessed = false;
        for xv in 0..=1 {
            let rho = Valuation::from_pairs([(x(), Value::Int(xv))]);
            let input_ok = model
                .evaluate(&between(0, x(), 1), &rho)
                .unwrap()
                .as_bool()
                .unwrap();
            let gate_ok = model
                .evaluate(&app(">=", vec![int(0), Term::Var(x())]), &rho)
                .unwrap()
                .as_bool()
                .unwrap();
            if input_ok && gate_ok {
                witnessed = true;
            }
        }
        assert!(witnessed);
    }

    #[test]
    fn calculation_rule_evaluates_ground_sums() {
        // 1 + 0 rewrites to a logical variable pinned to 1 by the +
        // calculation rule with matcher {x1 -> 1, x2 -> 0}; the oracle is
        // direct evaluation of 1 + 0.
        let mut b = EnumBackend::new(16);
        let sys = Lctrs::with_calc(vec![], &sig());
        let c = ECTerm::unconstrained([], app("+", vec![int(1), int(0)]));
        let scan = all_steps(&c, &sys, Mode::Partial, &mut b).unwrap();
        assert_eq!(scan.steps.len(), 1);
        let step = &scan.steps[0];
        assert_eq!(step.redex.rule_id, "calc-+/2");
        let x1 = Var::int("x1#1");
        let x2 = Var::int("x2#1");
        assert_eq!(
            step.redex.matcher,
            Subst::from_pairs([(x1, int(1)), (x2, int(0))]).unwrap()
        );
        let model = crate::logic::TheoryModel::int_mod(16);
        let evaluated = model.evaluate(&c.term, &Valuation::new()).unwrap();
        assert_eq!(evaluated, Value::Int(1));
        let d = DomainSpec::modular(16);
        let values = interp::enumerate_value_instances(&step.output, &d).unwrap();
        assert_eq!(values, BTreeSet::from([int(1)]));
    }

    #[test]
    fn unsatisfiable_input_is_rejected() {
        let mut b = EnumBackend::new(5);
        let c = ECTerm::new(
            [x()],
            app("sum", vec![Term::Var(x())]),
            ExConstraint::plain(app("<", vec![Term::Var(x()), Term::Var(x())])),
        );
        let sys = Lctrs::without_calc(vec![rule_1()]);
        assert!(matches!(
            reduce(&c, &sys, Mode::Partial, 5, Strategy::Full, &mut b),
            Err(EngineError::UnsatisfiableInput)
        ));
    }

    #[test]
    fn steps_are_deterministic() {
        let mut b = EnumBackend::new(16);
        let sys = Lctrs::with_calc(vec![rule_1(), rule_2()], &sig());
        let c = ECTerm::new([x()], app("sum", vec![Term::Var(x())]), ExConstraint::plain(between(0, x(), 4)));
        let s1 = all_steps(&c, &sys, Mode::Partial, &mut b).unwrap();
        let s2 = all_steps(&c, &sys, Mode::Partial, &mut b).unwrap();
        assert_eq!(s1.steps, s2.steps);
    }

    #[test]
    fn mg_steps_are_partial_steps_with_identical_reducts() {
        let mut b = EnumBackend::new(16);
        let sys = Lctrs::with_calc(vec![rule_1(), rule_2()], &sig());
        let c = ECTerm::new([x()], app("sum", vec![Term::Var(x())]), ExConstraint::plain(between(1, x(), 5)));
        let mg = all_steps(&c, &sys, Mode::MostGeneral, &mut b).unwrap();
        let partial = all_steps(&c, &sys, Mode::Partial, &mut b).unwrap();
        for step in &mg.steps {
            let twin = partial
                .steps
                .iter()
                .find(|p| p.redex.position == step.redex.position && p.redex.rule_id == step.redex.rule_id)
                .expect("every MG step is a partial step");
            assert_eq!(twin.output, step.output);
            assert_eq!(twin.redex.matcher, step.redex.matcher);
        }
    }

    #[test]
    fn reduce_sum_partial_collects_value_normal_forms() {
        let mut b = EnumBackend::new(16);
        let sys = Lctrs::with_calc(vec![rule_1(), rule_2()], &sig());
        let c = ECTerm::new([x()], app("sum", vec![Term::Var(x())]), ExConstraint::plain(between(1, x(), 5)));
        let tree = reduce(&c, &sys, Mode::Partial, 40, Strategy::Full, &mut b).unwrap();
        let d = DomainSpec::modular(16);
        let values = tree.value_normal_forms(&d).unwrap();
        let expected: BTreeSet<Value> =
            [1, 3, 6, 10, 15].into_iter().map(Value::Int).collect();
        assert_eq!(values, expected);
    }

    #[test]
    fn boolean_logical_variables_gate_steps() {
        // gate(p) -> 1 [p = true]: over Π{b}. gate(b) [true] only the
        // partial mode fires (b = false escapes); pinning b = true makes
        // the most general step available too.
        let mut s = Signature::with_builtins();
        s.declare(FunSym::new("gate", vec![Sort::bool()], Sort::int(), Kind::Term)).unwrap();
        let gate = s.lookup("gate", 1).unwrap().clone();
        let eqb = s
            .lookup_all("=", 2)
            .iter()
            .find(|f| f.arg_sorts()[0] == Sort::bool())
            .unwrap()
            .clone();
        let p = Var::bool("p");
        let rule = ConstrainedRule::new(
            "open",
            [p.clone()],
            Term::app(gate.clone(), vec![Term::Var(p.clone())]).unwrap(),
            int(1),
            Term::app(eqb.clone(), vec![Term::Var(p), Term::value(Value::Bool(true))]).unwrap(),
        );
        let sys = Lctrs::without_calc(vec![rule]);
        let b_var = Var::bool("b");
        let gate_b = Term::app(gate, vec![Term::Var(b_var.clone())]).unwrap();
        let mut backend = EnumBackend::new(3);

        let free = ECTerm::unconstrained([b_var.clone()], gate_b.clone());
        assert_eq!(all_steps(&free, &sys, Mode::Partial, &mut backend).unwrap().steps.len(), 1);
        assert!(all_steps(&free, &sys, Mode::MostGeneral, &mut backend).unwrap().steps.is_empty());

        let pinned = ECTerm::new(
            [b_var.clone()],
            gate_b,
            ExConstraint::plain(
                Term::app(eqb, vec![Term::Var(b_var), Term::value(Value::Bool(true))]).unwrap(),
            ),
        );
        assert_eq!(
            all_steps(&pinned, &sys, Mode::MostGeneral, &mut backend).unwrap().steps.len(),
            1
        );
    }

    #[test]
    fn fuel_exhaustion_is_tagged() {
        let mut b = EnumBackend::new(16);
        let sys = Lctrs::with_calc(vec![rule_1(), rule_2()], &sig());
        let c = ECTerm::new([x()], app("sum", vec![Term::Var(x())]), ExConstraint::plain(between(1, x(), 5)));
        let tree = reduce(&c, &sys, Mode::Partial, 1, Strategy::Full, &mut b).unwrap();
        assert!(
            tree.frontier().any(|(_, n)| n.status == NodeStatus::FuelExhausted),
            "depth bound 1 must leave exhausted frontier nodes"
        );
    }

    #[test]
    fn reduce_sum_mg_gets_stuck_at_golden_form() {
        let mut b = EnumBackend::new(16);
        let sys = Lctrs::with_calc(vec![rule_1(), rule_2()], &sig());
        let c = ECTerm::new([x()], app("sum", vec![Term::Var(x())]), ExConstraint::plain(between(1, x(), 5)));
        let tree = reduce(&c, &sys, Mode::MostGeneral, 10, Strategy::Full, &mut b).unwrap();
        let frontier: Vec<_> = tree.frontier().collect();
        assert_eq!(frontier.len(), 1);
        let (_, node) = frontier[0];
        assert_eq!(node.status, NodeStatus::Normal);

        // Golden form: x + sum(y) [1 <= x /\ x <= 5 /\ y = x - 1].
        let golden = ECTerm::new(
            [x(), y()],
            app("+", vec![Term::Var(x()), app("sum", vec![Term::Var(y())])]),
            ExConstraint::plain(and(
                between(1, x(), 5),
                app("=", vec![Term::Var(y()), app("-", vec![Term::Var(x()), int(1)])]),
            )),
        );
        let mut cfg = OracleConfig::new(&mut b);
        assert!(ect::equivalent(&node.ect, &golden, &mut cfg).is_yes());
    }
}
