//! Existentially constrained terms: well-formedness, satisfiability,
//! subsumption and equivalence.
//!
//! Subsumption and equivalence are instance-set inclusion and equality.
//! Over a finite model both are decided exactly through the value
//! interpretation; over unbounded integers a syntactic sufficient check is
//! used and `Unknown` is returned when it does not apply.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::interp::{self, DomainSpec, InterpError};
use crate::logic::{
    ConstraintBackend, ConstraintViolation, ExConstraint, LogicError, SolverVerdict,
    ValidityVerdict, Valuation,
};
use crate::term::{match_term, Subst, Term, Value, Var};

/// An existentially constrained term `Π X. s [∃x⃗. φ]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ECTerm {
    pub logical_vars: BTreeSet<Var>,
    pub term: Term,
    pub constraint: ExConstraint,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WellFormedViolation {
    #[error("constraint: {0}")]
    Constraint(#[from] ConstraintViolation),
    #[error("free constraint variable {0} is not logical")]
    FreeVarNotLogical(Var),
    #[error("logical variable {0} does not occur in the term")]
    LogicalVarNotInTerm(Var),
    #[error("bound variable {0} occurs in the term")]
    BinderInTerm(Var),
    #[error("logical variable {0} does not have a theory sort")]
    NonTheoryLogicalVar(Var),
}

impl ECTerm {
    pub fn new(
        logical_vars: impl IntoIterator<Item = Var>,
        term: Term,
        constraint: ExConstraint,
    ) -> ECTerm {
        ECTerm { logical_vars: logical_vars.into_iter().collect(), term, constraint }
    }

    /// `Π X. s [true]`.
    pub fn unconstrained(logical_vars: impl IntoIterator<Item = Var>, term: Term) -> ECTerm {
        ECTerm::new(logical_vars, term, ExConstraint::top())
    }

    pub fn well_formed(&self) -> Result<(), WellFormedViolation> {
        self.constraint.validate()?;
        let term_vars = self.term.vars();
        for v in self.constraint.free_vars() {
            if !self.logical_vars.contains(&v) {
                return Err(WellFormedViolation::FreeVarNotLogical(v));
            }
        }
        for v in &self.logical_vars {
            if !term_vars.contains(v) {
                return Err(WellFormedViolation::LogicalVarNotInTerm(v.clone()));
            }
            if !v.sort.is_theory() {
                return Err(WellFormedViolation::NonTheoryLogicalVar(v.clone()));
            }
        }
        for b in &self.constraint.binders {
            if term_vars.contains(b) {
                return Err(WellFormedViolation::BinderInTerm(b.clone()));
            }
        }
        Ok(())
    }

    /// Satisfiability of the constraint part.
    pub fn is_sat(&self, backend: &mut dyn ConstraintBackend) -> Result<SolverVerdict, LogicError> {
        backend.check_sat(&self.constraint)
    }

    /// All variables of term, constraint body and binders.
    pub fn all_vars(&self) -> BTreeSet<Var> {
        let mut out = self.term.vars();
        out.extend(self.constraint.body.vars());
        out.extend(self.constraint.binders.iter().cloned());
        out
    }

    /// Non-logical variables of the term part.
    pub fn non_logical_vars(&self) -> BTreeSet<Var> {
        self.term.vars().difference(&self.logical_vars).cloned().collect()
    }
}

impl fmt::Display for ECTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if !self.logical_vars.is_empty() {
            f.write_str("Π{")?;
            for (i, v) in self.logical_vars.iter().enumerate() {
                if i > 0 {
                    f.write_str(", ")?;
                }
                write!(f, "{v}")?;
            }
            f.write_str("}. ")?;
        }
        write!(f, "{} [{}]", self.term, self.constraint)
    }
}

/// A three-valued verdict whose positive and negative sides carry
/// independently checkable evidence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TriVerdict<E, C> {
    Yes(E),
    No(C),
    Unknown(String),
}

impl<E, C> TriVerdict<E, C> {
    pub fn is_yes(&self) -> bool {
        matches!(self, TriVerdict::Yes(_))
    }

    pub fn is_no(&self) -> bool {
        matches!(self, TriVerdict::No(_))
    }

    pub fn is_unknown(&self) -> bool {
        matches!(self, TriVerdict::Unknown(_))
    }

    pub fn label(&self) -> &'static str {
        match self {
            TriVerdict::Yes(_) => "yes",
            TriVerdict::No(_) => "no",
            TriVerdict::Unknown(_) => "unknown",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SubsumeEvidence {
    /// Every canonical value instance of the left side is an instance of
    /// the right side (exact over a finite model).
    ValueInstancesContained { checked: usize },
    /// The left side is unsatisfiable, so its instance set is empty.
    LeftUnsat,
    /// The right term matched the left term and the constraint
    /// implication was proved valid.
    ImplicationValid { matcher: Subst },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EquivEvidence {
    /// Canonical value interpretations coincide (exact over a finite
    /// model).
    ValueSetsEqual { size: usize },
    /// Both sides are unsatisfiable.
    BothUnsat,
    /// Term parts coincide up to a partition-respecting variable
    /// bijection, and the transported constraints imply each other.
    MutualImplication,
}

pub type SubsumeVerdict = TriVerdict<SubsumeEvidence, Term>;
pub type EquivVerdict = TriVerdict<EquivEvidence, Term>;

/// Shared configuration for the subsumption / equivalence oracles.
pub struct OracleConfig<'a> {
    pub backend: &'a mut dyn ConstraintBackend,
    pub cap: usize,
}

impl<'a> OracleConfig<'a> {
    pub fn new(backend: &'a mut dyn ConstraintBackend) -> OracleConfig<'a> {
        OracleConfig { backend, cap: 200_000 }
    }

    fn domain(&self) -> Option<DomainSpec> {
        match self.backend.model().mode {
            crate::logic::TheoryMode::IntMod(m) => {
                Some(DomainSpec::modular(m).with_cap(self.cap))
            }
            crate::logic::TheoryMode::Int => None,
        }
    }
}

fn interp_unknown(e: InterpError) -> String {
    format!("interpretation not enumerable: {e}")
}

/// Whether `⟦a⟧ ⊆ ⟦b⟧`.
pub fn subsumes(a: &ECTerm, b: &ECTerm, cfg: &mut OracleConfig<'_>) -> SubsumeVerdict {
    match subsumes_inner(a, b, cfg) {
        Ok(v) => v,
        Err(e) => TriVerdict::Unknown(format!("backend failure: {e}")),
    }
}

fn subsumes_inner(
    a: &ECTerm,
    b: &ECTerm,
    cfg: &mut OracleConfig<'_>,
) -> Result<SubsumeVerdict, LogicError> {
    if let Some(domain) = cfg.domain() {
        // Finite model: by closure of ⟦b⟧ under substitutions, inclusion
        // holds exactly when every canonical value instance of a is an
        // instance of b.
        let insts = match interp::enumerate_value_instances(a, &domain) {
            Ok(s) => s,
            Err(e) => return Ok(TriVerdict::Unknown(interp_unknown(e))),
        };
        let checked = insts.len();
        for u in insts {
            if !interp::contains_instance(b, &u, &domain)? {
                return Ok(TriVerdict::No(u));
            }
        }
        return Ok(TriVerdict::Yes(SubsumeEvidence::ValueInstancesContained { checked }));
    }

    // Unbounded model: an unsatisfiable left side is subsumed by anything.
    if a.is_sat(cfg.backend)?.is_unsat() {
        return Ok(TriVerdict::Yes(SubsumeEvidence::LeftUnsat));
    }

    // Syntactic sufficient check: match b's term onto a's term with a's
    // logical variables treated as opaque. The unique matcher must send
    // b's logical variables to values or a-logical variables.
    let Some(delta) = match_term(&b.term, &a.term) else {
        return Ok(TriVerdict::Unknown("term parts do not match syntactically".into()));
    };
    for x in &b.logical_vars {
        let image = delta.get(x).cloned().unwrap_or_else(|| Term::Var(x.clone()));
        let ok = image.is_value()
            || matches!(&image, Term::Var(v) if a.logical_vars.contains(v));
        if !ok {
            return Ok(TriVerdict::Unknown(format!(
                "logical variable {x} binds to a non-value"
            )));
        }
    }
    let transported = transport_constraint(&b.constraint, &delta, a);
    match cfg.backend.check_valid_implication(&a.constraint, &transported)? {
        ValidityVerdict::Valid => Ok(TriVerdict::Yes(SubsumeEvidence::ImplicationValid { matcher: delta })),
        ValidityVerdict::NotValid(rho) => Ok(TriVerdict::No(counterexample_instance(a, &rho, cfg))),
        ValidityVerdict::Unknown(r) => Ok(TriVerdict::Unknown(r)),
    }
}

/// Transports a constraint along a matcher: binders clashing with the
/// matcher or the target term are renamed first, so substituting into the
/// body cannot capture transported variables, then the matcher is applied
/// to the body.
fn transport_constraint(ec: &ExConstraint, delta: &Subst, target: &ECTerm) -> ExConstraint {
    let mut avoid = target.all_vars();
    avoid.extend(ec.body.vars());
    for (v, t) in delta.iter() {
        avoid.insert(v.clone());
        avoid.extend(t.vars());
    }
    let clash: BTreeSet<Var> = ec
        .bound_vars()
        .into_iter()
        .filter(|b| target.all_vars().contains(b) || delta.iter().any(|(v, t)| v == b || t.vars().contains(b)))
        .collect();
    let ren = crate::term::fresh_rename(&avoid, &clash);
    let renamed = ExConstraint {
        binders: ec
            .binders
            .iter()
            .map(|v| match ren.get(v) {
                Some(Term::Var(w)) => w.clone(),
                _ => v.clone(),
            })
            .collect(),
        body: ren.apply(&ec.body),
    };
    renamed.subst_body(delta)
}

/// Builds a concrete instance of `a` from a countervaluation: logical
/// variables take the witnessed values (missing ones take the first
/// carrier element), non-logical variables stay put.
fn counterexample_instance(a: &ECTerm, rho: &Valuation, cfg: &mut OracleConfig<'_>) -> Term {
    let model = *cfg.backend.model();
    let mut s = Subst::new();
    for x in &a.logical_vars {
        let val = rho.get(x).unwrap_or(Value::Int(0));
        let _ = s.bind(x.clone(), model.value_term(val));
    }
    s.apply(&a.term)
}

/// Whether `⟦a⟧ = ⟦b⟧`, equivalently equality of value interpretations.
pub fn equivalent(a: &ECTerm, b: &ECTerm, cfg: &mut OracleConfig<'_>) -> EquivVerdict {
    match equivalent_inner(a, b, cfg) {
        Ok(v) => v,
        Err(e) => TriVerdict::Unknown(format!("backend failure: {e}")),
    }
}

fn equivalent_inner(
    a: &ECTerm,
    b: &ECTerm,
    cfg: &mut OracleConfig<'_>,
) -> Result<EquivVerdict, LogicError> {
    if let Some(domain) = cfg.domain() {
        // Cheap screens before enumerating: satisfiability on both sides,
        // then the erased term shape, which equal nonempty value
        // interpretations must share.
        let first_a = match interp::first_value_instance(a, &domain) {
            Ok(w) => w,
            Err(e) => return Ok(TriVerdict::Unknown(interp_unknown(e))),
        };
        let first_b = match interp::first_value_instance(b, &domain) {
            Ok(w) => w,
            Err(e) => return Ok(TriVerdict::Unknown(interp_unknown(e))),
        };
        match (first_a, first_b) {
            (None, None) => return Ok(TriVerdict::Yes(EquivEvidence::BothUnsat)),
            (Some(w), None) | (None, Some(w)) => return Ok(TriVerdict::No(w)),
            (Some(wa), Some(_)) => {
                if interp::value_shape_key(a) != interp::value_shape_key(b) {
                    return Ok(TriVerdict::No(wa));
                }
            }
        }
        let va = match interp::enumerate_value_instances(a, &domain) {
            Ok(s) => s,
            Err(e) => return Ok(TriVerdict::Unknown(interp_unknown(e))),
        };
        let vb = match interp::enumerate_value_instances(b, &domain) {
            Ok(s) => s,
            Err(e) => return Ok(TriVerdict::Unknown(interp_unknown(e))),
        };
        if va == vb {
            return Ok(TriVerdict::Yes(EquivEvidence::ValueSetsEqual { size: va.len() }));
        }
        let witness = va
            .symmetric_difference(&vb)
            .next()
            .expect("sets differ")
            .clone();
        return Ok(TriVerdict::No(witness));
    }

    let sat_a = a.is_sat(cfg.backend)?;
    let sat_b = b.is_sat(cfg.backend)?;
    match (&sat_a, &sat_b) {
        (SolverVerdict::Unsat, SolverVerdict::Unsat) => {
            return Ok(TriVerdict::Yes(EquivEvidence::BothUnsat))
        }
        (SolverVerdict::Sat(w), SolverVerdict::Unsat) => {
            let witness = counterexample_instance(a, &w.clone(), cfg);
            return Ok(TriVerdict::No(witness));
        }
        (SolverVerdict::Unsat, SolverVerdict::Sat(w)) => {
            let witness = counterexample_instance(b, &w.clone(), cfg);
            return Ok(TriVerdict::No(witness));
        }
        _ => {}
    }

    // Partition-respecting variable bijection between the term parts.
    let Some((ab, _ba)) = partition_bijection(a, b) else {
        return Ok(TriVerdict::Unknown(
            "term parts are not equal up to a partition-respecting variable bijection".into(),
        ));
    };
    // Transport b's constraint along the inverse bijection and compare.
    let inv = ab.invert_renaming().expect("bijection inverts");
    let b_on_a = transport_constraint(&b.constraint, &inv, a);
    match cfg.backend.check_valid_implication(&a.constraint, &b_on_a)? {
        ValidityVerdict::Valid => {}
        ValidityVerdict::NotValid(rho) => {
            return Ok(TriVerdict::No(counterexample_instance(a, &rho, cfg)))
        }
        ValidityVerdict::Unknown(r) => return Ok(TriVerdict::Unknown(r)),
    }
    let a_on_b = transport_constraint(&a.constraint, &ab, b);
    match cfg.backend.check_valid_implication(&b.constraint, &a_on_b)? {
        ValidityVerdict::Valid => Ok(TriVerdict::Yes(EquivEvidence::MutualImplication)),
        ValidityVerdict::NotValid(rho) => {
            Ok(TriVerdict::No(counterexample_instance(b, &rho, cfg)))
        }
        ValidityVerdict::Unknown(r) => Ok(TriVerdict::Unknown(r)),
    }
}

/// A variable bijection making the term parts equal, mapping logical to
/// logical and non-logical to non-logical variables. Returns it in both
/// directions.
fn partition_bijection(a: &ECTerm, b: &ECTerm) -> Option<(Subst, Subst)> {
    fn go(
        ta: &Term,
        tb: &Term,
        a: &ECTerm,
        b: &ECTerm,
        ab: &mut std::collections::BTreeMap<Var, Var>,
        ba: &mut std::collections::BTreeMap<Var, Var>,
    ) -> bool {
        match (ta, tb) {
            (Term::Var(va), Term::Var(vb)) => {
                if va.sort != vb.sort {
                    return false;
                }
                if a.logical_vars.contains(va) != b.logical_vars.contains(vb) {
                    return false;
                }
                match (ab.get(va), ba.get(vb)) {
                    (None, None) => {
                        ab.insert(va.clone(), vb.clone());
                        ba.insert(vb.clone(), va.clone());
                        true
                    }
                    (Some(w), Some(u)) => w == vb && u == va,
                    _ => false,
                }
            }
            (Term::App(f, fa), Term::App(g, ga)) => {
                f == g && fa.iter().zip(ga).all(|(x, y)| go(x, y, a, b, ab, ba))
            }
            _ => false,
        }
    }
    let mut ab = std::collections::BTreeMap::new();
    let mut ba = std::collections::BTreeMap::new();
    if !go(&a.term, &b.term, a, b, &mut ab, &mut ba) {
        return None;
    }
    let sab = Subst::from_pairs(ab.into_iter().map(|(v, w)| (v, Term::Var(w)))).ok()?;
    let sba = Subst::from_pairs(ba.into_iter().map(|(v, w)| (v, Term::Var(w)))).ok()?;
    Some((sab, sba))
}
