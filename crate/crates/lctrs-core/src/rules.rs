//! Constrained rewrite rules, their validation, fresh variants and the
//! generated calculation rules.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::signature::Signature;
use crate::term::{fresh_rename, FunSym, Kind, Sort, Subst, Term, Var};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RuleOrigin {
    User,
    Calculation,
}

/// A constrained rewrite rule `Π Z. lhs -> rhs [guard]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConstrainedRule {
    pub id: String,
    pub theory_vars: BTreeSet<Var>,
    pub lhs: Term,
    pub rhs: Term,
    pub guard: Term,
    pub origin: RuleOrigin,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RuleViolation {
    #[error("rule {id}: variable {var} of the guard or right-hand side is not housed in Z")]
    UnhousedVariable { id: String, var: Var },
    #[error("rule {id}: left-hand side has sort {lhs}, right-hand side {rhs}")]
    SortMismatch { id: String, lhs: Sort, rhs: Sort },
    #[error("rule {id}: theory variable {var} does not have a theory sort")]
    NonTheoryVar { id: String, var: Var },
    #[error("rule {id}: left-hand side is a variable")]
    VariableLhs { id: String },
    #[error("rule {id}: guard has sort {found}, expected Bool")]
    NonBooleanGuard { id: String, found: Sort },
    #[error("rule {id}: guard contains the term symbol {symbol}")]
    NonTheoryGuard { id: String, symbol: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RuleFlags {
    pub left_linear: bool,
    pub left_value_free: bool,
}

impl ConstrainedRule {
    pub fn new(
        id: &str,
        theory_vars: impl IntoIterator<Item = Var>,
        lhs: Term,
        rhs: Term,
        guard: Term,
    ) -> ConstrainedRule {
        ConstrainedRule {
            id: id.into(),
            theory_vars: theory_vars.into_iter().collect(),
            lhs,
            rhs,
            guard,
            origin: RuleOrigin::User,
        }
    }

    /// All variables of the rule: sides, guard and Z.
    pub fn all_vars(&self) -> BTreeSet<Var> {
        let mut out = self.lhs.vars();
        out.extend(self.rhs.vars());
        out.extend(self.guard.vars());
        out.extend(self.theory_vars.iter().cloned());
        out
    }

    /// Variables of the right-hand side that do not occur on the left.
    pub fn extra_vars(&self) -> BTreeSet<Var> {
        self.rhs.vars().difference(&self.lhs.vars()).cloned().collect()
    }

    pub fn validate(&self) -> Result<RuleFlags, RuleViolation> {
        if self.lhs.is_var() {
            return Err(RuleViolation::VariableLhs { id: self.id.clone() });
        }
        let lhs_sort = self.lhs.sort();
        let rhs_sort = self.rhs.sort();
        if lhs_sort != rhs_sort {
            return Err(RuleViolation::SortMismatch { id: self.id.clone(), lhs: lhs_sort, rhs: rhs_sort });
        }
        if !self.guard.is_theory_term() {
            let symbol = first_term_symbol(&self.guard).expect("term symbol present");
            return Err(RuleViolation::NonTheoryGuard { id: self.id.clone(), symbol });
        }
        if self.guard.sort() != Sort::bool() {
            return Err(RuleViolation::NonBooleanGuard { id: self.id.clone(), found: self.guard.sort() });
        }
        for var in &self.theory_vars {
            if !var.sort.is_theory() {
                return Err(RuleViolation::NonTheoryVar { id: self.id.clone(), var: var.clone() });
            }
        }
        let mut must_house = self.guard.vars();
        must_house.extend(self.extra_vars());
        for var in must_house {
            if !self.theory_vars.contains(&var) {
                return Err(RuleViolation::UnhousedVariable { id: self.id.clone(), var });
            }
        }
        Ok(RuleFlags {
            left_linear: self.lhs.is_linear(),
            left_value_free: self.lhs.is_value_free(),
        })
    }

    /// A variant whose variables are disjoint from `avoid`, together with
    /// the renaming used. Only clashing variables are renamed, so a rule
    /// already disjoint comes back unchanged.
    pub fn fresh_variant(&self, avoid: &BTreeSet<Var>) -> (ConstrainedRule, Subst) {
        let vars = self.all_vars();
        let clashing: BTreeSet<Var> = vars.intersection(avoid).cloned().collect();
        if clashing.is_empty() {
            return (self.clone(), Subst::new());
        }
        let mut guard_names: BTreeSet<Var> = avoid.clone();
        guard_names.extend(vars.iter().cloned());
        let renaming = fresh_rename(&guard_names, &clashing);
        let rename_var = |v: &Var| match renaming.get(v) {
            Some(Term::Var(w)) => w.clone(),
            _ => v.clone(),
        };
        let variant = ConstrainedRule {
            id: self.id.clone(),
            theory_vars: self.theory_vars.iter().map(rename_var).collect(),
            lhs: renaming.apply(&self.lhs),
            rhs: renaming.apply(&self.rhs),
            guard: renaming.apply(&self.guard),
            origin: self.origin,
        };
        (variant, renaming)
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

impl fmt::Display for ConstrainedRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: ", self.id)?;
        if !self.theory_vars.is_empty() {
            f.write_str("Π{")?;
            for (i, v) in self.theory_vars.iter().enumerate() {
                if i > 0 {
                    f.write_str(", ")?;
                }
                write!(f, "{v}")?;
            }
            f.write_str("}. ")?;
        }
        write!(f, "{} -> {} [{}]", self.lhs, self.rhs, self.guard)
    }
}

/// The calculation rules `f(x1,...,xn) -> y [y = f(x1,...,xn)]`, one per
/// non-value theory symbol of the signature.
pub fn calculation_rules(sig: &Signature) -> Vec<ConstrainedRule> {
    let eq_for = |sort: &Sort| -> FunSym {
        FunSym::new("=", vec![sort.clone(), sort.clone()], Sort::bool(), Kind::Theory)
    };
    let mut out = Vec::new();
    let mut syms: Vec<&FunSym> = sig.theory_symbols().collect();
    syms.sort();
    for f in syms {
        let args: Vec<Var> = f
            .arg_sorts()
            .iter()
            .enumerate()
            .map(|(i, s)| Var::new(&format!("x{}", i + 1), s.clone()))
            .collect();
        let y = Var::new("y", f.result_sort().clone());
        let lhs = Term::App(f.clone(), args.iter().cloned().map(Term::Var).collect());
        let rhs = Term::Var(y.clone());
        let guard = Term::App(
            eq_for(f.result_sort()),
            vec![Term::Var(y.clone()), lhs.clone()],
        );
        let mut theory_vars: BTreeSet<Var> = args.into_iter().collect();
        theory_vars.insert(y);
        let name = format!("calc-{}/{}", f.name(), f.arity());
        out.push(ConstrainedRule {
            id: name,
            theory_vars,
            lhs,
            rhs,
            guard,
            origin: RuleOrigin::Calculation,
        });
    }
    out
}

/// An LCTRS: an ordered list of rules, optionally extended with the
/// calculation rules of the signature.
#[derive(Debug, Clone)]
pub struct Lctrs {
    pub rules: Vec<ConstrainedRule>,
    pub includes_calc: bool,
}

impl Lctrs {
    /// User rules only.
    pub fn without_calc(rules: Vec<ConstrainedRule>) -> Lctrs {
        Lctrs { rules, includes_calc: false }
    }

    /// User rules followed by the generated calculation rules.
    pub fn with_calc(mut rules: Vec<ConstrainedRule>, sig: &Signature) -> Lctrs {
        rules.extend(calculation_rules(sig));
        Lctrs { rules, includes_calc: true }
    }

    pub fn validate(&self) -> Result<Vec<RuleFlags>, RuleViolation> {
        self.rules.iter().map(ConstrainedRule::validate).collect()
    }

    pub fn rule(&self, id: &str) -> Option<&ConstrainedRule> {
        self.rules.iter().find(|r| r.id == id)
    }

    /// Restriction to a subset of rule ids, keeping declaration order.
    pub fn restricted(&self, ids: &[&str]) -> Lctrs {
        Lctrs {
            rules: self.rules.iter().filter(|r| ids.contains(&r.id.as_str())).cloned().collect(),
            includes_calc: false,
        }
    }
}
