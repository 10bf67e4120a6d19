//! Random generation of small systems plus executable encodings of the
//! characterization theorems, checked per-instance against the
//! interpretation oracles. Universal claims are only meaningful over the
//! exact finite model, so the whole harness runs on `IntMod` backends by
//! construction.

pub mod checks;
pub mod gen;

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

pub use checks::{run_case, CaseOutcome};
pub use gen::{gen_case, gen_ect, gen_system, CaseData, GenError};

use crate::ect::ECTerm;
use crate::logic::{EnumBackend, ExConstraint};
use crate::rules::Lctrs;

/// The theorem catalogue.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TheoremId {
    T32,
    T35,
    T36,
    T37,
    T45,
    T48,
    T49,
    T410,
    T411,
    T61,
    T62,
    T63,
    T65,
    T66,
    T67,
    T69,
}

impl TheoremId {
    pub const ALL: [TheoremId; 16] = [
        TheoremId::T32,
        TheoremId::T35,
        TheoremId::T36,
        TheoremId::T37,
        TheoremId::T45,
        TheoremId::T48,
        TheoremId::T49,
        TheoremId::T410,
        TheoremId::T411,
        TheoremId::T61,
        TheoremId::T62,
        TheoremId::T63,
        TheoremId::T65,
        TheoremId::T66,
        TheoremId::T67,
        TheoremId::T69,
    ];

    pub fn describe(&self) -> &'static str {
        match self {
            TheoremId::T32 => "every most general redex is a partial redex",
            TheoremId::T35 => "most general steps are partial steps with identical reducts",
            TheoremId::T36 => "partial steps lift to most general steps from the strengthened input",
            TheoremId::T37 => "partial steps are simulated via subsumption and equivalence",
            TheoremId::T45 => "subsumption/equivalence match instance inclusion/equality",
            TheoremId::T48 => "partial steps are sound and complete for standard instances",
            TheoremId::T49 => "partial reductions track standard instances backward",
            TheoremId::T410 => "most general steps reduce every standard instance",
            TheoremId::T411 => "most general reductions track standard instances both ways",
            TheoremId::T61 => "partial steps are sound and complete for value instances",
            TheoremId::T62 => "reducible value instances force partial steps",
            TheoremId::T63 => "partial normal forms = all value instances ground-normal",
            TheoremId::T65 => "uniformly reducible value instances force most general steps",
            TheoremId::T66 => "most general steps = all standard instances reducible at the position",
            TheoremId::T67 => "mg normal forms = some value instance resists per rule and position",
            TheoremId::T69 => "instantiation-normal implies partial-normal; converse fails",
        }
    }
}

impl fmt::Display for TheoremId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            TheoremId::T32 => "T-3.2",
            TheoremId::T35 => "T-3.5",
            TheoremId::T36 => "T-3.6",
            TheoremId::T37 => "T-3.7",
            TheoremId::T45 => "T-4.5",
            TheoremId::T48 => "T-4.8",
            TheoremId::T49 => "T-4.9",
            TheoremId::T410 => "T-4.10",
            TheoremId::T411 => "T-4.11",
            TheoremId::T61 => "T-6.1",
            TheoremId::T62 => "T-6.2",
            TheoremId::T63 => "T-6.3",
            TheoremId::T65 => "T-6.5",
            TheoremId::T66 => "T-6.6",
            TheoremId::T67 => "T-6.7",
            TheoremId::T69 => "T-6.9",
        };
        f.write_str(s)
    }
}

impl FromStr for TheoremId {
    type Err = String;

    fn from_str(s: &str) -> Result<TheoremId, String> {
        let norm = s.trim().to_ascii_uppercase().replace(['_', ' '], "-");
        let norm = norm.strip_prefix("T-").or_else(|| norm.strip_prefix('T')).unwrap_or(&norm);
        let id = match norm {
            "3.2" => TheoremId::T32,
            "3.5" => TheoremId::T35,
            "3.6" => TheoremId::T36,
            "3.7" => TheoremId::T37,
            "4.5" => TheoremId::T45,
            "4.8" => TheoremId::T48,
            "4.9" => TheoremId::T49,
            "4.10" => TheoremId::T410,
            "4.11" => TheoremId::T411,
            "6.1" => TheoremId::T61,
            "6.2" => TheoremId::T62,
            "6.3" => TheoremId::T63,
            "6.5" => TheoremId::T65,
            "6.6" => TheoremId::T66,
            "6.7" => TheoremId::T67,
            "6.9" => TheoremId::T69,
            _ => return Err(format!("unknown theorem id: {s}")),
        };
        Ok(id)
    }
}

/// Generation and budget knobs. The modulus fixes the exact model; all
/// catalogue checks are universal claims, so only finite models are
/// expressible here.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GenConfig {
    pub seed: u64,
    pub cases: u64,
    pub modulus: u32,
    pub max_term_depth: usize,
    pub max_rules: usize,
    pub max_guard_atoms: usize,
    pub max_term_symbols: usize,
    pub cap: usize,
}

impl Default for GenConfig {
    fn default() -> GenConfig {
        GenConfig {
            seed: 42,
            cases: 300,
            modulus: 5,
            max_term_depth: 3,
            max_rules: 3,
            max_guard_atoms: 2,
            max_term_symbols: 3,
            cap: 500_000,
        }
    }
}

/// A reproducible failing case.
#[derive(Debug, Clone)]
pub struct FailureBundle {
    pub theorem: TheoremId,
    pub case_index: u64,
    pub detail: String,
    pub data: CaseData,
}

/// Failure data as it appears in reports: display strings only.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FailureSummary {
    pub case_index: u64,
    pub detail: String,
    pub modulus: u32,
    pub rules: Vec<String>,
    pub ects: Vec<String>,
}

impl FailureSummary {
    fn from_bundle(b: &FailureBundle) -> FailureSummary {
        FailureSummary {
            case_index: b.case_index,
            detail: b.detail.clone(),
            modulus: b.data.modulus,
            rules: b.data.system.rules.iter().map(|r| r.to_string()).collect(),
            ects: b.data.ects.iter().map(|c| c.to_string()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CheckReport {
    pub theorem: String,
    pub description: String,
    pub cases_run: u64,
    pub vacuous: u64,
    pub failures: Vec<FailureSummary>,
    pub unknowns: u64,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Runs one theorem check over the configured case budget. Cases run in
/// parallel with one backend per worker; results merge by case index, so
/// reports are reproducible. Failures are minimized before reporting.
pub fn check(theorem: TheoremId, cfg: &GenConfig) -> CheckReport {
    let outcomes: Vec<(u64, CaseOutcome, Option<CaseData>)> = (0..cfg.cases)
        .into_par_iter()
        .map(|case| match gen_case(cfg, case) {
            Ok(data) => {
                let outcome = run_case(theorem, &data);
                let keep = matches!(outcome, CaseOutcome::Fail(_)).then_some(data);
                (case, outcome, keep)
            }
            Err(e) => (case, CaseOutcome::Fail(format!("generation failed: {e}")), None),
        })
        .collect();

    let mut report = CheckReport {
        theorem: theorem.to_string(),
        description: theorem.describe().into(),
        cases_run: cfg.cases,
        vacuous: 0,
        failures: Vec::new(),
        unknowns: 0,
    };
    let mut ordered = outcomes;
    ordered.sort_by_key(|(case, _, _)| *case);
    for (case, outcome, data) in ordered {
        match outcome {
            CaseOutcome::Pass => {}
            CaseOutcome::Vacuous => report.vacuous += 1,
            CaseOutcome::Fail(detail) => {
                let bundle = FailureBundle {
                    theorem,
                    case_index: case,
                    detail,
                    data: data.unwrap_or_else(|| CaseData {
                        modulus: cfg.modulus,
                        sig: crate::signature::Signature::with_builtins(),
                        system: Lctrs::without_calc(vec![]),
                        ects: vec![],
                    }),
                };
                let minimized = minimize(&bundle);
                report.failures.push(FailureSummary::from_bundle(&minimized));
            }
        }
    }
    report
}

/// Runs the whole catalogue.
pub fn check_all(cfg: &GenConfig) -> Vec<CheckReport> {
    TheoremId::ALL.iter().map(|t| check(*t, cfg)).collect()
}

/// Greedy shrinking of a failing case: drop rules, drop guard and
/// constraint atoms, shrink the modulus. Every accepted move re-fails the
/// original theorem check, so the result re-fails by construction.
pub fn minimize(bundle: &FailureBundle) -> FailureBundle {
    let theorem = bundle.theorem;
    minimize_with(bundle, &|data| {
        matches!(run_case(theorem, data), CaseOutcome::Fail(_))
    })
}

/// Shrinking against an arbitrary re-fail oracle (exposed for testing the
/// shrinker itself on synthetic failures).
pub fn minimize_with(bundle: &FailureBundle, fails: &dyn Fn(&CaseData) -> bool) -> FailureBundle {
    let mut best = bundle.data.clone();
    if !fails(&best) {
        // Not deterministic to begin with; report unshrunk.
        return bundle.clone();
    }
    loop {
        let mut improved = false;
        // Drop one rule at a time.
        for i in 0..best.system.rules.len() {
            let mut candidate = best.clone();
            candidate.system.rules.remove(i);
            if fails(&candidate) {
                best = candidate;
                improved = true;
                break;
            }
        }
        if improved {
            continue;
        }
        // Drop one guard conjunct of one rule.
        'rules: for i in 0..best.system.rules.len() {
            let guard = best.system.rules[i].guard.clone();
            let atoms = crate::logic::conjuncts(&guard);
            if atoms.len() <= 1 {
                continue;
            }
            for j in 0..atoms.len() {
                let rest: Vec<crate::term::Term> = atoms
                    .iter()
                    .enumerate()
                    .filter(|(k, _)| *k != j)
                    .map(|(_, a)| (*a).clone())
                    .collect();
                let mut candidate = best.clone();
                candidate.system.rules[i].guard = conjoin_terms(rest);
                if candidate.system.rules[i].validate().is_err() {
                    continue;
                }
                if fails(&candidate) {
                    best = candidate;
                    improved = true;
                    break 'rules;
                }
            }
        }
        if improved {
            continue;
        }
        // Drop one constraint conjunct of one constrained term.
        'ects: for i in 0..best.ects.len() {
            let body = best.ects[i].constraint.body.clone();
            let atoms = crate::logic::conjuncts(&body);
            if atoms.len() <= 1 {
                continue;
            }
            for j in 0..atoms.len() {
                let rest: Vec<crate::term::Term> = atoms
                    .iter()
                    .enumerate()
                    .filter(|(k, _)| *k != j)
                    .map(|(_, a)| (*a).clone())
                    .collect();
                let new_body = conjoin_terms(rest);
                let body_vars = new_body.vars();
                let binders: Vec<crate::term::Var> = best.ects[i]
                    .constraint
                    .binders
                    .iter()
                    .filter(|b| body_vars.contains(b))
                    .cloned()
                    .collect();
                let candidate_ect = ECTerm::new(
                    best.ects[i].logical_vars.clone(),
                    best.ects[i].term.clone(),
                    ExConstraint::new(binders, new_body),
                );
                if candidate_ect.well_formed().is_err() {
                    continue;
                }
                let mut backend = EnumBackend::new(best.modulus);
                if !matches!(candidate_ect.is_sat(&mut backend), Ok(v) if v.is_sat()) {
                    continue;
                }
                let mut candidate = best.clone();
                candidate.ects[i] = candidate_ect;
                if fails(&candidate) {
                    best = candidate;
                    improved = true;
                    break 'ects;
                }
            }
        }
        if improved {
            continue;
        }
        // Shrink the modulus.
        if best.modulus > 2 {
            let mut candidate = best.clone();
            candidate.modulus -= 1;
            if fails(&candidate) {
                best = candidate;
                improved = true;
            }
        }
        if !improved {
            break;
        }
    }
    FailureBundle {
        theorem: bundle.theorem,
        case_index: bundle.case_index,
        detail: bundle.detail.clone(),
        data: best,
    }
}

fn conjoin_terms(atoms: Vec<crate::term::Term>) -> crate::term::Term {
    let mut it = atoms.into_iter();
    match it.next() {
        None => crate::term::Term::value(crate::term::Value::Bool(true)),
        Some(first) => it.fold(first, crate::logic::and),
    }
}
