//! Signatures: the declared function symbols, with the built-in integer
//! and boolean theory symbols preregistered.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::term::{FunSym, Kind, Sort};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SignatureError {
    #[error("symbol {0}/{1} is already declared with a different profile")]
    Conflict(String, usize),
    #[error("{0}/{1} is not a known theory symbol")]
    UnknownTheorySymbol(String, usize),
}

/// The declared symbols of a problem. Value constants are not members;
/// they are constructed on demand, one per carrier element.
#[derive(Debug, Clone, Default)]
pub struct Signature {
    by_key: BTreeMap<(String, usize), Vec<FunSym>>,
}

fn int() -> Sort {
    Sort::int()
}

fn bool_() -> Sort {
    Sort::bool()
}

/// The built-in theory symbols: integer arithmetic, comparisons, equality
/// on both theory sorts, and the boolean connectives.
pub fn builtin_theory_symbols() -> Vec<FunSym> {
    let bin_int = |name: &str| FunSym::new(name, vec![int(), int()], int(), Kind::Theory);
    let cmp = |name: &str| FunSym::new(name, vec![int(), int()], bool_(), Kind::Theory);
    let bin_bool = |name: &str| FunSym::new(name, vec![bool_(), bool_()], bool_(), Kind::Theory);
    vec![
        bin_int("+"),
        bin_int("-"),
        bin_int("*"),
        FunSym::new("-", vec![int()], int(), Kind::Theory),
        cmp(">="),
        cmp("<="),
        cmp(">"),
        cmp("<"),
        FunSym::new("=", vec![int(), int()], bool_(), Kind::Theory),
        FunSym::new("=", vec![bool_(), bool_()], bool_(), Kind::Theory),
        bin_bool("/\\"),
        bin_bool("\\/"),
        bin_bool("=>"),
        bin_bool("<=>"),
        FunSym::new("not", vec![bool_()], bool_(), Kind::Theory),
    ]
}

impl Signature {
    pub fn new() -> Signature {
        Signature::default()
    }

    pub fn with_builtins() -> Signature {
        let mut sig = Signature::new();
        for f in builtin_theory_symbols() {
            sig.by_key
                .entry((f.name().into(), f.arity()))
                .or_default()
                .push(f);
        }
        sig
    }

    pub fn declare(&mut self, f: FunSym) -> Result<(), SignatureError> {
        let key = (f.name().to_string(), f.arity());
        let entry = self.by_key.entry(key.clone()).or_default();
        if entry.contains(&f) {
            return Ok(());
        }
        // Overloading is reserved for the built-in equality family.
        if !entry.is_empty() && f.name() != "=" {
            return Err(SignatureError::Conflict(key.0, key.1));
        }
        entry.push(f);
        Ok(())
    }

    /// The unique symbol with this name and arity, if any.
    pub fn lookup(&self, name: &str, arity: usize) -> Option<&FunSym> {
        match self.by_key.get(&(name.to_string(), arity)) {
            Some(list) if list.len() == 1 => list.first(),
            _ => None,
        }
    }

    /// All symbols sharing a name and arity (equality is overloaded).
    pub fn lookup_all(&self, name: &str, arity: usize) -> &[FunSym] {
        self.by_key
            .get(&(name.to_string(), arity))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn symbols(&self) -> impl Iterator<Item = &FunSym> {
        self.by_key.values().flatten()
    }

    /// Non-value theory symbols, in deterministic order.
    pub fn theory_symbols(&self) -> impl Iterator<Item = &FunSym> {
        self.symbols().filter(|f| f.kind() == Kind::Theory && !f.is_value())
    }

    pub fn term_symbols(&self) -> impl Iterator<Item = &FunSym> {
        self.symbols().filter(|f| f.kind() == Kind::Term)
    }

    /// All sorts mentioned by declared symbols.
    pub fn sorts(&self) -> Vec<Sort> {
        let mut out: Vec<Sort> = Vec::new();
        for f in self.symbols() {
            for s in f.arg_sorts().iter().chain([f.result_sort()]) {
                if !out.contains(s) {
                    out.push(s.clone());
                }
            }
        }
        out.sort();
        out
    }

    /// Sorts of subterms that can occur strictly below a term of sort
    /// `top`, following argument positions of declared symbols.
    pub fn reachable_below(&self, top: &Sort) -> Vec<Sort> {
        let mut reach: Vec<Sort> = Vec::new();
        let mut frontier = vec![top.clone()];
        while let Some(s) = frontier.pop() {
            for f in self.symbols() {
                if *f.result_sort() == s {
                    for arg in f.arg_sorts() {
                        if !reach.contains(arg) {
                            reach.push(arg.clone());
                            frontier.push(arg.clone());
                        }
                    }
                }
            }
        }
        reach.sort();
        reach
    }

    /// A symbol whose result sort is `top` and which takes an argument of
    /// sort `inner`, used to build one-level embedding contexts.
    pub fn embedding_symbol(&self, top: &Sort, inner: &Sort) -> Option<(&FunSym, usize)> {
        for f in self.symbols() {
            if f.result_sort() == top {
                if let Some(i) = f.arg_sorts().iter().position(|a| a == inner) {
                    return Some((f, i));
                }
            }
        }
        None
    }
}
