use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{ParseStatus, ParsedSignature};
use crate::apidoc::{ApiDatabase, ClassDoc, MethodSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum VerdictKind {
    Exact,
    NameExistsSignatureMismatch,
    NameNotFound,
    NotMethod,
    Malformed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum MismatchPart {
    ReturnType,
    ParamCount,
    ParamTypes,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchVerdict {
    pub kind: VerdictKind,
    /// Only ever true for [`VerdictKind::NameExistsSignatureMismatch`].
    pub overload_merge: bool,
    pub mismatch_parts: BTreeSet<MismatchPart>,
    /// Set when the name was not found on the class but the parent class
    /// declares it. Annotation only; does not change `kind`.
    #[serde(default)]
    pub declared_on_parent: bool,
}

impl MatchVerdict {
    fn of(kind: VerdictKind) -> Self {
        MatchVerdict {
            kind,
            overload_merge: false,
            mismatch_parts: BTreeSet::new(),
            declared_on_parent: false,
        }
    }

    pub fn is_exact(&self) -> bool {
        self.kind == VerdictKind::Exact
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Task1ErrorKind {
    NotMethod,
    MethodNameNotExist,
    IncorrectReturnTypeOrParameter,
    InstructionInconsistency,
}

impl Task1ErrorKind {
    pub const ALL: [Task1ErrorKind; 4] = [
        Task1ErrorKind::NotMethod,
        Task1ErrorKind::MethodNameNotExist,
        Task1ErrorKind::IncorrectReturnTypeOrParameter,
        Task1ErrorKind::InstructionInconsistency,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Task1ErrorKind::NotMethod => "NotMethod",
            Task1ErrorKind::MethodNameNotExist => "MethodNameNotExist",
            Task1ErrorKind::IncorrectReturnTypeOrParameter => "IncorrectReturnTypeOrParameter",
            Task1ErrorKind::InstructionInconsistency => "InstructionInconsistency",
        }
    }

    /// Hallucination category used in reports.
    pub fn hallucination_label(self) -> &'static str {
        match self {
            Task1ErrorKind::NotMethod | Task1ErrorKind::MethodNameNotExist => "Factual Fabrication",
            Task1ErrorKind::IncorrectReturnTypeOrParameter => "Factual Inconsistency",
            Task1ErrorKind::InstructionInconsistency => "Instruction Inconsistency",
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SignatureError {
    #[error("an exact match is not an error")]
    ExactVerdict,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchOptions {
    /// Treat single-uppercase-letter type variables (`E`, `T`, `K2`) as
    /// interchangeable.
    pub lenient_type_vars: bool,
}

fn is_type_var(tok: &str) -> bool {
    let mut chars = tok.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_uppercase()) && chars.all(|c| c.is_ascii_digit())
}

fn type_tokens(ty: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, c) in ty.char_indices() {
        let word = c.is_alphanumeric() || c == '_' || c == '$';
        match (word, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                out.push(&ty[s..i]);
                out.push(&ty[i..i + c.len_utf8()]);
                start = None;
            }
            (false, None) => out.push(&ty[i..i + c.len_utf8()]),
            (true, Some(_)) => {}
        }
    }
    if let Some(s) = start {
        out.push(&ty[s..]);
    }
    out
}

/// Type equality on normalized text.
pub fn types_equal(a: &str, b: &str, opts: MatchOptions) -> bool {
    if a == b {
        return true;
    }
    if !opts.lenient_type_vars {
        return false;
    }
    let (ta, tb) = (type_tokens(a), type_tokens(b));
    ta.len() == tb.len()
        && ta
            .iter()
            .zip(&tb)
            .all(|(x, y)| x == y || (is_type_var(x) && is_type_var(y)))
}

fn params_equal(a: &[String], b: &[String], opts: MatchOptions) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| types_equal(x, y, opts))
}

fn shared_prefix(a: &[String], b: &[String], opts: MatchOptions) -> usize {
    a.iter()
        .zip(b)
        .take_while(|(x, y)| types_equal(x, y, opts))
        .count()
}

/// The documented method a recommendation names exactly, if any.
pub fn exact_method<'a>(sig: &ParsedSignature, cls: &'a ClassDoc, opts: MatchOptions) -> Option<&'a MethodSpec> {
    if sig.status == ParseStatus::Malformed {
        return None;
    }
    let name = sig.simple_name.as_deref()?;
    cls.overloads(name).into_iter().find(|m| {
        params_equal(&sig.param_types, &m.param_types, opts)
            && match &sig.return_type {
                Some(rt) => types_equal(rt, &m.return_type, opts),
                // A constructor is written without a return type.
                None => m.is_constructor(),
            }
    })
}

/// Matches a parsed recommendation against one class's own methods.
pub fn match_signature(sig: &ParsedSignature, cls: &ClassDoc, opts: MatchOptions) -> MatchVerdict {
    if sig.status == ParseStatus::Malformed {
        return MatchVerdict::of(VerdictKind::Malformed);
    }
    let Some(name) = sig.simple_name.as_deref() else {
        return MatchVerdict::of(VerdictKind::Malformed);
    };
    let overloads = cls.overloads(name);
    if overloads.is_empty() {
        return if cls.field_names.contains(name) {
            MatchVerdict::of(VerdictKind::NotMethod)
        } else {
            MatchVerdict::of(VerdictKind::NameNotFound)
        };
    }

    if exact_method(sig, cls, opts).is_some() {
        return MatchVerdict::of(VerdictKind::Exact);
    }

    let closest = closest_overload(sig, &overloads, opts);
    let mut parts = BTreeSet::new();
    match &sig.return_type {
        Some(rt) if types_equal(rt, &closest.return_type, opts) => {}
        None if closest.is_constructor() => {}
        _ => {
            parts.insert(MismatchPart::ReturnType);
        }
    }
    if sig.param_types.len() != closest.param_types.len() {
        parts.insert(MismatchPart::ParamCount);
    }
    if sig
        .param_types
        .iter()
        .zip(&closest.param_types)
        .any(|(a, b)| !types_equal(a, b, opts))
    {
        parts.insert(MismatchPart::ParamTypes);
    }
    MatchVerdict {
        kind: VerdictKind::NameExistsSignatureMismatch,
        overload_merge: detect_overload_merge(sig, &overloads, opts),
        mismatch_parts: parts,
        declared_on_parent: false,
    }
}

/// Like [`match_signature`], additionally annotating names that only the
/// parent class declares.
pub fn match_in_database(
    sig: &ParsedSignature,
    cls: &ClassDoc,
    db: &ApiDatabase,
    opts: MatchOptions,
) -> MatchVerdict {
    let mut verdict = match_signature(sig, cls, opts);
    if verdict.kind == VerdictKind::NameNotFound {
        if let (Some(parent), Some(name)) = (&cls.parent_fqcn, &sig.simple_name) {
            verdict.declared_on_parent = db
                .query_class(parent)
                .is_some_and(|p| p.has_method_named(name));
        }
    }
    verdict
}

/// Reference overload for reporting which parts are wrong: longest shared
/// parameter-type prefix, then smallest parameter-count difference, then
/// declaration order.
fn closest_overload<'a>(
    sig: &ParsedSignature,
    overloads: &[&'a MethodSpec],
    opts: MatchOptions,
) -> &'a MethodSpec {
    let mut best = overloads[0];
    let mut best_key = (0usize, usize::MAX);
    for (i, m) in overloads.iter().enumerate() {
        let prefix = shared_prefix(&sig.param_types, &m.param_types, opts);
        let diff = sig.param_types.len().abs_diff(m.param_types.len());
        if i == 0 || prefix > best_key.0 || (prefix == best_key.0 && diff < best_key.1) {
            best = m;
            best_key = (prefix, diff);
        }
    }
    best
}

/// True iff the return type comes from one overload and the parameter list
/// from a different one.
pub fn detect_overload_merge(
    sig: &ParsedSignature,
    overloads: &[&MethodSpec],
    opts: MatchOptions,
) -> bool {
    let Some(rt) = &sig.return_type else {
        return false;
    };
    overloads.iter().enumerate().any(|(a, ma)| {
        types_equal(rt, &ma.return_type, opts)
            && overloads
                .iter()
                .enumerate()
                .any(|(b, mb)| a != b && params_equal(&sig.param_types, &mb.param_types, opts))
    })
}

pub fn classify_task1_error(verdict: &MatchVerdict) -> Result<Task1ErrorKind, SignatureError> {
    Ok(match verdict.kind {
        VerdictKind::Exact => return Err(SignatureError::ExactVerdict),
        VerdictKind::NotMethod => Task1ErrorKind::NotMethod,
        VerdictKind::NameNotFound => Task1ErrorKind::MethodNameNotExist,
        VerdictKind::NameExistsSignatureMismatch => Task1ErrorKind::IncorrectReturnTypeOrParameter,
        VerdictKind::Malformed => Task1ErrorKind::InstructionInconsistency,
    })
}
