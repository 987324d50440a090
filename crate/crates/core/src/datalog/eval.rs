//! Fixpoint evaluation: a semi-naive engine (the default) and a plain
//! naive one kept as an independent reference for testing.

use std::collections::HashMap;

use sha2::{Digest, Sha256};
use thiserror::Error;

use super::{Atom, Builtin, CmpOp, FactSet, Program, Rule, Term, AUX_PREFIX};
use crate::value::Value;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EvalError {
    #[error("comparison on non-integer value `{0}`")]
    CmpNotInt(String),
    #[error("#append on non-list value `{0}`")]
    AppendNotList(String),
    #[error("#append of non-string element `{0}`")]
    AppendNotStr(String),
    #[error("builtin read unbound variable `{0}`")]
    Unbound(String),
}

type Bindings = HashMap<String, Value>;

/// Deterministic id invention: a stable content hash of the rule name
/// and the bound derivation key, rendered as `g_<hex>`. Equal keys give
/// equal ids within and across runs.
pub fn new_id(name: &str, key: &[Value]) -> String {
    let mut hasher = Sha256::new();
    hasher.update((name.len() as u64).to_le_bytes());
    hasher.update(name.as_bytes());
    for v in key {
        match v {
            Value::Str(s) => {
                hasher.update([0u8]);
                hasher.update((s.len() as u64).to_le_bytes());
                hasher.update(s.as_bytes());
            }
            Value::Int(n) => {
                hasher.update([1u8]);
                hasher.update(n.to_le_bytes());
            }
            Value::List(items) => {
                hasher.update([2u8]);
                hasher.update((items.len() as u64).to_le_bytes());
                for item in items {
                    hasher.update((item.len() as u64).to_le_bytes());
                    hasher.update(item.as_bytes());
                }
            }
        }
    }
    let digest = hasher.finalize();
    let mut out = String::from("g_");
    for byte in &digest[..8] {
        out.push_str(&format!("{byte:02x}"));
    }
    out
}

fn resolve(term: &Term, env: &Bindings) -> Result<Value, EvalError> {
    match term {
        Term::Const(c) => Ok(c.clone()),
        Term::Var(v) => env
            .get(v)
            .cloned()
            .ok_or_else(|| EvalError::Unbound(v.clone())),
    }
}

fn unify_atom(atom: &Atom, tuple: &[Value], env: &Bindings) -> Option<Bindings> {
    if atom.args.len() != tuple.len() {
        return None;
    }
    let mut env = env.clone();
    for (arg, value) in atom.args.iter().zip(tuple) {
        match arg {
            Term::Const(c) => {
                if c != value {
                    return None;
                }
            }
            Term::Var(v) => match env.get(v) {
                Some(bound) => {
                    if bound != value {
                        return None;
                    }
                }
                None => {
                    env.insert(v.clone(), value.clone());
                }
            },
        }
    }
    Some(env)
}

/// Runs the builtin chain over a complete body binding; returns false
/// when a comparison filters the binding out.
fn apply_builtins(rule: &Rule, env: &mut Bindings) -> Result<bool, EvalError> {
    for b in &rule.builtins {
        match b {
            Builtin::NewId { out } => {
                let name = rule
                    .head
                    .pred
                    .strip_prefix(AUX_PREFIX)
                    .unwrap_or(&rule.head.pred);
                let mut key = Vec::new();
                for arg in &rule.head.args {
                    match arg {
                        Term::Var(v) if v == out => continue,
                        other => key.push(resolve(other, env)?),
                    }
                }
                env.insert(out.clone(), Value::Str(new_id(name, &key)));
            }
            Builtin::Append { out, list, elem } => {
                let list = resolve(list, env)?;
                let elem = resolve(elem, env)?;
                let Value::List(mut items) = list else {
                    return Err(EvalError::AppendNotList(list.to_string()));
                };
                let Value::Str(s) = elem else {
                    return Err(EvalError::AppendNotStr(elem.to_string()));
                };
                items.push(s);
                env.insert(out.clone(), Value::List(items));
            }
            Builtin::EmptyList { out } => {
                env.insert(out.clone(), Value::List(Vec::new()));
            }
            Builtin::Cmp { op, lhs, rhs } => {
                let l = resolve(lhs, env)?;
                let r = resolve(rhs, env)?;
                let (Value::Int(l), Value::Int(r)) = (&l, &r) else {
                    let bad = if l.as_int().is_none() { l } else { r };
                    return Err(EvalError::CmpNotInt(bad.to_string()));
                };
                let keep = match op {
                    CmpOp::Eq => l == r,
                    CmpOp::Ne => l != r,
                    CmpOp::Lt => l < r,
                    CmpOp::Le => l <= r,
                };
                if !keep {
                    return Ok(false);
                }
            }
        }
    }
    Ok(true)
}

fn instantiate_head(rule: &Rule, env: &Bindings) -> Result<Vec<Value>, EvalError> {
    rule.head.args.iter().map(|t| resolve(t, env)).collect()
}

/// Joins the rule body left to right. When `delta_at` is set, that body
/// position draws from `delta` instead of `all` (the semi-naive trick);
/// derived head tuples are appended to `out`.
fn fire_rule(
    rule: &Rule,
    all: &FactSet,
    delta: Option<(&FactSet, usize)>,
    out: &mut Vec<(String, Vec<Value>)>,
) -> Result<(), EvalError> {
    fn descend(
        rule: &Rule,
        all: &FactSet,
        delta: Option<(&FactSet, usize)>,
        idx: usize,
        env: &Bindings,
        out: &mut Vec<(String, Vec<Value>)>,
    ) -> Result<(), EvalError> {
        if idx == rule.body.len() {
            let mut env = env.clone();
            if apply_builtins(rule, &mut env)? {
                out.push((rule.head.pred.clone(), instantiate_head(rule, &env)?));
            }
            return Ok(());
        }
        let atom = &rule.body[idx];
        let source = match delta {
            Some((d, at)) if at == idx => d,
            _ => all,
        };
        for tuple in source.tuples(&atom.pred) {
            if let Some(next) = unify_atom(atom, tuple, env) {
                descend(rule, all, delta, idx + 1, &next, out)?;
            }
        }
        Ok(())
    }
    descend(rule, all, delta, 0, &Bindings::new(), out)
}

/// Least fixpoint by semi-naive iteration: facts are joined against the
/// previous round's delta in one body position and the full set
/// elsewhere. The result includes the EDB.
pub fn evaluate(program: &Program, edb: &FactSet) -> Result<FactSet, EvalError> {
    let mut all = edb.clone();
    let mut delta = FactSet::new();

    // Round zero: facts and every rule over the EDB alone.
    let mut derived = Vec::new();
    for rule in &program.rules {
        fire_rule(rule, &all, None, &mut derived)?;
    }
    for (pred, tuple) in derived {
        if all.insert(pred.clone(), tuple.clone()) {
            delta.insert(pred, tuple);
        }
    }

    while !delta.is_empty() {
        let mut derived = Vec::new();
        for rule in &program.rules {
            if rule.body.is_empty() {
                continue;
            }
            for at in 0..rule.body.len() {
                fire_rule(rule, &all, Some((&delta, at)), &mut derived)?;
            }
        }
        let mut next_delta = FactSet::new();
        for (pred, tuple) in derived {
            if all.insert(pred.clone(), tuple.clone()) {
                next_delta.insert(pred, tuple);
            }
        }
        delta = next_delta;
    }
    Ok(all)
}

/// Reference evaluator: re-fires every rule over the whole fact set
/// until nothing new appears. Kept deliberately separate from
/// [`evaluate`] so the two can check each other.
pub fn evaluate_naive(program: &Program, edb: &FactSet) -> Result<FactSet, EvalError> {
    let mut all = edb.clone();
    loop {
        let mut derived = Vec::new();
        for rule in &program.rules {
            fire_rule(rule, &all, None, &mut derived)?;
        }
        let before = all.len();
        for (pred, tuple) in derived {
            all.insert(pred, tuple);
        }
        if all.len() == before {
            return Ok(all);
        }
    }
}
