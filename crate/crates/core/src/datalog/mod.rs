//! Positive Datalog with a handful of builtins: deterministic id
//! invention (`#newID`), list construction/append, and integer
//! comparisons. No negation, no recursion through id invention.

mod eval;
pub mod text;

pub use eval::{evaluate, evaluate_naive, new_id, EvalError};

use std::collections::{HashMap, HashSet};
use std::fmt;

use thiserror::Error;

use crate::value::Value;

pub const AUX_PREFIX: &str = "aux_";

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Term {
    Var(String),
    Const(Value),
}

impl Term {
    pub fn var(name: impl Into<String>) -> Term {
        Term::Var(name.into())
    }

    pub fn str(s: impl Into<String>) -> Term {
        Term::Const(Value::Str(s.into()))
    }

    pub fn int(n: i64) -> Term {
        Term::Const(Value::Int(n))
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => write!(f, "{v}"),
            Term::Const(Value::Str(s)) if is_plain_symbol(s) => write!(f, "{s}"),
            Term::Const(c) => write!(f, "{c}"),
        }
    }
}

/// Lowercase identifiers print unquoted (object ids in listings look
/// like `filled19`), everything else gets quoted.
fn is_plain_symbol(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_lowercase() => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Atom {
    pub pred: String,
    pub args: Vec<Term>,
}

impl Atom {
    pub fn new(pred: impl Into<String>, args: Vec<Term>) -> Atom {
        Atom {
            pred: pred.into(),
            args,
        }
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.pred)?;
        for (i, arg) in self.args.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{arg}")?;
        }
        write!(f, ")")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
}

impl fmt::Display for CmpOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            CmpOp::Eq => "==",
            CmpOp::Ne => "!=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
        };
        write!(f, "{s}")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Builtin {
    /// `Out = #newID` — invents an id keyed on the rule's other head
    /// arguments, so re-derivations of the same tuple agree across
    /// iterations and runs.
    NewId { out: String },
    /// `Out = #append(List, Elem)`
    Append { out: String, list: Term, elem: Term },
    /// `Out = #emptyList`
    EmptyList { out: String },
    /// Integer comparison filter.
    Cmp { op: CmpOp, lhs: Term, rhs: Term },
}

impl fmt::Display for Builtin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Builtin::NewId { out } => write!(f, "{out}=#newID"),
            Builtin::Append { out, list, elem } => write!(f, "{out}=#append({list}, {elem})"),
            Builtin::EmptyList { out } => write!(f, "{out}=#emptyList"),
            Builtin::Cmp { op, lhs, rhs } => write!(f, "{lhs} {op} {rhs}"),
        }
    }
}

/// A rule whose head may carry an object-id prefix (`Id : pred(args)`
/// sugar, stored desugared with the id as first argument).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rule {
    pub head: Atom,
    pub body: Vec<Atom>,
    pub builtins: Vec<Builtin>,
    /// True when the head was written `Id : pred(args)`; affects only
    /// printing.
    pub typed_head: bool,
}

impl Rule {
    pub fn new(head: Atom, body: Vec<Atom>) -> Rule {
        Rule {
            head,
            body,
            builtins: Vec::new(),
            typed_head: false,
        }
    }

    pub fn fact(head: Atom) -> Rule {
        Rule::new(head, Vec::new())
    }

    pub fn with_builtins(mut self, builtins: Vec<Builtin>) -> Rule {
        self.builtins = builtins;
        self
    }

    pub fn is_fact(&self) -> bool {
        self.body.is_empty() && self.builtins.is_empty()
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.typed_head && !self.head.args.is_empty() {
            let rest = Atom {
                pred: self.head.pred.clone(),
                args: self.head.args[1..].to_vec(),
            };
            write!(f, "{} : {rest}", self.head.args[0])?;
        } else {
            write!(f, "{}", self.head)?;
        }
        if self.body.is_empty() && self.builtins.is_empty() {
            return write!(f, ".");
        }
        write!(f, " :- ")?;
        let mut first = true;
        for atom in &self.body {
            if !first {
                write!(f, ", ")?;
            }
            write!(f, "{atom}")?;
            first = false;
        }
        for b in &self.builtins {
            if !first {
                write!(f, ", ")?;
            }
            write!(f, "{b}")?;
            first = false;
        }
        write!(f, ".")
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Program {
    pub rules: Vec<Rule>,
}

impl Program {
    pub fn new(rules: Vec<Rule>) -> Program {
        Program { rules }
    }
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for rule in &self.rules {
            writeln!(f, "{rule}")?;
        }
        Ok(())
    }
}

/// Ground facts grouped by predicate.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FactSet {
    by_pred: HashMap<String, HashSet<Vec<Value>>>,
    len: usize,
}

impl FactSet {
    pub fn new() -> FactSet {
        FactSet::default()
    }

    pub fn insert(&mut self, pred: impl Into<String>, args: Vec<Value>) -> bool {
        let added = self.by_pred.entry(pred.into()).or_default().insert(args);
        if added {
            self.len += 1;
        }
        added
    }

    pub fn contains(&self, pred: &str, args: &[Value]) -> bool {
        self.by_pred
            .get(pred)
            .map(|set| set.contains(args))
            .unwrap_or(false)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn tuples(&self, pred: &str) -> impl Iterator<Item = &Vec<Value>> {
        self.by_pred.get(pred).into_iter().flatten()
    }

    pub fn predicates(&self) -> impl Iterator<Item = &str> {
        self.by_pred.keys().map(|s| s.as_str())
    }

    pub fn merge(&mut self, other: &FactSet) {
        for (pred, tuples) in &other.by_pred {
            for t in tuples {
                self.insert(pred.clone(), t.clone());
            }
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Vec<Value>)> {
        self.by_pred
            .iter()
            .flat_map(|(p, set)| set.iter().map(move |t| (p.as_str(), t)))
    }

    /// Sorted `(pred, tuple)` pairs, for deterministic output.
    pub fn sorted(&self) -> Vec<(&str, &Vec<Value>)> {
        let mut all: Vec<_> = self.iter().collect();
        all.sort();
        all
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RuleError {
    #[error("rule `{rule}`: head variable `{var}` is not bound by the body")]
    NotRangeRestricted { rule: String, var: String },
    #[error("rule `{rule}`: builtin input `{var}` is unbound where it is used")]
    UnboundBuiltinInput { rule: String, var: String },
    #[error("rule `{rule}`: builtin output `{var}` is already bound")]
    RebindsBuiltinOutput { rule: String, var: String },
    #[error("rule `{rule}`: #newID may only derive `aux_*` predicates")]
    NewIdOutsideAux { rule: String },
    #[error("rule `{rule}`: more than one #newID")]
    MultipleNewId { rule: String },
    #[error(
        "rule `{rule}`: invented ids can flow into a #newID key (via `{pred}`), \
         which would not terminate"
    )]
    NewIdNotStratified { rule: String, pred: String },
}

fn term_vars<'a>(term: &'a Term, out: &mut Vec<&'a str>) {
    if let Term::Var(v) = term {
        out.push(v);
    }
}

/// Load-time validation: range restriction, builtin boundedness and
/// freshness, `#newID` placement, and the no-invented-ids-into-keys
/// stratification check that keeps fixpoints finite.
pub fn validate_program(program: &Program) -> Result<(), RuleError> {
    for rule in &program.rules {
        validate_rule(rule)?;
    }
    check_newid_stratified(program)
}

fn validate_rule(rule: &Rule) -> Result<(), RuleError> {
    let name = rule.to_string();
    let mut bound: HashSet<&str> = HashSet::new();
    for atom in &rule.body {
        for arg in &atom.args {
            let mut vs = Vec::new();
            term_vars(arg, &mut vs);
            bound.extend(vs);
        }
    }
    let mut newid_count = 0;
    for b in &rule.builtins {
        match b {
            Builtin::NewId { out } => {
                newid_count += 1;
                if !rule.head.pred.starts_with(AUX_PREFIX) {
                    return Err(RuleError::NewIdOutsideAux { rule: name });
                }
                if bound.contains(out.as_str()) {
                    return Err(RuleError::RebindsBuiltinOutput {
                        rule: name,
                        var: out.clone(),
                    });
                }
                bound.insert(out);
            }
            Builtin::Append { out, list, elem } => {
                for t in [list, elem] {
                    let mut vs = Vec::new();
                    term_vars(t, &mut vs);
                    for v in vs {
                        if !bound.contains(v) {
                            return Err(RuleError::UnboundBuiltinInput {
                                rule: name,
                                var: v.to_string(),
                            });
                        }
                    }
                }
                if bound.contains(out.as_str()) {
                    return Err(RuleError::RebindsBuiltinOutput {
                        rule: name,
                        var: out.clone(),
                    });
                }
                bound.insert(out);
            }
            Builtin::EmptyList { out } => {
                if bound.contains(out.as_str()) {
                    return Err(RuleError::RebindsBuiltinOutput {
                        rule: name,
                        var: out.clone(),
                    });
                }
                bound.insert(out);
            }
            Builtin::Cmp { lhs, rhs, .. } => {
                for t in [lhs, rhs] {
                    let mut vs = Vec::new();
                    term_vars(t, &mut vs);
                    for v in vs {
                        if !bound.contains(v) {
                            return Err(RuleError::UnboundBuiltinInput {
                                rule: name,
                                var: v.to_string(),
                            });
                        }
                    }
                }
            }
        }
    }
    if newid_count > 1 {
        return Err(RuleError::MultipleNewId { rule: name });
    }
    for arg in &rule.head.args {
        let mut vs = Vec::new();
        term_vars(arg, &mut vs);
        for v in vs {
            if !bound.contains(v) {
                return Err(RuleError::NotRangeRestricted {
                    rule: name,
                    var: v.to_string(),
                });
            }
        }
    }
    Ok(())
}

/// Taints `(predicate, argument position)` pairs that can carry an
/// invented id, then rejects any rule whose #newID key reads a tainted
/// position. Atom predicates absent from the program head set are EDB
/// and never tainted.
fn check_newid_stratified(program: &Program) -> Result<(), RuleError> {
    let mut tainted: HashSet<(String, usize)> = HashSet::new();
    // Seed: the #newID output position in each inventing rule's head.
    for rule in &program.rules {
        for b in &rule.builtins {
            if let Builtin::NewId { out } = b {
                for (i, arg) in rule.head.args.iter().enumerate() {
                    if matches!(arg, Term::Var(v) if v == out) {
                        tainted.insert((rule.head.pred.clone(), i));
                    }
                }
            }
        }
    }
    // Propagate through rules to a fixpoint.
    loop {
        let mut changed = false;
        for rule in &program.rules {
            let mut tainted_vars: HashSet<&str> = HashSet::new();
            for atom in &rule.body {
                for (i, arg) in atom.args.iter().enumerate() {
                    if let Term::Var(v) = arg {
                        if tainted.contains(&(atom.pred.clone(), i)) {
                            tainted_vars.insert(v);
                        }
                    }
                }
            }
            for (i, arg) in rule.head.args.iter().enumerate() {
                if let Term::Var(v) = arg {
                    if tainted_vars.contains(v.as_str())
                        && tainted.insert((rule.head.pred.clone(), i))
                    {
                        changed = true;
                    }
                }
            }
        }
        if !changed {
            break;
        }
    }
    // The key of a #newID rule is every head argument except the
    // invented one; none may be tainted.
    for rule in &program.rules {
        let newid_out = rule.builtins.iter().find_map(|b| match b {
            Builtin::NewId { out } => Some(out.as_str()),
            _ => None,
        });
        let Some(out) = newid_out else { continue };
        let mut tainted_vars: HashSet<&str> = HashSet::new();
        let mut via = String::new();
        for atom in &rule.body {
            for (i, arg) in atom.args.iter().enumerate() {
                if let Term::Var(v) = arg {
                    if tainted.contains(&(atom.pred.clone(), i)) {
                        tainted_vars.insert(v);
                        via = atom.pred.clone();
                    }
                }
            }
        }
        for arg in &rule.head.args {
            if let Term::Var(v) = arg {
                if v != out && tainted_vars.contains(v.as_str()) {
                    return Err(RuleError::NewIdNotStratified {
                        rule: rule.to_string(),
                        pred: via,
                    });
                }
            }
        }
    }
    Ok(())
}
