//! Descriptor-to-Datalog compilation.
//!
//! The body is first normalized into a sequence of *steps* (a concept
//! or a CONTAINS pair, with the actions that follow it folded in) and
//! *loops* (recurrences); `...` markers become relaxation flags on the
//! following step. Each step then gets one automaton state and one
//! transition rule per incoming edge; a CONTAINS step takes two states
//! (outer cell found, then outer plus contained object, both read from
//! the predecessor state). Loops re-enter their first step's state
//! from their last state.
//!
//! Configuration predicates carry the descriptor's attribute slots and
//! the growing extent:
//!
//! ```text
//! 2D axes: conf_D(state, slots..., Xs, Ys, Xe, Ye)
//! 1D axis: conf_D(state, slots..., Cell, Ps, Pe)
//! ```
//!
//! Slots are the head parameters plus any variable a later element's
//! action reads; actions never consume a state of their own.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::datalog::{Atom, Builtin, CmpOp, Program, Rule, Term, AUX_PREFIX};
use crate::dscript::{
    ActionStatement, AssignSource, Axis, BodyElement, ConceptMatch, LinkedDescriptor,
};
use crate::ontology::{
    AttrType, Taxonomy, PRED_BELONGS_TO, PRED_BI_POSITION, PRED_ONE_POSITION,
};
use crate::value::Value;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CompileError {
    #[error("descriptor `{0}`: an action may only follow a concept element here")]
    ActionPlacement(String),
    #[error("descriptor `{0}`: the body matches nothing")]
    EmptyPattern(String),
    #[error("descriptor `{descriptor}`: unknown concept `{concept}`")]
    UnknownConcept {
        descriptor: String,
        concept: String,
    },
}

/// A descriptor lowered to Datalog rules.
#[derive(Debug, Clone)]
pub struct CompiledDescriptor {
    pub name: String,
    pub axis: Axis,
    pub param_types: Vec<(String, AttrType)>,
    /// The ground `init_conf_*` fact.
    pub init: Rule,
    /// Transition, aux, object-creation, and position rules.
    pub rules: Vec<Rule>,
    /// The final (accepting) state.
    pub state_count: usize,
}

impl CompiledDescriptor {
    pub fn conf_pred(&self) -> String {
        format!("conf_{}", self.name)
    }

    pub fn aux_pred(&self) -> String {
        format!("{AUX_PREFIX}{}", self.name)
    }

    /// The full evaluatable program: the init fact plus all rules.
    pub fn program(&self) -> Program {
        let mut rules = vec![self.init.clone()];
        rules.extend(self.rules.clone());
        Program::new(rules)
    }

    pub fn rules_by_prefix(&self, prefix: &str) -> usize {
        self.rules
            .iter()
            .filter(|r| r.head.pred.starts_with(prefix))
            .count()
    }
}

// ---------------------------------------------------------------------
// Body normalization
// ---------------------------------------------------------------------

#[derive(Debug, Clone)]
enum StepConcept {
    Concept(ConceptMatch),
    Contains {
        outer: ConceptMatch,
        inner: ConceptMatch,
    },
}

#[derive(Debug, Clone)]
struct StepData {
    concept: StepConcept,
    actions: Vec<ActionStatement>,
    /// A `...` immediately precedes this step.
    relaxed: bool,
}

#[derive(Debug)]
enum Unit {
    Step(StepData),
    Loop {
        units: Vec<Unit>,
        /// A `...` closes the loop body: both the re-entry edge and
        /// the element after the loop relax.
        trailing_relax: bool,
        /// A `...` precedes the loop, relaxing its first entry.
        relaxed: bool,
    },
}

struct LevelBuilder {
    units: Vec<Unit>,
    pending_relax: bool,
    leading_actions: Vec<ActionStatement>,
    allow_leading: bool,
}

fn collect_units(
    name: &str,
    elems: &[BodyElement],
    level: &mut LevelBuilder,
) -> Result<(), CompileError> {
    for e in elems {
        match e {
            BodyElement::Concept(c) => {
                level.units.push(Unit::Step(StepData {
                    concept: StepConcept::Concept(c.clone()),
                    actions: Vec::new(),
                    relaxed: std::mem::take(&mut level.pending_relax),
                }));
            }
            BodyElement::Contains { outer, inner } => {
                level.units.push(Unit::Step(StepData {
                    concept: StepConcept::Contains {
                        outer: outer.clone(),
                        inner: inner.clone(),
                    },
                    actions: Vec::new(),
                    relaxed: std::mem::take(&mut level.pending_relax),
                }));
            }
            BodyElement::Action(stmts) => match level.units.last_mut() {
                Some(Unit::Step(step)) => step.actions.extend(stmts.iter().cloned()),
                Some(Unit::Loop { .. }) => {
                    return Err(CompileError::ActionPlacement(name.to_string()))
                }
                None => {
                    if level.allow_leading {
                        level.leading_actions.extend(stmts.iter().cloned());
                    } else {
                        return Err(CompileError::ActionPlacement(name.to_string()));
                    }
                }
            },
            BodyElement::Skip => level.pending_relax = true,
            BodyElement::Group(es) => collect_units(name, es, level)?,
            BodyElement::Recurrence(es) => {
                let relaxed = std::mem::take(&mut level.pending_relax);
                let mut sub = LevelBuilder {
                    units: Vec::new(),
                    pending_relax: false,
                    leading_actions: Vec::new(),
                    allow_leading: false,
                };
                collect_units(name, es, &mut sub)?;
                if sub.units.is_empty() {
                    return Err(CompileError::EmptyPattern(name.to_string()));
                }
                let trailing = sub.pending_relax;
                level.units.push(Unit::Loop {
                    units: sub.units,
                    trailing_relax: trailing,
                    relaxed,
                });
                // The in-loop trailing skip also relaxes whatever
                // follows the loop.
                level.pending_relax = trailing;
            }
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------
// Lowering
// ---------------------------------------------------------------------

#[derive(Debug, Clone, Copy)]
struct Source {
    state: usize,
    relaxed: bool,
}

/// Already-allocated state(s) of a step: the target state, and for
/// CONTAINS the preliminary outer-only state.
#[derive(Debug, Clone, Copy)]
struct StepStates {
    dead: Option<usize>,
    full: usize,
}

struct Compiler<'a> {
    name: String,
    axis: Axis,
    taxonomy: &'a Taxonomy,
    /// Slot names in conf order: parameters first, then carried vars.
    slots: Vec<String>,
    used_names: BTreeSet<String>,
    ext: ExtentNames,
    rules: Vec<Rule>,
    next_state: usize,
}

#[derive(Debug, Clone)]
struct ExtentNames {
    xs: String,
    ys: String,
    xe: String,
    ye: String,
    cell: String,
    ps: String,
    pe: String,
}

impl<'a> Compiler<'a> {
    fn fresh(&mut self, base: &str) -> String {
        let mut name = base.to_string();
        while self.used_names.contains(&name) {
            name.push('_');
        }
        self.used_names.insert(name.clone());
        name
    }

    fn conf_pred(&self) -> String {
        format!("conf_{}", self.name)
    }

    fn init_pred(&self) -> String {
        format!("init_conf_{}", self.name)
    }

    fn extent_vars(&self) -> Vec<Term> {
        match self.axis {
            Axis::OneDim => vec![
                Term::var(&self.ext.cell),
                Term::var(&self.ext.ps),
                Term::var(&self.ext.pe),
            ],
            _ => vec![
                Term::var(&self.ext.xs),
                Term::var(&self.ext.ys),
                Term::var(&self.ext.xe),
                Term::var(&self.ext.ye),
            ],
        }
    }

    fn slot_vars(&self) -> Vec<Term> {
        self.slots.iter().map(Term::var).collect()
    }

    /// Body atom reading the source configuration; for state 0 this is
    /// the extent-free init fact.
    fn source_atom(&self, state: usize) -> Atom {
        if state == 0 {
            let mut args = vec![Term::int(0)];
            args.extend(self.slot_vars());
            Atom::new(self.init_pred(), args)
        } else {
            let mut args = vec![Term::int(state as i64)];
            args.extend(self.slot_vars());
            args.extend(self.extent_vars());
            Atom::new(self.conf_pred(), args)
        }
    }

    /// Concept atom with one binder per declared attribute (vars from
    /// the descriptor first, don't-cares for the rest). Returns the
    /// object id var and the descriptor-var binder map additions.
    fn concept_atom(
        &mut self,
        c: &ConceptMatch,
        state: usize,
        id_base: &str,
        binders: &mut BTreeMap<String, String>,
    ) -> Result<(Atom, String), CompileError> {
        let attrs = self.taxonomy.all_attributes(&c.type_name).map_err(|_| {
            CompileError::UnknownConcept {
                descriptor: self.name.clone(),
                concept: c.type_name.clone(),
            }
        })?;
        let id_var = self.fresh(&format!("{id_base}{state}"));
        let mut args = vec![Term::var(&id_var)];
        for (i, _) in attrs.iter().enumerate() {
            if let Some(v) = c.vars.get(i) {
                let binder = self.fresh(&format!("{v}_e{state}"));
                binders.insert(v.clone(), binder.clone());
                args.push(Term::var(binder));
            } else {
                args.push(Term::var(self.fresh(&format!("U{state}x{i}"))));
            }
        }
        Ok((Atom::new(c.type_name.clone(), args), id_var))
    }

    /// Position atoms and the new head extent for a consuming
    /// transition.
    fn position_clause(
        &mut self,
        id_var: &str,
        first: bool,
        relaxed: bool,
        state: usize,
    ) -> (Vec<Atom>, Vec<Builtin>, Vec<Term>) {
        let mut atoms = Vec::new();
        let mut builtins = Vec::new();
        let ext = self.ext.clone();
        let new_end = |me: &mut Self, base: &str| me.fresh(&format!("{base}_{state}"));
        match self.axis {
            Axis::Horizontal | Axis::Vertical if first => {
                atoms.push(Atom::new(
                    PRED_BI_POSITION,
                    vec![
                        Term::var(id_var),
                        Term::var(&ext.xs),
                        Term::var(&ext.ys),
                        Term::var(&ext.xe),
                        Term::var(&ext.ye),
                    ],
                ));
                let head = self.extent_vars();
                (atoms, builtins, head)
            }
            Axis::Horizontal => {
                let xe1 = new_end(self, "Xe");
                let xstart = if relaxed {
                    let v = self.fresh(&format!("NXs{state}"));
                    builtins.push(Builtin::Cmp {
                        op: CmpOp::Le,
                        lhs: Term::var(&ext.xe),
                        rhs: Term::var(&v),
                    });
                    v
                } else {
                    ext.xe.clone()
                };
                atoms.push(Atom::new(
                    PRED_BI_POSITION,
                    vec![
                        Term::var(id_var),
                        Term::var(&xstart),
                        Term::var(&ext.ys),
                        Term::var(&xe1),
                        Term::var(&ext.ye),
                    ],
                ));
                let head = vec![
                    Term::var(&ext.xs),
                    Term::var(&ext.ys),
                    Term::var(&xe1),
                    Term::var(&ext.ye),
                ];
                (atoms, builtins, head)
            }
            Axis::Vertical => {
                let ye1 = new_end(self, "Ye");
                let ystart = if relaxed {
                    let v = self.fresh(&format!("NYs{state}"));
                    builtins.push(Builtin::Cmp {
                        op: CmpOp::Le,
                        lhs: Term::var(&ext.ye),
                        rhs: Term::var(&v),
                    });
                    v
                } else {
                    ext.ye.clone()
                };
                atoms.push(Atom::new(
                    PRED_BI_POSITION,
                    vec![
                        Term::var(id_var),
                        Term::var(&ext.xs),
                        Term::var(&ystart),
                        Term::var(&ext.xe),
                        Term::var(&ye1),
                    ],
                ));
                let head = vec![
                    Term::var(&ext.xs),
                    Term::var(&ext.ys),
                    Term::var(&ext.xe),
                    Term::var(&ye1),
                ];
                (atoms, builtins, head)
            }
            Axis::OneDim if first => {
                atoms.push(Atom::new(
                    PRED_ONE_POSITION,
                    vec![Term::var(id_var), Term::var(&ext.ps), Term::var(&ext.pe)],
                ));
                atoms.push(Atom::new(
                    PRED_BELONGS_TO,
                    vec![Term::var(id_var), Term::var(&ext.cell)],
                ));
                let head = self.extent_vars();
                (atoms, builtins, head)
            }
            Axis::OneDim => {
                let pe1 = new_end(self, "Pe");
                let start = if relaxed {
                    let v = self.fresh(&format!("NPs{state}"));
                    builtins.push(Builtin::Cmp {
                        op: CmpOp::Le,
                        lhs: Term::var(&ext.pe),
                        rhs: Term::var(&v),
                    });
                    v
                } else {
                    ext.pe.clone()
                };
                atoms.push(Atom::new(
                    PRED_ONE_POSITION,
                    vec![Term::var(id_var), Term::var(&start), Term::var(&pe1)],
                ));
                atoms.push(Atom::new(
                    PRED_BELONGS_TO,
                    vec![Term::var(id_var), Term::var(&ext.cell)],
                ));
                let head = vec![
                    Term::var(&ext.cell),
                    Term::var(&ext.ps),
                    Term::var(&pe1),
                ];
                (atoms, builtins, head)
            }
        }
    }

    /// New slot terms after this step's bindings and folded actions.
    fn slot_updates(
        &mut self,
        step: &StepData,
        binders: &BTreeMap<String, String>,
        builtins: &mut Vec<Builtin>,
    ) -> Vec<Term> {
        let mut current: BTreeMap<String, Term> = self
            .slots
            .iter()
            .map(|s| (s.clone(), Term::var(s)))
            .collect();
        // A slot var re-bound by this step's concept takes the binder.
        for (var, binder) in binders {
            if current.contains_key(var) {
                current.insert(var.clone(), Term::var(binder));
            }
        }
        // Element-local assignment targets that are not slots.
        let mut locals: BTreeMap<String, Term> = BTreeMap::new();
        let resolve = |v: &str,
                       binders: &BTreeMap<String, String>,
                       current: &BTreeMap<String, Term>,
                       locals: &BTreeMap<String, Term>| {
            if let Some(local) = locals.get(v) {
                return local.clone();
            }
            if let Some(b) = binders.get(v) {
                return Term::var(b);
            }
            current
                .get(v)
                .cloned()
                .unwrap_or_else(|| Term::Const(Value::str("")))
        };
        for stmt in &step.actions {
            let (target, value) = match stmt {
                ActionStatement::Assign { target, source } => {
                    let value = match source {
                        AssignSource::Var(v) => resolve(v, binders, &current, &locals),
                        AssignSource::Literal(s) => Term::Const(Value::str(s.clone())),
                    };
                    (target, value)
                }
                ActionStatement::InitList { target } => {
                    (target, Term::Const(Value::List(Vec::new())))
                }
                ActionStatement::Append { target, source } => {
                    let list = resolve(target, binders, &current, &locals);
                    let elem = resolve(source, binders, &current, &locals);
                    let out = self.fresh(&format!("Ap{}", builtins.len()));
                    builtins.push(Builtin::Append {
                        out: out.clone(),
                        list,
                        elem,
                    });
                    (target, Term::var(out))
                }
            };
            if current.contains_key(target) {
                current.insert(target.clone(), value);
            } else {
                locals.insert(target.clone(), value);
            }
        }
        self.slots.iter().map(|s| current[s].clone()).collect()
    }

    /// Emits the transition rule(s) for a step from one source state.
    fn emit_step(
        &mut self,
        step: &StepData,
        src: Source,
        states: StepStates,
    ) -> Result<(), CompileError> {
        let relaxed = src.relaxed || step.relaxed;
        let first = src.state == 0;
        let source_atom = self.source_atom(src.state);
        match (&step.concept, states.dead) {
            (StepConcept::Concept(c), None) => {
                let mut binders = BTreeMap::new();
                let (concept, id_var) = self.concept_atom(c, states.full, "Id", &mut binders)?;
                let (pos_atoms, mut builtins, head_extent) =
                    self.position_clause(&id_var, first, relaxed, states.full);
                let head_slots = self.slot_updates(step, &binders, &mut builtins);
                let mut head_args = vec![Term::int(states.full as i64)];
                head_args.extend(head_slots);
                head_args.extend(head_extent);
                let mut body = vec![source_atom];
                body.push(concept);
                body.extend(pos_atoms);
                self.rules.push(
                    Rule::new(Atom::new(self.conf_pred(), head_args), body)
                        .with_builtins(builtins),
                );
            }
            (StepConcept::Contains { outer, inner }, Some(dead)) => {
                // Preliminary state: the outer cell alone, slots
                // unchanged.
                let mut binders = BTreeMap::new();
                let (outer_atom, id_var) = self.concept_atom(outer, dead, "Id", &mut binders)?;
                let (pos_atoms, pos_builtins, head_extent) =
                    self.position_clause(&id_var, first, relaxed, dead);
                {
                    let mut head_args = vec![Term::int(dead as i64)];
                    head_args.extend(self.slot_vars());
                    head_args.extend(head_extent.clone());
                    let mut body = vec![source_atom.clone(), outer_atom.clone()];
                    body.extend(pos_atoms.clone());
                    self.rules.push(
                        Rule::new(Atom::new(self.conf_pred(), head_args), body)
                            .with_builtins(pos_builtins.clone()),
                    );
                }
                // Full state: outer plus the contained object, read
                // from the same predecessor.
                let (inner_atom, inner_id) =
                    self.concept_atom(inner, states.full, "IdC", &mut binders)?;
                let mut builtins = pos_builtins;
                let head_slots = self.slot_updates(step, &binders, &mut builtins);
                let mut head_args = vec![Term::int(states.full as i64)];
                head_args.extend(head_slots);
                head_args.extend(head_extent);
                let mut body = vec![source_atom, outer_atom];
                body.extend(pos_atoms);
                body.push(inner_atom);
                body.push(Atom::new(
                    PRED_BELONGS_TO,
                    vec![Term::var(&inner_id), Term::var(&id_var)],
                ));
                self.rules.push(
                    Rule::new(Atom::new(self.conf_pred(), head_args), body)
                        .with_builtins(builtins),
                );
            }
            _ => unreachable!("step state allocation mismatch"),
        }
        Ok(())
    }

    fn alloc_step(&mut self, step: &StepData) -> StepStates {
        match step.concept {
            StepConcept::Concept(_) => {
                self.next_state += 1;
                StepStates {
                    dead: None,
                    full: self.next_state,
                }
            }
            StepConcept::Contains { .. } => {
                let dead = self.next_state + 1;
                self.next_state += 2;
                StepStates {
                    dead: Some(dead),
                    full: self.next_state,
                }
            }
        }
    }

    /// Lowers a unit sequence from the given sources. Returns the exit
    /// sources and the first step (for loop re-entry edges).
    fn lower<'u>(
        &mut self,
        units: &'u [Unit],
        sources: Vec<Source>,
    ) -> Result<(Vec<Source>, Option<(&'u StepData, StepStates)>), CompileError> {
        let mut sources = sources;
        let mut first: Option<(&'u StepData, StepStates)> = None;
        for unit in units {
            match unit {
                Unit::Step(step) => {
                    let states = self.alloc_step(step);
                    for src in &sources {
                        self.emit_step(step, *src, states)?;
                    }
                    if first.is_none() {
                        first = Some((step, states));
                    }
                    sources = vec![Source {
                        state: states.full,
                        relaxed: false,
                    }];
                }
                Unit::Loop {
                    units: inner,
                    trailing_relax,
                    relaxed,
                } => {
                    let entry: Vec<Source> = sources
                        .iter()
                        .map(|s| Source {
                            state: s.state,
                            relaxed: s.relaxed || *relaxed,
                        })
                        .collect();
                    let (exits, inner_first) = self.lower(inner, entry)?;
                    let (re_step, re_states) =
                        inner_first.expect("loop body has at least one step");
                    for exit in &exits {
                        self.emit_step(
                            re_step,
                            Source {
                                state: exit.state,
                                relaxed: exit.relaxed || *trailing_relax,
                            },
                            re_states,
                        )?;
                    }
                    if first.is_none() {
                        first = Some((re_step, re_states));
                    }
                    sources = exits
                        .iter()
                        .map(|s| Source {
                            state: s.state,
                            relaxed: s.relaxed || *trailing_relax,
                        })
                        .collect();
                }
            }
        }
        Ok((sources, first))
    }
}

/// Folds the leading actions into the initial slot values (strings
/// default to `''`, lists to `[]`).
fn initial_slots(
    slots: &[String],
    param_types: &[(String, AttrType)],
    leading: &[ActionStatement],
) -> Vec<Value> {
    let mut values: BTreeMap<&str, Value> = slots
        .iter()
        .map(|s| {
            let ty = param_types
                .iter()
                .find(|(p, _)| p == s)
                .map(|(_, t)| *t)
                .unwrap_or(AttrType::Str);
            let v = match ty {
                AttrType::StrList => Value::List(Vec::new()),
                _ => Value::str(""),
            };
            (s.as_str(), v)
        })
        .collect();
    for stmt in leading {
        match stmt {
            ActionStatement::Assign {
                target,
                source: AssignSource::Literal(s),
            } => {
                if let Some(slot) = values.get_mut(target.as_str()) {
                    *slot = Value::str(s.clone());
                }
            }
            ActionStatement::InitList { target } => {
                if let Some(slot) = values.get_mut(target.as_str()) {
                    *slot = Value::List(Vec::new());
                }
            }
            // Variable reads before any concept match are rejected at
            // parse time; appends need a bound source likewise.
            _ => {}
        }
    }
    slots.iter().map(|s| values[s.as_str()].clone()).collect()
}

/// Variables that cross element boundaries: concept-bound in one
/// element, read by an action in a later one. They become extra conf
/// slots next to the head parameters.
fn carried_vars(body: &[BodyElement]) -> Vec<String> {
    // Element here means one consuming step: actions directly after a
    // concept belong to it.
    #[derive(Default)]
    struct ElemInfo {
        binds: BTreeSet<String>,
        reads: BTreeSet<String>,
    }
    fn walk(elems: &[BodyElement], out: &mut Vec<ElemInfo>) {
        for e in elems {
            match e {
                BodyElement::Concept(c) => {
                    out.push(ElemInfo {
                        binds: c.vars.iter().cloned().collect(),
                        reads: BTreeSet::new(),
                    });
                }
                BodyElement::Contains { outer, inner } => {
                    out.push(ElemInfo {
                        binds: outer
                            .vars
                            .iter()
                            .chain(inner.vars.iter())
                            .cloned()
                            .collect(),
                        reads: BTreeSet::new(),
                    });
                }
                BodyElement::Action(stmts) => {
                    let mut reads = BTreeSet::new();
                    for stmt in stmts {
                        match stmt {
                            ActionStatement::Assign {
                                source: AssignSource::Var(v),
                                ..
                            } => {
                                reads.insert(v.clone());
                            }
                            ActionStatement::Append { source, .. } => {
                                reads.insert(source.clone());
                            }
                            _ => {}
                        }
                    }
                    match out.last_mut() {
                        Some(info) => info.reads.extend(reads),
                        None => out.push(ElemInfo {
                            binds: BTreeSet::new(),
                            reads,
                        }),
                    }
                }
                BodyElement::Skip => {}
                BodyElement::Recurrence(es) | BodyElement::Group(es) => walk(es, out),
            }
        }
    }
    let mut infos = Vec::new();
    walk(body, &mut infos);
    let mut carried = Vec::new();
    for (i, info) in infos.iter().enumerate() {
        for read in &info.reads {
            if info.binds.contains(read) {
                continue;
            }
            let bound_earlier = infos[..i].iter().any(|p| p.binds.contains(read));
            if bound_earlier && !carried.contains(read) {
                carried.push(read.clone());
            }
        }
    }
    carried
}

/// Compiles one linked descriptor into its rule set.
pub fn compile_descriptor(
    linked: &LinkedDescriptor,
    taxonomy: &Taxonomy,
) -> Result<CompiledDescriptor, CompileError> {
    let d = &linked.descriptor;
    let mut level = LevelBuilder {
        units: Vec::new(),
        pending_relax: false,
        leading_actions: Vec::new(),
        allow_leading: true,
    };
    collect_units(&d.name, &d.body, &mut level)?;
    if level.units.is_empty() {
        return Err(CompileError::EmptyPattern(d.name.clone()));
    }

    let mut slots: Vec<String> = d.params.clone();
    for v in carried_vars(&d.body) {
        if !slots.contains(&v) {
            slots.push(v);
        }
    }

    let mut used_names: BTreeSet<String> = slots.iter().cloned().collect();
    used_names.insert("AutoGen".to_string());
    let mut fresh_global = |base: &str| {
        let mut name = base.to_string();
        while used_names.contains(&name) {
            name.push('_');
        }
        used_names.insert(name.clone());
        name
    };
    let ext = ExtentNames {
        xs: fresh_global("Xs"),
        ys: fresh_global("Ys"),
        xe: fresh_global("Xe"),
        ye: fresh_global("Ye"),
        cell: fresh_global("Cell"),
        ps: fresh_global("Ps"),
        pe: fresh_global("Pe"),
    };

    let mut compiler = Compiler {
        name: d.name.clone(),
        axis: d.axis,
        taxonomy,
        slots,
        used_names,
        ext,
        rules: Vec::new(),
        next_state: 0,
    };

    let entry = vec![Source {
        state: 0,
        relaxed: false,
    }];
    let (exits, _) = compiler.lower(&level.units, entry)?;
    debug_assert_eq!(exits.len(), 1);
    let final_state = exits[0].state;

    // init_conf fact.
    let init_values = initial_slots(&compiler.slots, &linked.param_types, &level.leading_actions);
    let mut init_args = vec![Term::int(0)];
    init_args.extend(init_values.into_iter().map(Term::Const));
    let init = Rule::fact(Atom::new(compiler.init_pred(), init_args));

    // aux rule: project the parameters (carried slots drop out) and
    // invent the object id.
    let aux_pred = format!("{AUX_PREFIX}{}", d.name);
    let param_vars: Vec<Term> = d.params.iter().map(Term::var).collect();
    let mut aux_head = vec![Term::var("AutoGen")];
    aux_head.extend(param_vars.clone());
    aux_head.extend(compiler.extent_vars());
    let mut conf_args = vec![Term::int(final_state as i64)];
    conf_args.extend(compiler.slot_vars());
    conf_args.extend(compiler.extent_vars());
    compiler.rules.push(
        Rule::new(
            Atom::new(aux_pred.clone(), aux_head.clone()),
            vec![Atom::new(compiler.conf_pred(), conf_args)],
        )
        .with_builtins(vec![Builtin::NewId {
            out: "AutoGen".into(),
        }]),
    );

    // Object creation and position rules.
    let aux_body = vec![Atom::new(aux_pred, aux_head)];
    let mut creation_head = vec![Term::var("AutoGen")];
    creation_head.extend(param_vars);
    let mut creation = Rule::new(Atom::new(d.name.clone(), creation_head), aux_body.clone());
    creation.typed_head = true;
    compiler.rules.push(creation);
    match d.axis {
        Axis::OneDim => {
            compiler.rules.push(Rule::new(
                Atom::new(
                    PRED_ONE_POSITION,
                    vec![
                        Term::var("AutoGen"),
                        Term::var(&compiler.ext.ps),
                        Term::var(&compiler.ext.pe),
                    ],
                ),
                aux_body.clone(),
            ));
            compiler.rules.push(Rule::new(
                Atom::new(
                    PRED_BELONGS_TO,
                    vec![Term::var("AutoGen"), Term::var(&compiler.ext.cell)],
                ),
                aux_body,
            ));
        }
        _ => {
            compiler.rules.push(Rule::new(
                Atom::new(
                    PRED_BI_POSITION,
                    vec![
                        Term::var("AutoGen"),
                        Term::var(&compiler.ext.xs),
                        Term::var(&compiler.ext.ys),
                        Term::var(&compiler.ext.xe),
                        Term::var(&compiler.ext.ye),
                    ],
                ),
                aux_body,
            ));
        }
    }

    Ok(CompiledDescriptor {
        name: d.name.clone(),
        axis: d.axis,
        param_types: linked.param_types.clone(),
        init,
        rules: compiler.rules,
        state_count: final_state,
    })
}
