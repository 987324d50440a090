//! Linking: resolves every concept a descriptor mentions (taxonomy
//! type or another descriptor's head), orders descriptors so
//! dependencies evaluate first, and registers each head as a new
//! entity type — 2D for the `::-`/`::|` axes, 1D for `::`, with one
//! string or list attribute per head parameter.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use super::{
    ActionStatement, AssignSource, Axis, BodyElement, ConceptMatch, Descriptor,
};
use crate::ontology::{AttrType, Dim, EntityType, ModelError, Taxonomy};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LinkError {
    #[error("descriptor `{descriptor}` references unknown concept `{concept}`")]
    UnknownConcept {
        descriptor: String,
        concept: String,
    },
    #[error("cyclic descriptor dependencies: {0}")]
    Cycle(String),
    #[error("descriptor `{0}` defined twice")]
    DuplicateDescriptor(String),
    #[error(
        "descriptor `{descriptor}`: `{concept}` has {arity} attribute(s) but is matched with \
         {vars} variable(s)"
    )]
    ArityMismatch {
        descriptor: String,
        concept: String,
        arity: usize,
        vars: usize,
    },
    #[error(
        "descriptor `{descriptor}`: `{concept}` is {actual} but is used where a {expected} \
         object is required"
    )]
    DimMismatch {
        descriptor: String,
        concept: String,
        expected: &'static str,
        actual: &'static str,
    },
    #[error("descriptor `{descriptor}`: head parameter `{param}` would hold an int")]
    IntParam { descriptor: String, param: String },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// A descriptor whose concepts all resolve, with the inferred type of
/// each head parameter.
#[derive(Debug, Clone)]
pub struct LinkedDescriptor {
    pub descriptor: Descriptor,
    pub param_types: Vec<(String, AttrType)>,
}

/// Descriptors in evaluation order; heads are registered in the
/// taxonomy passed to [`link_descriptors`].
#[derive(Debug, Clone, Default)]
pub struct Plan {
    pub descriptors: Vec<LinkedDescriptor>,
}

fn check_concept_dims(
    d: &Descriptor,
    taxonomy: &Taxonomy,
    elems: &[BodyElement],
) -> Result<(), LinkError> {
    let dim_name = |dim: Dim| match dim {
        Dim::One => "one-dimensional",
        Dim::Two => "two-dimensional",
    };
    let check = |c: &ConceptMatch, expected: Dim| -> Result<(), LinkError> {
        match taxonomy.dim_of(&c.type_name) {
            Ok(Some(actual)) if actual != expected => Err(LinkError::DimMismatch {
                descriptor: d.name.clone(),
                concept: c.type_name.clone(),
                expected: dim_name(expected),
                actual: dim_name(actual),
            }),
            _ => Ok(()),
        }
    };
    for e in elems {
        match e {
            BodyElement::Concept(c) => {
                let expected = match d.axis {
                    Axis::OneDim => Dim::One,
                    _ => Dim::Two,
                };
                check(c, expected)?;
            }
            BodyElement::Contains { outer, inner } => {
                check(outer, Dim::Two)?;
                check(inner, Dim::One)?;
            }
            BodyElement::Recurrence(es) | BodyElement::Group(es) => {
                check_concept_dims(d, taxonomy, es)?
            }
            BodyElement::Action(_) | BodyElement::Skip => {}
        }
    }
    Ok(())
}

/// Walks the body inferring variable types from concept bindings and
/// action statements, and returns each parameter's attribute type.
fn infer_param_types(
    d: &Descriptor,
    taxonomy: &Taxonomy,
) -> Result<Vec<(String, AttrType)>, LinkError> {
    let mut var_types: BTreeMap<String, AttrType> = BTreeMap::new();
    fn bind_concept(
        d: &Descriptor,
        c: &ConceptMatch,
        taxonomy: &Taxonomy,
        var_types: &mut BTreeMap<String, AttrType>,
    ) -> Result<(), LinkError> {
        let attrs = taxonomy
            .all_attributes(&c.type_name)
            .map_err(|_| LinkError::UnknownConcept {
                descriptor: d.name.clone(),
                concept: c.type_name.clone(),
            })?;
        if c.vars.len() > attrs.len() {
            return Err(LinkError::ArityMismatch {
                descriptor: d.name.clone(),
                concept: c.type_name.clone(),
                arity: attrs.len(),
                vars: c.vars.len(),
            });
        }
        for (var, (_, ty)) in c.vars.iter().zip(&attrs) {
            var_types.insert(var.clone(), *ty);
        }
        Ok(())
    }
    fn walk(
        d: &Descriptor,
        elems: &[BodyElement],
        taxonomy: &Taxonomy,
        var_types: &mut BTreeMap<String, AttrType>,
    ) -> Result<(), LinkError> {
        for e in elems {
            match e {
                BodyElement::Concept(c) => bind_concept(d, c, taxonomy, var_types)?,
                BodyElement::Contains { outer, inner } => {
                    bind_concept(d, outer, taxonomy, var_types)?;
                    bind_concept(d, inner, taxonomy, var_types)?;
                }
                BodyElement::Action(stmts) => {
                    for stmt in stmts {
                        match stmt {
                            ActionStatement::Assign { target, source } => {
                                let ty = match source {
                                    AssignSource::Var(v) => {
                                        *var_types.get(v).unwrap_or(&AttrType::Str)
                                    }
                                    AssignSource::Literal(_) => AttrType::Str,
                                };
                                var_types.insert(target.clone(), ty);
                            }
                            ActionStatement::InitList { target }
                            | ActionStatement::Append { target, .. } => {
                                var_types.insert(target.clone(), AttrType::StrList);
                            }
                        }
                    }
                }
                BodyElement::Skip => {}
                BodyElement::Recurrence(es) | BodyElement::Group(es) => {
                    walk(d, es, taxonomy, var_types)?
                }
            }
        }
        Ok(())
    }
    walk(d, &d.body, taxonomy, &mut var_types)?;
    let mut out = Vec::new();
    for p in &d.params {
        let ty = *var_types.get(p).unwrap_or(&AttrType::Str);
        if ty == AttrType::Int {
            return Err(LinkError::IntParam {
                descriptor: d.name.clone(),
                param: p.clone(),
            });
        }
        out.push((p.clone(), ty));
    }
    Ok(out)
}

/// Builds the evaluation plan. Dependencies between descriptors form a
/// DAG (cycles are rejected); independent descriptors are ordered by
/// name so the plan is deterministic. Registered heads become part of
/// `taxonomy`.
pub fn link_descriptors(
    descriptors: Vec<Descriptor>,
    taxonomy: &mut Taxonomy,
) -> Result<Plan, LinkError> {
    let mut by_name: BTreeMap<String, Descriptor> = BTreeMap::new();
    for d in descriptors {
        if by_name.contains_key(&d.name) || taxonomy.has_entity(&d.name) {
            return Err(LinkError::DuplicateDescriptor(d.name));
        }
        by_name.insert(d.name.clone(), d);
    }

    // Resolve references and collect head-to-head dependency edges.
    let mut deps: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for (name, d) in &by_name {
        let mut set = BTreeSet::new();
        for concept in d.referenced_concepts() {
            if by_name.contains_key(concept) {
                set.insert(&*by_name[concept].name);
            } else if !taxonomy.has_entity(concept) {
                return Err(LinkError::UnknownConcept {
                    descriptor: d.name.clone(),
                    concept: concept.to_string(),
                });
            }
        }
        deps.insert(name, set);
    }

    // Kahn's algorithm over the name-sorted map.
    let mut order: Vec<&str> = Vec::new();
    let mut remaining: BTreeMap<&str, BTreeSet<&str>> = deps;
    while !remaining.is_empty() {
        let ready: Vec<&str> = remaining
            .iter()
            .filter(|(_, ds)| ds.iter().all(|d| order.contains(d)))
            .map(|(n, _)| *n)
            .collect();
        if ready.is_empty() {
            let cycle: Vec<&str> = remaining.keys().copied().collect();
            return Err(LinkError::Cycle(cycle.join(" -> ")));
        }
        for n in ready {
            remaining.remove(n);
            order.push(n);
        }
    }

    let mut plan = Plan::default();
    for name in order {
        let d = by_name[name].clone();
        check_concept_dims(&d, taxonomy, &d.body)?;
        let param_types = infer_param_types(&d, taxonomy)?;
        let dim = match d.axis {
            Axis::OneDim => Dim::One,
            _ => Dim::Two,
        };
        taxonomy.add_entity(EntityType {
            name: d.name.clone(),
            parent: None,
            attributes: param_types.clone(),
            declared_dim: Some(dim),
        })?;
        plan.descriptors.push(LinkedDescriptor {
            descriptor: d,
            param_types,
        });
    }
    Ok(plan)
}
