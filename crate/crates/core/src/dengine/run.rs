//! Executes compiled descriptors over a document fact base in plan
//! order: evaluate the rules, read back the accepting `aux_*` facts,
//! canonicalize, and assert the head objects so later descriptors can
//! match them.

use thiserror::Error;

use super::{canonicalize, CompiledDescriptor, Match, MatchExtent};
use crate::datalog::{evaluate, new_id, EvalError, FactSet};
use crate::dscript::Axis;
use crate::ontology::{
    BiPos, FactBase, FactError, ObjectId, ObjectInstance, OnePos, Position, Taxonomy,
};
use crate::value::Value;

#[derive(Debug, Error)]
pub enum RunError {
    #[error("descriptor `{0}`: {1}")]
    Eval(String, #[source] EvalError),
    #[error(transparent)]
    Fact(#[from] FactError),
    #[error("descriptor `{0}`: malformed aux fact")]
    MalformedAux(String),
}

/// Reads the accepting-state facts of one compiled descriptor out of
/// an evaluation result.
pub fn matches_from_aux(
    compiled: &CompiledDescriptor,
    facts: &FactSet,
) -> Result<Vec<Match>, RunError> {
    let nparams = compiled.param_types.len();
    let mut out = Vec::new();
    for tuple in facts.tuples(&compiled.aux_pred()) {
        let bad = || RunError::MalformedAux(compiled.name.clone());
        let extent = match compiled.axis {
            Axis::OneDim => {
                if tuple.len() != 1 + nparams + 3 {
                    return Err(bad());
                }
                let cell = tuple[1 + nparams].as_str().ok_or_else(bad)?;
                MatchExtent::One {
                    cell: ObjectId::new(cell),
                    start: tuple[2 + nparams].as_int().ok_or_else(bad)?,
                    end: tuple[3 + nparams].as_int().ok_or_else(bad)?,
                }
            }
            _ => {
                if tuple.len() != 1 + nparams + 4 {
                    return Err(bad());
                }
                let mut ints = [0i64; 4];
                for (i, slot) in ints.iter_mut().enumerate() {
                    *slot = tuple[1 + nparams + i].as_int().ok_or_else(bad)?;
                }
                MatchExtent::Bi(BiPos {
                    xstart: ints[0],
                    ystart: ints[1],
                    xend: ints[2],
                    yend: ints[3],
                })
            }
        };
        out.push(Match {
            extent,
            attrs: tuple[1..1 + nparams].to_vec(),
        });
    }
    Ok(out)
}

/// The id the engine invented for this match (stable across runs).
pub fn match_object_id(compiled: &CompiledDescriptor, m: &Match) -> String {
    let mut key: Vec<Value> = m.attrs.clone();
    match &m.extent {
        MatchExtent::Bi(p) => {
            key.extend([
                Value::Int(p.xstart),
                Value::Int(p.ystart),
                Value::Int(p.xend),
                Value::Int(p.yend),
            ]);
        }
        MatchExtent::One { cell, start, end } => {
            key.push(Value::str(cell.as_str()));
            key.extend([Value::Int(*start), Value::Int(*end)]);
        }
    }
    new_id(&compiled.name, &key)
}

/// Asserts the canonical matches of one compiled descriptor; returns
/// the ids of the created objects.
pub fn assert_matches(
    compiled: &CompiledDescriptor,
    matches: Vec<Match>,
    taxonomy: &Taxonomy,
    fb: &mut FactBase,
) -> Result<Vec<ObjectId>, RunError> {
    let mut created = Vec::with_capacity(matches.len());
    for m in matches {
        let id = match_object_id(compiled, &m);
        created.push(ObjectId::new(id.clone()));
        let mut obj = ObjectInstance::new(id, compiled.name.clone());
        for ((param, _), value) in compiled.param_types.iter().zip(&m.attrs) {
            obj.attrs.insert(param.clone(), value.clone());
        }
        let pos = match m.extent {
            MatchExtent::Bi(p) => Position::Bi(p),
            MatchExtent::One { cell, start, end } => Position::One {
                pos: OnePos { start, end },
                cell,
            },
        };
        fb.assert_object(taxonomy, obj, pos)?;
    }
    Ok(created)
}

/// Runs every compiled descriptor in plan order over the fact base.
/// Returns the number of objects created. The rendered fact set is
/// kept in step with the fact base so each descriptor sees its
/// predecessors' heads without a full re-render.
pub fn run_descriptors(
    plan: &[CompiledDescriptor],
    taxonomy: &Taxonomy,
    fb: &mut FactBase,
) -> Result<usize, RunError> {
    let mut created = 0;
    let mut edb = fb.to_facts(taxonomy);
    for compiled in plan {
        let result = evaluate(&compiled.program(), &edb)
            .map_err(|e| RunError::Eval(compiled.name.clone(), e))?;
        let raw = matches_from_aux(compiled, &result)?;
        let matches = canonicalize(raw, compiled.axis, &compiled.param_types);
        for id in assert_matches(compiled, matches, taxonomy, fb)? {
            fb.object_facts(taxonomy, &id, &mut edb);
            created += 1;
        }
    }
    Ok(created)
}
