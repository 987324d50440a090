//! The per-document fact base: typed object instances plus the three
//! position relations (`bi_position`, `one_position`, `belongs_to`)
//! that locate them on the document grid.
//!
//! All coordinates are half-open: a 2D object occupies
//! `[xstart,xend) x [ystart,yend)` grid units and a 1D object occupies
//! `[start,end)` normalized character units inside its cell, so
//! adjacency is exactly `next.start == prev.end`.

use std::collections::HashMap;
use std::fmt;

use indexmap::IndexMap;
use thiserror::Error;

use super::{AttrType, Dim, ModelError, Taxonomy};
use crate::datalog::FactSet;
use crate::value::Value;

pub const PRED_BI_POSITION: &str = "bi_position";
pub const PRED_ONE_POSITION: &str = "one_position";
pub const PRED_BELONGS_TO: &str = "belongs_to";

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ObjectId(pub String);

impl ObjectId {
    pub fn new(s: impl Into<String>) -> ObjectId {
        ObjectId(s.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ObjectId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BiPos {
    pub xstart: i64,
    pub ystart: i64,
    pub xend: i64,
    pub yend: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct OnePos {
    pub start: i64,
    pub end: i64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Position {
    Bi(BiPos),
    One { pos: OnePos, cell: ObjectId },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObjectInstance {
    pub id: ObjectId,
    pub type_name: String,
    pub attrs: HashMap<String, Value>,
}

impl ObjectInstance {
    pub fn new(id: impl Into<String>, type_name: impl Into<String>) -> ObjectInstance {
        ObjectInstance {
            id: ObjectId::new(id),
            type_name: type_name.into(),
            attrs: HashMap::new(),
        }
    }

    pub fn with_attr(mut self, name: impl Into<String>, value: impl Into<Value>) -> Self {
        self.attrs.insert(name.into(), value.into());
        self
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FactError {
    #[error("duplicate object id `{0}`")]
    DuplicateId(String),
    #[error("object `{id}`: {source}")]
    Model {
        id: String,
        #[source]
        source: ModelError,
    },
    #[error("object `{id}` of type `{ty}` asserted with a {got} position but is {expected}")]
    DimensionMismatch {
        id: String,
        ty: String,
        got: &'static str,
        expected: &'static str,
    },
    #[error("object `{id}`: missing attribute `{attr}`")]
    MissingAttribute { id: String, attr: String },
    #[error("object `{id}`: attribute `{attr}` expects {expected}, got {got}")]
    AttributeType {
        id: String,
        attr: String,
        expected: AttrType,
        got: &'static str,
    },
    #[error("object `{id}`: unknown attribute `{attr}`")]
    UnknownAttribute { id: String, attr: String },
    #[error("object `{id}`: invalid position ({msg})")]
    InvalidPosition { id: String, msg: String },
    #[error("object `{id}`: belongs_to target `{cell}` is not a known 2D object")]
    UnknownCell { id: String, cell: String },
}

/// Objects and positions extracted from one document.
#[derive(Debug, Clone, Default)]
pub struct FactBase {
    objects: IndexMap<ObjectId, ObjectInstance>,
    bi_positions: HashMap<ObjectId, BiPos>,
    one_positions: HashMap<ObjectId, OnePos>,
    belongs_to: HashMap<ObjectId, ObjectId>,
}

impl FactBase {
    pub fn new() -> FactBase {
        FactBase::default()
    }

    pub fn len(&self) -> usize {
        self.objects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objects.is_empty()
    }

    pub fn object(&self, id: &ObjectId) -> Option<&ObjectInstance> {
        self.objects.get(id)
    }

    pub fn objects(&self) -> impl Iterator<Item = &ObjectInstance> {
        self.objects.values()
    }

    pub fn bi_position(&self, id: &ObjectId) -> Option<&BiPos> {
        self.bi_positions.get(id)
    }

    pub fn one_position(&self, id: &ObjectId) -> Option<&OnePos> {
        self.one_positions.get(id)
    }

    pub fn cell_of(&self, id: &ObjectId) -> Option<&ObjectId> {
        self.belongs_to.get(id)
    }

    /// Validates `obj` against the taxonomy and records it together
    /// with its position. 1D objects must name an already-asserted 2D
    /// object as their cell.
    pub fn assert_object(
        &mut self,
        taxonomy: &Taxonomy,
        obj: ObjectInstance,
        pos: Position,
    ) -> Result<(), FactError> {
        let id = obj.id.clone();
        if self.objects.contains_key(&id) {
            return Err(FactError::DuplicateId(id.0));
        }
        let wrap = |source| FactError::Model {
            id: id.0.clone(),
            source,
        };
        let declared = taxonomy.all_attributes(&obj.type_name).map_err(wrap)?;
        for (attr, ty) in &declared {
            match obj.attrs.get(attr) {
                None => {
                    return Err(FactError::MissingAttribute {
                        id: id.0,
                        attr: attr.clone(),
                    })
                }
                Some(v) => {
                    let ok = matches!(
                        (ty, v),
                        (AttrType::Str, Value::Str(_))
                            | (AttrType::Int, Value::Int(_))
                            | (AttrType::StrList, Value::List(_))
                    );
                    if !ok {
                        return Err(FactError::AttributeType {
                            id: id.0,
                            attr: attr.clone(),
                            expected: *ty,
                            got: v.type_name(),
                        });
                    }
                }
            }
        }
        for attr in obj.attrs.keys() {
            if !declared.iter().any(|(n, _)| n == attr) {
                return Err(FactError::UnknownAttribute {
                    id: id.0,
                    attr: attr.clone(),
                });
            }
        }

        let dim = taxonomy.dim_of(&obj.type_name).map_err(wrap)?;
        match (&pos, dim) {
            (Position::Bi(_), Some(Dim::One)) => {
                return Err(FactError::DimensionMismatch {
                    id: id.0,
                    ty: obj.type_name,
                    got: "2D",
                    expected: "one-dimensional",
                })
            }
            (Position::One { .. }, Some(Dim::Two)) => {
                return Err(FactError::DimensionMismatch {
                    id: id.0,
                    ty: obj.type_name,
                    got: "1D",
                    expected: "two-dimensional",
                })
            }
            _ => {}
        }

        match pos {
            Position::Bi(p) => {
                if p.xstart < 0 || p.ystart < 0 || p.xstart >= p.xend || p.ystart >= p.yend {
                    return Err(FactError::InvalidPosition {
                        id: id.0,
                        msg: format!(
                            "bi_position({},{},{},{})",
                            p.xstart, p.ystart, p.xend, p.yend
                        ),
                    });
                }
                self.bi_positions.insert(id.clone(), p);
            }
            Position::One { pos: p, cell } => {
                if p.start < 0 || p.start >= p.end {
                    return Err(FactError::InvalidPosition {
                        id: id.0,
                        msg: format!("one_position({},{})", p.start, p.end),
                    });
                }
                if !self.bi_positions.contains_key(&cell) {
                    return Err(FactError::UnknownCell {
                        id: id.0,
                        cell: cell.0,
                    });
                }
                self.one_positions.insert(id.clone(), p);
                self.belongs_to.insert(id.clone(), cell);
            }
        }
        self.objects.insert(id, obj);
        Ok(())
    }

    /// Renders the fact base as ground Datalog facts. Each object
    /// yields one fact per type in its ancestor chain (the positional
    /// arguments of an ancestor fact are the matching attribute
    /// prefix), so a rule over `cell` sees filled and empty cells
    /// alike.
    pub fn to_facts(&self, taxonomy: &Taxonomy) -> FactSet {
        let mut facts = FactSet::new();
        for obj in self.objects.values() {
            self.object_facts(taxonomy, &obj.id, &mut facts);
        }
        facts
    }

    /// Appends one object's facts (type closure plus positions) to an
    /// existing set; lets callers keep a rendered set in step with the
    /// fact base instead of re-rendering everything.
    pub fn object_facts(&self, taxonomy: &Taxonomy, id: &ObjectId, facts: &mut FactSet) {
        let obj = &self.objects[id];
        let id_value = Value::str(obj.id.as_str());
        let attrs = taxonomy
            .all_attributes(&obj.type_name)
            .expect("asserted object has valid type");
        let values: Vec<Value> = attrs
            .iter()
            .map(|(name, _)| obj.attrs[name].clone())
            .collect();
        let mut chain = vec![obj.type_name.as_str()];
        chain.extend(taxonomy.ancestors(&obj.type_name).expect("valid type"));
        for ty in chain {
            let arity = taxonomy.all_attributes(ty).expect("valid type").len();
            let mut args = Vec::with_capacity(arity + 1);
            args.push(id_value.clone());
            args.extend(values[..arity].iter().cloned());
            facts.insert(ty, args);
        }
        if let Some(p) = self.bi_positions.get(&obj.id) {
            facts.insert(
                PRED_BI_POSITION,
                vec![
                    id_value.clone(),
                    Value::Int(p.xstart),
                    Value::Int(p.ystart),
                    Value::Int(p.xend),
                    Value::Int(p.yend),
                ],
            );
        }
        if let Some(p) = self.one_positions.get(&obj.id) {
            facts.insert(
                PRED_ONE_POSITION,
                vec![id_value.clone(), Value::Int(p.start), Value::Int(p.end)],
            );
        }
        if let Some(cell) = self.belongs_to.get(&obj.id) {
            facts.insert(
                PRED_BELONGS_TO,
                vec![id_value, Value::str(cell.as_str())],
            );
        }
    }

    /// Textual dump of the fact base, one object per line with its
    /// position facts, e.g.
    /// `c1:filledCell('anna@w3.org'). bi_position(c1,1,8,2,9).`
    pub fn render(&self, taxonomy: &Taxonomy) -> String {
        let mut out = String::new();
        for obj in self.objects.values() {
            let attrs = taxonomy
                .all_attributes(&obj.type_name)
                .expect("asserted object has valid type");
            let rendered: Vec<String> = attrs
                .iter()
                .map(|(name, _)| obj.attrs[name].to_string())
                .collect();
            out.push_str(&format!(
                "{}:{}({}).",
                obj.id,
                obj.type_name,
                rendered.join(",")
            ));
            if let Some(p) = self.bi_positions.get(&obj.id) {
                out.push_str(&format!(
                    " bi_position({},{},{},{},{}).",
                    obj.id, p.xstart, p.ystart, p.xend, p.yend
                ));
            }
            if let Some(p) = self.one_positions.get(&obj.id) {
                out.push_str(&format!(" one_position({},{},{}).", obj.id, p.start, p.end));
            }
            if let Some(cell) = self.belongs_to.get(&obj.id) {
                out.push_str(&format!(" belongs_to({},{}).", obj.id, cell));
            }
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ontology::{FILLED_CELL, TOKEN};

    fn filled_cell(id: &str, text: &str) -> ObjectInstance {
        ObjectInstance::new(id, FILLED_CELL).with_attr("value", text)
    }

    #[test]
    fn assert_cell_and_token() {
        let t = Taxonomy::new();
        let mut fb = FactBase::new();
        fb.assert_object(
            &t,
            filled_cell("filled19", "anna@w3.org"),
            Position::Bi(BiPos {
                xstart: 1,
                ystart: 8,
                xend: 2,
                yend: 9,
            }),
        )
        .unwrap();
        assert_eq!(fb.len(), 1);
        assert!(fb.bi_position(&ObjectId::new("filled19")).is_some());

        fb.assert_object(
            &t,
            ObjectInstance::new("tk0", TOKEN).with_attr("value", "anna@w3.org"),
            Position::One {
                pos: OnePos { start: 1, end: 12 },
                cell: ObjectId::new("filled19"),
            },
        )
        .unwrap();
        assert_eq!(
            fb.cell_of(&ObjectId::new("tk0")),
            Some(&ObjectId::new("filled19"))
        );
    }

    #[test]
    fn duplicate_id_rejected() {
        let t = Taxonomy::new();
        let mut fb = FactBase::new();
        let pos = Position::Bi(BiPos {
            xstart: 0,
            ystart: 0,
            xend: 1,
            yend: 1,
        });
        fb.assert_object(&t, filled_cell("c0", "x"), pos.clone())
            .unwrap();
        let err = fb
            .assert_object(
                &t,
                filled_cell("c0", "y"),
                Position::Bi(BiPos {
                    xstart: 5,
                    ystart: 5,
                    xend: 6,
                    yend: 6,
                }),
            )
            .unwrap_err();
        assert_eq!(err, FactError::DuplicateId("c0".into()));
        let _ = pos;
    }

    #[test]
    fn dimensionality_mismatch_rejected() {
        let t = Taxonomy::new();
        let mut fb = FactBase::new();
        let err = fb
            .assert_object(
                &t,
                ObjectInstance::new("tk0", TOKEN).with_attr("value", "x"),
                Position::Bi(BiPos {
                    xstart: 0,
                    ystart: 0,
                    xend: 1,
                    yend: 1,
                }),
            )
            .unwrap_err();
        assert!(matches!(err, FactError::DimensionMismatch { .. }));
    }

    #[test]
    fn degenerate_extent_rejected() {
        let t = Taxonomy::new();
        let mut fb = FactBase::new();
        let err = fb
            .assert_object(
                &t,
                filled_cell("c0", "x"),
                Position::Bi(BiPos {
                    xstart: 2,
                    ystart: 0,
                    xend: 2,
                    yend: 1,
                }),
            )
            .unwrap_err();
        assert!(matches!(err, FactError::InvalidPosition { .. }));
    }

    #[test]
    fn missing_attribute_rejected() {
        let t = Taxonomy::new();
        let mut fb = FactBase::new();
        let err = fb
            .assert_object(
                &t,
                ObjectInstance::new("c0", FILLED_CELL),
                Position::Bi(BiPos {
                    xstart: 0,
                    ystart: 0,
                    xend: 1,
                    yend: 1,
                }),
            )
            .unwrap_err();
        assert!(matches!(err, FactError::MissingAttribute { .. }));
    }

    #[test]
    fn one_dim_needs_known_cell() {
        let t = Taxonomy::new();
        let mut fb = FactBase::new();
        let err = fb
            .assert_object(
                &t,
                ObjectInstance::new("tk0", TOKEN).with_attr("value", "x"),
                Position::One {
                    pos: OnePos { start: 1, end: 2 },
                    cell: ObjectId::new("ghost"),
                },
            )
            .unwrap_err();
        assert!(matches!(err, FactError::UnknownCell { .. }));
    }

    #[test]
    fn edb_includes_ancestor_closure() {
        let t = Taxonomy::new();
        let mut fb = FactBase::new();
        fb.assert_object(
            &t,
            filled_cell("filled19", "anna@w3.org"),
            Position::Bi(BiPos {
                xstart: 1,
                ystart: 8,
                xend: 2,
                yend: 9,
            }),
        )
        .unwrap();
        let facts = fb.to_facts(&t);
        let id = Value::str("filled19");
        assert!(facts.contains(FILLED_CELL, &[id.clone(), Value::str("anna@w3.org")]));
        assert!(facts.contains("cell", &[id.clone()]));
        assert!(facts.contains("biDimObject", &[id.clone()]));
        assert!(facts.contains(
            PRED_BI_POSITION,
            &[
                id,
                Value::Int(1),
                Value::Int(8),
                Value::Int(2),
                Value::Int(9)
            ]
        ));
    }

    #[test]
    fn render_matches_listing_style() {
        let t = Taxonomy::new();
        let mut fb = FactBase::new();
        fb.assert_object(
            &t,
            filled_cell("filled19", "anna@w3.org"),
            Position::Bi(BiPos {
                xstart: 1,
                ystart: 8,
                xend: 2,
                yend: 9,
            }),
        )
        .unwrap();
        assert_eq!(
            fb.render(&t),
            "filled19:filledCell('anna@w3.org'). bi_position(filled19,1,8,2,9).\n"
        );
    }
}
