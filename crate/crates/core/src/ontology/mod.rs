//! The object model: a forest-shaped entity taxonomy with typed
//! attributes, relation declarations, and the per-document fact base
//! that every pipeline stage reads and extends.
//!
//! A small set of entity types describing the document itself (tokens,
//! delimiters, cells) is always present and never needs declaring;
//! projects add semantic categories, domain labels, and whatever else
//! their descriptors produce.

mod factbase;
mod model;

pub use factbase::{
    BiPos, FactBase, FactError, ObjectId, ObjectInstance, OnePos, Position, PRED_BELONGS_TO,
    PRED_BI_POSITION, PRED_ONE_POSITION,
};
pub use model::load_object_model;

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

pub const ROOT_OBJECT: &str = "ontologyObject";
pub const ONE_DIM_OBJECT: &str = "oneDimObject";
pub const BI_DIM_OBJECT: &str = "biDimObject";
pub const SEMANTIC_CATEGORY: &str = "semanticCategory";
pub const TOKEN: &str = "token";
pub const DELIMITER: &str = "delimiter";
pub const START_OF_LINE: &str = "startOfLine";
pub const END_OF_LINE: &str = "endOfLine";
pub const CELL: &str = "cell";
pub const EMPTY_CELL: &str = "emptyCell";
pub const FILLED_CELL: &str = "filledCell";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AttrType {
    Str,
    Int,
    StrList,
}

impl AttrType {
    pub fn parse(s: &str) -> Option<AttrType> {
        match s {
            "string" => Some(AttrType::Str),
            "int" => Some(AttrType::Int),
            "list_of_string" => Some(AttrType::StrList),
            _ => None,
        }
    }
}

impl fmt::Display for AttrType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            AttrType::Str => "string",
            AttrType::Int => "int",
            AttrType::StrList => "list_of_string",
        };
        write!(f, "{s}")
    }
}

/// Whether instances of a type carry a 2D grid position or a 1D
/// in-cell position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Dim {
    One,
    Two,
}

#[derive(Debug, Clone)]
pub struct EntityType {
    pub name: String,
    pub parent: Option<String>,
    /// Attributes declared on this type itself (inherited ones live on
    /// the ancestors).
    pub attributes: Vec<(String, AttrType)>,
    /// Set for descriptor-registered head types, whose dimensionality
    /// comes from the descriptor axis rather than the taxonomy.
    pub declared_dim: Option<Dim>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamType {
    Entity,
    Int,
    Str,
}

#[derive(Debug, Clone)]
pub struct RelationType {
    pub name: String,
    pub params: Vec<(String, String, ParamType)>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ModelError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("duplicate name `{0}`")]
    DuplicateName(String),
    #[error("unknown parent `{parent}` for entity `{entity}`")]
    UnknownParent { entity: String, parent: String },
    #[error("cycle through entity `{0}`")]
    Cycle(String),
    #[error("entity `{entity}` redeclares inherited attribute `{attr}`")]
    AttributeRedeclaration { entity: String, attr: String },
    #[error("unknown attribute type `{0}`")]
    UnknownAttrType(String),
    #[error("relation `{relation}` references unknown type `{param}`")]
    UnknownParamType { relation: String, param: String },
    #[error("unknown type name `{0}`")]
    UnknownType(String),
}

/// The validated object model. Immutable once a project finishes
/// loading (descriptor linking registers head types, then the taxonomy
/// is shared read-only across documents).
#[derive(Debug, Clone)]
pub struct Taxonomy {
    entities: BTreeMap<String, EntityType>,
    relations: BTreeMap<String, RelationType>,
}

impl Default for Taxonomy {
    fn default() -> Self {
        Self::new()
    }
}

impl Taxonomy {
    /// A taxonomy holding only the built-in document entities.
    pub fn new() -> Taxonomy {
        let mut t = Taxonomy {
            entities: BTreeMap::new(),
            relations: BTreeMap::new(),
        };
        let builtin = |name: &str, parent: Option<&str>, attrs: Vec<(&str, AttrType)>| EntityType {
            name: name.to_string(),
            parent: parent.map(|p| p.to_string()),
            attributes: attrs
                .into_iter()
                .map(|(n, ty)| (n.to_string(), ty))
                .collect(),
            declared_dim: None,
        };
        for e in [
            builtin(ROOT_OBJECT, None, vec![]),
            builtin(ONE_DIM_OBJECT, Some(ROOT_OBJECT), vec![]),
            builtin(TOKEN, Some(ONE_DIM_OBJECT), vec![("value", AttrType::Str)]),
            builtin(DELIMITER, Some(ONE_DIM_OBJECT), vec![]),
            builtin(START_OF_LINE, Some(DELIMITER), vec![]),
            builtin(END_OF_LINE, Some(DELIMITER), vec![]),
            builtin(BI_DIM_OBJECT, Some(ROOT_OBJECT), vec![]),
            builtin(CELL, Some(BI_DIM_OBJECT), vec![]),
            builtin(EMPTY_CELL, Some(CELL), vec![]),
            builtin(FILLED_CELL, Some(CELL), vec![("value", AttrType::Str)]),
        ] {
            t.entities.insert(e.name.clone(), e);
        }
        t
    }

    pub fn entity(&self, name: &str) -> Option<&EntityType> {
        self.entities.get(name)
    }

    pub fn has_entity(&self, name: &str) -> bool {
        self.entities.contains_key(name)
    }

    pub fn relation(&self, name: &str) -> Option<&RelationType> {
        self.relations.get(name)
    }

    pub fn entity_count(&self) -> usize {
        self.entities.len()
    }

    pub fn relation_count(&self) -> usize {
        self.relations.len()
    }

    pub fn entity_names(&self) -> impl Iterator<Item = &str> {
        self.entities.keys().map(|s| s.as_str())
    }

    /// Registers a new entity type, validating parent links, name
    /// uniqueness, and attribute inheritance.
    pub fn add_entity(&mut self, entity: EntityType) -> Result<(), ModelError> {
        if self.entities.contains_key(&entity.name) {
            return Err(ModelError::DuplicateName(entity.name));
        }
        if let Some(parent) = &entity.parent {
            if !self.entities.contains_key(parent) {
                return Err(ModelError::UnknownParent {
                    entity: entity.name,
                    parent: parent.clone(),
                });
            }
            // Parents must already exist, so links always point at
            // previously validated entities and cannot close a cycle;
            // the ancestor walk is still guarded in ancestors().
            let inherited = self.all_attributes(parent)?;
            for (attr, _) in &entity.attributes {
                if inherited.iter().any(|(a, _)| a == attr) {
                    return Err(ModelError::AttributeRedeclaration {
                        entity: entity.name,
                        attr: attr.clone(),
                    });
                }
            }
        }
        self.entities.insert(entity.name.clone(), entity);
        Ok(())
    }

    pub fn add_relation(&mut self, relation: RelationType) -> Result<(), ModelError> {
        if self.relations.contains_key(&relation.name) {
            return Err(ModelError::DuplicateName(relation.name));
        }
        for (_, ty, kind) in &relation.params {
            if *kind == ParamType::Entity && !self.entities.contains_key(ty) {
                return Err(ModelError::UnknownParamType {
                    relation: relation.name.clone(),
                    param: ty.clone(),
                });
            }
        }
        self.relations.insert(relation.name.clone(), relation);
        Ok(())
    }

    /// Ancestor chain of `name`, nearest first, excluding `name`.
    pub fn ancestors(&self, name: &str) -> Result<Vec<&str>, ModelError> {
        let mut out = Vec::new();
        let mut cur = self
            .entities
            .get(name)
            .ok_or_else(|| ModelError::UnknownType(name.to_string()))?;
        while let Some(parent) = &cur.parent {
            if out.contains(&parent.as_str()) || parent == name {
                return Err(ModelError::Cycle(parent.clone()));
            }
            out.push(parent.as_str());
            cur = self
                .entities
                .get(parent)
                .ok_or_else(|| ModelError::UnknownType(parent.clone()))?;
        }
        Ok(out)
    }

    /// True iff `a` equals `b` or `b` is an ancestor of `a`.
    pub fn subtype_of(&self, a: &str, b: &str) -> Result<bool, ModelError> {
        if !self.entities.contains_key(b) {
            return Err(ModelError::UnknownType(b.to_string()));
        }
        if a == b {
            return Ok(true);
        }
        Ok(self.ancestors(a)?.contains(&b))
    }

    /// Full attribute list of a type: ancestor attributes first (root
    /// downward), own attributes last. This order is what positional
    /// fact arguments use, so an ancestor's attribute list is always a
    /// prefix of a descendant's.
    pub fn all_attributes(&self, name: &str) -> Result<Vec<(String, AttrType)>, ModelError> {
        let mut chain = self.ancestors(name)?;
        chain.reverse();
        chain.push(name);
        let mut out = Vec::new();
        for ty in chain {
            out.extend(self.entities[ty].attributes.iter().cloned());
        }
        Ok(out)
    }

    /// Dimensionality of a type, when it can be determined: descendants
    /// of `oneDimObject` and `semanticCategory` are one-dimensional,
    /// descendants of `biDimObject` two-dimensional, descriptor heads
    /// carry an explicit dimension, and anything else (e.g. bare
    /// domain-label types) is decided by how instances get asserted.
    pub fn dim_of(&self, name: &str) -> Result<Option<Dim>, ModelError> {
        let entity = self
            .entities
            .get(name)
            .ok_or_else(|| ModelError::UnknownType(name.to_string()))?;
        if let Some(d) = entity.declared_dim {
            return Ok(Some(d));
        }
        let mut chain = vec![name];
        chain.extend(self.ancestors(name)?);
        for ty in chain {
            if ty == ONE_DIM_OBJECT {
                return Ok(Some(Dim::One));
            }
            if ty == BI_DIM_OBJECT {
                return Ok(Some(Dim::Two));
            }
            if ty == SEMANTIC_CATEGORY {
                return Ok(Some(Dim::One));
            }
        }
        Ok(None)
    }
}
