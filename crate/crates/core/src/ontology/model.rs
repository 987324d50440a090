//! Parser for the object-model declaration file.
//!
//! The file is line-oriented; `#` starts a comment line. Declarations
//! end with a period and take the forms
//!
//! ```text
//! entity NAME.
//! entity NAME isa PARENT.
//! entity NAME(attr:type, ...).
//! entity NAME isa PARENT(attr:type, ...).
//! relation NAME(param:type, ...).
//! ```
//!
//! Attribute types are `string`, `int`, or `list_of_string`; relation
//! parameter types may also name a declared entity.

use super::{AttrType, EntityType, ModelError, ParamType, RelationType, Taxonomy};

/// Parses and validates an object-model source, returning a taxonomy
/// that already contains the built-in document entities.
pub fn load_object_model(source: &str) -> Result<Taxonomy, ModelError> {
    let mut taxonomy = Taxonomy::new();
    for (idx, raw_line) in source.lines().enumerate() {
        let line = raw_line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let lineno = idx + 1;
        let stmt = line.strip_suffix('.').ok_or_else(|| ModelError::Syntax {
            line: lineno,
            msg: "declaration must end with '.'".into(),
        })?;
        if let Some(rest) = stmt.strip_prefix("entity ") {
            let entity = parse_entity(rest.trim(), lineno)?;
            taxonomy.add_entity(entity)?;
        } else if let Some(rest) = stmt.strip_prefix("relation ") {
            let relation = parse_relation(rest.trim(), lineno, &taxonomy)?;
            taxonomy.add_relation(relation)?;
        } else {
            return Err(ModelError::Syntax {
                line: lineno,
                msg: format!("expected `entity` or `relation`, got `{line}`"),
            });
        }
    }
    Ok(taxonomy)
}

fn is_ident(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_alphanumeric() || c == '_')
}

fn parse_entity(text: &str, line: usize) -> Result<EntityType, ModelError> {
    // Split off a trailing attribute list, if any.
    let (head, attrs) = match text.find('(') {
        Some(open) => {
            let close = text.rfind(')').ok_or_else(|| ModelError::Syntax {
                line,
                msg: "unclosed attribute list".into(),
            })?;
            if close != text.len() - 1 || close < open {
                return Err(ModelError::Syntax {
                    line,
                    msg: "malformed attribute list".into(),
                });
            }
            (text[..open].trim(), Some(&text[open + 1..close]))
        }
        None => (text, None),
    };

    let (name, parent) = match head.split_once(" isa ") {
        Some((n, p)) => (n.trim(), Some(p.trim().to_string())),
        None => (head.trim(), None),
    };
    if !is_ident(name) {
        return Err(ModelError::Syntax {
            line,
            msg: format!("invalid entity name `{name}`"),
        });
    }
    if let Some(p) = &parent {
        if !is_ident(p) {
            return Err(ModelError::Syntax {
                line,
                msg: format!("invalid parent name `{p}`"),
            });
        }
    }

    let mut attributes = Vec::new();
    if let Some(list) = attrs {
        for part in split_params(list) {
            let part = part.trim();
            if part.is_empty() {
                continue;
            }
            let (attr_name, attr_ty) = part.split_once(':').ok_or_else(|| ModelError::Syntax {
                line,
                msg: format!("attribute `{part}` must be name:type"),
            })?;
            let attr_name = attr_name.trim();
            let attr_ty = attr_ty.trim();
            if !is_ident(attr_name) {
                return Err(ModelError::Syntax {
                    line,
                    msg: format!("invalid attribute name `{attr_name}`"),
                });
            }
            let ty = AttrType::parse(attr_ty)
                .ok_or_else(|| ModelError::UnknownAttrType(attr_ty.to_string()))?;
            if attributes.iter().any(|(n, _)| n == attr_name) {
                return Err(ModelError::Syntax {
                    line,
                    msg: format!("attribute `{attr_name}` declared twice"),
                });
            }
            attributes.push((attr_name.to_string(), ty));
        }
    }

    Ok(EntityType {
        name: name.to_string(),
        parent,
        attributes,
        declared_dim: None,
    })
}

fn parse_relation(text: &str, line: usize, taxonomy: &Taxonomy) -> Result<RelationType, ModelError> {
    let open = text.find('(').ok_or_else(|| ModelError::Syntax {
        line,
        msg: "relation needs a parameter list".into(),
    })?;
    let close = text.rfind(')').ok_or_else(|| ModelError::Syntax {
        line,
        msg: "unclosed parameter list".into(),
    })?;
    let name = text[..open].trim();
    if !is_ident(name) {
        return Err(ModelError::Syntax {
            line,
            msg: format!("invalid relation name `{name}`"),
        });
    }
    let mut params = Vec::new();
    for part in split_params(&text[open + 1..close]) {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        let (pname, pty) = part.split_once(':').ok_or_else(|| ModelError::Syntax {
            line,
            msg: format!("parameter `{part}` must be name:type"),
        })?;
        let pname = pname.trim();
        let pty = pty.trim().to_string();
        let kind = match pty.as_str() {
            "int" => ParamType::Int,
            "string" => ParamType::Str,
            _ => ParamType::Entity,
        };
        if kind == ParamType::Entity && !taxonomy.has_entity(&pty) {
            return Err(ModelError::UnknownParamType {
                relation: name.to_string(),
                param: pty,
            });
        }
        params.push((pname.to_string(), pty, kind));
    }
    Ok(RelationType {
        name: name.to_string(),
        params,
    })
}

fn split_params(s: &str) -> Vec<&str> {
    s.split(',').collect()
}
