//! The semantic view: a declared target schema, Datalog mapping rules
//! that populate it from extracted objects, and tabular emission.
//!
//! Schema files declare one relation per line, `!` marking key
//! columns, with an optional `:int` column type:
//!
//! ```text
//! candidate(!Id, Name, Surname, Phone, Email, Address, Gender, Nationality, DateOfBirth, License)
//! workExperience(!Id, Company, BusinessSector, StartDate, EndDate)
//! candWE(!IdCandidate, !IdWorkExperience)
//! ```
//!
//! Mapping rules are ordinary rule text whose heads are target
//! relations and whose bodies read object-model predicates. For each
//! document an auxiliary `cv_candidate_id(docId)` object fact is
//! available to the rules.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::datalog::{evaluate, EvalError, Program};
use crate::ontology::{FactBase, Taxonomy};
use crate::value::Value;

pub const CANDIDATE_ID_PRED: &str = "cv_candidate_id";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColType {
    String,
    Int,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TargetRelation {
    pub name: String,
    pub columns: Vec<(String, ColType)>,
    /// Indices into `columns`.
    pub key: Vec<usize>,
}

#[derive(Debug, Clone, Default)]
pub struct Schema {
    pub relations: Vec<TargetRelation>,
}

impl Schema {
    pub fn relation(&self, name: &str) -> Option<&TargetRelation> {
        self.relations.iter().find(|r| r.name == name)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SchemaError {
    #[error("line {0}: {1}")]
    Syntax(usize, String),
    #[error("duplicate relation `{0}`")]
    DuplicateRelation(String),
    #[error("relation `{relation}`: duplicate column `{column}`")]
    DuplicateColumn { relation: String, column: String },
    #[error("relation `{0}` has no key column (mark one with `!`)")]
    EmptyKey(String),
}

/// Parses the schema file format.
pub fn load_target_schema(text: &str) -> Result<Schema, SchemaError> {
    let mut schema = Schema::default();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let lineno = idx + 1;
        let line = line.strip_suffix('.').unwrap_or(line).trim();
        let open = line
            .find('(')
            .ok_or_else(|| SchemaError::Syntax(lineno, "expected `(`".into()))?;
        let close = line
            .rfind(')')
            .ok_or_else(|| SchemaError::Syntax(lineno, "expected `)`".into()))?;
        let name = line[..open].trim().to_string();
        if name.is_empty() {
            return Err(SchemaError::Syntax(lineno, "missing relation name".into()));
        }
        if schema.relation(&name).is_some() {
            return Err(SchemaError::DuplicateRelation(name));
        }
        let mut columns = Vec::new();
        let mut key = Vec::new();
        for part in line[open + 1..close].split(',') {
            let part = part.trim();
            if part.is_empty() {
                continue;
            }
            let (is_key, part) = match part.strip_prefix('!') {
                Some(rest) => (true, rest.trim()),
                None => (false, part),
            };
            let (col_name, col_type) = match part.split_once(':') {
                Some((n, t)) => {
                    let ty = match t.trim() {
                        "int" => ColType::Int,
                        "string" => ColType::String,
                        other => {
                            return Err(SchemaError::Syntax(
                                lineno,
                                format!("unknown column type `{other}`"),
                            ))
                        }
                    };
                    (n.trim().to_string(), ty)
                }
                None => (part.to_string(), ColType::String),
            };
            if columns.iter().any(|(n, _)| *n == col_name) {
                return Err(SchemaError::DuplicateColumn {
                    relation: name,
                    column: col_name,
                });
            }
            if is_key {
                key.push(columns.len());
            }
            columns.push((col_name, col_type));
        }
        if key.is_empty() {
            return Err(SchemaError::EmptyKey(name));
        }
        schema.relations.push(TargetRelation { name, columns, key });
    }
    Ok(schema)
}

#[derive(Debug, Error)]
pub enum MappingError {
    #[error("mapping head `{0}` is not a schema relation")]
    UnknownRelation(String),
    #[error("mapping head `{relation}` has {got} arguments, schema declares {want}")]
    ArityMismatch {
        relation: String,
        got: usize,
        want: usize,
    },
    #[error("relation `{relation}` column `{column}`: {got} value does not fit")]
    ColumnType {
        relation: String,
        column: String,
        got: &'static str,
    },
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Checks every mapping-rule head against the schema.
pub fn check_mapping(mapping: &Program, schema: &Schema) -> Result<(), MappingError> {
    for rule in &mapping.rules {
        let relation = schema
            .relation(&rule.head.pred)
            .ok_or_else(|| MappingError::UnknownRelation(rule.head.pred.clone()))?;
        if rule.head.args.len() != relation.columns.len() {
            return Err(MappingError::ArityMismatch {
                relation: relation.name.clone(),
                got: rule.head.args.len(),
                want: relation.columns.len(),
            });
        }
    }
    Ok(())
}

/// One relation's extracted rows for one document.
pub type Rows = Vec<Vec<Value>>;

/// The per-document output of the mapping stage.
#[derive(Debug, Clone, Default)]
pub struct ViewFragment {
    pub doc_id: String,
    pub rows: BTreeMap<String, Rows>,
}

/// Evaluates the mapping rules over the document's facts plus the
/// auto-asserted candidate-id fact, collecting schema-relation tuples.
pub fn apply_mapping(
    mapping: &Program,
    schema: &Schema,
    taxonomy: &Taxonomy,
    fb: &FactBase,
    doc_id: &str,
) -> Result<ViewFragment, MappingError> {
    check_mapping(mapping, schema)?;
    let mut edb = fb.to_facts(taxonomy);
    edb.insert(
        CANDIDATE_ID_PRED,
        vec![Value::str("doc"), Value::str(doc_id)],
    );
    let result = evaluate(mapping, &edb)?;
    let mut fragment = ViewFragment {
        doc_id: doc_id.to_string(),
        rows: BTreeMap::new(),
    };
    for relation in &schema.relations {
        let mut rows: Rows = Vec::new();
        for tuple in result.tuples(&relation.name) {
            for (value, (column, ty)) in tuple.iter().zip(&relation.columns) {
                let ok = matches!(
                    (ty, value),
                    (ColType::String, Value::Str(_)) | (ColType::Int, Value::Int(_))
                );
                if !ok {
                    return Err(MappingError::ColumnType {
                        relation: relation.name.clone(),
                        column: column.clone(),
                        got: value.type_name(),
                    });
                }
            }
            rows.push(tuple.clone());
        }
        rows.sort();
        fragment.rows.insert(relation.name.clone(), rows);
    }
    Ok(fragment)
}

/// The merged corpus-level view with per-tuple provenance.
#[derive(Debug, Clone, Default)]
pub struct SemanticView {
    /// relation -> sorted unique rows
    pub rows: BTreeMap<String, Rows>,
    /// relation -> (row -> doc ids that produced it)
    pub provenance: BTreeMap<String, BTreeMap<Vec<Value>, Vec<String>>>,
}

impl SemanticView {
    /// Folds per-document fragments into one view. Identical tuples
    /// collapse; provenance keeps every contributing document.
    pub fn merge(schema: &Schema, fragments: &[ViewFragment]) -> SemanticView {
        let mut view = SemanticView::default();
        for relation in &schema.relations {
            view.rows.insert(relation.name.clone(), Vec::new());
            view.provenance.insert(relation.name.clone(), BTreeMap::new());
        }
        for fragment in fragments {
            for (relation, rows) in &fragment.rows {
                let prov = view.provenance.get_mut(relation).expect("schema relation");
                for row in rows {
                    prov.entry(row.clone())
                        .or_default()
                        .push(fragment.doc_id.clone());
                }
            }
        }
        for (relation, prov) in &view.provenance {
            let rows = view.rows.get_mut(relation).expect("schema relation");
            *rows = prov.keys().cloned().collect();
            rows.sort();
        }
        view
    }

    /// Key-uniqueness violations (two distinct rows sharing a key) and
    /// dangling `candWE` references, as report lines. Violations are
    /// reported, never dropped from the view.
    pub fn violations(&self, schema: &Schema) -> Vec<String> {
        let mut out = Vec::new();
        for relation in &schema.relations {
            let rows = &self.rows[&relation.name];
            let mut by_key: BTreeMap<Vec<Value>, Vec<&Vec<Value>>> = BTreeMap::new();
            for row in rows {
                let key: Vec<Value> = relation.key.iter().map(|i| row[*i].clone()).collect();
                by_key.entry(key).or_default().push(row);
            }
            for (key, group) in by_key {
                if group.len() > 1 {
                    let docs: Vec<String> = group
                        .iter()
                        .flat_map(|row| self.provenance[&relation.name][*row].clone())
                        .collect();
                    let key_text = key
                        .iter()
                        .map(|v| v.to_string())
                        .collect::<Vec<_>>()
                        .join(",");
                    out.push(format!(
                        "{}: key ({key_text}) maps to {} distinct rows (docs: {})",
                        relation.name,
                        group.len(),
                        docs.join(", "),
                    ));
                }
            }
        }
        // Referential check on the shipped link relation shape.
        if let (Some(cand), Some(we), Some(link)) = (
            self.rows.get("candidate"),
            self.rows.get("workExperience"),
            self.rows.get("candWE"),
        ) {
            let cand_ids: Vec<&Value> = cand.iter().map(|r| &r[0]).collect();
            let we_ids: Vec<&Value> = we.iter().map(|r| &r[0]).collect();
            for row in link {
                if !cand_ids.contains(&&row[0]) {
                    out.push(format!("candWE: IdCandidate {} has no candidate row", row[0]));
                }
                if !we_ids.contains(&&row[1]) {
                    out.push(format!(
                        "candWE: IdWorkExperience {} has no workExperience row",
                        row[1]
                    ));
                }
            }
        }
        out.sort();
        out
    }
}

fn value_text(v: &Value) -> String {
    match v {
        Value::Str(s) => s.clone(),
        Value::Int(n) => n.to_string(),
        Value::List(items) => items.join(";"),
    }
}

/// RFC 4180 CSV for one relation: header row, then rows sorted by key.
pub fn relation_csv(view: &SemanticView, relation: &TargetRelation) -> String {
    let mut writer = csv::WriterBuilder::new().from_writer(Vec::new());
    writer
        .write_record(relation.columns.iter().map(|(n, _)| n.as_str()))
        .expect("in-memory write");
    let mut rows: Vec<&Vec<Value>> = view.rows[&relation.name].iter().collect();
    rows.sort_by_key(|row| {
        let key: Vec<String> = relation.key.iter().map(|i| value_text(&row[*i])).collect();
        let full: Vec<String> = row.iter().map(value_text).collect();
        (key, full)
    });
    for row in rows {
        writer
            .write_record(row.iter().map(value_text))
            .expect("in-memory write");
    }
    String::from_utf8(writer.into_inner().expect("in-memory flush")).expect("utf8 csv")
}

#[derive(Debug, Serialize, Deserialize)]
struct JsonRelation {
    relation: String,
    columns: Vec<String>,
    rows: Vec<Vec<String>>,
}

/// A JSON rendering that mirrors the CSV content.
pub fn relation_json(view: &SemanticView, relation: &TargetRelation) -> String {
    let csv_rows: Vec<&Vec<Value>> = view.rows[&relation.name].iter().collect();
    let mut rows: Vec<Vec<String>> = csv_rows
        .iter()
        .map(|row| row.iter().map(value_text).collect())
        .collect();
    rows.sort();
    let doc = JsonRelation {
        relation: relation.name.clone(),
        columns: relation.columns.iter().map(|(n, _)| n.clone()).collect(),
        rows,
    };
    let mut text = serde_json::to_string_pretty(&doc).expect("serializable");
    text.push('\n');
    text
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViewFormat {
    Csv,
    Json,
}

/// Serializes every relation (one file's content per relation) plus
/// the violations report.
pub fn emit_view(
    view: &SemanticView,
    schema: &Schema,
    format: ViewFormat,
) -> Vec<(String, String)> {
    let mut files = Vec::new();
    for relation in &schema.relations {
        let (name, body) = match format {
            ViewFormat::Csv => (format!("{}.csv", relation.name), relation_csv(view, relation)),
            ViewFormat::Json => (
                format!("{}.json", relation.name),
                relation_json(view, relation),
            ),
        };
        files.push((name, body));
    }
    let mut report = String::new();
    for line in view.violations(schema) {
        let _ = writeln!(report, "{line}");
    }
    files.push(("violations.txt".to_string(), report));
    files
}

/// Reads rows back out of a CSV produced by [`relation_csv`].
pub fn parse_relation_csv(text: &str) -> Result<(Vec<String>, Vec<Vec<String>>), csv::Error> {
    let mut reader = csv::ReaderBuilder::new().from_reader(text.as_bytes());
    let header = reader
        .headers()?
        .iter()
        .map(|s| s.to_string())
        .collect::<Vec<_>>();
    let mut rows = Vec::new();
    for record in reader.records() {
        rows.push(record?.iter().map(|s| s.to_string()).collect());
    }
    Ok((header, rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datalog::text::parse_program;
    use crate::ontology::{load_object_model, BiPos, ObjectInstance, Position};

    const SCHEMA_TEXT: &str = "\
candidate(!Id, Name, Surname, Phone, Email, Address, Gender, Nationality, DateOfBirth, License)
workExperience(!Id, Company, BusinessSector, StartDate, EndDate)
candWE(!IdCandidate, !IdWorkExperience)
";

    const MAPPING_TEXT: &str = "\
candidate(Id,N,S,P,E,A,G,Nt,D,L) :- ID:cv_candidate_id(Id),
           PI:personalInformation(N,S,A,P,E,Nt,D,G),
           CDL:candidateDrivingLicence(L).
workExperience(WExpId, Company, BusinessSector, Start, End) :-
           C:company(WExpId,Company,BusinessSector),
           WED:workExperienceDates(WExpId,Start,End).
candWE(Id, WExpId) :- ID:cv_candidate_id(Id),
           C:company(WExpId,Company,BusinessSector),
           WED:workExperienceDates(WExpId,Start,End).
";

    fn model() -> Taxonomy {
        load_object_model(
            "entity personalInformation isa biDimObject(n:string, s:string, a:string, \
             p:string, e:string, nt:string, d:string, g:string).\n\
             entity candidateDrivingLicence isa biDimObject(value:string).\n\
             entity company isa biDimObject(weid:string, name:string, sector:string).\n\
             entity workExperienceDates isa biDimObject(weid:string, start:string, end:string).\n",
        )
        .unwrap()
    }

    fn bi(y: i64) -> Position {
        Position::Bi(BiPos {
            xstart: 0,
            ystart: y,
            xend: 2,
            yend: y + 1,
        })
    }

    fn sample_fb(t: &Taxonomy, with_licence: bool) -> FactBase {
        let mut fb = FactBase::new();
        fb.assert_object(
            t,
            ObjectInstance::new("pi", "personalInformation")
                .with_attr("n", "Anna")
                .with_attr("s", "Kowalska")
                .with_attr("a", "12 Via Roma")
                .with_attr("p", "+39 333 1234567")
                .with_attr("e", "anna@w3.org")
                .with_attr("nt", "Polish")
                .with_attr("d", "12/03/1980")
                .with_attr("g", "Female"),
            bi(0),
        )
        .unwrap();
        if with_licence {
            fb.assert_object(
                t,
                ObjectInstance::new("dl", "candidateDrivingLicence").with_attr("value", "B"),
                bi(1),
            )
            .unwrap();
        }
        fb
    }

    #[test]
    fn schema_parses_with_keys() {
        let schema = load_target_schema(SCHEMA_TEXT).unwrap();
        assert_eq!(schema.relations.len(), 3);
        let we = schema.relation("workExperience").unwrap();
        assert_eq!(we.columns.len(), 5);
        assert_eq!(we.key, vec![0]);
        let link = schema.relation("candWE").unwrap();
        assert_eq!(link.key, vec![0, 1]);
        let cand = schema.relation("candidate").unwrap();
        assert_eq!(cand.columns.len(), 10);
    }

    #[test]
    fn schema_requires_key() {
        let err = load_target_schema("r(A, B)").unwrap_err();
        assert_eq!(err, SchemaError::EmptyKey("r".into()));
        assert!(load_target_schema("").unwrap().relations.is_empty());
    }

    #[test]
    fn candidate_rule_fires_once() {
        let t = model();
        let schema = load_target_schema(SCHEMA_TEXT).unwrap();
        let mapping = parse_program(MAPPING_TEXT).unwrap();
        let fb = sample_fb(&t, true);
        let fragment = apply_mapping(&mapping, &schema, &t, &fb, "cv1").unwrap();
        let rows = &fragment.rows["candidate"];
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0][0], Value::str("cv1"));
        assert_eq!(rows[0][1], Value::str("Anna"));
        assert_eq!(rows[0][8], Value::str("12/03/1980"));
        assert_eq!(rows[0][9], Value::str("B"));
    }

    #[test]
    fn missing_licence_yields_no_candidate() {
        let t = model();
        let schema = load_target_schema(SCHEMA_TEXT).unwrap();
        let mapping = parse_program(MAPPING_TEXT).unwrap();
        let fb = sample_fb(&t, false);
        let fragment = apply_mapping(&mapping, &schema, &t, &fb, "cv1").unwrap();
        assert!(fragment.rows["candidate"].is_empty());
    }

    #[test]
    fn two_work_experiences_two_links() {
        let t = model();
        let schema = load_target_schema(SCHEMA_TEXT).unwrap();
        let mapping = parse_program(MAPPING_TEXT).unwrap();
        let mut fb = sample_fb(&t, true);
        for (i, (weid, name, sector, start, end)) in [
            ("2001 - 2005", "W3C Consulting", "IT", "2001", "2005"),
            ("2006 - 2010", "Acme", "Retail", "2006", "2010"),
        ]
        .iter()
        .enumerate()
        {
            fb.assert_object(
                &t,
                ObjectInstance::new(format!("co{i}"), "company")
                    .with_attr("weid", *weid)
                    .with_attr("name", *name)
                    .with_attr("sector", *sector),
                bi(10 + 2 * i as i64),
            )
            .unwrap();
            fb.assert_object(
                &t,
                ObjectInstance::new(format!("wed{i}"), "workExperienceDates")
                    .with_attr("weid", *weid)
                    .with_attr("start", *start)
                    .with_attr("end", *end),
                bi(11 + 2 * i as i64),
            )
            .unwrap();
        }
        let fragment = apply_mapping(&mapping, &schema, &t, &fb, "cv1").unwrap();
        assert_eq!(fragment.rows["workExperience"].len(), 2);
        assert_eq!(fragment.rows["candWE"].len(), 2);
        // The join key lines companies up with their own dates.
        for row in &fragment.rows["workExperience"] {
            if row[0] == Value::str("2001 - 2005") {
                assert_eq!(row[1], Value::str("W3C Consulting"));
                assert_eq!(row[3], Value::str("2001"));
            }
        }
    }

    #[test]
    fn unknown_head_rejected() {
        let schema = load_target_schema(SCHEMA_TEXT).unwrap();
        let mapping = parse_program("ghost(X) :- ID:cv_candidate_id(X).").unwrap();
        assert!(matches!(
            check_mapping(&mapping, &schema),
            Err(MappingError::UnknownRelation(_))
        ));
        let mapping = parse_program("candWE(Id) :- ID:cv_candidate_id(Id).").unwrap();
        assert!(matches!(
            check_mapping(&mapping, &schema),
            Err(MappingError::ArityMismatch { .. })
        ));
    }

    #[test]
    fn view_merge_violations_and_csv() {
        let schema = load_target_schema(SCHEMA_TEXT).unwrap();
        let row = |id: &str, name: &str| -> Vec<Value> {
            let mut r = vec![Value::str(id), Value::str(name)];
            r.extend(std::iter::repeat_n(Value::str("x"), 8));
            r
        };
        let frag = |doc: &str, id: &str, name: &str| {
            let mut rows = BTreeMap::new();
            rows.insert("candidate".to_string(), vec![row(id, name)]);
            rows.insert("workExperience".to_string(), vec![]);
            rows.insert("candWE".to_string(), vec![]);
            ViewFragment {
                doc_id: doc.to_string(),
                rows,
            }
        };
        let view = SemanticView::merge(
            &schema,
            &[
                frag("cv1", "cv1", "Anna"),
                frag("cv2", "cv1", "Maria"),
                frag("cv3", "cv3", "Ewa"),
            ],
        );
        let violations = view.violations(&schema);
        assert_eq!(violations.len(), 1);
        assert!(violations[0].contains("candidate"), "{violations:?}");
        assert!(violations[0].contains("cv1"));

        let csv_text = relation_csv(&view, schema.relation("candidate").unwrap());
        let (header, rows) = parse_relation_csv(&csv_text).unwrap();
        assert_eq!(header[0], "Id");
        assert_eq!(rows.len(), 3);
        // sorted by key then row
        assert_eq!(rows[0][1], "Anna");
        assert_eq!(rows[1][1], "Maria");
    }

    #[test]
    fn csv_quotes_commas() {
        let schema = load_target_schema("r(!Id, Text)").unwrap();
        let mut rows = BTreeMap::new();
        rows.insert(
            "r".to_string(),
            vec![vec![Value::str("a"), Value::str("hello, world")]],
        );
        let view = SemanticView::merge(
            &schema,
            &[ViewFragment {
                doc_id: "d".into(),
                rows,
            }],
        );
        let text = relation_csv(&view, schema.relation("r").unwrap());
        assert!(text.contains("\"hello, world\""));
        let (_, parsed) = parse_relation_csv(&text).unwrap();
        assert_eq!(parsed[0][1], "hello, world");
    }

    #[test]
    fn empty_relation_emits_header_only() {
        let schema = load_target_schema("r(!Id, Text)").unwrap();
        let view = SemanticView::merge(&schema, &[]);
        let files = emit_view(&view, &schema, ViewFormat::Csv);
        assert_eq!(files[0].0, "r.csv");
        assert_eq!(files[0].1, "Id,Text\n");
        assert_eq!(files[1].0, "violations.txt");
        assert_eq!(files[1].1, "");
    }

    #[test]
    fn json_round_trip() {
        let schema = load_target_schema("r(!Id, Text)").unwrap();
        let mut rows = BTreeMap::new();
        rows.insert(
            "r".to_string(),
            vec![vec![Value::str("a"), Value::str("b")]],
        );
        let view = SemanticView::merge(
            &schema,
            &[ViewFragment {
                doc_id: "d".into(),
                rows,
            }],
        );
        let text = relation_json(&view, schema.relation("r").unwrap());
        let parsed: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(parsed["relation"], "r");
        assert_eq!(parsed["rows"][0][1], "b");
    }
}
