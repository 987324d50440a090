//! Project configuration and the runtime pipeline.
//!
//! A project file (TOML) names the design artifacts and the annotator
//! arrangement:
//!
//! ```toml
//! [project]
//! object_model = "model.odl"
//! label_lexicon = "labels.txt"
//! descriptors = "descriptors.sd"
//! mapping = "mapping.dl"
//! schema = "schema.txt"
//!
//! [input]
//! split_col = 34
//!
//! [[annotators]]
//! kind = "regex"
//! target = "email"
//! pattern = "[A-Za-z0-9._%+-]+@[A-Za-z0-9.-]+\\.[A-Za-z]{2,}"
//!
//! [[annotators]]
//! kind = "gazetteer"
//! target = "IndustryTerm"
//! dictionary = "dict/skills.txt"
//!
//! [[annotators]]
//! kind = "label"
//! labels = [{ text = "E-mail", target = "eucv_email_label" }]
//! ```
//!
//! Everything loads and validates before any document is touched. The
//! runtime phase then ingests each document (`.json` grid files,
//! `.txt` two-column text), refines, tokenizes, annotates, runs the
//! descriptor plan, applies the mapping, and merges the per-document
//! fragments into the semantic view. One bad document is reported and
//! skipped, not fatal.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Deserialize;
use thiserror::Error;

use crate::annotate::{annotate_document, Annotator, AnnotatorError};
use crate::datalog::{text::parse_program, validate_program, Program};
use crate::dengine::{compile_descriptor, run_descriptors, CompiledDescriptor};
use crate::dscript::{link_descriptors, parse_descriptor_file, Plan};
use crate::griddoc::{parse_grid_document, parse_two_column_text, refine_grid, tokenize, GridDocument};
use crate::ontology::{load_object_model, FactBase, Taxonomy};
use crate::semview::{
    apply_mapping, check_mapping, emit_view, load_target_schema, Schema, SemanticView,
    ViewFormat, ViewFragment,
};

#[derive(Debug, Error)]
pub enum ProjectError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {msg}")]
    Config { path: PathBuf, msg: String },
    #[error("object model: {0}")]
    Model(#[from] crate::ontology::ModelError),
    #[error("descriptors: {0}")]
    Descriptor(#[from] crate::dscript::ParseError),
    #[error("descriptors: {0}")]
    Link(#[from] crate::dscript::LinkError),
    #[error("descriptor compilation: {0}")]
    Compile(#[from] crate::dengine::CompileError),
    #[error("compiled rules: {0}")]
    Rules(#[from] crate::datalog::RuleError),
    #[error("annotators: {0}")]
    Annotator(#[from] AnnotatorError),
    #[error("mapping rules: {0}")]
    MappingText(#[from] crate::datalog::text::TextError),
    #[error("mapping: {0}")]
    Mapping(#[from] crate::semview::MappingError),
    #[error("schema: {0}")]
    Schema(#[from] crate::semview::SchemaError),
    #[error("input document `{doc}`: {msg}")]
    Document { doc: String, msg: String },
}

#[derive(Debug, Deserialize)]
struct ProjectFile {
    project: ProjectSection,
    #[serde(default)]
    input: InputSection,
    #[serde(default)]
    annotators: Vec<AnnotatorSection>,
}

#[derive(Debug, Deserialize)]
struct ProjectSection {
    object_model: String,
    label_lexicon: String,
    descriptors: String,
    mapping: String,
    schema: String,
}

#[derive(Debug, Default, Deserialize)]
struct InputSection {
    split_col: Option<usize>,
}

#[derive(Debug, Deserialize)]
struct AnnotatorSection {
    kind: String,
    target: Option<String>,
    pattern: Option<String>,
    dictionary: Option<String>,
    #[serde(default)]
    labels: Vec<LabelPair>,
}

#[derive(Debug, Deserialize)]
struct LabelPair {
    text: String,
    target: String,
}

/// All design-phase artifacts, loaded and cross-validated.
pub struct LoadedProject {
    pub taxonomy: Taxonomy,
    pub plan: Plan,
    pub compiled: Vec<CompiledDescriptor>,
    pub annotators: Vec<Annotator>,
    pub label_lexicon: Vec<String>,
    pub mapping: Program,
    pub schema: Schema,
    pub split_col: Option<usize>,
}

fn read(path: &Path) -> Result<String, ProjectError> {
    fs::read_to_string(path).map_err(|source| ProjectError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// One entry per line, `#` comments, blank lines ignored.
fn parse_line_file(text: &str) -> Vec<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(crate::griddoc::collapse_ws)
        .collect()
}

pub fn load_project(path: &Path) -> Result<LoadedProject, ProjectError> {
    let text = read(path)?;
    let file: ProjectFile = toml::from_str(&text).map_err(|e| ProjectError::Config {
        path: path.to_path_buf(),
        msg: e.to_string(),
    })?;
    let dir = path.parent().unwrap_or(Path::new("."));
    let at = |rel: &str| dir.join(rel);

    let mut taxonomy = load_object_model(&read(&at(&file.project.object_model))?)?;
    let label_lexicon = parse_line_file(&read(&at(&file.project.label_lexicon))?);

    let descriptors = parse_descriptor_file(&read(&at(&file.project.descriptors))?)?;
    let plan = link_descriptors(descriptors, &mut taxonomy)?;
    let mut compiled = Vec::new();
    for linked in &plan.descriptors {
        let c = compile_descriptor(linked, &taxonomy)?;
        validate_program(&c.program())?;
        compiled.push(c);
    }

    let mut annotators = Vec::new();
    for section in &file.annotators {
        let missing = |what: &str| ProjectError::Config {
            path: path.to_path_buf(),
            msg: format!("annotator kind `{}` needs `{what}`", section.kind),
        };
        match section.kind.as_str() {
            "regex" => {
                let target = section.target.as_ref().ok_or_else(|| missing("target"))?;
                let pattern = section.pattern.as_ref().ok_or_else(|| missing("pattern"))?;
                annotators.push(Annotator::regex(&taxonomy, target, pattern)?);
            }
            "gazetteer" => {
                let target = section.target.as_ref().ok_or_else(|| missing("target"))?;
                let dict_path = section
                    .dictionary
                    .as_ref()
                    .ok_or_else(|| missing("dictionary"))?;
                let entries = parse_line_file(&read(&at(dict_path))?);
                annotators.push(Annotator::gazetteer(&taxonomy, target, &entries)?);
            }
            "label" => {
                let pairs: Vec<(String, String)> = section
                    .labels
                    .iter()
                    .map(|l| (l.text.clone(), l.target.clone()))
                    .collect();
                annotators.push(Annotator::label(&taxonomy, &pairs)?);
            }
            other => {
                return Err(ProjectError::Config {
                    path: path.to_path_buf(),
                    msg: format!("unknown annotator kind `{other}`"),
                })
            }
        }
    }

    let schema = load_target_schema(&read(&at(&file.project.schema))?)?;
    let mapping = parse_program(&read(&at(&file.project.mapping))?)?;
    validate_program(&mapping)?;
    check_mapping(&mapping, &schema)?;

    Ok(LoadedProject {
        taxonomy,
        plan,
        compiled,
        annotators,
        label_lexicon,
        mapping,
        schema,
        split_col: file.input.split_col,
    })
}

/// Runs the per-document stages: refine, tokenize, annotate, run the
/// descriptor plan, apply the mapping.
pub fn process_document(
    project: &LoadedProject,
    doc: &GridDocument,
    want_facts: bool,
) -> Result<(ViewFragment, Option<String>), ProjectError> {
    let doc_err = |msg: String| ProjectError::Document {
        doc: doc.doc_id.clone(),
        msg,
    };
    let refined = refine_grid(doc, &project.label_lexicon);
    let mut fb = FactBase::new();
    tokenize(&refined, &project.taxonomy, &mut fb).map_err(|e| doc_err(e.to_string()))?;
    annotate_document(&project.annotators, &refined, &project.taxonomy, &mut fb)
        .map_err(|e| doc_err(e.to_string()))?;
    run_descriptors(&project.compiled, &project.taxonomy, &mut fb)
        .map_err(|e| doc_err(e.to_string()))?;
    let fragment = apply_mapping(
        &project.mapping,
        &project.schema,
        &project.taxonomy,
        &fb,
        &doc.doc_id,
    )
    .map_err(|e| doc_err(e.to_string()))?;
    let dump = want_facts.then(|| fb.render(&project.taxonomy));
    Ok((fragment, dump))
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub split_col: Option<usize>,
    pub emit_facts: bool,
    pub emit_rules: bool,
    pub jobs: Option<usize>,
}

#[derive(Debug, Default)]
pub struct RunSummary {
    pub processed: usize,
    /// (doc name, error message), sorted by doc name.
    pub failures: Vec<(String, String)>,
    pub violation_count: usize,
}

fn ingest(
    project: &LoadedProject,
    path: &Path,
    opts: &RunOptions,
) -> Result<GridDocument, ProjectError> {
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().to_string())
        .unwrap_or_else(|| path.display().to_string());
    let doc_err = |msg: String| ProjectError::Document {
        doc: name.clone(),
        msg,
    };
    match path.extension().and_then(|e| e.to_str()) {
        Some("json") => {
            let bytes = fs::read(path).map_err(|source| ProjectError::Io {
                path: path.to_path_buf(),
                source,
            })?;
            parse_grid_document(&bytes).map_err(|e| doc_err(e.to_string()))
        }
        Some("txt") => {
            let text = read(path)?;
            let split = opts
                .split_col
                .or(project.split_col)
                .ok_or_else(|| doc_err("no split column configured for two-column text".into()))?;
            parse_two_column_text(&name, &text, split).map_err(|e| doc_err(e.to_string()))
        }
        _ => Err(doc_err("unsupported input extension".into())),
    }
}

/// Runs the whole pipeline over a directory of documents and writes
/// the semantic view (and optional debug dumps) into `out_dir`.
/// Per-document failures are collected, not fatal.
pub fn run_pipeline(
    project: &LoadedProject,
    input_dir: &Path,
    out_dir: &Path,
    opts: &RunOptions,
) -> Result<RunSummary, ProjectError> {
    let mut inputs: Vec<PathBuf> = fs::read_dir(input_dir)
        .map_err(|source| ProjectError::Io {
            path: input_dir.to_path_buf(),
            source,
        })?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| {
            matches!(
                p.extension().and_then(|e| e.to_str()),
                Some("json") | Some("txt")
            )
        })
        .collect();
    inputs.sort();

    let work = |path: &PathBuf| -> (String, Result<(ViewFragment, Option<String>), ProjectError>) {
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().to_string())
            .unwrap_or_else(|| path.display().to_string());
        let result = ingest(project, path, opts)
            .and_then(|doc| process_document(project, &doc, opts.emit_facts));
        (name, result)
    };
    let results: Vec<_> = match opts.jobs {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .expect("thread pool");
            pool.install(|| inputs.par_iter().map(work).collect())
        }
        None => inputs.par_iter().map(work).collect(),
    };

    let mut fragments = Vec::new();
    let mut dumps = Vec::new();
    let mut summary = RunSummary::default();
    for (name, result) in results {
        match result {
            Ok((fragment, dump)) => {
                summary.processed += 1;
                if let Some(text) = dump {
                    dumps.push((fragment.doc_id.clone(), text));
                }
                fragments.push(fragment);
            }
            Err(e) => summary.failures.push((name, e.to_string())),
        }
    }
    fragments.sort_by(|a, b| a.doc_id.cmp(&b.doc_id));
    summary.failures.sort();

    let view = SemanticView::merge(&project.schema, &fragments);
    summary.violation_count = view.violations(&project.schema).len();

    fs::create_dir_all(out_dir).map_err(|source| ProjectError::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;
    let write = |path: PathBuf, body: &str| -> Result<(), ProjectError> {
        fs::write(&path, body).map_err(|source| ProjectError::Io { path, source })
    };
    for (name, body) in emit_view(&view, &project.schema, ViewFormat::Csv) {
        write(out_dir.join(name), &body)?;
    }
    if opts.emit_rules {
        let mut text = String::new();
        for c in &project.compiled {
            text.push_str(&format!("# descriptor {}\n", c.name));
            text.push_str(&c.program().to_string());
            text.push('\n');
        }
        write(out_dir.join("rules.dl"), &text)?;
    }
    if opts.emit_facts {
        let facts_dir = out_dir.join("facts");
        fs::create_dir_all(&facts_dir).map_err(|source| ProjectError::Io {
            path: facts_dir.clone(),
            source,
        })?;
        for (doc_id, text) in dumps {
            write(facts_dir.join(format!("{doc_id}.facts")), &text)?;
        }
    }
    Ok(summary)
}

/// The design-phase check: loads and cross-validates everything,
/// returning counts and any error as a printable report. No documents
/// are touched.
pub struct ValidationReport {
    pub lines: Vec<String>,
    pub errors: Vec<String>,
}

impl ValidationReport {
    pub fn ok(&self) -> bool {
        self.errors.is_empty()
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for line in &self.lines {
            out.push_str(line);
            out.push('\n');
        }
        for error in &self.errors {
            out.push_str(&format!("error: {error}\n"));
        }
        out.push_str(&format!("errors: {}\n", self.errors.len()));
        out
    }
}

pub fn validate_project(path: &Path) -> ValidationReport {
    match load_project(path) {
        Ok(project) => {
            let rule_count: usize = project.compiled.iter().map(|c| 1 + c.rules.len()).sum();
            let order: Vec<&str> = project
                .plan
                .descriptors
                .iter()
                .map(|d| d.descriptor.name.as_str())
                .collect();
            ValidationReport {
                lines: vec![
                    format!("entity types: {}", project.taxonomy.entity_count()),
                    format!("relations: {}", project.taxonomy.relation_count()),
                    format!("annotators: {}", project.annotators.len()),
                    format!("label lexicon entries: {}", project.label_lexicon.len()),
                    format!("descriptors: {}", project.plan.descriptors.len()),
                    format!("evaluation order: {}", order.join(", ")),
                    format!("compiled rules: {rule_count}"),
                    format!("schema relations: {}", project.schema.relations.len()),
                    format!("mapping rules: {}", project.mapping.rules.len()),
                ],
                errors: vec![],
            }
        }
        Err(e) => ValidationReport {
            lines: vec![],
            errors: vec![e.to_string()],
        },
    }
}
