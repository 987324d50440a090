//! Rule-driven semantic information extraction over two-dimensional
//! document grids.
//!
//! A collection of layout-homogeneous documents (CVs, invoices, forms)
//! is ingested as *grid documents*: sets of rectangular cells addressed
//! by half-open 2D coordinates. Each document is tokenized into a fact
//! base of typed objects (cells, tokens, delimiters), enriched by
//! configurable annotators (regex, gazetteer, label patterns), and then
//! matched against *semantic descriptors* — a small pattern DSL that
//! combines one- and two-dimensional objects into new objects. The
//! descriptors are compiled to Datalog rules and evaluated by a
//! fixpoint engine; finally, Datalog mapping rules turn the extracted
//! objects into rows of a declared target schema (the *semantic view*).
//!
//! Module map:
//! - [`ontology`]: the object model (entity taxonomy, relations) and
//!   the per-document fact base.
//! - [`griddoc`]: grid-document ingestion, label-driven cell merging,
//!   tokenization.
//! - [`annotate`]: regex / gazetteer / label annotators.
//! - [`dscript`]: descriptor DSL parser, printer, and linker.
//! - [`datalog`]: positive Datalog with builtins, naive and semi-naive
//!   evaluation.
//! - [`dengine`]: descriptor-to-Datalog compiler plus a direct
//!   automaton matcher used as an independent oracle.
//! - [`semview`]: target schema, mapping-rule application, view
//!   emission.
//! - [`project`]: project configuration and the document pipeline.

pub mod annotate;
pub mod datalog;
pub mod dengine;
pub mod dscript;
pub mod griddoc;
pub mod ontology;
pub mod project;
pub mod semview;
pub mod value;

pub use ontology::{FactBase, ObjectId, ObjectInstance, Taxonomy};
pub use value::Value;
