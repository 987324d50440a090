//! The descriptor engine: compiles linked descriptors into Datalog
//! rule sets (each descriptor is an automaton whose states are
//! `conf_*` facts) and runs them over document fact bases. A separate
//! direct interpreter of the same automaton ([`match_direct`]) exists
//! purely as an independent check on the compiler.
//!
//! The compiled shape for `<candidateEmail(E)> ::- <eucv_email_label_box()>
//! (<filledCell(X)> CONTAINS <email(X)> {E:=X;})`:
//!
//! ```text
//! init_conf_candidateEmail(0, '').
//! conf_candidateEmail(1, E, Xs, Ys, Xe, Ye) :- init_conf_candidateEmail(0, E),
//!     eucv_email_label_box(Id1), bi_position(Id1, Xs, Ys, Xe, Ye).
//! conf_candidateEmail(2, E, Xs, Ys, Xe_1, Ye) :- conf_candidateEmail(1, E, Xs, Ys, Xe, Ye),
//!     filledCell(Id2, X_e2), bi_position(Id2, Xe, Ys, Xe_1, Ye).
//! conf_candidateEmail(3, X_e2, Xs, Ys, Xe_1, Ye) :- conf_candidateEmail(1, E, Xs, Ys, Xe, Ye),
//!     filledCell(Id2, X_e2), bi_position(Id2, Xe, Ys, Xe_1, Ye),
//!     email(IdC2, X_e2b), belongs_to(IdC2, Id2).
//! aux_candidateEmail(AutoGen, E, Xs, Ys, Xe, Ye) :- conf_candidateEmail(3, E, Xs, Ys, Xe, Ye),
//!     AutoGen=#newID.
//! AutoGen : candidateEmail(E) :- aux_candidateEmail(AutoGen, E, Xs, Ys, Xe, Ye).
//! bi_position(AutoGen, Xs, Ys, Xe, Ye) :- aux_candidateEmail(AutoGen, E, Xs, Ys, Xe, Ye).
//! ```
//!
//! Sequencing is positional: on `::-` the next object's x-start must
//! equal the current x-end on the same rows (after `...`, `>=`
//! replaces equality); `::|` does the same on the y axis; `::` walks
//! `one_position` spans inside one anchor cell. A repetition becomes a
//! rule that re-enters its own first state with a strictly larger
//! extent, so evaluation terminates on finite documents.

mod compile;
mod direct;
mod run;

pub use compile::{compile_descriptor, CompileError, CompiledDescriptor};
pub use direct::{canonicalize, match_direct};
pub use run::{assert_matches, match_object_id, matches_from_aux, run_descriptors, RunError};

use crate::dscript::Axis;
use crate::ontology::{BiPos, ObjectId};
use crate::value::Value;

/// A completed descriptor match: one value per head parameter plus the
/// covered extent.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Match {
    pub extent: MatchExtent,
    pub attrs: Vec<Value>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum MatchExtent {
    Bi(BiPos),
    One { cell: ObjectId, start: i64, end: i64 },
}

impl MatchExtent {
    /// Grouping key: where the match starts.
    fn start_key(&self) -> (Option<&ObjectId>, i64, i64) {
        match self {
            MatchExtent::Bi(p) => (None, p.xstart, p.ystart),
            MatchExtent::One { cell, start, .. } => (Some(cell), *start, 0),
        }
    }

    /// Comparable end along the match axis.
    fn end_key(&self, axis: Axis) -> (i64, i64) {
        match self {
            MatchExtent::Bi(p) => match axis {
                Axis::Vertical => (p.yend, p.xend),
                _ => (p.xend, p.yend),
            },
            MatchExtent::One { end, .. } => (*end, 0),
        }
    }
}
