//! The semantic-descriptor DSL: patterns that combine one- and
//! two-dimensional objects into new objects.
//!
//! A descriptor names the object it builds on the left of an axis
//! operator and lists what must be found on the right:
//!
//! ```text
//! <eucv_email_label_box()> ::- <filledCell()> CONTAINS <eucv_email_label()>
//!
//! <candidateEmail(E)> ::- <eucv_email_label_box()>
//!                         (<filledCell(X)> CONTAINS <email(X)> {E:=X;})
//!
//! <list_of_skills(S)> :: {S:=[];} <startOfLine> ...
//!                        (<IndustryTerm(S1)> {S&=S1;} ...)+ <endOfLine>
//! ```
//!
//! `::-` walks cells left to right, `::|` top to bottom, and `::`
//! walks one-dimensional objects inside a single cell. `CONTAINS`
//! looks inside a cell, `(...)` groups, `(...)+` repeats, `...` skips
//! irrelevant objects, and `{...}` actions assign or append attribute
//! values.

mod link;
mod parser;
mod printer;

pub use link::{link_descriptors, LinkError, LinkedDescriptor, Plan};
pub use parser::{parse_descriptor, parse_descriptor_file, ParseError};
pub use printer::pretty_print;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Axis {
    Horizontal,
    Vertical,
    OneDim,
}

impl Axis {
    pub fn symbol(&self) -> &'static str {
        match self {
            Axis::Horizontal => "::-",
            Axis::Vertical => "::|",
            Axis::OneDim => "::",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConceptMatch {
    pub type_name: String,
    pub vars: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AssignSource {
    Var(String),
    Literal(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ActionStatement {
    /// `X := Y;` or `X := 'text';`
    Assign { target: String, source: AssignSource },
    /// `S := [];`
    InitList { target: String },
    /// `S &= S1;`
    Append { target: String, source: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BodyElement {
    Concept(ConceptMatch),
    Contains {
        outer: ConceptMatch,
        inner: ConceptMatch,
    },
    Action(Vec<ActionStatement>),
    Skip,
    Recurrence(Vec<BodyElement>),
    Group(Vec<BodyElement>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Descriptor {
    pub name: String,
    pub params: Vec<String>,
    pub axis: Axis,
    pub body: Vec<BodyElement>,
}

impl Descriptor {
    /// Names of every concept the body references.
    pub fn referenced_concepts(&self) -> Vec<&str> {
        fn walk<'a>(elems: &'a [BodyElement], out: &mut Vec<&'a str>) {
            for e in elems {
                match e {
                    BodyElement::Concept(c) => out.push(&c.type_name),
                    BodyElement::Contains { outer, inner } => {
                        out.push(&outer.type_name);
                        out.push(&inner.type_name);
                    }
                    BodyElement::Recurrence(es) | BodyElement::Group(es) => walk(es, out),
                    BodyElement::Action(_) | BodyElement::Skip => {}
                }
            }
        }
        let mut out = Vec::new();
        walk(&self.body, &mut out);
        out
    }
}
