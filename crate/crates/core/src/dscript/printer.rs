//! Canonical text for a descriptor AST. `parse(pretty_print(d))` is
//! structurally `d` again; printing an already-canonical text is a
//! fixed point.

use super::{ActionStatement, AssignSource, BodyElement, ConceptMatch, Descriptor};

fn print_concept(c: &ConceptMatch, out: &mut String) {
    out.push('<');
    out.push_str(&c.type_name);
    out.push('(');
    out.push_str(&c.vars.join(", "));
    out.push(')');
    out.push('>');
}

fn quote(s: &str) -> String {
    let mut out = String::from("'");
    for ch in s.chars() {
        match ch {
            '\'' => out.push_str("\\'"),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            _ => out.push(ch),
        }
    }
    out.push('\'');
    out
}

fn print_action(stmts: &[ActionStatement], out: &mut String) {
    out.push('{');
    for (i, stmt) in stmts.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        match stmt {
            ActionStatement::Assign { target, source } => {
                out.push_str(target);
                out.push_str(":=");
                match source {
                    AssignSource::Var(v) => out.push_str(v),
                    AssignSource::Literal(s) => out.push_str(&quote(s)),
                }
            }
            ActionStatement::InitList { target } => {
                out.push_str(target);
                out.push_str(":=[]");
            }
            ActionStatement::Append { target, source } => {
                out.push_str(target);
                out.push_str("&=");
                out.push_str(source);
            }
        }
        out.push(';');
    }
    out.push('}');
}

fn print_elements(elems: &[BodyElement], out: &mut String) {
    for (i, e) in elems.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        match e {
            BodyElement::Concept(c) => print_concept(c, out),
            BodyElement::Contains { outer, inner } => {
                print_concept(outer, out);
                out.push_str(" CONTAINS ");
                print_concept(inner, out);
            }
            BodyElement::Action(stmts) => print_action(stmts, out),
            BodyElement::Skip => out.push_str("..."),
            BodyElement::Recurrence(es) => {
                out.push('(');
                print_elements(es, out);
                out.push_str(")+");
            }
            BodyElement::Group(es) => {
                out.push('(');
                print_elements(es, out);
                out.push(')');
            }
        }
    }
}

pub fn pretty_print(d: &Descriptor) -> String {
    let mut out = String::new();
    out.push('<');
    out.push_str(&d.name);
    out.push('(');
    out.push_str(&d.params.join(", "));
    out.push_str(")> ");
    out.push_str(d.axis.symbol());
    out.push(' ');
    print_elements(&d.body, &mut out);
    out
}
