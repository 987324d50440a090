//! Hand-rolled lexer and recursive-descent parser for descriptors,
//! with the structural checks that make an AST well-formed: head
//! parameters must be assigned by an action, action sources must be
//! bound by an earlier concept match, `CONTAINS` needs a 2D axis, and
//! `&=` needs a prior `:=[]`.

use thiserror::Error;

use super::{
    ActionStatement, AssignSource, Axis, BodyElement, ConceptMatch, Descriptor,
};

#[derive(Debug, Error, PartialEq, Eq)]
#[error("line {line}, column {col}: {msg}")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub msg: String,
}

fn err(line: usize, col: usize, msg: impl Into<String>) -> ParseError {
    ParseError {
        line,
        col,
        msg: msg.into(),
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Lt,
    Gt,
    LParen,
    RParen,
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    Plus,
    Ellipsis,
    AxisH,
    AxisV,
    Axis1,
    Assign,
    AppendEq,
    Semi,
    Comma,
    Contains,
    Ident(String),
    Str(String),
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    col: usize,
}

fn lex(input: &str, first_line: usize) -> Result<Vec<Spanned>, ParseError> {
    let mut toks = Vec::new();
    for (off, raw) in input.lines().enumerate() {
        let line = first_line + off;
        if raw.trim_start().starts_with('#') {
            continue;
        }
        let chars: Vec<char> = raw.chars().collect();
        let mut i = 0;
        while i < chars.len() {
            let col = i + 1;
            let c = chars[i];
            let mut push = |tok: Tok, width: usize| {
                toks.push(Spanned { tok, line, col });
                width
            };
            i += match c {
                ' ' | '\t' | '\r' => 1,
                '<' => push(Tok::Lt, 1),
                '>' => push(Tok::Gt, 1),
                '(' => push(Tok::LParen, 1),
                ')' => push(Tok::RParen, 1),
                '{' => push(Tok::LBrace, 1),
                '}' => push(Tok::RBrace, 1),
                '[' => push(Tok::LBracket, 1),
                ']' => push(Tok::RBracket, 1),
                '+' => push(Tok::Plus, 1),
                ';' => push(Tok::Semi, 1),
                ',' => push(Tok::Comma, 1),
                '.' => {
                    if chars.get(i + 1) == Some(&'.') && chars.get(i + 2) == Some(&'.') {
                        push(Tok::Ellipsis, 3)
                    } else {
                        return Err(err(line, col, "stray `.` (did you mean `...`?)"));
                    }
                }
                ':' => {
                    if chars.get(i + 1) == Some(&':') {
                        match chars.get(i + 2) {
                            Some('-') => push(Tok::AxisH, 3),
                            Some('|') => push(Tok::AxisV, 3),
                            _ => push(Tok::Axis1, 2),
                        }
                    } else if chars.get(i + 1) == Some(&'=') {
                        push(Tok::Assign, 2)
                    } else {
                        return Err(err(line, col, "stray `:`"));
                    }
                }
                '&' => {
                    if chars.get(i + 1) == Some(&'=') {
                        push(Tok::AppendEq, 2)
                    } else {
                        return Err(err(line, col, "stray `&`"));
                    }
                }
                '\'' => {
                    let mut j = i + 1;
                    let mut s = String::new();
                    loop {
                        match chars.get(j) {
                            None => return Err(err(line, col, "unterminated string")),
                            Some('\\') => {
                                match chars.get(j + 1) {
                                    Some('n') => s.push('\n'),
                                    Some('t') => s.push('\t'),
                                    Some(&e) if e == '\'' || e == '\\' => s.push(e),
                                    _ => return Err(err(line, j + 1, "bad escape")),
                                }
                                j += 2;
                            }
                            Some('\'') => {
                                j += 1;
                                break;
                            }
                            Some(&ch) => {
                                s.push(ch);
                                j += 1;
                            }
                        }
                    }
                    let w = j - i;
                    push(Tok::Str(s), w)
                }
                c if c.is_alphanumeric() || c == '_' => {
                    let mut j = i;
                    while j < chars.len() && (chars[j].is_alphanumeric() || chars[j] == '_') {
                        j += 1;
                    }
                    let text: String = chars[i..j].iter().collect();
                    let w = j - i;
                    if text == "CONTAINS" {
                        push(Tok::Contains, w)
                    } else {
                        push(Tok::Ident(text), w)
                    }
                }
                other => return Err(err(line, col, format!("unexpected character `{other}`"))),
            };
        }
    }
    Ok(toks)
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|s| &s.tok)
    }

    fn here(&self) -> (usize, usize) {
        self.toks
            .get(self.pos.min(self.toks.len().saturating_sub(1)))
            .map(|s| (s.line, s.col))
            .unwrap_or((1, 1))
    }

    fn bump(&mut self) -> Option<Spanned> {
        let t = self.toks.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<(), ParseError> {
        let (line, col) = self.here();
        match self.bump() {
            Some(s) if s.tok == want => Ok(()),
            _ => Err(err(line, col, format!("expected {what}"))),
        }
    }

    fn ident(&mut self, what: &str) -> Result<String, ParseError> {
        let (line, col) = self.here();
        match self.bump() {
            Some(Spanned {
                tok: Tok::Ident(name),
                ..
            }) => Ok(name),
            _ => Err(err(line, col, format!("expected {what}"))),
        }
    }

    fn var(&mut self) -> Result<String, ParseError> {
        let (line, col) = self.here();
        let name = self.ident("variable")?;
        if !name.starts_with(|c: char| c.is_ascii_uppercase()) {
            return Err(err(
                line,
                col,
                format!("variable `{name}` must start with an uppercase letter"),
            ));
        }
        Ok(name)
    }

    /// `<name>`, `<name()>`, or `<name(V1, V2)>`.
    fn concept(&mut self) -> Result<ConceptMatch, ParseError> {
        self.expect(Tok::Lt, "`<`")?;
        let type_name = self.ident("concept name")?;
        let mut vars = Vec::new();
        if self.peek() == Some(&Tok::LParen) {
            self.bump();
            if self.peek() != Some(&Tok::RParen) {
                loop {
                    vars.push(self.var()?);
                    match self.peek() {
                        Some(Tok::Comma) => {
                            self.bump();
                        }
                        _ => break,
                    }
                }
            }
            self.expect(Tok::RParen, "`)`")?;
        }
        self.expect(Tok::Gt, "`>`")?;
        Ok(ConceptMatch { type_name, vars })
    }

    fn action(&mut self) -> Result<Vec<ActionStatement>, ParseError> {
        self.expect(Tok::LBrace, "`{`")?;
        let mut stmts = Vec::new();
        while self.peek() != Some(&Tok::RBrace) {
            let target = self.var()?;
            let (line, col) = self.here();
            match self.bump() {
                Some(Spanned {
                    tok: Tok::Assign, ..
                }) => {
                    let (l2, c2) = self.here();
                    match self.bump() {
                        Some(Spanned {
                            tok: Tok::Ident(name),
                            ..
                        }) => {
                            if !name.starts_with(|c: char| c.is_ascii_uppercase()) {
                                return Err(err(
                                    l2,
                                    c2,
                                    format!("variable `{name}` must start uppercase"),
                                ));
                            }
                            stmts.push(ActionStatement::Assign {
                                target,
                                source: AssignSource::Var(name),
                            });
                        }
                        Some(Spanned {
                            tok: Tok::Str(s), ..
                        }) => stmts.push(ActionStatement::Assign {
                            target,
                            source: AssignSource::Literal(s),
                        }),
                        Some(Spanned {
                            tok: Tok::LBracket, ..
                        }) => {
                            self.expect(Tok::RBracket, "`]`")?;
                            stmts.push(ActionStatement::InitList { target });
                        }
                        _ => return Err(err(l2, c2, "expected variable, string, or `[]`")),
                    }
                }
                Some(Spanned {
                    tok: Tok::AppendEq, ..
                }) => {
                    let source = self.var()?;
                    stmts.push(ActionStatement::Append { target, source });
                }
                _ => return Err(err(line, col, "expected `:=` or `&=`")),
            }
            self.expect(Tok::Semi, "`;`")?;
        }
        let (line, col) = self.here();
        self.expect(Tok::RBrace, "`}`")?;
        if stmts.is_empty() {
            return Err(err(line, col, "empty action block"));
        }
        Ok(stmts)
    }

    fn element(&mut self) -> Result<BodyElement, ParseError> {
        let (line, col) = self.here();
        match self.peek() {
            Some(Tok::Lt) => {
                let outer = self.concept()?;
                if self.peek() == Some(&Tok::Contains) {
                    self.bump();
                    let inner = self.concept()?;
                    Ok(BodyElement::Contains { outer, inner })
                } else {
                    Ok(BodyElement::Concept(outer))
                }
            }
            Some(Tok::LBrace) => Ok(BodyElement::Action(self.action()?)),
            Some(Tok::Ellipsis) => {
                self.bump();
                Ok(BodyElement::Skip)
            }
            Some(Tok::LParen) => {
                self.bump();
                let mut elems = Vec::new();
                while self.peek() != Some(&Tok::RParen) {
                    if self.peek().is_none() {
                        return Err(err(line, col, "unclosed `(`"));
                    }
                    elems.push(self.element()?);
                }
                self.bump();
                if elems.is_empty() {
                    return Err(err(line, col, "empty group"));
                }
                if self.peek() == Some(&Tok::Plus) {
                    self.bump();
                    Ok(BodyElement::Recurrence(elems))
                } else {
                    Ok(BodyElement::Group(elems))
                }
            }
            _ => Err(err(line, col, "expected a body element")),
        }
    }

    fn descriptor(&mut self) -> Result<Descriptor, ParseError> {
        self.expect(Tok::Lt, "`<`")?;
        let name = self.ident("descriptor name")?;
        let mut params = Vec::new();
        if self.peek() == Some(&Tok::LParen) {
            self.bump();
            if self.peek() != Some(&Tok::RParen) {
                loop {
                    params.push(self.var()?);
                    match self.peek() {
                        Some(Tok::Comma) => {
                            self.bump();
                        }
                        _ => break,
                    }
                }
            }
            self.expect(Tok::RParen, "`)`")?;
        }
        self.expect(Tok::Gt, "`>`")?;
        let (line, col) = self.here();
        let axis = match self.bump() {
            Some(Spanned { tok: Tok::AxisH, .. }) => Axis::Horizontal,
            Some(Spanned { tok: Tok::AxisV, .. }) => Axis::Vertical,
            Some(Spanned { tok: Tok::Axis1, .. }) => Axis::OneDim,
            _ => return Err(err(line, col, "expected `::-`, `::|`, or `::`")),
        };
        let mut body = Vec::new();
        while self.peek().is_some() {
            body.push(self.element()?);
        }
        if body.is_empty() {
            let (line, col) = self.here();
            return Err(err(line, col, "descriptor body is empty"));
        }
        Ok(Descriptor {
            name,
            params,
            axis,
            body,
        })
    }
}

/// Structural validation shared by the string and file entry points.
fn validate(d: &Descriptor, line: usize) -> Result<(), ParseError> {
    let fail = |msg: String| Err(err(line, 1, msg));

    if d.axis == Axis::OneDim {
        fn has_contains(elems: &[BodyElement]) -> bool {
            elems.iter().any(|e| match e {
                BodyElement::Contains { .. } => true,
                BodyElement::Recurrence(es) | BodyElement::Group(es) => has_contains(es),
                _ => false,
            })
        }
        if has_contains(&d.body) {
            return fail(format!(
                "descriptor `{}`: CONTAINS is not allowed on the `::` axis",
                d.name
            ));
        }
    }

    // Walk the body in document order tracking concept-bound variables,
    // action targets, and list initializations.
    fn walk(
        elems: &[BodyElement],
        dname: &str,
        concept_bound: &mut Vec<String>,
        assigned: &mut Vec<String>,
        lists: &mut Vec<String>,
        line: usize,
    ) -> Result<(), ParseError> {
        for e in elems {
            match e {
                BodyElement::Concept(c) => concept_bound.extend(c.vars.iter().cloned()),
                BodyElement::Contains { outer, inner } => {
                    concept_bound.extend(outer.vars.iter().cloned());
                    concept_bound.extend(inner.vars.iter().cloned());
                }
                BodyElement::Action(stmts) => {
                    for stmt in stmts {
                        match stmt {
                            ActionStatement::Assign { target, source } => {
                                if let AssignSource::Var(v) = source {
                                    if !concept_bound.contains(v) {
                                        return Err(err(
                                            line,
                                            1,
                                            format!(
                                                "descriptor `{dname}`: `{v}` is not bound by any \
                                                 preceding concept match"
                                            ),
                                        ));
                                    }
                                }
                                assigned.push(target.clone());
                            }
                            ActionStatement::InitList { target } => {
                                lists.push(target.clone());
                                assigned.push(target.clone());
                            }
                            ActionStatement::Append { target, source } => {
                                if !lists.contains(target) {
                                    return Err(err(
                                        line,
                                        1,
                                        format!(
                                            "descriptor `{dname}`: `{target} &=` before \
                                             `{target} := []`"
                                        ),
                                    ));
                                }
                                if !concept_bound.contains(source) {
                                    return Err(err(
                                        line,
                                        1,
                                        format!(
                                            "descriptor `{dname}`: `{source}` is not bound by \
                                             any preceding concept match"
                                        ),
                                    ));
                                }
                                assigned.push(target.clone());
                            }
                        }
                    }
                }
                BodyElement::Skip => {}
                BodyElement::Recurrence(es) | BodyElement::Group(es) => {
                    walk(es, dname, concept_bound, assigned, lists, line)?
                }
            }
        }
        Ok(())
    }

    let mut concept_bound = Vec::new();
    let mut assigned = Vec::new();
    let mut lists = Vec::new();
    walk(
        &d.body,
        &d.name,
        &mut concept_bound,
        &mut assigned,
        &mut lists,
        line,
    )?;
    for p in &d.params {
        if !assigned.contains(p) {
            return fail(format!(
                "descriptor `{}`: head variable `{p}` is never assigned",
                d.name
            ));
        }
    }
    Ok(())
}

/// Parses a single descriptor.
pub fn parse_descriptor(text: &str) -> Result<Descriptor, ParseError> {
    parse_block(text, 1)
}

fn parse_block(text: &str, first_line: usize) -> Result<Descriptor, ParseError> {
    let toks = lex(text, first_line)?;
    let mut parser = Parser { toks, pos: 0 };
    let d = parser.descriptor()?;
    validate(&d, first_line)?;
    Ok(d)
}

/// Parses a descriptor file: one descriptor per blank-line-separated
/// block, `#` comment lines ignored.
pub fn parse_descriptor_file(text: &str) -> Result<Vec<Descriptor>, ParseError> {
    let mut out = Vec::new();
    // (first line number, text) of the block being accumulated; only
    // blocks with a non-comment line get parsed.
    let mut block: Option<(usize, String)> = None;
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            if let Some((start, text)) = block.take() {
                out.push(parse_block(&text, start)?);
            }
            continue;
        }
        if line.trim_start().starts_with('#') && block.is_none() {
            continue;
        }
        let (_, text) = block.get_or_insert_with(|| (idx + 1, String::new()));
        text.push_str(line);
        text.push('\n');
    }
    if let Some((start, text)) = block.take() {
        out.push(parse_block(&text, start)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const CANDIDATE_EMAIL: &str = "<candidateEmail(E)> ::- <eucv_email_label_box()>\n\
         (<filledCell(X)> CONTAINS <email(X)> {E:=X;})";

    pub(crate) const LIST_OF_SKILLS: &str = "<list_of_skills(S)> :: {S:=[];} <startOfLine> ...\n\
         (<IndustryTerm(S1)> {S&=S1;} ...)+ <endOfLine>";

    #[test]
    fn candidate_email_ast() {
        let d = parse_descriptor(CANDIDATE_EMAIL).unwrap();
        assert_eq!(d.name, "candidateEmail");
        assert_eq!(d.params, vec!["E"]);
        assert_eq!(d.axis, Axis::Horizontal);
        assert_eq!(d.body.len(), 2);
        assert_eq!(
            d.body[0],
            BodyElement::Concept(ConceptMatch {
                type_name: "eucv_email_label_box".into(),
                vars: vec![]
            })
        );
        let BodyElement::Group(inner) = &d.body[1] else {
            panic!("expected group, got {:?}", d.body[1]);
        };
        assert_eq!(
            inner[0],
            BodyElement::Contains {
                outer: ConceptMatch {
                    type_name: "filledCell".into(),
                    vars: vec!["X".into()]
                },
                inner: ConceptMatch {
                    type_name: "email".into(),
                    vars: vec!["X".into()]
                },
            }
        );
        assert_eq!(
            inner[1],
            BodyElement::Action(vec![ActionStatement::Assign {
                target: "E".into(),
                source: AssignSource::Var("X".into())
            }])
        );
    }

    #[test]
    fn list_of_skills_ast() {
        let d = parse_descriptor(LIST_OF_SKILLS).unwrap();
        assert_eq!(d.axis, Axis::OneDim);
        assert_eq!(
            d.body[0],
            BodyElement::Action(vec![ActionStatement::InitList { target: "S".into() }])
        );
        assert_eq!(
            d.body[1],
            BodyElement::Concept(ConceptMatch {
                type_name: "startOfLine".into(),
                vars: vec![]
            })
        );
        assert_eq!(d.body[2], BodyElement::Skip);
        let BodyElement::Recurrence(rec) = &d.body[3] else {
            panic!("expected recurrence");
        };
        assert_eq!(rec.len(), 3);
        assert_eq!(
            rec[1],
            BodyElement::Action(vec![ActionStatement::Append {
                target: "S".into(),
                source: "S1".into()
            }])
        );
        assert_eq!(rec[2], BodyElement::Skip);
        assert_eq!(
            d.body[4],
            BodyElement::Concept(ConceptMatch {
                type_name: "endOfLine".into(),
                vars: vec![]
            })
        );
    }

    #[test]
    fn unassigned_head_var_rejected() {
        let e = parse_descriptor("<a(X)> ::- <b()>").unwrap_err();
        assert!(e.msg.contains("`X` is never assigned"), "{e}");
    }

    #[test]
    fn contains_under_one_dim_rejected() {
        let e = parse_descriptor("<a()> :: <b()> CONTAINS <c()>").unwrap_err();
        assert!(e.msg.contains("CONTAINS"), "{e}");
    }

    #[test]
    fn append_before_init_rejected() {
        let e = parse_descriptor("<a(S)> :: <b(S1)> {S&=S1;}").unwrap_err();
        assert!(e.msg.contains("&="), "{e}");
    }

    #[test]
    fn unbound_action_source_rejected() {
        let e = parse_descriptor("<a(V)> ::- <b()> {V:=X;}").unwrap_err();
        assert!(e.msg.contains("not bound"), "{e}");
    }

    #[test]
    fn leading_literal_action_allowed() {
        let d = parse_descriptor(
            "<candidateEmail(E)> ::- {E:='';} <eucv_email_label_box()>\n\
             <filledCell(X)> CONTAINS <email(X)> {E:=X;}",
        )
        .unwrap();
        assert_eq!(
            d.body[0],
            BodyElement::Action(vec![ActionStatement::Assign {
                target: "E".into(),
                source: AssignSource::Literal("".into())
            }])
        );
    }

    #[test]
    fn syntax_error_has_position() {
        let e = parse_descriptor("<a()> ::- <b(>").unwrap_err();
        assert_eq!(e.line, 1);
        assert!(e.col > 0);
    }

    #[test]
    fn file_blocks_and_comments() {
        let text = "# header comment\n\
                    <a()> ::- <filledCell()>\n\
                    \n\
                    # another\n\
                    <b(V)> ::- <a()> (<filledCell(X)> {V:=X;})\n";
        let ds = parse_descriptor_file(text).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds[0].name, "a");
        assert_eq!(ds[1].name, "b");
    }

    #[test]
    fn lowercase_variable_rejected() {
        let e = parse_descriptor("<a(x)> ::- <b()>").unwrap_err();
        assert!(e.msg.contains("uppercase"), "{e}");
    }

    #[test]
    fn empty_recurrence_rejected() {
        let e = parse_descriptor("<a()> :: ()+ <endOfLine>").unwrap_err();
        assert!(e.msg.contains("empty group"), "{e}");
    }
}
