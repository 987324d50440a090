//! A direct interpreter for descriptors, used as an independent check
//! on the compiled rules: it walks the same automaton over the fact
//! base by explicit state-set propagation and enumerates every
//! complete configuration. It shares nothing with the compiler except
//! the AST and the fact base.

use std::collections::{BTreeMap, BTreeSet};

use super::{Match, MatchExtent};
use crate::dscript::{
    ActionStatement, AssignSource, Axis, BodyElement, ConceptMatch, LinkedDescriptor,
};
use crate::ontology::{AttrType, FactBase, ObjectId, Taxonomy};
use crate::value::Value;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct MState {
    env: BTreeMap<String, Value>,
    cur: Option<MatchExtent>,
    relaxed: bool,
}

struct Ctx<'a> {
    taxonomy: &'a Taxonomy,
    fb: &'a FactBase,
    axis: Axis,
}

impl Ctx<'_> {
    fn is_subtype(&self, a: &str, b: &str) -> bool {
        self.taxonomy.subtype_of(a, b).unwrap_or(false)
    }

    /// Values for the element's variables, read positionally against
    /// the element type's attribute list (a prefix of the object's).
    fn bind_vars(
        &self,
        c: &ConceptMatch,
        obj_type: &str,
        obj_id: &ObjectId,
    ) -> Option<Vec<(String, Value)>> {
        let _ = obj_type;
        let attrs = self.taxonomy.all_attributes(&c.type_name).ok()?;
        if c.vars.len() > attrs.len() {
            return None;
        }
        let obj = self.fb.object(obj_id)?;
        Some(
            c.vars
                .iter()
                .zip(&attrs)
                .map(|(v, (name, _))| (v.clone(), obj.attrs[name].clone()))
                .collect(),
        )
    }
}

fn apply_statements(env: &mut BTreeMap<String, Value>, stmts: &[ActionStatement]) {
    for stmt in stmts {
        match stmt {
            ActionStatement::Assign { target, source } => {
                let value = match source {
                    AssignSource::Var(v) => env.get(v).cloned().unwrap_or_else(|| Value::str("")),
                    AssignSource::Literal(s) => Value::str(s.clone()),
                };
                env.insert(target.clone(), value);
            }
            ActionStatement::InitList { target } => {
                env.insert(target.clone(), Value::List(Vec::new()));
            }
            ActionStatement::Append { target, source } => {
                let elem = match env.get(source) {
                    Some(Value::Str(s)) => s.clone(),
                    _ => String::new(),
                };
                match env.get_mut(target) {
                    Some(Value::List(items)) => items.push(elem),
                    _ => panic!("append to uninitialized list `{target}`"),
                }
            }
        }
    }
}

/// All ways one concept can extend one state.
fn consume_concept(ctx: &Ctx, c: &ConceptMatch, state: &MState, out: &mut Vec<MState>) {
    match ctx.axis {
        Axis::Horizontal | Axis::Vertical => {
            for obj in ctx.fb.objects() {
                if !ctx.is_subtype(&obj.type_name, &c.type_name) {
                    continue;
                }
                let Some(pos) = ctx.fb.bi_position(&obj.id) else { continue };
                let next_extent = match &state.cur {
                    None => MatchExtent::Bi(*pos),
                    Some(MatchExtent::Bi(cur)) => {
                        let ok = match ctx.axis {
                            Axis::Horizontal => {
                                let adj = if state.relaxed {
                                    pos.xstart >= cur.xend
                                } else {
                                    pos.xstart == cur.xend
                                };
                                adj && pos.ystart == cur.ystart && pos.yend == cur.yend
                            }
                            Axis::Vertical => {
                                let adj = if state.relaxed {
                                    pos.ystart >= cur.yend
                                } else {
                                    pos.ystart == cur.yend
                                };
                                adj && pos.xstart == cur.xstart && pos.xend == cur.xend
                            }
                            Axis::OneDim => unreachable!(),
                        };
                        if !ok {
                            continue;
                        }
                        let mut grown = *cur;
                        match ctx.axis {
                            Axis::Horizontal => grown.xend = pos.xend,
                            Axis::Vertical => grown.yend = pos.yend,
                            Axis::OneDim => unreachable!(),
                        }
                        MatchExtent::Bi(grown)
                    }
                    Some(MatchExtent::One { .. }) => unreachable!("axis mismatch"),
                };
                let Some(bindings) = ctx.bind_vars(c, &obj.type_name, &obj.id) else {
                    continue;
                };
                let mut env = state.env.clone();
                env.extend(bindings);
                out.push(MState {
                    env,
                    cur: Some(next_extent),
                    relaxed: false,
                });
            }
        }
        Axis::OneDim => {
            for obj in ctx.fb.objects() {
                if !ctx.is_subtype(&obj.type_name, &c.type_name) {
                    continue;
                }
                let Some(pos) = ctx.fb.one_position(&obj.id) else { continue };
                let Some(cell) = ctx.fb.cell_of(&obj.id) else { continue };
                let next_extent = match &state.cur {
                    None => MatchExtent::One {
                        cell: cell.clone(),
                        start: pos.start,
                        end: pos.end,
                    },
                    Some(MatchExtent::One {
                        cell: anchor,
                        start,
                        end,
                    }) => {
                        if cell != anchor {
                            continue;
                        }
                        let adj = if state.relaxed {
                            pos.start >= *end
                        } else {
                            pos.start == *end
                        };
                        if !adj {
                            continue;
                        }
                        MatchExtent::One {
                            cell: anchor.clone(),
                            start: *start,
                            end: pos.end,
                        }
                    }
                    Some(MatchExtent::Bi(_)) => unreachable!("axis mismatch"),
                };
                let Some(bindings) = ctx.bind_vars(c, &obj.type_name, &obj.id) else {
                    continue;
                };
                let mut env = state.env.clone();
                env.extend(bindings);
                out.push(MState {
                    env,
                    cur: Some(next_extent),
                    relaxed: false,
                });
            }
        }
    }
}

fn consume_contains(
    ctx: &Ctx,
    outer: &ConceptMatch,
    inner: &ConceptMatch,
    state: &MState,
    out: &mut Vec<MState>,
) {
    // Enumerated pairwise rather than via consume_concept: the outer
    // object's id is needed for the containment test.
    for obj in ctx.fb.objects() {
        if !ctx.is_subtype(&obj.type_name, &outer.type_name) {
            continue;
        }
        let Some(pos) = ctx.fb.bi_position(&obj.id) else { continue };
        let ok = match &state.cur {
            None => true,
            Some(MatchExtent::Bi(cur)) => match ctx.axis {
                Axis::Horizontal => {
                    let adj = if state.relaxed {
                        pos.xstart >= cur.xend
                    } else {
                        pos.xstart == cur.xend
                    };
                    adj && pos.ystart == cur.ystart && pos.yend == cur.yend
                }
                Axis::Vertical => {
                    let adj = if state.relaxed {
                        pos.ystart >= cur.yend
                    } else {
                        pos.ystart == cur.yend
                    };
                    adj && pos.xstart == cur.xstart && pos.xend == cur.xend
                }
                Axis::OneDim => unreachable!(),
            },
            Some(MatchExtent::One { .. }) => unreachable!("axis mismatch"),
        };
        if !ok {
            continue;
        }
        let next_extent = match &state.cur {
            None => MatchExtent::Bi(*pos),
            Some(MatchExtent::Bi(cur)) => {
                let mut grown = *cur;
                match ctx.axis {
                    Axis::Horizontal => grown.xend = pos.xend,
                    Axis::Vertical => grown.yend = pos.yend,
                    Axis::OneDim => unreachable!(),
                }
                MatchExtent::Bi(grown)
            }
            _ => unreachable!(),
        };
        let Some(outer_bind) = ctx.bind_vars(outer, &obj.type_name, &obj.id) else {
            continue;
        };
        for inner_obj in ctx.fb.objects() {
            if !ctx.is_subtype(&inner_obj.type_name, &inner.type_name) {
                continue;
            }
            if ctx.fb.cell_of(&inner_obj.id) != Some(&obj.id) {
                continue;
            }
            let Some(inner_bind) = ctx.bind_vars(inner, &inner_obj.type_name, &inner_obj.id)
            else {
                continue;
            };
            let mut env = state.env.clone();
            env.extend(outer_bind.iter().cloned());
            env.extend(inner_bind);
            out.push(MState {
                env,
                cur: Some(next_extent.clone()),
                relaxed: false,
            });
        }
    }
}

fn step_element(ctx: &Ctx, e: &BodyElement, states: Vec<MState>) -> Vec<MState> {
    let mut out = Vec::new();
    match e {
        BodyElement::Concept(c) => {
            for s in &states {
                consume_concept(ctx, c, s, &mut out);
            }
        }
        BodyElement::Contains { outer, inner } => {
            for s in &states {
                consume_contains(ctx, outer, inner, s, &mut out);
            }
        }
        BodyElement::Action(stmts) => {
            for mut s in states {
                apply_statements(&mut s.env, stmts);
                out.push(s);
            }
            return dedup(out);
        }
        BodyElement::Skip => {
            for mut s in states {
                s.relaxed = true;
                out.push(s);
            }
            return dedup(out);
        }
        BodyElement::Group(es) => return run_seq(ctx, es, states),
        BodyElement::Recurrence(es) => {
            let mut seen: BTreeSet<MState> = BTreeSet::new();
            let mut frontier = run_seq(ctx, es, states);
            while !frontier.is_empty() {
                frontier.retain(|s| !seen.contains(s));
                seen.extend(frontier.iter().cloned());
                if frontier.is_empty() {
                    break;
                }
                frontier = run_seq(ctx, es, frontier);
            }
            return seen.into_iter().collect();
        }
    }
    dedup(out)
}

fn dedup(states: Vec<MState>) -> Vec<MState> {
    let set: BTreeSet<MState> = states.into_iter().collect();
    set.into_iter().collect()
}

fn run_seq(ctx: &Ctx, elems: &[BodyElement], mut states: Vec<MState>) -> Vec<MState> {
    for e in elems {
        if states.is_empty() {
            return states;
        }
        states = step_element(ctx, e, states);
    }
    states
}

/// Enumerates every complete configuration of the descriptor over the
/// fact base and returns the raw (uncanonicalized) matches. Nothing is
/// asserted.
pub fn match_direct(
    linked: &LinkedDescriptor,
    taxonomy: &Taxonomy,
    fb: &FactBase,
) -> Vec<Match> {
    let d = &linked.descriptor;
    let ctx = Ctx {
        taxonomy,
        fb,
        axis: d.axis,
    };
    let mut env = BTreeMap::new();
    for (p, ty) in &linked.param_types {
        let v = match ty {
            AttrType::StrList => Value::List(Vec::new()),
            _ => Value::str(""),
        };
        env.insert(p.clone(), v);
    }
    let init = MState {
        env,
        cur: None,
        relaxed: false,
    };
    let complete = run_seq(&ctx, &d.body, vec![init]);
    let mut out = Vec::new();
    for s in complete {
        let Some(extent) = s.cur else { continue };
        let attrs = linked
            .param_types
            .iter()
            .map(|(p, ty)| {
                s.env.get(p).cloned().unwrap_or(match ty {
                    AttrType::StrList => Value::List(Vec::new()),
                    _ => Value::str(""),
                })
            })
            .collect();
        out.push(Match { extent, attrs });
    }
    out
}

/// Deterministic selection among overlapping derivations: per starting
/// point keep the farthest-reaching matches, among those the ones with
/// the longest list attributes, then drop duplicates and sort.
pub fn canonicalize(
    matches: Vec<Match>,
    axis: Axis,
    param_types: &[(String, AttrType)],
) -> Vec<Match> {
    let mut groups: BTreeMap<(String, i64, i64), Vec<Match>> = BTreeMap::new();
    for m in matches {
        let (cell, a, b) = m.extent.start_key();
        let key = (
            cell.map(|c| c.as_str().to_string()).unwrap_or_default(),
            a,
            b,
        );
        groups.entry(key).or_default().push(m);
    }
    let list_lengths = |m: &Match| -> Vec<usize> {
        m.attrs
            .iter()
            .zip(param_types)
            .filter(|(_, (_, ty))| *ty == AttrType::StrList)
            .map(|(v, _)| match v {
                Value::List(items) => items.len(),
                _ => 0,
            })
            .collect()
    };
    let mut out = Vec::new();
    for (_, group) in groups {
        let max_end = group.iter().map(|m| m.extent.end_key(axis)).max().unwrap();
        let at_end: Vec<Match> = group
            .into_iter()
            .filter(|m| m.extent.end_key(axis) == max_end)
            .collect();
        let max_lists = at_end.iter().map(|m| list_lengths(m)).max().unwrap();
        let mut kept: Vec<Match> = at_end
            .into_iter()
            .filter(|m| list_lengths(m) == max_lists)
            .collect();
        kept.sort();
        kept.dedup();
        out.extend(kept);
    }
    out.sort();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dscript::{link_descriptors, parse_descriptor};
    use crate::ontology::{
        load_object_model, BiPos, ObjectInstance, OnePos, Position,
    };

    fn taxonomy_with(extra: &str) -> Taxonomy {
        load_object_model(&format!(
            "entity semanticCategory(value:string).\n\
             entity email isa semanticCategory.\n\
             entity IndustryTerm isa semanticCategory.\n\
             entity domainObject.\n\
             entity eucv_label isa domainObject.\n\
             entity eucv_email_label isa eucv_label.\n\
             {extra}"
        ))
        .unwrap()
    }

    fn bi(x: i64, y: i64, x2: i64, y2: i64) -> Position {
        Position::Bi(BiPos {
            xstart: x,
            ystart: y,
            xend: x2,
            yend: y2,
        })
    }

    fn one(cell: &str, s: i64, e: i64) -> Position {
        Position::One {
            pos: OnePos { start: s, end: e },
            cell: ObjectId::new(cell),
        }
    }

    /// The worked email example: label box at (0,8,1,9), value cell at
    /// (1,8,2,9) containing an email annotation.
    fn email_fb(taxonomy: &Taxonomy) -> FactBase {
        let mut fb = FactBase::new();
        fb.assert_object(
            taxonomy,
            ObjectInstance::new("box1", "eucv_email_label_box"),
            bi(0, 8, 1, 9),
        )
        .unwrap();
        fb.assert_object(
            taxonomy,
            ObjectInstance::new("filled19", "filledCell").with_attr("value", "anna@w3.org"),
            bi(1, 8, 2, 9),
        )
        .unwrap();
        fb.assert_object(
            taxonomy,
            ObjectInstance::new("annS2", "email").with_attr("value", "anna@w3.org"),
            one("filled19", 1, 12),
        )
        .unwrap();
        fb
    }

    fn linked(taxonomy: &mut Taxonomy, text: &str) -> LinkedDescriptor {
        let d = parse_descriptor(text).unwrap();
        let plan = link_descriptors(vec![d], taxonomy).unwrap();
        plan.descriptors.into_iter().next().unwrap()
    }

    #[test]
    fn candidate_email_match() {
        let mut t = taxonomy_with("entity eucv_email_label_box isa biDimObject.\n");
        let l = linked(
            &mut t,
            "<candidateEmail(E)> ::- <eucv_email_label_box()> \
             (<filledCell(X)> CONTAINS <email(X)> {E:=X;})",
        );
        let fb = email_fb(&t);
        let matches = canonicalize(match_direct(&l, &t, &fb), Axis::Horizontal, &l.param_types);
        assert_eq!(matches.len(), 1);
        assert_eq!(matches[0].attrs, vec![Value::str("anna@w3.org")]);
        assert_eq!(
            matches[0].extent,
            MatchExtent::Bi(BiPos {
                xstart: 0,
                ystart: 8,
                xend: 2,
                yend: 9
            })
        );
    }

    #[test]
    fn no_label_box_no_match() {
        let mut t = taxonomy_with("entity eucv_email_label_box isa biDimObject.\n");
        let l = linked(
            &mut t,
            "<candidateEmail(E)> ::- <eucv_email_label_box()> \
             (<filledCell(X)> CONTAINS <email(X)> {E:=X;})",
        );
        let mut fb = FactBase::new();
        fb.assert_object(
            &t,
            ObjectInstance::new("filled19", "filledCell").with_attr("value", "anna@w3.org"),
            bi(1, 8, 2, 9),
        )
        .unwrap();
        fb.assert_object(
            &t,
            ObjectInstance::new("annS2", "email").with_attr("value", "anna@w3.org"),
            one("filled19", 1, 12),
        )
        .unwrap();
        assert!(match_direct(&l, &t, &fb).is_empty());
    }

    #[test]
    fn list_of_skills_collects_terms_across_noise() {
        let mut t = taxonomy_with("");
        let l = linked(
            &mut t,
            "<list_of_skills(S)> :: {S:=[];} <startOfLine> ... \
             (<IndustryTerm(S1)> {S&=S1;} ...)+ <endOfLine>",
        );
        let mut fb = FactBase::new();
        fb.assert_object(
            &t,
            ObjectInstance::new("c0", "filledCell").with_attr("value", "knows java and sql well"),
            bi(1, 0, 2, 1),
        )
        .unwrap();
        // sol knows java and sql well eol
        // 0..1 1..6  6..10 10..13 13..16 16..20 20..21
        let objs: Vec<(&str, &str, Option<&str>, i64, i64)> = vec![
            ("sol0", "startOfLine", None, 0, 1),
            ("tk0", "token", Some("knows"), 1, 6),
            ("tk1", "token", Some("java"), 6, 10),
            ("tk2", "token", Some("and"), 10, 13),
            ("tk3", "token", Some("sql"), 13, 16),
            ("tk4", "token", Some("well"), 16, 20),
            ("eol0", "endOfLine", None, 20, 21),
            ("ann0", "IndustryTerm", Some("java"), 6, 10),
            ("ann1", "IndustryTerm", Some("sql"), 13, 16),
        ];
        for (id, ty, value, s, e) in objs {
            let mut obj = ObjectInstance::new(id, ty);
            if let Some(v) = value {
                obj = obj.with_attr("value", v);
            }
            fb.assert_object(&t, obj, one("c0", s, e)).unwrap();
        }
        let matches = canonicalize(match_direct(&l, &t, &fb), Axis::OneDim, &l.param_types);
        assert_eq!(matches.len(), 1);
        assert_eq!(
            matches[0].attrs,
            vec![Value::List(vec!["java".into(), "sql".into()])]
        );
        assert_eq!(
            matches[0].extent,
            MatchExtent::One {
                cell: ObjectId::new("c0"),
                start: 0,
                end: 21
            }
        );
    }

    #[test]
    fn canonicalize_prefers_longer_lists_then_dedups() {
        let ext = MatchExtent::One {
            cell: ObjectId::new("c0"),
            start: 0,
            end: 9,
        };
        let param_types = vec![("S".to_string(), AttrType::StrList)];
        let m = |items: &[&str]| Match {
            extent: ext.clone(),
            attrs: vec![Value::List(items.iter().map(|s| s.to_string()).collect())],
        };
        let out = canonicalize(
            vec![m(&["java"]), m(&["java", "sql"]), m(&["java", "sql"])],
            Axis::OneDim,
            &param_types,
        );
        assert_eq!(out, vec![m(&["java", "sql"])]);
    }

    #[test]
    fn canonicalize_keeps_distinct_starts() {
        let param_types = vec![("V".to_string(), AttrType::Str)];
        let m = |x: i64| Match {
            extent: MatchExtent::Bi(BiPos {
                xstart: x,
                ystart: 0,
                xend: x + 2,
                yend: 1,
            }),
            attrs: vec![Value::str("v")],
        };
        let out = canonicalize(vec![m(0), m(5)], Axis::Horizontal, &param_types);
        assert_eq!(out.len(), 2);
    }

    #[test]
    fn single_match_unchanged() {
        let param_types = vec![("V".to_string(), AttrType::Str)];
        let only = Match {
            extent: MatchExtent::Bi(BiPos {
                xstart: 0,
                ystart: 0,
                xend: 1,
                yend: 1,
            }),
            attrs: vec![Value::str("v")],
        };
        assert_eq!(
            canonicalize(vec![only.clone()], Axis::Horizontal, &param_types),
            vec![only]
        );
    }
}
