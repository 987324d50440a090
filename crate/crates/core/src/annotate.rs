//! The annotation stage: configured annotators scan filled cells and
//! assert semantic-category (and domain-label) instances into the fact
//! base. Matching happens on a cell's whitespace-collapsed word
//! sequence; spans snap outward to token boundaries so descriptor
//! adjacency over mixed tokens and annotations stays well-defined.

use std::collections::BTreeSet;

use regex::Regex;
use thiserror::Error;

use crate::griddoc::{collapse_ws, word_layout, GridDocument};
use crate::ontology::{Dim, FactBase, ObjectId, ObjectInstance, OnePos, Position, Taxonomy};

#[derive(Debug, Error)]
pub enum AnnotatorError {
    #[error("annotator target `{0}` is not declared in the object model")]
    UnknownTarget(String),
    #[error("annotator target `{0}` is a two-dimensional type")]
    TargetNotOneDim(String),
    #[error("invalid pattern for `{target}`: {source}")]
    BadPattern {
        target: String,
        #[source]
        source: regex::Error,
    },
    #[error("dictionary for `{0}` is empty")]
    EmptyDictionary(String),
    #[error("label `{0}` configured twice")]
    DuplicateLabel(String),
    #[error(transparent)]
    Fact(#[from] crate::ontology::FactError),
}

/// A compiled, ready-to-run annotator.
#[derive(Debug, Clone)]
pub enum Annotator {
    Regex {
        target: String,
        pattern: Regex,
    },
    Gazetteer {
        target: String,
        /// (lowercased match key split into words, canonical entry)
        entries: Vec<(Vec<String>, String)>,
    },
    Label {
        /// (normalized lowercased label text, target type)
        labels: Vec<(String, String)>,
    },
}

fn check_target(taxonomy: &Taxonomy, target: &str) -> Result<(), AnnotatorError> {
    if !taxonomy.has_entity(target) {
        return Err(AnnotatorError::UnknownTarget(target.to_string()));
    }
    if taxonomy.dim_of(target).ok().flatten() == Some(Dim::Two) {
        return Err(AnnotatorError::TargetNotOneDim(target.to_string()));
    }
    Ok(())
}

impl Annotator {
    pub fn regex(
        taxonomy: &Taxonomy,
        target: &str,
        pattern: &str,
    ) -> Result<Annotator, AnnotatorError> {
        check_target(taxonomy, target)?;
        let pattern = Regex::new(pattern).map_err(|source| AnnotatorError::BadPattern {
            target: target.to_string(),
            source,
        })?;
        Ok(Annotator::Regex {
            target: target.to_string(),
            pattern,
        })
    }

    /// Dictionary entries are whitespace-normalized; matching is
    /// case-insensitive and the canonical casing is kept as the
    /// annotation value.
    pub fn gazetteer<S: AsRef<str>>(
        taxonomy: &Taxonomy,
        target: &str,
        entries: &[S],
    ) -> Result<Annotator, AnnotatorError> {
        check_target(taxonomy, target)?;
        let mut seen = BTreeSet::new();
        let mut compiled = Vec::new();
        for e in entries {
            let canonical = collapse_ws(e.as_ref());
            if canonical.is_empty() {
                continue;
            }
            let key: Vec<String> = canonical
                .split_whitespace()
                .map(|w| w.to_lowercase())
                .collect();
            if seen.insert(key.clone()) {
                compiled.push((key, canonical));
            }
        }
        if compiled.is_empty() {
            return Err(AnnotatorError::EmptyDictionary(target.to_string()));
        }
        Ok(Annotator::Gazetteer {
            target: target.to_string(),
            entries: compiled,
        })
    }

    pub fn label(
        taxonomy: &Taxonomy,
        pairs: &[(String, String)],
    ) -> Result<Annotator, AnnotatorError> {
        let mut labels = Vec::new();
        for (text, target) in pairs {
            check_target(taxonomy, target)?;
            let key = normalize_label(text);
            if labels.iter().any(|(k, _)| *k == key) {
                return Err(AnnotatorError::DuplicateLabel(text.clone()));
            }
            labels.push((key, target.clone()));
        }
        Ok(Annotator::Label { labels })
    }
}

/// Label comparison ignores case and one trailing colon.
fn normalize_label(s: &str) -> String {
    let collapsed = collapse_ws(s);
    collapsed
        .strip_suffix(':')
        .unwrap_or(&collapsed)
        .to_lowercase()
}

/// One pending annotation; identical ones from different annotators
/// collapse before ids are assigned.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Annotation {
    pub cell: String,
    pub span: (i64, i64),
    pub target: String,
    pub value: String,
}

/// Word layout of a collapsed cell text together with the offsets of
/// each word in the space-joined string the regexes run on.
struct CellWords {
    /// (word, normalized start, normalized end, joined start, joined end)
    words: Vec<(String, i64, i64, usize, usize)>,
    joined: String,
}

fn cell_words(text: &str) -> CellWords {
    let layout = word_layout(text);
    let mut words = Vec::with_capacity(layout.len());
    let mut joined = String::new();
    for (word, start, end) in layout {
        if !joined.is_empty() {
            joined.push(' ');
        }
        let jstart = joined.chars().count();
        let jend = jstart + word.chars().count();
        joined.push_str(&word);
        words.push((word, start, end, jstart, jend));
    }
    CellWords { words, joined }
}

/// Maps a char range of the joined string to the normalized span of
/// the tokens it intersects. Ranges falling wholly between words yield
/// nothing.
fn snap_to_tokens(words: &CellWords, start: usize, end: usize) -> Option<(i64, i64)> {
    let mut lo = None;
    let mut hi = None;
    for (_, nstart, nend, jstart, jend) in &words.words {
        if start < *jend && end > *jstart {
            if lo.is_none() {
                lo = Some(*nstart);
            }
            hi = Some(*nend);
        }
    }
    Some((lo?, hi?))
}

fn run_annotator(annotator: &Annotator, cell_id: &str, text: &str, out: &mut Vec<Annotation>) {
    let words = cell_words(text);
    if words.words.is_empty() {
        return;
    }
    match annotator {
        Annotator::Regex { target, pattern } => {
            // Byte offsets from the regex are converted to char
            // offsets before snapping.
            let byte_to_char: Vec<usize> = {
                let mut map = vec![0usize; words.joined.len() + 1];
                for (ci, (bi, _)) in words.joined.char_indices().enumerate() {
                    map[bi] = ci;
                }
                map[words.joined.len()] = words.joined.chars().count();
                map
            };
            for m in pattern.find_iter(&words.joined) {
                if m.start() == m.end() {
                    continue;
                }
                let (cs, ce) = (byte_to_char[m.start()], byte_to_char[m.end()]);
                if let Some(span) = snap_to_tokens(&words, cs, ce) {
                    out.push(Annotation {
                        cell: cell_id.to_string(),
                        span,
                        target: target.clone(),
                        value: m.as_str().to_string(),
                    });
                }
            }
        }
        Annotator::Gazetteer { target, entries } => {
            let lowered: Vec<String> = words
                .words
                .iter()
                .map(|(w, ..)| w.to_lowercase())
                .collect();
            let mut i = 0;
            while i < lowered.len() {
                // Longest entry starting at word i wins; the scan then
                // resumes after it (leftmost-longest, non-overlapping).
                let mut best: Option<(usize, &str)> = None;
                for (key, canonical) in entries {
                    if key.len() > lowered.len() - i {
                        continue;
                    }
                    if lowered[i..i + key.len()] == key[..]
                        && best.is_none_or(|(len, _)| key.len() > len)
                    {
                        best = Some((key.len(), canonical));
                    }
                }
                match best {
                    Some((len, canonical)) => {
                        let start = words.words[i].1;
                        let end = words.words[i + len - 1].2;
                        out.push(Annotation {
                            cell: cell_id.to_string(),
                            span: (start, end),
                            target: target.clone(),
                            value: canonical.to_string(),
                        });
                        i += len;
                    }
                    None => i += 1,
                }
            }
        }
        Annotator::Label { labels } => {
            let key = normalize_label(text);
            for (label, target) in labels {
                if *label == key {
                    let start = words.words.first().unwrap().1;
                    let end = words.words.last().unwrap().2;
                    out.push(Annotation {
                        cell: cell_id.to_string(),
                        span: (start, end),
                        target: target.clone(),
                        value: text.to_string(),
                    });
                }
            }
        }
    }
}

/// Runs one annotator over one cell, returning pending annotations
/// without touching the fact base.
pub fn annotate_cell(annotator: &Annotator, cell_id: &str, text: &str) -> Vec<Annotation> {
    let mut out = Vec::new();
    run_annotator(annotator, cell_id, text, &mut out);
    out
}

/// Runs every annotator over every filled cell of the document,
/// deduplicates, and asserts the results. Ids are assigned after
/// dedup in a deterministic order, so the outcome is independent of
/// annotator order.
pub fn annotate_document(
    annotators: &[Annotator],
    doc: &GridDocument,
    taxonomy: &Taxonomy,
    fb: &mut FactBase,
) -> Result<usize, AnnotatorError> {
    let mut pending = BTreeSet::new();
    for cell in &doc.cells {
        let Some(text) = &cell.text else { continue };
        for annotator in annotators {
            for ann in annotate_cell(annotator, &cell.id, text) {
                pending.insert(ann);
            }
        }
    }
    let count = pending.len();
    for (i, ann) in pending.into_iter().enumerate() {
        let mut obj = ObjectInstance::new(format!("ann{i}"), ann.target.clone());
        // Bare label types may not declare a value attribute.
        let has_value = taxonomy
            .all_attributes(&ann.target)
            .map(|attrs| attrs.iter().any(|(n, _)| n == "value"))
            .unwrap_or(false);
        if has_value {
            obj = obj.with_attr("value", ann.value);
        }
        fb.assert_object(
            taxonomy,
            obj,
            Position::One {
                pos: OnePos {
                    start: ann.span.0,
                    end: ann.span.1,
                },
                cell: ObjectId::new(ann.cell),
            },
        )?;
    }
    Ok(count)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::griddoc::{parse_grid_document, tokenize};
    use crate::ontology::load_object_model;

    const EMAIL_PATTERN: &str = r"[A-Za-z0-9._%+-]+@[A-Za-z0-9.-]+\.[A-Za-z]{2,}";

    fn taxonomy() -> Taxonomy {
        load_object_model(
            "entity semanticCategory(value:string).\n\
             entity email isa semanticCategory.\n\
             entity date isa semanticCategory.\n\
             entity IndustryTerm isa semanticCategory.\n\
             entity domainObject.\n\
             entity eucv_label isa domainObject.\n\
             entity eucv_email_label isa eucv_label.\n",
        )
        .unwrap()
    }

    #[test]
    fn regex_email_over_single_token() {
        let t = taxonomy();
        let a = Annotator::regex(&t, "email", EMAIL_PATTERN).unwrap();
        let anns = annotate_cell(&a, "c0", "anna@w3.org");
        assert_eq!(anns.len(), 1);
        assert_eq!(anns[0].value, "anna@w3.org");
        assert_eq!(anns[0].span, (1, 12));
    }

    #[test]
    fn regex_no_match_no_facts() {
        let t = taxonomy();
        let a = Annotator::regex(&t, "email", EMAIL_PATTERN).unwrap();
        assert!(annotate_cell(&a, "c0", "no address here").is_empty());
    }

    #[test]
    fn regex_two_dates() {
        let t = taxonomy();
        let a = Annotator::regex(&t, "date", "[0-9]{4}").unwrap();
        let anns = annotate_cell(&a, "c0", "2001 - 2005");
        assert_eq!(anns.len(), 2);
        // "2001 - 2005" tokens: [1,5) [5,6) [6,10)
        assert_eq!(anns[0].span, (1, 5));
        assert_eq!(anns[0].value, "2001");
        assert_eq!(anns[1].span, (6, 10));
        assert_eq!(anns[1].value, "2005");
    }

    #[test]
    fn regex_span_snaps_to_whole_tokens() {
        let t = taxonomy();
        let a = Annotator::regex(&t, "date", "[0-9]{4}").unwrap();
        let anns = annotate_cell(&a, "c0", "born 12/03/1980 here");
        assert_eq!(anns.len(), 1);
        // The match covers part of token "12/03/1980" at [5,15).
        assert_eq!(anns[0].span, (5, 15));
        assert_eq!(anns[0].value, "1980");
    }

    #[test]
    fn bad_pattern_rejected_at_load() {
        let t = taxonomy();
        assert!(matches!(
            Annotator::regex(&t, "email", "(unclosed"),
            Err(AnnotatorError::BadPattern { .. })
        ));
    }

    #[test]
    fn gazetteer_multiword_and_casing() {
        let t = taxonomy();
        let a = Annotator::gazetteer(&t, "IndustryTerm", &["java", "project management"]).unwrap();
        let anns = annotate_cell(&a, "c0", "Java and project management tasks");
        assert_eq!(anns.len(), 2);
        assert_eq!(anns[0].value, "java");
        assert_eq!(anns[1].value, "project management");
        // Java [1,5) and [5,8) project [8,15) management [15,25)
        assert_eq!(anns[0].span, (1, 5));
        assert_eq!(anns[1].span, (8, 25));
    }

    #[test]
    fn gazetteer_longest_wins() {
        let t = taxonomy();
        let a = Annotator::gazetteer(&t, "IndustryTerm", &["data", "data mining"]).unwrap();
        let anns = annotate_cell(&a, "c0", "data mining");
        assert_eq!(anns.len(), 1);
        assert_eq!(anns[0].value, "data mining");
    }

    #[test]
    fn gazetteer_empty_dictionary_rejected() {
        let t = taxonomy();
        let entries: [&str; 0] = [];
        assert!(matches!(
            Annotator::gazetteer(&t, "IndustryTerm", &entries),
            Err(AnnotatorError::EmptyDictionary(_))
        ));
    }

    #[test]
    fn label_matches_whole_cell_modulo_colon() {
        let t = taxonomy();
        let a = Annotator::label(&t, &[("E-mail".into(), "eucv_email_label".into())]).unwrap();
        let anns = annotate_cell(&a, "c0", "E-mail:");
        assert_eq!(anns.len(), 1);
        assert_eq!(anns[0].target, "eucv_email_label");

        assert!(annotate_cell(&a, "c0", "Email address and phone").is_empty());
    }

    #[test]
    fn duplicate_label_rejected() {
        let t = taxonomy();
        let err = Annotator::label(
            &t,
            &[
                ("Name".into(), "eucv_email_label".into()),
                ("name:".into(), "eucv_label".into()),
            ],
        )
        .unwrap_err();
        assert!(matches!(err, AnnotatorError::DuplicateLabel(_)));
    }

    #[test]
    fn document_level_dedup() {
        let t = taxonomy();
        let doc = parse_grid_document(
            br#"{"doc_id":"d","cells":[{"x":0,"y":0,"x2":1,"y2":1,"text":"anna@w3.org"}]}"#,
        )
        .unwrap();
        let mut fb = FactBase::new();
        tokenize(&doc, &t, &mut fb).unwrap();
        // Two annotators recognizing the same thing yield one fact.
        let annotators = vec![
            Annotator::regex(&t, "email", EMAIL_PATTERN).unwrap(),
            Annotator::gazetteer(&t, "email", &["anna@w3.org"]).unwrap(),
        ];
        let n = annotate_document(&annotators, &doc, &t, &mut fb).unwrap();
        assert_eq!(n, 1);
    }

    #[test]
    fn zero_annotators_leave_fb_unchanged() {
        let t = taxonomy();
        let doc = parse_grid_document(
            br#"{"doc_id":"d","cells":[{"x":0,"y":0,"x2":1,"y2":1,"text":"hello"}]}"#,
        )
        .unwrap();
        let mut fb = FactBase::new();
        tokenize(&doc, &t, &mut fb).unwrap();
        let before = fb.len();
        annotate_document(&[], &doc, &t, &mut fb).unwrap();
        assert_eq!(fb.len(), before);
    }

    #[test]
    fn gazetteer_agrees_with_bruteforce_scanner() {
        use rand::{Rng, SeedableRng};
        let t = taxonomy();
        let vocab = ["java", "sql", "data", "mining", "web", "design", "and", "x"];
        let dict = ["java", "data mining", "web design", "sql"];
        let a = Annotator::gazetteer(&t, "IndustryTerm", &dict).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let n = rng.gen_range(0..10);
            let words: Vec<&str> =
                (0..n).map(|_| vocab[rng.gen_range(0..vocab.len())]).collect();
            let text = words.join(" ");
            let got: Vec<_> = annotate_cell(&a, "c0", &text)
                .into_iter()
                .map(|ann| (ann.span, ann.value))
                .collect();
            // Independent scan: at each token, try all entries, take
            // the longest, skip past it.
            let layout = word_layout(&text);
            let mut expect = Vec::new();
            let mut i = 0;
            while i < layout.len() {
                let mut best: Option<usize> = None;
                for entry in dict {
                    let parts: Vec<&str> = entry.split(' ').collect();
                    if i + parts.len() <= layout.len()
                        && layout[i..i + parts.len()]
                            .iter()
                            .zip(&parts)
                            .all(|((w, _, _), p)| w.eq_ignore_ascii_case(p))
                        && best.is_none_or(|b| parts.len() > b)
                    {
                        best = Some(parts.len());
                    }
                }
                if let Some(len) = best {
                    let entry = dict
                        .iter()
                        .find(|e| {
                            let parts: Vec<&str> = e.split(' ').collect();
                            parts.len() == len
                                && layout[i..i + len]
                                    .iter()
                                    .zip(&parts)
                                    .all(|((w, _, _), p)| w.eq_ignore_ascii_case(p))
                        })
                        .unwrap();
                    expect.push(((layout[i].1, layout[i + len - 1].2), entry.to_string()));
                    i += len;
                } else {
                    i += 1;
                }
            }
            assert_eq!(got, expect, "text: {text}");
        }
    }
}
