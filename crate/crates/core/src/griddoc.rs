//! Grid-document ingestion, label-driven refinement, and tokenization.
//!
//! A grid document is a set of non-overlapping rectangular cells in
//! half-open grid coordinates. Two ingesters exist: a JSON grid file
//! (`{"doc_id": ..., "cells": [{x, y, x2, y2, text?}, ...]}`) and a
//! plain-text reader that splits each line into a left and a right
//! cell at a fixed column. Refinement merges adjacent cells whose
//! concatenated text forms a known label; tokenization turns each cell
//! into delimiter and token facts on a normalized coordinate line
//! where whitespace is elided and tokens follow one another.

use serde::Deserialize;
use thiserror::Error;

use crate::ontology::{
    BiPos, FactBase, ObjectId, ObjectInstance, OnePos, Position, Taxonomy, EMPTY_CELL, END_OF_LINE,
    FILLED_CELL, START_OF_LINE, TOKEN,
};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cell {
    pub id: String,
    pub xstart: i64,
    pub ystart: i64,
    pub xend: i64,
    pub yend: i64,
    /// Whitespace-collapsed content; `None` marks an empty cell.
    pub text: Option<String>,
}

impl Cell {
    pub fn is_filled(&self) -> bool {
        self.text.is_some()
    }

    pub fn bi_pos(&self) -> BiPos {
        BiPos {
            xstart: self.xstart,
            ystart: self.ystart,
            xend: self.xend,
            yend: self.yend,
        }
    }

    fn overlaps(&self, other: &Cell) -> bool {
        self.xstart < other.xend
            && other.xstart < self.xend
            && self.ystart < other.yend
            && other.ystart < self.yend
    }
}

#[derive(Debug, Clone, Default)]
pub struct GridDocument {
    pub doc_id: String,
    pub cells: Vec<Cell>,
}

impl GridDocument {
    pub fn covered_area(&self) -> i64 {
        self.cells
            .iter()
            .map(|c| (c.xend - c.xstart) * (c.yend - c.ystart))
            .sum()
    }
}

#[derive(Debug, Error)]
pub enum GridError {
    #[error("malformed grid file: {0}")]
    Malformed(#[from] serde_json::Error),
    #[error("cell at ({0},{1},{2},{3}) has a degenerate or negative extent")]
    BadExtent(i64, i64, i64, i64),
    #[error("cells ({0},{1},{2},{3}) and ({4},{5},{6},{7}) overlap")]
    Overlap(i64, i64, i64, i64, i64, i64, i64, i64),
    #[error("split column must be positive")]
    BadSplitColumn,
}

/// Collapses runs of whitespace to single spaces and trims the ends.
pub fn collapse_ws(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

#[derive(Deserialize)]
struct GridFile {
    doc_id: String,
    cells: Vec<CellFile>,
}

#[derive(Deserialize)]
struct CellFile {
    x: i64,
    y: i64,
    x2: i64,
    y2: i64,
    #[serde(default)]
    text: Option<String>,
}

fn finish_document(doc_id: String, mut cells: Vec<Cell>) -> Result<GridDocument, GridError> {
    for c in &cells {
        if c.xstart < 0 || c.ystart < 0 || c.xstart >= c.xend || c.ystart >= c.yend {
            return Err(GridError::BadExtent(c.xstart, c.ystart, c.xend, c.yend));
        }
    }
    cells.sort_by_key(|c| (c.ystart, c.xstart, c.yend, c.xend));
    for i in 0..cells.len() {
        for j in i + 1..cells.len() {
            if cells[i].overlaps(&cells[j]) {
                let (a, b) = (&cells[i], &cells[j]);
                return Err(GridError::Overlap(
                    a.xstart, a.ystart, a.xend, a.yend, b.xstart, b.ystart, b.xend, b.yend,
                ));
            }
        }
    }
    for (i, c) in cells.iter_mut().enumerate() {
        c.id = format!("c{i}");
    }
    Ok(GridDocument { doc_id, cells })
}

/// Reads the JSON grid-document format. Cells get row-major ids;
/// whitespace-only text counts as empty.
pub fn parse_grid_document(input: &[u8]) -> Result<GridDocument, GridError> {
    let file: GridFile = serde_json::from_slice(input)?;
    let cells = file
        .cells
        .into_iter()
        .map(|c| {
            let text = c.text.map(|t| collapse_ws(&t)).filter(|t| !t.is_empty());
            Cell {
                id: String::new(),
                xstart: c.x,
                ystart: c.y,
                xend: c.x2,
                yend: c.y2,
                text,
            }
        })
        .collect();
    finish_document(file.doc_id, cells)
}

/// Emulates a two-column layout over plain text: line `i` becomes a
/// left cell `(0,i,1,i+1)` holding characters `[0, split_column)` and a
/// right cell `(1,i,2,i+1)` holding the rest. Whitespace-only segments
/// become empty cells.
pub fn parse_two_column_text(
    doc_id: &str,
    text: &str,
    split_column: usize,
) -> Result<GridDocument, GridError> {
    if split_column == 0 {
        return Err(GridError::BadSplitColumn);
    }
    let mut cells = Vec::new();
    for (row, line) in text.lines().enumerate() {
        let row = row as i64;
        let chars: Vec<char> = line.chars().collect();
        let split = split_column.min(chars.len());
        let left: String = chars[..split].iter().collect();
        let right: String = chars[split..].iter().collect();
        for (x, segment) in [(0, left), (1, right)] {
            let collapsed = collapse_ws(&segment);
            cells.push(Cell {
                id: String::new(),
                xstart: x,
                ystart: row,
                xend: x + 1,
                yend: row + 1,
                text: (!collapsed.is_empty()).then_some(collapsed),
            });
        }
    }
    finish_document(doc_id.to_string(), cells)
}

/// Merges edge-adjacent filled cells whose concatenated text matches a
/// lexicon label that neither part matches alone (a label split across
/// two cells by the upstream grid). Runs to a fixpoint; each merge
/// strictly decreases the cell count, so it terminates.
pub fn refine_grid(doc: &GridDocument, lexicon: &[String]) -> GridDocument {
    let in_lexicon = |s: &str| lexicon.iter().any(|l| l == s);
    let mut cells = doc.cells.clone();
    loop {
        cells.sort_by_key(|c| (c.ystart, c.xstart, c.yend, c.xend));
        let mut merged: Option<(usize, usize, Cell)> = None;
        'scan: for i in 0..cells.len() {
            let a = &cells[i];
            let Some(a_text) = &a.text else { continue };
            if in_lexicon(a_text) {
                continue;
            }
            for (j, b) in cells.iter().enumerate() {
                if i == j {
                    continue;
                }
                let Some(b_text) = &b.text else { continue };
                if in_lexicon(b_text) {
                    continue;
                }
                let horizontal =
                    a.xend == b.xstart && a.ystart == b.ystart && a.yend == b.yend;
                let vertical = a.yend == b.ystart && a.xstart == b.xstart && a.xend == b.xend;
                if !horizontal && !vertical {
                    continue;
                }
                let joined = format!("{a_text} {b_text}");
                if !in_lexicon(&joined) {
                    continue;
                }
                merged = Some((
                    i,
                    j,
                    Cell {
                        id: a.id.clone(),
                        xstart: a.xstart,
                        ystart: a.ystart,
                        xend: b.xend,
                        yend: b.yend,
                        text: Some(joined),
                    },
                ));
                break 'scan;
            }
        }
        match merged {
            Some((i, j, cell)) => {
                let (hi, lo) = if i > j { (i, j) } else { (j, i) };
                cells.remove(hi);
                cells.remove(lo);
                cells.push(cell);
            }
            None => break,
        }
    }
    cells.sort_by_key(|c| (c.ystart, c.xstart, c.yend, c.xend));
    GridDocument {
        doc_id: doc.doc_id.clone(),
        cells,
    }
}

/// Splits a collapsed cell text into words with their normalized
/// half-open positions: the start-of-line delimiter occupies `[0,1)`,
/// words follow contiguously, and end-of-line takes the final unit.
pub fn word_layout(text: &str) -> Vec<(String, i64, i64)> {
    let mut out = Vec::new();
    let mut pos = 1i64;
    for word in text.split_whitespace() {
        let len = word.chars().count() as i64;
        out.push((word.to_string(), pos, pos + len));
        pos += len;
    }
    out
}

/// Materializes the document in the fact base: one `filledCell` or
/// `emptyCell` object per cell, and for each filled cell the
/// `startOfLine`, `token`..., `endOfLine` chain in normalized
/// coordinates, each belonging to its cell.
pub fn tokenize(
    doc: &GridDocument,
    taxonomy: &Taxonomy,
    fb: &mut FactBase,
) -> Result<(), crate::ontology::FactError> {
    let mut one_dim_counter = 0usize;
    for cell in &doc.cells {
        let cell_id = ObjectId::new(cell.id.clone());
        let obj = match &cell.text {
            Some(text) => {
                ObjectInstance::new(cell.id.clone(), FILLED_CELL).with_attr("value", text.clone())
            }
            None => ObjectInstance::new(cell.id.clone(), EMPTY_CELL),
        };
        fb.assert_object(taxonomy, obj, Position::Bi(cell.bi_pos()))?;

        let Some(text) = &cell.text else { continue };
        let words = word_layout(text);
        let line_end = words.last().map(|(_, _, e)| *e).unwrap_or(1);

        let mut next_id = |prefix: &str| {
            let id = format!("{prefix}{one_dim_counter}");
            one_dim_counter += 1;
            id
        };
        fb.assert_object(
            taxonomy,
            ObjectInstance::new(next_id("sol"), START_OF_LINE),
            Position::One {
                pos: OnePos { start: 0, end: 1 },
                cell: cell_id.clone(),
            },
        )?;
        for (word, start, end) in &words {
            fb.assert_object(
                taxonomy,
                ObjectInstance::new(next_id("tk"), TOKEN).with_attr("value", word.clone()),
                Position::One {
                    pos: OnePos {
                        start: *start,
                        end: *end,
                    },
                    cell: cell_id.clone(),
                },
            )?;
        }
        fb.assert_object(
            taxonomy,
            ObjectInstance::new(next_id("eol"), END_OF_LINE),
            Position::One {
                pos: OnePos {
                    start: line_end,
                    end: line_end + 1,
                },
                cell: cell_id.clone(),
            },
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cell(x: i64, y: i64, x2: i64, y2: i64, text: &str) -> Cell {
        Cell {
            id: String::new(),
            xstart: x,
            ystart: y,
            xend: x2,
            yend: y2,
            text: (!text.is_empty()).then(|| text.to_string()),
        }
    }

    #[test]
    fn parse_grid_single_cell() {
        let doc = parse_grid_document(
            br#"{"doc_id":"cv1","cells":[{"x":1,"y":8,"x2":2,"y2":9,"text":"anna@w3.org"}]}"#,
        )
        .unwrap();
        assert_eq!(doc.doc_id, "cv1");
        assert_eq!(doc.cells.len(), 1);
        assert_eq!(doc.cells[0].text.as_deref(), Some("anna@w3.org"));
        assert_eq!(doc.cells[0].id, "c0");
    }

    #[test]
    fn parse_grid_empty_and_overlap() {
        let doc = parse_grid_document(br#"{"doc_id":"d","cells":[]}"#).unwrap();
        assert!(doc.cells.is_empty());

        let err = parse_grid_document(
            br#"{"doc_id":"d","cells":[{"x":0,"y":0,"x2":1,"y2":1},{"x":0,"y":0,"x2":1,"y2":1}]}"#,
        )
        .unwrap_err();
        assert!(matches!(err, GridError::Overlap(..)));

        let err = parse_grid_document(
            br#"{"doc_id":"d","cells":[{"x":2,"y":0,"x2":2,"y2":1}]}"#,
        )
        .unwrap_err();
        assert!(matches!(err, GridError::BadExtent(..)));
    }

    #[test]
    fn two_column_split() {
        let doc = parse_two_column_text("d", "E-mail        anna@w3.org", 14).unwrap();
        assert_eq!(doc.cells.len(), 2);
        assert_eq!(doc.cells[0].text.as_deref(), Some("E-mail"));
        assert_eq!(
            (doc.cells[0].xstart, doc.cells[0].ystart, doc.cells[0].xend, doc.cells[0].yend),
            (0, 0, 1, 1)
        );
        assert_eq!(doc.cells[1].text.as_deref(), Some("anna@w3.org"));
        assert_eq!(
            (doc.cells[1].xstart, doc.cells[1].ystart, doc.cells[1].xend, doc.cells[1].yend),
            (1, 0, 2, 1)
        );
    }

    #[test]
    fn two_column_empty_inputs() {
        assert!(parse_two_column_text("d", "", 10).unwrap().cells.is_empty());
        let doc = parse_two_column_text("d", "              ", 10).unwrap();
        assert_eq!(doc.cells.len(), 2);
        assert!(doc.cells.iter().all(|c| !c.is_filled()));
    }

    #[test]
    fn refine_merges_split_label() {
        let doc = GridDocument {
            doc_id: "d".into(),
            cells: vec![cell(1, 2, 2, 3, "Work"), cell(1, 3, 2, 4, "Experience")],
        };
        let refined = refine_grid(&doc, &["Work Experience".to_string()]);
        assert_eq!(refined.cells.len(), 1);
        let c = &refined.cells[0];
        assert_eq!(c.text.as_deref(), Some("Work Experience"));
        assert_eq!((c.xstart, c.ystart, c.xend, c.yend), (1, 2, 2, 4));
    }

    #[test]
    fn refine_without_lexicon_is_identity() {
        let doc = GridDocument {
            doc_id: "d".into(),
            cells: vec![cell(1, 2, 2, 3, "Work"), cell(1, 3, 2, 4, "Experience")],
        };
        let refined = refine_grid(&doc, &[]);
        assert_eq!(refined.cells.len(), 2);
    }

    #[test]
    fn refine_is_idempotent_and_preserves_area() {
        let doc = GridDocument {
            doc_id: "d".into(),
            cells: vec![
                cell(0, 0, 1, 1, "Activities and"),
                cell(0, 1, 1, 2, "responsibilities"),
                cell(1, 0, 2, 2, "java"),
            ],
        };
        let lex = vec!["Activities and responsibilities".to_string()];
        let once = refine_grid(&doc, &lex);
        let twice = refine_grid(&once, &lex);
        assert_eq!(once.cells, twice.cells);
        assert_eq!(once.covered_area(), doc.covered_area());
        assert!(once.cells.len() <= doc.cells.len());
    }

    #[test]
    fn complete_labels_do_not_merge_further() {
        // Both parts already match the lexicon on their own, so the
        // pair must stay split.
        let doc = GridDocument {
            doc_id: "d".into(),
            cells: vec![cell(0, 0, 1, 1, "Dates"), cell(0, 1, 1, 2, "Dates")],
        };
        let refined = refine_grid(&doc, &["Dates".to_string(), "Dates Dates".to_string()]);
        assert_eq!(refined.cells.len(), 2);
    }

    #[test]
    fn tokenize_manager_of() {
        let t = Taxonomy::new();
        let mut fb = FactBase::new();
        let doc = GridDocument {
            doc_id: "d".into(),
            cells: vec![Cell {
                id: "c0".into(),
                xstart: 1,
                ystart: 0,
                xend: 2,
                yend: 1,
                text: Some("manager of".into()),
            }],
        };
        tokenize(&doc, &t, &mut fb).unwrap();
        // cell + sol + 2 tokens + eol
        assert_eq!(fb.len(), 5);
        let spans: Vec<(String, i64, i64)> = fb
            .objects()
            .filter_map(|o| {
                fb.one_position(&o.id)
                    .map(|p| (o.type_name.clone(), p.start, p.end))
            })
            .collect();
        assert_eq!(
            spans,
            vec![
                ("startOfLine".to_string(), 0, 1),
                ("token".to_string(), 1, 8),
                ("token".to_string(), 8, 10),
                ("endOfLine".to_string(), 10, 11),
            ]
        );
    }

    #[test]
    fn tokenize_single_word_spans_between_delimiters() {
        let t = Taxonomy::new();
        let mut fb = FactBase::new();
        let doc = GridDocument {
            doc_id: "d".into(),
            cells: vec![Cell {
                id: "c0".into(),
                xstart: 1,
                ystart: 8,
                xend: 2,
                yend: 9,
                text: Some("anna@w3.org".into()),
            }],
        };
        tokenize(&doc, &t, &mut fb).unwrap();
        let token = fb.objects().find(|o| o.type_name == TOKEN).unwrap();
        let p = fb.one_position(&token.id).unwrap();
        assert_eq!((p.start, p.end), (1, 12));
    }

    #[test]
    fn tokenize_empty_cell_has_no_one_dim_facts() {
        let t = Taxonomy::new();
        let mut fb = FactBase::new();
        let doc = GridDocument {
            doc_id: "d".into(),
            cells: vec![Cell {
                id: "c0".into(),
                xstart: 0,
                ystart: 0,
                xend: 1,
                yend: 1,
                text: None,
            }],
        };
        tokenize(&doc, &t, &mut fb).unwrap();
        assert_eq!(fb.len(), 1);
        assert_eq!(fb.objects().next().unwrap().type_name, EMPTY_CELL);
    }
}
