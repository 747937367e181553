//! On-disk text formats. Every file starts with a versioned `#` header line.
//!
//! * documents: `# vsearch-docs v1`, then one JSON object per line with
//!   `id`, `vertical`, `fields`
//! * query log: `# vsearch-querylog v1`, then TSV rows
//!   `timestamp, user, query, clicked_doc, clicked_vertical, shown, satisfied`
//!   where `shown` is a comma-separated id list and `satisfied` is 0 or 1
//! * annotated queries: `# vsearch-annotated v1`, then one query per line
//!   as space-separated `token/LABEL` with BIO labels such as `B-geo`
//! * query pairs: `# vsearch-pairs v1`, then `source<TAB>target`
//! * intent labels: `# vsearch-intent v1`, then `query<TAB>vertical`

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use crate::data::world::{AnnotatedQuery, EntitySpan};
use crate::data::{DocumentRecord, QueryLogEntry, Vertical};
use crate::error::{Error, Result};
use crate::text::{tokenize_cased, EntityType};

pub const DOCS_HEADER: &str = "# vsearch-docs v1";
pub const LOG_HEADER: &str =
    "# vsearch-querylog v1\ttimestamp\tuser\tquery\tclicked_doc\tclicked_vertical\tshown\tsatisfied";
pub const ANNOTATED_HEADER: &str = "# vsearch-annotated v1";
pub const PAIRS_HEADER: &str = "# vsearch-pairs v1";
pub const INTENT_HEADER: &str = "# vsearch-intent v1";

fn clean(s: &str) -> String {
    s.replace(['\t', '\n', '\r'], " ")
}

/// Splits off and checks the header line; returns the remaining
/// non-empty lines with their 1-based line numbers.
fn body<'a>(text: &'a str, header: &str, what: &'static str) -> Result<Vec<(usize, &'a str)>> {
    let mut lines = text.lines();
    let first = lines.next().unwrap_or("");
    let expected = header.split('\t').next().unwrap_or(header);
    if first.split('\t').next() != Some(expected) {
        return Err(Error::format(what, format!("expected header {expected:?}, found {first:?}")));
    }
    Ok(lines
        .enumerate()
        .map(|(i, l)| (i + 2, l))
        .filter(|(_, l)| !l.trim().is_empty())
        .collect())
}

pub fn write_documents(docs: &[DocumentRecord]) -> Result<String> {
    let mut out = String::from(DOCS_HEADER);
    out.push('\n');
    for d in docs {
        out.push_str(&serde_json::to_string(d)?);
        out.push('\n');
    }
    Ok(out)
}

pub fn read_documents(text: &str) -> Result<Vec<DocumentRecord>> {
    let mut seen = HashSet::new();
    let mut docs = Vec::new();
    for (n, line) in body(text, DOCS_HEADER, "documents")? {
        let d: DocumentRecord = serde_json::from_str(line)
            .map_err(|e| Error::format("documents", format!("line {n}: {e}")))?;
        if !seen.insert(d.id) {
            return Err(Error::format("documents", format!("line {n}: duplicate id {}", d.id)));
        }
        docs.push(d);
    }
    Ok(docs)
}

pub fn write_log(log: &[QueryLogEntry]) -> String {
    let mut out = String::from(LOG_HEADER);
    out.push('\n');
    for e in log {
        let shown: Vec<String> = e.shown.iter().map(u64::to_string).collect();
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
            e.timestamp,
            e.user,
            clean(&e.query),
            e.clicked_doc.map(|d| d.to_string()).unwrap_or_default(),
            e.clicked_vertical.map(|v| v.name()).unwrap_or(""),
            shown.join(","),
            u8::from(e.satisfied),
        ));
    }
    out
}

pub fn read_log(text: &str) -> Result<Vec<QueryLogEntry>> {
    let bad = |n: usize, msg: String| Error::format("query log", format!("line {n}: {msg}"));
    let mut log = Vec::new();
    for (n, line) in body(text, LOG_HEADER, "query log")? {
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 5 && cols.len() != 7 {
            return Err(bad(n, format!("expected 5 or 7 columns, found {}", cols.len())));
        }
        let num = |s: &str| s.parse::<u64>().map_err(|e| bad(n, format!("{s:?}: {e}")));
        let opt = |s: &str| if s.is_empty() { Ok(None) } else { num(s).map(Some) };
        let clicked_doc = opt(cols[3])?;
        let clicked_vertical = if cols[4].is_empty() {
            None
        } else {
            Some(cols[4].parse::<Vertical>().map_err(|e| bad(n, e.to_string()))?)
        };
        if clicked_doc.is_some() != clicked_vertical.is_some() {
            return Err(bad(n, "clicked doc and vertical must both be present or absent".into()));
        }
        let (shown, satisfied) = if cols.len() == 7 {
            let shown = cols[5]
                .split(',')
                .filter(|s| !s.is_empty())
                .map(num)
                .collect::<Result<Vec<_>>>()?;
            (shown, cols[6] == "1")
        } else {
            (Vec::new(), false)
        };
        log.push(QueryLogEntry {
            timestamp: num(cols[0])?,
            user: num(cols[1])?,
            query: cols[2].to_string(),
            clicked_doc,
            clicked_vertical,
            shown,
            satisfied,
        });
    }
    Ok(log)
}

/// BIO label strings for an annotated query, one per token.
pub fn bio_labels(q: &AnnotatedQuery) -> Vec<String> {
    let n = tokenize_cased(&q.raw).len();
    let mut labels = vec!["O".to_string(); n];
    for s in &q.spans {
        for (k, l) in labels[s.start..s.end].iter_mut().enumerate() {
            *l = format!("{}-{}", if k == 0 { 'B' } else { 'I' }, s.entity.name());
        }
    }
    labels
}

pub fn write_annotated(queries: &[AnnotatedQuery]) -> String {
    let mut out = String::from(ANNOTATED_HEADER);
    out.push('\n');
    for q in queries {
        let toks = tokenize_cased(&q.raw);
        let line: Vec<String> = toks
            .iter()
            .zip(bio_labels(q))
            .map(|(t, l)| format!("{}/{l}", t.raw))
            .collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

/// Parses `token/LABEL` lines. An `I-` label that does not continue a span
/// of the same type is rejected.
pub fn read_annotated(text: &str) -> Result<Vec<AnnotatedQuery>> {
    let mut out = Vec::new();
    for (n, line) in body(text, ANNOTATED_HEADER, "annotated queries")? {
        let bad = |msg: String| Error::format("annotated queries", format!("line {n}: {msg}"));
        let mut raw = Vec::new();
        let mut spans: Vec<EntitySpan> = Vec::new();
        let mut open = false;
        for (i, item) in line.split_whitespace().enumerate() {
            let (tok, label) = item
                .rsplit_once('/')
                .ok_or_else(|| bad(format!("missing label in {item:?}")))?;
            raw.push(tok);
            if label == "O" {
                open = false;
                continue;
            }
            let (tag, ty) = label
                .split_once('-')
                .ok_or_else(|| bad(format!("bad label {label:?}")))?;
            let entity: EntityType = ty.parse().map_err(|e: Error| bad(e.to_string()))?;
            match tag {
                "B" => {
                    spans.push(EntitySpan { start: i, end: i + 1, entity });
                    open = true;
                }
                "I" => match spans.last_mut() {
                    Some(s) if open && s.entity == entity && s.end == i => s.end += 1,
                    _ => return Err(bad(format!("{label} does not continue a span"))),
                },
                _ => return Err(bad(format!("bad label {label:?}"))),
            }
        }
        out.push(AnnotatedQuery { raw: raw.join(" "), spans });
    }
    Ok(out)
}

fn write_two_column<'a>(header: &str, rows: impl Iterator<Item = (&'a str, &'a str)>) -> String {
    let mut out = String::from(header);
    out.push('\n');
    for (a, b) in rows {
        out.push_str(&format!("{}\t{}\n", clean(a), clean(b)));
    }
    out
}

fn read_two_column(text: &str, header: &str, what: &'static str) -> Result<Vec<(String, String)>> {
    body(text, header, what)?
        .into_iter()
        .map(|(n, line)| {
            line.split_once('\t')
                .map(|(a, b)| (a.to_string(), b.to_string()))
                .ok_or_else(|| Error::format(what, format!("line {n}: expected two columns")))
        })
        .collect()
}

pub fn write_pairs(pairs: &[(String, String)]) -> String {
    write_two_column(PAIRS_HEADER, pairs.iter().map(|(a, b)| (a.as_str(), b.as_str())))
}

pub fn read_pairs(text: &str) -> Result<Vec<(String, String)>> {
    read_two_column(text, PAIRS_HEADER, "query pairs")
}

pub fn write_intent_labels(labels: &[(String, Vertical)]) -> String {
    write_two_column(INTENT_HEADER, labels.iter().map(|(q, v)| (q.as_str(), v.name())))
}

pub fn read_intent_labels(text: &str) -> Result<Vec<(String, Vertical)>> {
    read_two_column(text, INTENT_HEADER, "intent labels")?
        .into_iter()
        .map(|(q, v)| Ok((q, v.parse()?)))
        .collect()
}

pub fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::invalid(format!("{}: {e}", path.display())))
}
