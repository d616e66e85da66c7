//! The portable `MODEL.TXT` format.
//!
//! ```text
//! DIOL_MODEL v1
//! TYPE: KMEANS
//! K: <int>
//! D: <int>
//! FEATURES: <name>,<name>,...
//! CENTROIDS:
//! <f> <f> ... (K rows of D values)
//! MEAN:
//! <f> <f> ... (D values)
//! STD:
//! <f> <f> ... (D values)
//! THRESHOLD: <f>
//! SCALE: <f>
//! END
//! ```
//!
//! Lines end with LF, including the last. Vector entries are separated by a
//! single space. Reals are written as the shortest decimal string that parses
//! back to the identical `f64`, so `parse(serialize(m))` reproduces `m` bit
//! for bit. Parsing is a single strict pass: sections appear in the order
//! above and anything unexpected is an error.

use std::fmt::{self, Write as _};

use thiserror::Error;

use crate::kmeans::{KMeansModel, NormStats};

pub const MAGIC: &str = "DIOL_MODEL";
pub const FORMAT_VERSION: u32 = 1;
pub const MODEL_TYPE: &str = "KMEANS";
pub const MAX_K: usize = 64;
pub const MAX_DIM: usize = 32;

const LABELS: [&str; 11] = [
    "DIOL_MODEL",
    "TYPE",
    "K",
    "D",
    "FEATURES",
    "CENTROIDS",
    "MEAN",
    "STD",
    "THRESHOLD",
    "SCALE",
    "END",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ParseErrorKind {
    MissingSection,
    CountMismatch,
    NonFiniteValue,
    RangeViolation,
    BadSyntax,
    UnsupportedVersion,
}

impl fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Why a model document or in-memory model was rejected.
///
/// `line` is 1-based within the parsed text; 0 when validating a model that
/// did not come from text.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{kind} at line {line}: {detail}")]
pub struct ParseError {
    pub kind: ParseErrorKind,
    pub line: usize,
    pub detail: String,
}

impl ParseError {
    fn new(kind: ParseErrorKind, line: usize, detail: impl Into<String>) -> Self {
        Self {
            kind,
            line,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelDocument {
    pub format_version: u32,
    pub model: KMeansModel,
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn write_row(out: &mut String, row: &[f64]) {
    for (i, v) in row.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        let _ = write!(out, "{v}");
    }
    out.push('\n');
}

/// Renders a valid model. Callers holding an unchecked model should run
/// [`validate`] first; invalid models produce text that [`parse`] rejects.
pub fn serialize(model: &KMeansModel) -> String {
    let mut out = String::with_capacity(128 + 24 * model.dim * (model.k + 2));
    let _ = writeln!(out, "{MAGIC} v{FORMAT_VERSION}");
    let _ = writeln!(out, "TYPE: {MODEL_TYPE}");
    let _ = writeln!(out, "K: {}", model.k);
    let _ = writeln!(out, "D: {}", model.dim);
    let _ = writeln!(out, "FEATURES: {}", model.feature_names.join(","));
    out.push_str("CENTROIDS:\n");
    for row in &model.centroids {
        write_row(&mut out, row);
    }
    out.push_str("MEAN:\n");
    write_row(&mut out, &model.norm.mean);
    out.push_str("STD:\n");
    write_row(&mut out, &model.norm.std);
    let _ = writeln!(out, "THRESHOLD: {}", model.threshold);
    let _ = writeln!(out, "SCALE: {}", model.scale);
    out.push_str("END\n");
    out
}

/// Checks counts and value ranges of an in-memory model.
pub fn validate(model: &KMeansModel) -> Result<(), ParseError> {
    use ParseErrorKind::*;
    let err = |kind, detail: String| Err(ParseError::new(kind, 0, detail));

    if !(1..=MAX_K).contains(&model.k) {
        return err(RangeViolation, format!("K = {} outside 1..={MAX_K}", model.k));
    }
    if !(1..=MAX_DIM).contains(&model.dim) {
        return err(RangeViolation, format!("D = {} outside 1..={MAX_DIM}", model.dim));
    }
    if model.feature_names.len() != model.dim {
        return err(
            CountMismatch,
            format!("{} feature names for D = {}", model.feature_names.len(), model.dim),
        );
    }
    if let Some(bad) = model.feature_names.iter().find(|n| !is_identifier(n)) {
        return err(BadSyntax, format!("feature name `{bad}` is not an identifier"));
    }
    if model.centroids.len() != model.k {
        return err(
            CountMismatch,
            format!("{} centroid rows for K = {}", model.centroids.len(), model.k),
        );
    }
    let vectors = model
        .centroids
        .iter()
        .enumerate()
        .map(|(i, r)| (format!("centroid {i}"), r))
        .chain([
            ("MEAN".to_string(), &model.norm.mean),
            ("STD".to_string(), &model.norm.std),
        ]);
    for (name, row) in vectors {
        if row.len() != model.dim {
            return err(
                CountMismatch,
                format!("{name} has {} values for D = {}", row.len(), model.dim),
            );
        }
        if row.iter().any(|v| !v.is_finite()) {
            return err(NonFiniteValue, format!("{name} contains a non-finite value"));
        }
    }
    if let Some(s) = model.norm.std.iter().find(|&&s| s <= 0.0) {
        return err(RangeViolation, format!("STD entry {s} is not positive"));
    }
    for (name, v) in [("THRESHOLD", model.threshold), ("SCALE", model.scale)] {
        if !v.is_finite() {
            return err(NonFiniteValue, format!("{name} is {v}"));
        }
        if v <= 0.0 {
            return err(RangeViolation, format!("{name} = {v} is not positive"));
        }
    }
    Ok(())
}

/// Line-by-line cursor over the document.
struct Lines<'a> {
    lines: Vec<&'a str>,
    /// Whether the text ended with LF.
    terminated: bool,
    pos: usize,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        let mut lines: Vec<&str> = text.split('\n').collect();
        let terminated = lines.last() == Some(&"");
        if terminated {
            lines.pop();
        }
        Self {
            lines,
            terminated,
            pos: 0,
        }
    }

    /// 1-based number of the line `peek` would return.
    fn line_no(&self) -> usize {
        self.pos + 1
    }

    fn peek(&self) -> Option<&'a str> {
        self.lines.get(self.pos).copied()
    }

    fn next(&mut self, expecting: &str) -> Result<&'a str, ParseError> {
        let line = self.peek().ok_or_else(|| {
            ParseError::new(
                ParseErrorKind::MissingSection,
                self.line_no(),
                format!("document ends before {expecting}"),
            )
        })?;
        if line.contains(['\t', '\r']) {
            return Err(ParseError::new(
                ParseErrorKind::BadSyntax,
                self.line_no(),
                "tabs and carriage returns are not allowed",
            ));
        }
        self.pos += 1;
        Ok(line)
    }
}

/// The section label a line starts with, if it is one of the known labels.
fn label_of(line: &str) -> Option<&'static str> {
    let head = line.split([':', ' ']).next().unwrap_or("");
    LABELS.iter().copied().find(|&l| l == head)
}

/// Consumes `<label>: <value>` (or `<label>:` when `value` is not wanted).
fn expect_label<'a>(cur: &mut Lines<'a>, label: &str) -> Result<&'a str, ParseError> {
    let line_no = cur.line_no();
    let line = cur.next(&format!("{label} section"))?;
    match label_of(line) {
        Some(found) if found == label => {}
        Some(found) => {
            return Err(ParseError::new(
                ParseErrorKind::MissingSection,
                line_no,
                format!("expected {label} section, found {found}"),
            ))
        }
        None => {
            return Err(ParseError::new(
                ParseErrorKind::BadSyntax,
                line_no,
                format!("expected {label} section, found `{line}`"),
            ))
        }
    }
    let rest = &line[label.len()..];
    if rest == ":" {
        return Ok("");
    }
    rest.strip_prefix(": ").filter(|v| !v.is_empty()).ok_or_else(|| {
        ParseError::new(
            ParseErrorKind::BadSyntax,
            line_no,
            format!("malformed {label} line `{line}`"),
        )
    })
}

fn parse_int(value: &str, label: &str, line: usize, max: usize) -> Result<usize, ParseError> {
    let n: i64 = value.parse().map_err(|_| {
        ParseError::new(
            ParseErrorKind::BadSyntax,
            line,
            format!("{label} `{value}` is not an integer"),
        )
    })?;
    if n < 1 || n as u64 > max as u64 {
        return Err(ParseError::new(
            ParseErrorKind::RangeViolation,
            line,
            format!("{label} = {n} outside 1..={max}"),
        ));
    }
    Ok(n as usize)
}

fn parse_real(token: &str, what: &str, line: usize) -> Result<f64, ParseError> {
    let v: f64 = token.parse().map_err(|_| {
        ParseError::new(
            ParseErrorKind::BadSyntax,
            line,
            format!("{what}: `{token}` is not a number"),
        )
    })?;
    if !v.is_finite() {
        return Err(ParseError::new(
            ParseErrorKind::NonFiniteValue,
            line,
            format!("{what}: `{token}` is not finite"),
        ));
    }
    Ok(v)
}

fn parse_positive(value: &str, label: &str, line: usize) -> Result<f64, ParseError> {
    let v = parse_real(value, label, line)?;
    if v <= 0.0 {
        return Err(ParseError::new(
            ParseErrorKind::RangeViolation,
            line,
            format!("{label} = {v} is not positive"),
        ));
    }
    Ok(v)
}

/// Reads `count` rows of `dim` reals following a section header.
fn parse_rows(cur: &mut Lines<'_>, section: &str, count: usize, dim: usize) -> Result<Vec<Vec<f64>>, ParseError> {
    let mut rows = Vec::with_capacity(count);
    for i in 0..count {
        let line_no = cur.line_no();
        let line = cur.next(&format!("{section} row {}", i + 1))?;
        if label_of(line).is_some() {
            return Err(ParseError::new(
                ParseErrorKind::CountMismatch,
                line_no,
                format!("{section}: expected {count} rows, found {i}"),
            ));
        }
        let mut row = Vec::with_capacity(dim);
        for token in line.split(' ') {
            if token.is_empty() {
                return Err(ParseError::new(
                    ParseErrorKind::BadSyntax,
                    line_no,
                    format!("{section}: entries must be separated by single spaces"),
                ));
            }
            if row.len() == dim {
                return Err(ParseError::new(
                    ParseErrorKind::CountMismatch,
                    line_no,
                    format!("{section}: row has more than D = {dim} values"),
                ));
            }
            row.push(parse_real(token, section, line_no)?);
        }
        if row.len() != dim {
            return Err(ParseError::new(
                ParseErrorKind::CountMismatch,
                line_no,
                format!("{section}: row has {} values, expected D = {dim}", row.len()),
            ));
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Consumes a section header that must follow a block of exactly-counted rows.
fn expect_after_rows<'a>(
    cur: &mut Lines<'a>,
    label: &str,
    previous: &str,
    count: usize,
) -> Result<&'a str, ParseError> {
    if let Some(line) = cur.peek() {
        if label_of(line).is_none() {
            return Err(ParseError::new(
                ParseErrorKind::CountMismatch,
                cur.line_no(),
                format!("{previous}: more than the declared {count} rows"),
            ));
        }
    }
    expect_label(cur, label)
}

/// Strictly parses a model document. Never returns a partially filled model.
pub fn parse(text: &str) -> Result<ModelDocument, ParseError> {
    use ParseErrorKind::*;
    let mut cur = Lines::new(text);

    let line_no = cur.line_no();
    let magic = cur.next("DIOL_MODEL header")?;
    let version = match magic.strip_prefix("DIOL_MODEL v").map(|v| v.parse::<u32>()) {
        Some(Ok(v)) => v,
        _ => {
            let kind = if label_of(magic).is_some_and(|l| l != MAGIC) {
                MissingSection
            } else {
                BadSyntax
            };
            return Err(ParseError::new(
                kind,
                line_no,
                format!("expected `{MAGIC} v{FORMAT_VERSION}`, found `{magic}`"),
            ));
        }
    };
    if version != FORMAT_VERSION {
        return Err(ParseError::new(
            UnsupportedVersion,
            line_no,
            format!("format version {version} is not supported (expected {FORMAT_VERSION})"),
        ));
    }

    let line_no = cur.line_no();
    let ty = expect_label(&mut cur, "TYPE")?;
    if ty != MODEL_TYPE {
        return Err(ParseError::new(
            UnsupportedVersion,
            line_no,
            format!("model type `{ty}` is not supported"),
        ));
    }

    let line_no = cur.line_no();
    let k = parse_int(expect_label(&mut cur, "K")?, "K", line_no, MAX_K)?;
    let line_no = cur.line_no();
    let dim = parse_int(expect_label(&mut cur, "D")?, "D", line_no, MAX_DIM)?;

    let line_no = cur.line_no();
    let names = expect_label(&mut cur, "FEATURES")?;
    let feature_names: Vec<String> = names.split(',').map(str::to_string).collect();
    if let Some(bad) = feature_names.iter().find(|n| !is_identifier(n)) {
        return Err(ParseError::new(
            BadSyntax,
            line_no,
            format!("feature name `{bad}` is not an identifier"),
        ));
    }
    if feature_names.len() != dim {
        return Err(ParseError::new(
            CountMismatch,
            line_no,
            format!("{} feature names for D = {dim}", feature_names.len()),
        ));
    }

    let line_no = cur.line_no();
    if !expect_label(&mut cur, "CENTROIDS")?.is_empty() {
        return Err(ParseError::new(BadSyntax, line_no, "CENTROIDS header takes no value"));
    }
    let centroids = parse_rows(&mut cur, "CENTROIDS", k, dim)?;

    let line_no = cur.line_no();
    if !expect_after_rows(&mut cur, "MEAN", "CENTROIDS", k)?.is_empty() {
        return Err(ParseError::new(BadSyntax, line_no, "MEAN header takes no value"));
    }
    let mean = parse_rows(&mut cur, "MEAN", 1, dim)?.remove(0);
    let line_no = cur.line_no();
    if !expect_after_rows(&mut cur, "STD", "MEAN", 1)?.is_empty() {
        return Err(ParseError::new(BadSyntax, line_no, "STD header takes no value"));
    }
    let std_line = cur.line_no();
    let std = parse_rows(&mut cur, "STD", 1, dim)?.remove(0);
    if let Some(s) = std.iter().find(|&&s| s <= 0.0) {
        return Err(ParseError::new(
            RangeViolation,
            std_line,
            format!("STD entry {s} is not positive"),
        ));
    }

    let line_no = cur.line_no();
    let threshold = parse_positive(
        expect_after_rows(&mut cur, "THRESHOLD", "STD", 1)?,
        "THRESHOLD",
        line_no,
    )?;

    let line_no = cur.line_no();
    let scale = parse_positive(expect_label(&mut cur, "SCALE")?, "SCALE", line_no)?;

    let end_line = cur.line_no();
    let end = cur.next("END")?;
    if end != "END" {
        let kind = if label_of(end).is_some() {
            MissingSection
        } else {
            BadSyntax
        };
        return Err(ParseError::new(kind, end_line, format!("expected END, found `{end}`")));
    }
    if cur.peek().is_some() {
        return Err(ParseError::new(BadSyntax, cur.line_no(), "content after END"));
    }
    if !cur.terminated {
        return Err(ParseError::new(BadSyntax, end_line, "missing final line feed"));
    }

    let model = KMeansModel {
        k,
        dim,
        centroids,
        norm: NormStats { mean, std },
        threshold,
        scale,
        feature_names,
    };
    validate(&model).map_err(|e| ParseError { line: end_line, ..e })?;
    Ok(ModelDocument {
        format_version: version,
        model,
    })
}

/// A deliberately malformed document and the rejection it must produce.
#[derive(Debug, Clone)]
pub struct CorruptDocument {
    pub label: String,
    pub text: String,
    pub expected: ParseErrorKind,
}

/// Derives malformed variants of `serialize(model)`: truncation at every
/// line boundary, per-field `nan`/`inf`/garbage substitution, count
/// mismatches, section reordering and version bumps.
pub fn corruption_corpus(model: &KMeansModel) -> Vec<CorruptDocument> {
    use ParseErrorKind::*;
    let text = serialize(model);
    let lines: Vec<String> = text.lines().map(str::to_string).collect();
    let join = |ls: &[String]| ls.iter().map(|l| format!("{l}\n")).collect::<String>();
    let mut out = Vec::new();
    let mut push = |label: String, text: String, expected| out.push(CorruptDocument { label, text, expected });

    for cut in 0..lines.len() {
        push(
            format!("truncated after {cut} lines"),
            join(&lines[..cut]),
            MissingSection,
        );
    }

    // line indices of the fixed layout
    let k = model.k;
    let centroid_rows = 6..6 + k;
    let mean_row = 7 + k;
    let std_row = 9 + k;
    let threshold = 10 + k;
    let scale = 11 + k;

    let replace_line = |i: usize, new: String| {
        let mut ls = lines.clone();
        ls[i] = new;
        join(&ls)
    };

    for (i, label) in [(2usize, "K"), (3, "D")] {
        for bad in ["nan", "inf", "x7"] {
            push(
                format!("{label} = {bad}"),
                replace_line(i, format!("{label}: {bad}")),
                BadSyntax,
            );
        }
    }
    let row_lines = centroid_rows.clone().chain([mean_row, std_row]);
    for i in row_lines {
        let tokens: Vec<&str> = lines[i].split(' ').collect();
        for t in 0..tokens.len() {
            for (bad, kind) in [
                ("nan", NonFiniteValue),
                ("inf", NonFiniteValue),
                ("-inf", NonFiniteValue),
                ("1.2.3", BadSyntax),
            ] {
                let mut ts = tokens.clone();
                ts[t] = bad;
                push(
                    format!("line {} field {t} = {bad}", i + 1),
                    replace_line(i, ts.join(" ")),
                    kind,
                );
            }
        }
    }
    for (i, label) in [(threshold, "THRESHOLD"), (scale, "SCALE")] {
        for (bad, kind) in [
            ("nan", NonFiniteValue),
            ("inf", NonFiniteValue),
            ("-inf", NonFiniteValue),
            ("abc", BadSyntax),
        ] {
            push(
                format!("{label} = {bad}"),
                replace_line(i, format!("{label}: {bad}")),
                kind,
            );
        }
    }

    push(
        "K declared one higher".into(),
        replace_line(2, format!("K: {}", k + 1)),
        CountMismatch,
    );
    if k > 1 {
        push(
            "K declared one lower".into(),
            replace_line(2, format!("K: {}", k - 1)),
            CountMismatch,
        );
    }
    if model.dim < MAX_DIM {
        push(
            "D declared one higher".into(),
            replace_line(3, format!("D: {}", model.dim + 1)),
            CountMismatch,
        );
    }
    {
        let mut ls = lines.clone();
        ls.remove(centroid_rows.start);
        push("centroid row removed".into(), join(&ls), CountMismatch);
        let mut ls = lines.clone();
        ls.insert(centroid_rows.start, lines[centroid_rows.start].clone());
        push("centroid row duplicated".into(), join(&ls), CountMismatch);
    }
    for i in [centroid_rows.start, mean_row, std_row] {
        push(
            format!("line {} extra value", i + 1),
            replace_line(i, format!("{} 1", lines[i])),
            CountMismatch,
        );
        if model.dim > 1 {
            let short = lines[i]
                .rsplit_once(' ')
                .map(|(head, _)| head.to_string())
                .unwrap_or_default();
            push(
                format!("line {} missing value", i + 1),
                replace_line(i, short),
                CountMismatch,
            );
        }
    }
    push(
        "extra feature name".into(),
        replace_line(4, format!("{},extra", lines[4])),
        CountMismatch,
    );

    let swapped = |a: std::ops::Range<usize>, b: std::ops::Range<usize>| {
        let mut ls: Vec<String> = lines[..a.start].to_vec();
        ls.extend_from_slice(&lines[b.clone()]);
        ls.extend_from_slice(&lines[a.end..b.start]);
        ls.extend_from_slice(&lines[a]);
        ls.extend_from_slice(&lines[b.end..]);
        join(&ls)
    };
    push("K and D swapped".into(), swapped(2..3, 3..4), MissingSection);
    push(
        "MEAN and STD swapped".into(),
        swapped(mean_row - 1..mean_row + 1, std_row - 1..std_row + 1),
        MissingSection,
    );
    push(
        "THRESHOLD and SCALE swapped".into(),
        swapped(threshold..threshold + 1, scale..scale + 1),
        MissingSection,
    );
    push(
        "CENTROIDS after STD".into(),
        swapped(
            centroid_rows.start - 1..centroid_rows.end,
            centroid_rows.end..std_row + 1,
        ),
        MissingSection,
    );

    for v in [0u32, 2, 99] {
        push(
            format!("version {v}"),
            replace_line(0, format!("{MAGIC} v{v}")),
            UnsupportedVersion,
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit_model() -> KMeansModel {
        KMeansModel {
            k: 1,
            dim: 1,
            centroids: vec![vec![0.0]],
            norm: NormStats {
                mean: vec![0.0],
                std: vec![1.0],
            },
            threshold: 1.0,
            scale: 1.0,
            feature_names: vec!["rms".into()],
        }
    }

    fn three_by_five() -> KMeansModel {
        KMeansModel {
            k: 3,
            dim: 5,
            centroids: vec![
                vec![-0.8, -0.75, -0.4, 0.0, -0.6],
                vec![1.2, 1.1, 0.3, -0.02, 0.9],
                vec![0.1, 2.5, 3.1, 1.7, 0.2],
            ],
            norm: NormStats {
                mean: vec![0.37, 0.37, 0.21, 0.0, 1.1],
                std: vec![0.39, 0.05, 0.18, 0.03, 1.5],
            },
            threshold: 8.99679,
            scale: 1.0,
            feature_names: crate::features::FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
        }
    }

    fn kind_of(text: &str) -> ParseErrorKind {
        parse(text).expect_err("document should be rejected").kind
    }

    #[test]
    fn unit_document_is_literal() {
        let text = serialize(&unit_model());
        let expected = "DIOL_MODEL v1\nTYPE: KMEANS\nK: 1\nD: 1\nFEATURES: rms\nCENTROIDS:\n0\nMEAN:\n0\nSTD:\n1\nTHRESHOLD: 1\nSCALE: 1\nEND\n";
        assert_eq!(text, expected);
        assert_eq!(parse(&text).unwrap().model, unit_model());
    }

    #[test]
    fn threshold_prints_shortest() {
        let text = serialize(&three_by_five());
        assert!(text.contains("\nTHRESHOLD: 8.99679\n"));
        let doc = parse(&text).unwrap();
        assert_eq!(doc.format_version, 1);
        assert_eq!(doc.model, three_by_five());
    }

    #[test]
    fn missing_centroid_row_is_count_mismatch() {
        let text = serialize(&three_by_five());
        let lines: Vec<&str> = text.lines().collect();
        // drop the third centroid row (line 9)
        let cut: String = lines
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != 8)
            .map(|(_, l)| format!("{l}\n"))
            .collect();
        let err = parse(&cut).unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::CountMismatch);
        assert_eq!(err.line, 9);
        assert!(err.detail.contains("CENTROIDS"));
    }

    #[test]
    fn specific_rejections() {
        let good = serialize(&three_by_five());
        assert_eq!(
            kind_of(&good.replace("THRESHOLD: 8.99679", "THRESHOLD: nan")),
            ParseErrorKind::NonFiniteValue
        );
        assert_eq!(
            kind_of(&good.replace("THRESHOLD: 8.99679", "THRESHOLD: -1")),
            ParseErrorKind::RangeViolation
        );
        assert_eq!(
            kind_of(&good.replace("THRESHOLD: 8.99679", "THRESHOLD: 0")),
            ParseErrorKind::RangeViolation
        );
        assert_eq!(
            kind_of(&good.replace("0.39 0.05", "0 0.05")),
            ParseErrorKind::RangeViolation
        );
        assert_eq!(kind_of(&good.replace("K: 3", "K: 0")), ParseErrorKind::RangeViolation);
        assert_eq!(kind_of(&good.replace("K: 3", "K: 65")), ParseErrorKind::RangeViolation);
        assert_eq!(kind_of(&good.replace("K: 3", "K: three")), ParseErrorKind::BadSyntax);
        assert_eq!(
            kind_of(&good.replace("DIOL_MODEL v1", "DIOL_MODEL v2")),
            ParseErrorKind::UnsupportedVersion
        );
        assert_eq!(
            kind_of(&good.replace("TYPE: KMEANS", "TYPE: ZSCORE")),
            ParseErrorKind::UnsupportedVersion
        );
        assert_eq!(
            kind_of(&good.replace("0.37 0.37", "0.37  0.37")),
            ParseErrorKind::BadSyntax
        );
        assert_eq!(
            kind_of(&good.replace("0.37 0.37", "0.37\t0.37")),
            ParseErrorKind::BadSyntax
        );
        assert_eq!(
            kind_of(&good.replace("END\n", "END\nextra\n")),
            ParseErrorKind::BadSyntax
        );
        assert_eq!(kind_of(&good.replace("END\n", "END")), ParseErrorKind::BadSyntax);
        assert_eq!(
            kind_of(&good.replace(",on_duration_s", "")),
            ParseErrorKind::CountMismatch
        );
        assert_eq!(
            kind_of(&good.replace("MEAN:\n", "MEAN:\n1 2 3 4 5\n")),
            ParseErrorKind::CountMismatch
        );
        assert_eq!(
            kind_of(&good.replace("\nCENTROIDS:\n", "\nCENTROIDS:\n1 2 3 4 5\n")),
            ParseErrorKind::CountMismatch
        );
        assert_eq!(kind_of(&good.replace(" 0.2\n", "\n")), ParseErrorKind::CountMismatch);
        assert_eq!(
            kind_of(&good.replace("CENTROIDS:\n", "# comment\nCENTROIDS:\n")),
            ParseErrorKind::BadSyntax
        );
        assert_eq!(kind_of(&good.replace("K: 3", "K:3")), ParseErrorKind::BadSyntax);
        assert_eq!(kind_of(""), ParseErrorKind::MissingSection);
    }

    #[test]
    fn validate_rules() {
        assert!(validate(&three_by_five()).is_ok());
        let mut m = three_by_five();
        m.norm.std[2] = 0.0;
        assert_eq!(validate(&m).unwrap_err().kind, ParseErrorKind::RangeViolation);
        let mut m = three_by_five();
        m.k = 0;
        assert_eq!(validate(&m).unwrap_err().kind, ParseErrorKind::RangeViolation);
        let mut m = three_by_five();
        m.centroids.pop();
        assert_eq!(validate(&m).unwrap_err().kind, ParseErrorKind::CountMismatch);
        let mut m = three_by_five();
        m.centroids[1][1] = f64::NAN;
        assert_eq!(validate(&m).unwrap_err().kind, ParseErrorKind::NonFiniteValue);
        let mut m = three_by_five();
        m.scale = 0.0;
        assert_eq!(validate(&m).unwrap_err().kind, ParseErrorKind::RangeViolation);
        let mut m = three_by_five();
        m.feature_names.pop();
        assert_eq!(validate(&m).unwrap_err().kind, ParseErrorKind::CountMismatch);
    }

    fn finite_f64() -> impl Strategy<Value = f64> {
        prop_oneof![any::<f64>().prop_filter("finite", |v| v.is_finite()), -10.0f64..10.0,]
    }

    fn positive_f64() -> impl Strategy<Value = f64> {
        any::<f64>().prop_filter("positive finite", |v| v.is_finite() && *v > 0.0)
    }

    prop_compose! {
        fn arb_model()(k in 1usize..=6, dim in 1usize..=6)(
            centroids in prop::collection::vec(prop::collection::vec(finite_f64(), dim), k),
            mean in prop::collection::vec(finite_f64(), dim),
            std in prop::collection::vec(positive_f64(), dim),
            threshold in positive_f64(),
            scale in positive_f64(),
            names in prop::collection::vec("[a-z_][a-z0-9_]{0,8}", dim),
            k in Just(k),
            dim in Just(dim),
        ) -> KMeansModel {
            KMeansModel { k, dim, centroids, norm: NormStats { mean, std }, threshold, scale, feature_names: names }
        }
    }

    fn bits(m: &KMeansModel) -> Vec<u64> {
        m.centroids
            .iter()
            .flatten()
            .chain(&m.norm.mean)
            .chain(&m.norm.std)
            .chain([&m.threshold, &m.scale])
            .map(|v| v.to_bits())
            .collect()
    }

    proptest! {
        #[test]
        fn round_trip_is_bitwise(m in arb_model()) {
            let text = serialize(&m);
            let back = parse(&text).unwrap().model;
            prop_assert_eq!(bits(&back), bits(&m));
            prop_assert_eq!(&back.feature_names, &m.feature_names);
            prop_assert_eq!(serialize(&back), text);
        }

        #[test]
        fn truncation_never_yields_model(m in arb_model(), cut in 0usize..40) {
            let text = serialize(&m);
            let lines: Vec<&str> = text.split_inclusive('\n').collect();
            let keep = cut % lines.len();
            let truncated: String = lines[..keep].concat();
            prop_assert_eq!(kind_of(&truncated), ParseErrorKind::MissingSection);
        }

        #[test]
        fn corpus_rejections_have_expected_kinds(m in arb_model()) {
            for doc in corruption_corpus(&m) {
                let got = parse(&doc.text).map(|_| ()).map_err(|e| e.kind);
                prop_assert_eq!(got, Err(doc.expected), "{}", doc.label);
            }
        }
    }
}
