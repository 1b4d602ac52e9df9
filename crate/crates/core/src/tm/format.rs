//! Line-oriented `.tm` text format.
//!
//! ```text
//! # unary increment
//! states: q0 qa
//! alphabet: _ 1
//! blank: _
//! start: q0
//! accept: qa
//! delta:
//! q0 1 -> q0 1 R
//! q0 _ -> qa 1 R
//! ```
//!
//! List sections take whitespace-separated identifiers. Every line after
//! `delta:` that is not blank or a comment is a transition row.

use thiserror::Error;

use super::{Move, Rule, TmError, TmSpec, ValidatedSpec};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("line {line}, column {column}: {msg}")]
    SyntaxError {
        line: usize,
        column: usize,
        msg: String,
    },
    #[error("{}{source}", .line.map(|l| format!("line {l}: ")).unwrap_or_default())]
    Validation {
        line: Option<usize>,
        source: TmError,
    },
}

impl ParseError {
    pub fn line(&self) -> Option<usize> {
        match self {
            ParseError::SyntaxError { line, .. } => Some(*line),
            ParseError::Validation { line, .. } => *line,
        }
    }
}

fn syntax(line: usize, column: usize, msg: impl Into<String>) -> ParseError {
    ParseError::SyntaxError {
        line,
        column,
        msg: msg.into(),
    }
}

const SECTIONS: [&str; 6] = ["states", "alphabet", "blank", "start", "accept", "delta"];

/// Whitespace-separated words with their 1-based columns.
fn words(text: &str, offset: usize) -> Vec<(usize, &str)> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, c) in text.char_indices() {
        match (c.is_whitespace(), start) {
            (true, Some(s)) => {
                out.push((offset + s + 1, &text[s..i]));
                start = None;
            }
            (false, None) => start = Some(i),
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push((offset + s + 1, &text[s..]));
    }
    out
}

fn parse_rule(line_no: usize, line: &str) -> Result<Rule, ParseError> {
    let w = words(line, 0);
    let end = line.trim_end().len() + 1;
    if w.len() != 6 {
        let column = w.get(6).map_or(end, |&(c, _)| c);
        return Err(syntax(
            line_no,
            column,
            format!("expected `state symbol -> state symbol L|R`, found {} fields", w.len()),
        ));
    }
    if w[2].1 != "->" {
        return Err(syntax(line_no, w[2].0, "expected `->`"));
    }
    let dir = match w[5].1 {
        "L" => Move::Left,
        "R" => Move::Right,
        other => {
            return Err(syntax(
                line_no,
                w[5].0,
                format!("move must be L or R, found `{other}`"),
            ))
        }
    };
    Ok(Rule {
        state: w[0].1.to_string(),
        read: w[1].1.to_string(),
        next: w[3].1.to_string(),
        write: w[4].1.to_string(),
        dir,
    })
}

/// Parse and validate a `.tm` file.
pub fn parse_spec(text: &str) -> Result<ValidatedSpec, ParseError> {
    let mut lists: [Option<(usize, Vec<String>)>; 5] = Default::default();
    let mut rules = Vec::new();
    let mut rule_lines = Vec::new();
    let mut in_delta = false;
    let mut seen_delta = false;
    let mut last_line = 0;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        last_line = line_no;
        if raw.starts_with('#') || raw.trim().is_empty() {
            continue;
        }
        let trimmed = raw.trim_start();
        let indent = raw.len() - trimmed.len();
        let header = trimmed
            .split_once(':')
            .filter(|(name, _)| SECTIONS.contains(&name.trim_end()));
        if let Some((name, rest)) = header {
            let name = name.trim_end();
            let rest_offset = indent + trimmed.len() - rest.len();
            if name == "delta" {
                if seen_delta {
                    return Err(syntax(line_no, indent + 1, "duplicate `delta:` section"));
                }
                if let Some(&(column, _)) = words(rest, rest_offset).first() {
                    return Err(syntax(line_no, column, "`delta:` takes no values on its line"));
                }
                seen_delta = true;
                in_delta = true;
                continue;
            }
            in_delta = false;
            let slot = SECTIONS.iter().position(|s| *s == name).unwrap();
            if lists[slot].is_some() {
                return Err(syntax(line_no, indent + 1, format!("duplicate `{name}:` section")));
            }
            let values: Vec<String> = words(rest, rest_offset)
                .into_iter()
                .map(|(_, w)| w.to_string())
                .collect();
            let single = slot >= 2;
            if values.is_empty() || (single && values.len() != 1) {
                let what = if single { "exactly one identifier" } else { "at least one identifier" };
                return Err(syntax(line_no, indent + name.len() + 2, format!("`{name}:` takes {what}")));
            }
            lists[slot] = Some((line_no, values));
            continue;
        }
        if !in_delta {
            return Err(syntax(line_no, indent + 1, "expected a section header"));
        }
        rules.push(parse_rule(line_no, raw)?);
        rule_lines.push(line_no);
    }

    let missing_line = last_line.max(1);
    let mut take = |slot: usize| {
        lists[slot].take().ok_or_else(|| {
            syntax(missing_line, 1, format!("missing `{}:` section", SECTIONS[slot]))
        })
    };
    let (_, states) = take(0)?;
    let (_, alphabet) = take(1)?;
    let (_, mut blank) = take(2)?;
    let (_, mut start) = take(3)?;
    let (_, mut accept) = take(4)?;
    if !seen_delta {
        return Err(syntax(missing_line, 1, "missing `delta:` section"));
    }

    let spec = TmSpec {
        states,
        alphabet,
        blank: blank.remove(0),
        start: start.remove(0),
        accept: accept.remove(0),
        rules,
    };
    ValidatedSpec::new(spec).map_err(|source| ParseError::Validation {
        line: source.row().map(|r| rule_lines[r]),
        source,
    })
}

/// Canonical text form; `parse_spec(&serialize_spec(s))` reproduces `s`.
pub fn serialize_spec(spec: &TmSpec) -> String {
    let mut out = String::new();
    out.push_str(&format!("states: {}\n", spec.states.join(" ")));
    out.push_str(&format!("alphabet: {}\n", spec.alphabet.join(" ")));
    out.push_str(&format!("blank: {}\n", spec.blank));
    out.push_str(&format!("start: {}\n", spec.start));
    out.push_str(&format!("accept: {}\n", spec.accept));
    out.push_str("delta:\n");
    for r in &spec.rules {
        out.push_str(&format!(
            "{} {} -> {} {} {}\n",
            r.state, r.read, r.next, r.write, r.dir
        ));
    }
    out
}
