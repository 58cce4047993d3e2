//! Output parsers for agent replies. Each returns `None` when the reply does
//! not follow the expected format; callers apply their own fallback.

use crate::model::Verdict;

/// Number of leading tokens scanned for a keyword answer.
pub const KEYWORD_WINDOW: usize = 10;

fn tokens(reply: &str) -> impl Iterator<Item = String> + '_ {
    reply
        .split_whitespace()
        .map(|t| t.trim_matches(|c: char| !c.is_alphanumeric()).to_ascii_lowercase())
        .filter(|t| !t.is_empty())
        .take(KEYWORD_WINDOW)
}

fn first_keyword<T: Copy>(reply: &str, table: &[(&str, T)]) -> Option<T> {
    tokens(reply).find_map(|tok| table.iter().find(|(k, _)| *k == tok).map(|(_, v)| *v))
}

pub fn parse_yes_no(reply: &str) -> Option<bool> {
    first_keyword(reply, &[("yes", true), ("no", false)])
}

pub fn parse_verdict(reply: &str) -> Option<Verdict> {
    first_keyword(reply, &[("true", Verdict::True), ("false", Verdict::False)])
}

fn strip_list_marker(line: &str) -> Option<&str> {
    let line = line.trim_start();
    let digits = line.bytes().take_while(u8::is_ascii_digit).count();
    let rest = if digits > 0 {
        let after = &line[digits..];
        after.strip_prefix('.').or_else(|| after.strip_prefix(')'))?
    } else {
        let mut chars = line.chars();
        match chars.next()? {
            '-' | '*' | '•' => chars.as_str(),
            _ => return None,
        }
    };
    if !rest.starts_with(char::is_whitespace) {
        return None;
    }
    Some(rest.trim())
}

fn clean_query(text: &str) -> String {
    let text = text.trim().trim_matches(|c| matches!(c, '"' | '\'' | '`' | '“' | '”'));
    let text = text.trim_matches('*').trim();
    text.to_string()
}

/// Parses a numbered or bulleted list, one entry per line.
pub fn parse_list(reply: &str) -> Option<Vec<String>> {
    let items: Vec<String> = reply
        .lines()
        .filter_map(strip_list_marker)
        .map(clean_query)
        .filter(|q| !q.is_empty())
        .collect();
    if items.is_empty() {
        None
    } else {
        Some(items)
    }
}

/// Parses a ranking of `n` results given as 1-based numbers. Numbers the
/// reply omits are appended in their original order. Any out-of-range or
/// repeated number rejects the whole reply.
pub fn parse_permutation(reply: &str, n: usize) -> Option<Vec<usize>> {
    let mut order = Vec::with_capacity(n);
    let mut seen = vec![false; n];
    for raw in reply.split(|c: char| !c.is_ascii_digit()).filter(|s| !s.is_empty()) {
        let idx: usize = raw.parse().ok()?;
        if idx == 0 || idx > n || seen[idx - 1] {
            return None;
        }
        seen[idx - 1] = true;
        order.push(idx - 1);
    }
    if order.is_empty() {
        return None;
    }
    order.extend((0..n).filter(|i| !seen[*i]));
    Some(order)
}

#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct HelpfulnessJudgment {
    pub helpful: bool,
    pub note: String,
}

impl HelpfulnessJudgment {
    pub fn not_helpful() -> Self {
        Self { helpful: false, note: String::new() }
    }
}

fn strip_prefix_ci<'a>(text: &'a str, prefix: &str) -> Option<&'a str> {
    let head = text.get(..prefix.len())?;
    head.eq_ignore_ascii_case(prefix).then(|| &text[prefix.len()..])
}

/// Parses `HELPFUL: <note>` / `NOT HELPFUL`. The note may continue on the
/// following lines, optionally prefixed with `Note:`. A helpful verdict
/// without a note is rejected.
pub fn parse_helpfulness(reply: &str) -> Option<HelpfulnessJudgment> {
    let mut lines = reply.lines().map(str::trim).skip_while(|l| l.is_empty());
    let first = lines.next()?;
    let first = first.trim_start_matches(['*', '#', '-', ' ']);
    for negative in ["NOT HELPFUL", "UNHELPFUL", "NOT_HELPFUL"] {
        if strip_prefix_ci(first, negative).is_some() {
            return Some(HelpfulnessJudgment::not_helpful());
        }
    }
    let rest = strip_prefix_ci(first, "HELPFUL")?;
    if rest.starts_with(|c: char| c.is_alphanumeric()) {
        return None;
    }
    let mut parts: Vec<&str> = Vec::new();
    let inline = rest.trim_start_matches(['*', ':', '-', '—', ' ']).trim();
    if !inline.is_empty() {
        parts.push(inline);
    }
    for line in lines {
        let line = strip_prefix_ci(line, "note:").unwrap_or(line).trim();
        if !line.is_empty() {
            parts.push(line);
        }
    }
    let note = parts.join(" ");
    if note.is_empty() {
        return None;
    }
    Some(HelpfulnessJudgment { helpful: true, note })
}
