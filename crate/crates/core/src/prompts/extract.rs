use std::ops::Range;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::javasrc::{mask_comments_and_literals, matching_brace_end};

/// `N.` index, optional bullet, delimited span, colon.
static DELIMITED: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r#"^\s*(?:\d+[.)]\s*)?(?:[-*+]\s+)?(?:\*\*)?(?:`([^`\n]+)`|"([^"\n]+)"|“([^”\n]+)”)(?:\*\*)?\s*:"#,
    )
    .unwrap()
});

/// `<tokens> <identifier>(...)` with optional `: prose`.
static SHAPED: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"^\s*(?:\d+[.)]\s*)?(?:[-*+]\s+)?((?:[\w$.<>\[\]?,@]+\s+)*[A-Za-z_$][\w$]*\s*\([^()\n]*\))\s*(?::.*)?$",
    )
    .unwrap()
});

static FENCE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?s)```[^\n]*\n(.*?)(?:```|\z)").unwrap());

static PUBLIC_CLASS: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?m)^[ \t]*public\s+(?:final\s+)?class\s+[A-Za-z_$][\w$]*").unwrap());

static IMPORT_LINE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^\s*(?:import\s+[\w.*\s]+;|package\s+[\w.]+;)\s*$").unwrap());

static PROBE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?i)\b(yes|no)\b").unwrap());

/// Raw signature strings recommended in a response, in order, duplicates kept.
pub fn extract_api_lines(response: &str) -> Vec<String> {
    extract_api_line_spans(response).into_iter().map(|(s, _)| s).collect()
}

/// Like [`extract_api_lines`], with the byte range of each signature in
/// `response`.
pub fn extract_api_line_spans(response: &str) -> Vec<(String, Range<usize>)> {
    let mut out = Vec::new();
    let mut offset = 0;
    for raw in response.split_inclusive('\n') {
        let line = raw.trim_end_matches(['\n', '\r']);
        let base = offset;
        offset += raw.len();
        let span = if let Some(c) = DELIMITED.captures(line) {
            c.get(1).or_else(|| c.get(2)).or_else(|| c.get(3))
        } else {
            SHAPED.captures(line).and_then(|c| c.get(1))
        };
        let Some(m) = span else { continue };
        let text = m.as_str();
        let trimmed = text.trim();
        if trimmed.is_empty() {
            continue;
        }
        let lead = text.len() - text.trim_start().len();
        let start = base + m.start() + lead;
        out.push((trimmed.to_string(), start..start + trimmed.len()));
    }
    out
}

fn plausible_code(s: &str) -> bool {
    s.contains('(') && s.contains('{')
}

/// Code example in a response: first fenced block, else the text after a
/// `Code snippet:` marker, else the first `public class` with its imports.
pub fn extract_code(response: &str) -> Option<String> {
    if let Some(c) = FENCE.captures(response) {
        let body = c[1].trim_end().to_string();
        if plausible_code(&body) {
            return Some(body);
        }
    }
    if let Some(code) = after_marker(response).filter(|c| plausible_code(c)) {
        return Some(code);
    }
    public_class_span(response).filter(|c| plausible_code(c))
}

fn looks_like_code_line(line: &str) -> bool {
    let t = line.trim();
    t.ends_with(';')
        || t.ends_with('{')
        || t.ends_with('}')
        || t.starts_with("//")
        || t.starts_with("/*")
        || t.starts_with('*')
        || t.starts_with('@')
        || t.starts_with("import ")
        || t.starts_with("package ")
        || t.starts_with("public ")
        || t.starts_with("class ")
}

fn flush<'a>(para: &mut Vec<(&'a str, &'a str)>, depth: &mut i64, out: &mut Vec<&'a str>) -> bool {
    if para.is_empty() {
        return true;
    }
    let code_like = *depth > 0 || para.iter().any(|(l, _)| looks_like_code_line(l));
    if !code_like {
        return false;
    }
    for (l, m) in para.drain(..) {
        *depth += m.matches('{').count() as i64 - m.matches('}').count() as i64;
        out.push(l);
    }
    true
}

fn after_marker(response: &str) -> Option<String> {
    let idx = response.find("Code snippet:")?;
    let rest = &response[idx + "Code snippet:".len()..];
    let rest = rest.strip_prefix(['\r', '\n']).unwrap_or(rest);
    let masked = mask_comments_and_literals(rest);

    let mut out: Vec<&str> = Vec::new();
    let mut depth: i64 = 0;
    let mut offset = 0;
    // Paragraphs are separated by blank lines; keep going while inside braces
    // or while the paragraph reads as code.
    let mut para: Vec<(&str, &str)> = Vec::new();
    let raw_lines: Vec<&str> = rest.split_inclusive('\n').collect();
    for raw in raw_lines {
        let m = &masked[offset..offset + raw.len()];
        offset += raw.len();
        if raw.trim().is_empty() {
            if !flush(&mut para, &mut depth, &mut out) {
                break;
            }
            if depth > 0 {
                out.push(raw);
            }
            continue;
        }
        if raw.trim_start().starts_with("```") {
            continue;
        }
        para.push((raw, m));
    }
    flush(&mut para, &mut depth, &mut out);
    let text = out.concat().trim().to_string();
    (!text.is_empty()).then_some(text)
}

fn public_class_span(response: &str) -> Option<String> {
    let masked = mask_comments_and_literals(response);
    let m = PUBLIC_CLASS.find(&masked)?;
    let end = matching_brace_end(&masked, m.start())?;
    let line_start = response[..m.start()].rfind('\n').map_or(0, |i| i + 1);

    // Contiguous import lines above, blank lines between them tolerated.
    let mut start = line_start;
    let before = &response[..line_start];
    let mut cursor = before.len();
    for line in before.lines().rev() {
        let line_len = line.len() + 1;
        if line.trim().is_empty() {
            cursor = cursor.saturating_sub(line_len);
            continue;
        }
        if IMPORT_LINE.is_match(line) {
            cursor = cursor.saturating_sub(line_len);
            start = cursor;
        } else {
            break;
        }
    }
    Some(response[start..end].trim().to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ProbeAnswer {
    Yes,
    No,
    Unparseable,
}

impl ProbeAnswer {
    /// Binary value used as a factor; unparseable counts as no.
    pub fn as_bool(self) -> bool {
        self == ProbeAnswer::Yes
    }
}

pub fn parse_probe_answer(response: &str) -> ProbeAnswer {
    match PROBE.captures(response) {
        Some(c) if c[1].eq_ignore_ascii_case("yes") => ProbeAnswer::Yes,
        Some(_) => ProbeAnswer::No,
        None => ProbeAnswer::Unparseable,
    }
}
