use serde::{Deserialize, Serialize};

use super::normalize_type;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ParseStatus {
    WellFormed,
    MissingReturnType,
    Malformed,
}

/// A signature recommended by a model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedSignature {
    pub raw: String,
    pub return_type: Option<String>,
    pub simple_name: Option<String>,
    pub param_types: Vec<String>,
    pub is_static: bool,
    pub status: ParseStatus,
}

impl ParsedSignature {
    fn malformed(raw: &str) -> Self {
        ParsedSignature {
            raw: raw.to_string(),
            return_type: None,
            simple_name: None,
            param_types: Vec::new(),
            is_static: false,
            status: ParseStatus::Malformed,
        }
    }

    /// Canonical text used to compare recommendations across runs. Malformed
    /// lines fall back to their whitespace-collapsed raw text.
    pub fn canonical(&self) -> String {
        match (&self.status, &self.simple_name) {
            (ParseStatus::Malformed, _) | (_, None) => {
                self.raw.split_whitespace().collect::<Vec<_>>().join(" ")
            }
            (_, Some(name)) => {
                let params = self.param_types.join(", ");
                match &self.return_type {
                    Some(rt) => format!("{rt} {name}({params})"),
                    None => format!("{name}({params})"),
                }
            }
        }
    }
}

const MODIFIERS: &[&str] = &[
    "public",
    "protected",
    "private",
    "static",
    "final",
    "abstract",
    "synchronized",
    "native",
    "default",
    "strictfp",
    "transient",
    "volatile",
];

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_alphabetic() || c == '_' || c == '$' => {}
        _ => return false,
    }
    chars.all(|c| c.is_alphanumeric() || c == '_' || c == '$')
}

/// Characters a type expression may contain.
fn is_type_text(s: &str) -> bool {
    !s.is_empty()
        && s.chars().next().is_some_and(|c| c.is_alphabetic() || c == '_' || c == '$' || c == '?')
        && s.chars().all(|c| {
            c.is_alphanumeric()
                || matches!(c, '_' | '$' | '.' | '<' | '>' | '[' | ']' | '?' | ',' | ' ')
        })
        && balanced_angles(s)
}

fn balanced_angles(s: &str) -> bool {
    let mut depth = 0i32;
    for c in s.chars() {
        match c {
            '<' => depth += 1,
            '>' => {
                depth -= 1;
                if depth < 0 {
                    return false;
                }
            }
            _ => {}
        }
    }
    depth == 0
}

/// Splits on `sep` characters at angle-bracket depth zero.
fn split_top_level(s: &str, is_sep: impl Fn(char) -> bool) -> Vec<String> {
    let mut parts = Vec::new();
    let mut cur = String::new();
    let mut depth = 0i32;
    for c in s.chars() {
        match c {
            '<' => depth += 1,
            '>' => depth -= 1,
            _ => {}
        }
        if depth == 0 && is_sep(c) {
            parts.push(std::mem::take(&mut cur));
        } else {
            cur.push(c);
        }
    }
    parts.push(cur);
    parts
}

/// Whitespace-separated words, keeping generic arguments and any whitespace
/// before `<`, `[` or `...` attached to the preceding word.
fn words(s: &str) -> Vec<String> {
    let squeezed = glue_suffixes(s);
    split_top_level(&squeezed, char::is_whitespace)
        .into_iter()
        .filter(|w| !w.is_empty())
        .collect()
}

fn glue_suffixes(s: &str) -> String {
    let chars: Vec<char> = s.chars().collect();
    let mut out = String::with_capacity(s.len());
    let mut i = 0;
    while i < chars.len() {
        if chars[i].is_whitespace() {
            let mut j = i;
            while j < chars.len() && chars[j].is_whitespace() {
                j += 1;
            }
            if j < chars.len() && matches!(chars[j], '<' | '[' | ']' | '.' | '>' | ',') {
                i = j;
                continue;
            }
            // Whitespace after an opening bracket or a comma inside generics is
            // handled by split_top_level's depth tracking.
            out.push(' ');
            i = j;
            continue;
        }
        out.push(chars[i]);
        i += 1;
    }
    out
}

/// Parses one extracted signature line. Total: every input yields a value.
///
/// Grammar: `[modifiers] [<T,...>] returnType name(type [name], ...)
/// [throws ...]`. `name(...)` with nothing before it parses as
/// [`ParseStatus::MissingReturnType`].
pub fn parse_signature(text: &str) -> ParsedSignature {
    let raw = text;
    let mut s = text.trim();
    s = s.trim_end_matches([';', ':']).trim();
    for (open, close) in [('`', '`'), ('"', '"'), ('\'', '\'')] {
        if s.len() >= 2 && s.starts_with(open) && s.ends_with(close) {
            s = s[1..s.len() - 1].trim();
        }
    }

    let Some(open) = s.find('(') else {
        return ParsedSignature::malformed(raw);
    };
    let Some(close) = s.rfind(')') else {
        return ParsedSignature::malformed(raw);
    };
    if close < open {
        return ParsedSignature::malformed(raw);
    }
    let tail = s[close + 1..].trim();
    if !(tail.is_empty() || tail.starts_with("throws ")) {
        return ParsedSignature::malformed(raw);
    }
    let inner = &s[open + 1..close];
    if inner.contains('(') || inner.contains(')') {
        return ParsedSignature::malformed(raw);
    }

    let head = s[..open].trim_end();
    let mut head_words = words(head);
    let Some(name) = head_words.pop() else {
        return ParsedSignature::malformed(raw);
    };
    if !is_identifier(&name) {
        return ParsedSignature::malformed(raw);
    }

    let mut is_static = false;
    let mut rest: Vec<String> = Vec::new();
    let mut seen_type = false;
    // `static <T>` is glued to `static<T>` by `words`; undo that here.
    let head_words = head_words.into_iter().flat_map(|w| match w.find('<') {
        Some(i) if MODIFIERS.contains(&&w[..i]) => vec![w[..i].to_string(), w[i..].to_string()],
        _ => vec![w],
    });
    for w in head_words {
        if !seen_type && MODIFIERS.contains(&w.as_str()) {
            is_static |= w == "static";
            continue;
        }
        if !seen_type && w.starts_with('<') && w.ends_with('>') {
            // Generic method type parameters.
            continue;
        }
        seen_type = true;
        rest.push(w);
    }
    let return_type = match rest.len() {
        0 => None,
        1 if is_type_text(&rest[0]) => Some(normalize_type(&rest[0])),
        _ => return ParsedSignature::malformed(raw),
    };

    let mut param_types = Vec::new();
    if !inner.trim().is_empty() {
        for param in split_top_level(inner, |c| c == ',') {
            match parse_param(&param) {
                Some(ty) => param_types.push(ty),
                None => return ParsedSignature::malformed(raw),
            }
        }
    }

    let status = if return_type.is_some() {
        ParseStatus::WellFormed
    } else {
        ParseStatus::MissingReturnType
    };
    ParsedSignature {
        raw: raw.to_string(),
        return_type,
        simple_name: Some(name),
        param_types,
        is_static,
        status,
    }
}

fn parse_param(param: &str) -> Option<String> {
    let mut ws: Vec<String> = words(param)
        .into_iter()
        .filter(|w| w != "final" && !w.starts_with('@'))
        .collect();
    match ws.len() {
        0 => None,
        1 => {
            let ty = ws.pop()?;
            is_type_text(&ty).then(|| normalize_type(&ty))
        }
        2 => {
            let name = ws.pop()?;
            let mut ty = ws.pop()?;
            // C-style array declarator: `int a[]`.
            let (name, dims) = match name.find('[') {
                Some(i) => (name[..i].to_string(), name[i..].to_string()),
                None => (name, String::new()),
            };
            if !is_identifier(&name) || dims.chars().any(|c| c != '[' && c != ']') {
                return None;
            }
            ty.push_str(&dims);
            is_type_text(&ty.replace("...", "[]")).then(|| normalize_type(&ty))
        }
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn one_shot_example() {
        let p = parse_signature("boolean add(E e)");
        assert_eq!(p.status, ParseStatus::WellFormed);
        assert_eq!(p.return_type.as_deref(), Some("boolean"));
        assert_eq!(p.simple_name.as_deref(), Some("add"));
        assert_eq!(p.param_types, ["E"]);
    }

    #[test]
    fn missing_return_type() {
        let p = parse_signature("clear()");
        assert_eq!(p.status, ParseStatus::MissingReturnType);
        assert_eq!(p.simple_name.as_deref(), Some("clear"));
        assert!(p.param_types.is_empty());
    }

    #[test]
    fn prose_is_malformed() {
        assert_eq!(
            parse_signature("This class provides utility methods").status,
            ParseStatus::Malformed
        );
        assert_eq!(
            parse_signature("returns the value of foo(x)").status,
            ParseStatus::Malformed
        );
        assert_eq!(parse_signature("").status, ParseStatus::Malformed);
        assert_eq!(parse_signature("Base64.getDecoder()").status, ParseStatus::Malformed);
    }

    #[test]
    fn static_modifier_consumed() {
        let p = parse_signature("static byte[] decode(String src)");
        assert_eq!(p.status, ParseStatus::WellFormed);
        assert!(p.is_static);
        assert_eq!(p.return_type.as_deref(), Some("byte[]"));
        assert_eq!(p.simple_name.as_deref(), Some("decode"));
        assert_eq!(p.param_types, ["String"]);
    }

    #[test]
    fn generics_varargs_and_qualifiers() {
        let p = parse_signature("public static <T> java.util.List<T> asList(T... a)");
        assert_eq!(p.status, ParseStatus::WellFormed);
        assert_eq!(p.return_type.as_deref(), Some("List<T>"));
        assert_eq!(p.param_types, ["T[]"]);

        let p = parse_signature("V put(K key, Map<String, List<Integer>> value)");
        assert_eq!(p.param_types, ["K", "Map<String,List<Integer>>"]);

        let p = parse_signature("boolean addAll(Collection<? extends E> c)");
        assert_eq!(p.param_types, ["Collection<? extends E>"]);

        let p = parse_signature("void fill(int a[], final int val)");
        assert_eq!(p.param_types, ["int[]", "int"]);
    }

    #[test]
    fn throws_clause_and_delimiters() {
        let p = parse_signature("`int read() throws IOException`");
        assert_eq!(p.status, ParseStatus::WellFormed);
        assert_eq!(p.simple_name.as_deref(), Some("read"));
        let p = parse_signature("int read() and more");
        assert_eq!(p.status, ParseStatus::Malformed);
    }

    #[test]
    fn params_without_names() {
        let p = parse_signature("V remove(Object)");
        assert_eq!(p.param_types, ["Object"]);
        assert_eq!(parse_signature("V remove(Object,,)").status, ParseStatus::Malformed);
    }

    #[test]
    fn canonical_form() {
        assert_eq!(
            parse_signature("public boolean  add(E e)").canonical(),
            "boolean add(E)"
        );
        assert_eq!(parse_signature("clear( )").canonical(), "clear()");
    }

    proptest! {
        #[test]
        fn total(s in "\\PC{0,60}") {
            let p = parse_signature(&s);
            if p.status == ParseStatus::WellFormed {
                prop_assert!(p.return_type.is_some());
                prop_assert!(p.simple_name.as_deref().is_some_and(|n| !n.is_empty()));
            }
        }
    }
}
