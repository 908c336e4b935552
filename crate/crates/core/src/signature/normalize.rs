/// Canonical text for a type written by a model or taken from documentation.
///
/// * package qualifiers are dropped (`java.lang.String` becomes `String`,
///   `java.util.Map.Entry` becomes `Map.Entry`)
/// * whitespace is removed except a single space between two word tokens
///   (`? extends Number`)
/// * varargs `X...` become `X[]`
pub fn normalize_type(text: &str) -> String {
    let tokens = tokenize(text);
    let mut out = String::with_capacity(text.len());
    let mut prev_word = false;
    for tok in tokens {
        match tok {
            Tok::Word(w, spaced) => {
                if prev_word && spaced {
                    out.push(' ');
                }
                out.push_str(&strip_qualifier(&w));
                prev_word = true;
            }
            Tok::Ellipsis => {
                out.push_str("[]");
                prev_word = false;
            }
            Tok::Punct(c) => {
                out.push(c);
                prev_word = false;
            }
        }
    }
    out
}

enum Tok {
    /// Dotted word and whether whitespace preceded it.
    Word(String, bool),
    Ellipsis,
    Punct(char),
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '$' || c == '?' || c == '@'
}

fn tokenize(text: &str) -> Vec<Tok> {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    let mut spaced = false;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            spaced = true;
            i += 1;
            continue;
        }
        if let Some(end) = ellipsis_end(&chars, i) {
            tokens.push(Tok::Ellipsis);
            i = end;
            spaced = false;
            continue;
        }
        if is_word_char(c) {
            let mut word = String::new();
            // A word is a dotted chain; whitespace around the dots is dropped.
            loop {
                while i < chars.len() && is_word_char(chars[i]) {
                    word.push(chars[i]);
                    i += 1;
                }
                let mut j = i;
                while j < chars.len() && chars[j].is_whitespace() {
                    j += 1;
                }
                let single_dot = j < chars.len()
                    && chars[j] == '.'
                    && ellipsis_end(&chars, j).is_none();
                if !single_dot {
                    break;
                }
                let mut k = j + 1;
                while k < chars.len() && chars[k].is_whitespace() {
                    k += 1;
                }
                if k < chars.len() && is_word_char(chars[k]) && chars[k] != '?' {
                    word.push('.');
                    i = k;
                } else {
                    break;
                }
            }
            tokens.push(Tok::Word(word, spaced));
            spaced = false;
            continue;
        }
        tokens.push(Tok::Punct(c));
        spaced = false;
        i += 1;
    }
    tokens
}

/// End index of three dots starting at `i`, whitespace between them allowed.
fn ellipsis_end(chars: &[char], i: usize) -> Option<usize> {
    let mut k = i;
    for n in 0..3 {
        if n > 0 {
            while k < chars.len() && chars[k].is_whitespace() {
                k += 1;
            }
        }
        if chars.get(k) != Some(&'.') {
            return None;
        }
        k += 1;
    }
    Some(k)
}

/// Drops leading lowercase segments of a dotted name while at least one
/// segment remains.
fn strip_qualifier(word: &str) -> String {
    let segments: Vec<&str> = word.split('.').collect();
    let mut start = 0;
    while start + 1 < segments.len()
        && segments[start]
            .chars()
            .next()
            .is_some_and(|c| c.is_lowercase())
    {
        start += 1;
    }
    segments[start..].join(".")
}
