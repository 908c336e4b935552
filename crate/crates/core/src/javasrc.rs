//! Lexical helpers for Java source text.

/// Returns `src` with comment bodies and string/char literal contents
/// replaced by spaces. Newlines are preserved and the byte length is
/// unchanged, so offsets line up with the original.
pub fn mask_comments_and_literals(src: &str) -> String {
    #[derive(Clone, Copy, PartialEq)]
    enum St {
        Code,
        Line,
        Block,
        Str,
        TextBlock,
        Char,
    }
    let b = src.as_bytes();
    let mut out = Vec::with_capacity(b.len());
    let mut st = St::Code;
    let mut i = 0;
    let blank = |c: u8| if c == b'\n' { b'\n' } else { b' ' };
    while i < b.len() {
        let c = b[i];
        match st {
            St::Code => {
                if b[i..].starts_with(b"//") {
                    st = St::Line;
                    out.extend_from_slice(b"  ");
                    i += 2;
                } else if b[i..].starts_with(b"/*") {
                    st = St::Block;
                    out.extend_from_slice(b"  ");
                    i += 2;
                } else if b[i..].starts_with(b"\"\"\"") {
                    st = St::TextBlock;
                    out.extend_from_slice(b"\"\"\"");
                    i += 3;
                } else if c == b'"' {
                    st = St::Str;
                    out.push(c);
                    i += 1;
                } else if c == b'\'' {
                    st = St::Char;
                    out.push(c);
                    i += 1;
                } else {
                    out.push(c);
                    i += 1;
                }
            }
            St::Line => {
                if c == b'\n' {
                    st = St::Code;
                }
                out.push(blank(c));
                i += 1;
            }
            St::Block => {
                if b[i..].starts_with(b"*/") {
                    st = St::Code;
                    out.extend_from_slice(b"  ");
                    i += 2;
                } else {
                    out.push(blank(c));
                    i += 1;
                }
            }
            St::Str | St::Char => {
                let close = if st == St::Str { b'"' } else { b'\'' };
                if c == b'\\' && i + 1 < b.len() {
                    out.push(b' ');
                    out.push(blank(b[i + 1]));
                    i += 2;
                } else if c == close {
                    st = St::Code;
                    out.push(c);
                    i += 1;
                } else if c == b'\n' {
                    // Unterminated literal: recover at end of line.
                    st = St::Code;
                    out.push(c);
                    i += 1;
                } else {
                    out.push(b' ');
                    i += 1;
                }
            }
            St::TextBlock => {
                if c == b'\\' && i + 1 < b.len() {
                    out.push(b' ');
                    out.push(blank(b[i + 1]));
                    i += 2;
                } else if b[i..].starts_with(b"\"\"\"") {
                    st = St::Code;
                    out.extend_from_slice(b"\"\"\"");
                    i += 3;
                } else {
                    out.push(blank(c));
                    i += 1;
                }
            }
        }
    }
    // Multi-byte characters were blanked byte by byte, or copied whole in
    // code, so the result is valid UTF-8 except where a literal ended in the
    // middle of one; fall back to a lossy conversion there.
    String::from_utf8(out).unwrap_or_else(|e| String::from_utf8_lossy(e.as_bytes()).into_owned())
}

/// Byte offset just past the `}` matching the first `{` at or after `from`,
/// scanning masked text.
pub fn matching_brace_end(masked: &str, from: usize) -> Option<usize> {
    let mut depth = 0usize;
    let mut opened = false;
    for (i, c) in masked[from..].char_indices() {
        match c {
            '{' => {
                depth += 1;
                opened = true;
            }
            '}' if opened => {
                depth -= 1;
                if depth == 0 {
                    return Some(from + i + 1);
                }
            }
            _ => {}
        }
    }
    None
}
