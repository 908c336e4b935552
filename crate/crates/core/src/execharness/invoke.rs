use std::sync::LazyLock;

use regex::Regex;

use crate::apidoc::MethodSpec;
use crate::javasrc::mask_comments_and_literals;

/// Lexical check that `code` calls `m`: `name(` for methods, `new Class(`
/// for constructors, ignoring comments and literals. The receiver is not
/// type-checked.
pub fn invokes_api(code: &str, m: &MethodSpec) -> bool {
    let masked = mask_comments_and_literals(code);
    let name = regex::escape(&m.simple_name);
    let pattern = if m.is_constructor() {
        // Nested classes may be written qualified: `new Base64.Decoder(`.
        format!(r"\bnew\s+(?:[\w$]+\s*\.\s*)*{name}\s*(?:<[^()]*>)?\s*\(")
    } else {
        format!(r"(?:^|[^\w$]){name}\s*\(")
    };
    Regex::new(&pattern).map(|re| re.is_match(&masked)).unwrap_or(false)
}

static PUBLIC_CLASS: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?m)^\s*public\s+(?:(?:final|abstract|strictfp)\s+)*class\s+([A-Za-z_$][\w$]*)").unwrap()
});
static ANY_CLASS: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\bclass\s+([A-Za-z_$][\w$]*)").unwrap());

/// Name of the class to compile and run: the public top-level class, else
/// the first declared class, else `Main`.
pub fn main_class_name(code: &str) -> String {
    let masked = mask_comments_and_literals(code);
    PUBLIC_CLASS
        .captures(&masked)
        .or_else(|| ANY_CLASS.captures(&masked))
        .map(|c| c[1].to_string())
        .unwrap_or_else(|| "Main".to_string())
}
