//! Free-text method signatures: normalization, parsing, and matching
//! against documented overload sets.

mod matching;
mod normalize;
mod parse;

pub use matching::{
    classify_task1_error, detect_overload_merge, exact_method, match_in_database, match_signature, types_equal,
    MatchOptions, MatchVerdict, MismatchPart, SignatureError, Task1ErrorKind, VerdictKind,
};
pub use normalize::normalize_type;
pub use parse::{parse_signature, ParseStatus, ParsedSignature};
