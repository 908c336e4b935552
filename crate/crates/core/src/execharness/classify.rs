//! Rule cascade mapping failed outcomes to error categories. Understands
//! both javac and Janino diagnostics.

use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::{ExecError, ExecOutcome, OutcomeKind};
use crate::apidoc::{ApiDatabase, MethodSpec};
use crate::javasrc::{mask_comments_and_literals, matching_brace_end};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ErrorTopType {
    Hallucination,
    CompilationError,
    RuntimeError,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ErrorSubType {
    FactualFabrication,
    FactualInconsistency,
    InstructionInconsistency,
    ContextInconsistency,
    TypeMismatch,
    MissingImportStatement,
    PolymorphismError,
    UndeclaredSymbol,
    ApiMisuseCompile,
    InitializationError,
    ExceptionHandlingError,
    TimeoutError,
    ConnectionError,
    MissingExternalResource,
    ApiMisuseRuntime,
    DeprecatedError,
    Unclassified,
}

impl ErrorSubType {
    pub const ALL: [ErrorSubType; 17] = [
        ErrorSubType::FactualFabrication,
        ErrorSubType::FactualInconsistency,
        ErrorSubType::InstructionInconsistency,
        ErrorSubType::ContextInconsistency,
        ErrorSubType::TypeMismatch,
        ErrorSubType::MissingImportStatement,
        ErrorSubType::PolymorphismError,
        ErrorSubType::UndeclaredSymbol,
        ErrorSubType::ApiMisuseCompile,
        ErrorSubType::InitializationError,
        ErrorSubType::ExceptionHandlingError,
        ErrorSubType::TimeoutError,
        ErrorSubType::ConnectionError,
        ErrorSubType::MissingExternalResource,
        ErrorSubType::ApiMisuseRuntime,
        ErrorSubType::DeprecatedError,
        ErrorSubType::Unclassified,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ErrorSubType::FactualFabrication => "FactualFabrication",
            ErrorSubType::FactualInconsistency => "FactualInconsistency",
            ErrorSubType::InstructionInconsistency => "InstructionInconsistency",
            ErrorSubType::ContextInconsistency => "ContextInconsistency",
            ErrorSubType::TypeMismatch => "TypeMismatch",
            ErrorSubType::MissingImportStatement => "MissingImportStatement",
            ErrorSubType::PolymorphismError => "PolymorphismError",
            ErrorSubType::UndeclaredSymbol => "UndeclaredSymbol",
            ErrorSubType::ApiMisuseCompile => "ApiMisuseCompile",
            ErrorSubType::InitializationError => "InitializationError",
            ErrorSubType::ExceptionHandlingError => "ExceptionHandlingError",
            ErrorSubType::TimeoutError => "TimeoutError",
            ErrorSubType::ConnectionError => "ConnectionError",
            ErrorSubType::MissingExternalResource => "MissingExternalResource",
            ErrorSubType::ApiMisuseRuntime => "ApiMisuseRuntime",
            ErrorSubType::DeprecatedError => "DeprecatedError",
            ErrorSubType::Unclassified => "Unclassified",
        }
    }

    /// Fixed parent category; `None` for [`ErrorSubType::Unclassified`],
    /// whose parent follows the failing phase.
    pub fn top(self) -> Option<ErrorTopType> {
        use ErrorSubType::*;
        Some(match self {
            FactualFabrication | FactualInconsistency | InstructionInconsistency
            | ContextInconsistency => ErrorTopType::Hallucination,
            TypeMismatch | MissingImportStatement | PolymorphismError | UndeclaredSymbol
            | ApiMisuseCompile => ErrorTopType::CompilationError,
            InitializationError | ExceptionHandlingError | TimeoutError | ConnectionError
            | MissingExternalResource | ApiMisuseRuntime | DeprecatedError => {
                ErrorTopType::RuntimeError
            }
            Unclassified => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ErrorTaxonomyLabel {
    pub top: ErrorTopType,
    pub sub: ErrorSubType,
}

impl ErrorTaxonomyLabel {
    fn of(sub: ErrorSubType, phase: ErrorTopType) -> Self {
        ErrorTaxonomyLabel {
            top: sub.top().unwrap_or(phase),
            sub,
        }
    }
}

fn re(p: &str) -> Regex {
    Regex::new(p).expect("static regex")
}

static JAVAC_SYMBOL: LazyLock<Regex> =
    LazyLock::new(|| re(r"symbol:\s+(method|class|interface|enum|variable|constructor)\s+([\w$]+)"));
static JANINO_METHOD: LazyLock<Regex> =
    LazyLock::new(|| re(r#"A method named "([\w$]+)" is not declared"#));
static JANINO_TYPE: LazyLock<Regex> =
    LazyLock::new(|| re(r#"Cannot determine simple type name "([\w$]+)""#));
static JANINO_UNKNOWN: LazyLock<Regex> =
    LazyLock::new(|| re(r#"Unknown variable or type "([\w$.]+)""#));
static NO_SUITABLE: LazyLock<Regex> = LazyLock::new(|| {
    re(concat!(
        r"no suitable (?:method|constructor) found for ([\w$]+)\(",
        r"|(?:method|constructor) ([\w$]+) in (?:class|interface|enum) \S+ cannot be applied to given types",
        r#"|No applicable constructor/method found for [^;]*; candidates are: "([^"(]+)\("#,
    ))
});
static POLYMORPHISM: LazyLock<Regex> = LazyLock::new(|| {
    re(r#"is not abstract and does not override abstract method|Non-abstract class "[^"]*" must implement method"#)
});
static TYPE_MISMATCH: LazyLock<Regex> = LazyLock::new(|| {
    re(r"incompatible types|possible lossy conversion|Assignment conversion not possible|Incompatible (?:return|operand|expression|types)|Cannot cast|inconvertible types")
});
static API_MISUSE_COMPILE: LazyLock<Regex> = LazyLock::new(|| {
    re(concat!(
        r"non-static (?:method|variable) .* cannot be referenced from a static context",
        r"|has (?:private|protected) access|is not public in|cannot be invoked in static context",
        r"|(?:Private|Protected) member cannot be accessed|is not accessible",
        r"|is abstract; cannot be instantiated|cannot be instantiated",
    ))
});
static EXCEPTION_COMPILE: LazyLock<Regex> = LazyLock::new(|| {
    re(concat!(
        r"is never thrown in body of corresponding try statement",
        r"|unreported exception [\w$.]+; must be caught or declared to be thrown",
        r"|is neither caught by a .try\.\.\.catch. block nor declared",
        r"|Catch clause is unreachable",
    ))
});
static UNDECLARED: LazyLock<Regex> = LazyLock::new(|| {
    re(r"cannot find symbol|Unknown variable or type|is not declared|Cannot determine simple type name|package [\w.]+ does not exist")
});

static THROWN: LazyLock<Regex> = LazyLock::new(|| {
    re(r#"(?m)^(?:Exception in thread "[^"]*"|Caused by:)\s+([\w$.]+)(?::\s*(.*))?$"#)
});
static FRAME: LazyLock<Regex> =
    LazyLock::new(|| re(r"(?m)^\s+at\s+([\w$.<>/@]+)\(([^)]*)\)"));
static CATCH: LazyLock<Regex> = LazyLock::new(|| re(r"\bcatch\s*\("));

static CONNECTION: LazyLock<Regex> = LazyLock::new(|| {
    re(r"UnknownHostException|ConnectException|NoRouteToHostException|SocketTimeoutException|Connection refused|Network is unreachable|HttpTimeoutException|SSLHandshakeException")
});
static RESOURCE: LazyLock<Regex> = LazyLock::new(|| {
    re(r"FileNotFoundException|NoSuchFileException|No such file or directory|MissingResourceException|AccessDeniedException|No suitable driver")
});
static HEADLESS: LazyLock<Regex> = LazyLock::new(|| {
    re(r"HeadlessException|X11|DISPLAY|AWTError|UnsatisfiedLinkError|ExceptionInInitializerError")
});
static INIT_EXC: LazyLock<Regex> =
    LazyLock::new(|| re(r"^java\.lang\.(?:NullPointerException|IllegalArgumentException)$"));
static MISUSE_EXC: LazyLock<Regex> = LazyLock::new(|| {
    re(r"^java\.(?:lang|util)\.(?:IllegalStateException|UnsupportedOperationException|NumberFormatException|IllegalArgumentException|IllegalFormatException|UnknownFormatConversionException|MissingFormatArgumentException)$")
});
static REFUSAL: LazyLock<Regex> = LazyLock::new(|| {
    re(concat!(
        r"(?i)\b(?:is\s+not|isn't|are\s+not|aren't|does\s+not|doesn't|do\s+not|not)\s+",
        r"(?:actually\s+)?(?:a\s+)?(?:part\s+of|exist|belong|available|present|found\s+in|defined\s+in|declared\s+in|",
        r"(?:valid|real|standard|public)\s+(?:method|api|member)|(?:a\s+)?(?:method|member)\s+of|have\s+(?:a|any|the)?\s*(?:method|api))"
    ))
});

fn missing_symbols(diag: &str) -> Vec<(String, String)> {
    let mut out = Vec::new();
    for c in JAVAC_SYMBOL.captures_iter(diag) {
        let kind = match &c[1] {
            "interface" | "enum" => "class",
            k => k,
        };
        out.push((kind.to_string(), c[2].to_string()));
    }
    for c in JANINO_METHOD.captures_iter(diag) {
        out.push(("method".into(), c[1].to_string()));
    }
    for c in JANINO_TYPE.captures_iter(diag) {
        out.push(("class".into(), c[1].to_string()));
    }
    for c in JANINO_UNKNOWN.captures_iter(diag) {
        let name = c[1].rsplit('.').next().unwrap_or(&c[1]).to_string();
        let kind = if name.starts_with(|ch: char| ch.is_uppercase()) { "class" } else { "variable" };
        out.push((kind.into(), name));
    }
    out
}

fn name_documented(db: &ApiDatabase, name: &str) -> bool {
    db.any_method_named(name) || db.classes_by_simple_name(name).next().is_some()
}

fn refusal_contradicts_db(text: &str, m: &MethodSpec, db: &ApiDatabase) -> bool {
    if !text.contains(&m.simple_name) || !REFUSAL.is_match(text) {
        return false;
    }
    db.query_class(&m.fqcn())
        .is_some_and(|c| c.methods.iter().any(|x| x.simple_name == m.simple_name))
}

/// Line ranges (1-based, inclusive) covered by catch blocks.
fn catch_blocks(code: &str) -> Vec<(usize, usize)> {
    let masked = mask_comments_and_literals(code);
    let line_of = |off: usize| masked[..off].matches('\n').count() + 1;
    CATCH
        .find_iter(&masked)
        .filter_map(|m| {
            let end = matching_brace_end(&masked, m.end())?;
            Some((line_of(m.start()), line_of(end.saturating_sub(1))))
        })
        .collect()
}

struct Trace {
    exception: String,
    frames: Vec<(String, String)>,
}

fn parse_trace(stderr: &str) -> Option<Trace> {
    let c = THROWN.captures(stderr)?;
    let frames = FRAME
        .captures_iter(stderr)
        .map(|f| {
            // Drop a module prefix such as `java.base/`.
            let name = f[1].rsplit('/').next().unwrap_or(&f[1]);
            (name.to_string(), f[2].to_string())
        })
        .collect();
    Some(Trace {
        exception: c[1].to_string(),
        frames,
    })
}

/// Frames belonging to the example's own source file: `(method, line)`.
fn user_lines<'a>(trace: &'a Trace, main_file: &'a str) -> impl Iterator<Item = usize> + 'a {
    trace.frames.iter().filter_map(move |(_, loc)| {
        let (file, line) = loc.split_once(':')?;
        (file == main_file).then(|| line.parse().ok()).flatten()
    })
}

fn target_frame_name(m: &MethodSpec) -> String {
    format!("{}.{}", m.package_name, m.class_name.replace('.', "$"))
}

/// Assigns an error category to a failed outcome. First matching rule wins;
/// hallucination rules run before compile and runtime rules.
pub fn classify_error(
    outcome: &ExecOutcome,
    code: &str,
    response: Option<&str>,
    m: &MethodSpec,
    db: &ApiDatabase,
) -> Result<ErrorTaxonomyLabel, ExecError> {
    use ErrorSubType::*;
    let refusal = || {
        response.is_some_and(|r| refusal_contradicts_db(r, m, db)) || refusal_contradicts_db(code, m, db)
    };
    let hall = |s| ErrorTaxonomyLabel::of(s, ErrorTopType::Hallucination);
    match outcome.kind {
        OutcomeKind::Success => Err(ExecError::ClassifySuccess),
        OutcomeKind::NoApiInvoked => Ok(if refusal() {
            hall(ContextInconsistency)
        } else {
            hall(InstructionInconsistency)
        }),
        OutcomeKind::Timeout => Ok(ErrorTaxonomyLabel::of(TimeoutError, ErrorTopType::RuntimeError)),
        OutcomeKind::CompileError => {
            let phase = ErrorTopType::CompilationError;
            let diag = &outcome.stderr;
            let symbols = missing_symbols(diag);
            if symbols
                .iter()
                .any(|(k, n)| k == "method" && !db.any_method_named(n))
            {
                return Ok(hall(FactualFabrication));
            }
            for c in NO_SUITABLE.captures_iter(diag) {
                let raw = c.get(1).or_else(|| c.get(2)).or_else(|| c.get(3)).map_or("", |g| g.as_str());
                let name = raw.trim().rsplit('.').next().unwrap_or(raw);
                if name_documented(db, name) {
                    return Ok(hall(FactualInconsistency));
                }
            }
            let sub = if symbols.iter().any(|(k, _)| k == "class") {
                MissingImportStatement
            } else if POLYMORPHISM.is_match(diag) {
                PolymorphismError
            } else if TYPE_MISMATCH.is_match(diag) {
                TypeMismatch
            } else if API_MISUSE_COMPILE.is_match(diag) {
                ApiMisuseCompile
            } else if EXCEPTION_COMPILE.is_match(diag) {
                ExceptionHandlingError
            } else if UNDECLARED.is_match(diag) || !symbols.is_empty() {
                UndeclaredSymbol
            } else if NO_SUITABLE.is_match(diag) {
                ApiMisuseCompile
            } else if refusal() {
                ContextInconsistency
            } else {
                Unclassified
            };
            Ok(ErrorTaxonomyLabel::of(sub, phase))
        }
        OutcomeKind::RuntimeError => {
            let phase = ErrorTopType::RuntimeError;
            let err = &outcome.stderr;
            let trace = parse_trace(err);
            let main_file = format!("{}.java", super::main_class_name(code));
            if let Some(t) = &trace {
                let catches = catch_blocks(code);
                if user_lines(t, &main_file)
                    .take(1)
                    .any(|l| catches.iter().any(|&(a, b)| a <= l && l <= b))
                {
                    return Ok(ErrorTaxonomyLabel::of(ExceptionHandlingError, phase));
                }
            }
            if EXCEPTION_COMPILE.is_match(err) {
                return Ok(ErrorTaxonomyLabel::of(ExceptionHandlingError, phase));
            }
            if CONNECTION.is_match(err) {
                return Ok(ErrorTaxonomyLabel::of(ConnectionError, phase));
            }
            if RESOURCE.is_match(err) {
                return Ok(ErrorTaxonomyLabel::of(MissingExternalResource, phase));
            }
            if HEADLESS.is_match(err) {
                return Ok(ErrorTaxonomyLabel::of(InitializationError, phase));
            }
            if let Some(t) = &trace {
                let target = target_frame_name(m);
                let in_ctor = t
                    .frames
                    .iter()
                    .any(|(f, _)| f == &format!("{target}.<init>"));
                if INIT_EXC.is_match(&t.exception) && in_ctor {
                    return Ok(ErrorTaxonomyLabel::of(InitializationError, phase));
                }
                let at_call_site = t.frames.iter().any(|(f, _)| {
                    f.starts_with(&format!("{target}."))
                        || f.rsplit('.').next() == Some(m.simple_name.as_str())
                }) || {
                    let lines: Vec<&str> = code.lines().collect();
                    let call = format!("{}(", m.simple_name);
                    user_lines(t, &main_file)
                        .take(1)
                        .any(|l| lines.get(l.wrapping_sub(1)).is_some_and(|s| s.contains(&call)))
                };
                if MISUSE_EXC.is_match(&t.exception) && at_call_site {
                    return Ok(ErrorTaxonomyLabel::of(ApiMisuseRuntime, phase));
                }
            }
            if outcome.deprecation_warning || m.is_deprecated {
                return Ok(ErrorTaxonomyLabel::of(DeprecatedError, phase));
            }
            if refusal() {
                return Ok(hall(ContextInconsistency));
            }
            Ok(ErrorTaxonomyLabel::of(Unclassified, phase))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const DB: &str = r#"{"packages":[
      {"name":"java.util","description":"","classes":[
        {"fqcn":"java.util.Arrays","description":"","methods":[
          {"name":"sort","returnType":"void","params":[{"type":"int[]","name":"a"}],"static":true}]},
        {"fqcn":"java.util.ArrayList","description":"","methods":[
          {"name":"add","returnType":"boolean","params":[{"type":"E","name":"e"}]}]}]},
      {"name":"java.awt","description":"","classes":[
        {"fqcn":"java.awt.Canvas","description":"","methods":[
          {"name":"update","returnType":"void","params":[{"type":"Graphics","name":"g"}]}]}]},
      {"name":"java.awt.event","description":"","classes":[
        {"fqcn":"java.awt.event.MouseEvent","description":"","methods":[
          {"name":"MouseEvent","returnType":"«ctor»","params":[{"type":"Component"},{"type":"int"},{"type":"long"},{"type":"int"},{"type":"int"},{"type":"int"},{"type":"int"},{"type":"boolean"}]}]}]},
      {"name":"javax.management","description":"","classes":[
        {"fqcn":"javax.management.MBeanParameterInfo","description":"","methods":[
          {"name":"MBeanParameterInfo","returnType":"«ctor»","params":[{"type":"String"},{"type":"String"},{"type":"String"}]}]}]}
    ]}"#;

    fn db() -> ApiDatabase {
        ApiDatabase::from_json_str(DB).unwrap()
    }

    fn method(db: &ApiDatabase, fqcn: &str) -> MethodSpec {
        db.query_class(fqcn).unwrap().methods[0].clone()
    }

    fn failed(kind: OutcomeKind, stderr: &str) -> ExecOutcome {
        let mut o = ExecOutcome::new(kind);
        o.stderr = stderr.into();
        o
    }

    fn sub(o: &ExecOutcome, code: &str, m: &MethodSpec) -> ErrorSubType {
        classify_error(o, code, None, m, &db()).unwrap().sub
    }

    #[test]
    fn fabricated_method() {
        let db = db();
        let m = method(&db, "java.util.Arrays");
        let javac = "Main.java:5: error: cannot find symbol\n        Arrays.createCompatibleGraphics();\n              ^\n  symbol:   method createCompatibleGraphics()\n  location: class Arrays\n1 error\n";
        let l = classify_error(&failed(OutcomeKind::CompileError, javac), "", None, &m, &db).unwrap();
        assert_eq!(l, ErrorTaxonomyLabel { top: ErrorTopType::Hallucination, sub: ErrorSubType::FactualFabrication });
        let janino = "org.codehaus.commons.compiler.CompileException: File 'Main.java', Line 2, Column 102: A method named \"createCompatibleGraphics\" is not declared in any enclosing class nor any supertype, nor through a static import";
        assert_eq!(sub(&failed(OutcomeKind::CompileError, janino), "", &m), ErrorSubType::FactualFabrication);
    }

    #[test]
    fn factual_inconsistency() {
        let db = db();
        let m = method(&db, "javax.management.MBeanParameterInfo");
        let javac = "Main.java:6: error: no suitable constructor found for MBeanParameterInfo(String,String,String,boolean,boolean)\n";
        assert_eq!(sub(&failed(OutcomeKind::CompileError, javac), "", &m), ErrorSubType::FactualInconsistency);
        let janino = "CompileException: File 'Main.java', Line 2, Column 81: No applicable constructor/method found for actual parameters \"String, int\"; candidates are: \"javax.management.MBeanParameterInfo(String, String, String)\"";
        assert_eq!(sub(&failed(OutcomeKind::CompileError, janino), "", &m), ErrorSubType::FactualInconsistency);
    }

    #[test]
    fn compile_categories() {
        let db = db();
        let m = method(&db, "java.util.ArrayList");
        let cases = [
            ("Main.java:3: error: cannot find symbol\n  symbol:   class ArrayList\n", ErrorSubType::MissingImportStatement),
            ("File 'Main.java', Line 1, Column 70: Cannot determine simple type name \"ArrayList\"", ErrorSubType::MissingImportStatement),
            ("Unknown variable or type \"Arrays\"", ErrorSubType::MissingImportStatement),
            ("error: Main is not abstract and does not override abstract method run() in Runnable", ErrorSubType::PolymorphismError),
            ("error: incompatible types: int cannot be converted to String", ErrorSubType::TypeMismatch),
            ("Assignment conversion not possible from type \"int\" to type \"String\"", ErrorSubType::TypeMismatch),
            ("error: non-static method f() cannot be referenced from a static context", ErrorSubType::ApiMisuseCompile),
            ("error: value has private access in String", ErrorSubType::ApiMisuseCompile),
            ("error: exception IOException is never thrown in body of corresponding try statement", ErrorSubType::ExceptionHandlingError),
            ("Main.java:4: error: cannot find symbol\n  symbol:   variable x\n", ErrorSubType::UndeclaredSymbol),
            ("Unknown variable or type \"x\"", ErrorSubType::UndeclaredSymbol),
            ("something odd happened", ErrorSubType::Unclassified),
        ];
        for (diag, want) in cases {
            let l = classify_error(&failed(OutcomeKind::CompileError, diag), "", None, &m, &db).unwrap();
            assert_eq!(l.sub, want, "{diag}");
            if want == ErrorSubType::Unclassified {
                assert_eq!(l.top, ErrorTopType::CompilationError);
            }
        }
    }

    #[test]
    fn exception_handling_is_runtime_category() {
        let db = db();
        let m = method(&db, "java.util.ArrayList");
        let l = classify_error(
            &failed(OutcomeKind::CompileError, "exception IOException is never thrown in body of corresponding try statement"),
            "",
            None,
            &m,
            &db,
        )
        .unwrap();
        assert_eq!(l.top, ErrorTopType::RuntimeError);
    }

    #[test]
    fn runtime_categories() {
        let db = db();
        let m = method(&db, "java.util.ArrayList");
        let code = "public class Main {\n  public static void main(String[] a) {\n    try {\n      int x = 1;\n    } catch (Exception e) {\n      throw new RuntimeException(e);\n    }\n  }\n}\n";
        let trace = "Exception in thread \"main\" java.lang.RuntimeException: boom\n\tat Main.main(Main.java:6)\n";
        assert_eq!(sub(&failed(OutcomeKind::RuntimeError, trace), code, &m), ErrorSubType::ExceptionHandlingError);

        let plain = "public class Main {\n  public static void main(String[] a) throws Exception {\n    go();\n  }\n}\n";
        let cases = [
            ("Exception in thread \"main\" java.net.UnknownHostException: example.invalid\n\tat Main.main(Main.java:3)\n", ErrorSubType::ConnectionError),
            ("Exception in thread \"main\" java.io.FileNotFoundException: data.txt (No such file or directory)\n\tat Main.main(Main.java:3)\n", ErrorSubType::MissingExternalResource),
            ("Exception in thread \"main\" java.awt.HeadlessException\n\tat Main.main(Main.java:3)\n", ErrorSubType::InitializationError),
            ("Exception in thread \"main\" java.lang.IllegalStateException: no\n\tat java.util.ArrayList.add(ArrayList.java:1)\n\tat Main.main(Main.java:3)\n", ErrorSubType::ApiMisuseRuntime),
            ("Exception in thread \"main\" java.lang.ArithmeticException: / by zero\n\tat Main.main(Main.java:3)\n", ErrorSubType::Unclassified),
        ];
        for (err, want) in cases {
            assert_eq!(sub(&failed(OutcomeKind::RuntimeError, err), plain, &m), want, "{err}");
        }
    }

    #[test]
    fn null_source_in_target_constructor() {
        let db = db();
        let m = method(&db, "java.awt.event.MouseEvent");
        let err = "Exception in thread \"main\" java.lang.IllegalArgumentException: null source\n\tat java.base/java.util.EventObject.<init>(EventObject.java:56)\n\tat java.desktop/java.awt.AWTEvent.<init>(AWTEvent.java:337)\n\tat java.desktop/java.awt.event.ComponentEvent.<init>(ComponentEvent.java:120)\n\tat java.desktop/java.awt.event.InputEvent.<init>(InputEvent.java:380)\n\tat java.desktop/java.awt.event.MouseEvent.<init>(MouseEvent.java:690)\n\tat Main.main(Main.java:5)\n";
        let o = failed(OutcomeKind::RuntimeError, err);
        let l = classify_error(&o, "public class Main {}", None, &m, &db).unwrap();
        assert_eq!(l.sub, ErrorSubType::InitializationError);
    }

    #[test]
    fn timeout_and_no_api() {
        let db = db();
        let m = method(&db, "java.awt.Canvas");
        assert_eq!(sub(&ExecOutcome::new(OutcomeKind::Timeout), "", &m), ErrorSubType::TimeoutError);
        assert_eq!(sub(&ExecOutcome::new(OutcomeKind::NoApiInvoked), "", &m), ErrorSubType::InstructionInconsistency);
        let refusal = "I'm sorry, but the method void update(Graphics g) is not part of the Canvas class.";
        let l = classify_error(&ExecOutcome::new(OutcomeKind::NoApiInvoked), "", Some(refusal), &m, &db).unwrap();
        assert_eq!(l, ErrorTaxonomyLabel { top: ErrorTopType::Hallucination, sub: ErrorSubType::ContextInconsistency });
        assert!(matches!(
            classify_error(&ExecOutcome::new(OutcomeKind::Success), "", None, &m, &db),
            Err(ExecError::ClassifySuccess)
        ));
    }

    #[test]
    fn deprecation_only_when_failed() {
        let db = db();
        let m = method(&db, "java.util.ArrayList");
        let mut o = failed(OutcomeKind::RuntimeError, "Exception in thread \"main\" java.lang.ArithmeticException\n");
        o.deprecation_warning = true;
        assert_eq!(sub(&o, "", &m), ErrorSubType::DeprecatedError);
    }
}
