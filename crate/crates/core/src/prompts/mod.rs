//! Prompt templates and extraction of structured output from responses.

mod extract;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::apidoc::{ApiDatabase, ClassDoc, MethodSpec};
use crate::digest::sha256_hex;

pub use extract::{extract_api_line_spans, extract_api_lines, extract_code, parse_probe_answer, ProbeAnswer};

pub const DEFAULT_SNIPPET_NUMBER: u32 = 5;
pub const DEFAULT_API_LIST_SIZE: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PromptKind {
    Task1,
    Task2,
    ProbeClass,
    ProbeApi,
    Task1RagDesc,
    Task1RagDescApi,
    Task2RagDesc,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PromptError {
    #[error("class {0} is not in the documentation database")]
    UnknownClass(String),
    #[error("method {method} is not documented on {fqcn}")]
    UnknownMethod { fqcn: String, method: String },
    #[error("{kind:?} needs {what}")]
    MissingContext { kind: PromptKind, what: &'static str },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptSubject {
    pub fqcn: String,
    pub method: Option<MethodSpec>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenderedPrompt {
    pub kind: PromptKind,
    pub text: String,
    pub subject: PromptSubject,
    pub digest: String,
}

impl RenderedPrompt {
    fn new(kind: PromptKind, text: String, fqcn: &str, method: Option<&MethodSpec>) -> Self {
        RenderedPrompt {
            kind,
            digest: sha256_hex(&text),
            text,
            subject: PromptSubject {
                fqcn: fqcn.to_string(),
                method: method.cloned(),
            },
        }
    }
}

const TASK1_BODY: &str = "@@Instruction:
I want to use {fqcn} class from Java. Recommend a list of useful with at most {n} API method for this class, excluding method inherent from its parent class. For each API method specify its return type and parameters in the below format:
\"API signature\": Description of the API

For example:
\"boolean add(E e)\": This method appends the specified element to the end of this list.
...
Response:
";

const TASK2_BODY: &str = "@@Instruction:
I want to learn how to use {method} from {fqcn}. Generate a complete code example of this method. The code example needs to be executable with import statement and put the method and code snippet in the format below:
Code snippet:
public class Main {

public static void main(String[] args) {

}
}
For example:
boolean add(E e): This method appends the specified element to the end of this list.
Code snippet:
import java.util.ArrayList;
public class Main {

public static void main(String[] args) {

ArrayList<String> list = new ArrayList<>();

list.add(\"Hello\");

System.out.println(list);

}
}
Response:
";

fn task1_body(fqcn: &str, n: u32) -> String {
    TASK1_BODY.replace("{fqcn}", fqcn).replace("{n}", &n.to_string())
}

fn task2_body(m: &MethodSpec, fqcn: &str) -> String {
    TASK2_BODY
        .replace("{method}", &m.display_signature())
        .replace("{fqcn}", fqcn)
}

pub fn render_task1(cls: &ClassDoc, snippet_number: u32) -> RenderedPrompt {
    RenderedPrompt::new(
        PromptKind::Task1,
        task1_body(&cls.fqcn, snippet_number),
        &cls.fqcn,
        None,
    )
}

pub fn render_task2(m: &MethodSpec, cls: &ClassDoc) -> RenderedPrompt {
    RenderedPrompt::new(PromptKind::Task2, task2_body(m, &cls.fqcn), &cls.fqcn, Some(m))
}

pub fn render_probe_class(cls: &ClassDoc) -> RenderedPrompt {
    let text = format!(
        "@@Instruction:\nDo you know the {fqcn} class from Java? Answer with exactly Yes or No.\nClass: {fqcn}\nResponse:\n",
        fqcn = cls.fqcn
    );
    RenderedPrompt::new(PromptKind::ProbeClass, text, &cls.fqcn, None)
}

pub fn render_probe_api(m: &MethodSpec) -> RenderedPrompt {
    let fqcn = m.fqcn();
    let text = format!(
        "@@Instruction:\nDo you know the {sig} method from {fqcn}? Answer with exactly Yes or No.\nAPI: {fqcn}#{sig}\nResponse:\n",
        sig = m.display_signature(),
    );
    RenderedPrompt::new(PromptKind::ProbeApi, text, &fqcn, Some(m))
}

fn description_line(db: &ApiDatabase, cls: &ClassDoc) -> String {
    let pkg = db
        .package(&cls.package_name)
        .map(|p| p.description.as_str())
        .unwrap_or("");
    format!(
        "Package description: {}; Class description: {}\n",
        one_line(pkg),
        one_line(&cls.description)
    )
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Task-1 prompt preceded by package and class descriptions, and with
/// `api_list_size > 0` by the first documented signatures.
pub fn render_task1_rag(
    db: &ApiDatabase,
    fqcn: &str,
    snippet_number: u32,
    api_list_size: Option<usize>,
) -> Result<RenderedPrompt, PromptError> {
    let cls = db
        .query_class(fqcn)
        .ok_or_else(|| PromptError::UnknownClass(fqcn.to_string()))?;
    let mut text = description_line(db, cls);
    let kind = match api_list_size {
        None => PromptKind::Task1RagDesc,
        Some(n) => {
            if cls.methods.is_empty() {
                return Err(PromptError::MissingContext {
                    kind: PromptKind::Task1RagDescApi,
                    what: "at least one documented method",
                });
            }
            let sigs: Vec<String> = cls
                .methods
                .iter()
                .take(n.max(1))
                .map(MethodSpec::display_signature)
                .collect();
            text.push_str(&format!("Existing APIs: {}\n", sigs.join("; ")));
            PromptKind::Task1RagDescApi
        }
    };
    text.push_str(&task1_body(fqcn, snippet_number));
    Ok(RenderedPrompt::new(kind, text, fqcn, None))
}

/// Task-2 prompt preceded by descriptions and the method's summary, return
/// type and parameters.
pub fn render_task2_rag(db: &ApiDatabase, m: &MethodSpec) -> Result<RenderedPrompt, PromptError> {
    let fqcn = m.fqcn();
    let cls = db
        .query_class(&fqcn)
        .ok_or_else(|| PromptError::UnknownClass(fqcn.clone()))?;
    if !cls.methods.contains(m) {
        return Err(PromptError::UnknownMethod {
            fqcn,
            method: m.display_signature(),
        });
    }
    let mut text = description_line(db, cls);
    let params = if m.param_types.is_empty() {
        "none".to_string()
    } else {
        m.param_types
            .iter()
            .enumerate()
            .map(|(i, ty)| match m.param_names.get(i).and_then(|n| n.as_deref()) {
                Some(n) => format!("{ty} {n}"),
                None => ty.clone(),
            })
            .collect::<Vec<_>>()
            .join(", ")
    };
    let ret = if m.is_constructor() {
        format!("{} (constructor)", cls.class_name)
    } else {
        m.return_type.clone()
    };
    text.push_str(&format!(
        "API description: {}; Return type: {}; Parameters: {}\n",
        one_line(&m.summary),
        ret,
        params
    ));
    text.push_str(&task2_body(m, &fqcn));
    Ok(RenderedPrompt::new(PromptKind::Task2RagDesc, text, &fqcn, Some(m)))
}

#[cfg(test)]
mod tests {
    use super::*;

    const DB: &str = r#"{"packages":[{"name":"java.util","description":"Contains the collections framework.","classes":[
      {"fqcn":"java.util.ArrayList","description":"Resizable-array implementation.","methods":[
        {"name":"add","returnType":"boolean","params":[{"type":"E","name":"e"}],"summary":"Appends the specified element."},
        {"name":"clear","returnType":"void","params":[],"summary":"Removes all of the elements."},
        {"name":"ArrayList","returnType":"«ctor»","params":[{"type":"int","name":"initialCapacity"}],"summary":"Constructs an empty list."}
      ]}]}]}"#;

    fn db() -> ApiDatabase {
        ApiDatabase::from_json_str(DB).unwrap()
    }

    #[test]
    fn task1_substitution() {
        let db = db();
        let cls = db.query_class("java.util.ArrayList").unwrap();
        let p = render_task1(cls, 5);
        assert!(p.text.contains("I want to use java.util.ArrayList class from Java"));
        assert!(p.text.contains("at most 5"));
        assert!(render_task1(cls, 1).text.contains("at most 1 API method"));
        assert_eq!(p.digest, render_task1(cls, 5).digest);
        assert_eq!(p.digest, sha256_hex(&p.text));
    }

    #[test]
    fn task2_method_rendering() {
        let db = db();
        let cls = db.query_class("java.util.ArrayList").unwrap();
        let p = render_task2(&cls.methods[0], cls);
        assert!(p.text.contains("how to use boolean add(E e) from java.util.ArrayList"));
        assert!(p.text.contains("public class Main {"));
        let ctor = render_task2(&cls.methods[2], cls);
        assert!(ctor.text.contains("how to use ArrayList(int initialCapacity) from"));
        assert!(!ctor.text.contains(crate::apidoc::CTOR_MARKER));
    }

    #[test]
    fn probes() {
        let db = db();
        let cls = db.query_class("java.util.ArrayList").unwrap();
        let p = render_probe_class(cls);
        assert!(p.text.contains("java.util.ArrayList") && p.text.contains("Answer with exactly Yes or No."));
        let p = render_probe_api(&cls.methods[0]);
        assert!(p.text.contains("boolean add(E e)"));
        assert!(!p.text.contains("For example"));
    }

    #[test]
    fn rag_variants() {
        let db = db();
        let base = render_task1(db.query_class("java.util.ArrayList").unwrap(), 5).text;
        let p = render_task1_rag(&db, "java.util.ArrayList", 5, None).unwrap();
        assert_eq!(
            p.text,
            format!("Package description: Contains the collections framework.; Class description: Resizable-array implementation.\n{base}")
        );
        let p = render_task1_rag(&db, "java.util.ArrayList", 5, Some(10)).unwrap();
        let line = p.text.lines().nth(1).unwrap();
        assert_eq!(line, "Existing APIs: boolean add(E e); void clear(); ArrayList(int initialCapacity)");
        assert!(p.text.ends_with(&base));

        let m = &db.query_class("java.util.ArrayList").unwrap().methods[0];
        let p = render_task2_rag(&db, m).unwrap();
        assert!(p.text.contains("API description: Appends the specified element.; Return type: boolean; Parameters: E e"));
        assert!(matches!(
            render_task1_rag(&db, "java.util.Nope", 5, None),
            Err(PromptError::UnknownClass(_))
        ));
    }
}
