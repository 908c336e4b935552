//! On-disk documentation schema.
//!
//! ```json
//! {"packages":[{"name","description","classes":[{"fqcn","description",
//!   "parent":optional,"fields":[...],"methods":[{"name","returnType",
//!   "params":[{"type","name":optional}],"static":bool,"deprecated":bool,
//!   "summary","description"}]}]}]}
//! ```

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{ApiDocError, ClassDoc, MethodSpec, CTOR_MARKER};
use crate::signature::normalize_type;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DocFile {
    pub packages: Vec<PackageRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PackageRecord {
    pub name: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub classes: Vec<ClassRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassRecord {
    pub fqcn: String,
    #[serde(default)]
    pub description: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent: Option<String>,
    #[serde(default)]
    pub fields: Vec<String>,
    #[serde(default)]
    pub methods: Vec<MethodRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodRecord {
    pub name: String,
    #[serde(rename = "returnType")]
    pub return_type: String,
    #[serde(default)]
    pub params: Vec<ParamRecord>,
    #[serde(rename = "static", default)]
    pub is_static: bool,
    #[serde(default)]
    pub deprecated: bool,
    #[serde(default)]
    pub summary: String,
    #[serde(default)]
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamRecord {
    #[serde(rename = "type")]
    pub ty: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
}

pub fn parse_document(text: &str) -> Result<DocFile, ApiDocError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| ApiDocError::Schema {
        record: e.path().to_string(),
        message: e.inner().to_string(),
    })
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_alphabetic() || c == '_' || c == '$' => {}
        _ => return false,
    }
    chars.all(|c| c.is_alphanumeric() || c == '_' || c == '$')
}

fn is_dotted_identifier(s: &str) -> bool {
    !s.is_empty() && s.split('.').all(is_identifier)
}

pub(super) fn build_class(
    package: &str,
    rec: &ClassRecord,
    record: &str,
) -> Result<ClassDoc, ApiDocError> {
    let schema_err = |field: &str, message: String| ApiDocError::Schema {
        record: format!("{record}.{field}"),
        message,
    };
    let prefix = format!("{package}.");
    let class_name = match rec.fqcn.strip_prefix(&prefix) {
        Some(rest) if is_dotted_identifier(rest) => rest.to_string(),
        _ => {
            return Err(schema_err(
                "fqcn",
                format!("{:?} is not a class of package {package}", rec.fqcn),
            ))
        }
    };
    if let Some(parent) = &rec.parent {
        if !is_dotted_identifier(parent) {
            return Err(schema_err("parent", format!("{parent:?} is not a qualified name")));
        }
    }
    let mut field_names = BTreeSet::new();
    for (fi, f) in rec.fields.iter().enumerate() {
        if !is_identifier(f) {
            return Err(schema_err(&format!("fields[{fi}]"), format!("{f:?} is not an identifier")));
        }
        field_names.insert(f.clone());
    }
    let mut methods = Vec::with_capacity(rec.methods.len());
    for (mi, m) in rec.methods.iter().enumerate() {
        let mrec = format!("methods[{mi}]");
        if !is_identifier(&m.name) && m.name != class_name {
            return Err(schema_err(
                &format!("{mrec}.name"),
                format!("{:?} is not a method name", m.name),
            ));
        }
        let return_type = if m.return_type == CTOR_MARKER {
            CTOR_MARKER.to_string()
        } else {
            let rt = normalize_type(&m.return_type);
            if rt.is_empty() {
                return Err(schema_err(&format!("{mrec}.returnType"), "empty return type".into()));
            }
            rt
        };
        let mut param_types = Vec::with_capacity(m.params.len());
        let mut param_names = Vec::with_capacity(m.params.len());
        for (ai, p) in m.params.iter().enumerate() {
            let ty = normalize_type(&p.ty);
            if ty.is_empty() {
                return Err(schema_err(
                    &format!("{mrec}.params[{ai}].type"),
                    "empty parameter type".into(),
                ));
            }
            param_types.push(ty);
            param_names.push(p.name.clone());
        }
        methods.push(MethodSpec {
            package_name: package.to_string(),
            class_name: class_name.clone(),
            simple_name: m.name.clone(),
            return_type,
            param_types,
            param_names,
            is_static: m.is_static,
            is_deprecated: m.deprecated,
            summary: m.summary.clone(),
            description: m.description.clone(),
        });
    }
    Ok(ClassDoc::new(
        rec.fqcn.clone(),
        package.to_string(),
        class_name,
        rec.description.clone(),
        methods,
        field_names,
        rec.parent.clone(),
    ))
}

pub(super) fn class_record(class: &ClassDoc) -> ClassRecord {
    ClassRecord {
        fqcn: class.fqcn.clone(),
        description: class.description.clone(),
        parent: class.parent_fqcn.clone(),
        fields: class.field_names.iter().cloned().collect(),
        methods: class
            .methods
            .iter()
            .map(|m| MethodRecord {
                name: m.simple_name.clone(),
                return_type: m.return_type.clone(),
                params: m
                    .param_types
                    .iter()
                    .zip(&m.param_names)
                    .map(|(ty, name)| ParamRecord {
                        ty: ty.clone(),
                        name: name.clone(),
                    })
                    .collect(),
                is_static: m.is_static,
                deprecated: m.is_deprecated,
                summary: m.summary.clone(),
                description: m.description.clone(),
            })
            .collect(),
    }
}
