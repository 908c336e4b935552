//! Ground-truth API documentation database.
//!
//! Documentation is loaded from a single JSON file (see [`schema`]) into an
//! immutable [`ApiDatabase`]. Inherited members are never copied into a
//! class; the parent link is kept so callers can look one level up.

mod popularity;
pub mod schema;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use popularity::PopularityWarning;

/// Return-type marker carried by constructors.
pub const CTOR_MARKER: &str = "«ctor»";

#[derive(Debug, Error)]
pub enum ApiDocError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("schema violation at {record}: {message}")]
    Schema { record: String, message: String },
    #[error("duplicate class {0}")]
    DuplicateFqcn(String),
    #[error("popularity table line {line}: {message}")]
    MalformedPopularityRow { line: u64, message: String },
    #[error("popularity table line {line}: negative count for {package}")]
    NegativeCount { line: u64, package: String },
    #[error("unknown class {0}")]
    UnknownClass(String),
}

/// One documented method or constructor.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MethodSpec {
    pub package_name: String,
    /// Nested classes are joined with `.` (`Base64.Decoder`).
    pub class_name: String,
    pub simple_name: String,
    /// Normalized; [`CTOR_MARKER`] for constructors.
    pub return_type: String,
    /// Normalized parameter types in declaration order.
    pub param_types: Vec<String>,
    /// Parameter names when the documentation has them. Never matched on.
    pub param_names: Vec<Option<String>>,
    pub is_static: bool,
    pub is_deprecated: bool,
    pub summary: String,
    pub description: String,
}

impl MethodSpec {
    pub fn is_constructor(&self) -> bool {
        self.return_type == CTOR_MARKER
    }

    pub fn fqcn(&self) -> String {
        format!("{}.{}", self.package_name, self.class_name)
    }

    /// `returnType name(Type name, ...)`, or `Name(Type name, ...)` for a
    /// constructor. Parameter names are included when stored.
    pub fn display_signature(&self) -> String {
        let params = self
            .param_types
            .iter()
            .enumerate()
            .map(|(i, ty)| match self.param_names.get(i).and_then(|n| n.as_deref()) {
                Some(name) => format!("{ty} {name}"),
                None => ty.clone(),
            })
            .collect::<Vec<_>>()
            .join(", ");
        if self.is_constructor() {
            format!("{}({})", self.simple_name, params)
        } else {
            format!("{} {}({})", self.return_type, self.simple_name, params)
        }
    }

    /// Same as [`display_signature`](Self::display_signature) but with
    /// parameter types only.
    pub fn type_signature(&self) -> String {
        let params = self.param_types.join(", ");
        if self.is_constructor() {
            format!("{}({})", self.simple_name, params)
        } else {
            format!("{} {}({})", self.return_type, self.simple_name, params)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ClassDoc {
    pub fqcn: String,
    pub package_name: String,
    pub class_name: String,
    pub description: String,
    pub methods: Vec<MethodSpec>,
    pub field_names: BTreeSet<String>,
    pub parent_fqcn: Option<String>,
    #[serde(skip)]
    overloads: HashMap<String, Vec<usize>>,
}

impl ClassDoc {
    fn new(
        fqcn: String,
        package_name: String,
        class_name: String,
        description: String,
        methods: Vec<MethodSpec>,
        field_names: BTreeSet<String>,
        parent_fqcn: Option<String>,
    ) -> Self {
        let mut overloads: HashMap<String, Vec<usize>> = HashMap::new();
        for (i, m) in methods.iter().enumerate() {
            overloads.entry(m.simple_name.clone()).or_default().push(i);
        }
        ClassDoc {
            fqcn,
            package_name,
            class_name,
            description,
            methods,
            field_names,
            parent_fqcn,
            overloads,
        }
    }

    /// Methods sharing `name`, in declaration order.
    pub fn overloads(&self, name: &str) -> Vec<&MethodSpec> {
        self.overloads
            .get(name)
            .map(|ix| ix.iter().map(|&i| &self.methods[i]).collect())
            .unwrap_or_default()
    }

    pub fn has_method_named(&self, name: &str) -> bool {
        self.overloads.contains_key(name)
    }

    pub fn method_names(&self) -> impl Iterator<Item = &str> {
        self.overloads.keys().map(String::as_str)
    }

    /// Last dotted segment of the class name (`Decoder` for `Base64.Decoder`).
    pub fn simple_class_name(&self) -> &str {
        self.class_name.rsplit('.').next().unwrap_or(&self.class_name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PackageDoc {
    pub name: String,
    pub description: String,
    pub class_fqcns: Vec<String>,
}

/// Immutable, shareable ground truth.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ApiDatabase {
    packages: BTreeMap<String, PackageDoc>,
    classes: BTreeMap<String, ClassDoc>,
    popularity: BTreeMap<String, u64>,
}

impl ApiDatabase {
    /// Reads and indexes a documentation file.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ApiDocError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ApiDocError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json_str(&text)
    }

    pub fn from_json_str(text: &str) -> Result<Self, ApiDocError> {
        let doc = schema::parse_document(text)?;
        Self::from_document(&doc)
    }

    pub fn from_document(doc: &schema::DocFile) -> Result<Self, ApiDocError> {
        let mut packages = BTreeMap::new();
        let mut classes = BTreeMap::new();
        for (pi, pkg) in doc.packages.iter().enumerate() {
            let mut class_fqcns = Vec::with_capacity(pkg.classes.len());
            for (ci, cls) in pkg.classes.iter().enumerate() {
                let record = format!("packages[{pi}].classes[{ci}]");
                let class = schema::build_class(&pkg.name, cls, &record)?;
                if classes.contains_key(&class.fqcn) {
                    return Err(ApiDocError::DuplicateFqcn(class.fqcn));
                }
                class_fqcns.push(class.fqcn.clone());
                classes.insert(class.fqcn.clone(), class);
            }
            let prior = packages.insert(
                pkg.name.clone(),
                PackageDoc {
                    name: pkg.name.clone(),
                    description: pkg.description.clone(),
                    class_fqcns,
                },
            );
            if prior.is_some() {
                return Err(ApiDocError::Schema {
                    record: format!("packages[{pi}].name"),
                    message: format!("package {} listed twice", pkg.name),
                });
            }
        }
        Ok(ApiDatabase {
            packages,
            classes,
            popularity: BTreeMap::new(),
        })
    }

    /// Serializes back to the documentation schema.
    pub fn to_document(&self) -> schema::DocFile {
        schema::DocFile {
            packages: self
                .packages
                .values()
                .map(|p| schema::PackageRecord {
                    name: p.name.clone(),
                    description: p.description.clone(),
                    classes: p
                        .class_fqcns
                        .iter()
                        .map(|f| schema::class_record(&self.classes[f]))
                        .collect(),
                })
                .collect(),
        }
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("document serializes")
    }

    /// Exact, case-sensitive lookup.
    pub fn query_class(&self, fqcn: &str) -> Option<&ClassDoc> {
        self.classes.get(fqcn)
    }

    pub fn class(&self, fqcn: &str) -> Result<&ClassDoc, ApiDocError> {
        self.query_class(fqcn)
            .ok_or_else(|| ApiDocError::UnknownClass(fqcn.to_string()))
    }

    pub fn is_field(&self, fqcn: &str, name: &str) -> Result<bool, ApiDocError> {
        let class = self.class(fqcn)?;
        Ok(!name.is_empty() && class.field_names.contains(name))
    }

    pub fn package(&self, name: &str) -> Option<&PackageDoc> {
        self.packages.get(name)
    }

    pub fn packages(&self) -> impl Iterator<Item = &PackageDoc> {
        self.packages.values()
    }

    /// Classes in fqcn order.
    pub fn classes(&self) -> impl Iterator<Item = &ClassDoc> {
        self.classes.values()
    }

    pub fn class_count(&self) -> usize {
        self.classes.len()
    }

    /// Repository count for a package; 0 when the table has no row for it.
    pub fn popularity(&self, package: &str) -> u64 {
        self.popularity.get(package).copied().unwrap_or(0)
    }

    pub fn popularity_table(&self) -> &BTreeMap<String, u64> {
        &self.popularity
    }

    /// Classes whose simple class name (last segment) equals `name`.
    pub fn classes_by_simple_name<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a ClassDoc> + 'a {
        self.classes
            .values()
            .filter(move |c| c.simple_class_name() == name || c.class_name == name)
    }

    /// True if any documented class declares a method with this name.
    pub fn any_method_named(&self, name: &str) -> bool {
        self.classes.values().any(|c| c.has_method_named(name))
    }

    /// Returns a copy of the database with the popularity table read from
    /// `path` merged in.
    pub fn ingest_popularity(&self, path: impl AsRef<Path>) -> Result<ApiDatabase, ApiDocError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ApiDocError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let (db, warnings) = self.ingest_popularity_str(&text)?;
        for w in &warnings {
            tracing::warn!("{}: {}", path.display(), w);
        }
        Ok(db)
    }

    pub fn ingest_popularity_str(
        &self,
        text: &str,
    ) -> Result<(ApiDatabase, Vec<PopularityWarning>), ApiDocError> {
        let (table, warnings) = popularity::parse(text)?;
        let mut db = self.clone();
        db.popularity.extend(table);
        Ok((db, warnings))
    }

    pub fn with_popularity_table(&self, table: BTreeMap<String, u64>) -> ApiDatabase {
        let mut db = self.clone();
        db.popularity = table;
        db
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const FIXTURE: &str = r#"{
      "packages": [
        {"name": "java.util", "description": "Collections framework.",
         "classes": [
           {"fqcn": "java.util.Hashtable", "description": "A hash table.", "parent": "java.util.Dictionary",
            "fields": [],
            "methods": [
              {"name": "remove", "returnType": "V", "params": [{"type": "Object", "name": "key"}], "static": false, "deprecated": false, "summary": "Removes the key.", "description": ""},
              {"name": "remove", "returnType": "boolean", "params": [{"type": "Object", "name": "key"}, {"type": "Object", "name": "value"}], "static": false, "deprecated": false, "summary": "Removes the entry.", "description": ""}
            ]},
           {"fqcn": "java.util.Base64.Decoder", "description": "Decoder.", "fields": [],
            "methods": [
              {"name": "decode", "returnType": "byte[]", "params": [{"type": "java.lang.String"}], "static": false, "deprecated": false, "summary": "Decodes.", "description": ""}
            ]}
         ]},
        {"name": "java.lang", "description": "Core.",
         "classes": [
           {"fqcn": "java.lang.Integer", "description": "Integer wrapper.", "fields": ["MAX_VALUE", "MIN_VALUE"],
            "methods": [
              {"name": "Integer", "returnType": "«ctor»", "params": [{"type": "int"}], "static": false, "deprecated": true, "summary": "Ctor.", "description": ""},
              {"name": "parseInt", "returnType": "int", "params": [{"type": "String", "name": "s"}], "static": true, "deprecated": false, "summary": "Parses.", "description": ""},
              {"name": "valueOf", "returnType": "Integer", "params": [{"type": "int"}], "static": true, "deprecated": false, "summary": "Boxes.", "description": ""},
              {"name": "valueOf", "returnType": "Integer", "params": [{"type": "String"}], "static": true, "deprecated": false, "summary": "Parses and boxes.", "description": ""},
              {"name": "toString", "returnType": "String", "params": [], "static": false, "deprecated": false, "summary": "Text.", "description": ""}
            ]}
         ]}
      ]
    }"#;

    fn fixture() -> ApiDatabase {
        ApiDatabase::from_json_str(FIXTURE).unwrap()
    }

    #[test]
    fn hashtable_remove_has_two_overloads() {
        let db = fixture();
        let ht = db.query_class("java.util.Hashtable").unwrap();
        assert_eq!(ht.overloads("remove").len(), 2);
        assert_eq!(ht.parent_fqcn.as_deref(), Some("java.util.Dictionary"));
    }

    #[test]
    fn methods_kept_in_file_order() {
        let db = fixture();
        let int = db.query_class("java.lang.Integer").unwrap();
        let names: Vec<_> = int.methods.iter().map(|m| m.simple_name.as_str()).collect();
        assert_eq!(names, ["Integer", "parseInt", "valueOf", "valueOf", "toString"]);
        assert!(int.methods[0].is_constructor());
    }

    #[test]
    fn empty_database() {
        let db = ApiDatabase::from_json_str(r#"{"packages": []}"#).unwrap();
        assert_eq!(db.class_count(), 0);
        assert!(db.query_class("java.util.Hashtable").is_none());
    }

    #[test]
    fn lookup_is_case_sensitive_and_handles_nested() {
        let db = fixture();
        assert!(db.query_class("java.util.HashTable").is_none());
        let dec = db.query_class("java.util.Base64.Decoder").unwrap();
        assert_eq!(dec.class_name, "Base64.Decoder");
        assert_eq!(dec.package_name, "java.util");
        assert_eq!(dec.methods[0].param_types, ["String"]);
    }

    #[test]
    fn field_lookup() {
        let db = fixture();
        assert!(db.is_field("java.lang.Integer", "MAX_VALUE").unwrap());
        assert!(!db.is_field("java.lang.Integer", "parseInt").unwrap());
        assert!(!db.is_field("java.lang.Integer", "").unwrap());
        assert!(matches!(
            db.is_field("java.lang.Long", "MAX_VALUE"),
            Err(ApiDocError::UnknownClass(_))
        ));
    }

    #[test]
    fn duplicate_fqcn_rejected() {
        let text = r#"{"packages": [{"name": "a", "description": "",
          "classes": [{"fqcn": "a.B", "description": "", "fields": [], "methods": []},
                      {"fqcn": "a.B", "description": "", "fields": [], "methods": []}]}]}"#;
        assert!(matches!(
            ApiDatabase::from_json_str(text),
            Err(ApiDocError::DuplicateFqcn(f)) if f == "a.B"
        ));
    }

    #[test]
    fn schema_error_names_record() {
        let text = r#"{"packages": [{"name": "a", "description": "",
          "classes": [{"fqcn": "a.B", "description": "", "fields": [],
             "methods": [{"name": "f(", "returnType": "int", "params": [], "static": false,
                          "deprecated": false, "summary": "", "description": ""}]}]}]}"#;
        match ApiDatabase::from_json_str(text) {
            Err(ApiDocError::Schema { record, .. }) => {
                assert_eq!(record, "packages[0].classes[0].methods[0].name")
            }
            other => panic!("unexpected {other:?}"),
        }
        let text = r#"{"packages": [{"name": "a", "classes": 3}]}"#;
        match ApiDatabase::from_json_str(text) {
            Err(ApiDocError::Schema { record, .. }) => assert!(record.starts_with("packages[0]")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_file() {
        assert!(matches!(
            ApiDatabase::load("/nonexistent/doc.json"),
            Err(ApiDocError::Io { .. })
        ));
    }

    #[test]
    fn round_trip() {
        let db = fixture();
        let again = ApiDatabase::from_json_str(&db.to_json_string()).unwrap();
        assert_eq!(db, again);
    }

    #[test]
    fn overload_sets_cover_methods() {
        let db = fixture();
        for class in db.classes() {
            let mut total = 0;
            for name in class.method_names() {
                total += class.overloads(name).len();
            }
            assert_eq!(total, class.methods.len());
        }
    }

    #[test]
    fn popularity_ingest() {
        let db = fixture();
        let (db, warnings) = db
            .ingest_popularity_str("package,count\njava.util,71558\norg.other,3\n")
            .unwrap();
        assert!(warnings.is_empty());
        assert_eq!(db.popularity("java.util"), 71558);
        assert_eq!(db.popularity("org.other"), 3);
        assert_eq!(db.popularity("java.lang"), 0);
    }
}
