use std::collections::BTreeMap;
use std::fmt;

use super::ApiDocError;

/// Non-fatal finding while reading the popularity table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PopularityWarning {
    pub line: u64,
    pub message: String,
}

impl fmt::Display for PopularityWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

/// Parses `package,count` rows. Duplicate packages: the last row wins.
pub(super) fn parse(
    text: &str,
) -> Result<(BTreeMap<String, u64>, Vec<PopularityWarning>), ApiDocError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());

    let header = reader.headers().map_err(|e| ApiDocError::MalformedPopularityRow {
        line: 1,
        message: e.to_string(),
    })?;
    if header.len() != 2 || &header[0] != "package" || &header[1] != "count" {
        return Err(ApiDocError::MalformedPopularityRow {
            line: 1,
            message: "expected header `package,count`".into(),
        });
    }

    let mut table = BTreeMap::new();
    let mut warnings = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| ApiDocError::MalformedPopularityRow {
            line: e.position().map(|p| p.line()).unwrap_or(0),
            message: e.to_string(),
        })?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        if row.len() != 2 || row[0].is_empty() {
            return Err(ApiDocError::MalformedPopularityRow {
                line,
                message: format!("expected 2 fields, found {}", row.len()),
            });
        }
        let package = row[0].to_string();
        let count: i128 = row[1]
            .parse()
            .map_err(|_| ApiDocError::MalformedPopularityRow {
                line,
                message: format!("count {:?} is not an integer", &row[1]),
            })?;
        if count < 0 {
            return Err(ApiDocError::NegativeCount { line, package });
        }
        let count = u64::try_from(count).map_err(|_| ApiDocError::MalformedPopularityRow {
            line,
            message: "count out of range".into(),
        })?;
        if table.insert(package.clone(), count).is_some() {
            warnings.push(PopularityWarning {
                line,
                message: format!("duplicate row for {package}; keeping this one"),
            });
        }
    }
    Ok((table, warnings))
}
