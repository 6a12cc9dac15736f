//! Column schemas: which column is the response, which are explanatory or
//! ignored, and which explanatory columns are 0/1 dummies (checked, not
//! assumed). Schemas come from a TOML file of `[[column]]` entries or are
//! derived from the header with everything treated as continuous.

use std::path::Path;

use regmask_core::Dataset;

use crate::csv_io::NumericTable;
use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColumnKind {
    Continuous,
    Dummy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColumnRole {
    Response,
    Explanatory,
    Ignored,
}

#[derive(Debug, Clone)]
pub struct ColumnSchema {
    pub name: String,
    pub kind: ColumnKind,
    pub role: ColumnRole,
}

/// Schema used when no schema file is given: the named response (or the
/// first column), everything else a continuous explanatory variable.
pub fn default_schema(
    headers: &[String],
    response: Option<&str>,
) -> CliResult<Vec<ColumnSchema>> {
    let response_name = match response {
        Some(name) => {
            if !headers.iter().any(|h| h == name) {
                return Err(CliError::Data(format!(
                    "response column '{name}' not in file header"
                )));
            }
            name.to_string()
        }
        None => headers[0].clone(),
    };
    Ok(headers
        .iter()
        .map(|h| ColumnSchema {
            name: h.clone(),
            kind: ColumnKind::Continuous,
            role: if *h == response_name {
                ColumnRole::Response
            } else {
                ColumnRole::Explanatory
            },
        })
        .collect())
}

/// Loads a TOML schema: repeated `[[column]]` tables with `name`, optional
/// `kind` (continuous | dummy, default continuous), and optional `role`
/// (response | explanatory | ignored, default explanatory).
pub fn load_schema(path: &Path) -> CliResult<Vec<ColumnSchema>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Data(format!("cannot read schema {}: {e}", path.display())))?;
    let table: toml::Table = text
        .parse()
        .map_err(|e| CliError::Data(format!("schema {}: {e}", path.display())))?;
    let columns = table
        .get("column")
        .and_then(toml::Value::as_array)
        .ok_or_else(|| {
            CliError::Data(format!(
                "schema {}: expected [[column]] entries",
                path.display()
            ))
        })?;
    let mut out = Vec::with_capacity(columns.len());
    for (i, entry) in columns.iter().enumerate() {
        let entry = entry.as_table().ok_or_else(|| {
            CliError::Data(format!(
                "schema {}: column {} is not a table",
                path.display(),
                i + 1
            ))
        })?;
        let name = entry
            .get("name")
            .and_then(toml::Value::as_str)
            .ok_or_else(|| {
                CliError::Data(format!(
                    "schema {}: column {} has no name",
                    path.display(),
                    i + 1
                ))
            })?;
        let kind = match entry
            .get("kind")
            .and_then(toml::Value::as_str)
            .unwrap_or("continuous")
        {
            "continuous" => ColumnKind::Continuous,
            "dummy" => ColumnKind::Dummy,
            other => {
                return Err(CliError::Data(format!(
                    "schema {}: column '{name}': unknown kind '{other}'",
                    path.display()
                )))
            }
        };
        let role = match entry
            .get("role")
            .and_then(toml::Value::as_str)
            .unwrap_or("explanatory")
        {
            "response" => ColumnRole::Response,
            "explanatory" => ColumnRole::Explanatory,
            "ignored" => ColumnRole::Ignored,
            other => {
                return Err(CliError::Data(format!(
                    "schema {}: column '{name}': unknown role '{other}'",
                    path.display()
                )))
            }
        };
        out.push(ColumnSchema {
            name: name.to_string(),
            kind,
            role,
        });
    }
    validate_schema(&out)?;
    Ok(out)
}

fn validate_schema(schema: &[ColumnSchema]) -> CliResult<()> {
    let responses = schema
        .iter()
        .filter(|c| c.role == ColumnRole::Response)
        .count();
    if responses != 1 {
        return Err(CliError::Data(format!(
            "schema must name exactly one response column, found {responses}"
        )));
    }
    for (i, c) in schema.iter().enumerate() {
        if schema[..i].iter().any(|o| o.name == c.name) {
            return Err(CliError::Data(format!(
                "schema lists column '{}' twice",
                c.name
            )));
        }
    }
    Ok(())
}

/// Picks the schema for a run. A schema file pins the response itself, so
/// combining it with `--response` is rejected rather than silently resolved.
pub fn resolve_schema(
    table: &NumericTable,
    schema_path: Option<&Path>,
    response: Option<&str>,
) -> CliResult<Vec<ColumnSchema>> {
    match schema_path {
        Some(p) => {
            if response.is_some() {
                return Err(CliError::Usage(
                    "--response cannot be combined with --schema; set the role in the schema file"
                        .into(),
                ));
            }
            load_schema(p)
        }
        None => default_schema(&table.headers, response),
    }
}

/// Checks the schema against the file and assembles the regression dataset.
/// Explanatory columns keep their file order. Returns the dataset and the
/// response column's index in the table.
pub fn build_dataset(
    table: &NumericTable,
    schema: &[ColumnSchema],
) -> CliResult<(Dataset, usize)> {
    for c in schema {
        if table.column_index(&c.name).is_none() {
            return Err(CliError::Data(format!(
                "schema column '{}' not in file header",
                c.name
            )));
        }
    }
    let roles: Vec<&ColumnSchema> = table
        .headers
        .iter()
        .map(|h| {
            schema
                .iter()
                .find(|c| &c.name == h)
                .ok_or_else(|| {
                    CliError::Data(format!("file column '{h}' is missing from the schema"))
                })
        })
        .collect::<CliResult<_>>()?;

    let mut response_idx = None;
    let mut explanatory: Vec<(String, Vec<f64>)> = Vec::new();
    for (j, header) in table.headers.iter().enumerate() {
        let c = roles[j];
        if c.kind == ColumnKind::Dummy {
            if let Some(i) = table.columns[j].iter().position(|&v| v != 0.0 && v != 1.0) {
                return Err(CliError::Data(format!(
                    "row {}, column '{header}': dummy columns may only hold 0 or 1, found {}",
                    i + 1,
                    table.columns[j][i]
                )));
            }
        }
        match c.role {
            ColumnRole::Response => response_idx = Some(j),
            ColumnRole::Explanatory => explanatory.push((header.clone(), table.columns[j].clone())),
            ColumnRole::Ignored => {}
        }
    }
    let response_idx = response_idx.ok_or_else(|| {
        CliError::Data("schema names no response column present in the file".into())
    })?;
    let y = table.columns[response_idx].clone();
    let dataset = Dataset::from_columns(&explanatory, &table.headers[response_idx], y)?;
    Ok((dataset, response_idx))
}
